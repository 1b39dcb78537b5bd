//! Embedded reference data from the 2012 northwest Iran study period.

/// The 41 M≥4 target events, March to August 2012, in the generic catalog
/// CSV schema.
pub const TARGET_EVENTS_CSV: &str = include_str!("../fixtures/target_events.csv");
/// Grouping of the target events into 25 main-shock groups.
pub const TARGET_GROUPS_JSON: &str = include_str!("../fixtures/target_groups.json");
/// Hand-encoded VP anomalies whose timing reproduces the reference VP
/// warning table. A2 and A4 fall inside event sequences; A8 and A11 are
/// false alarms. A10 precedes two groups; its onset is placed so the two
/// lead times sum to the listed 71 h + 94 h.
pub const VP_ANOMALIES_JSON: &str = include_str!("../fixtures/vp_anomalies.json");
/// Reference CS warning table as pre-matched rows, with the three false
/// alarms appended.
pub const CS_WARNINGS_CSV: &str = include_str!("../fixtures/cs_warnings.csv");
