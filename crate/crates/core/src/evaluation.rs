//! Scoring anomalies against a target catalog: warning matching, confusion
//! counts, positive predictive value, lead-time statistics and
//! cross-validated parameter choice.
//!
//! All times here are `f64` seconds since the catalog epoch; statistics are
//! reported in hours.

use std::collections::HashSet;
use std::io::{Read, Write};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::catalog::EventGroup;
use crate::error::{Error, Result};
use crate::pipeline::{detect, Anomaly, DetectConfig, Measure};
use crate::scalar::Scalar;
use crate::spiketrain::SpikeTrain;
use crate::units::{format_timestamp, instant, parse_timestamp, SECONDS_PER_HOUR};

/// Default warning horizon, hours.
pub const DEFAULT_HORIZON_HOURS: f64 = 168.0;

/// An anomaly reduced to its causally available interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Warning {
    pub label: String,
    /// End of the first exceeding window, seconds.
    pub onset: f64,
    /// End of the last exceeding window, seconds.
    pub offset: f64,
}

impl<T: Scalar> From<&Anomaly<T>> for Warning {
    fn from(a: &Anomaly<T>) -> Self {
        Warning { label: a.label.clone(), onset: a.warning_onset().as_f64(), offset: a.warning_offset().as_f64() }
    }
}

/// How warnings are credited to event groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchPolicy {
    /// Every group whose first event follows the warning onset within the
    /// horizon is credited.
    #[default]
    Horizon,
    /// Only the first following group within the horizon is credited, plus
    /// later groups that start while the warning is still active.
    NextGroup,
}

impl std::str::FromStr for MatchPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "horizon" => Ok(Self::Horizon),
            "next-group" | "next_group" => Ok(Self::NextGroup),
            other => Err(Error::InvalidInput(format!("unknown match policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningDuration {
    Hours(f64),
    /// The warning was still active when the first event occurred.
    UpToEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarningMatch {
    pub group: EventGroup,
    /// Label of the earliest credited warning.
    pub anomaly: Option<String>,
    /// Hours from the earliest credited warning onset to the first event.
    pub precursory_time: Option<f64>,
    pub duration: Option<WarningDuration>,
    /// Every warning credited to this group.
    pub supporting: Vec<String>,
}

impl WarningMatch {
    pub fn is_detected(&self) -> bool {
        self.anomaly.is_some()
    }

    /// Duration in hours, counting "up to the event" as the precursory time.
    pub fn duration_hours(&self) -> Option<f64> {
        match self.duration? {
            WarningDuration::Hours(h) => Some(h),
            WarningDuration::UpToEvent => self.precursory_time,
        }
    }
}

/// True when the warning onset falls inside an ongoing sequence, between a
/// group's first and last member.
fn during_sequence(w: &Warning, groups: &[EventGroup]) -> bool {
    groups.iter().any(|g| {
        let first = g.first_event().origin_time;
        let last = g.members.last().unwrap().origin_time;
        w.onset >= first && w.onset <= last
    })
}

fn credited_groups(w: &Warning, groups: &[EventGroup], horizon: f64, policy: MatchPolicy) -> Vec<usize> {
    let in_horizon = |g: &EventGroup| {
        let t = g.first_event().origin_time;
        w.onset < t && w.onset >= t - horizon
    };
    match policy {
        MatchPolicy::Horizon => (0..groups.len()).filter(|&i| in_horizon(&groups[i])).collect(),
        MatchPolicy::NextGroup => {
            let Some(next) = (0..groups.len()).find(|&i| groups[i].first_event().origin_time > w.onset) else {
                return Vec::new();
            };
            if !in_horizon(&groups[next]) {
                return Vec::new();
            }
            let mut out = vec![next];
            out.extend(
                (next + 1..groups.len())
                    .filter(|&i| in_horizon(&groups[i]) && groups[i].first_event().origin_time <= w.offset),
            );
            out
        }
    }
}

/// One match record per group, in group order. `horizon` is in hours.
/// Warnings raised during an ongoing sequence credit nothing.
pub fn match_warnings(warnings: &[Warning], groups: &[EventGroup], horizon: f64, policy: MatchPolicy) -> Vec<WarningMatch> {
    let horizon = horizon * SECONDS_PER_HOUR;
    let mut credited: Vec<Vec<&Warning>> = vec![Vec::new(); groups.len()];
    for w in warnings {
        if during_sequence(w, groups) {
            continue;
        }
        for g in credited_groups(w, groups, horizon, policy) {
            credited[g].push(w);
        }
    }
    groups
        .iter()
        .zip(credited)
        .map(|(g, mut ws)| {
            ws.sort_by(|a, b| a.onset.total_cmp(&b.onset));
            let first = g.first_event().origin_time;
            let earliest = ws.first();
            WarningMatch {
                group: g.clone(),
                anomaly: earliest.map(|w| w.label.clone()),
                precursory_time: earliest.map(|w| (first - w.onset) / SECONDS_PER_HOUR),
                duration: earliest.map(|w| {
                    if w.offset >= first {
                        WarningDuration::UpToEvent
                    } else {
                        WarningDuration::Hours((w.offset - w.onset) / SECONDS_PER_HOUR)
                    }
                }),
                supporting: ws.iter().map(|w| w.label.clone()).collect(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; undefined for a single value.
    pub std: Option<f64>,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = (n > 1).then(|| {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        });
        Some(Summary { n, mean, std })
    }
}

/// Precursory-time and duration statistics over detected groups.
pub fn summary_stats(matches: &[WarningMatch]) -> Option<(Summary, Summary)> {
    let hit: Vec<&WarningMatch> = matches.iter().filter(|m| m.is_detected()).collect();
    let pre: Vec<f64> = hit.iter().filter_map(|m| m.precursory_time).collect();
    let dur: Vec<f64> = hit.iter().filter_map(|m| m.duration_hours()).collect();
    Some((Summary::of(&pre)?, Summary::of(&dur)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarningReport {
    pub matches: Vec<WarningMatch>,
    /// Main-shock ids of detected groups.
    pub true_positives: Vec<String>,
    /// Labels of warnings that credit no group.
    pub false_positives: Vec<String>,
    /// Main-shock ids of undetected groups.
    pub false_negatives: Vec<String>,
    /// Warnings raised during an ongoing sequence; neither true nor false.
    pub ignored: Vec<String>,
    pub ppv: Option<f64>,
    pub precursory_time: Option<Summary>,
    pub duration: Option<Summary>,
}

fn report(matches: Vec<WarningMatch>, false_positives: Vec<String>, ignored: Vec<String>) -> WarningReport {
    let (tp, fn_): (Vec<&WarningMatch>, Vec<&WarningMatch>) = matches.iter().partition(|m| m.is_detected());
    let true_positives: Vec<String> = tp.iter().map(|m| m.group.main_shock().id.clone()).collect();
    let false_negatives = fn_.iter().map(|m| m.group.main_shock().id.clone()).collect();
    let calls = true_positives.len() + false_positives.len();
    let ppv = (calls > 0).then(|| true_positives.len() as f64 / calls as f64);
    let stats = summary_stats(&matches);
    WarningReport {
        true_positives,
        false_positives,
        false_negatives,
        ignored,
        ppv,
        precursory_time: stats.map(|s| s.0),
        duration: stats.map(|s| s.1),
        matches,
    }
}

/// Confusion counts: a detected group is one true positive however many
/// warnings credit it, and a warning shared by two groups is counted once.
pub fn confusion(matches: Vec<WarningMatch>, warnings: &[Warning]) -> WarningReport {
    let groups: Vec<EventGroup> = matches.iter().map(|m| m.group.clone()).collect();
    let used: HashSet<&str> = matches.iter().flat_map(|m| m.supporting.iter().map(String::as_str)).collect();
    let mut false_positives = Vec::new();
    let mut ignored = Vec::new();
    for w in warnings {
        if used.contains(w.label.as_str()) {
            continue;
        }
        if during_sequence(w, &groups) {
            ignored.push(w.label.clone());
        } else {
            false_positives.push(w.label.clone());
        }
    }
    report(matches, false_positives, ignored)
}

/// Matching and confusion in one call.
pub fn evaluate(warnings: &[Warning], groups: &[EventGroup], horizon: f64, policy: MatchPolicy) -> WarningReport {
    confusion(match_warnings(warnings, groups, horizon, policy), warnings)
}

/// A row of a pre-matched warning table: either a group (identified by its
/// main shock) with its earliest warning, or a false alarm with no group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarningRow {
    pub main_shock: Option<String>,
    pub anomaly: Option<String>,
    pub precursory_hours: Option<f64>,
    pub duration: Option<WarningDuration>,
}

/// Reads `main_shock,anomaly,precursory_hours,duration_hours` rows;
/// `duration_hours` may be `up_to_event`.
pub fn read_warning_table<R: Read>(source: R) -> Result<Vec<WarningRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = rdr.headers()?.clone();
    for need in ["main_shock", "anomaly", "precursory_hours", "duration_hours"] {
        if !headers.iter().any(|h| h == need) {
            return Err(Error::Parse(format!("missing column {need:?}")));
        }
    }
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (ms, an, pr, du) = (col("main_shock"), col("anomaly"), col("precursory_hours"), col("duration_hours"));
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Row { row, message: e.to_string() })?;
        let opt = |k: usize| rec.get(k).filter(|s| !s.is_empty()).map(str::to_string);
        let hours = |s: &str, what: &str| {
            s.parse::<f64>().map_err(|_| Error::Row { row, message: format!("invalid {what} {s:?}") })
        };
        let precursory_hours = opt(pr).map(|s| hours(&s, "precursory_hours")).transpose()?;
        let duration = match opt(du).as_deref() {
            None => None,
            Some("up_to_event") => Some(WarningDuration::UpToEvent),
            Some(s) => Some(WarningDuration::Hours(hours(s, "duration_hours")?)),
        };
        let r = WarningRow { main_shock: opt(ms), anomaly: opt(an), precursory_hours, duration };
        if r.main_shock.is_none() && r.anomaly.is_none() {
            return Err(Error::Row { row, message: "row names neither a group nor an anomaly".into() });
        }
        if r.main_shock.is_some() && r.anomaly.is_some() && (r.precursory_hours.is_none() || r.duration.is_none()) {
            return Err(Error::Row { row, message: "detected group needs precursory_hours and duration_hours".into() });
        }
        rows.push(r);
    }
    Ok(rows)
}

/// Report from a pre-matched table. Groups not named in the table count as
/// undetected.
pub fn report_from_rows(rows: &[WarningRow], groups: &[EventGroup]) -> Result<WarningReport> {
    let mut matches: Vec<WarningMatch> = groups
        .iter()
        .map(|g| WarningMatch { group: g.clone(), anomaly: None, precursory_time: None, duration: None, supporting: Vec::new() })
        .collect();
    let mut false_positives = Vec::new();
    for r in rows {
        match &r.main_shock {
            None => false_positives.extend(r.anomaly.clone()),
            Some(id) => {
                let m = matches
                    .iter_mut()
                    .find(|m| &m.group.main_shock().id == id)
                    .ok_or_else(|| Error::UnknownEventId(id.clone()))?;
                if let Some(a) = &r.anomaly {
                    m.anomaly = Some(a.clone());
                    m.precursory_time = r.precursory_hours;
                    m.duration = r.duration;
                    m.supporting = vec![a.clone()];
                }
            }
        }
    }
    Ok(report(matches, false_positives, Vec::new()))
}

pub fn write_warning_table<W: Write>(report: &WarningReport, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["main_shock", "anomaly", "precursory_hours", "duration_hours"])?;
    for m in &report.matches {
        let dur = match m.duration {
            None => String::new(),
            Some(WarningDuration::UpToEvent) => "up_to_event".into(),
            Some(WarningDuration::Hours(h)) => format!("{h}"),
        };
        w.write_record([
            m.group.main_shock().id.clone(),
            m.anomaly.clone().unwrap_or_default(),
            m.precursory_time.map(|p| format!("{p}")).unwrap_or_default(),
            dur,
        ])?;
    }
    for fp in &report.false_positives {
        w.write_record(["", fp.as_str(), "", ""])?;
    }
    w.flush()?;
    Ok(())
}

fn group_label(g: &EventGroup) -> String {
    let ids: Vec<String> = g
        .members
        .iter()
        .enumerate()
        .map(|(i, m)| if i == g.main_shock_index { format!("*{}", m.id) } else { m.id.clone() })
        .collect();
    if ids.len() > 3 {
        format!("{} to {}", ids[0], ids[ids.len() - 1])
    } else {
        ids.join(", ")
    }
}

fn fmt_hours(h: f64) -> String {
    if (h - h.round()).abs() < 1e-9 {
        format!("{h:.0} h")
    } else {
        format!("{h:.2} h")
    }
}

/// Plain-text confusion matrix followed by the warning table. Main shocks
/// are starred.
pub fn render_report(report: &WarningReport) -> String {
    let mut s = String::new();
    let ppv = report.ppv.map(|p| format!("{:.4}", p)).unwrap_or_else(|| "undefined".into());
    s.push_str("Confusion matrix (aftershocks ignored)\n");
    s.push_str(&format!(
        "  Positive  true {:>2} ({})  false {:>2} ({})\n",
        report.true_positives.len(),
        report.true_positives.join(","),
        report.false_positives.len(),
        report.false_positives.join(",")
    ));
    s.push_str(&format!(
        "  Negative  true n/a  false {:>2} ({})\n",
        report.false_negatives.len(),
        report.false_negatives.join(",")
    ));
    s.push_str(&format!("  PPV {ppv}\n\n"));
    let rows: Vec<[String; 4]> = report
        .matches
        .iter()
        .map(|m| match &m.anomaly {
            None => [group_label(&m.group), "Not detected".into(), "-".into(), "-".into()],
            Some(a) => [
                group_label(&m.group),
                a.clone(),
                fmt_hours(m.precursory_time.unwrap_or(f64::NAN)),
                match m.duration {
                    Some(WarningDuration::UpToEvent) => "up to the event".into(),
                    Some(WarningDuration::Hours(h)) => fmt_hours(h),
                    None => "-".into(),
                },
            ],
        })
        .collect();
    let header = ["Earthquake", "Anomaly", "Precursory time", "Duration"];
    let width: Vec<usize> =
        (0..4).map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap()).collect();
    let line = |cells: &[String]| {
        cells.iter().zip(&width).map(|(c, w)| format!("{c:<w$}")).collect::<Vec<_>>().join("  ").trim_end().to_string() + "\n"
    };
    s.push_str(&line(&header.map(String::from)));
    for r in &rows {
        s.push_str(&line(r));
    }
    let stat = |name: &str, x: &Option<Summary>| match x {
        None => format!("{name}: undefined\n"),
        Some(v) => format!(
            "{name}: mean {:.2} h (±{}) over {}\n",
            v.mean,
            v.std.map(|d| format!("{d:.2}")).unwrap_or_else(|| "n/a".into()),
            v.n
        ),
    };
    s.push('\n');
    s.push_str(&stat("Precursory time", &report.precursory_time));
    s.push_str(&stat("Duration", &report.duration));
    s
}

/// On-disk anomaly record. Timestamps are ISO-8601 UTC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyRecord {
    pub label: String,
    pub onset: String,
    pub offset: String,
    pub warning_onset: String,
    pub warning_offset: String,
    pub window_length_hours: f64,
    #[serde(default)]
    pub peak_value: Option<f64>,
    #[serde(default)]
    pub peak_excess: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyFile {
    pub schema_version: u32,
    pub anomalies: Vec<AnomalyRecord>,
}

impl AnomalyFile {
    pub fn from_anomalies<T: Scalar>(epoch: &DateTime<Utc>, anomalies: &[Anomaly<T>]) -> Self {
        let ts = |s: T| format_timestamp(&instant(epoch, s.as_f64()));
        AnomalyFile {
            schema_version: 1,
            anomalies: anomalies
                .iter()
                .map(|a| AnomalyRecord {
                    label: a.label.clone(),
                    onset: ts(a.onset),
                    offset: ts(a.offset),
                    warning_onset: ts(a.warning_onset()),
                    warning_offset: ts(a.warning_offset()),
                    window_length_hours: a.window_length.as_f64() / SECONDS_PER_HOUR,
                    peak_value: Some(a.peak_value.as_f64()),
                    peak_excess: Some(a.peak_excess.as_f64()),
                })
                .collect(),
        }
    }

    pub fn read<R: Read>(source: R) -> Result<Self> {
        let f: AnomalyFile = serde_json::from_reader(source)?;
        if f.schema_version != 1 {
            return Err(Error::Parse(format!("unsupported anomaly schema_version {}", f.schema_version)));
        }
        Ok(f)
    }

    /// Warnings relative to `epoch`.
    pub fn warnings(&self, epoch: &DateTime<Utc>) -> Result<Vec<Warning>> {
        let secs = |s: &str, row: usize| -> Result<f64> {
            let t = parse_timestamp(s).map_err(|e| Error::Row { row, message: e.to_string() })?;
            Ok(crate::units::seconds_since(epoch, &t))
        };
        self.anomalies
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let w = Warning { label: a.label.clone(), onset: secs(&a.warning_onset, i + 1)?, offset: secs(&a.warning_offset, i + 1)? };
                if !(w.onset <= w.offset) {
                    return Err(Error::Row { row: i + 1, message: "warning_offset before warning_onset".into() });
                }
                Ok(w)
            })
            .collect()
    }
}

/// Score of one cross-validation candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub measure: Measure<f64>,
    /// PPV per fold; `None` where the fold had no positive calls.
    pub fold_ppv: Vec<Option<f64>>,
    pub mean_ppv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub scores: Vec<CvScore>,
    /// Index into `scores` of the selected candidate.
    pub best: usize,
}

impl CvResult {
    pub fn best_measure(&self) -> Measure<f64> {
        self.scores[self.best].measure
    }
}

/// Contiguous equal spans of `[lo, hi]`.
pub fn fold_bounds(lo: f64, hi: f64, folds: usize) -> Vec<(f64, f64)> {
    let len = (hi - lo) / folds as f64;
    (0..folds)
        .map(|k| (lo + len * k as f64, if k + 1 == folds { hi } else { lo + len * (k + 1) as f64 }))
        .collect()
}

fn smoother(a: &Measure<f64>, b: &Measure<f64>) -> bool {
    match (a, b) {
        (Measure::Vp(x), Measure::Vp(y)) => x.q_per_day < y.q_per_day,
        (Measure::Cs(x), Measure::Cs(y)) => x.tau_hours > y.tau_hours,
        _ => false,
    }
}

/// Picks the grid candidate with the best mean PPV over contiguous
/// temporal folds. Detection runs once per candidate on the whole record;
/// each fold then scores the warnings and groups falling inside it. Folds
/// with no positive calls are skipped. Ties go to the smoother candidate
/// (smaller q, larger tau).
pub fn cross_validate<T: Scalar>(
    a: &SpikeTrain<T>,
    b: &SpikeTrain<T>,
    grid: &[Measure<T>],
    folds: usize,
    config: &DetectConfig<T>,
    groups: &[EventGroup],
    horizon: f64,
    policy: MatchPolicy,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("cross-validation grid is empty".into()));
    }
    if folds == 0 {
        return Err(Error::InvalidInput("cross-validation needs at least one fold".into()));
    }
    let (lo, hi) = crate::pipeline::common_interval(a, b)?;
    let bounds = fold_bounds(lo.as_f64(), hi.as_f64(), folds);
    let mut scores = Vec::with_capacity(grid.len());
    for measure in grid {
        let det = detect(a, b, &DetectConfig { measure: *measure, ..config.clone() })?;
        let warnings: Vec<Warning> = det.anomalies.iter().map(Warning::from).collect();
        let fold_ppv: Vec<Option<f64>> = bounds
            .iter()
            .enumerate()
            .map(|(k, &(f0, f1))| {
                let last = k + 1 == bounds.len();
                let inside = |t: f64| t >= f0 && (t < f1 || (last && t <= f1));
                let gs: Vec<EventGroup> =
                    groups.iter().filter(|g| inside(g.first_event().origin_time)).cloned().collect();
                let ws: Vec<Warning> = warnings.iter().filter(|w| inside(w.onset)).cloned().collect();
                let ppv = evaluate(&ws, &gs, horizon, policy).ppv;
                if ppv.is_none() {
                    log::info!("fold {} skipped for {} {}: no positive calls", k + 1, measure.name(), measure.parameter());
                }
                ppv
            })
            .collect();
        let defined: Vec<f64> = fold_ppv.iter().flatten().copied().collect();
        let mean_ppv = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        let m64 = match measure {
            Measure::Vp(p) => Measure::vp(p.q_per_day.as_f64())?,
            Measure::Cs(p) => Measure::cs(p.tau_hours.as_f64())?,
        };
        scores.push(CvScore { measure: m64, fold_ppv, mean_ppv });
    }
    let key = |s: &CvScore| s.mean_ppv.unwrap_or(f64::NEG_INFINITY);
    let mut best = 0;
    for i in 1..scores.len() {
        let (ki, kb) = (key(&scores[i]), key(&scores[best]));
        if ki > kb || (ki == kb && smoother(&scores[i].measure, &scores[best].measure)) {
            best = i;
        }
    }
    Ok(CvResult { scores, best })
}
