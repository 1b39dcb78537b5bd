//! Target earthquake catalogs, station micro-event logs, and conversion of
//! the latter to spike trains.

use std::io::{Read, Write};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spiketrain::SpikeTrain;
use crate::units::{format_timestamp, instant, midnight, parse_timestamp, seconds_since};

pub use crate::fixtures::{TARGET_EVENTS_CSV, TARGET_GROUPS_JSON};

const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarthquakeRecord {
    pub id: String,
    /// Seconds since the catalog epoch.
    pub origin_time: f64,
    pub magnitude: f64,
    pub latitude: f64,
    pub longitude: f64,
    /// Kilometers.
    pub depth: f64,
    pub region: String,
}

impl EarthquakeRecord {
    fn validate(&self, row: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::Row { row, message: format!("invalid {what}") });
        if !self.magnitude.is_finite() {
            return bad("magnitude");
        }
        if !(-90.0..=90.0).contains(&self.latitude) {
            return bad("latitude");
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return bad("longitude");
        }
        if !(self.depth >= 0.0) {
            return bad("depth");
        }
        Ok(())
    }

    /// Great-circle distance in kilometers.
    pub fn distance_km(&self, other: &EarthquakeRecord) -> f64 {
        let (p1, p2) = (self.latitude.to_radians(), other.latitude.to_radians());
        let dp = p2 - p1;
        let dl = (other.longitude - self.longitude).to_radians();
        let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
        2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub epoch: DateTime<Utc>,
    /// Sorted by origin time.
    pub records: Vec<EarthquakeRecord>,
}

impl Catalog {
    pub fn get(&self, id: &str) -> Option<&EarthquakeRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogFormat {
    /// USGS FDSN event CSV (`time,latitude,longitude,depth,mag,...,id,...,place`).
    UsgsCsv,
    /// `id,date,time,magnitude,region,latitude,longitude,depth_km`.
    GenericCsv,
    /// Array of objects with an ISO-8601 `origin_time`.
    Json,
}

impl std::str::FromStr for CatalogFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "usgs_csv" | "usgs" => Ok(Self::UsgsCsv),
            "generic_csv" | "csv" => Ok(Self::GenericCsv),
            "json" => Ok(Self::Json),
            other => Err(Error::InvalidInput(format!("unknown catalog format {other:?}"))),
        }
    }
}

struct RawRecord {
    id: String,
    time: DateTime<Utc>,
    magnitude: f64,
    latitude: f64,
    longitude: f64,
    depth: f64,
    region: String,
}

#[derive(Serialize, Deserialize)]
struct JsonRecord {
    id: String,
    origin_time: String,
    magnitude: f64,
    latitude: f64,
    longitude: f64,
    depth_km: f64,
    #[serde(default)]
    region: String,
}

fn num(row: usize, field: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Row { row, message: format!("invalid {field} {s:?}") })
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Parse(format!("missing column {name:?}")))
}

fn parse_generic_csv<R: Read>(source: R) -> Result<Vec<RawRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = ["id", "date", "time", "magnitude", "region", "latitude", "longitude", "depth_km"]
        .iter()
        .map(|c| column(&headers, c))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Row { row, message: e.to_string() })?;
        let get = |k: usize| rec.get(idx[k]).unwrap_or("");
        let time = parse_timestamp(&format!("{}T{}", get(1), get(2)))
            .map_err(|e| Error::Row { row, message: e.to_string() })?;
        out.push(RawRecord {
            id: get(0).to_string(),
            time,
            magnitude: num(row, "magnitude", get(3))?,
            region: get(4).to_string(),
            latitude: num(row, "latitude", get(5))?,
            longitude: num(row, "longitude", get(6))?,
            depth: num(row, "depth", get(7))?,
        });
    }
    Ok(out)
}

fn parse_usgs_csv<R: Read>(source: R) -> Result<Vec<RawRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = ["time", "latitude", "longitude", "depth", "mag", "id"]
        .iter()
        .map(|c| column(&headers, c))
        .collect::<Result<_>>()?;
    let place = column(&headers, "place").ok();
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Row { row, message: e.to_string() })?;
        let get = |k: usize| rec.get(idx[k]).unwrap_or("");
        let time = parse_timestamp(get(0)).map_err(|e| Error::Row { row, message: e.to_string() })?;
        out.push(RawRecord {
            id: get(5).to_string(),
            time,
            latitude: num(row, "latitude", get(1))?,
            longitude: num(row, "longitude", get(2))?,
            depth: num(row, "depth", get(3))?,
            magnitude: num(row, "magnitude", get(4))?,
            region: place.and_then(|p| rec.get(p)).unwrap_or("").to_string(),
        });
    }
    Ok(out)
}

fn parse_json<R: Read>(source: R) -> Result<Vec<RawRecord>> {
    let rows: Vec<JsonRecord> = serde_json::from_reader(source)?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| {
            let time = parse_timestamp(&r.origin_time).map_err(|e| Error::Row { row: i + 1, message: e.to_string() })?;
            Ok(RawRecord {
                id: r.id,
                time,
                magnitude: r.magnitude,
                latitude: r.latitude,
                longitude: r.longitude,
                depth: r.depth_km,
                region: r.region,
            })
        })
        .collect()
}

/// Parses a target catalog. Times become seconds since `epoch`, which
/// defaults to midnight UTC of the earliest record. Records come back sorted
/// by origin time.
pub fn parse_catalog<R: Read>(source: R, format: CatalogFormat, epoch: Option<DateTime<Utc>>) -> Result<Catalog> {
    let raw = match format {
        CatalogFormat::GenericCsv => parse_generic_csv(source)?,
        CatalogFormat::UsgsCsv => parse_usgs_csv(source)?,
        CatalogFormat::Json => parse_json(source)?,
    };
    let epoch = epoch
        .or_else(|| raw.iter().map(|r| r.time).min().map(|t| midnight(&t)))
        .unwrap_or(DateTime::UNIX_EPOCH);
    let mut records = Vec::with_capacity(raw.len());
    for (i, r) in raw.into_iter().enumerate() {
        let rec = EarthquakeRecord {
            id: r.id,
            origin_time: seconds_since(&epoch, &r.time),
            magnitude: r.magnitude,
            latitude: r.latitude,
            longitude: r.longitude,
            depth: r.depth,
            region: r.region,
        };
        rec.validate(i + 1)?;
        records.push(rec);
    }
    records.sort_by(|a, b| a.origin_time.total_cmp(&b.origin_time));
    Ok(Catalog { epoch, records })
}

/// Writes the generic CSV schema.
pub fn write_catalog_csv<W: Write>(catalog: &Catalog, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["id", "date", "time", "magnitude", "region", "latitude", "longitude", "depth_km"])?;
    for r in &catalog.records {
        let t = instant(&catalog.epoch, r.origin_time);
        let iso = format_timestamp(&t);
        let (date, time) = iso.trim_end_matches('Z').split_once('T').unwrap();
        w.write_record([
            r.id.clone(),
            date.to_string(),
            time.to_string(),
            r.magnitude.to_string(),
            r.region.clone(),
            r.latitude.to_string(),
            r.longitude.to_string(),
            r.depth.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_catalog_json<W: Write>(catalog: &Catalog, sink: W) -> Result<()> {
    let rows: Vec<JsonRecord> = catalog
        .records
        .iter()
        .map(|r| JsonRecord {
            id: r.id.clone(),
            origin_time: format_timestamp(&instant(&catalog.epoch, r.origin_time)),
            magnitude: r.magnitude,
            latitude: r.latitude,
            longitude: r.longitude,
            depth_km: r.depth,
            region: r.region.clone(),
        })
        .collect();
    serde_json::to_writer_pretty(sink, &rows)?;
    Ok(())
}

/// Inclusive bounds for [`filter_region`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionFilter {
    pub latitude: (f64, f64),
    pub longitude: (f64, f64),
    /// Seconds since epoch.
    pub time: (f64, f64),
    pub min_magnitude: f64,
}

impl RegionFilter {
    pub fn contains(&self, r: &EarthquakeRecord) -> bool {
        let inside = |(lo, hi): (f64, f64), x: f64| x >= lo && x <= hi;
        inside(self.latitude, r.latitude)
            && inside(self.longitude, r.longitude)
            && inside(self.time, r.origin_time)
            && r.magnitude >= self.min_magnitude
    }

    /// Bounds satisfied by records inside both filters.
    pub fn intersect(&self, other: &RegionFilter) -> RegionFilter {
        let cap = |a: (f64, f64), b: (f64, f64)| (a.0.max(b.0), a.1.min(b.1));
        RegionFilter {
            latitude: cap(self.latitude, other.latitude),
            longitude: cap(self.longitude, other.longitude),
            time: cap(self.time, other.time),
            min_magnitude: self.min_magnitude.max(other.min_magnitude),
        }
    }
}

pub fn filter_region(records: &[EarthquakeRecord], filter: &RegionFilter) -> Vec<EarthquakeRecord> {
    records.iter().filter(|r| filter.contains(r)).cloned().collect()
}

/// Main shock with its foreshocks and aftershocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventGroup {
    /// Ordered by origin time.
    pub members: Vec<EarthquakeRecord>,
    pub main_shock_index: usize,
}

impl EventGroup {
    /// Builds a group, choosing the main shock as the earliest member of
    /// maximal magnitude unless `main` names one explicitly.
    pub fn new(mut members: Vec<EarthquakeRecord>, main: Option<&str>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidInput("event group has no members".into()));
        }
        members.sort_by(|a, b| a.origin_time.total_cmp(&b.origin_time));
        let main_shock_index = match main {
            Some(id) => members
                .iter()
                .position(|m| m.id == id)
                .ok_or_else(|| Error::UnknownEventId(id.to_string()))?,
            None => {
                let top = members.iter().map(|m| m.magnitude).fold(f64::NEG_INFINITY, f64::max);
                members.iter().position(|m| m.magnitude == top).unwrap()
            }
        };
        Ok(Self { members, main_shock_index })
    }

    pub fn main_shock(&self) -> &EarthquakeRecord {
        &self.members[self.main_shock_index]
    }

    pub fn first_event(&self) -> &EarthquakeRecord {
        &self.members[0]
    }

    pub fn foreshocks(&self) -> std::ops::Range<usize> {
        0..self.main_shock_index
    }

    pub fn aftershocks(&self) -> std::ops::Range<usize> {
        self.main_shock_index + 1..self.members.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub members: Vec<String>,
    #[serde(default)]
    pub main: Option<String>,
}

/// Explicit grouping honored verbatim by [`group_events`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingOverrides {
    #[serde(default = "one")]
    pub schema_version: u32,
    pub groups: Vec<GroupSpec>,
}

fn one() -> u32 {
    1
}

impl GroupingOverrides {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupingParams {
    /// Seconds.
    pub max_gap: f64,
    pub max_distance_km: f64,
}

impl Default for GroupingParams {
    fn default() -> Self {
        Self { max_gap: 36.0 * 3600.0, max_distance_km: 150.0 }
    }
}

/// Groups records into main-shock groups. With overrides, the explicit
/// grouping is used and every record must be assigned exactly once;
/// otherwise a record joins the open group whose latest member is within
/// `max_gap` and `max_distance_km` of it (nearest such member wins).
/// Groups are returned ordered by their first member.
pub fn group_events(
    records: &[EarthquakeRecord],
    params: &GroupingParams,
    overrides: Option<&GroupingOverrides>,
) -> Result<Vec<EventGroup>> {
    let mut groups = match overrides {
        Some(ov) => {
            let mut seen = std::collections::HashSet::new();
            let mut groups = Vec::with_capacity(ov.groups.len());
            for spec in &ov.groups {
                let mut members = Vec::with_capacity(spec.members.len());
                for id in &spec.members {
                    let r = records
                        .iter()
                        .find(|r| &r.id == id)
                        .ok_or_else(|| Error::UnknownEventId(id.clone()))?;
                    if !seen.insert(id.clone()) {
                        return Err(Error::InvalidInput(format!("event {id} assigned to two groups")));
                    }
                    members.push(r.clone());
                }
                groups.push(EventGroup::new(members, spec.main.as_deref())?);
            }
            if let Some(r) = records.iter().find(|r| !seen.contains(&r.id)) {
                return Err(Error::InvalidInput(format!("event {} missing from grouping overrides", r.id)));
            }
            groups
        }
        None => {
            let mut sorted: Vec<&EarthquakeRecord> = records.iter().collect();
            sorted.sort_by(|a, b| a.origin_time.total_cmp(&b.origin_time));
            let mut clusters: Vec<Vec<EarthquakeRecord>> = Vec::new();
            for r in sorted {
                let best = clusters
                    .iter()
                    .enumerate()
                    .filter_map(|(i, c)| {
                        let last = c.last().unwrap();
                        let d = last.distance_km(r);
                        (r.origin_time - last.origin_time <= params.max_gap && d <= params.max_distance_km)
                            .then_some((i, d))
                    })
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                match best {
                    Some((i, _)) => clusters[i].push(r.clone()),
                    None => clusters.push(vec![r.clone()]),
                }
            }
            clusters.into_iter().map(|c| EventGroup::new(c, None)).collect::<Result<_>>()?
        }
    };
    groups.sort_by(|a, b| a.first_event().origin_time.total_cmp(&b.first_event().origin_time));
    Ok(groups)
}

/// One micro-earthquake at one station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroEvent {
    pub station_id: String,
    /// Seconds since epoch.
    pub event_time: f64,
    pub magnitude: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicroLog {
    pub epoch: DateTime<Utc>,
    pub events: Vec<MicroEvent>,
}

/// Parses `station_id,timestamp_iso8601,magnitude` rows (magnitude may be
/// empty or the column absent).
pub fn parse_micro_events<R: Read>(source: R, epoch: Option<DateTime<Utc>>) -> Result<MicroLog> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(source);
    let headers = rdr.headers()?.clone();
    let sid = column(&headers, "station_id")?;
    let ts = column(&headers, "timestamp_iso8601")?;
    let mag = column(&headers, "magnitude").ok();
    let mut raw = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Row { row, message: e.to_string() })?;
        let station = rec.get(sid).unwrap_or("").to_string();
        if station.is_empty() {
            return Err(Error::Row { row, message: "missing station_id".into() });
        }
        let time = parse_timestamp(rec.get(ts).unwrap_or("")).map_err(|e| Error::Row { row, message: e.to_string() })?;
        let magnitude = match mag.and_then(|m| rec.get(m)).map(str::trim) {
            None | Some("") => None,
            Some(s) => Some(num(row, "magnitude", s)?),
        };
        raw.push((station, time, magnitude));
    }
    let epoch = epoch
        .or_else(|| raw.iter().map(|r| r.1).min().map(|t| midnight(&t)))
        .unwrap_or(DateTime::UNIX_EPOCH);
    let events = raw
        .into_iter()
        .map(|(station_id, t, magnitude)| MicroEvent { station_id, event_time: seconds_since(&epoch, &t), magnitude })
        .collect();
    Ok(MicroLog { epoch, events })
}

pub fn write_micro_events<W: Write>(log: &MicroLog, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["station_id", "timestamp_iso8601", "magnitude"])?;
    for e in &log.events {
        w.write_record([
            e.station_id.clone(),
            format_timestamp(&instant(&log.epoch, e.event_time)),
            e.magnitude.map(|m| m.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Drops events whose recorded magnitude exceeds `max_magnitude`.
pub fn filter_micro(events: &[MicroEvent], max_magnitude: f64) -> Vec<MicroEvent> {
    events.iter().filter(|e| e.magnitude.is_none_or(|m| m <= max_magnitude)).cloned().collect()
}

/// Spike train of one station's events inside the closed interval.
pub fn to_spike_train<T: Scalar>(events: &[MicroEvent], station_id: &str, interval: (T, T)) -> Result<SpikeTrain<T>> {
    let (start, end) = interval;
    if !(start <= end) {
        return Err(Error::InvalidInput("empty spike-train interval".into()));
    }
    let times = events
        .iter()
        .filter(|e| e.station_id == station_id)
        .map(|e| T::lit(e.event_time))
        .filter(|&t| t >= start && t <= end)
        .collect();
    SpikeTrain::new(station_id, start, end, times)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn targets() -> Catalog {
        parse_catalog(TARGET_EVENTS_CSV.as_bytes(), CatalogFormat::GenericCsv, None).unwrap()
    }

    #[test]
    fn target_events_parse() {
        let c = targets();
        assert_eq!(c.records.len(), 41);
        assert_eq!(format_timestamp(&c.epoch), "2012-03-18T00:00:00Z");
        let e1 = &c.records[0];
        assert_eq!(e1.id, "E1");
        assert_eq!(e1.origin_time, 2.0 * 3600.0 + 38.0 * 60.0 + 16.0);
        assert_eq!(e1.magnitude, 4.4);
        assert_eq!(c.records.last().unwrap().id, "E41");
    }

    #[test]
    fn header_only_is_empty() {
        let c = parse_catalog(
            "id,date,time,magnitude,region,latitude,longitude,depth_km\n".as_bytes(),
            CatalogFormat::GenericCsv,
            None,
        )
        .unwrap();
        assert!(c.records.is_empty());
    }

    #[test]
    fn negative_depth_names_row() {
        let src = "id,date,time,magnitude,region,latitude,longitude,depth_km\nX,2012-01-01,00:00:00,4,r,1,1,-1\n";
        let err = parse_catalog(src.as_bytes(), CatalogFormat::GenericCsv, None).unwrap_err();
        assert_eq!(err.to_string(), "invalid depth, row 1");
    }

    #[test]
    fn malformed_row_names_row() {
        let src = "id,date,time,magnitude,region,latitude,longitude,depth_km\nX,2012-01-01,00:00:00,4,r,1,1,1\nY,2012-01-02,xx,4,r,1,1,1\n";
        let err = parse_catalog(src.as_bytes(), CatalogFormat::GenericCsv, None).unwrap_err();
        assert!(matches!(err, Error::Row { row: 2, .. }), "{err}");
    }

    #[test]
    fn unsorted_rows_get_sorted() {
        let src = "id,date,time,magnitude,region,latitude,longitude,depth_km\nB,2012-01-02,00:00:00,4,r,1,1,1\nA,2012-01-01,12:00:00,4,r,1,1,1\n";
        let c = parse_catalog(src.as_bytes(), CatalogFormat::GenericCsv, None).unwrap();
        assert_eq!(c.records[0].id, "A");
        assert_eq!(c.records[0].origin_time, 43_200.0);
    }

    #[test]
    fn usgs_and_json_formats() {
        let usgs = "time,latitude,longitude,depth,mag,magType,nst,gap,dmin,rms,net,id,updated,place,type\n\
2012-08-11T12:23:18.000Z,38.33,46.83,11,6.4,mw,,,,,us,usp000jq5p,2014-01-01T00:00:00.000Z,\"northwestern Iran\",earthquake\n";
        let c = parse_catalog(usgs.as_bytes(), CatalogFormat::UsgsCsv, None).unwrap();
        assert_eq!(c.records[0].id, "usp000jq5p");
        assert_eq!(c.records[0].region, "northwestern Iran");
        assert_eq!(c.records[0].origin_time, 12.0 * 3600.0 + 23.0 * 60.0 + 18.0);

        let mut buf = Vec::new();
        write_catalog_json(&targets(), &mut buf).unwrap();
        let back = parse_catalog(buf.as_slice(), CatalogFormat::Json, Some(targets().epoch)).unwrap();
        assert_eq!(back, targets());
    }

    #[test]
    fn region_filter_on_targets() {
        let c = targets();
        let full = RegionFilter {
            latitude: (35.6, 43.1),
            longitude: (35.5, 49.2),
            time: (f64::NEG_INFINITY, f64::INFINITY),
            min_magnitude: 4.0,
        };
        assert_eq!(filter_region(&c.records, &full).len(), 41);
        let big = filter_region(&c.records, &RegionFilter { min_magnitude: 6.0, ..full });
        assert_eq!(big.len(), 1);
        assert_eq!((big[0].id.as_str(), big[0].magnitude), ("E41", 6.4));
        assert!(filter_region(&c.records, &RegionFilter { latitude: (0.0, 0.0), ..full }).is_empty());
    }

    #[test]
    fn overrides_give_reference_groups() {
        let c = targets();
        let ov = GroupingOverrides::from_json(TARGET_GROUPS_JSON).unwrap();
        let groups = group_events(&c.records, &GroupingParams::default(), Some(&ov)).unwrap();
        assert_eq!(groups.len(), 25);
        let fore: usize = groups.iter().map(|g| g.foreshocks().len()).sum();
        let after: usize = groups.iter().map(|g| g.aftershocks().len()).sum();
        assert_eq!((fore, after), (6, 10));
        // the explicit main shocks coincide with the earliest-maximum rule
        let derived = GroupingOverrides {
            schema_version: 1,
            groups: ov.groups.iter().map(|g| GroupSpec { members: g.members.clone(), main: None }).collect(),
        };
        let again = group_events(&c.records, &GroupingParams::default(), Some(&derived)).unwrap();
        assert_eq!(again, groups);
    }

    #[test]
    fn overrides_with_unknown_id_fail() {
        let c = targets();
        let ov = GroupingOverrides { schema_version: 1, groups: vec![GroupSpec { members: vec!["E99".into()], main: None }] };
        assert!(matches!(group_events(&c.records, &GroupingParams::default(), Some(&ov)), Err(Error::UnknownEventId(_))));
    }

    fn rec(id: &str, t: f64, m: f64, lat: f64, lon: f64) -> EarthquakeRecord {
        EarthquakeRecord { id: id.into(), origin_time: t, magnitude: m, latitude: lat, longitude: lon, depth: 5.0, region: String::new() }
    }

    #[test]
    fn foreshock_then_larger_event() {
        // 10 km apart in latitude is ~0.09 degrees
        let rs = vec![rec("a", 0.0, 4.0, 38.0, 43.0), rec("b", 3600.0, 4.5, 38.09, 43.0)];
        let g = group_events(&rs, &GroupingParams::default(), None).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].main_shock().id, "b");
        assert_eq!(g[0].foreshocks(), 0..1);
    }

    #[test]
    fn default_grouping_on_targets() {
        let c = targets();
        let groups = group_events(&c.records, &GroupingParams::default(), None).unwrap();
        let mut ids: Vec<Vec<&str>> = groups.iter().map(|g| g.members.iter().map(|m| m.id.as_str()).collect()).collect();
        ids.sort();
        for g in &groups {
            let main = g.main_shock().magnitude;
            assert!(g.members[g.main_shock_index..].iter().all(|m| m.magnitude <= main));
            for w in g.members.windows(2) {
                assert!(w[1].origin_time - w[0].origin_time <= 36.0 * 3600.0);
            }
        }
        assert_eq!(groups.iter().map(|g| g.members.len()).sum::<usize>(), 41);
        // Diff against the reference grouping: (E2, E3) and (E4, E5) merge into
        // one sequence, E7/E9 are split (325 km apart), E31/E32 are split.
        let as_sets: Vec<String> = groups.iter().map(|g| g.members.iter().map(|m| m.id.clone()).collect::<Vec<_>>().join(",")).collect();
        assert!(as_sets.contains(&"E2,E3,E4,E5".to_string()), "{as_sets:?}");
    }

    #[test]
    fn micro_events_to_train() {
        let src = "station_id,timestamp_iso8601,magnitude\nS1,2012-03-15T03:00:00Z,1.2\nS2,2012-03-15T01:00:00Z,\nS1,2012-03-15T01:00:00Z,0.5\nS1,2012-03-16T00:00:00Z,\nS2,2012-03-15T02:00:00Z,3.1\n";
        let log = parse_micro_events(src.as_bytes(), None).unwrap();
        assert_eq!(format_timestamp(&log.epoch), "2012-03-15T00:00:00Z");
        let t = to_spike_train::<f64>(&log.events, "S1", (0.0, 86_400.0)).unwrap();
        assert_eq!(t.times(), &[3600.0, 10_800.0, 86_400.0]);
        assert_eq!(filter_micro(&log.events, 2.0).len(), 4);
        let mut buf = Vec::new();
        write_micro_events(&log, &mut buf).unwrap();
        let back = parse_micro_events(buf.as_slice(), Some(log.epoch)).unwrap();
        assert_eq!(back, log);
    }

    proptest! {
        #[test]
        fn csv_round_trip(
            rows in proptest::collection::vec((0i64..20_000_000_000, -9.0f64..9.9, -90.0f64..90.0, -180.0f64..180.0, 0.0f64..700.0), 0..20)
        ) {
            let epoch = parse_timestamp("2012-03-15T00:00:00Z").unwrap();
            let records: Vec<EarthquakeRecord> = rows.iter().enumerate().map(|(i, &(ms, m, lat, lon, d))| EarthquakeRecord {
                id: format!("E{i}"),
                origin_time: ms as f64 / 1000.0,
                magnitude: (m * 10.0).round() / 10.0,
                latitude: lat,
                longitude: lon,
                depth: d,
                region: "somewhere, far".into(),
            }).collect();
            let mut sorted = records.clone();
            sorted.sort_by(|a, b| a.origin_time.total_cmp(&b.origin_time));
            let cat = Catalog { epoch, records: sorted };
            let mut buf = Vec::new();
            write_catalog_csv(&cat, &mut buf).unwrap();
            let mut back = parse_catalog(buf.as_slice(), CatalogFormat::GenericCsv, Some(epoch)).unwrap();
            prop_assert_eq!(back.records.len(), cat.records.len());
            for (b, c) in back.records.iter_mut().zip(&cat.records) {
                prop_assert!((b.origin_time - c.origin_time).abs() < 1e-6);
                b.origin_time = c.origin_time;
            }
            prop_assert_eq!(back, cat);
        }

        #[test]
        fn filter_is_idempotent_and_intersects(
            lat in (-90.0f64..90.0, 0.0f64..60.0), lon in (-180.0f64..180.0, 0.0f64..120.0),
            lat2 in (-90.0f64..90.0, 0.0f64..60.0), m in 3.5f64..5.5,
        ) {
            let c = targets();
            let f1 = RegionFilter { latitude: (lat.0, lat.0 + lat.1), longitude: (lon.0, lon.0 + lon.1), time: (0.0, 1e9), min_magnitude: m };
            let f2 = RegionFilter { latitude: (lat2.0, lat2.0 + lat2.1), ..f1 };
            let once = filter_region(&c.records, &f1);
            prop_assert_eq!(filter_region(&once, &f1), once.clone());
            let chained = filter_region(&filter_region(&c.records, &f2), &f1);
            prop_assert_eq!(chained, filter_region(&c.records, &f1.intersect(&f2)));
        }
    }
}
