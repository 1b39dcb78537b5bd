//! Command-line frontend: `analyze`, `evaluate`, `synth`, `rates`, `report`.
//!
//! Settings come from a TOML file (`--config`, or the path in
//! `MICROQUAKE_CONFIG`) and are overridden key by key by flags. Exit codes:
//! 0 success, 2 configuration or usage error, 3 data error.

use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::{
    filter_micro, group_events, parse_catalog, parse_micro_events, to_spike_train, write_micro_events, Catalog,
    CatalogFormat, EventGroup, GroupingOverrides, GroupingParams, MicroEvent, MicroLog, RegionFilter,
};
use crate::error::Error;
use crate::evaluation::{
    cross_validate, evaluate, read_warning_table, render_report, report_from_rows, write_warning_table, AnomalyFile,
    MatchPolicy, Warning, WarningReport, DEFAULT_HORIZON_HOURS,
};
use crate::pipeline::{detect, DetectConfig, Detection, Measure};
use crate::rates::{default_candidates, estimate_rate, optimize_bandwidth};
use crate::scalar::Scalar;
use crate::surrogate::{DitherWindow, SurrogateParams};
use crate::svg::{render, Plot};
use crate::synth::{gen_coupled_pair, CoupledPairConfig, Episode, EpisodeMode, GroundTruth};
use crate::units::{days, format_timestamp, hours, instant, midnight, parse_timestamp, seconds_since, SECONDS_PER_DAY};

pub const CONFIG_ENV: &str = "MICROQUAKE_CONFIG";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn config_err(key: &str, msg: impl Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

fn data_err(path: &Path, msg: impl Display) -> CliError {
    CliError::Data(format!("{}: {msg}", path.display()))
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "microquake", version, about = "Spike-train dissimilarity analysis of micro-earthquake station logs")]
struct Cli {
    /// TOML configuration file; defaults to $MICROQUAKE_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for the surrogate ensemble. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Profile, acceptance band and anomalies for a station pair.
    Analyze(AnalyzeArgs),
    /// Score anomalies against a target catalog.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic coupled station pair.
    Synth(SynthArgs),
    /// Kernel-smoothed rate profile of one station.
    Rates(RatesArgs),
    /// Print tables and re-render the plot of an analyze output directory.
    Report(ReportArgs),
}

#[derive(Args, Debug, Default)]
struct AnalyzeArgs {
    #[arg(long)]
    station_a: Option<PathBuf>,
    #[arg(long)]
    station_b: Option<PathBuf>,
    #[arg(long)]
    station_a_id: Option<String>,
    #[arg(long)]
    station_b_id: Option<String>,
    /// Analysis start (ISO-8601); defaults to midnight before the first event.
    #[arg(long)]
    start: Option<String>,
    /// Analysis end (ISO-8601); defaults to midnight after the last event.
    #[arg(long)]
    end: Option<String>,
    #[arg(long)]
    max_magnitude: Option<f64>,
    /// `vp` or `cs`.
    #[arg(long)]
    measure: Option<String>,
    #[arg(long)]
    tau_hours: Option<f64>,
    #[arg(long)]
    q_per_day: Option<f64>,
    #[arg(long)]
    window_days: Option<f64>,
    #[arg(long)]
    step_hours: Option<f64>,
    #[arg(long)]
    surrogates: Option<usize>,
    /// `auto` or a width in days.
    #[arg(long)]
    dither_window: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    confidence: Option<f64>,
    #[arg(long)]
    normalize: Option<bool>,
    #[arg(long)]
    cc_bin_days: Option<f64>,
    #[arg(long)]
    cc_max_lag_days: Option<f64>,
    #[command(flatten)]
    catalog: CatalogArgs,
    #[arg(long)]
    horizon_hours: Option<f64>,
    /// `horizon` or `next-group`.
    #[arg(long)]
    match_policy: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    /// Comma-separated parameter values (q per day or tau in hours) to
    /// cross-validate; needs a catalog.
    #[arg(long)]
    grid: Option<String>,
    /// `f64` or `f32`.
    #[arg(long)]
    precision: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct CatalogArgs {
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// `generic_csv`, `usgs_csv` or `json`.
    #[arg(long)]
    catalog_format: Option<String>,
    /// Grouping overrides JSON.
    #[arg(long)]
    groups: Option<PathBuf>,
    #[arg(long)]
    min_magnitude: Option<f64>,
    /// `lat_min,lat_max,lon_min,lon_max`.
    #[arg(long)]
    bbox: Option<String>,
}

#[derive(Args, Debug, Default)]
struct EvaluateArgs {
    /// Anomaly JSON as written by `analyze`.
    #[arg(long)]
    anomalies: Option<PathBuf>,
    /// Pre-matched warning table CSV.
    #[arg(long)]
    warnings: Option<PathBuf>,
    #[command(flatten)]
    catalog: CatalogArgs,
    #[arg(long)]
    horizon_hours: Option<f64>,
    #[arg(long)]
    match_policy: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct SynthArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    start: Option<String>,
    #[arg(long)]
    days: Option<f64>,
    /// Events per day per station.
    #[arg(long)]
    base_rate: Option<f64>,
    #[arg(long)]
    coincidence: Option<f64>,
    #[arg(long)]
    jitter_minutes: Option<f64>,
    /// `START:END[:decouple[:FACTOR:BURST:SPREAD_MIN]]` or
    /// `START:END:rate-shift:FACTOR`, days from the start. Repeatable.
    #[arg(long = "episode")]
    episodes: Vec<String>,
    #[arg(long)]
    station_a_id: Option<String>,
    #[arg(long)]
    station_b_id: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct RatesArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    station_id: Option<String>,
    #[arg(long)]
    start: Option<String>,
    #[arg(long)]
    end: Option<String>,
    /// Fixed bandwidth in days; otherwise chosen by cross-validation.
    #[arg(long)]
    bandwidth_days: Option<f64>,
    #[arg(long)]
    grid_hours: Option<f64>,
    #[arg(long)]
    svg: Option<bool>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Output directory of a previous `analyze` run.
    #[arg(long)]
    dir: PathBuf,
    /// Write a re-rendered profile plot here.
    #[arg(long)]
    svg: Option<PathBuf>,
}

// ---- configuration file ----

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileConfig {
    analyze: AnalyzeSection,
    measure: MeasureSection,
    window: WindowSection,
    surrogate: SurrogateSection,
    correlogram: CorrelogramSection,
    catalog: CatalogSection,
    evaluation: EvaluationSection,
    synth: SynthSection,
    rates: RatesSection,
    run: RunSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct AnalyzeSection {
    station_a: Option<PathBuf>,
    station_b: Option<PathBuf>,
    station_a_id: Option<String>,
    station_b_id: Option<String>,
    start: Option<String>,
    end: Option<String>,
    max_magnitude: Option<f64>,
    precision: Option<String>,
    out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct MeasureSection {
    kind: Option<String>,
    tau_hours: Option<f64>,
    q_per_day: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct WindowSection {
    length_days: Option<f64>,
    step_hours: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum DitherValue {
    Days(f64),
    Text(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SurrogateSection {
    count: Option<usize>,
    dither_window: Option<DitherValue>,
    seed: Option<u64>,
    confidence: Option<f64>,
    normalize: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct CorrelogramSection {
    bin_days: Option<f64>,
    max_lag_days: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct CatalogSection {
    path: Option<PathBuf>,
    format: Option<String>,
    groups: Option<PathBuf>,
    min_magnitude: Option<f64>,
    bbox: Option<[f64; 4]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct EvaluationSection {
    horizon_hours: Option<f64>,
    match_policy: Option<String>,
    folds: Option<usize>,
    grid: Option<Vec<f64>>,
    anomalies: Option<PathBuf>,
    warnings: Option<PathBuf>,
    out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SynthSection {
    seed: Option<u64>,
    start: Option<String>,
    days: Option<f64>,
    base_rate: Option<f64>,
    coincidence: Option<f64>,
    jitter_minutes: Option<f64>,
    episodes: Option<Vec<String>>,
    station_a_id: Option<String>,
    station_b_id: Option<String>,
    out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RatesSection {
    input: Option<PathBuf>,
    station_id: Option<String>,
    start: Option<String>,
    end: Option<String>,
    bandwidth_days: Option<f64>,
    grid_hours: Option<f64>,
    svg: Option<bool>,
    out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RunSection {
    threads: Option<usize>,
}

struct Loaded {
    file: FileConfig,
    /// Directory relative paths in the file are resolved against.
    base: PathBuf,
}

impl Loaded {
    fn path(&self, p: Option<PathBuf>) -> Option<PathBuf> {
        p.map(|p| if p.is_relative() { self.base.join(p) } else { p })
    }
}

fn load_config(explicit: Option<&Path>) -> CliResult<Loaded> {
    let path = match explicit {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from),
    };
    let Some(path) = path else {
        return Ok(Loaded { file: FileConfig::default(), base: PathBuf::new() });
    };
    let text = fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let file: FileConfig =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.to_string().trim())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { file, base })
}

// ---- resolved settings ----

/// Fully resolved `analyze` settings; hashed into the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeSettings {
    pub station_a: PathBuf,
    pub station_b: PathBuf,
    pub station_a_id: Option<String>,
    pub station_b_id: Option<String>,
    pub start: Option<String>,
    pub end: Option<String>,
    pub max_magnitude: f64,
    pub measure: String,
    pub tau_hours: f64,
    pub q_per_day: f64,
    pub window_days: f64,
    pub step_hours: f64,
    pub surrogates: usize,
    pub dither_window: String,
    pub seed: u64,
    pub confidence: f64,
    pub normalize: bool,
    pub cc_bin_days: f64,
    pub cc_max_lag_days: f64,
    pub catalog: Option<CatalogSettings>,
    pub horizon_hours: f64,
    pub match_policy: MatchPolicy,
    pub folds: usize,
    pub grid: Vec<f64>,
    pub precision: String,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogSettings {
    pub path: PathBuf,
    pub format: CatalogFormat,
    pub groups: Option<PathBuf>,
    pub min_magnitude: Option<f64>,
    pub bbox: Option<[f64; 4]>,
}

fn positive(key: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(config_err(key, format!("must be positive, got {v}")))
    }
}

fn parse_bbox(s: &str) -> CliResult<[f64; 4]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| config_err("catalog.bbox", format!("expected four numbers, got {s:?}")))?;
    <[f64; 4]>::try_from(v).map_err(|_| config_err("catalog.bbox", format!("expected four numbers, got {s:?}")))
}

fn resolve_catalog(args: CatalogArgs, cfg: &Loaded) -> CliResult<Option<CatalogSettings>> {
    let sec = &cfg.file.catalog;
    let path = args.catalog.or_else(|| cfg.path(sec.path.clone()));
    let format = args.catalog_format.or(sec.format.clone()).unwrap_or_else(|| "generic_csv".into());
    let format: CatalogFormat = format.parse().map_err(|e| config_err("catalog.format", e))?;
    let groups = args.groups.or_else(|| cfg.path(sec.groups.clone()));
    let min_magnitude = args.min_magnitude.or(sec.min_magnitude);
    let bbox = match args.bbox {
        Some(s) => Some(parse_bbox(&s)?),
        None => sec.bbox,
    };
    if let Some(b) = bbox {
        if !(b[0] <= b[1] && b[2] <= b[3]) {
            return Err(config_err("catalog.bbox", "expected lat_min <= lat_max and lon_min <= lon_max"));
        }
    }
    Ok(path.map(|path| CatalogSettings { path, format, groups, min_magnitude, bbox }))
}

fn resolve_policy(flag: Option<String>, file: Option<String>) -> CliResult<MatchPolicy> {
    match flag.or(file) {
        None => Ok(MatchPolicy::default()),
        Some(s) => s.parse().map_err(|e| config_err("evaluation.match_policy", e)),
    }
}

fn resolve_analyze(args: AnalyzeArgs, cfg: &Loaded) -> CliResult<AnalyzeSettings> {
    let f = &cfg.file;
    let station_a = args
        .station_a
        .or_else(|| cfg.path(f.analyze.station_a.clone()))
        .ok_or_else(|| config_err("analyze.station_a", "required"))?;
    let station_b = args
        .station_b
        .or_else(|| cfg.path(f.analyze.station_b.clone()))
        .ok_or_else(|| config_err("analyze.station_b", "required"))?;
    let out = args.out.or_else(|| cfg.path(f.analyze.out.clone())).ok_or_else(|| config_err("analyze.out", "required"))?;
    let measure = args.measure.or(f.measure.kind.clone()).unwrap_or_else(|| "cs".into());
    if measure != "cs" && measure != "vp" {
        return Err(config_err("measure.kind", format!("expected vp or cs, got {measure:?}")));
    }
    let tau_hours = positive("measure.tau_hours", args.tau_hours.or(f.measure.tau_hours).unwrap_or(2.5))?;
    let q_per_day = args.q_per_day.or(f.measure.q_per_day).unwrap_or(100.0);
    if !(q_per_day >= 0.0 && q_per_day.is_finite()) {
        return Err(config_err("measure.q_per_day", format!("must be >= 0, got {q_per_day}")));
    }
    let surrogates = args.surrogates.or(f.surrogate.count).unwrap_or(1000);
    if surrogates < 10 {
        return Err(config_err("surrogate.count", format!("must be at least 10, got {surrogates}")));
    }
    let dither_window = match (args.dither_window, &f.surrogate.dither_window) {
        (Some(s), _) => s,
        (None, Some(DitherValue::Days(d))) => d.to_string(),
        (None, Some(DitherValue::Text(s))) => s.clone(),
        (None, None) => "auto".into(),
    };
    if dither_window != "auto" {
        let d: f64 = dither_window
            .parse()
            .map_err(|_| config_err("surrogate.dither_window", format!("expected auto or days, got {dither_window:?}")))?;
        positive("surrogate.dither_window", d)?;
    }
    let confidence = args.confidence.or(f.surrogate.confidence).unwrap_or(0.9);
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(config_err("surrogate.confidence", format!("must be in (0, 1), got {confidence}")));
    }
    let folds = args.folds.or(f.evaluation.folds).unwrap_or(5);
    if folds == 0 {
        return Err(config_err("evaluation.folds", "must be at least 1"));
    }
    let grid = match args.grid {
        Some(s) => s
            .split(',')
            .filter(|x| !x.trim().is_empty())
            .map(|x| x.trim().parse::<f64>().map_err(|_| config_err("evaluation.grid", format!("not a number: {x:?}"))))
            .collect::<CliResult<Vec<f64>>>()?,
        None => f.evaluation.grid.clone().unwrap_or_default(),
    };
    let catalog = resolve_catalog(args.catalog, cfg)?;
    if !grid.is_empty() && catalog.is_none() {
        return Err(config_err("evaluation.grid", "cross-validation needs a catalog"));
    }
    let precision = args.precision.or(f.analyze.precision.clone()).unwrap_or_else(|| "f64".into());
    if precision != "f64" && precision != "f32" {
        return Err(config_err("analyze.precision", format!("expected f64 or f32, got {precision:?}")));
    }
    for (key, v) in [("analyze.start", &args.start), ("analyze.end", &args.end)] {
        if let Some(s) = v {
            parse_timestamp(s).map_err(|e| config_err(key, e))?;
        }
    }
    let horizon_hours = positive(
        "evaluation.horizon_hours",
        args.horizon_hours.or(f.evaluation.horizon_hours).unwrap_or(DEFAULT_HORIZON_HOURS),
    )?;
    Ok(AnalyzeSettings {
        station_a,
        station_b,
        station_a_id: args.station_a_id.or(f.analyze.station_a_id.clone()),
        station_b_id: args.station_b_id.or(f.analyze.station_b_id.clone()),
        start: args.start.or(f.analyze.start.clone()),
        end: args.end.or(f.analyze.end.clone()),
        max_magnitude: args.max_magnitude.or(f.analyze.max_magnitude).unwrap_or(2.0),
        measure,
        tau_hours,
        q_per_day,
        window_days: positive("window.length_days", args.window_days.or(f.window.length_days).unwrap_or(2.0))?,
        step_hours: positive("window.step_hours", args.step_hours.or(f.window.step_hours).unwrap_or(1.0))?,
        surrogates,
        dither_window,
        seed: args.seed.or(f.surrogate.seed).unwrap_or(0),
        confidence,
        normalize: args.normalize.or(f.surrogate.normalize).unwrap_or(true),
        cc_bin_days: positive("correlogram.bin_days", args.cc_bin_days.or(f.correlogram.bin_days).unwrap_or(2.0))?,
        cc_max_lag_days: positive(
            "correlogram.max_lag_days",
            args.cc_max_lag_days.or(f.correlogram.max_lag_days).unwrap_or(30.0),
        )?,
        catalog,
        horizon_hours,
        match_policy: resolve_policy(args.match_policy, f.evaluation.match_policy.clone())?,
        folds,
        grid,
        precision,
        out,
    })
}

// ---- shared helpers ----

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| data_err(path, e))
}

fn json_bytes<S: Serialize>(v: &S) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("serializable");
    b.push(b'\n');
    b
}

#[derive(Serialize)]
struct FileDigest {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a, S: Serialize> {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a S,
    config_sha256: String,
    seed: Option<u64>,
    threads: Option<usize>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

/// Writes the artifacts plus `manifest.json` into `dir`.
fn write_outputs<S: Serialize>(
    dir: &Path,
    command: &'static str,
    settings: &S,
    seed: Option<u64>,
    threads: Option<usize>,
    inputs: &[(&Path, &[u8])],
    outputs: &[(String, Vec<u8>)],
) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| data_err(dir, e))?;
    for (name, bytes) in outputs {
        let p = dir.join(name);
        fs::write(&p, bytes).map_err(|e| data_err(&p, e))?;
    }
    let manifest = Manifest {
        schema_version: 1,
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        config: settings,
        config_sha256: sha256_hex(&serde_json::to_vec(settings).expect("serializable")),
        seed,
        threads,
        inputs: inputs
            .iter()
            .map(|(p, b)| FileDigest { file: p.display().to_string(), sha256: sha256_hex(b) })
            .collect(),
        outputs: outputs.iter().map(|(n, b)| FileDigest { file: n.clone(), sha256: sha256_hex(b) }).collect(),
    };
    let p = dir.join("manifest.json");
    fs::write(&p, json_bytes(&manifest)).map_err(|e| data_err(&p, e))
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

fn opt<T: Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Picks a station's events. Without an explicit id the file must hold one
/// station, or exactly two when both stations come from the same file.
fn pick_station(log: &MicroLog, id: Option<&str>, which: usize, shared: bool, path: &Path) -> CliResult<String> {
    if let Some(id) = id {
        if !log.events.iter().any(|e| e.station_id == id) {
            return Err(data_err(path, format!("no events for station {id:?}")));
        }
        return Ok(id.to_string());
    }
    let mut ids: Vec<&str> = log.events.iter().map(|e| e.station_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    match (ids.len(), shared) {
        (0, _) => Err(data_err(path, "no events")),
        (1, false) => Ok(ids[0].to_string()),
        (2, true) => Ok(ids[which].to_string()),
        (n, _) => Err(data_err(path, format!("{n} stations in file; select one with --station-a-id/--station-b-id"))),
    }
}

fn load_catalog(c: &CatalogSettings, epoch: Option<DateTime<Utc>>) -> CliResult<(Catalog, Vec<EventGroup>, Vec<u8>)> {
    let bytes = fs::read(&c.path).map_err(|e| data_err(&c.path, e))?;
    let catalog = parse_catalog(bytes.as_slice(), c.format, epoch).map_err(|e| data_err(&c.path, e))?;
    let overrides = match &c.groups {
        None => None,
        Some(p) => Some(GroupingOverrides::from_json(&read_text(p)?).map_err(|e| data_err(p, e))?),
    };
    let filter = RegionFilter {
        latitude: c.bbox.map(|b| (b[0], b[1])).unwrap_or((-90.0, 90.0)),
        longitude: c.bbox.map(|b| (b[2], b[3])).unwrap_or((-180.0, 180.0)),
        time: (f64::NEG_INFINITY, f64::INFINITY),
        min_magnitude: c.min_magnitude.unwrap_or(f64::NEG_INFINITY),
    };
    let records = crate::catalog::filter_region(&catalog.records, &filter);
    let groups = if overrides.is_some() {
        // overrides name records explicitly; filter at group level instead
        group_events(&catalog.records, &GroupingParams::default(), overrides.as_ref())
            .map_err(|e| data_err(&c.path, e))?
            .into_iter()
            .filter(|g| filter.contains(g.main_shock()))
            .collect()
    } else {
        group_events(&records, &GroupingParams::default(), None).map_err(|e| data_err(&c.path, e))?
    };
    Ok((catalog, groups, bytes))
}

// ---- analyze ----

struct AnalyzeInputs {
    epoch: DateTime<Utc>,
    end: f64,
    events: Vec<MicroEvent>,
    id_a: String,
    id_b: String,
    groups: Option<Vec<EventGroup>>,
}

fn measure_of<T: Scalar>(kind: &str, value: f64) -> CliResult<Measure<T>> {
    let m = if kind == "vp" { Measure::vp(T::lit(value)) } else { Measure::cs(T::lit(value)) };
    m.map_err(|e| config_err("measure", e))
}

fn profile_rows<T: Scalar>(epoch: &DateTime<Utc>, det: &Detection<T>) -> Vec<Vec<String>> {
    let mut labels: Vec<String> = vec![String::new(); det.profile.positions.len()];
    for a in &det.anomalies {
        for (i, &p) in det.profile.positions.iter().enumerate() {
            if p >= a.onset && p <= a.offset {
                labels[i] = a.label.clone();
            }
        }
    }
    det.profile
        .positions
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            vec![
                format_timestamp(&instant(epoch, p.as_f64())),
                opt(det.profile.values[i]),
                opt(det.band.lower[i]),
                opt(det.band.upper[i]),
                (!labels[i].is_empty()).to_string(),
                labels[i].clone(),
            ]
        })
        .collect()
}

fn analyze_typed<T: Scalar>(s: &AnalyzeSettings, inp: &AnalyzeInputs) -> CliResult<Vec<(String, Vec<u8>)>> {
    let interval = (T::zero(), T::lit(inp.end));
    let a = to_spike_train::<T>(&inp.events, &inp.id_a, interval)?;
    let b = to_spike_train::<T>(&inp.events, &inp.id_b, interval)?;
    let param = if s.measure == "vp" { s.q_per_day } else { s.tau_hours };
    let mut config = DetectConfig::<T> {
        measure: measure_of(&s.measure, param)?,
        window_length: days(s.window_days),
        step: hours(s.step_hours),
        surrogates: SurrogateParams {
            count: s.surrogates,
            dither_window: if s.dither_window == "auto" {
                DitherWindow::Auto
            } else {
                DitherWindow::Fixed(days(s.dither_window.parse::<f64>().expect("validated")))
            },
            seed: s.seed,
        },
        confidence: T::lit(s.confidence),
        cc_bin_width: days(s.cc_bin_days),
        cc_max_lag: days(s.cc_max_lag_days),
        normalize: s.normalize,
    };
    let mut outputs = Vec::new();
    if let (false, Some(groups)) = (s.grid.is_empty(), &inp.groups) {
        let grid = s.grid.iter().map(|&v| measure_of::<T>(&s.measure, v)).collect::<CliResult<Vec<_>>>()?;
        let cv = cross_validate(&a, &b, &grid, s.folds, &config, groups, s.horizon_hours, s.match_policy)?;
        let best = cv.best_measure();
        log::info!("cross-validation selected {} {}", best.name(), best.parameter());
        config.measure = measure_of(&s.measure, best.parameter())?;
        outputs.push(("cv.json".to_string(), json_bytes(&cv)));
    }
    let det = detect(&a, &b, &config)?;
    if !det.dither.local_minimum {
        log::warn!("correlogram has no interior local minimum; dither window set to the largest lag");
    }

    outputs.push((
        "profile.csv".into(),
        csv_bytes(
            &["position_iso8601", "value", "lower", "upper", "is_anomaly", "anomaly_label"],
            profile_rows(&inp.epoch, &det),
        ),
    ));
    outputs.push((
        "band.csv".into(),
        csv_bytes(
            &["position_iso8601", "lower", "upper"],
            det.band.positions.iter().enumerate().map(|(i, &p)| {
                vec![format_timestamp(&instant(&inp.epoch, p.as_f64())), opt(det.band.lower[i]), opt(det.band.upper[i])]
            }),
        ),
    ));
    outputs.push(("anomalies.json".into(), json_bytes(&AnomalyFile::from_anomalies(&inp.epoch, &det.anomalies))));
    let cc_rows: Vec<Vec<String>> = det
        .correlogram
        .iter()
        .flat_map(|cc| cc.lags.iter().zip(&cc.values).map(|(&l, &v)| vec![(l.as_f64() / SECONDS_PER_DAY).to_string(), v.to_string()]))
        .collect();
    outputs.push(("correlogram.csv".into(), csv_bytes(&["lag_days", "cc"], cc_rows)));

    let mut markers = Vec::new();
    if let Some(groups) = &inp.groups {
        let warnings: Vec<Warning> = det.anomalies.iter().map(Warning::from).collect();
        let report = evaluate(&warnings, groups, s.horizon_hours, s.match_policy);
        outputs.push(("report.json".into(), json_bytes(&ReportFile::new(&report, s.horizon_hours, s.match_policy))));
        outputs.push(("report.txt".into(), render_report(&report).into_bytes()));
        let mut table = Vec::new();
        write_warning_table(&report, &mut table)?;
        outputs.push(("warnings.csv".into(), table));
        markers = groups
            .iter()
            .map(|g| (g.main_shock().origin_time / SECONDS_PER_DAY, g.main_shock().id.clone()))
            .collect();
    }
    let x: Vec<f64> = det.profile.positions.iter().map(|p| p.as_f64() / SECONDS_PER_DAY).collect();
    let f = |v: &[Option<T>]| v.iter().map(|x| x.map(T::as_f64)).collect::<Vec<_>>();
    let plot = Plot {
        title: format!(
            "{} ({} = {}), window {} d, {} surrogates, dither {} d",
            config.measure.name().to_uppercase(),
            if s.measure == "vp" { "q/day" } else { "tau h" },
            config.measure.parameter(),
            s.window_days,
            s.surrogates,
            to_days_str(det.dither.window.as_f64()),
        ),
        x_label: format!("days since {}", format_timestamp(&inp.epoch)),
        y_label: "dissimilarity".into(),
        x,
        line: f(&det.profile.values),
        band_lower: f(&det.band.lower),
        band_upper: f(&det.band.upper),
        spans: det
            .anomalies
            .iter()
            .map(|a| (a.onset.as_f64() / SECONDS_PER_DAY, a.offset.as_f64() / SECONDS_PER_DAY))
            .collect(),
        markers: markers.into_iter().filter(|m| m.0 >= 0.0 && m.0 * SECONDS_PER_DAY <= inp.end).collect(),
    };
    outputs.push(("profile.svg".into(), render(&plot).into_bytes()));
    Ok(outputs)
}

fn to_days_str(seconds: f64) -> String {
    let d = seconds / SECONDS_PER_DAY;
    format!("{}", (d * 1000.0).round() / 1000.0)
}

/// Parses micro-event files against one shared epoch.
fn load_micro(paths: &[&Path], start: Option<&str>) -> CliResult<(DateTime<Utc>, Vec<(String, Vec<u8>)>)> {
    let mut texts = Vec::new();
    for p in paths {
        let bytes = fs::read(p).map_err(|e| data_err(p, e))?;
        texts.push((p.display().to_string(), bytes));
    }
    let epoch = match start {
        Some(s) => parse_timestamp(s).map_err(|e| config_err("start", e))?,
        None => {
            let mut first: Option<DateTime<Utc>> = None;
            for ((name, bytes), p) in texts.iter().zip(paths) {
                let log = parse_micro_events(bytes.as_slice(), None).map_err(|e| data_err(p, e))?;
                if log.events.is_empty() {
                    log::debug!("{name}: no events");
                    continue;
                }
                first = Some(first.map_or(log.epoch, |f| f.min(log.epoch)));
            }
            first.unwrap_or(DateTime::UNIX_EPOCH)
        }
    };
    Ok((epoch, texts))
}

fn default_end(epoch: &DateTime<Utc>, events: &[MicroEvent]) -> f64 {
    let last = events.iter().map(|e| e.event_time).fold(0.0f64, f64::max);
    let next = midnight(&instant(epoch, last)) + Duration::days(1);
    seconds_since(epoch, &next)
}

fn cmd_analyze(args: AnalyzeArgs, cfg: &Loaded, threads: Option<usize>) -> CliResult<()> {
    let s = resolve_analyze(args, cfg)?;
    let shared = s.station_a == s.station_b;
    let paths: Vec<&Path> = if shared { vec![&s.station_a] } else { vec![&s.station_a, &s.station_b] };
    let (epoch, files) = load_micro(&paths, s.start.as_deref())?;
    let mut logs = Vec::new();
    for ((_, bytes), p) in files.iter().zip(&paths) {
        let log = parse_micro_events(bytes.as_slice(), Some(epoch)).map_err(|e| data_err(p, e))?;
        if log.events.is_empty() {
            return Err(data_err(p, "station file has no events"));
        }
        logs.push(log);
    }
    let log_b = logs.last().unwrap();
    let id_a = pick_station(&logs[0], s.station_a_id.as_deref(), 0, shared, &s.station_a)?;
    let id_b = pick_station(log_b, s.station_b_id.as_deref(), 1, shared, &s.station_b)?;
    if shared && id_a == id_b {
        return Err(config_err("analyze.station_b_id", "both stations select the same station"));
    }
    let mut events: Vec<MicroEvent> =
        logs[0].events.iter().filter(|e| e.station_id == id_a).cloned().collect();
    // a station id present in both files is disambiguated by its file
    events.extend(log_b.events.iter().filter(|e| e.station_id == id_b && (shared || id_a != id_b)).cloned());
    if !shared && id_a == id_b {
        return Err(config_err("analyze.station_b_id", "both files carry the same station id; the pair must differ"));
    }
    let events = filter_micro(&events, s.max_magnitude);
    let end = match &s.end {
        Some(e) => seconds_since(&epoch, &parse_timestamp(e).map_err(|err| config_err("analyze.end", err))?),
        None => default_end(&epoch, &events),
    };
    if !(end > 0.0) {
        return Err(config_err("analyze.end", "must be after the start"));
    }

    let mut inputs: Vec<(&Path, &[u8])> = files.iter().zip(&paths).map(|((_, b), p)| (*p, b.as_slice())).collect();
    let (groups, catalog_bytes) = match &s.catalog {
        Some(c) => {
            let (_, groups, bytes) = load_catalog(c, Some(epoch))?;
            let groups: Vec<EventGroup> = groups
                .into_iter()
                .filter(|g| g.first_event().origin_time >= 0.0 && g.first_event().origin_time <= end)
                .collect();
            (Some(groups), bytes)
        }
        None => (None, Vec::new()),
    };
    if let Some(c) = &s.catalog {
        inputs.push((&c.path, catalog_bytes.as_slice()));
    }
    let inp = AnalyzeInputs { epoch, end, events, id_a, id_b, groups };

    let outputs = with_threads(threads, || {
        if s.precision == "f32" {
            analyze_typed::<f32>(&s, &inp)
        } else {
            analyze_typed::<f64>(&s, &inp)
        }
    })?;
    write_outputs(&s.out, "analyze", &s, Some(s.seed), threads, &inputs, &outputs)
}

fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> CliResult<R> + Send) -> CliResult<R> {
    match threads {
        None => f(),
        Some(0) => Err(config_err("run.threads", "must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| config_err("run.threads", e))?;
            pool.install(f)
        }
    }
}

// ---- evaluate ----

/// On-disk evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema_version: u32,
    pub horizon_hours: Option<f64>,
    pub match_policy: Option<MatchPolicy>,
    pub report: WarningReport,
}

impl ReportFile {
    fn new(report: &WarningReport, horizon_hours: f64, policy: MatchPolicy) -> Self {
        ReportFile { schema_version: 1, horizon_hours: Some(horizon_hours), match_policy: Some(policy), report: report.clone() }
    }
}

#[derive(Debug, Clone, Serialize)]
struct EvaluateSettings {
    anomalies: Option<PathBuf>,
    warnings: Option<PathBuf>,
    catalog: CatalogSettings,
    horizon_hours: f64,
    match_policy: MatchPolicy,
    out: Option<PathBuf>,
}

fn cmd_evaluate(args: EvaluateArgs, cfg: &Loaded) -> CliResult<()> {
    let f = &cfg.file.evaluation;
    let s = EvaluateSettings {
        anomalies: args.anomalies.or_else(|| cfg.path(f.anomalies.clone())),
        warnings: args.warnings.or_else(|| cfg.path(f.warnings.clone())),
        catalog: resolve_catalog(args.catalog, cfg)?.ok_or_else(|| config_err("catalog.path", "required"))?,
        horizon_hours: positive(
            "evaluation.horizon_hours",
            args.horizon_hours.or(f.horizon_hours).unwrap_or(DEFAULT_HORIZON_HOURS),
        )?,
        match_policy: resolve_policy(args.match_policy, f.match_policy.clone())?,
        out: args.out.or_else(|| cfg.path(f.out.clone())),
    };
    let (catalog, groups, cat_bytes) = load_catalog(&s.catalog, None)?;
    let (report, input_path, input_bytes) = match (&s.anomalies, &s.warnings) {
        (Some(p), None) => {
            let bytes = fs::read(p).map_err(|e| data_err(p, e))?;
            let file = AnomalyFile::read(bytes.as_slice()).map_err(|e| data_err(p, e))?;
            let warnings = file.warnings(&catalog.epoch).map_err(|e| data_err(p, e))?;
            (evaluate(&warnings, &groups, s.horizon_hours, s.match_policy), p, bytes)
        }
        (None, Some(p)) => {
            let bytes = fs::read(p).map_err(|e| data_err(p, e))?;
            let rows = read_warning_table(bytes.as_slice()).map_err(|e| data_err(p, e))?;
            (report_from_rows(&rows, &groups).map_err(|e| data_err(p, e))?, p, bytes)
        }
        _ => return Err(config_err("evaluation", "give exactly one of --anomalies or --warnings")),
    };
    let text = render_report(&report);
    print!("{text}");
    if let Some(dir) = &s.out {
        let mut table = Vec::new();
        write_warning_table(&report, &mut table)?;
        let file = ReportFile {
            schema_version: 1,
            horizon_hours: s.anomalies.as_ref().map(|_| s.horizon_hours),
            match_policy: s.anomalies.as_ref().map(|_| s.match_policy),
            report,
        };
        let outputs = vec![
            ("report.json".to_string(), json_bytes(&file)),
            ("report.txt".to_string(), text.into_bytes()),
            ("warnings.csv".to_string(), table),
        ];
        let inputs: Vec<(&Path, &[u8])> = vec![(&s.catalog.path, &cat_bytes), (input_path.as_path(), &input_bytes)];
        write_outputs(dir, "evaluate", &s, None, None, &inputs, &outputs)?;
    }
    Ok(())
}

// ---- synth ----

#[derive(Debug, Clone, Serialize)]
struct SynthSettings {
    seed: u64,
    start: String,
    days: f64,
    base_rate: f64,
    coincidence: f64,
    jitter_minutes: f64,
    episodes: Vec<String>,
    station_a_id: String,
    station_b_id: String,
    out: PathBuf,
}

/// Parses an episode spec; times are days from the record start.
pub fn parse_episode(spec: &str) -> std::result::Result<Episode<f64>, String> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let num = |s: &str| s.parse::<f64>().map_err(|_| format!("invalid number {s:?} in episode {spec:?}"));
    if parts.len() < 2 {
        return Err(format!("episode {spec:?}: expected START:END"));
    }
    let (start, end) = (num(parts[0])? * SECONDS_PER_DAY, num(parts[1])? * SECONDS_PER_DAY);
    let mode = match &parts[2..] {
        [] | ["decouple"] => return Ok(Episode::decouple(start, end)),
        ["decouple", factor, burst, spread] => EpisodeMode::Decouple {
            rate_factor: num(factor)?,
            burst_size: burst.parse().map_err(|_| format!("invalid burst size {burst:?} in episode {spec:?}"))?,
            burst_spread: num(spread)? * 60.0,
        },
        ["rate-shift" | "rate_shift", factor] => EpisodeMode::RateShift { factor: num(factor)? },
        _ => return Err(format!("episode {spec:?}: unknown mode")),
    };
    Ok(Episode { start, end, mode })
}

#[derive(Serialize)]
struct TruthFile<'a> {
    schema_version: u32,
    epoch: String,
    stations: [&'a str; 2],
    start: String,
    end: String,
    truth: &'a GroundTruth<f64>,
    episodes_iso8601: Vec<[String; 2]>,
}

fn cmd_synth(args: SynthArgs, cfg: &Loaded) -> CliResult<()> {
    let f = &cfg.file.synth;
    let s = SynthSettings {
        seed: args.seed.or(f.seed).unwrap_or(0),
        start: args.start.or(f.start.clone()).unwrap_or_else(|| "2012-01-01T00:00:00Z".into()),
        days: positive("synth.days", args.days.or(f.days).unwrap_or(60.0))?,
        base_rate: args.base_rate.or(f.base_rate).unwrap_or(10.0),
        coincidence: args.coincidence.or(f.coincidence).unwrap_or(0.5),
        jitter_minutes: args.jitter_minutes.or(f.jitter_minutes).unwrap_or(5.0),
        episodes: if args.episodes.is_empty() { f.episodes.clone().unwrap_or_default() } else { args.episodes },
        station_a_id: args.station_a_id.or(f.station_a_id.clone()).unwrap_or_else(|| "A".into()),
        station_b_id: args.station_b_id.or(f.station_b_id.clone()).unwrap_or_else(|| "B".into()),
        out: args.out.or_else(|| cfg.path(f.out.clone())).ok_or_else(|| config_err("synth.out", "required"))?,
    };
    let epoch = parse_timestamp(&s.start).map_err(|e| config_err("synth.start", e))?;
    let episodes =
        s.episodes.iter().map(|e| parse_episode(e)).collect::<std::result::Result<Vec<_>, _>>().map_err(|e| config_err("synth.episodes", e))?;
    if s.station_a_id == s.station_b_id {
        return Err(config_err("synth.station_b_id", "station ids must differ"));
    }
    let config = CoupledPairConfig {
        station_a: s.station_a_id.clone(),
        station_b: s.station_b_id.clone(),
        start: 0.0,
        end: s.days * SECONDS_PER_DAY,
        base_rate: s.base_rate,
        coincidence_fraction: s.coincidence,
        jitter: s.jitter_minutes * 60.0,
        episodes,
    };
    // every generator error here stems from the settings
    let pair = gen_coupled_pair(&config, s.seed).map_err(|e| config_err("synth", e))?;
    let mut events: Vec<MicroEvent> = pair
        .a
        .times()
        .iter()
        .map(|&t| (t, &s.station_a_id))
        .chain(pair.b.times().iter().map(|&t| (t, &s.station_b_id)))
        .map(|(t, id)| MicroEvent { station_id: id.clone(), event_time: t, magnitude: None })
        .collect();
    events.sort_by(|x, y| x.event_time.total_cmp(&y.event_time).then_with(|| x.station_id.cmp(&y.station_id)));
    let mut micro = Vec::new();
    write_micro_events(&MicroLog { epoch, events }, &mut micro)?;
    let ts = |t: f64| format_timestamp(&instant(&epoch, t));
    let truth = TruthFile {
        schema_version: 1,
        epoch: format_timestamp(&epoch),
        stations: [&s.station_a_id, &s.station_b_id],
        start: ts(0.0),
        end: ts(config.end),
        truth: &pair.truth,
        episodes_iso8601: pair.truth.episodes.iter().map(|e| [ts(e.start), ts(e.end)]).collect(),
    };
    let outputs = vec![("micro.csv".to_string(), micro), ("truth.json".to_string(), json_bytes(&truth))];
    write_outputs(&s.out, "synth", &s, Some(s.seed), None, &[], &outputs)
}

// ---- rates ----

#[derive(Debug, Clone, Serialize)]
struct RatesSettings {
    input: PathBuf,
    station_id: Option<String>,
    start: Option<String>,
    end: Option<String>,
    bandwidth_days: Option<f64>,
    grid_hours: f64,
    svg: bool,
    out: PathBuf,
}

/// Bandwidth used when fewer than two spikes make the optimizer undefined.
const FALLBACK_BANDWIDTH_DAYS: f64 = 1.0;

fn cmd_rates(args: RatesArgs, cfg: &Loaded) -> CliResult<()> {
    let f = &cfg.file.rates;
    let s = RatesSettings {
        input: args.input.or_else(|| cfg.path(f.input.clone())).ok_or_else(|| config_err("rates.input", "required"))?,
        station_id: args.station_id.or(f.station_id.clone()),
        start: args.start.or(f.start.clone()),
        end: args.end.or(f.end.clone()),
        bandwidth_days: match args.bandwidth_days.or(f.bandwidth_days) {
            Some(b) => Some(positive("rates.bandwidth_days", b)?),
            None => None,
        },
        grid_hours: positive("rates.grid_hours", args.grid_hours.or(f.grid_hours).unwrap_or(1.0))?,
        svg: args.svg.or(f.svg).unwrap_or(false),
        out: args.out.or_else(|| cfg.path(f.out.clone())).ok_or_else(|| config_err("rates.out", "required"))?,
    };
    let (epoch, files) = load_micro(&[&s.input], s.start.as_deref())?;
    let bytes = &files[0].1;
    let log = parse_micro_events(bytes.as_slice(), Some(epoch)).map_err(|e| data_err(&s.input, e))?;
    let station = match (&s.station_id, log.events.is_empty()) {
        (Some(id), _) => id.clone(),
        (None, true) => String::new(),
        (None, false) => pick_station(&log, None, 0, false, &s.input)?,
    };
    let end = match &s.end {
        Some(e) => seconds_since(&epoch, &parse_timestamp(e).map_err(|err| config_err("rates.end", err))?),
        None => default_end(&epoch, &log.events),
    };
    if !(end > 0.0) {
        return Err(config_err("rates.end", "must be after the start"));
    }
    let train = to_spike_train::<f64>(&log.events, &station, (0.0, end))?;
    let bandwidth = match s.bandwidth_days {
        Some(b) => b,
        None => match optimize_bandwidth(&train, &default_candidates()) {
            Ok(b) => b,
            Err(Error::BandwidthUndefined) => {
                log::warn!("fewer than 2 events; using a {FALLBACK_BANDWIDTH_DAYS}-day bandwidth");
                FALLBACK_BANDWIDTH_DAYS
            }
            Err(e) => return Err(e.into()),
        },
    };
    let profile = estimate_rate(&train, bandwidth, hours(s.grid_hours))?;
    println!("station {station:?}: {} events, bandwidth {bandwidth} days", train.len());
    let rows = profile
        .grid
        .iter()
        .zip(&profile.values)
        .map(|(&t, &v)| vec![format_timestamp(&instant(&epoch, t)), v.to_string()]);
    let mut outputs = vec![("rates.csv".to_string(), csv_bytes(&["time_iso8601", "rate_per_day"], rows))];
    if s.svg {
        let plot = Plot {
            title: format!("{station} rate, bandwidth {bandwidth} d"),
            x_label: format!("days since {}", format_timestamp(&epoch)),
            y_label: "events per day".into(),
            x: profile.grid.iter().map(|t| t / SECONDS_PER_DAY).collect(),
            line: profile.values.iter().map(|&v| Some(v)).collect(),
            ..Default::default()
        };
        outputs.push(("rates.svg".into(), render(&plot).into_bytes()));
    }
    write_outputs(&s.out, "rates", &s, None, None, &[(&s.input, bytes)], &outputs)
}

// ---- report ----

/// One parsed row of `profile.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub position: DateTime<Utc>,
    pub value: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub is_anomaly: bool,
    pub anomaly_label: Option<String>,
}

pub fn read_profile_csv<R: std::io::Read>(source: R) -> crate::error::Result<Vec<ProfileRow>> {
    let mut rdr = csv::Reader::from_reader(source);
    let expected = ["position_iso8601", "value", "lower", "upper", "is_anomaly", "anomaly_label"];
    if rdr.headers()?.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse("profile CSV header mismatch".into()));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Row { row, message: e.to_string() })?;
        let num = |k: usize| -> crate::error::Result<Option<f64>> {
            match &rec[k] {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| Error::Row { row, message: format!("invalid {} {s:?}", expected[k]) }),
            }
        };
        rows.push(ProfileRow {
            position: parse_timestamp(&rec[0]).map_err(|e| Error::Row { row, message: e.to_string() })?,
            value: num(1)?,
            lower: num(2)?,
            upper: num(3)?,
            is_anomaly: match &rec[4] {
                "true" => true,
                "false" => false,
                s => return Err(Error::Row { row, message: format!("invalid is_anomaly {s:?}") }),
            },
            anomaly_label: Some(rec[5].to_string()).filter(|s| !s.is_empty()),
        });
    }
    Ok(rows)
}

fn cmd_report(args: ReportArgs) -> CliResult<()> {
    let profile_path = args.dir.join("profile.csv");
    let rows = read_profile_csv(read_text(&profile_path)?.as_bytes()).map_err(|e| data_err(&profile_path, e))?;
    let anomalies_path = args.dir.join("anomalies.json");
    let anomalies = AnomalyFile::read(read_text(&anomalies_path)?.as_bytes()).map_err(|e| data_err(&anomalies_path, e))?;
    println!("{} positions, {} anomalies", rows.len(), anomalies.anomalies.len());
    for a in &anomalies.anomalies {
        println!(
            "  {:<5} {} .. {}  warning {}  peak {}",
            a.label,
            a.onset,
            a.offset,
            a.warning_onset,
            a.peak_value.map(|v| v.to_string()).unwrap_or_else(|| "-".into())
        );
    }
    let report_path = args.dir.join("report.json");
    let report: Option<ReportFile> = if report_path.exists() {
        let r: ReportFile = serde_json::from_str(&read_text(&report_path)?).map_err(|e| data_err(&report_path, e))?;
        println!();
        print!("{}", render_report(&r.report));
        Some(r)
    } else {
        None
    };
    if let Some(svg) = &args.svg {
        // the first window starts at the analysis epoch, which is also the
        // time origin of the report's catalog records
        let Some(origin) = rows.first().map(|r| r.position) else {
            return Err(data_err(&profile_path, "profile is empty"));
        };
        let day = |t: &DateTime<Utc>| seconds_since(&origin, t) / SECONDS_PER_DAY;
        let spans = anomalies
            .anomalies
            .iter()
            .map(|a| Ok((day(&parse_timestamp(&a.onset)?), day(&parse_timestamp(&a.offset)?))))
            .collect::<crate::error::Result<Vec<_>>>()
            .map_err(|e| data_err(&anomalies_path, e))?;
        let markers = report
            .map(|r| {
                r.report
                    .matches
                    .iter()
                    .map(|m| (m.group.main_shock().origin_time / SECONDS_PER_DAY, m.group.main_shock().id.clone()))
                    .collect()
            })
            .unwrap_or_default();
        let plot = Plot {
            title: format!("profile from {}", args.dir.display()),
            x_label: format!("days since {}", format_timestamp(&origin)),
            y_label: "dissimilarity".into(),
            x: rows.iter().map(|r| day(&r.position)).collect(),
            line: rows.iter().map(|r| r.value).collect(),
            band_lower: rows.iter().map(|r| r.lower).collect(),
            band_upper: rows.iter().map(|r| r.upper).collect(),
            spans,
            markers,
        };
        fs::write(svg, render(&plot)).map_err(|e| data_err(svg, e))?;
    }
    Ok(())
}

// ---- entry point ----

/// Runs the CLI and returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = load_config(cli.config.as_deref()).and_then(|cfg| {
        let threads = cli.threads.or(cfg.file.run.threads);
        match cli.command {
            Command::Analyze(a) => cmd_analyze(a, &cfg, threads),
            Command::Evaluate(a) => cmd_evaluate(a, &cfg),
            Command::Synth(a) => cmd_synth(a, &cfg),
            Command::Rates(a) => cmd_rates(a, &cfg),
            Command::Report(a) => cmd_report(a),
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("microquake: {e}");
            e.exit_code()
        }
    }
}
