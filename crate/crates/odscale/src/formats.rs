//! CSV and config file readers and writers.
//!
//! Every CSV file is UTF-8 with a mandatory header row. Columns are matched
//! by name, so their order is free; unknown columns are rejected.
//!
//! | file                  | columns                                   |
//! |-----------------------|-------------------------------------------|
//! | `segments.csv`        | `id,length_km,lanes,v_max_kmh,v_min_kmh`  |
//! | `paths.csv`           | `path_id,seq,segment_id`                  |
//! | `od.csv`              | `od_id,path_id,demand_vph`                |
//! | `gt_travel_times.csv` | `path_id,tt_s[,weight]`                   |
//! | `sensors.csv`         | `segment_id,count_vph`                    |
//! | `assignment.csv`      | `segment_id,od_id,probability` (optional) |
//!
//! Floats are written with Rust's shortest round-trip formatting, so a file
//! written from parsed values parses back to identical values.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};
use std::str::FromStr;

use odscale_core::{EstimateOptions, ModelError, ModelParams, OdPair, Path, Segment};

use crate::error::{Error, Result};

pub const SEGMENTS_FILE: &str = "segments.csv";
pub const PATHS_FILE: &str = "paths.csv";
pub const OD_FILE: &str = "od.csv";
pub const GT_FILE: &str = "gt_travel_times.csv";
pub const SENSORS_FILE: &str = "sensors.csv";
pub const ASSIGNMENT_FILE: &str = "assignment.csv";
pub const CONFIG_FILE: &str = "config.txt";

/// A parsed value with the 1-based line it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Located<T> {
    pub line: u64,
    pub value: T,
}

struct Table {
    file: PathBuf,
    /// Field position of each requested column, `None` for absent optional ones.
    columns: Vec<Option<usize>>,
    names: Vec<&'static str>,
    rows: Vec<(u64, csv::StringRecord)>,
}

fn csv_error(file: &FsPath, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    let message = match err.kind() {
        csv::ErrorKind::Utf8 { err, .. } => {
            return Error::Parse {
                file: file.into(),
                line,
                column: err.field() + 1,
                message: "field is not valid UTF-8".into(),
            }
        }
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("expected {expected_len} fields, found {len}"),
        _ => err.to_string(),
    };
    Error::Parse {
        file: file.into(),
        line,
        column: 0,
        message,
    }
}

impl Table {
    fn read(file: &FsPath, required: &[&'static str], optional: &[&'static str]) -> Result<Self> {
        let bytes = fs::read(file).map_err(|e| Error::io(file, e))?;
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(bytes.as_slice());
        let headers = rdr.headers().map_err(|e| csv_error(file, e))?.clone();
        if headers.is_empty() || headers.iter().all(str::is_empty) {
            return Err(Error::Parse {
                file: file.into(),
                line: 1,
                column: 0,
                message: "missing header row".into(),
            });
        }
        let mut position: HashMap<&str, usize> = HashMap::new();
        for (i, h) in headers.iter().enumerate() {
            let known = required.contains(&h) || optional.contains(&h);
            if !known || position.insert(h, i).is_some() {
                return Err(Error::Parse {
                    file: file.into(),
                    line: 1,
                    column: i + 1,
                    message: if known {
                        format!("duplicate column `{h}`")
                    } else {
                        format!("unknown column `{h}`")
                    },
                });
            }
        }
        let mut names = Vec::new();
        let mut columns = Vec::new();
        for &name in required {
            match position.get(name) {
                Some(&i) => columns.push(Some(i)),
                None => {
                    return Err(Error::Parse {
                        file: file.into(),
                        line: 1,
                        column: 0,
                        message: format!("missing column `{name}`"),
                    })
                }
            }
            names.push(name);
        }
        for &name in optional {
            columns.push(position.get(name).copied());
            names.push(name);
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_error(file, e))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            rows.push((line, rec));
        }
        Ok(Self {
            file: file.into(),
            columns,
            names,
            rows,
        })
    }

    fn raw<'r>(&self, rec: &'r csv::StringRecord, col: usize) -> Option<(&'r str, usize)> {
        self.columns[col].map(|i| (rec.get(i).unwrap_or(""), i + 1))
    }

    fn parse<T>(&self, line: u64, rec: &csv::StringRecord, col: usize) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some((text, column)) = self.raw(rec, col) else {
            return Ok(None);
        };
        text.parse().map(Some).map_err(|e| Error::Parse {
            file: self.file.clone(),
            line,
            column,
            message: format!("`{}`: cannot parse `{text}`: {e}", self.names[col]),
        })
    }

    fn get<T>(&self, line: u64, rec: &csv::StringRecord, col: usize) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.parse(line, rec, col)?.expect("required column"))
    }

    fn text(&self, line: u64, rec: &csv::StringRecord, col: usize) -> Result<String> {
        let (text, column) = self.raw(rec, col).expect("required column");
        if text.is_empty() {
            return Err(Error::Parse {
                file: self.file.clone(),
                line,
                column,
                message: format!("`{}` is empty", self.names[col]),
            });
        }
        Ok(text.to_owned())
    }
}

pub fn read_segments(file: &FsPath) -> Result<Vec<Located<Segment>>> {
    let t = Table::read(
        file,
        &["id", "length_km", "lanes", "v_max_kmh", "v_min_kmh"],
        &[],
    )?;
    let mut out = Vec::with_capacity(t.rows.len());
    for (line, rec) in &t.rows {
        let line = *line;
        let seg = Segment {
            id: t.text(line, rec, 0)?,
            length_km: t.get(line, rec, 1)?,
            lanes: t.get(line, rec, 2)?,
            v_max_kmh: t.get(line, rec, 3)?,
            v_min_kmh: t.get(line, rec, 4)?,
        };
        if let Err(odscale_core::NetworkError::InvalidSegment { constraint, .. }) = seg.validate() {
            return Err(Error::schema(file, line, constraint));
        }
        out.push(Located { line, value: seg });
    }
    Ok(out)
}

/// Paths in order of first appearance, segments sorted by `seq`.
pub fn read_paths(file: &FsPath) -> Result<Vec<Located<Path>>> {
    let t = Table::read(file, &["path_id", "seq", "segment_id"], &[])?;
    let mut order: Vec<(String, u64)> = Vec::new();
    let mut steps: HashMap<String, BTreeMap<i64, String>> = HashMap::new();
    for (line, rec) in &t.rows {
        let line = *line;
        let id = t.text(line, rec, 0)?;
        let seq: i64 = t.get(line, rec, 1)?;
        let seg = t.text(line, rec, 2)?;
        let entry = steps.entry(id.clone()).or_insert_with(|| {
            order.push((id.clone(), line));
            BTreeMap::new()
        });
        if entry.insert(seq, seg).is_some() {
            return Err(Error::schema(file, line, "seq unique within path"));
        }
    }
    Ok(order
        .into_iter()
        .map(|(id, line)| {
            let segment_ids = steps
                .remove(&id)
                .unwrap_or_default()
                .into_values()
                .collect();
            Located {
                line,
                value: Path { id, segment_ids },
            }
        })
        .collect())
}

pub fn read_od(file: &FsPath) -> Result<Vec<Located<OdPair>>> {
    let t = Table::read(file, &["od_id", "path_id", "demand_vph"], &[])?;
    let mut out = Vec::with_capacity(t.rows.len());
    for (line, rec) in &t.rows {
        let line = *line;
        let od = OdPair {
            id: t.text(line, rec, 0)?,
            path_id: t.text(line, rec, 1)?,
            subsample_demand_vph: t.get(line, rec, 2)?,
        };
        if !(od.subsample_demand_vph.is_finite() && od.subsample_demand_vph >= 0.0) {
            return Err(Error::schema(file, line, "demand_vph >= 0"));
        }
        out.push(Located { line, value: od });
    }
    Ok(out)
}

/// One ground-truth row; `travel_time` is in the file's unit.
#[derive(Debug, Clone, PartialEq)]
pub struct GtRow {
    pub path_id: String,
    pub travel_time: f64,
    pub weight: f64,
}

pub fn read_gt(file: &FsPath) -> Result<Vec<Located<GtRow>>> {
    let t = Table::read(file, &["path_id", "tt_s"], &["weight"])?;
    let mut out = Vec::with_capacity(t.rows.len());
    for (line, rec) in &t.rows {
        let line = *line;
        let row = GtRow {
            path_id: t.text(line, rec, 0)?,
            travel_time: t.get(line, rec, 1)?,
            weight: t.parse(line, rec, 2)?.unwrap_or(1.0),
        };
        if !(row.travel_time.is_finite() && row.travel_time > 0.0) {
            return Err(Error::schema(file, line, "tt_s > 0"));
        }
        if !(row.weight.is_finite() && row.weight >= 0.0) {
            return Err(Error::schema(file, line, "weight >= 0"));
        }
        out.push(Located { line, value: row });
    }
    Ok(out)
}

/// Observed segment count; used only for validation, never for estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorCount {
    pub segment_id: String,
    pub count_vph: f64,
}

pub fn read_sensors(file: &FsPath) -> Result<Vec<Located<SensorCount>>> {
    let t = Table::read(file, &["segment_id", "count_vph"], &[])?;
    let mut out = Vec::with_capacity(t.rows.len());
    let mut seen = HashMap::new();
    for (line, rec) in &t.rows {
        let line = *line;
        let s = SensorCount {
            segment_id: t.text(line, rec, 0)?,
            count_vph: t.get(line, rec, 1)?,
        };
        if !(s.count_vph.is_finite() && s.count_vph >= 0.0) {
            return Err(Error::schema(file, line, "count_vph >= 0"));
        }
        if seen.insert(s.segment_id.clone(), line).is_some() {
            return Err(Error::schema(file, line, "segment_id unique"));
        }
        out.push(Located { line, value: s });
    }
    Ok(out)
}

/// `(segment id, od id, probability)` rows.
pub fn read_assignment(file: &FsPath) -> Result<Vec<Located<(String, String, f64)>>> {
    let t = Table::read(file, &["segment_id", "od_id", "probability"], &[])?;
    let mut out = Vec::with_capacity(t.rows.len());
    for (line, rec) in &t.rows {
        let line = *line;
        let p: f64 = t.get(line, rec, 2)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::schema(file, line, "0 <= probability <= 1"));
        }
        out.push(Located {
            line,
            value: (t.text(line, rec, 0)?, t.text(line, rec, 1)?, p),
        });
    }
    Ok(out)
}

/// Unit of the `tt_s` column, set by the config key `travel_time_unit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeUnit {
    #[default]
    Seconds,
    Minutes,
    Hours,
}

impl TimeUnit {
    pub fn seconds(self) -> f64 {
        match self {
            TimeUnit::Seconds => 1.0,
            TimeUnit::Minutes => 60.0,
            TimeUnit::Hours => 3600.0,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            TimeUnit::Seconds => "s",
            TimeUnit::Minutes => "min",
            TimeUnit::Hours => "h",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "s" => Some(TimeUnit::Seconds),
            "min" => Some(TimeUnit::Minutes),
            "h" => Some(TimeUnit::Hours),
            _ => None,
        }
    }
}

/// Grid size used when neither the config nor the command line sets one:
/// steps of 0.1 over the default bounds.
pub const DEFAULT_GRID_POINTS: usize = 991;

/// Model parameters and run settings from a `key = value` config file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub options: EstimateOptions,
    pub grid_points: usize,
    pub travel_time_unit: TimeUnit,
}

impl RunConfig {
    pub fn with_kappa(kappa: f64) -> Self {
        Self {
            params: ModelParams::with_kappa(kappa),
            options: EstimateOptions::default(),
            grid_points: DEFAULT_GRID_POINTS,
            travel_time_unit: TimeUnit::Seconds,
        }
    }
}

/// Reads a config file. `kappa` is mandatory; every other key has a default.
/// Blank lines and lines starting with `#` are skipped.
pub fn read_config(file: &FsPath) -> Result<RunConfig> {
    let text = fs::read_to_string(file).map_err(|e| match e.kind() {
        std::io::ErrorKind::InvalidData => Error::Parse {
            file: file.into(),
            line: 0,
            column: 0,
            message: "file is not valid UTF-8".into(),
        },
        _ => Error::io(file, e),
    })?;
    parse_config(file, &text)
}

pub fn parse_config(file: &FsPath, text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::with_kappa(f64::NAN);
    let mut seen: HashMap<String, u64> = HashMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n as u64 + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parse_err = |column: usize, message: String| Error::Parse {
            file: file.into(),
            line,
            column,
            message,
        };
        let Some(eq) = raw.find('=') else {
            return Err(parse_err(1, "expected `key = value`".into()));
        };
        let key = raw[..eq].trim();
        let value = raw[eq + 1..].trim();
        let value_col = eq + 2 + (raw[eq + 1..].len() - raw[eq + 1..].trim_start().len());
        if seen.insert(key.to_owned(), line).is_some() {
            return Err(parse_err(1, format!("duplicate key `{key}`")));
        }
        fn parse_num<T: FromStr>(v: &str) -> Option<T> {
            v.parse().ok()
        }
        let bad = || parse_err(value_col, format!("`{key}`: cannot parse `{value}`"));
        match key {
            "k_jam" => cfg.params.k_jam = parse_num(value).ok_or_else(bad)?,
            "kappa" => cfg.params.kappa = parse_num(value).ok_or_else(bad)?,
            "alpha1" => cfg.params.alpha1 = parse_num(value).ok_or_else(bad)?,
            "alpha2" => cfg.params.alpha2 = parse_num(value).ok_or_else(bad)?,
            "x_lower" => cfg.params.x_lower = parse_num(value).ok_or_else(bad)?,
            "x_upper" => cfg.params.x_upper = parse_num(value).ok_or_else(bad)?,
            "seeds" => cfg.options.seeds = parse_num(value).ok_or_else(bad)?,
            "max_iter_per_start" => {
                cfg.options.max_iter_per_start = parse_num(value).ok_or_else(bad)?
            }
            "tol_x_rel" => cfg.options.tol_x_rel = parse_num(value).ok_or_else(bad)?,
            "tol_g" => cfg.options.tol_g = parse_num(value).ok_or_else(bad)?,
            "tol_f" => cfg.options.tol_f = parse_num(value).ok_or_else(bad)?,
            "grid_points" => cfg.grid_points = parse_num(value).ok_or_else(bad)?,
            "travel_time_unit" => {
                cfg.travel_time_unit = TimeUnit::from_tag(value).ok_or_else(|| Error::Unit {
                    file: file.into(),
                    line,
                    tag: value.to_owned(),
                })?
            }
            _ => return Err(parse_err(1, format!("unknown key `{key}`"))),
        }
    }
    if !seen.contains_key("kappa") {
        return Err(Error::schema(file, 0, "kappa is required"));
    }
    let line_of = |key: &str| seen.get(key).copied().unwrap_or(0);
    if let Err(ModelError::InvalidParams { name, constraint }) = cfg.params.validate() {
        return Err(Error::schema(file, line_of(name), constraint));
    }
    if let Err(odscale_core::EstimateError::InvalidOptions(constraint)) = cfg.options.validate() {
        return Err(Error::schema(file, 0, constraint));
    }
    if cfg.grid_points == 0 {
        return Err(Error::schema(
            file,
            line_of("grid_points"),
            "grid_points >= 1",
        ));
    }
    Ok(cfg)
}

pub fn format_config(cfg: &RunConfig) -> String {
    let p = &cfg.params;
    let o = &cfg.options;
    format!(
        "k_jam = {:?}\nkappa = {:?}\nalpha1 = {:?}\nalpha2 = {:?}\nx_lower = {:?}\nx_upper = {:?}\n\
         seeds = {}\nmax_iter_per_start = {}\ntol_x_rel = {:?}\ntol_g = {:?}\ntol_f = {:?}\n\
         grid_points = {}\ntravel_time_unit = {}\n",
        p.k_jam,
        p.kappa,
        p.alpha1,
        p.alpha2,
        p.x_lower,
        p.x_upper,
        o.seeds,
        o.max_iter_per_start,
        o.tol_x_rel,
        o.tol_g,
        o.tol_f,
        cfg.grid_points,
        cfg.travel_time_unit.tag(),
    )
}

pub fn write_config(file: &FsPath, cfg: &RunConfig) -> Result<()> {
    fs::write(file, format_config(cfg)).map_err(|e| Error::io(file, e))
}

/// Shortest text that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Writes a CSV file from string rows. Fields are quoted only when needed.
pub fn write_csv<I, R>(file: &FsPath, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let to_io = |e: csv::Error| -> std::io::Error { e.into() };
    let f = fs::File::create(file).map_err(|e| Error::io(file, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(f));
    w.write_record(header)
        .map_err(|e| Error::io(file, to_io(e)))?;
    for row in rows {
        let row: Vec<String> = row.into_iter().collect();
        w.write_record(&row)
            .map_err(|e| Error::io(file, to_io(e)))?;
    }
    let mut inner = w
        .into_inner()
        .map_err(|e| Error::io(file, std::io::Error::other(e.to_string())))?;
    inner.flush().map_err(|e| Error::io(file, e))
}

pub fn write_segments(file: &FsPath, segments: &[Segment]) -> Result<()> {
    write_csv(
        file,
        &["id", "length_km", "lanes", "v_max_kmh", "v_min_kmh"],
        segments.iter().map(|s| {
            [
                s.id.clone(),
                num(s.length_km),
                s.lanes.to_string(),
                num(s.v_max_kmh),
                num(s.v_min_kmh),
            ]
        }),
    )
}

pub fn write_paths(file: &FsPath, paths: &[Path]) -> Result<()> {
    write_csv(
        file,
        &["path_id", "seq", "segment_id"],
        paths.iter().flat_map(|p| {
            p.segment_ids
                .iter()
                .enumerate()
                .map(|(k, s)| [p.id.clone(), k.to_string(), s.clone()])
        }),
    )
}

pub fn write_od(file: &FsPath, od_pairs: &[OdPair]) -> Result<()> {
    write_csv(
        file,
        &["od_id", "path_id", "demand_vph"],
        od_pairs
            .iter()
            .map(|o| [o.id.clone(), o.path_id.clone(), num(o.subsample_demand_vph)]),
    )
}

pub fn write_gt(file: &FsPath, rows: &[GtRow]) -> Result<()> {
    write_csv(
        file,
        &["path_id", "tt_s", "weight"],
        rows.iter()
            .map(|r| [r.path_id.clone(), num(r.travel_time), num(r.weight)]),
    )
}

pub fn write_sensors(file: &FsPath, sensors: &[SensorCount]) -> Result<()> {
    write_csv(
        file,
        &["segment_id", "count_vph"],
        sensors
            .iter()
            .map(|s| [s.segment_id.clone(), num(s.count_vph)]),
    )
}
