//! File formats: event CSV, geo CSV, model JSON, result CSV.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::domain::{EventSeries, ModelSpec, RateModel, TimeWindow, DAY_SECONDS};
use crate::error::{Error, Result};
use crate::spatial::{GeoEvent, GeoEventSeries};

pub const EVENT_HEADER: [&str; 2] = ["day", "seconds"];
pub const GEO_HEADER: [&str; 4] = ["day", "seconds", "lon", "lat"];

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, message: message.into() }
}

/// Reads rows of a headed CSV, checking the header and field count.
/// Yields `(line number, fields)`.
fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<(usize, Vec<String>)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    let mut saw_header = false;
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if !saw_header {
            let got: Vec<&str> = rec.iter().collect();
            if got != header {
                return Err(parse_err(path, line, format!("expected header \"{}\"", header.join(","))));
            }
            saw_header = true;
            continue;
        }
        if rec.len() != header.len() {
            return Err(parse_err(path, line, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "no events"));
    }
    Ok(rows)
}

fn parse_day(path: &Path, line: usize, s: &str) -> Result<usize> {
    s.parse().map_err(|_| parse_err(path, line, format!("day '{s}' is not a nonnegative integer")))
}

fn parse_seconds(path: &Path, line: usize, s: &str) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| parse_err(path, line, format!("seconds '{s}' is not a number")))?;
    if !(0.0..DAY_SECONDS).contains(&v) {
        return Err(parse_err(path, line, format!("seconds {v} outside [0, {DAY_SECONDS})")));
    }
    Ok(v)
}

fn parse_coord(path: &Path, line: usize, name: &str, s: &str) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_err(path, line, format!("{name} '{s}' is not a finite number"))),
    }
}

/// Loads an event CSV (`day,seconds`). Days run from 0 to the largest day in
/// the file; days without rows are empty.
pub fn load_events(path: &Path) -> Result<EventSeries> {
    let mut days: Vec<Vec<f64>> = Vec::new();
    for (line, f) in read_rows(path, &EVENT_HEADER)? {
        let day = parse_day(path, line, &f[0])?;
        let t = parse_seconds(path, line, &f[1])?;
        if day >= days.len() {
            days.resize(day + 1, Vec::new());
        }
        days[day].push(t);
    }
    EventSeries::new(TimeWindow::day(), days)
}

/// Writes an event CSV with full-precision times.
pub fn save_events(events: &EventSeries, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", EVENT_HEADER.join(",")).map_err(io)?;
    for (d, day) in events.days().iter().enumerate() {
        for t in day {
            writeln!(out, "{d},{t}").map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

/// Loads a geo CSV (`day,seconds,lon,lat`).
pub fn load_geo(path: &Path) -> Result<GeoEventSeries> {
    let mut events = Vec::new();
    let mut num_days = 0;
    for (line, f) in read_rows(path, &GEO_HEADER)? {
        let day = parse_day(path, line, &f[0])?;
        let seconds = parse_seconds(path, line, &f[1])?;
        let lon = parse_coord(path, line, "lon", &f[2])?;
        let lat = parse_coord(path, line, "lat", &f[3])?;
        num_days = num_days.max(day + 1);
        events.push(GeoEvent { day, seconds, lon, lat });
    }
    GeoEventSeries::new(TimeWindow::day(), num_days, events)
}

pub fn save_geo(events: &GeoEventSeries, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", GEO_HEADER.join(",")).map_err(io)?;
    for e in events.events() {
        writeln!(out, "{},{},{},{}", e.day, e.seconds, e.lon, e.lat).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Writes `{window, knots, degree, coefficients, clamp}`.
pub fn save_model(model: &RateModel, path: &Path) -> Result<()> {
    write_json(model, path)
}

/// Reads a model file; schema violations name the offending field.
pub fn load_model(path: &Path) -> Result<RateModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let spec: ModelSpec = serde_json::from_str(&text).map_err(|e| Error::schema("<file>", e.to_string()))?;
    RateModel::try_from(spec)
}

/// Pretty JSON followed by a newline.
pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Formats `x` with six significant digits, `%g` style.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    // rounding may carry into the next decade
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float");
    let exp = if rounded.abs() >= 10f64.powi(exp + 1) { exp + 1 } else { exp };
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{rounded:.decimals$}"))
    } else {
        let s = format!("{x:.5e}");
        let (mantissa, e) = s.split_once('e').expect("scientific format");
        format!("{}e{e}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// A result table: fixed header, rows of preformatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = create(path)?;
        out.write_all(self.to_csv().as_bytes()).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Column index by header name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }
}
