//! File formats for measures, plans and reports.
//!
//! * measures: JSON `{"dim", "points", "weights"}`, CSV rows of `d`
//!   coordinates followed by a weight (an optional header row is skipped),
//!   or 8-bit grayscale PGM/PNG images;
//! * plans: JSON `{"num_marginals", "atoms": [{"indices", "mass"}]}`;
//! * reports: any serializable value as pretty JSON.
//!
//! Image pixels with positive intensity become atoms at `(col/W, row/H)`
//! with weight proportional to intensity; the origin is the top-left
//! corner and `y` grows downwards.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::plan::MultiMarginalPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureFormat {
    Json,
    Csv,
    Image,
}

impl MeasureFormat {
    /// Guesses the format from the file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "json" => Some(Self::Json),
            "csv" => Some(Self::Csv),
            "png" | "pgm" | "pnm" => Some(Self::Image),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Self::Json => "json",
            Self::Csv => "csv",
            Self::Image => "png",
        }
    }
}

impl std::str::FromStr for MeasureFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "image" => Ok(Self::Image),
            other => Err(Error::InvalidParameter(format!("unknown format '{other}'"))),
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn parse_err(path: &Path, message: impl ToString) -> Error {
    Error::Parse { path: path.display().to_string(), message: message.to_string() }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| parse_err(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| parse_err(path, e))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

/// Loads a measure; `format = None` infers it from the extension.
pub fn load_measure(path: &Path, format: Option<MeasureFormat>) -> Result<DiscreteMeasure> {
    let format = format
        .or_else(|| MeasureFormat::from_path(path))
        .ok_or_else(|| parse_err(path, "cannot infer the measure format from the extension"))?;
    match format {
        MeasureFormat::Json => read_json(path),
        MeasureFormat::Csv => load_csv(path),
        MeasureFormat::Image => load_image(path),
    }
}

pub fn save_measure(path: &Path, mu: &DiscreteMeasure, format: MeasureFormat) -> Result<()> {
    match format {
        MeasureFormat::Json => write_json(path, mu),
        MeasureFormat::Csv => save_csv(path, mu),
        MeasureFormat::Image => Err(Error::Unsupported("measures cannot be written as images".into())),
    }
}

fn load_csv(path: &Path) -> Result<DiscreteMeasure> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| parse_err(path, e))?;
    let mut dim = None;
    let mut pts = Vec::new();
    let mut ws = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, e))?;
        let vals: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let vals = match vals {
            Ok(v) => v,
            Err(_) if line == 0 => continue,
            Err(e) => return Err(parse_err(path, format!("row {}: {e}", line + 1))),
        };
        if vals.len() < 2 {
            return Err(parse_err(path, format!("row {} needs coordinates and a weight", line + 1)));
        }
        let d = vals.len() - 1;
        if *dim.get_or_insert(d) != d {
            return Err(parse_err(path, format!("row {} has {} coordinates, expected {}", line + 1, d, dim.unwrap())));
        }
        pts.extend_from_slice(&vals[..d]);
        ws.push(vals[d]);
    }
    let dim = dim.ok_or_else(|| parse_err(path, "no data rows"))?;
    DiscreteMeasure::from_flat(dim, pts, ws)
}

fn save_csv(path: &Path, mu: &DiscreteMeasure) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| parse_err(path, e))?;
    let mut header: Vec<String> = (0..mu.dim()).map(|k| format!("x{k}")).collect();
    header.push("weight".into());
    w.write_record(&header).map_err(|e| parse_err(path, e))?;
    for (p, wt) in mu.iter_points().zip(mu.weights()) {
        let mut row: Vec<String> = p.iter().map(|c| c.to_string()).collect();
        row.push(wt.to_string());
        w.write_record(&row).map_err(|e| parse_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn load_image(path: &Path) -> Result<DiscreteMeasure> {
    let img = image::open(path).map_err(|e| parse_err(path, e))?.to_luma8();
    image_to_measure(&img).map_err(|e| match e {
        Error::InvalidMeasure(m) => Error::InvalidMeasure(format!("{}: {m}", path.display())),
        e => e,
    })
}

/// Converts a grayscale image into a measure on `[0, 1)²`.
pub fn image_to_measure(img: &image::GrayImage) -> Result<DiscreteMeasure> {
    let (w, h) = img.dimensions();
    let mut pts = Vec::new();
    let mut ws = Vec::new();
    for (col, row, px) in img.enumerate_pixels() {
        let v = px.0[0];
        if v > 0 {
            pts.push(col as f64 / w as f64);
            pts.push(row as f64 / h as f64);
            ws.push(v as f64);
        }
    }
    if ws.is_empty() {
        return Err(Error::InvalidMeasure("image has zero total mass".into()));
    }
    DiscreteMeasure::from_flat(2, pts, ws)
}

/// Loads a plan and canonicalizes it (merging repeated tuples).
pub fn load_plan(path: &Path) -> Result<MultiMarginalPlan> {
    let raw: MultiMarginalPlan = read_json(path)?;
    MultiMarginalPlan::new(raw.num_marginals(), raw.atoms().to_vec())
}

pub fn save_plan(path: &Path, plan: &MultiMarginalPlan) -> Result<()> {
    write_json(path, plan)
}
