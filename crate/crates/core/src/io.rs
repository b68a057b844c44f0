//! CSV and JSON readers and writers for curves, datasets and results.
//!
//! Floats are written with 17 significant digits so a write-read cycle is
//! exact in double precision.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::curve::SampledCurve;
use crate::error::{Error, Result};
use crate::pipeline::SectionedCurveSet;
use crate::registration::{Matrix2, ReferenceMode, RegistrationResult};

/// Formats `v` with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse(field: &str, what: &str) -> Result<f64> {
    field.trim().parse().map_err(|_| Error::Data(format!("{what}: cannot parse {field:?} as a number")))
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_writer(File::create(path)?))
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(File::open(path)?))
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Data(format!("{}: missing column {name:?}", path.display())))
}

/// Writes `curve_id,x,y` rows for several curves.
pub fn write_curves_long(path: &Path, curves: &[(String, SampledCurve)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["curve_id", "x", "y"])?;
    for (id, c) in curves {
        for (x, y) in c.xs().iter().zip(c.values()) {
            w.write_record([id.as_str(), &fmt_f64(*x), &fmt_f64(*y)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `curve_id,x,y` rows (or plain `x,y` as one curve named `0`),
/// keeping curves in order of first appearance.
pub fn read_curves_long(path: &Path) -> Result<Vec<(String, SampledCurve)>> {
    let mut r = reader(path)?;
    let headers = r.headers()?.clone();
    let id_col = headers.iter().position(|h| h == "curve_id");
    let (xc, yc) = (column(&headers, "x", path)?, column(&headers, "y", path)?);
    let mut order: Vec<String> = Vec::new();
    let mut points: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        let id = id_col.map_or("0", |c| &rec[c]).to_string();
        let entry = points.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            (Vec::new(), Vec::new())
        });
        entry.0.push(parse(&rec[xc], "x")?);
        entry.1.push(parse(&rec[yc], "y")?);
    }
    if order.is_empty() {
        return Err(Error::Data(format!("{}: no curves", path.display())));
    }
    order
        .into_iter()
        .map(|id| {
            let (xs, ys) = &points[&id];
            Ok((id.clone(), SampledCurve::from_points(xs, ys)?))
        })
        .collect()
}

/// Writes a table with a `curve_id` column followed by named columns.
pub fn write_wide(path: &Path, ids: &[String], names: &[String], values: &DMatrix<f64>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(std::iter::once("curve_id").chain(names.iter().map(String::as_str)))?;
    for (i, id) in ids.iter().enumerate() {
        let row: Vec<String> = values.row(i).iter().map(|v| fmt_f64(*v)).collect();
        w.write_record(std::iter::once(id.as_str()).chain(row.iter().map(String::as_str)))?;
    }
    w.flush()?;
    Ok(())
}

/// A `curve_id`-keyed table of numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct WideTable {
    pub ids: Vec<String>,
    pub names: Vec<String>,
    pub values: DMatrix<f64>,
}

/// Reads a wide table. With `expected` columns given, every name must be
/// present and the columns come back in that order.
pub fn read_wide(path: &Path, expected: Option<&[String]>) -> Result<WideTable> {
    let mut r = reader(path)?;
    let headers = r.headers()?.clone();
    let id_col = column(&headers, "curve_id", path)?;
    let names: Vec<String> = match expected {
        Some(e) => e.to_vec(),
        None => headers.iter().enumerate().filter(|(i, _)| *i != id_col).map(|(_, h)| h.to_string()).collect(),
    };
    let cols: Vec<usize> = names.iter().map(|n| column(&headers, n, path)).collect::<Result<_>>()?;
    let mut ids = Vec::new();
    let mut flat = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        ids.push(rec[id_col].to_string());
        for (&c, name) in cols.iter().zip(&names) {
            flat.push(parse(&rec[c], name)?);
        }
    }
    Ok(WideTable { values: DMatrix::from_row_slice(ids.len(), names.len(), &flat), ids, names })
}

/// Station columns are named `s0`, `s1`, ... in axis order.
pub fn station_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i}")).collect()
}

/// Writes the inputs and curves tables of a sectioned dataset.
pub fn write_sectioned(inputs: &Path, curves: &Path, set: &SectionedCurveSet) -> Result<()> {
    write_wide(inputs, &set.curve_ids, &set.input_names, &set.inputs)?;
    write_wide(curves, &set.curve_ids, &station_names(set.n_stations()), &set.curves)
}

/// Loads a sectioned dataset; rows are matched by `curve_id`.
pub fn read_sectioned(
    inputs: &Path,
    curves: &Path,
    station_axis: Vec<f64>,
    breakpoints: Vec<usize>,
) -> Result<SectionedCurveSet> {
    let x = read_wide(inputs, None)?;
    let y = read_wide(curves, Some(&station_names(station_axis.len())))?;
    let position: BTreeMap<&str, usize> = y.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    if position.len() != y.ids.len() {
        return Err(Error::Data(format!("{}: duplicate curve ids", curves.display())));
    }
    let rows: Vec<usize> = x
        .ids
        .iter()
        .map(|id| {
            position
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::Data(format!("curve {id:?} has inputs but no curve row")))
        })
        .collect::<Result<_>>()?;
    if rows.len() != y.ids.len() {
        return Err(Error::Data("curve rows without inputs".into()));
    }
    let set = SectionedCurveSet {
        station_axis,
        breakpoints,
        curves: y.values.select_rows(&rows),
        inputs: x.values,
        input_names: x.names,
        curve_ids: x.ids,
    };
    set.validate()?;
    Ok(set)
}

/// Serializable summary of one registration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationRecord {
    pub curve_id: String,
    pub theta_hat: f64,
    pub lambda_hat: f64,
    pub contrast: f64,
    pub sigma2: f64,
    pub gamma: Option<Matrix2>,
    pub converged: bool,
    pub iterations: usize,
    pub mode: ReferenceMode,
    pub on_boundary: bool,
    pub a2_satisfied: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpolation_gap: Option<f64>,
}

impl RegistrationRecord {
    pub fn new(curve_id: impl Into<String>, r: &RegistrationResult) -> Self {
        Self {
            curve_id: curve_id.into(),
            theta_hat: r.alpha_hat.theta,
            lambda_hat: r.alpha_hat.lambda,
            contrast: r.contrast_value,
            sigma2: r.sigma2_hat,
            gamma: r.gamma_hat,
            converged: r.converged,
            iterations: r.iterations,
            mode: r.mode,
            on_boundary: r.on_boundary,
            a2_satisfied: r.a2_satisfied,
            interpolation_gap: r.interpolation_gap,
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
}

/// Writes rows of named numeric columns.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}
