//! CSV ingestion and emission.
//!
//! Stream files carry a header naming `y`, optionally `p_f`, and optionally
//! feature columns `x0, x1, ...`. Other columns are ignored on input, so an
//! annotated output file can be read back. Empty cells mean "absent".
//! Floats are written in shortest round-trip form, LF line endings.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use recal_core::{CalibrationCurve, SeriesRow, StreamRecord};

use crate::error::{Error, Result};

struct Layout {
    y: usize,
    forecast: Option<usize>,
    features: Vec<usize>,
}

fn layout(headers: &csv::StringRecord) -> Result<Layout> {
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let y = find("y").ok_or_else(|| Error::Data("missing y column".into()))?;
    let forecast = find("p_f");
    let mut features = Vec::new();
    while let Some(idx) = find(&format!("x{}", features.len())) {
        features.push(idx);
    }
    Ok(Layout {
        y,
        forecast,
        features,
    })
}

fn parse_cell(row: usize, column: &str, raw: &str) -> Result<Option<f64>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Data(format!("row {row}, column {column}: cannot parse {raw:?}")))
}

/// Reads stream records; rows are numbered from 1 after the header.
pub fn read_records_from<R: Read>(reader: R) -> Result<Vec<StreamRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Data(format!("cannot read header: {e}")))?
        .clone();
    let layout = layout(&headers)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Data(format!("row {row}: {e}")))?;
        let cell = |idx: usize| rec.get(idx).unwrap_or("");

        let y = match parse_cell(row, "y", cell(layout.y))? {
            Some(0.0) => 0,
            Some(1.0) => 1,
            Some(v) => {
                return Err(Error::Data(format!(
                    "row {row}, column y: {v} is not 0 or 1"
                )))
            }
            None => return Err(Error::Data(format!("row {row}, column y: missing outcome"))),
        };
        let forecast = match layout.forecast {
            Some(idx) => parse_cell(row, "p_f", cell(idx))?,
            None => None,
        };
        if let Some(p) = forecast {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Data(format!(
                    "row {row}, column p_f: {p} outside [0, 1]"
                )));
            }
        }
        let features = if layout.features.is_empty() {
            None
        } else {
            let mut xs = Vec::with_capacity(layout.features.len());
            for (k, &idx) in layout.features.iter().enumerate() {
                match parse_cell(row, &format!("x{k}"), cell(idx))? {
                    Some(v) => xs.push(v),
                    None => {
                        return Err(Error::Data(format!(
                            "row {row}, column x{k}: missing value"
                        )))
                    }
                }
            }
            Some(xs)
        };
        let record = StreamRecord::new(features, forecast, y)
            .map_err(|e| Error::Data(format!("row {row}: {e}")))?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_records(path: &Path) -> Result<Vec<StreamRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_records_from(file)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes records with the same schema [`read_records_from`] accepts. When
/// `extra` is given, a trailing column with that name and values is added.
pub fn write_records_to<W: Write>(
    writer: W,
    records: &[StreamRecord],
    extra: Option<(&str, &[f64])>,
) -> Result<()> {
    let dim = records
        .iter()
        .filter_map(|r| r.features.as_ref().map(Vec::len))
        .max()
        .unwrap_or(0);
    let has_forecast = records.iter().any(|r| r.forecast.is_some());
    if let Some((_, values)) = extra {
        if values.len() != records.len() {
            return Err(Error::Data(
                "extra column length does not match records".into(),
            ));
        }
    }

    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let mut header: Vec<String> = (0..dim).map(|k| format!("x{k}")).collect();
    if has_forecast {
        header.push("p_f".into());
    }
    header.push("y".into());
    if let Some((name, _)) = extra {
        header.push(name.into());
    }
    wtr.write_record(&header).map_err(csv_err)?;

    for (i, r) in records.iter().enumerate() {
        let mut row: Vec<String> = match &r.features {
            Some(xs) if xs.len() == dim => xs.iter().map(f64::to_string).collect(),
            Some(_) => return Err(Error::Data(format!("record {}: ragged features", i + 1))),
            None => vec![String::new(); dim],
        };
        if has_forecast {
            row.push(fmt_opt(r.forecast));
        }
        row.push(r.outcome.to_string());
        if let Some((_, values)) = extra {
            row.push(values[i].to_string());
        }
        wtr.write_record(&row).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::Data(e.to_string()))?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(format!("csv write failed: {e}"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn write_records(
    path: &Path,
    records: &[StreamRecord],
    extra: Option<(&str, &[f64])>,
) -> Result<()> {
    write_records_to(create(path)?, records, extra)
}

pub fn write_series_to<W: Write>(writer: W, rows: &[SeriesRow]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    wtr.write_record([
        "t",
        "loss_recal_avg",
        "loss_base_avg",
        "cal_err_l1",
        "cal_err_l2",
    ])
    .map_err(csv_err)?;
    for r in rows {
        wtr.write_record([
            r.t.to_string(),
            r.loss_recal_avg.to_string(),
            r.loss_base_avg.to_string(),
            r.cal_err_l1.to_string(),
            r.cal_err_l2.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::Data(e.to_string()))?;
    Ok(())
}

pub fn write_series(path: &Path, rows: &[SeriesRow]) -> Result<()> {
    write_series_to(create(path)?, rows)
}

/// Empty buckets are written with blank means.
pub fn write_curve_to<W: Write>(writer: W, curve: &CalibrationCurve) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    wtr.write_record([
        "bucket_lo",
        "bucket_hi",
        "mean_pred",
        "mean_outcome",
        "count",
    ])
    .map_err(csv_err)?;
    for b in &curve.buckets {
        wtr.write_record([
            b.lo.to_string(),
            b.hi.to_string(),
            fmt_opt(b.mean_prediction),
            fmt_opt(b.mean_outcome),
            b.count.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::Data(e.to_string()))?;
    Ok(())
}

pub fn write_curve(path: &Path, curve: &CalibrationCurve) -> Result<()> {
    write_curve_to(create(path)?, curve)
}
