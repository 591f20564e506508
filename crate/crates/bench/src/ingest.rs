//! Correspondence files.
//!
//! CSV: one correspondence per row as `y1,y2,z1,z2`, an optional
//! `y1,y2,z1,z2` header, and `#` comments. JSON: an array of
//! `[y1, y2, z1, z2]` rows. Coordinates are normalized unless intrinsics are
//! given, in which case they are pixels.

use std::io::{Read, Write};
use std::path::Path;

use cecme::synth::{normalized_to_pixels, pixels_to_normalized, CameraIntrinsics};
use cecme::{Correspondence, CorrespondenceSet};
use nalgebra::Vector2;

use crate::config::OutputFormat;
use crate::error::{BenchError, Result};

pub const HEADER: [&str; 4] = ["y1", "y2", "z1", "z2"];

/// Largest magnitude accepted as a normalized coordinate.
pub const NORMALIZED_LIMIT: f64 = 10.0;

/// Guesses the format from the extension, defaulting to CSV.
pub fn format_from_path(path: &Path) -> OutputFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => OutputFormat::Json,
        _ => OutputFormat::Csv,
    }
}

pub fn ingest_correspondences(
    path: &Path,
    format: OutputFormat,
    intrinsics: Option<&CameraIntrinsics>,
) -> Result<CorrespondenceSet> {
    let file = std::fs::File::open(path).map_err(|e| BenchError::io(path, e))?;
    read_correspondences(file, path, format, intrinsics)
}

/// Reads from any reader; `path` only labels errors.
pub fn read_correspondences<R: Read>(
    reader: R,
    path: &Path,
    format: OutputFormat,
    intrinsics: Option<&CameraIntrinsics>,
) -> Result<CorrespondenceSet> {
    let rows = match format {
        OutputFormat::Csv => read_csv_rows(reader, path)?,
        OutputFormat::Json => read_json_rows(reader, path)?,
    };
    let mut items = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        let c = match intrinsics {
            Some(intr) => Correspondence::new(
                pixels_to_normalized(&Vector2::new(row[0], row[1]), intr),
                pixels_to_normalized(&Vector2::new(row[2], row[3]), intr),
            ),
            None => {
                if let Some(&value) = row.iter().find(|v| v.abs() > NORMALIZED_LIMIT) {
                    return Err(BenchError::UnitMismatch {
                        path: path.to_path_buf(),
                        line,
                        value,
                    });
                }
                Correspondence::from_coords(row[0], row[1], row[2], row[3])
            }
        };
        items.push(c);
    }
    CorrespondenceSet::new(items).map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> BenchError {
    BenchError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_csv_rows<R: Read>(reader: R, path: &Path) -> Result<Vec<(u64, [f64; 4])>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (index, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if index == 0 && record.iter().eq(HEADER) {
            continue;
        }
        if record.len() != 4 {
            return Err(parse_error(path, line, format!("expected 4 fields, found {}", record.len())));
        }
        let mut row = [0.0f64; 4];
        for (slot, field) in row.iter_mut().zip(record.iter()) {
            *slot = field
                .parse()
                .map_err(|_| parse_error(path, line, format!("not a number: {field:?}")))?;
            if !slot.is_finite() {
                return Err(parse_error(path, line, format!("non-finite value {field:?}")));
            }
        }
        rows.push((line, row));
    }
    Ok(rows)
}

fn read_json_rows<R: Read>(mut reader: R, path: &Path) -> Result<Vec<(u64, [f64; 4])>> {
    let mut text = String::new();
    reader.read_to_string(&mut text).map_err(|e| BenchError::io(path, e))?;
    let rows: Vec<[f64; 4]> =
        serde_json::from_str(&text).map_err(|e| parse_error(path, e.line() as u64, e.to_string()))?;
    // JSON rows carry no line of their own; report the row's ordinal instead.
    Ok(rows.into_iter().enumerate().map(|(i, r)| (i as u64 + 1, r)).collect())
}

/// Writes `set` as normalized coordinates, or as pixels when `intrinsics`
/// is given. Floats use the shortest representation that round-trips.
pub fn write_correspondences<W: Write>(
    mut out: W,
    set: &CorrespondenceSet,
    format: OutputFormat,
    intrinsics: Option<&CameraIntrinsics>,
) -> std::io::Result<()> {
    let rows: Vec<[f64; 4]> = set
        .iter()
        .map(|c| match intrinsics {
            Some(intr) => {
                let (y, z) = (normalized_to_pixels(&c.y, intr), normalized_to_pixels(&c.z, intr));
                [y.x, y.y, z.x, z.y]
            }
            None => [c.y.x, c.y.y, c.z.x, c.z.y],
        })
        .collect();
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(HEADER)?;
            for row in &rows {
                w.write_record(row.iter().map(|v| v.to_string()))?;
            }
            w.flush()
        }
        OutputFormat::Json => {
            serde_json::to_writer(&mut out, &rows)?;
            writeln!(out)
        }
    }
}
