//! File formats: CSV for arrays, JSON for scalars and reports.
//!
//! Every CSV carries a fixed header with unit suffixes. Numbers are written
//! in Rust's shortest round-trip form so re-runs are byte-identical.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::FieldProfile;
use crate::emfield::{DepthProfile, FieldMap};
use crate::error::FormatError;
use crate::spinphys::{OdmrSpectrum, RabiTrace};

pub const FIELD_MAP_HEADER: [&str; 6] = ["x_um", "y_um", "z_um", "Bx_G", "By_G", "Bz_G"];
pub const DEPTH_PROFILE_HEADER: [&str; 2] = ["z_um", "Bx_G"];
pub const ODMR_HEADER: [&str; 2] = ["freq_MHz", "contrast"];
pub const RABI_HEADER: [&str; 2] = ["t_us", "contrast"];
pub const PROFILE_HEADER: [&str; 2] = ["x_um", "value"];

fn display(path: &Path) -> String {
    path.display().to_string()
}

/// Writes equally long columns under `header`.
pub fn write_columns<W: Write>(
    out: W,
    header: &[&str],
    columns: &[&[f64]],
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    let rows = columns.first().map_or(0, |c| c.len());
    let mut record = Vec::with_capacity(columns.len());
    for i in 0..rows {
        record.clear();
        record.extend(columns.iter().map(|c| c[i].to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads numeric columns, checking the header exactly.
pub fn read_columns<R: Read>(
    input: R,
    header: &[&str],
    source: &str,
) -> Result<Vec<Vec<f64>>, FormatError> {
    let csv_err = |source_err| FormatError::Csv { path: source.to_string(), source: source_err };
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let found = r.headers().map_err(csv_err)?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(FormatError::Header {
            path: source.to_string(),
            expected: header.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut cols = vec![Vec::new(); header.len()];
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        for (col, field) in cols.iter_mut().zip(rec.iter()) {
            let v: f64 = field.parse().map_err(|_| FormatError::Content {
                path: source.to_string(),
                message: format!("row {}: `{field}` is not a number", row + 2),
            })?;
            col.push(v);
        }
    }
    Ok(cols)
}

fn create(path: &Path) -> Result<File, FormatError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|source| FormatError::Io { path: display(dir), source })?;
    }
    File::create(path).map_err(|source| FormatError::Io { path: display(path), source })
}

fn open(path: &Path) -> Result<File, FormatError> {
    File::open(path).map_err(|source| FormatError::Io { path: display(path), source })
}

/// Writes columns to a file, creating parent directories.
pub fn write_csv(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<(), FormatError> {
    write_columns(create(path)?, header, columns)
        .map_err(|source| FormatError::Csv { path: display(path), source })
}

fn read_file(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>, FormatError> {
    read_columns(open(path)?, header, &display(path))
}

fn content(path: &Path, message: impl std::fmt::Display) -> FormatError {
    FormatError::Content { path: display(path), message: message.to_string() }
}

pub fn write_field_map(path: &Path, map: &FieldMap) -> Result<(), FormatError> {
    let col = |f: fn(&crate::emfield::FieldSample) -> f64| map.samples.iter().map(f).collect::<Vec<_>>();
    let cols = [
        col(|s| s.x_um),
        col(|s| s.y_um),
        col(|s| s.z_um),
        col(|s| s.bx_g),
        col(|s| s.by_g),
        col(|s| s.bz_g),
    ];
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    write_csv(path, &FIELD_MAP_HEADER, &refs)
}

/// Summary written next to a depth-profile CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthSummary {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub slit_width_um: Option<f64>,
    pub argmax_depth_um: f64,
    #[serde(rename = "max_bx_G")]
    pub max_bx_g: f64,
    pub interior_max: bool,
    pub monotone_decreasing: bool,
}

impl DepthSummary {
    pub fn new(profile: &DepthProfile, slit_width_um: Option<f64>) -> Self {
        Self {
            slit_width_um,
            argmax_depth_um: profile.argmax_depth_um,
            max_bx_g: profile.max_bx_g,
            interior_max: profile.interior_max,
            monotone_decreasing: profile.is_strictly_decreasing(),
        }
    }
}

pub fn write_depth_profile(path: &Path, profile: &DepthProfile) -> Result<(), FormatError> {
    write_csv(path, &DEPTH_PROFILE_HEADER, &[&profile.z_values, &profile.bx_values])
}

pub fn write_odmr(path: &Path, s: &OdmrSpectrum) -> Result<(), FormatError> {
    write_csv(path, &ODMR_HEADER, &[&s.frequencies_mhz, &s.contrast])
}

pub fn read_odmr(path: &Path) -> Result<OdmrSpectrum, FormatError> {
    let mut c = read_file(path, &ODMR_HEADER)?;
    let y = c.pop().unwrap_or_default();
    let f = c.pop().unwrap_or_default();
    OdmrSpectrum::new(f, y).map_err(|e| content(path, e))
}

pub fn write_rabi(path: &Path, t: &RabiTrace) -> Result<(), FormatError> {
    write_csv(path, &RABI_HEADER, &[&t.durations_us, &t.contrast])
}

pub fn read_rabi(path: &Path) -> Result<RabiTrace, FormatError> {
    let mut c = read_file(path, &RABI_HEADER)?;
    let y = c.pop().unwrap_or_default();
    let t = c.pop().unwrap_or_default();
    RabiTrace::new(t, y).map_err(|e| content(path, e))
}

pub fn write_profile(path: &Path, p: &FieldProfile) -> Result<(), FormatError> {
    write_csv(path, &PROFILE_HEADER, &[&p.positions_um, &p.values])
}

pub fn read_profile(path: &Path) -> Result<FieldProfile, FormatError> {
    let mut c = read_file(path, &PROFILE_HEADER)?;
    let v = c.pop().unwrap_or_default();
    let x = c.pop().unwrap_or_default();
    FieldProfile::new(x, v).map_err(|e| content(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    create(path)?
        .write_all(to_json_string(value).as_bytes())
        .map_err(|source| FormatError::Io { path: display(path), source })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    serde_json::from_reader(std::io::BufReader::new(open(path)?))
        .map_err(|source| FormatError::Json { path: display(path), source })
}
