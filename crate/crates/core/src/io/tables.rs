use std::io::{self, Read, Write};

use num_complex::Complex64;

use crate::pipeline::ThicknessRow;
use crate::sweep::{BranchCurves, SpectrumMap};

pub const SPECTRUM_HEADER: &str = "h_oe,omega,re_s21,im_s21";
pub const BRANCH_HEADER: &str = "h_oe,branch_index,re_eig,im_eig";
pub const THICKNESS_HEADER: &str = "t_um,g1,g2,gap_p1,gap_p2";

/// Malformed table input. `line` is 1-based.
#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Line { line: u64, message: String },
    #[error("{0}")]
    Grid(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Seventeen significant digits, enough for an exact round trip.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per grid point, ordered by field then frequency.
pub fn write_spectrum_csv<W: Write>(mut w: W, map: &SpectrumMap) -> io::Result<()> {
    writeln!(w, "{SPECTRUM_HEADER}")?;
    for (i, &h) in map.fields().iter().enumerate() {
        for (&f, z) in map.freqs().iter().zip(map.column(i)) {
            writeln!(w, "{},{},{},{}", num(h), num(f), num(z.re), num(z.im))?;
        }
    }
    w.flush()
}

pub fn write_branch_csv<W: Write>(mut w: W, curves: &BranchCurves) -> io::Result<()> {
    writeln!(w, "{BRANCH_HEADER}")?;
    for (&h, branches) in curves.fields.iter().zip(&curves.branches) {
        for (k, z) in branches.iter().enumerate() {
            writeln!(w, "{},{k},{},{}", num(h), num(z.re), num(z.im))?;
        }
    }
    w.flush()
}

pub fn write_thickness_csv<W: Write>(mut w: W, rows: &[ThicknessRow]) -> io::Result<()> {
    writeln!(w, "{THICKNESS_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            num(r.t),
            num(r.g1),
            num(r.g2),
            num(r.gap_p1),
            num(r.gap_p2)
        )?;
    }
    w.flush()
}

struct Row {
    line: u64,
    h: f64,
    w: f64,
    z: Complex64,
}

/// Parses a spectrum table into a complete grid. Rows must be sorted by
/// field then frequency, and every field must carry the same frequencies.
pub fn read_spectrum_csv<R: Read>(r: R) -> Result<SpectrumMap, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(r);
    let mut rows = Vec::new();
    let mut header_seen = false;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            match e.into_kind() {
                csv::ErrorKind::Io(io) => DataError::Io(io),
                other => DataError::Line {
                    line,
                    message: format!("{other:?}"),
                },
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if !header_seen {
            let got: Vec<&str> = record.iter().collect();
            if got.join(",") != SPECTRUM_HEADER {
                return Err(DataError::Line {
                    line,
                    message: format!(
                        "expected header `{SPECTRUM_HEADER}`, found `{}`",
                        got.join(",")
                    ),
                });
            }
            header_seen = true;
            continue;
        }
        if record.len() != 4 {
            return Err(DataError::Line {
                line,
                message: format!("expected 4 columns, found {}", record.len()),
            });
        }
        let mut v = [0.0; 4];
        for (k, (slot, field)) in v.iter_mut().zip(record.iter()).enumerate() {
            *slot = field
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| DataError::Line {
                    line,
                    message: format!(
                        "column {} (`{}`): `{field}` is not a finite number",
                        k + 1,
                        SPECTRUM_HEADER.split(',').nth(k).unwrap_or_default()
                    ),
                })?;
        }
        rows.push(Row {
            line,
            h: v[0],
            w: v[1],
            z: Complex64::new(v[2], v[3]),
        });
    }
    if !header_seen {
        return Err(DataError::Line {
            line: 1,
            message: format!("empty file, expected header `{SPECTRUM_HEADER}`"),
        });
    }
    if rows.is_empty() {
        return Err(DataError::Grid("no data rows".into()));
    }

    for pair in rows.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if b.h < a.h || (b.h == a.h && b.w <= a.w) {
            let what = if b.h == a.h && b.w == a.w {
                "duplicate row"
            } else {
                "row out of (h_oe, omega) order"
            };
            return Err(DataError::Line {
                line: b.line,
                message: format!("{what}: ({}, {}) after ({}, {})", b.h, b.w, a.h, a.w),
            });
        }
    }

    let mut freqs: Vec<f64> = rows.iter().map(|r| r.w).collect();
    freqs.sort_by(f64::total_cmp);
    freqs.dedup();
    let mut fields = Vec::new();
    let mut values = Vec::with_capacity(rows.len());
    let mut start = 0;
    while start < rows.len() {
        let h = rows[start].h;
        let end = start + rows[start..].iter().take_while(|r| r.h == h).count();
        let block = &rows[start..end];
        if block.len() != freqs.len() {
            // Every frequency appears somewhere, so the first absent one is the gap.
            let missing = freqs
                .iter()
                .find(|&&w| !block.iter().any(|r| r.w == w))
                .copied()
                .unwrap_or(f64::NAN);
            return Err(DataError::Grid(format!(
                "incomplete grid: no row for h_oe = {h}, omega = {missing} (field block at lines {}-{})",
                block[0].line,
                block[block.len() - 1].line
            )));
        }
        fields.push(h);
        values.extend(block.iter().map(|r| r.z));
        start = end;
    }
    SpectrumMap::new(fields, freqs, values).map_err(|e| DataError::Grid(e.to_string()))
}
