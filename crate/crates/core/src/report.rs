//! Bit-stable text output: JSON and CSV with every float written with 17
//! significant digits, '.' as decimal separator and LF line endings.

use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::convergence::ScanReport;
use crate::error::{Result, SsfError};
use crate::ssf::SpectralShiftGrid;

/// 17 significant digits in scientific notation; `NaN`, `inf`, `-inf` otherwise.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Pretty JSON formatter writing floats through [`fmt_f64`].
struct StableFormatter {
    inner: PrettyFormatter<'static>,
}

impl Formatter for StableFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Pretty-printed JSON with stable float formatting and a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let fmt = StableFormatter {
        inner: PrettyFormatter::with_indent(b"  "),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value
        .serialize(&mut ser)
        .map_err(|e| SsfError::domain(format!("serialization failed: {e}")))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| SsfError::domain(e.to_string()))
}

/// CSV table from a header and rows of already formatted cells.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(|c| quote(&c)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn quote(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

pub const GRID_COLUMNS: [&str; 2] = ["lambda", "xi"];

/// `lambda,xi` table of a grid.
pub fn grid_csv(grid: &SpectralShiftGrid) -> String {
    csv(
        &GRID_COLUMNS,
        grid.lambdas.iter().zip(&grid.values).map(|(l, v)| vec![fmt_f64(*l), fmt_f64(*v)]),
    )
}

#[derive(Serialize)]
struct GridMetadata<'a> {
    method: &'a crate::ssf::XiMethod,
    geometry: &'a crate::geometry::Geometry,
    epsilon: Option<f64>,
    normalization_anchor: f64,
    points: usize,
    jumps: &'a [crate::ssf::Jump],
}

/// JSON sidecar for [`grid_csv`].
pub fn grid_metadata_json(grid: &SpectralShiftGrid) -> Result<String> {
    to_json(&GridMetadata {
        method: &grid.method,
        geometry: &grid.geometry,
        epsilon: grid.epsilon,
        normalization_anchor: grid.normalization_anchor,
        points: grid.lambdas.len(),
        jumps: &grid.jumps,
    })
}

pub const SCAN_COLUMNS: [&str; 5] = ["R", "quantity", "value", "reference", "error"];

/// Long-format scan table.
pub fn scan_csv(report: &ScanReport) -> String {
    csv(
        &SCAN_COLUMNS,
        report.rows().into_iter().map(|r| {
            vec![
                fmt_f64(r.r),
                r.quantity,
                fmt_f64(r.value),
                fmt_f64(r.reference),
                fmt_f64(r.error),
            ]
        }),
    )
}

/// Writes text, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| SsfError::io(dir, e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| SsfError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
        for v in [0.1, 1.0 / 3.0, 6.02214076e23, -1e-300, 5e-324] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let v = serde_json::json!({"a": [0.1, 2.5e-9, 3], "b": {"c": -1.0 / 7.0, "d": "x,y"}});
        let first = to_json(&v).unwrap();
        let back: serde_json::Value = serde_json::from_str(&first).unwrap();
        assert_eq!(to_json(&back).unwrap(), first);
        assert!(first.contains("1.0000000000000001e-1"));
    }

    #[test]
    fn csv_quotes_and_header_only() {
        assert_eq!(csv(&["a", "b"], Vec::<Vec<String>>::new()), "a,b\n");
        assert_eq!(csv(&["a"], vec![vec!["x,y".to_string()]]), "a\n\"x,y\"\n");
    }
}
