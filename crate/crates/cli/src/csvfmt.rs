//! CSV rendering and parsing with a fixed numeric format.
//!
//! All numeric output is rendered to nine significant digits in plain
//! decimal notation, which keeps files byte-stable across runs and lets
//! reports be recomputed from the emitted files exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::CliError;

/// Render `x` with nine significant digits.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (8 - exp).clamp(0, 30) as usize;
    format!("{:.*}", decimals, x)
}

/// Parse a string produced by [`sig9`] back into an `f64`.
pub fn parse_f64(s: &str) -> Result<f64, CliError> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| CliError::config(format!("bad numeric field {s:?}: {e}")))
}

/// Write a CSV file with the given header and pre-rendered rows.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = Vec::new();
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a CSV file into a header and per-row string fields.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::config(format!("{} is empty", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Ok((header, rows))
}

/// Extract a named numeric column from parsed CSV content.
pub fn column(
    header: &[String],
    rows: &[Vec<String>],
    name: &str,
) -> Result<Vec<f64>, CliError> {
    let idx = header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::config(format!("missing column {name:?}")))?;
    rows.iter()
        .map(|r| {
            r.get(idx)
                .ok_or_else(|| CliError::config(format!("short row in column {name:?}")))
                .and_then(|s| parse_f64(s))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_basic() {
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(-0.0), "0");
        assert_eq!(sig9(1.0), "1.00000000");
        assert_eq!(sig9(0.5), "0.500000000");
        assert_eq!(sig9(123.456789123), "123.456789");
        assert_eq!(sig9(-0.000012345678949), "-0.0000123456789");
    }

    #[test]
    fn sig9_roundtrips_within_precision() {
        for &x in &[std::f64::consts::PI, -0.4999999995, 1e-7, 123456.789] {
            let parsed = parse_f64(&sig9(x)).unwrap();
            assert!(
                ((parsed - x) / x).abs() < 1e-8,
                "{x} -> {} -> {parsed}",
                sig9(x)
            );
        }
    }

    #[test]
    fn sig9_is_stable_under_reparse() {
        for &x in &[0.1234567891234, 7.0, 1e9 + 0.5, -3.25e-3] {
            let once = sig9(x);
            let twice = sig9(parse_f64(&once).unwrap());
            assert_eq!(once, twice);
        }
    }
}
