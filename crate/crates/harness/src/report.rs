//! CSV and text output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

/// Writes `rows` with a header line. Callers sort rows first so output is
/// independent of scheduling.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// Median of a nonempty sample; the mean of the middle pair for even sizes.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Files written and remarks produced by one experiment run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub notes: Vec<String>,
    /// Set when a property the experiment checks did not hold.
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn render(&self) -> String {
        let mut s = String::new();
        for f in &self.files {
            s.push_str(&format!("wrote {}\n", f.display()));
        }
        for n in &self.notes {
            s.push_str(&format!("note: {n}\n"));
        }
        for f in &self.failures {
            s.push_str(&format!("FAILED: {f}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even_samples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }
}
