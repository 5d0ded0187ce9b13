//! CSV and JSON files written by the CLI.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use hmm_core::spectral::SpectralField;

use crate::report::fmt;

/// `n,t,mode_1..mode_K`, one row per recorded state.
pub fn write_trajectory_csv<'a>(path: &Path, rows: impl IntoIterator<Item = (u64, f64, &'a SpectralField)>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header_written = false;
    for (n, t, x) in rows {
        if !header_written {
            let mut header = vec!["n".to_owned(), "t".to_owned()];
            header.extend((1..=x.mode_count()).map(|k| format!("mode_{k}")));
            w.write_record(&header)?;
            header_written = true;
        }
        let mut record = vec![n.to_string(), fmt(t)];
        record.extend(x.coeffs().iter().map(|&c| fmt(c)));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// `xi,fbar_value,stderr_or_zero` at the collocation nodes.
pub fn write_fbar_csv(path: &Path, nodes: &[f64], values: &[f64], stderr: Option<&[f64]>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["xi", "fbar_value", "stderr_or_zero"])?;
    for (i, (xi, v)) in nodes.iter().zip(values).enumerate() {
        let se = stderr.map_or(0.0, |s| s[i]);
        w.write_record([fmt(*xi), fmt(*v), fmt(se)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), value)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let a = SpectralField::from_coeffs(vec![1.0, 0.5]);
        let b = SpectralField::from_coeffs(vec![0.25, -0.125]);
        write_trajectory_csv(&path, [(0, 0.0, &a), (1, 0.1, &b)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,t,mode_1,mode_2");
        assert_eq!(lines.len(), 3);
        let back: Vec<f64> = lines[2].split(',').skip(2).map(|v| v.parse().unwrap()).collect();
        assert_eq!(back, vec![0.25, -0.125]);
    }

    #[test]
    fn fbar_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        write_fbar_csv(&path, &[0.5], &[0.9], None).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("xi,fbar_value,stderr_or_zero\n"));
        assert!(text.lines().nth(1).unwrap().ends_with(",0e0"));
    }
}
