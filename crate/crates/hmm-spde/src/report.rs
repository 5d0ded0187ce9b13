//! Rate reports and their CSV/JSON artifacts.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::stats::{fit_loglog, fit_semilog, LineFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitScale {
    /// `ln(error)` against `ln(value)`.
    LogLog,
    /// `ln(error)` against `value`.
    SemiLog,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub series: String,
    pub value: f64,
    pub error: f64,
    pub mc_stderr: f64,
    pub n_samples: u64,
    pub used_in_fit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesFit {
    pub series: String,
    pub fit: Option<LineFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub experiment: String,
    pub sweep_variable: String,
    pub fit_scale: FitScale,
    pub rows: Vec<RateRow>,
    pub fits: Vec<SeriesFit>,
    pub runtime_seconds: f64,
    /// Experiment-specific scalars (reference rates, oracle checks).
    pub extra: BTreeMap<String, f64>,
}

impl RateReport {
    pub fn new(experiment: &str, sweep_variable: &str, fit_scale: FitScale) -> Self {
        Self {
            experiment: experiment.to_owned(),
            sweep_variable: sweep_variable.to_owned(),
            fit_scale,
            rows: Vec::new(),
            fits: Vec::new(),
            runtime_seconds: 0.0,
            extra: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, series: &str, value: f64, error: f64, mc_stderr: f64, n_samples: u64) {
        // Rows whose Monte-Carlo noise is not dominated by the signal are kept
        // in the artifact but left out of the fit.
        let used_in_fit = error > 0.0 && error.is_finite() && mc_stderr < error / 3.0;
        self.rows.push(RateRow { series: series.to_owned(), value, error, mc_stderr, n_samples, used_in_fit });
    }

    pub fn series_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for row in &self.rows {
            if !names.contains(&row.series) {
                names.push(row.series.clone());
            }
        }
        names
    }

    /// Recompute every series fit from the rows marked `used_in_fit`.
    pub fn refit(&mut self) {
        self.fits = self
            .series_names()
            .into_iter()
            .map(|series| {
                let (xs, ys): (Vec<f64>, Vec<f64>) = self
                    .rows
                    .iter()
                    .filter(|r| r.series == series && r.used_in_fit)
                    .map(|r| (r.value, r.error))
                    .unzip();
                let fit = match self.fit_scale {
                    FitScale::LogLog => fit_loglog(&xs, &ys),
                    FitScale::SemiLog => fit_semilog(&xs, &ys),
                };
                SeriesFit { series, fit }
            })
            .collect();
    }

    pub fn fit(&self, series: &str) -> Option<&LineFit> {
        self.fits.iter().find(|f| f.series == series).and_then(|f| f.fit.as_ref())
    }

    pub fn slope(&self, series: &str) -> Option<f64> {
        self.fit(series).map(|f| f.slope)
    }

    pub fn rows_of<'a>(&'a self, series: &'a str) -> impl Iterator<Item = &'a RateRow> + 'a {
        self.rows.iter().filter(move |r| r.series == series)
    }

    pub fn write_csv(&self, path: &Path) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["series", &self.sweep_variable, "error", "mc_stderr", "n_samples", "used_in_fit"])?;
        for r in &self.rows {
            w.write_record([
                r.series.clone(),
                fmt(r.value),
                fmt(r.error),
                fmt(r.mc_stderr),
                r.n_samples.to_string(),
                r.used_in_fit.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> anyhow::Result<()> {
        serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), self)?;
        Ok(())
    }

    /// Write `<experiment>.csv` and `<experiment>.json` under `dir`.
    pub fn write_artifacts(&self, dir: &Path) -> anyhow::Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{}.csv", self.experiment));
        let json_path = dir.join(format!("{}.json", self.experiment));
        self.write_csv(&csv_path)?;
        self.write_json(&json_path)?;
        Ok((csv_path, json_path))
    }
}

/// Shortest representation that round-trips.
pub(crate) fn fmt(v: f64) -> String {
    format!("{v:e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noisy_rows_are_excluded_from_fit() {
        let mut r = RateReport::new("t", "m", FitScale::LogLog);
        r.push("a", 1.0, 1.0, 0.01, 10);
        r.push("a", 4.0, 0.5, 0.01, 10);
        r.push("a", 16.0, 0.25, 0.01, 10);
        r.push("a", 64.0, 0.1, 0.2, 10);
        r.push("b", 1.0, 0.0, 0.0, 1);
        r.refit();
        assert_eq!(r.rows.iter().filter(|x| x.used_in_fit).count(), 3);
        assert!((r.slope("a").unwrap() + 0.5).abs() < 1e-12);
        assert!(r.slope("b").is_none());
        assert_eq!(r.series_names(), vec!["a", "b"]);
    }

    #[test]
    fn artifacts_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = RateReport::new("demo", "tau", FitScale::LogLog);
        r.push("trace", 0.01, 0.1, 0.0, 0);
        r.push("trace", 0.001, 0.03, 0.0, 0);
        r.refit();
        r.extra.insert("k".into(), 1.5);
        let (c, j) = r.write_artifacts(dir.path()).unwrap();
        let text = std::fs::read_to_string(c).unwrap();
        assert!(text.starts_with("series,tau,error,mc_stderr,n_samples,used_in_fit\n"));
        assert_eq!(text.lines().count(), 3);
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(j).unwrap()).unwrap();
        assert_eq!(json["experiment"], "demo");
        assert!(json["fits"][0]["fit"]["slope"].as_f64().is_some());
    }
}
