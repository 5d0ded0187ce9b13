//! Monte-Carlo summaries and rate fits.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation over `√n`; zero for fewer than two samples.
    pub stderr: f64,
    pub n: usize,
}

pub fn summarize(samples: &[f64]) -> Summary {
    let n = samples.len();
    if n == 0 {
        return Summary { mean: f64::NAN, stderr: f64::NAN, n };
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Summary { mean, stderr: 0.0, n };
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Summary { mean, stderr: (var / n as f64).sqrt(), n }
}

/// Batch-means standard error of the mean of a correlated series.
pub fn batch_means_stderr(series: &[f64], batches: usize) -> f64 {
    assert!(batches >= 2 && series.len() >= batches, "need at least two non-empty batches");
    let len = series.len() / batches;
    let means: Vec<f64> = series.chunks_exact(len).take(batches).map(|c| c.iter().sum::<f64>() / len as f64).collect();
    summarize(&means).stderr
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% Student-t interval for the slope; `None` with fewer than three points.
    pub ci95: Option<(f64, f64)>,
    pub points: usize,
}

/// Ordinary least squares `y = intercept + slope x`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ci95 = (n > 2).then(|| {
        let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        let se = (rss / (nf - 2.0) / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, nf - 2.0).expect("valid degrees of freedom").inverse_cdf(0.975);
        (slope - t * se, slope + t * se)
    });
    Some(LineFit { slope, intercept, ci95, points: n })
}

/// Fit `ln y = a + slope ln x`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_line(&lx, &ly)
}

/// Fit `ln y = a + slope x`.
pub fn fit_semilog(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_line(xs, &ly)
}

/// SplitMix64 finalizer; derives independent master seeds from a base seed
/// and sweep coordinates.
pub fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
