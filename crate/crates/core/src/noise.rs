//! Counter-based cylindrical Wiener increments.
//!
//! Every increment is a pure function of its [`NoiseStreamKey`]: the
//! `(master seed, stream, replica)` triple selects a ChaCha8 key and the
//! global step index selects the ChaCha stream, so no generator state is
//! shared between replicas or carried between steps. Following the
//! concatenation convention for the microsolver, the increment that drives
//! `Y_{n,m} -> Y_{n,m+1}` of replica `j` is element `n·m_0 + m` of a single
//! per-replica sequence.
//!
//! Gaussians are produced by Box–Muller from two 53-bit uniforms per pair of
//! modes, so the number of words consumed per increment is fixed and the
//! output is bit-reproducible.

use alloc::vec;
use core::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{ensure_positive, Error, Result};
use crate::math;
use crate::spectral::SpectralField;

const TWO_POW_NEG_53: f64 = 1.0 / (1u64 << 53) as f64;

/// Independent families of noise derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stream {
    /// Microsolver increments of the HMM.
    Micro,
    /// Fast-equation increments of the direct coupled solver.
    Direct,
    /// Random initial data (e.g. stationary draws).
    Initial,
    /// Uniform samples for coefficient validation.
    Validation,
}

impl Stream {
    fn tag(self) -> u32 {
        match self {
            Stream::Micro => 0,
            Stream::Direct => 1,
            Stream::Initial => 2,
            Stream::Validation => 3,
        }
    }
}

/// Position of one increment in the global noise layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoiseStreamKey {
    pub master_seed: u64,
    pub stream: Stream,
    /// Replica index `j ≥ 1`.
    pub replica: u32,
    pub macro_step: u64,
    pub micro_step: u64,
    /// `macro_step · m_0 + micro_step`.
    pub global_index: u64,
}

impl NoiseStreamKey {
    /// Key for a plain sequential stream (no macro structure), e.g. the
    /// direct solver or a long single-replica run.
    pub fn sequential(master_seed: u64, stream: Stream, replica: u32, index: u64) -> Self {
        Self {
            master_seed,
            stream,
            replica,
            macro_step: 0,
            micro_step: index,
            global_index: index,
        }
    }

    /// The key `offset` steps further along the same stream.
    pub fn advanced(&self, offset: u64) -> Self {
        Self {
            micro_step: self.micro_step + offset,
            global_index: self.global_index + offset,
            ..*self
        }
    }

    fn rng(&self) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        seed[8..12].copy_from_slice(&self.replica.to_le_bytes());
        seed[12..16].copy_from_slice(&self.stream.tag().to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.global_index);
        rng.set_word_pos(0);
        rng
    }
}

/// Key of the increment driving microstep `m -> m + 1` of replica `j` during
/// macro step `n`, when each macro step consumes `m0` microsteps.
pub fn derive_key(master_seed: u64, m0: u64, n: u64, m: u64, j: u32) -> Result<NoiseStreamKey> {
    if j == 0 || m0 == 0 || m >= m0 {
        return Err(Error::KeyOutOfRange);
    }
    let global = n
        .checked_mul(m0)
        .and_then(|v| v.checked_add(m))
        .filter(|&v| v < 1u64 << 63)
        .ok_or(Error::KeyOutOfRange)?;
    Ok(NoiseStreamKey {
        master_seed,
        stream: Stream::Micro,
        replica: j,
        macro_step: n,
        micro_step: m,
        global_index: global,
    })
}

/// Fill `out` with i.i.d. standard normals determined by `key`.
pub fn fill_standard_normals(key: &NoiseStreamKey, out: &mut [f64]) {
    let mut rng = key.rng();
    let mut chunks = out.chunks_exact_mut(2);
    for pair in &mut chunks {
        let (z0, z1) = box_muller(&mut rng);
        pair[0] = z0;
        pair[1] = z1;
    }
    if let [last] = chunks.into_remainder() {
        *last = box_muller(&mut rng).0;
    }
}

/// Fill `out` with i.i.d. uniforms on `[0, 1)` determined by `key`.
pub fn fill_uniforms(key: &NoiseStreamKey, out: &mut [f64]) {
    let mut rng = key.rng();
    for o in out.iter_mut() {
        *o = (rng.next_u64() >> 11) as f64 * TWO_POW_NEG_53;
    }
}

fn box_muller(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u1 = ((rng.next_u64() >> 11) as f64 + 1.0) * TWO_POW_NEG_53;
    let u2 = (rng.next_u64() >> 11) as f64 * TWO_POW_NEG_53;
    let r = math::sqrt(-2.0 * math::ln(u1));
    let theta = 2.0 * PI * u2;
    (r * math::cos(theta), r * math::sin(theta))
}

/// Wiener increment over a step of length `dt`: each mode is `N(0, dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIncrement {
    pub field: SpectralField,
    pub dt: f64,
}

impl NoiseIncrement {
    pub fn zero(modes: usize, dt: f64) -> Self {
        Self { field: SpectralField::zeros(modes), dt }
    }
}

pub fn draw_increment(key: &NoiseStreamKey, dt: f64, modes: usize) -> Result<NoiseIncrement> {
    ensure_positive("dt", dt)?;
    if modes == 0 {
        return Err(Error::EmptySpectrum);
    }
    let mut coeffs = vec![0.0; modes];
    fill_standard_normals(key, &mut coeffs);
    let scale = math::sqrt(dt);
    coeffs.iter_mut().for_each(|c| *c *= scale);
    Ok(NoiseIncrement { field: SpectralField::from_coeffs(coeffs), dt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;
    use std::vec::Vec;

    #[test]
    fn same_key_is_bit_identical() {
        let key = derive_key(42, 10, 3, 7, 2).unwrap();
        let a = draw_increment(&key, 0.01, 63).unwrap();
        let b = draw_increment(&key, 0.01, 63).unwrap();
        assert_eq!(a, b);
        let bits_a: Vec<u64> = a.field.coeffs().iter().map(|v| v.to_bits()).collect();
        let bits_b: Vec<u64> = b.field.coeffs().iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits_a, bits_b);
    }

    #[test]
    fn rejects_bad_inputs() {
        let key = NoiseStreamKey::sequential(1, Stream::Direct, 1, 0);
        assert!(draw_increment(&key, 0.0, 4).is_err());
        assert!(draw_increment(&key, -1.0, 4).is_err());
        assert!(derive_key(1, 5, 0, 0, 0).is_err());
        assert!(derive_key(1, 5, 0, 5, 1).is_err());
        assert!(derive_key(1, 1 << 62, 4, 0, 1).is_err());
    }

    #[test]
    fn concatenation_layout() {
        let m0 = 17;
        let k = derive_key(9, m0, 1, 0, 3).unwrap();
        assert_eq!(k.global_index, m0);
        assert_ne!(derive_key(9, m0, 0, 0, 1).unwrap(), derive_key(9, m0, 0, 0, 2).unwrap());
        // The last microstep of macro step n is immediately followed by the
        // first one of macro step n + 1.
        let last = derive_key(9, m0, 2, m0 - 1, 1).unwrap();
        let next = derive_key(9, m0, 3, 0, 1).unwrap();
        assert_eq!(last.global_index + 1, next.global_index);
        let mut seen = HashSet::new();
        for n in 0..6 {
            for m in 0..m0 {
                assert!(seen.insert(derive_key(9, m0, n, m, 1).unwrap().global_index));
            }
        }
    }

    #[test]
    fn mode_variance_matches_dt() {
        let draws = 100_000u64;
        let dt = 0.01;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for i in 0..draws {
            let key = NoiseStreamKey::sequential(7, Stream::Micro, 1, i);
            let inc = draw_increment(&key, dt, 3).unwrap();
            let v = inc.field.mode(1);
            sum += v;
            sum_sq += v * v;
        }
        let n = draws as f64;
        let mean = sum / n;
        let var = sum_sq / n - mean * mean;
        assert!((0.0094..=0.0106).contains(&var), "variance {var}");
    }

    #[test]
    fn replicas_are_uncorrelated() {
        let draws = 100_000u64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for i in 0..draws {
            let a = draw_increment(&NoiseStreamKey::sequential(5, Stream::Micro, 1, i), 1.0, 1).unwrap();
            let b = draw_increment(&NoiseStreamKey::sequential(5, Stream::Micro, 2, i), 1.0, 1).unwrap();
            let (x, y) = (a.field.mode(1), b.field.mode(1));
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        let corr = sxy / (sxx * syy).sqrt();
        assert!(corr.abs() < 4.0 / (draws as f64).sqrt(), "corr {corr}");
    }

    #[test]
    fn streams_and_indices_differ() {
        let base = NoiseStreamKey::sequential(5, Stream::Micro, 1, 0);
        let mut buf_a = [0.0; 8];
        let mut buf_b = [0.0; 8];
        fill_standard_normals(&base, &mut buf_a);
        fill_standard_normals(&NoiseStreamKey { stream: Stream::Direct, ..base }, &mut buf_b);
        assert_ne!(buf_a, buf_b);
        fill_standard_normals(&base.advanced(1), &mut buf_b);
        assert_ne!(buf_a, buf_b);
        fill_standard_normals(&NoiseStreamKey { master_seed: 6, ..base }, &mut buf_b);
        assert_ne!(buf_a, buf_b);
    }

    #[test]
    fn odd_mode_count_uses_prefix_of_even() {
        let key = NoiseStreamKey::sequential(3, Stream::Micro, 1, 11);
        let mut odd = [0.0; 5];
        let mut even = [0.0; 6];
        fill_standard_normals(&key, &mut odd);
        fill_standard_normals(&key, &mut even);
        assert_eq!(odd[..], even[..5]);
    }

    #[test]
    fn uniforms_in_unit_interval() {
        let mut buf = [0.0; 1000];
        fill_uniforms(&NoiseStreamKey::sequential(1, Stream::Validation, 1, 0), &mut buf);
        assert!(buf.iter().all(|u| (0.0..1.0).contains(u)));
        let mean = buf.iter().sum::<f64>() / 1000.0;
        assert!((mean - 0.5).abs() < 0.05);
    }
}
