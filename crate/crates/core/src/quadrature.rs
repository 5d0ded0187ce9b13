//! Gauss–Hermite quadrature for expectations under a centered Gaussian.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math;

/// Nodes and weights for `∫ h(t) e^{-t²} dt ≈ Σ w_i h(t_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

pub const DEFAULT_ORDER: usize = 40;

impl GaussHermite {
    /// Roots of the physicists' Hermite polynomial `H_n` by Newton iteration
    /// on the orthonormal three-term recurrence, with the usual asymptotic
    /// starting guesses.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 || order > 400 {
            return Err(Error::InvalidParameter { name: "order", value: order as f64 });
        }
        let n = order;
        let pim4 = math::powf(PI, -0.25);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let mut z = 0.0f64;
        for i in 0..n.div_ceil(2) {
            z = match i {
                0 => {
                    let m = (2 * n + 1) as f64;
                    math::sqrt(m) - 1.85575 * math::powf(m, -0.16667)
                }
                1 => z - 1.14 * math::powf(n as f64, 0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut derivative = 0.0;
            for _ in 0..200 {
                let (mut p1, mut p2) = (pim4, 0.0);
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * math::sqrt(2.0 / (jf + 1.0)) * p2 - math::sqrt(jf / (jf + 1.0)) * p3;
                }
                derivative = math::sqrt(2.0 * n as f64) * p2;
                let prev = z;
                z = prev - p1 / derivative;
                if (z - prev).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            let w = 2.0 / (derivative * derivative);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E h(Z)` for `Z ~ N(0, variance)`, summed in a fixed order.
    pub fn expect_normal(&self, variance: f64, mut h: impl FnMut(f64) -> f64) -> f64 {
        let scale = math::sqrt(2.0 * variance.max(0.0));
        let sum: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * h(scale * t))
            .sum();
        sum / math::sqrt(PI)
    }
}
