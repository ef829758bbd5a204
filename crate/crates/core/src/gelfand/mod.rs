//! Finite-dimensional surrogate of the triple `V ⊆ H ⊆ V*` on an interval
//! with homogeneous Dirichlet data.
//!
//! Vectors hold the values at the `n` interior nodes `ξ_i = (i + 1) h`.
//! The `H` inner product uses trapezoid weights `w_i = h`, the `V` norm is
//! the discrete `H¹₀` seminorm built from first differences, and `V*`
//! elements are represented by their `H`-Riesz coordinates, so the duality
//! pairing of an `H`-vector with a `V`-vector is the `H` inner product.

mod checks;
mod operator;
mod tridiag;

pub use checks::{
    check_coercivity_boundedness, check_monotonicity, zero_operator_counterexample,
    CoercivityReport, CounterexampleRow, MonotonicityReport,
};
pub use operator::{
    LinearLaplacian, MonotoneOperator, OperatorConstants, OperatorRegistry, OperatorSpec,
    PLaplacian, ZeroOperator,
};
pub use tridiag::{solve_tridiagonal, Tridiagonal};

use crate::error::{LabError, Result};
use std::f64::consts::PI;

/// Grid, quadrature and embedding constants of the discrete Gelfand triple.
#[derive(Debug, Clone, PartialEq)]
pub struct GelfandDiscretization {
    domain_length: f64,
    n: usize,
    h: f64,
    weights: Vec<f64>,
    lambda_min: f64,
    poincare: f64,
}

impl GelfandDiscretization {
    /// Builds the grid on `(0, domain_length)` with `n` interior nodes.
    pub fn assemble(domain_length: f64, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(LabError::InvalidArgument(format!(
                "need at least one interior node, got n = {n}"
            )));
        }
        if !(domain_length > 0.0) || !domain_length.is_finite() {
            return Err(LabError::InvalidArgument(format!(
                "domain length must be positive, got {domain_length}"
            )));
        }
        let h = domain_length / (n as f64 + 1.0);
        let mut disc = GelfandDiscretization {
            domain_length,
            n,
            h,
            weights: vec![h; n],
            lambda_min: 0.0,
            poincare: 0.0,
        };
        disc.lambda_min = disc.laplacian_eigenvalue(1);
        disc.poincare = 1.0 / disc.lambda_min.sqrt();
        Ok(disc)
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Mesh width.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Interior node coordinates.
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| (i as f64 + 1.0) * self.h).collect()
    }

    /// Smallest eigenvalue of the discrete Dirichlet Laplacian.
    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    /// Embedding constant `C₁` with `|v| ≤ C₁ ‖v‖`.
    pub fn poincare_constant(&self) -> f64 {
        self.poincare
    }

    /// Embedding constant `C₅` with `‖u‖_* ≤ C₅ |u|`.
    ///
    /// With trapezoid weights the Riesz map of `V` is the stiffness matrix,
    /// and both embedding constants reduce to `1/√λ_min`.
    pub fn dual_embedding_constant(&self) -> f64 {
        self.poincare
    }

    /// `k`-th eigenvalue `(4/h²) sin²(kπh/(2ℓ))` of the discrete Laplacian.
    pub fn laplacian_eigenvalue(&self, k: usize) -> f64 {
        let s = (k as f64 * PI * self.h / (2.0 * self.domain_length)).sin();
        4.0 * s * s / (self.h * self.h)
    }

    /// Samples `sin(kπξ/ℓ)` at the interior nodes.
    pub fn sine_profile(&self, k: usize) -> Vec<f64> {
        let omega = k as f64 * PI / self.domain_length;
        self.nodes().iter().map(|xi| (omega * xi).sin()).collect()
    }

    /// `H`-normalised sine mode `e_k` (exactly orthonormal for `1 ≤ k ≤ n`).
    pub fn basis_vector(&self, k: usize) -> Vec<f64> {
        let scale = (2.0 / self.domain_length).sqrt();
        self.sine_profile(k).into_iter().map(|v| v * scale).collect()
    }

    pub fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n {
            return Err(LabError::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// `H` inner product `Σ w_i x_i y_i`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .zip(&self.weights)
            .map(|((a, b), w)| w * a * b)
            .sum()
    }

    pub fn norm_h(&self, x: &[f64]) -> f64 {
        self.inner(x, x).sqrt()
    }

    /// First differences `(x_j − x_{j−1})/h`, `j = 0..=n`, with zero boundary values.
    pub fn differences(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut d = Vec::with_capacity(n + 1);
        let mut prev = 0.0;
        for j in 0..=n {
            let cur = if j < n { x[j] } else { 0.0 };
            d.push((cur - prev) / self.h);
            prev = cur;
        }
        d
    }

    /// Discrete `H¹₀` seminorm.
    pub fn norm_v(&self, x: &[f64]) -> f64 {
        let s: f64 = self.differences(x).iter().map(|d| d * d).sum();
        (self.h * s).sqrt()
    }

    /// Duality pairing of `V*`-coordinates `u` with a `V`-vector `v`.
    pub fn pairing(&self, u: &[f64], v: &[f64]) -> f64 {
        self.inner(u, v)
    }

    /// Norm dual to `‖·‖`, computed through the discrete Riesz map of `V`.
    pub fn norm_vstar(&self, u: &[f64]) -> f64 {
        // ‖u‖_*² = h³ uᵀ T⁻¹ u with T = tridiag(−1, 2, −1)
        let n = self.n;
        let t = Tridiagonal::second_difference(n);
        let y = t.solve(u);
        let q: f64 = u.iter().zip(&y).map(|(a, b)| a * b).sum();
        (self.h.powi(3) * q).max(0.0).sqrt()
    }

    /// Discrete Dirichlet Laplacian `(2v_i − v_{i−1} − v_{i+1})/h²`.
    pub fn apply_laplacian(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let inv_h2 = 1.0 / (self.h * self.h);
        (0..n)
            .map(|i| {
                let left = if i > 0 { v[i - 1] } else { 0.0 };
                let right = if i + 1 < n { v[i + 1] } else { 0.0 };
                (2.0 * v[i] - left - right) * inv_h2
            })
            .collect()
    }
}

/// Componentwise difference.
pub(crate) fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}
