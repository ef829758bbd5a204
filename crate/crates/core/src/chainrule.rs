//! Integration by parts, the functional chain rule and the limit
//! representations of path derivatives, checked on gridded solutions.
//!
//! Time derivatives of solver paths are never obtained by differencing:
//! on `(t_i, t_{i+1}]` the solver enforced `x′ = g_i − A(t_{i+1}, x_{i+1})`,
//! and that is what the checks read.

use crate::error::{LabError, Result};
use crate::evolution::solve_ivp;
use crate::gelfand::{GelfandDiscretization, MonotoneOperator};
use crate::pathspace::{History, Path, TimeGrid};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Debug;
use std::sync::Arc;

/// Required observed order on a refinement ladder.
pub const MIN_ORDER: f64 = 0.9;
/// Residuals below this count as exact and need no order.
pub const EXACT_FLOOR: f64 = 1e-11;

/// A non-anticipating functional together with its declared path
/// derivatives; `∂_xφ` is returned in `H`-Riesz coordinates.
pub trait TestFunctional: Debug + Send + Sync {
    fn name(&self) -> &'static str;

    fn eval(&self, i: usize, x: &Path) -> f64;

    fn dt_phi(&self, i: usize, x: &Path) -> f64;

    fn dx_phi(&self, i: usize, x: &Path) -> Vec<f64>;
}

/// `φ(t, x) = |x(t)|² + ∫₀ᵗ ψ(s, x) ds` with `ψ(s, x) = a + b|x(s)|²`.
///
/// The integral is the left rectangle rule, so `∂_tφ = ψ` holds exactly
/// along stopped paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticPlusIntegral {
    pub a: f64,
    pub b: f64,
}

impl QuadraticPlusIntegral {
    pub fn psi(&self, i: usize, x: &Path) -> f64 {
        let n = x.norm_at(i);
        self.a + self.b * n * n
    }
}

impl TestFunctional for QuadraticPlusIntegral {
    fn name(&self) -> &'static str {
        "quadratic-plus-integral"
    }

    fn eval(&self, i: usize, x: &Path) -> f64 {
        let n = x.norm_at(i);
        n * n + self.a * x.grid().node(i) + self.b * x.integral_sq(i)
    }

    fn dt_phi(&self, i: usize, x: &Path) -> f64 {
        self.psi(i, x)
    }

    fn dx_phi(&self, i: usize, x: &Path) -> Vec<f64> {
        x.value(i).iter().map(|v| 2.0 * v).collect()
    }
}

/// `φ(t, x) = ψ(t, ξ(t), x(t))` with `ξ(t) = t + sin t` and
/// `ψ(t, ξ, x) = ξ cos t + ξ (w, x) + √(1 + |x|²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothComposite {
    pub w: Vec<f64>,
    pub h: f64,
}

impl SmoothComposite {
    /// `w = e_1` of the discrete sine basis.
    pub fn new(disc: &GelfandDiscretization) -> Self {
        SmoothComposite {
            w: disc.basis_vector(1),
            h: disc.h(),
        }
    }

    pub fn xi(t: f64) -> f64 {
        t + t.sin()
    }

    fn xi_dot(t: f64) -> f64 {
        1.0 + t.cos()
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.h * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }

    /// `L_ψ` on `[0, T]`: `ψ_x` is 1-Lipschitz and `|ψ_x| ≤ (1 + max|ξ|)(1 + |x|)`.
    pub fn lipschitz(&self, horizon: f64) -> f64 {
        1.0 + Self::xi(horizon).abs() * self.dot(&self.w, &self.w).sqrt()
    }
}

impl TestFunctional for SmoothComposite {
    fn name(&self) -> &'static str {
        "smooth-composite"
    }

    fn eval(&self, i: usize, x: &Path) -> f64 {
        let t = x.grid().node(i);
        let xi = Self::xi(t);
        let v = x.value(i);
        xi * t.cos() + xi * self.dot(&self.w, v) + (1.0 + self.dot(v, v)).sqrt()
    }

    fn dt_phi(&self, i: usize, x: &Path) -> f64 {
        let t = x.grid().node(i);
        let xi = Self::xi(t);
        let wx = self.dot(&self.w, x.value(i));
        -xi * t.sin() + (t.cos() + wx) * Self::xi_dot(t)
    }

    fn dx_phi(&self, i: usize, x: &Path) -> Vec<f64> {
        let t = x.grid().node(i);
        let xi = Self::xi(t);
        let v = x.value(i);
        let r = (1.0 + self.dot(v, v)).sqrt();
        self.w.iter().zip(v).map(|(w, x)| xi * w + x / r).collect()
    }
}

type FunctionalCtor = fn(&GelfandDiscretization) -> Arc<dyn TestFunctional>;

/// Name → test functional table.
#[derive(Clone)]
pub struct FunctionalRegistry {
    ctors: BTreeMap<String, FunctionalCtor>,
}

impl Debug for FunctionalRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.ctors.keys()).finish()
    }
}

impl FunctionalRegistry {
    pub fn empty() -> Self {
        FunctionalRegistry {
            ctors: BTreeMap::new(),
        }
    }

    /// `quadratic-plus-integral` (`ψ = |x(s)|²`) and `smooth-composite`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("quadratic-plus-integral", |_| {
            Arc::new(QuadraticPlusIntegral { a: 0.0, b: 1.0 })
        });
        r.register("smooth-composite", |d| Arc::new(SmoothComposite::new(d)));
        r
    }

    pub fn register(&mut self, name: &str, ctor: FunctionalCtor) {
        self.ctors.insert(name.to_string(), ctor);
    }

    pub fn names(&self) -> Vec<&str> {
        self.ctors.keys().map(String::as_str).collect()
    }

    pub fn build(&self, name: &str, disc: &GelfandDiscretization) -> Result<Arc<dyn TestFunctional>> {
        let ctor = self.ctors.get(name).ok_or_else(|| LabError::UnknownName {
            kind: "test functional",
            name: name.to_string(),
        })?;
        Ok(ctor(disc))
    }
}

/// `x′` on `(t_i, t_{i+1}]` as the solver enforced it.
pub fn derivative(
    disc: &GelfandDiscretization,
    op: &dyn MonotoneOperator,
    x: &Path,
    i: usize,
) -> Result<Vec<f64>> {
    let g = x.forcing(i).ok_or(LabError::MissingForcing)?;
    let ax = op.apply(disc, x.grid().node(i + 1), x.value(i + 1));
    Ok(g.iter().zip(&ax).map(|(g, a)| g - a).collect())
}

fn check_span(x: &Path, t: usize, s: usize) -> Result<()> {
    if t > s || s > x.grid().steps() {
        return Err(LabError::InvalidArgument(format!(
            "need t ≤ s ≤ {}, got t = {t}, s = {s}",
            x.grid().steps()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct PartsReport {
    pub t_index: usize,
    pub s_index: usize,
    /// `(x(s), y(s)) − (x(t), y(t))`.
    pub lhs: f64,
    /// `∫ₜˢ ⟨x′, y⟩ + ⟨y′, x⟩ dr`.
    pub rhs: f64,
    pub residual: f64,
}

/// Integration by parts on `[t, s]` (node indices), pairing each `x′` with
/// the implicit level `t_{i+1}`.
pub fn check_parts(
    disc: &GelfandDiscretization,
    op: &dyn MonotoneOperator,
    x: &Path,
    y: &Path,
    t: usize,
    s: usize,
) -> Result<PartsReport> {
    if x.grid() != y.grid() {
        return Err(LabError::GridMismatch);
    }
    check_span(x, t, s)?;
    let dt = x.grid().dt();
    let mut rhs = 0.0;
    for i in t..s {
        let xd = derivative(disc, op, x, i)?;
        let yd = derivative(disc, op, y, i)?;
        rhs += dt * (disc.inner(&xd, y.value(i + 1)) + disc.inner(&yd, x.value(i + 1)));
    }
    let lhs = disc.inner(x.value(s), y.value(s)) - disc.inner(x.value(t), y.value(t));
    Ok(PartsReport {
        t_index: t,
        s_index: s,
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainRuleReport {
    pub functional: String,
    pub t0_index: usize,
    pub t_index: usize,
    /// `φ(t, x) − φ(t₀, x)`.
    pub lhs: f64,
    /// `∫ ∂_tφ + ⟨x′, ∂_xφ⟩ ds`.
    pub rhs: f64,
    pub residual: f64,
}

/// Functional chain rule on `[t₀, t]`: `∂_tφ` is read at `t_i` and
/// `∂_xφ` at the implicit level `t_{i+1}`.
pub fn check_chain_rule(
    disc: &GelfandDiscretization,
    op: &dyn MonotoneOperator,
    phi: &dyn TestFunctional,
    x: &Path,
    t0: usize,
    t: usize,
) -> Result<ChainRuleReport> {
    check_span(x, t0, t)?;
    let dt = x.grid().dt();
    let mut rhs = 0.0;
    for i in t0..t {
        let xd = derivative(disc, op, x, i)?;
        rhs += dt * (phi.dt_phi(i, x) + disc.inner(&xd, &phi.dx_phi(i + 1, x)));
    }
    let lhs = phi.eval(t, x) - phi.eval(t0, x);
    Ok(ChainRuleReport {
        functional: phi.name().to_string(),
        t0_index: t0,
        t_index: t,
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

/// `x₀` kept up to node `t0` and continued as `x₀(t₀) + (t − t₀)e` after it.
pub fn ray_path(x0: &Path, t0: usize, e: &[f64]) -> Result<Path> {
    let grid = x0.grid();
    let base = x0.value(t0).to_vec();
    let values = (0..=grid.steps())
        .map(|j| {
            if j <= t0 {
                x0.value(j).to_vec()
            } else {
                let r = grid.node(j) - grid.node(t0);
                base.iter().zip(e).map(|(b, e)| b + r * e).collect()
            }
        })
        .collect();
    Path::from_values(grid, x0.weight(), values)
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitRow {
    /// Step `t − t₀` of the difference quotient.
    pub step: f64,
    pub dt_quotient: f64,
    pub dt_error: f64,
    /// Per direction `e_k`: the ray quotient minus `∂_tφ`.
    pub dx_quotients: Vec<f64>,
    pub dx_errors: Vec<f64>,
    pub max_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitReport {
    pub functional: String,
    pub t0_index: usize,
    pub declared_dt: f64,
    /// `(e_k, ∂_xφ(t₀, x₀))`, `k = 1, …`.
    pub declared_dx: Vec<f64>,
    pub rows: Vec<LimitRow>,
    pub ladder: Ladder,
    /// `max error / step` over the rows.
    pub kappa: f64,
    pub passed: bool,
}

/// Forward quotients along the stopped path and along rays in the first
/// `modes` sine directions, at steps `4Δt, 2Δt, Δt`.
pub fn check_derivative_limits(
    disc: &GelfandDiscretization,
    phi: &dyn TestFunctional,
    x0: &Path,
    t0: usize,
    modes: usize,
) -> Result<LimitReport> {
    let grid = x0.grid();
    if t0 + 4 > grid.steps() {
        return Err(LabError::InvalidArgument(format!(
            "need four steps after t0 = {t0}, grid has {}",
            grid.steps()
        )));
    }
    let stopped = x0.stop_at(t0);
    let declared_dt = phi.dt_phi(t0, &stopped);
    let dx = phi.dx_phi(t0, &stopped);
    let basis: Vec<Vec<f64>> = (1..=modes.min(disc.n())).map(|k| disc.basis_vector(k)).collect();
    let declared_dx: Vec<f64> = basis.iter().map(|e| disc.inner(e, &dx)).collect();
    let rays = basis
        .iter()
        .map(|e| ray_path(&stopped, t0, e))
        .collect::<Result<Vec<_>>>()?;
    let phi0 = phi.eval(t0, &stopped);
    let mut rows = Vec::new();
    for k in [4usize, 2, 1] {
        let step = k as f64 * grid.dt();
        let dt_quotient = (phi.eval(t0 + k, &stopped) - phi0) / step;
        let dt_error = (dt_quotient - declared_dt).abs();
        let dx_quotients: Vec<f64> = rays
            .iter()
            .map(|r| (phi.eval(t0 + k, r) - phi0) / step - dt_quotient)
            .collect();
        let dx_errors: Vec<f64> = dx_quotients
            .iter()
            .zip(&declared_dx)
            .map(|(q, d)| (q - d).abs())
            .collect();
        let max_error = dx_errors.iter().copied().fold(dt_error, f64::max);
        rows.push(LimitRow {
            step,
            dt_quotient,
            dt_error,
            dx_quotients,
            dx_errors,
            max_error,
        });
    }
    let ladder = Ladder::new(
        rows.iter().map(|r| r.step).collect(),
        rows.iter().map(|r| r.max_error).collect(),
    );
    let kappa = rows.iter().map(|r| r.max_error / r.step).fold(0.0, f64::max);
    Ok(LimitReport {
        functional: phi.name().to_string(),
        t0_index: t0,
        declared_dt,
        declared_dx,
        passed: ladder.passed,
        rows,
        ladder,
        kappa,
    })
}

/// Residuals on a halving ladder and the observed orders between rungs.
#[derive(Debug, Clone, Serialize)]
pub struct Ladder {
    pub steps: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `log₂(r_j / r_{j+1})`; `None` when both rungs are below the floor.
    pub orders: Vec<Option<f64>>,
    pub min_order: Option<f64>,
    pub passed: bool,
}

impl Ladder {
    pub fn new(steps: Vec<f64>, residuals: Vec<f64>) -> Self {
        let orders: Vec<Option<f64>> = residuals
            .windows(2)
            .zip(steps.windows(2))
            .map(|(r, s)| {
                (r[0].max(r[1]) > EXACT_FLOOR).then(|| (r[0] / r[1]).ln() / (s[0] / s[1]).ln())
            })
            .collect();
        let min_order = orders.iter().flatten().copied().reduce(f64::min);
        let passed = residuals.iter().all(|r| r.is_finite())
            && orders.iter().all(|o| o.is_none_or(|o| o >= MIN_ORDER));
        Ladder {
            steps,
            residuals,
            orders,
            min_order,
            passed,
        }
    }

    /// Evaluates `residual(dt)` on each step.
    pub fn run(steps: &[f64], residual: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        let r = steps.iter().map(|&dt| residual(dt)).collect::<Result<Vec<_>>>()?;
        Ok(Self::new(steps.to_vec(), r))
    }
}

/// Solution of `x′ + A(x) = g` from `x(0) = x0`, with `g` constant on each
/// of `pieces.len()` equal parts of `[0, T]`; the forcing does not depend
/// on `Δt`, so refinements of the same path can be compared.
pub fn forced_path(
    disc: &GelfandDiscretization,
    op: &dyn MonotoneOperator,
    grid: TimeGrid,
    x0: &[f64],
    pieces: &[Vec<f64>],
) -> Result<Path> {
    if pieces.is_empty() {
        return Err(LabError::InvalidArgument("no forcing pieces".into()));
    }
    for p in pieces {
        disc.check_dim(p)?;
    }
    let start = Path::constant(grid, disc.h(), x0.to_vec());
    let horizon = grid.horizon();
    let rhs = |hist: &History<'_>| {
        let j = ((hist.time() / horizon * pieces.len() as f64 + 1e-9).floor() as usize)
            .min(pieces.len() - 1);
        pieces[j].clone()
    };
    solve_ivp(disc, op, &start, 0, &rhs)
}
