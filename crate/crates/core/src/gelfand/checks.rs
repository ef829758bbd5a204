use super::{GelfandDiscretization, MonotoneOperator, OperatorConstants};
use crate::error::Result;
use crate::evolution::{solve_ivp, ConstantForcing};
use crate::pathspace::{Path, TimeGrid};
use serde::Serialize;
use std::f64::consts::PI;

/// Tolerance on normalised slacks of sampled inequalities.
pub const SAMPLED_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub operator: String,
    pub samples: usize,
    /// Smallest `⟨A v − A w, v − w⟩` over the pairs.
    pub min_pairing: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Samples `⟨A(t,v) − A(t,w), v − w⟩` and records the minimum.
pub fn check_monotonicity(
    disc: &GelfandDiscretization,
    op: &dyn MonotoneOperator,
    t: f64,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<MonotonicityReport> {
    let mut min_pairing = f64::INFINITY;
    for (v, w) in pairs {
        let av = op.apply_checked(disc, t, v)?;
        let aw = op.apply_checked(disc, t, w)?;
        let da = super::sub(&av, &aw);
        let dx = super::sub(v, w);
        min_pairing = min_pairing.min(disc.pairing(&da, &dx));
    }
    if pairs.is_empty() {
        min_pairing = 0.0;
    }
    Ok(MonotonicityReport {
        operator: op.name().to_string(),
        samples: pairs.len(),
        min_pairing,
        tol: SAMPLED_TOL,
        passed: min_pairing >= -SAMPLED_TOL,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CoercivityReport {
    pub operator: String,
    pub declared: OperatorConstants,
    pub samples: usize,
    /// `min (⟨Av,v⟩ − c₂‖v‖^p) / (1 + c₂‖v‖^p)`.
    pub coercivity_slack: f64,
    /// `min (a₁ + c₁‖v‖^{p−1} − ‖Av‖_*) / (1 + a₁ + c₁‖v‖^{p−1})`.
    pub boundedness_slack: f64,
    /// `min ⟨Av,v⟩ / ‖v‖^p` over nonzero samples.
    pub measured_c2: f64,
    /// `max ‖Av‖_* / ‖v‖^{p−1}` over nonzero samples.
    pub measured_c1: f64,
    pub coercive: bool,
    pub bounded: bool,
}

impl CoercivityReport {
    pub fn passed(&self) -> bool {
        self.coercive && self.bounded
    }
}

/// Samples the coercivity and growth bounds for the declared constants.
/// A declared `c₂ = 0` never counts as coercive.
pub fn check_coercivity_boundedness(
    disc: &GelfandDiscretization,
    op: &dyn MonotoneOperator,
    t: f64,
    samples: &[Vec<f64>],
) -> Result<CoercivityReport> {
    let k = op.constants(disc);
    let mut coercivity_slack = f64::INFINITY;
    let mut boundedness_slack = f64::INFINITY;
    let mut measured_c2 = f64::INFINITY;
    let mut measured_c1: f64 = 0.0;
    for v in samples {
        let av = op.apply_checked(disc, t, v)?;
        let nv = disc.norm_v(v);
        let lhs = disc.pairing(&av, v);
        let rhs = k.c2 * nv.powf(k.p);
        coercivity_slack = coercivity_slack.min((lhs - rhs) / (1.0 + rhs));
        let dual = disc.norm_vstar(&av);
        let growth = k.a1 + k.c1 * nv.powf(k.p - 1.0);
        boundedness_slack = boundedness_slack.min((growth - dual) / (1.0 + growth));
        if nv > 0.0 {
            measured_c2 = measured_c2.min(lhs / nv.powf(k.p));
            measured_c1 = measured_c1.max(dual / nv.powf(k.p - 1.0));
        }
    }
    if samples.is_empty() {
        coercivity_slack = 0.0;
        boundedness_slack = 0.0;
    }
    if !measured_c2.is_finite() {
        measured_c2 = 0.0;
    }
    Ok(CoercivityReport {
        operator: op.name().to_string(),
        declared: k,
        samples: samples.len(),
        coercivity_slack,
        boundedness_slack,
        measured_c2,
        measured_c1,
        coercive: k.c2 > 0.0 && measured_c2 > 0.0 && coercivity_slack >= -SAMPLED_TOL,
        bounded: boundedness_slack >= -SAMPLED_TOL,
    })
}

/// One member of the non-compact family produced with `A = 0`.
#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleRow {
    pub k: usize,
    /// `|x_k(1)|`, identically one.
    pub h_norm_at_one: f64,
    /// `‖x_k(1)‖`, growing with `k`.
    pub v_norm_at_one: f64,
    /// `‖x_k‖_{L²(0,1;V)}`.
    pub l2v_norm: f64,
    /// `(x_k(1), y)` for the fixed test function `y(ξ) = ξ(2π − ξ)²`.
    pub test_inner: f64,
}

/// Solves `x′ = π^{−1/2} sin(kξ)` from zero on `(0, 2π)` with the zero
/// operator, giving `x_k(t) = t π^{−1/2} sin(kξ)`.
///
/// The `H` norms at `t = 1` stay at one while the pairings with a fixed
/// test function vanish, so no subsequence converges in `C([0,1];H)`.
pub fn zero_operator_counterexample(
    n: usize,
    dt: f64,
    modes: &[usize],
) -> Result<Vec<CounterexampleRow>> {
    let disc = GelfandDiscretization::assemble(2.0 * PI, n)?;
    let grid = TimeGrid::new(dt, 1.0)?;
    let op = super::ZeroOperator;
    let y: Vec<f64> = disc
        .nodes()
        .iter()
        .map(|xi| xi * (2.0 * PI - xi).powi(2))
        .collect();
    let start = Path::constant(grid, disc.h(), vec![0.0; n]);
    let mut rows = Vec::with_capacity(modes.len());
    for &k in modes {
        // sin(kξ) on (0, 2π) is the profile of index 2k
        let g: Vec<f64> = disc
            .sine_profile(2 * k)
            .into_iter()
            .map(|s| s / PI.sqrt())
            .collect();
        let path = solve_ivp(&disc, &op, &start, 0, &ConstantForcing(g))?;
        let last = path.value(grid.steps());
        let l2v: f64 = (1..=grid.steps())
            .map(|i| grid.dt() * disc.norm_v(path.value(i)).powi(2))
            .sum::<f64>()
            .sqrt();
        rows.push(CounterexampleRow {
            k,
            h_norm_at_one: disc.norm_h(last),
            v_norm_at_one: disc.norm_v(last),
            l2v_norm: l2v,
            test_inner: disc.inner(last, &y),
        });
    }
    Ok(rows)
}
