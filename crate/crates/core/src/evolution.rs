//! Implicit Euler for `x′ + A(t, x) = g(t, history)` with lagged
//! path-dependent right-hand sides, plus the a-priori and continuous
//! dependence bounds.

use crate::control::ControlProblem;
use crate::error::{LabError, Result};
use crate::gelfand::{GelfandDiscretization, MonotoneOperator};
use crate::pathspace::{sup_gap_upto, History, Path};
use serde::Serialize;

/// Residual tolerance factor of one implicit step.
pub const STEP_TOL: f64 = 1e-10;
/// Newton iteration cap per step.
pub const MAX_ITER: usize = 200;

/// Right-hand side on `(t_i, t_{i+1}]`, read from the history up to `t_i`.
pub trait Forcing: Sync {
    fn eval(&self, hist: &History<'_>) -> Vec<f64>;
}

impl<F> Forcing for F
where
    F: Fn(&History<'_>) -> Vec<f64> + Sync,
{
    fn eval(&self, hist: &History<'_>) -> Vec<f64> {
        self(hist)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroForcing;

impl Forcing for ZeroForcing {
    fn eval(&self, hist: &History<'_>) -> Vec<f64> {
        vec![0.0; hist.current().len()]
    }
}

/// Time-independent forcing.
#[derive(Debug, Clone)]
pub struct ConstantForcing(pub Vec<f64>);

impl Forcing for ConstantForcing {
    fn eval(&self, _hist: &History<'_>) -> Vec<f64> {
        self.0.clone()
    }
}

/// Right-hand side kinds usable without a control problem.
#[derive(Debug, Clone)]
pub enum RhsSpec {
    /// Interval-indexed forcing `g_i`.
    StoredForcing(Vec<Vec<f64>>),
    /// `gain·x((t − τ) ∨ 0)` or, when `distributed`, `gain·∫₀ᵗ x(s) ds`.
    DelayMap {
        gain: f64,
        tau: Option<f64>,
        distributed: bool,
    },
}

impl Forcing for RhsSpec {
    fn eval(&self, hist: &History<'_>) -> Vec<f64> {
        match self {
            RhsSpec::StoredForcing(g) => g[hist.index()].clone(),
            RhsSpec::DelayMap {
                gain,
                tau,
                distributed,
            } => {
                let n = hist.current().len();
                let mut out = vec![0.0; n];
                if let Some(tau) = tau {
                    for (o, v) in out.iter_mut().zip(hist.delayed(*tau)) {
                        *o += gain * v;
                    }
                }
                if *distributed {
                    for (o, v) in out.iter_mut().zip(hist.integral()) {
                        *o += gain * v;
                    }
                }
                out
            }
        }
    }
}

fn residual(
    disc: &GelfandDiscretization,
    op: &dyn MonotoneOperator,
    t: f64,
    x: &[f64],
    x_prev: &[f64],
    g: &[f64],
    dt: f64,
) -> Vec<f64> {
    let ax = op.apply(disc, t, x);
    x.iter()
        .zip(x_prev)
        .zip(ax.iter().zip(g))
        .map(|((xn, xp), (a, gi))| (xn - xp) / dt + a - gi)
        .collect()
}

/// One implicit step `(x − x_prev)/dt + A(t_new, x) = g`.
///
/// Newton on the tridiagonal Jacobian with step halving whenever the
/// residual would grow; linear operators finish in one iteration.
pub fn step(
    disc: &GelfandDiscretization,
    op: &dyn MonotoneOperator,
    t_new: f64,
    x_prev: &[f64],
    g: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    disc.check_dim(x_prev)?;
    disc.check_dim(g)?;
    if !(dt > 0.0) {
        return Err(LabError::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let tol = STEP_TOL * (1.0 + disc.norm_h(g));
    let mut x = x_prev.to_vec();
    let mut r = residual(disc, op, t_new, &x, x_prev, g, dt);
    let mut rn = disc.norm_h(&r);
    for _ in 0..MAX_ITER {
        if rn <= tol {
            return Ok(x);
        }
        let jac = op.jacobian(disc, t_new, &x).scaled_shift(1.0, 1.0 / dt);
        let delta = jac.solve(&r);
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a - lambda * d).collect();
            let rt = residual(disc, op, t_new, &trial, x_prev, g, dt);
            let rtn = disc.norm_h(&rt);
            if rtn < rn || lambda < 1e-12 {
                x = trial;
                r = rt;
                rn = rtn;
                break;
            }
            lambda *= 0.5;
        }
    }
    if rn <= tol {
        return Ok(x);
    }
    Err(LabError::Nonconvergence {
        time: t_new,
        residual: rn,
    })
}

/// Advances `path` from node `i` to `i + 1` with forcing `g`, recording `g`.
pub fn advance(
    disc: &GelfandDiscretization,
    op: &dyn MonotoneOperator,
    path: &mut Path,
    i: usize,
    g: &[f64],
) -> Result<()> {
    let grid = path.grid();
    let next = step(disc, op, grid.node(i + 1), path.value(i), g, grid.dt())?;
    path.set_forcing(i, g);
    path.set_node(i + 1, &next);
    Ok(())
}

/// Solves from node `t0_index` on; the result equals `x0_prefix` on `[0, t₀]`.
pub fn solve_ivp(
    disc: &GelfandDiscretization,
    op: &dyn MonotoneOperator,
    x0_prefix: &Path,
    t0_index: usize,
    rhs: &dyn Forcing,
) -> Result<Path> {
    disc.check_dim(x0_prefix.value(0))?;
    let mut path = x0_prefix.clone();
    path.set_birth(t0_index);
    path.mark_forcing_from(x0_prefix.forcing_from().min(t0_index));
    for i in t0_index..path.grid().steps() {
        let g = rhs.eval(&path.history(i));
        advance(disc, op, &mut path, i, &g)?;
    }
    Ok(path)
}

/// Closed-form constants of the a-priori estimate for `X^L(t₀, x₀)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AprioriConstants {
    /// Young parameter with `c₂ = ε^p C₁^p / p`.
    pub eps: f64,
    /// Gronwall exponent `4L^q(T − t₀)/(q ε^q)`.
    pub kappa: f64,
    /// `sup_{s≤t₀}|x₀(s)|`.
    pub m0: f64,
    /// Sup-norm bound.
    pub c2: f64,
    /// `L^p(V)` bound.
    pub c3: f64,
    /// `L^q(V*)` bound on `A x`.
    pub c4: f64,
    /// Embedding constant of `H` into `V*`.
    pub c5: f64,
    /// `L^q(V*)` bound on `x′`.
    pub c6: f64,
    /// `L²(H)` bound on the forcing.
    pub c7: f64,
    /// `max{C₂, C₃, C₄, C₆, C₇}`.
    pub c: f64,
    /// `C₂ + C₃ + C₄ + C₆ + C₇`.
    pub c_sum: f64,
}

pub fn apriori_constants(
    disc: &GelfandDiscretization,
    op: &dyn MonotoneOperator,
    t0: f64,
    x0_prefix: &Path,
    l: f64,
    horizon: f64,
) -> Result<AprioriConstants> {
    let k = op.constants(disc);
    if !(k.c2 > 0.0) {
        return Err(LabError::InvalidArgument(format!(
            "a-priori bounds need a coercive operator, '{}' declares c2 = {}",
            op.name(),
            k.c2
        )));
    }
    let i0 = x0_prefix.grid().index_of(t0)?;
    let span = (horizon - t0).max(0.0);
    let (p, q) = (k.p, k.q);
    let c1_embed = disc.poincare_constant();
    let eps = (p * k.c2).powf(1.0 / p) / c1_embed;
    let kappa = 4.0 * l.powf(q) * span / (q * eps.powf(q));
    let m0 = x0_prefix.running_sup(i0);
    let c2 = ((m0 * m0 + kappa) * kappa.exp()).sqrt();
    let c3 = ((span * l * (1.0 + c2) * c2 + 0.5 * c2 * c2) / k.c2).powf(1.0 / p);
    let c4 = (2f64.powf(q - 1.0) * (k.a1.powf(q) * span + k.c1.powf(q) * c3.powf(p))).powf(1.0 / q);
    let c5 = disc.dual_embedding_constant();
    let c6 = c4 + c5 * span.powf(1.0 / q) * l * (1.0 + c2);
    let c7 = span.sqrt() * l * (1.0 + c2);
    let c = [c2, c3, c4, c6, c7].into_iter().fold(0.0, f64::max);
    Ok(AprioriConstants {
        eps,
        kappa,
        m0,
        c2,
        c3,
        c4,
        c5,
        c6,
        c7,
        c,
        c_sum: c2 + c3 + c4 + c6 + c7,
    })
}

/// `κ(Δt + h²)`.
pub fn tol_disc(kappa: f64, dt: f64, h: f64) -> f64 {
    kappa * (dt + h * h)
}

#[derive(Debug, Clone, Serialize)]
pub struct DependenceRow {
    pub t: f64,
    pub gap: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuousDependenceReport {
    pub initial_gap: f64,
    /// `max_t (gap − bound)`.
    pub max_excess: f64,
    /// `bound − gap` at `T`.
    pub final_slack: f64,
    pub tol: f64,
    pub passed: bool,
    pub rows: Vec<DependenceRow>,
}

/// Checks `|x(t) − y(t)| ≤ e^{L_f(t−t₀)} sup_{s≤t₀}|x₀ − y₀| + tol` for the
/// controlled solutions started from `x0` and `y0` with the same controls.
pub fn verify_continuous_dependence(
    problem: &ControlProblem,
    t0_index: usize,
    x0: &Path,
    y0: &Path,
    controls: &[(usize, usize)],
    tol: f64,
) -> Result<ContinuousDependenceReport> {
    let x = problem.rollout(t0_index, x0, controls)?;
    let y = problem.rollout(t0_index, y0, controls)?;
    let grid = problem.grid();
    let initial_gap = sup_gap_upto(x0, y0, t0_index);
    let mut rows = Vec::new();
    let mut max_excess = f64::NEG_INFINITY;
    for i in t0_index..=grid.steps() {
        let gap = x.norm_of(&crate::gelfand::sub(x.value(i), y.value(i)));
        let bound = (problem.lf * (grid.node(i) - grid.node(t0_index))).exp() * initial_gap;
        max_excess = max_excess.max(gap - bound);
        rows.push(DependenceRow {
            t: grid.node(i),
            gap,
            bound,
        });
    }
    let last = rows.last().expect("at least one node");
    Ok(ContinuousDependenceReport {
        initial_gap,
        max_excess,
        final_slack: last.bound - last.gap,
        tol,
        passed: max_excess <= tol,
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TimeShiftReport {
    pub t0: f64,
    pub t1: f64,
    pub gap: f64,
    pub bound: f64,
    pub constant_c: f64,
    /// `gap / (bound − tol)` when the bound is positive.
    pub ratio: f64,
    pub tol: f64,
    pub passed: bool,
}

/// `4 max{L, L_f}(1 + C) e^{L_f T}`, with `C` from the a-priori constants of
/// `X^{max{L,L_f}}(0, x*)`.
pub fn time_shift_constant(problem: &ControlProblem, l: f64) -> Result<(f64, f64)> {
    let big_l = l.max(problem.lf);
    let star = problem.initial_path();
    let c = apriori_constants(
        &problem.disc,
        problem.op.as_ref(),
        0.0,
        &star,
        big_l,
        problem.grid().horizon(),
    )?
    .c;
    let k = 4.0 * big_l * (1.0 + c) * (problem.lf * problem.grid().horizon()).exp();
    Ok((k, c))
}

/// Checks `‖x^{t₀,x₀,a} − x^{t₁,x₀,a}‖_∞ ≤ 4max{L,L_f}(1+C)e^{L_fT}|t₁ − t₀| + tol`.
/// `x0` must be a member of `X^L(0, x*)` carrying its forcing; `schedule`
/// is a global control sequence on the control grid.
pub fn verify_time_shift(
    problem: &ControlProblem,
    t0_index: usize,
    t1_index: usize,
    x0: &Path,
    l: f64,
    schedule: &[(usize, usize)],
    tol: f64,
) -> Result<TimeShiftReport> {
    let (k, c) = time_shift_constant(problem, l)?;
    let xa = problem.rollout(t0_index, x0, &problem.schedule_from(t0_index, schedule))?;
    let xb = problem.rollout(t1_index, x0, &problem.schedule_from(t1_index, schedule))?;
    let grid = problem.grid();
    let gap = sup_gap_upto(&xa, &xb, grid.steps());
    let dt_gap = (grid.node(t1_index) - grid.node(t0_index)).abs();
    let bound = k * dt_gap + tol;
    Ok(TimeShiftReport {
        t0: grid.node(t0_index),
        t1: grid.node(t1_index),
        gap,
        bound,
        constant_c: c,
        ratio: if k * dt_gap > 0.0 { gap / (k * dt_gap) } else { 0.0 },
        tol,
        passed: gap <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gelfand::{LinearLaplacian, PLaplacian, Tridiagonal};
    use crate::pathspace::TimeGrid;
    use std::f64::consts::PI;

    #[test]
    fn zero_is_a_fixed_point() {
        let d = GelfandDiscretization::assemble(PI, 8).unwrap();
        let pl = PLaplacian::new(4.0).unwrap();
        let x = step(&d, &pl, 0.1, &[0.0; 8], &[0.0; 8], 0.1).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_step_matches_direct_solve() {
        let d = GelfandDiscretization::assemble(PI, 10).unwrap();
        let dt = 0.05;
        let xp: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).sin()).collect();
        let g: Vec<f64> = (0..10).map(|i| (i as f64 * 0.3).cos()).collect();
        let x = step(&d, &LinearLaplacian, dt, &xp, &g, dt).unwrap();
        // (I + dt T/h²) x = x_prev + dt g
        let m = Tridiagonal::second_difference(10).scaled_shift(dt / (d.h() * d.h()), 1.0);
        let rhs: Vec<f64> = xp.iter().zip(&g).map(|(a, b)| a + dt * b).collect();
        let oracle = m.solve(&rhs);
        for (a, b) in x.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn p_laplacian_step_dissipates() {
        let d = GelfandDiscretization::assemble(PI, 16).unwrap();
        let pl = PLaplacian::new(4.0).unwrap();
        let e1 = d.basis_vector(1);
        let x = step(&d, &pl, 0.1, &e1, &[0.0; 16], 0.1).unwrap();
        assert!(d.norm_h(&x) < d.norm_h(&e1));
        let r = residual(&d, &pl, 0.1, &x, &e1, &[0.0; 16], 0.1);
        assert!(d.norm_h(&r) <= STEP_TOL);
    }

    #[test]
    fn stiff_p_laplacian_step_converges() {
        let d = GelfandDiscretization::assemble(PI, 32).unwrap();
        let pl = PLaplacian::new(4.0).unwrap();
        let x0: Vec<f64> = (0..32).map(|i| if i % 2 == 0 { 3.0 } else { -3.0 }).collect();
        assert!(step(&d, &pl, 0.25, &x0, &[1.0; 32], 0.25).is_ok());
    }

    #[test]
    fn stationary_forcing_keeps_equilibrium() {
        let d = GelfandDiscretization::assemble(PI, 16).unwrap();
        let grid = TimeGrid::new(1.0 / 32.0, 1.0).unwrap();
        let s = d.sine_profile(1);
        let g: Vec<f64> = s.iter().map(|v| d.lambda_min() * v).collect();
        let x0 = Path::constant(grid, d.h(), s.clone());
        let path = solve_ivp(&d, &LinearLaplacian, &x0, 0, &ConstantForcing(g)).unwrap();
        for i in 0..=grid.steps() {
            for (a, b) in path.value(i).iter().zip(&s) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn heat_mode_decays_like_implicit_euler_factor() {
        let d = GelfandDiscretization::assemble(PI, 16).unwrap();
        let grid = TimeGrid::new(1.0 / 16.0, 1.0).unwrap();
        let s = d.sine_profile(1);
        let x0 = Path::constant(grid, d.h(), s.clone());
        let path = solve_ivp(&d, &LinearLaplacian, &x0, 0, &ZeroForcing).unwrap();
        let factor = 1.0 / (1.0 + grid.dt() * d.lambda_min());
        for i in 0..=grid.steps() {
            let want = factor.powi(i as i32);
            for (a, b) in path.value(i).iter().zip(&s) {
                assert!((a - want * b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_delay_system_stays_zero() {
        let d = GelfandDiscretization::assemble(PI, 8).unwrap();
        let grid = TimeGrid::new(1.0 / 16.0, 2.0).unwrap();
        let x0 = Path::constant(grid, d.h(), vec![0.0; 8]);
        let rhs = RhsSpec::DelayMap {
            gain: 1.0,
            tau: Some(1.0),
            distributed: true,
        };
        let path = solve_ivp(&d, &LinearLaplacian, &x0, 0, &rhs).unwrap();
        assert_eq!(path.sup_norm(), 0.0);
    }

    #[test]
    fn prefix_is_preserved_and_runs_are_bitwise_equal() {
        let d = GelfandDiscretization::assemble(PI, 8).unwrap();
        let grid = TimeGrid::new(1.0 / 16.0, 1.0).unwrap();
        let values = (0..=grid.steps())
            .map(|i| d.sine_profile(1).iter().map(|v| v * (1.0 + grid.node(i))).collect())
            .collect();
        let x0 = Path::from_values(grid, d.h(), values).unwrap();
        let pl = PLaplacian::new(4.0).unwrap();
        let rhs = RhsSpec::DelayMap {
            gain: 0.5,
            tau: Some(0.25),
            distributed: false,
        };
        let a = solve_ivp(&d, &pl, &x0, 5, &rhs).unwrap();
        let b = solve_ivp(&d, &pl, &x0, 5, &rhs).unwrap();
        assert_eq!(a, b);
        for i in 0..=5 {
            assert_eq!(a.value(i), x0.value(i));
        }
        assert_eq!(a.forcing_from(), 5);
    }

    #[test]
    fn apriori_zero_data_zero_l() {
        let d = GelfandDiscretization::assemble(PI, 8).unwrap();
        let grid = TimeGrid::new(0.125, 1.0).unwrap();
        let x0 = Path::constant(grid, d.h(), vec![0.0; 8]);
        let c = apriori_constants(&d, &LinearLaplacian, 0.0, &x0, 0.0, 1.0).unwrap();
        assert_eq!(c.c2, 0.0);
    }

    #[test]
    fn apriori_linear_closed_form() {
        let d = GelfandDiscretization::assemble(PI, 8).unwrap();
        let grid = TimeGrid::new(0.125, 1.0).unwrap();
        let x0 = Path::constant(grid, d.h(), vec![0.0; 8]);
        let c = apriori_constants(&d, &LinearLaplacian, 0.0, &x0, 1.0, 1.0).unwrap();
        // ε = √(2 c₂) / C₁ with c₂ = 1, q = 2
        let eps = 2f64.sqrt() / d.poincare_constant();
        let k = 4.0 / (2.0 * eps * eps);
        assert!((c.c2 * c.c2 - k * k.exp()).abs() < 1e-12 * (k * k.exp()));
    }

    #[test]
    fn apriori_rejects_zero_operator() {
        let d = GelfandDiscretization::assemble(PI, 8).unwrap();
        let grid = TimeGrid::new(0.125, 1.0).unwrap();
        let x0 = Path::constant(grid, d.h(), vec![0.0; 8]);
        assert!(apriori_constants(&d, &crate::gelfand::ZeroOperator, 0.0, &x0, 1.0, 1.0).is_err());
    }
}
