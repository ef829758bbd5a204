//! Bellman and Isaacs Hamiltonians by exact enumeration over finite
//! control sets, with checks of their Lipschitz hypotheses and of the
//! Isaacs condition.

use crate::control::{ControlProblem, CostTerm, DynamicsTerm, ProblemSpec};
use crate::error::{LabError, Result};
use crate::gelfand::{GelfandDiscretization, ZeroOperator};
use crate::pathspace::{History, Path, TimeGrid};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianMode {
    /// `min_p [ℓ + (f, z)]` with `q` at the first point of `Q`.
    Bellman,
    /// `min_p max_q [ℓ + (f, z)]`.
    IsaacsMinmax,
    /// `max_q min_p [ℓ + (f, z)]`.
    IsaacsMaxmin,
}

/// `F(t, x, z)` with its optimal control indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HamiltonianValue {
    pub value: f64,
    pub p_index: usize,
    pub q_index: usize,
}

/// A problem together with the order of optimisation.
#[derive(Debug, Clone, Copy)]
pub struct HamiltonianSpec<'a> {
    pub problem: &'a ControlProblem,
    pub mode: HamiltonianMode,
}

impl<'a> HamiltonianSpec<'a> {
    pub fn new(problem: &'a ControlProblem, mode: HamiltonianMode) -> Self {
        HamiltonianSpec { problem, mode }
    }

    /// Mode matching the problem: Bellman without a disturbance, min-max otherwise.
    pub fn natural(problem: &'a ControlProblem) -> Self {
        let mode = if problem.is_game() {
            HamiltonianMode::IsaacsMinmax
        } else {
            HamiltonianMode::Bellman
        };
        HamiltonianSpec { problem, mode }
    }

    /// `ℓ(t, x, p, q) + (f(t, x, p, q), z)`.
    pub fn integrand(&self, hist: &History<'_>, z: &[f64], pi: usize, qi: usize) -> f64 {
        let (p, q) = (self.problem.p_set[pi], self.problem.q_set[qi]);
        let f = self.problem.dynamics(hist, p, q);
        self.problem.running_cost(hist, p, q) + hist.inner(&f, z)
    }

    /// Exact enumeration; ties go to the lowest index.
    pub fn eval(&self, hist: &History<'_>, z: &[f64]) -> Result<HamiltonianValue> {
        let np = self.problem.p_set.len();
        let nq = self.problem.q_set.len();
        if np == 0 || nq == 0 {
            return Err(LabError::EmptyControlSet);
        }
        let table: Vec<Vec<f64>> = (0..np)
            .map(|pi| {
                let qs = if self.mode == HamiltonianMode::Bellman { 1 } else { nq };
                (0..qs).map(|qi| self.integrand(hist, z, pi, qi)).collect()
            })
            .collect();
        Ok(reduce_table(self.mode, &table))
    }
}

/// Reduces a payoff table `table[p][q]` according to `mode`.
pub fn reduce_table(mode: HamiltonianMode, table: &[Vec<f64>]) -> HamiltonianValue {
    match mode {
        HamiltonianMode::Bellman => {
            let mut best = HamiltonianValue {
                value: f64::INFINITY,
                p_index: 0,
                q_index: 0,
            };
            for (pi, row) in table.iter().enumerate() {
                if row[0] < best.value {
                    best = HamiltonianValue {
                        value: row[0],
                        p_index: pi,
                        q_index: 0,
                    };
                }
            }
            best
        }
        HamiltonianMode::IsaacsMinmax => {
            let mut best = HamiltonianValue {
                value: f64::INFINITY,
                p_index: 0,
                q_index: 0,
            };
            for (pi, row) in table.iter().enumerate() {
                let (mut qbest, mut vbest) = (0, f64::NEG_INFINITY);
                for (qi, &v) in row.iter().enumerate() {
                    if v > vbest {
                        vbest = v;
                        qbest = qi;
                    }
                }
                if vbest < best.value {
                    best = HamiltonianValue {
                        value: vbest,
                        p_index: pi,
                        q_index: qbest,
                    };
                }
            }
            best
        }
        HamiltonianMode::IsaacsMaxmin => {
            let nq = table[0].len();
            let mut best = HamiltonianValue {
                value: f64::NEG_INFINITY,
                p_index: 0,
                q_index: 0,
            };
            for qi in 0..nq {
                let (mut pbest, mut vbest) = (0, f64::INFINITY);
                for (pi, row) in table.iter().enumerate() {
                    if row[qi] < vbest {
                        vbest = row[qi];
                        pbest = pi;
                    }
                }
                if vbest > best.value {
                    best = HamiltonianValue {
                        value: vbest,
                        p_index: pbest,
                        q_index: qi,
                    };
                }
            }
            best
        }
    }
}

/// Whether `ℓ` and `f` depend on the path only through `x(t)`, so that the
/// game-form bound `L_f(1+|z|)√(|Δx(t)|² + ∫|Δx|²)` applies.
pub fn has_game_form(spec: &ProblemSpec) -> bool {
    let f_ok = spec.dynamics.iter().all(|t| {
        !matches!(
            t,
            DynamicsTerm::ConcentratedDelay { .. } | DynamicsTerm::DistributedDelay { .. }
        )
    });
    let l_ok = spec
        .running
        .iter()
        .all(|t| !matches!(t, CostTerm::DelayedStateNorm { .. } | CostTerm::StateNormSq { .. }));
    f_ok && l_ok
}

/// One sample `(t, x, y, z, z̃)` for [`check_hf`].
#[derive(Debug, Clone)]
pub struct HfSample<'p> {
    pub t_index: usize,
    pub x: &'p Path,
    pub y: &'p Path,
    pub z: Vec<f64>,
    pub z_tilde: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HfReport {
    pub samples: usize,
    pub l0: f64,
    /// `max |F(z) − F(z̃)| / (L₀(1 + sup|x|)|z − z̃|)`.
    pub z_ratio: f64,
    pub z_passed: bool,
    /// Whether the game-form state bound was checked.
    pub state_applicable: bool,
    /// `max |F(x) − F(y)| / (L_f(1+|z|)√(|Δx(t)|² + ∫|Δx|²))`.
    pub state_ratio: f64,
    pub state_passed: bool,
}

impl HfReport {
    pub fn passed(&self) -> bool {
        self.z_passed && (!self.state_applicable || self.state_passed)
    }
}

pub fn check_hf(spec: &HamiltonianSpec<'_>, samples: &[HfSample<'_>]) -> Result<HfReport> {
    let lf = spec.problem.lf;
    let l0 = lf;
    let applicable = has_game_form(&spec.problem.spec);
    let tol = 1e-10;
    let mut z_ratio: f64 = 0.0;
    let mut z_passed = true;
    let mut state_ratio: f64 = 0.0;
    let mut state_passed = true;
    for s in samples {
        let hx = s.x.history(s.t_index);
        let hy = s.y.history(s.t_index);
        let fz = spec.eval(&hx, &s.z)?.value;
        let fzt = spec.eval(&hx, &s.z_tilde)?.value;
        let dz = hx.norm_of(&crate::gelfand::sub(&s.z, &s.z_tilde));
        let bound = l0 * (1.0 + hx.running_sup()) * dz;
        let lhs = (fz - fzt).abs();
        z_passed &= lhs <= bound + tol;
        if bound > 0.0 {
            z_ratio = z_ratio.max(lhs / bound);
        }
        if applicable {
            let fy = spec.eval(&hy, &s.z)?.value;
            let dxt = hx.norm_of(&crate::gelfand::sub(hx.current(), hy.current()));
            let dt = s.x.grid().dt();
            let int_sq: f64 = (0..s.t_index)
                .map(|j| {
                    let d = crate::gelfand::sub(s.x.value(j), s.y.value(j));
                    dt * hx.norm_of(&d).powi(2)
                })
                .sum();
            let zn = hx.norm_of(&s.z);
            let bound = lf * (1.0 + zn) * (dxt * dxt + int_sq).sqrt();
            let lhs = (fz - fy).abs();
            state_passed &= lhs <= bound + tol;
            if bound > 0.0 {
                state_ratio = state_ratio.max(lhs / bound);
            }
        }
    }
    Ok(HfReport {
        samples: samples.len(),
        l0,
        z_ratio,
        z_passed,
        state_applicable: applicable,
        state_ratio,
        state_passed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IsaacsReport {
    pub samples: usize,
    pub max_gap: f64,
    pub tol: f64,
    pub passed: bool,
}

/// `max |minmax − maxmin|` over `(t, x, z)` samples.
pub fn check_isaacs(problem: &ControlProblem, samples: &[(History<'_>, Vec<f64>)]) -> Result<IsaacsReport> {
    let up = HamiltonianSpec::new(problem, HamiltonianMode::IsaacsMinmax);
    let lo = HamiltonianSpec::new(problem, HamiltonianMode::IsaacsMaxmin);
    let mut max_gap: f64 = 0.0;
    for (h, z) in samples {
        let gap = (up.eval(h, z)?.value - lo.eval(h, z)?.value).abs();
        max_gap = max_gap.max(gap);
    }
    Ok(IsaacsReport {
        samples: samples.len(),
        max_gap,
        tol: 1e-12,
        passed: max_gap <= 1e-12,
    })
}

/// The coupled game `ℓ = p·q`, `f = 0`, `P = Q = {−1, 1}`, whose
/// Hamiltonians are `min-max = 1` and `max-min = −1`.
pub fn coupled_bilinear_problem() -> Result<ControlProblem> {
    let disc = GelfandDiscretization::assemble(std::f64::consts::PI, 4)?;
    let grid = TimeGrid::new(0.25, 1.0)?;
    let spec = ProblemSpec {
        dynamics: vec![],
        running: vec![CostTerm::Bilinear { weight: 1.0 }],
        terminal: vec![],
        p_set: vec![-1.0, 1.0],
        q_set: vec![-1.0, 1.0],
        lf: 1.0,
        control_intervals: 1,
        initial: vec![],
    };
    ControlProblem::new(disc, Arc::new(ZeroOperator), grid, spec)
}

pub fn coupled_bilinear_counterexample() -> Result<IsaacsReport> {
    let problem = coupled_bilinear_problem()?;
    let x = problem.initial_path();
    let z = vec![0.0; problem.disc.n()];
    check_isaacs(&problem, &[(x.history(0), z)])
}
