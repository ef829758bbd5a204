//! Delay optimal control on a piecewise-constant control grid: cost
//! functionals, exhaustive tree values, the dynamic programming identity,
//! and value regularity checks.

use crate::error::{LabError, Result};
use crate::evolution::{advance, apriori_constants, time_shift_constant};
use crate::gelfand::{GelfandDiscretization, MonotoneOperator};
use crate::pathspace::{sup_gap_upto, History, Path, TimeGrid};
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Default cap on the number of leaves of an enumerated tree.
pub const DEFAULT_BUDGET: usize = 4096;

/// Additive pieces of the dynamics `f(t, x, p, q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DynamicsTerm {
    /// `gain·x(t)`.
    StateGain { gain: f64 },
    /// `gain·x((t − τ) ∨ 0)`.
    ConcentratedDelay { gain: f64, tau: f64 },
    /// `gain·∫₀ᵗ x(s) ds`.
    DistributedDelay { gain: f64 },
    /// `p·amplitude·e_mode`.
    ControlProfile { mode: usize, amplitude: f64 },
    /// `q·amplitude·e_mode`.
    DisturbanceProfile { mode: usize, amplitude: f64 },
    /// `amplitude·e_mode`.
    ConstantSource { mode: usize, amplitude: f64 },
}

/// Additive pieces of the running cost `ℓ(t, x, p, q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostTerm {
    /// `weight·|x(t)|`.
    StateNorm { weight: f64 },
    /// `weight·|x(t)|²` (not globally Lipschitz).
    StateNormSq { weight: f64 },
    /// `weight·|x((t − τ) ∨ 0)|`.
    DelayedStateNorm { weight: f64, tau: f64 },
    /// `weight·(x(t), e_mode)`.
    ModeProjection { weight: f64, mode: usize },
    /// `weight·p`.
    ControlLinear { weight: f64 },
    /// `weight·p²`.
    ControlQuad { weight: f64 },
    /// `weight·q²`.
    DisturbanceQuad { weight: f64 },
    /// `weight·p·q`.
    Bilinear { weight: f64 },
    Constant { value: f64 },
}

/// Additive pieces of the terminal cost `h(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TerminalTerm {
    /// `weight·|x(T)|`.
    Norm { weight: f64 },
    /// `weight·(x(T), e_mode)`.
    Projection { weight: f64, mode: usize },
    /// `weight·max_s |x(s)|`.
    SupNorm { weight: f64 },
    Constant { value: f64 },
}

/// `amplitude·e_mode` component of the initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ModeAmplitude {
    pub mode: usize,
    pub amplitude: f64,
}

/// Serializable description of a control problem or game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub dynamics: Vec<DynamicsTerm>,
    pub running: Vec<CostTerm>,
    pub terminal: Vec<TerminalTerm>,
    pub p_set: Vec<f64>,
    #[serde(default = "default_q_set")]
    pub q_set: Vec<f64>,
    pub lf: f64,
    pub control_intervals: usize,
    #[serde(default)]
    pub initial: Vec<ModeAmplitude>,
}

fn default_q_set() -> Vec<f64> {
    vec![0.0]
}

impl ProblemSpec {
    /// Smallest `L_f` compatible with the growth and Lipschitz bounds of the
    /// terms on horizon `T`; infinite when a term has no global bound.
    pub fn required_lf(&self, horizon: f64) -> f64 {
        let pmax = self.p_set.iter().fold(0.0f64, |a, p| a.max(p.abs()));
        let qmax = self.q_set.iter().fold(0.0f64, |a, q| a.max(q.abs()));
        let mut f_state = 0.0;
        let mut f_const = 0.0;
        for t in &self.dynamics {
            match t {
                DynamicsTerm::StateGain { gain } | DynamicsTerm::ConcentratedDelay { gain, .. } => {
                    f_state += gain.abs()
                }
                DynamicsTerm::DistributedDelay { gain } => f_state += gain.abs() * horizon,
                DynamicsTerm::ControlProfile { amplitude, .. } => f_const += amplitude.abs() * pmax,
                DynamicsTerm::DisturbanceProfile { amplitude, .. } => {
                    f_const += amplitude.abs() * qmax
                }
                DynamicsTerm::ConstantSource { amplitude, .. } => f_const += amplitude.abs(),
            }
        }
        let mut l_state = 0.0;
        let mut l_const = 0.0;
        for t in &self.running {
            match t {
                CostTerm::StateNorm { weight }
                | CostTerm::DelayedStateNorm { weight, .. }
                | CostTerm::ModeProjection { weight, .. } => l_state += weight.abs(),
                CostTerm::StateNormSq { weight } => {
                    if *weight != 0.0 {
                        l_state = f64::INFINITY
                    }
                }
                CostTerm::ControlLinear { weight } => l_const += weight.abs() * pmax,
                CostTerm::ControlQuad { weight } => l_const += weight.abs() * pmax * pmax,
                CostTerm::DisturbanceQuad { weight } => l_const += weight.abs() * qmax * qmax,
                CostTerm::Bilinear { weight } => l_const += weight.abs() * pmax * qmax,
                CostTerm::Constant { value } => l_const += value.abs(),
            }
        }
        let h_lip: f64 = self
            .terminal
            .iter()
            .map(|t| match t {
                TerminalTerm::Norm { weight }
                | TerminalTerm::Projection { weight, .. }
                | TerminalTerm::SupNorm { weight } => weight.abs(),
                TerminalTerm::Constant { .. } => 0.0,
            })
            .sum();
        [f_state, f_const, l_state, l_const, h_lip]
            .into_iter()
            .fold(0.0, f64::max)
    }

    fn max_mode(&self) -> usize {
        let mut m = 1;
        for t in &self.dynamics {
            match t {
                DynamicsTerm::ControlProfile { mode, .. }
                | DynamicsTerm::DisturbanceProfile { mode, .. }
                | DynamicsTerm::ConstantSource { mode, .. } => m = m.max(*mode),
                _ => {}
            }
        }
        for t in &self.running {
            if let CostTerm::ModeProjection { mode, .. } = t {
                m = m.max(*mode);
            }
        }
        for t in &self.terminal {
            if let TerminalTerm::Projection { mode, .. } = t {
                m = m.max(*mode);
            }
        }
        for a in &self.initial {
            m = m.max(a.mode);
        }
        m
    }
}

/// Order of optimisation on each tree level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum TreeMode {
    /// `min` over `P` with `q` fixed at the first point of `Q`.
    Bellman,
    /// `min_p max_q` per interval (controller commits first).
    Upper,
    /// `max_q min_p` per interval (disturbance commits first).
    Lower,
}

/// Control problem on a fixed discretization.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    pub disc: GelfandDiscretization,
    pub op: Arc<dyn MonotoneOperator>,
    grid: TimeGrid,
    pub spec: ProblemSpec,
    pub lf: f64,
    pub p_set: Vec<f64>,
    pub q_set: Vec<f64>,
    steps_per_interval: usize,
    basis: Vec<Vec<f64>>,
    /// Added to `h`.
    pub terminal_shift: f64,
    /// Multiplies `ℓ`.
    pub running_scale: f64,
    pub budget: usize,
}

impl ControlProblem {
    pub fn new(
        disc: GelfandDiscretization,
        op: Arc<dyn MonotoneOperator>,
        grid: TimeGrid,
        spec: ProblemSpec,
    ) -> Result<Self> {
        if spec.p_set.is_empty() || spec.q_set.is_empty() {
            return Err(LabError::EmptyControlSet);
        }
        let k = spec.control_intervals;
        if k == 0 || !grid.steps().is_multiple_of(k) {
            return Err(LabError::Config(format!(
                "{} control intervals do not divide {} solver steps",
                k,
                grid.steps()
            )));
        }
        let max_mode = spec.max_mode();
        if max_mode > disc.n() {
            return Err(LabError::Config(format!(
                "mode {max_mode} exceeds the {} grid modes",
                disc.n()
            )));
        }
        let basis = (0..=max_mode)
            .map(|m| {
                if m == 0 {
                    vec![0.0; disc.n()]
                } else {
                    disc.basis_vector(m)
                }
            })
            .collect();
        Ok(ControlProblem {
            lf: spec.lf,
            p_set: spec.p_set.clone(),
            q_set: spec.q_set.clone(),
            steps_per_interval: grid.steps() / k,
            disc,
            op,
            grid,
            spec,
            basis,
            terminal_shift: 0.0,
            running_scale: 1.0,
            budget: DEFAULT_BUDGET,
        })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn control_intervals(&self) -> usize {
        self.spec.control_intervals
    }

    pub fn steps_per_interval(&self) -> usize {
        self.steps_per_interval
    }

    pub fn is_game(&self) -> bool {
        self.q_set.len() > 1
    }

    /// Copy with `K` control intervals.
    pub fn with_control_intervals(&self, k: usize) -> Result<Self> {
        let mut spec = self.spec.clone();
        spec.control_intervals = k;
        let mut out = ControlProblem::new(self.disc.clone(), self.op.clone(), self.grid, spec)?;
        out.terminal_shift = self.terminal_shift;
        out.running_scale = self.running_scale;
        out.budget = self.budget;
        Ok(out)
    }

    pub fn with_terminal_shift(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.terminal_shift += c;
        out
    }

    pub fn with_running_scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.running_scale *= s;
        out
    }

    /// Initial state `x* = Σ amplitude·e_mode`.
    pub fn initial_state(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.disc.n()];
        for a in &self.spec.initial {
            for (xi, e) in x.iter_mut().zip(&self.basis[a.mode]) {
                *xi += a.amplitude * e;
            }
        }
        x
    }

    /// Constant path at `x*`.
    pub fn initial_path(&self) -> Path {
        Path::constant(self.grid, self.disc.h(), self.initial_state())
    }

    /// `f(t_i, x, p, q)`.
    pub fn dynamics(&self, hist: &History<'_>, p: f64, q: f64) -> Vec<f64> {
        let n = self.disc.n();
        let mut out = vec![0.0; n];
        for term in &self.spec.dynamics {
            match term {
                DynamicsTerm::StateGain { gain } => {
                    for (o, v) in out.iter_mut().zip(hist.current()) {
                        *o += gain * v;
                    }
                }
                DynamicsTerm::ConcentratedDelay { gain, tau } => {
                    for (o, v) in out.iter_mut().zip(hist.delayed(*tau)) {
                        *o += gain * v;
                    }
                }
                DynamicsTerm::DistributedDelay { gain } => {
                    for (o, v) in out.iter_mut().zip(hist.integral()) {
                        *o += gain * v;
                    }
                }
                DynamicsTerm::ControlProfile { mode, amplitude } => {
                    for (o, e) in out.iter_mut().zip(&self.basis[*mode]) {
                        *o += p * amplitude * e;
                    }
                }
                DynamicsTerm::DisturbanceProfile { mode, amplitude } => {
                    for (o, e) in out.iter_mut().zip(&self.basis[*mode]) {
                        *o += q * amplitude * e;
                    }
                }
                DynamicsTerm::ConstantSource { mode, amplitude } => {
                    for (o, e) in out.iter_mut().zip(&self.basis[*mode]) {
                        *o += amplitude * e;
                    }
                }
            }
        }
        out
    }

    /// `ℓ(t_i, x, p, q)` including the running scale.
    pub fn running_cost(&self, hist: &History<'_>, p: f64, q: f64) -> f64 {
        let mut s = 0.0;
        for term in &self.spec.running {
            s += match term {
                CostTerm::StateNorm { weight } => weight * hist.current_norm(),
                CostTerm::StateNormSq { weight } => weight * hist.current_norm().powi(2),
                CostTerm::DelayedStateNorm { weight, tau } => {
                    weight * hist.norm_of(hist.delayed(*tau))
                }
                CostTerm::ModeProjection { weight, mode } => {
                    weight * hist.inner(hist.current(), &self.basis[*mode])
                }
                CostTerm::ControlLinear { weight } => weight * p,
                CostTerm::ControlQuad { weight } => weight * p * p,
                CostTerm::DisturbanceQuad { weight } => weight * q * q,
                CostTerm::Bilinear { weight } => weight * p * q,
                CostTerm::Constant { value } => *value,
            };
        }
        self.running_scale * s
    }

    /// `h(x)` including the terminal shift.
    pub fn terminal_cost(&self, path: &Path) -> f64 {
        let last = self.grid.steps();
        let mut s = self.terminal_shift;
        for term in &self.spec.terminal {
            s += match term {
                TerminalTerm::Norm { weight } => weight * path.norm_at(last),
                TerminalTerm::Projection { weight, mode } => {
                    weight * path.inner(path.value(last), &self.basis[*mode])
                }
                TerminalTerm::SupNorm { weight } => weight * path.sup_norm(),
                TerminalTerm::Constant { value } => *value,
            };
        }
        s
    }

    /// Solver nodes `t₀ = b₀ < b₁ < … < b_m = N` delimiting control
    /// intervals from `t₀`; the first interval ends at the next node of the
    /// global control grid.
    pub fn control_bounds(&self, t0_index: usize) -> Vec<usize> {
        let n = self.grid.steps();
        let s = self.steps_per_interval;
        let mut b = vec![t0_index];
        let mut next = (t0_index / s + 1) * s;
        while next <= n {
            b.push(next);
            next += s;
        }
        if *b.last().expect("nonempty") != n {
            b.push(n);
        }
        if t0_index == n {
            b.truncate(1);
        }
        b
    }

    /// Restriction of a global schedule (one entry per control interval of
    /// `[0, T]`) to the intervals from `t₀`.
    pub fn schedule_from(&self, t0_index: usize, global: &[(usize, usize)]) -> Vec<(usize, usize)> {
        let k0 = (t0_index / self.steps_per_interval).min(global.len());
        global[k0..].to_vec()
    }

    fn check_choice(&self, c: (usize, usize)) -> Result<(f64, f64)> {
        match (self.p_set.get(c.0), self.q_set.get(c.1)) {
            (Some(&p), Some(&q)) => Ok((p, q)),
            _ => Err(LabError::InvalidArgument(format!(
                "control index {c:?} outside P × Q"
            ))),
        }
    }

    /// Integrates `[from, to)` with constant controls and returns the
    /// left-rectangle running cost.
    pub fn integrate_segment(
        &self,
        path: &mut Path,
        from: usize,
        to: usize,
        p: f64,
        q: f64,
    ) -> Result<f64> {
        let dt = self.grid.dt();
        let mut cost = 0.0;
        for i in from..to {
            let (g, l) = {
                let hist = path.history(i);
                (self.dynamics(&hist, p, q), self.running_cost(&hist, p, q))
            };
            cost += dt * l;
            advance(&self.disc, self.op.as_ref(), path, i, &g)?;
        }
        Ok(cost)
    }

    /// Controlled trajectory from `(t₀, x₀)`; `controls[j]` holds the
    /// `(P, Q)` indices on the `j`-th interval of [`control_bounds`](Self::control_bounds).
    pub fn rollout(&self, t0_index: usize, x0: &Path, controls: &[(usize, usize)]) -> Result<Path> {
        Ok(self.rollout_with_cost(t0_index, x0, controls)?.0)
    }

    /// Trajectory and `J(t₀, x₀; a)`.
    pub fn rollout_with_cost(
        &self,
        t0_index: usize,
        x0: &Path,
        controls: &[(usize, usize)],
    ) -> Result<(Path, f64)> {
        let bounds = self.control_bounds(t0_index);
        if controls.len() < bounds.len() - 1 {
            return Err(LabError::InvalidArgument(format!(
                "need {} control values, got {}",
                bounds.len() - 1,
                controls.len()
            )));
        }
        let mut path = x0.clone();
        path.set_birth(t0_index);
        path.mark_forcing_from(x0.forcing_from().min(t0_index));
        let mut running = Vec::with_capacity(bounds.len());
        for (j, w) in bounds.windows(2).enumerate() {
            let (p, q) = self.check_choice(controls[j])?;
            running.push(self.integrate_segment(&mut path, w[0], w[1], p, q)?);
        }
        // same association as the tree recursion: c₁ + (c₂ + (… + h))
        let mut total = self.terminal_cost(&path);
        for c in running.iter().rev() {
            total += c;
        }
        Ok((path, total))
    }

    /// `J(t₀, x₀; a)`.
    pub fn cost_j(&self, t0_index: usize, x0: &Path, controls: &[(usize, usize)]) -> Result<f64> {
        Ok(self.rollout_with_cost(t0_index, x0, controls)?.1)
    }

    fn choices(&self, mode: TreeMode) -> usize {
        match mode {
            TreeMode::Bellman => self.p_set.len(),
            TreeMode::Upper | TreeMode::Lower => self.p_set.len() * self.q_set.len(),
        }
    }

    /// Leaves of a tree over `intervals` levels.
    pub fn leaves(&self, mode: TreeMode, intervals: usize) -> u128 {
        (self.choices(mode) as u128).saturating_pow(intervals as u32)
    }

    fn check_budget(&self, mode: TreeMode, intervals: usize) -> Result<()> {
        let required = self.leaves(mode, intervals);
        if required > self.budget as u128 {
            return Err(LabError::BudgetExceeded {
                required,
                budget: self.budget,
            });
        }
        Ok(())
    }

    /// Exact tree value over `bounds` with `leaf` evaluated at the last node.
    pub fn tree_value(
        &self,
        x0: &Path,
        bounds: &[usize],
        mode: TreeMode,
        leaf: &(dyn Fn(&Path) -> Result<f64> + Sync),
    ) -> Result<ValueRecord> {
        self.check_budget(mode, bounds.len().saturating_sub(1))?;
        let mut root = x0.clone();
        root.set_birth(bounds[0]);
        root.mark_forcing_from(x0.forcing_from().min(bounds[0]));
        if bounds.len() < 2 {
            return Ok(ValueRecord {
                t0: self.grid.node(bounds[0]),
                value: leaf(&root)?,
                argmin: Vec::new(),
            });
        }
        let pairs: Vec<(usize, usize)> = match mode {
            TreeMode::Bellman => (0..self.p_set.len()).map(|p| (p, 0)).collect(),
            _ => (0..self.p_set.len())
                .flat_map(|p| (0..self.q_set.len()).map(move |q| (p, q)))
                .collect(),
        };
        let children: Vec<(f64, Vec<(usize, usize)>)> = pairs
            .par_iter()
            .map(|&c| {
                let mut path = root.clone();
                let (p, q) = (self.p_set[c.0], self.q_set[c.1]);
                let seg = self.integrate_segment(&mut path, bounds[0], bounds[1], p, q)?;
                let (v, mut seq) = self.walk(&mut path, bounds, 1, mode, leaf)?;
                seq.insert(0, c);
                Ok((seg + v, seq))
            })
            .collect::<Result<_>>()?;
        let (value, argmin) = self.combine(mode, &pairs, children);
        Ok(ValueRecord {
            t0: self.grid.node(bounds[0]),
            value,
            argmin,
        })
    }

    fn walk(
        &self,
        path: &mut Path,
        bounds: &[usize],
        depth: usize,
        mode: TreeMode,
        leaf: &(dyn Fn(&Path) -> Result<f64> + Sync),
    ) -> Result<(f64, Vec<(usize, usize)>)> {
        if depth + 1 == bounds.len() {
            return Ok((leaf(path)?, Vec::new()));
        }
        let (from, to) = (bounds[depth], bounds[depth + 1]);
        let mut pairs = Vec::new();
        let mut children = Vec::new();
        let qs = if mode == TreeMode::Bellman {
            1
        } else {
            self.q_set.len()
        };
        for pi in 0..self.p_set.len() {
            for qi in 0..qs {
                let seg =
                    self.integrate_segment(path, from, to, self.p_set[pi], self.q_set[qi])?;
                let (v, mut seq) = self.walk(path, bounds, depth + 1, mode, leaf)?;
                seq.insert(0, (pi, qi));
                pairs.push((pi, qi));
                children.push((seg + v, seq));
            }
        }
        Ok(self.combine(mode, &pairs, children))
    }

    /// Reduces child values in index order; strict comparisons keep the
    /// lowest index among ties.
    fn combine(
        &self,
        mode: TreeMode,
        pairs: &[(usize, usize)],
        children: Vec<(f64, Vec<(usize, usize)>)>,
    ) -> (f64, Vec<(usize, usize)>) {
        match mode {
            TreeMode::Bellman => {
                let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
                for c in children {
                    if best.as_ref().is_none_or(|b| c.0 < b.0) {
                        best = Some(c);
                    }
                }
                best.expect("nonempty control set")
            }
            TreeMode::Upper => {
                // min over p of max over q
                let nq = self.q_set.len();
                let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
                for chunk in children.chunks(nq) {
                    let mut worst: Option<&(f64, Vec<(usize, usize)>)> = None;
                    for c in chunk {
                        if worst.is_none_or(|w| c.0 > w.0) {
                            worst = Some(c);
                        }
                    }
                    let w = worst.expect("nonempty Q").clone();
                    if best.as_ref().is_none_or(|b| w.0 < b.0) {
                        best = Some(w);
                    }
                }
                best.expect("nonempty P")
            }
            TreeMode::Lower => {
                // max over q of min over p
                let nq = self.q_set.len();
                let np = self.p_set.len();
                let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
                for qi in 0..nq {
                    let mut inner: Option<(f64, Vec<(usize, usize)>)> = None;
                    for pi in 0..np {
                        let idx = pi * nq + qi;
                        debug_assert_eq!(pairs[idx], (pi, qi));
                        let c = &children[idx];
                        if inner.as_ref().is_none_or(|b| c.0 < b.0) {
                            inner = Some(c.clone());
                        }
                    }
                    let w = inner.expect("nonempty P");
                    if best.as_ref().is_none_or(|b| w.0 > b.0) {
                        best = Some(w);
                    }
                }
                best.expect("nonempty Q")
            }
        }
    }

    /// Exhaustive value `v(t₀, x₀)` on the control tree.
    pub fn brute_force_value(&self, t0_index: usize, x0: &Path, mode: TreeMode) -> Result<ValueRecord> {
        let bounds = self.control_bounds(t0_index);
        self.tree_value(x0, &bounds, mode, &|p: &Path| Ok(self.terminal_cost(p)))
    }

    /// Default tree mode: Bellman for control problems, upper value for games.
    pub fn default_mode(&self) -> TreeMode {
        if self.is_game() {
            TreeMode::Upper
        } else {
            TreeMode::Bellman
        }
    }

    /// `v(t₀, x₀)` in the default mode.
    pub fn value(&self, t0_index: usize, x0: &Path) -> Result<f64> {
        Ok(self.brute_force_value(t0_index, x0, self.default_mode())?.value)
    }
}

/// Exact tree value with its principal line of controls.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueRecord {
    pub t0: f64,
    pub value: f64,
    /// `(P, Q)` indices per control interval, lowest index on ties.
    pub argmin: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DppReport {
    pub t0: f64,
    pub t: f64,
    pub value: f64,
    pub dpp_value: f64,
    pub diff: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Dynamic programming identity at control node `t_index`, both sides by
/// enumeration.
pub fn check_dpp(
    problem: &ControlProblem,
    t0_index: usize,
    x0: &Path,
    t_index: usize,
    mode: TreeMode,
) -> Result<DppReport> {
    let full = problem.brute_force_value(t0_index, x0, mode)?.value;
    let bounds: Vec<usize> = problem
        .control_bounds(t0_index)
        .into_iter()
        .take_while(|&b| b <= t_index)
        .collect();
    if *bounds.last().expect("nonempty") != t_index {
        return Err(LabError::InvalidArgument(format!(
            "t = {} is not a control node",
            problem.grid().node(t_index)
        )));
    }
    let leaf = |p: &Path| problem.brute_force_value(t_index, p, mode).map(|r| r.value);
    let dpp = problem.tree_value(x0, &bounds, mode, &leaf)?.value;
    let diff = (full - dpp).abs();
    Ok(DppReport {
        t0: problem.grid().node(t0_index),
        t: problem.grid().node(t_index),
        value: full,
        dpp_value: dpp,
        diff,
        tol: 1e-10,
        passed: diff <= 1e-10,
    })
}

/// One sample of [`check_value_regularity`]: `(t₀, x₀)`, `(t₀, y₀)`, `(t₁, x₀)`.
#[derive(Debug, Clone)]
pub struct RegularityCase {
    pub t0_index: usize,
    pub t1_index: usize,
    pub x0: Path,
    pub y0: Path,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityRow {
    pub t0: f64,
    pub t1: f64,
    pub space_gap: f64,
    pub space_bound: f64,
    pub time_gap: f64,
    pub time_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    pub space_constant: f64,
    pub time_constant: f64,
    /// `max |Δv| / (constant·|Δ|)` over the cases.
    pub max_space_ratio: f64,
    pub max_time_ratio: f64,
    pub tol: f64,
    pub passed: bool,
    pub rows: Vec<RegularityRow>,
}

/// Space constant `L_f(T − t₀ + 1)e^{L_f(T − t₀)}`.
pub fn space_lipschitz_constant(problem: &ControlProblem, t0: f64) -> f64 {
    let span = problem.grid().horizon() - t0;
    problem.lf * (span + 1.0) * (problem.lf * span).exp()
}

/// Time constant `L_f(1 + C) + L_f(T + 1)e^{L_f T}·4max{L,L_f}(1 + C)e^{L_f T}`
/// assembled from the running-cost growth, the space constant, and the
/// time-shift estimate.
pub fn time_regularity_constant(problem: &ControlProblem, l: f64) -> Result<f64> {
    let (shift, _) = time_shift_constant(problem, l)?;
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
    Ok(problem.lf * (1.0 + c) + space_lipschitz_constant(problem, 0.0) * shift)
}

/// Space and time regularity of the value on sampled states of `Ω^L`.
pub fn check_value_regularity(
    problem: &ControlProblem,
    cases: &[RegularityCase],
    l: f64,
    tol: f64,
) -> Result<RegularityReport> {
    let time_constant = time_regularity_constant(problem, l)?;
    let grid = problem.grid();
    let rows: Vec<RegularityRow> = cases
        .par_iter()
        .map(|c| {
            let vx = problem.value(c.t0_index, &c.x0)?;
            let vy = problem.value(c.t0_index, &c.y0)?;
            let vt = problem.value(c.t1_index, &c.x0)?;
            let t0 = grid.node(c.t0_index);
            let t1 = grid.node(c.t1_index);
            Ok(RegularityRow {
                t0,
                t1,
                space_gap: (vx - vy).abs(),
                space_bound: space_lipschitz_constant(problem, t0)
                    * sup_gap_upto(&c.x0, &c.y0, c.t0_index),
                time_gap: (vx - vt).abs(),
                time_bound: time_constant * (t1 - t0).abs(),
            })
        })
        .collect::<Result<_>>()?;
    let mut max_space_ratio: f64 = 0.0;
    let mut max_time_ratio: f64 = 0.0;
    let mut passed = true;
    for r in &rows {
        passed &= r.space_gap <= r.space_bound + tol && r.time_gap <= r.time_bound + tol;
        if r.space_bound > 0.0 {
            max_space_ratio = max_space_ratio.max(r.space_gap / r.space_bound);
        }
        if r.time_bound > 0.0 {
            max_time_ratio = max_time_ratio.max(r.time_gap / r.time_bound);
        }
    }
    Ok(RegularityReport {
        space_constant: space_lipschitz_constant(problem, 0.0),
        time_constant,
        max_space_ratio,
        max_time_ratio,
        tol,
        passed,
        rows,
    })
}

/// All schedules over `k` intervals for `|P|` choices (lexicographic).
pub fn all_schedules(np: usize, nq: usize, k: usize) -> Vec<Vec<(usize, usize)>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::with_capacity(out.len() * np * nq);
        for s in &out {
            for p in 0..np {
                for q in 0..nq {
                    let mut t = s.clone();
                    t.push((p, q));
                    next.push(t);
                }
            }
        }
        out = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gelfand::LinearLaplacian;
    use std::f64::consts::PI;

    fn heat_problem(spec: ProblemSpec, n: usize, dt: f64) -> ControlProblem {
        let disc = GelfandDiscretization::assemble(PI, n).unwrap();
        let grid = TimeGrid::new(dt, 1.0).unwrap();
        ControlProblem::new(disc, Arc::new(LinearLaplacian), grid, spec).unwrap()
    }

    fn spec(running: Vec<CostTerm>, terminal: Vec<TerminalTerm>, k: usize) -> ProblemSpec {
        ProblemSpec {
            dynamics: vec![DynamicsTerm::ControlProfile {
                mode: 1,
                amplitude: 1.0,
            }],
            running,
            terminal,
            p_set: vec![-1.0, 1.0],
            q_set: vec![0.0],
            lf: 1.0,
            control_intervals: k,
            initial: vec![ModeAmplitude {
                mode: 1,
                amplitude: 1.0,
            }],
        }
    }

    #[test]
    fn trivial_costs() {
        let pr = heat_problem(spec(vec![], vec![], 2), 8, 1.0 / 16.0);
        let x0 = pr.initial_path();
        assert_eq!(pr.cost_j(0, &x0, &[(0, 0), (1, 0)]).unwrap(), 0.0);
        let pr = heat_problem(spec(vec![CostTerm::Constant { value: 1.0 }], vec![], 2), 8, 1.0 / 16.0);
        let j = pr.cost_j(4, &x0, &[(0, 0), (1, 0)]).unwrap();
        assert!((j - 0.75).abs() < 1e-14);
    }

    #[test]
    fn squared_norm_cost_matches_spectral_sum() {
        let mut s = spec(vec![CostTerm::StateNormSq { weight: 1.0 }], vec![], 1);
        s.dynamics.clear();
        let pr = heat_problem(s, 16, 1.0 / 32.0);
        let x0 = pr.initial_path();
        let j = pr.cost_j(0, &x0, &[(0, 0)]).unwrap();
        // x_i = r^i e₁ with r = 1/(1 + dt λ₁): J = dt Σ_{i<N} r^{2i}
        let dt = 1.0 / 32.0;
        let r = 1.0 / (1.0 + dt * pr.disc.lambda_min());
        let oracle: f64 = (0..32).map(|i| dt * r.powi(2 * i)).sum();
        assert!((j - oracle).abs() < 1e-12);
        // and the continuous integral ∫₀¹ e^{−2t} dt is within O(dt)
        assert!((j - (1.0 - (-2.0f64).exp()) / 2.0).abs() < 0.05);
    }

    #[test]
    fn control_bounds_align_to_global_grid() {
        let pr = heat_problem(spec(vec![], vec![], 4), 4, 1.0 / 16.0);
        assert_eq!(pr.control_bounds(0), vec![0, 4, 8, 12, 16]);
        assert_eq!(pr.control_bounds(6), vec![6, 8, 12, 16]);
        assert_eq!(pr.control_bounds(8), vec![8, 12, 16]);
        assert_eq!(pr.control_bounds(16), vec![16]);
    }

    #[test]
    fn two_by_two_matches_hand_enumeration() {
        let pr = heat_problem(
            spec(
                vec![CostTerm::ControlQuad { weight: 0.1 }],
                vec![TerminalTerm::Projection {
                    weight: 1.0,
                    mode: 1,
                }],
                2,
            ),
            8,
            1.0 / 16.0,
        );
        let x0 = pr.initial_path();
        let rec = pr.brute_force_value(0, &x0, TreeMode::Bellman).unwrap();
        let mut best = f64::INFINITY;
        let mut arg = Vec::new();
        for s in all_schedules(2, 1, 2) {
            let j = pr.cost_j(0, &x0, &s).unwrap();
            if j < best {
                best = j;
                arg = s;
            }
        }
        assert_eq!(rec.value, best);
        assert_eq!(rec.argmin, arg);
        assert_eq!(arg, vec![(0, 0), (0, 0)]);
    }

    #[test]
    fn irrelevant_control_gives_uncontrolled_terminal() {
        let mut s = spec(vec![], vec![TerminalTerm::Norm { weight: 1.0 }], 3);
        s.dynamics.clear();
        s.control_intervals = 2;
        let pr = heat_problem(s, 8, 1.0 / 16.0);
        let x0 = pr.initial_path();
        let v = pr.value(0, &x0).unwrap();
        let path = pr.rollout(0, &x0, &[(1, 0), (1, 0)]).unwrap();
        assert_eq!(v, pr.terminal_cost(&path));
        let shifted = pr.with_terminal_shift(0.5).value(0, &x0).unwrap();
        assert!((shifted - v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dpp_holds_on_interior_nodes() {
        let pr = heat_problem(
            spec(
                vec![
                    CostTerm::StateNorm { weight: 0.5 },
                    CostTerm::ControlQuad { weight: 0.2 },
                ],
                vec![TerminalTerm::Norm { weight: 1.0 }],
                4,
            ),
            8,
            1.0 / 16.0,
        );
        let x0 = pr.initial_path();
        for t in [0, 4, 8, 12, 16] {
            let r = check_dpp(&pr, 0, &x0, t, TreeMode::Bellman).unwrap();
            assert!(r.passed, "{r:?}");
        }
        assert!(check_dpp(&pr, 0, &x0, 5, TreeMode::Bellman).is_err());
    }

    #[test]
    fn budget_is_enforced() {
        let mut pr = heat_problem(spec(vec![], vec![], 4), 4, 1.0 / 16.0);
        pr.budget = 8;
        let x0 = pr.initial_path();
        assert!(matches!(
            pr.brute_force_value(0, &x0, TreeMode::Bellman),
            Err(LabError::BudgetExceeded { required: 16, .. })
        ));
    }

    #[test]
    fn refinement_never_increases_value() {
        let pr = heat_problem(
            spec(
                vec![CostTerm::ControlQuad { weight: 0.3 }],
                vec![TerminalTerm::Norm { weight: 1.0 }],
                2,
            ),
            8,
            1.0 / 16.0,
        );
        let x0 = pr.initial_path();
        let coarse = pr.value(0, &x0).unwrap();
        let fine = pr.with_control_intervals(4).unwrap().value(0, &x0).unwrap();
        assert!(fine <= coarse + 1e-15);
    }

    #[test]
    fn required_lf_collects_terms() {
        let s = ProblemSpec {
            dynamics: vec![
                DynamicsTerm::StateGain { gain: 0.5 },
                DynamicsTerm::DistributedDelay { gain: 0.25 },
            ],
            running: vec![CostTerm::ControlQuad { weight: 2.0 }],
            terminal: vec![TerminalTerm::Norm { weight: 0.1 }],
            p_set: vec![-1.0, 0.5],
            q_set: vec![0.0],
            lf: 1.0,
            control_intervals: 1,
            initial: vec![],
        };
        assert!((s.required_lf(2.0) - 2.0).abs() < 1e-15);
    }
}
