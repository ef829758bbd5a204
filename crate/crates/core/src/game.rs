//! Two-player feedback games: step-by-step rollouts on a partition,
//! guaranteed results by exhaustive search over the opponent's piecewise
//! constant replies, the extremal-shift strategy, and bracketing against the
//! tree game values.

use crate::control::{ControlProblem, TreeMode};
use crate::error::{LabError, Result};
use crate::evolution::advance;
use crate::hamiltonian::{reduce_table, HamiltonianMode, HamiltonianSpec};
use crate::minimax::CandidateFunctional;
use crate::pathspace::{Path, TimeGrid, TrajectoryBundle};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Debug;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Player {
    /// Chooses from `P`, minimises.
    Controller,
    /// Chooses from `Q`, maximises.
    Disturbance,
}

/// Non-anticipating feedback `(t_i, x|[0,t_i]) ↦` index into `P` or `Q`.
pub trait FeedbackStrategy: Debug + Send + Sync {
    fn player(&self) -> Player;

    fn name(&self) -> String;

    fn choose(&self, t_index: usize, path: &Path) -> Result<usize>;
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantStrategy {
    pub player: Player,
    pub index: usize,
}

impl FeedbackStrategy for ConstantStrategy {
    fn player(&self) -> Player {
        self.player
    }

    fn name(&self) -> String {
        format!("constant({})", self.index)
    }

    fn choose(&self, _t_index: usize, _path: &Path) -> Result<usize> {
        Ok(self.index)
    }
}

/// Fixed index sequence, one entry per partition interval.
#[derive(Debug, Clone)]
pub struct OpenLoopStrategy {
    pub player: Player,
    pub partition: Partition,
    pub indices: Vec<usize>,
}

impl FeedbackStrategy for OpenLoopStrategy {
    fn player(&self) -> Player {
        self.player
    }

    fn name(&self) -> String {
        format!("open-loop{:?}", self.indices)
    }

    fn choose(&self, t_index: usize, _path: &Path) -> Result<usize> {
        let j = self
            .partition
            .interval_of(t_index)
            .ok_or_else(|| LabError::InvalidArgument(format!("node {t_index} outside the partition")))?;
        self.indices
            .get(j)
            .copied()
            .ok_or_else(|| LabError::InvalidArgument("open-loop sequence too short".into()))
    }
}

/// Partition `t₀ = s_0 < … < s_m = T` of solver nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    nodes: Vec<usize>,
}

impl Partition {
    pub fn new(grid: TimeGrid, nodes: Vec<usize>) -> Result<Self> {
        let ok = nodes.len() >= 2
            && nodes.windows(2).all(|w| w[0] < w[1])
            && *nodes.last().expect("nonempty") == grid.steps();
        if !ok {
            return Err(LabError::InvalidArgument(format!(
                "partition {nodes:?} is not increasing up to node {}",
                grid.steps()
            )));
        }
        Ok(Partition { nodes })
    }

    /// `m` equal intervals of `[t₀, T]`.
    pub fn uniform(grid: TimeGrid, t0_index: usize, m: usize) -> Result<Self> {
        let span = grid.steps().saturating_sub(t0_index);
        if m == 0 || span == 0 || !span.is_multiple_of(m) {
            return Err(LabError::InvalidArgument(format!(
                "{m} intervals do not divide {span} solver steps"
            )));
        }
        let w = span / m;
        Partition::new(grid, (0..=m).map(|j| t0_index + j * w).collect())
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Largest interval length `|π|`.
    pub fn mesh(&self, grid: TimeGrid) -> f64 {
        let w = self.nodes.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0);
        w as f64 * grid.dt()
    }

    /// Interval `j` with `s_j ≤ t < s_{j+1}`.
    pub fn interval_of(&self, t_index: usize) -> Option<usize> {
        self.nodes.windows(2).position(|w| w[0] <= t_index && t_index < w[1])
    }
}

/// Realised closed-loop play.
#[derive(Debug, Clone)]
pub struct GameRollout {
    pub path: Path,
    /// `(P, Q)` indices per partition interval.
    pub controls: Vec<(usize, usize)>,
    /// Running cost per partition interval.
    pub segment_costs: Vec<f64>,
    pub cost: f64,
}

fn check_sides(a: &dyn FeedbackStrategy, b: &dyn FeedbackStrategy) -> Result<()> {
    if a.player() != Player::Controller || b.player() != Player::Disturbance {
        return Err(LabError::InvalidArgument(format!(
            "expected controller vs disturbance, got {:?} vs {:?}",
            a.player(),
            b.player()
        )));
    }
    Ok(())
}

/// Step-by-step play: on `[s_j, s_{j+1})` both sides hold the values their
/// strategies return at `s_j`.
pub fn rollout(
    problem: &ControlProblem,
    x0: &Path,
    partition: &Partition,
    a: &dyn FeedbackStrategy,
    b: &dyn FeedbackStrategy,
) -> Result<GameRollout> {
    check_sides(a, b)?;
    let t0 = partition.nodes[0];
    let mut path = x0.clone();
    path.set_birth(t0);
    path.mark_forcing_from(x0.forcing_from().min(t0));
    let mut controls = Vec::with_capacity(partition.intervals());
    let mut segment_costs = Vec::with_capacity(partition.intervals());
    for w in partition.nodes.windows(2) {
        let pi = a.choose(w[0], &path)?;
        let qi = b.choose(w[0], &path)?;
        let (p, q) = match (problem.p_set.get(pi), problem.q_set.get(qi)) {
            (Some(&p), Some(&q)) => (p, q),
            _ => {
                return Err(LabError::InvalidArgument(format!(
                    "strategy returned ({pi}, {qi}) outside P × Q"
                )))
            }
        };
        segment_costs.push(problem.integrate_segment(&mut path, w[0], w[1], p, q)?);
        controls.push((pi, qi));
    }
    let mut cost = problem.terminal_cost(&path);
    for c in segment_costs.iter().rev() {
        cost += c;
    }
    Ok(GameRollout {
        path,
        controls,
        segment_costs,
        cost,
    })
}

fn sequences(base: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|s| {
                (0..base).map(move |c| {
                    let mut t = s.clone();
                    t.push(c);
                    t
                })
            })
            .collect();
    }
    out
}

/// Every piecewise-constant reply of the opponent on `partition`, in
/// lexicographic order.
pub fn enumerate_replies(
    problem: &ControlProblem,
    x0: &Path,
    partition: &Partition,
    strategy: &dyn FeedbackStrategy,
) -> Result<Vec<GameRollout>> {
    let (base, opponent) = match strategy.player() {
        Player::Controller => (problem.q_set.len(), Player::Disturbance),
        Player::Disturbance => (problem.p_set.len(), Player::Controller),
    };
    let m = partition.intervals();
    let required = (base as u128).saturating_pow(m as u32);
    if required > problem.budget as u128 {
        return Err(LabError::BudgetExceeded {
            required,
            budget: problem.budget,
        });
    }
    sequences(base, m)
        .into_par_iter()
        .map(|indices| {
            let reply = OpenLoopStrategy {
                player: opponent,
                partition: partition.clone(),
                indices,
            };
            match opponent {
                Player::Disturbance => rollout(problem, x0, partition, strategy, &reply),
                Player::Controller => rollout(problem, x0, partition, &reply, strategy),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct GuaranteedResult {
    pub value: f64,
    /// Opponent's replies realising `value` (lowest index on ties).
    pub worst: Vec<(usize, usize)>,
    pub replies: usize,
}

fn extreme(player: Player, plays: &[GameRollout]) -> GuaranteedResult {
    let mut best = 0;
    for (k, g) in plays.iter().enumerate() {
        let better = match player {
            Player::Controller => g.cost > plays[best].cost,
            Player::Disturbance => g.cost < plays[best].cost,
        };
        if better {
            best = k;
        }
    }
    GuaranteedResult {
        value: plays[best].cost,
        worst: plays[best].controls.clone(),
        replies: plays.len(),
    }
}

/// `J_a` for a controller strategy (max over replies) or `J_b` for a
/// disturbance strategy (min over replies), exact on `partition`.
pub fn guaranteed_result(
    problem: &ControlProblem,
    x0: &Path,
    partition: &Partition,
    strategy: &dyn FeedbackStrategy,
) -> Result<GuaranteedResult> {
    let plays = enumerate_replies(problem, x0, partition, strategy)?;
    Ok(extreme(strategy.player(), &plays))
}

/// Upper (`min_p max_q` per interval) and lower tree values on `partition`.
pub fn tree_game_values(problem: &ControlProblem, x0: &Path, partition: &Partition) -> Result<(f64, f64)> {
    let leaf = |p: &Path| Ok(problem.terminal_cost(p));
    let upper = problem.tree_value(x0, &partition.nodes, TreeMode::Upper, &leaf)?.value;
    let lower = problem.tree_value(x0, &partition.nodes, TreeMode::Lower, &leaf)?.value;
    Ok((upper, lower))
}

/// The penalty `ν^ε(t, y) = α^ε(t)β^ε(t, y)` on `[t₀, T]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Penalty {
    pub eps: f64,
    pub lf: f64,
    pub t0: f64,
    pub horizon: f64,
}

/// `ν^ε` with its path derivatives at one node.
#[derive(Debug, Clone, Serialize)]
pub struct NuEps {
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
    pub dt_nu: f64,
    pub dx_nu: Vec<f64>,
}

impl Penalty {
    pub fn new(eps: f64, lf: f64, t0: f64, horizon: f64) -> Result<Self> {
        let eps0 = (-2.0 * lf * (horizon - t0)).exp();
        if !(eps > 0.0 && eps < eps0) {
            return Err(LabError::EpsilonOutOfRange { eps, eps0 });
        }
        Ok(Penalty { eps, lf, t0, horizon })
    }

    /// `ε₀ = e^{−2L_f(T − t₀)}`.
    pub fn eps0(&self) -> f64 {
        (-2.0 * self.lf * (self.horizon - self.t0)).exp()
    }

    pub fn alpha(&self, t: f64) -> f64 {
        ((-2.0 * self.lf * (t - self.t0)).exp() - self.eps) / self.eps
    }

    /// `ψ(t, r, v) = α(t)√(ε⁴ + |v|² + 2L_f r)` from `|v|²`.
    pub fn psi(&self, t: f64, r: f64, v_sq: f64) -> f64 {
        self.alpha(t) * (self.eps.powi(4) + v_sq + 2.0 * self.lf * r).sqrt()
    }

    /// Closed form from `y(t)`, `|y(t)|²` and `∫₀ᵗ|y|²`.
    pub fn eval_parts(&self, t: f64, y_now: &[f64], y_sq: f64, int_sq: f64) -> NuEps {
        let alpha = self.alpha(t);
        let beta = (self.eps.powi(4) + y_sq + 2.0 * self.lf * int_sq).sqrt();
        let decay = (-2.0 * self.lf * (t - self.t0)).exp();
        let dt_nu = -2.0 * self.lf * (decay / self.eps) * beta + self.lf * (alpha / beta) * y_sq;
        let dx_nu = y_now.iter().map(|v| alpha / beta * v).collect();
        NuEps {
            alpha,
            beta,
            nu: alpha * beta,
            dt_nu,
            dx_nu,
        }
    }

    /// `ν^ε(t_i, y)` with the integral by solver-grid quadrature.
    pub fn eval(&self, t_index: usize, y: &Path) -> NuEps {
        let t = y.grid().node(t_index);
        self.eval_parts(t, y.value(t_index), y.norm_at(t_index).powi(2), y.integral_sq(t_index))
    }

    /// `ν^ε(t_i, x − x̃)` without materialising the difference.
    pub fn eval_difference(&self, t_index: usize, x: &Path, other: &Path) -> NuEps {
        let dt = x.grid().dt();
        let w = x.weight();
        let sq = |i: usize| {
            w * x
                .value(i)
                .iter()
                .zip(other.value(i))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        };
        let int_sq: f64 = (0..t_index).map(|i| dt * sq(i)).sum();
        let y_now: Vec<f64> = x
            .value(t_index)
            .iter()
            .zip(other.value(t_index))
            .map(|(a, b)| a - b)
            .collect();
        self.eval_parts(x.grid().node(t_index), &y_now, sq(t_index), int_sq)
    }
}

/// `ν^ε` at node `t_index` of `y`.
pub fn nu_eps(eps: f64, lf: f64, t0: f64, t_index: usize, y: &Path) -> Result<NuEps> {
    Ok(Penalty::new(eps, lf, t0, y.grid().horizon())?.eval(t_index, y))
}

#[derive(Debug, Clone, Serialize)]
pub struct NuFdReport {
    pub samples: usize,
    pub max_rel_err_t: f64,
    pub max_rel_err_x: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Central differences of `ν^ε` against the closed-form derivatives.
///
/// Time: along the stopped path, `ν(t±δ) = ψ(t±δ, ξ(t) ± δ|y(t)|², y(t))`.
/// Space: vertical perturbation `y(t) ± δe` in each direction `e`.
pub fn check_nu_derivatives(
    penalty: &Penalty,
    y: &Path,
    t_indices: &[usize],
    directions: &[Vec<f64>],
    tol: f64,
) -> NuFdReport {
    let mut max_t: f64 = 0.0;
    let mut max_x: f64 = 0.0;
    let mut samples = 0;
    let rel = |fd: f64, exact: f64| (fd - exact).abs() / exact.abs().max(1e-8);
    for &i in t_indices {
        let t = y.grid().node(i);
        let v = y.value(i);
        let v_sq = y.norm_at(i).powi(2);
        let r = y.integral_sq(i);
        let exact = penalty.eval(i, y);
        let d = 1e-5 * (1.0 + t.abs());
        let fd_t = (penalty.psi(t + d, r + d * v_sq, v_sq) - penalty.psi(t - d, r - d * v_sq, v_sq))
            / (2.0 * d);
        max_t = max_t.max(rel(fd_t, exact.dt_nu));
        for e in directions {
            let d = 1e-5;
            let shifted = |s: f64| {
                let w: Vec<f64> = v.iter().zip(e).map(|(a, b)| a + s * b).collect();
                penalty.psi(t, r, y.norm_of(&w).powi(2))
            };
            let fd_x = (shifted(d) - shifted(-d)) / (2.0 * d);
            max_x = max_x.max(rel(fd_x, y.inner(&exact.dx_nu, e)));
        }
        samples += 1;
    }
    NuFdReport {
        samples,
        max_rel_err_t: max_t,
        max_rel_err_x: max_x,
        tol,
        passed: max_t <= tol && max_x <= tol,
    }
}

/// One evaluation of the extremal-shift rule.
#[derive(Debug, Clone, Serialize)]
pub struct ShiftDecision {
    /// Index of `x_a` (or `x_b`) among the static bundle members, `None`
    /// when a continuation of the previous minimiser was selected.
    pub member: Option<usize>,
    /// `u_a^ε(t, x)` (or `u_b^ε`).
    pub u_eps: f64,
    pub z: Vec<f64>,
    pub choice: usize,
}

/// Extremal shift: `u_a^ε = min_x̃ [u(t, x̃) + ν^ε(t, x − x̃)]` for the
/// controller, `u_b^ε = max_x̃ [u(t, x̃) − ν^ε(t, x − x̃)]` for the
/// disturbance.
///
/// At partition node `s_j` the search runs over the static bundle, the
/// one-interval continuations of the minimiser selected at `s_{j−1}` under
/// every `(p, q)`, and local probes: the history continued from `s_{j−1}`
/// with its own forcing plus `±(cε³/|s_j − s_{j−1}|)e_k`. The minimisers are
/// recomputed from the history, so the rule stays non-anticipating.
#[derive(Debug)]
pub struct ExtremalShift<'a> {
    problem: &'a ControlProblem,
    u: &'a dyn CandidateFunctional,
    penalty: Penalty,
    bundle: &'a TrajectoryBundle,
    partition: Partition,
    player: Player,
    u_table: BTreeMap<usize, Vec<f64>>,
    probe_basis: Vec<Vec<f64>>,
}

/// Multiples `c` of `ε³` used for the local probes.
pub const PROBE_SCALES: [f64; 3] = [0.5, 1.0, 2.0];

struct Selection {
    member: Option<usize>,
    path: Path,
    value: f64,
    nu: NuEps,
}

impl<'a> ExtremalShift<'a> {
    /// Tabulates `u` on the static bundle at the partition nodes.
    pub fn new(
        problem: &'a ControlProblem,
        u: &'a dyn CandidateFunctional,
        bundle: &'a TrajectoryBundle,
        eps: f64,
        partition: &Partition,
        player: Player,
    ) -> Result<Self> {
        if bundle.is_empty() {
            return Err(LabError::InvalidArgument("empty bundle".into()));
        }
        if partition.nodes[0] != bundle.t0_index {
            return Err(LabError::InvalidArgument(
                "partition and bundle start at different nodes".into(),
            ));
        }
        let grid = problem.grid();
        let penalty = Penalty::new(eps, problem.lf, grid.node(bundle.t0_index), grid.horizon())?;
        let mut u_table = BTreeMap::new();
        for &k in &partition.nodes {
            let col = bundle
                .members
                .par_iter()
                .map(|m| u.eval(k, m))
                .collect::<Result<Vec<_>>>()?;
            u_table.insert(k, col);
        }
        Ok(ExtremalShift {
            problem,
            u,
            penalty,
            bundle,
            partition: partition.clone(),
            player,
            u_table,
            probe_basis: (1..=bundle.k.clamp(1, problem.disc.n()))
                .map(|k| problem.disc.basis_vector(k))
                .collect(),
        })
    }

    pub fn penalty(&self) -> Penalty {
        self.penalty
    }

    fn sign(&self) -> f64 {
        match self.player {
            Player::Controller => 1.0,
            Player::Disturbance => -1.0,
        }
    }

    fn better(&self, val: f64, best: &Option<Selection>) -> bool {
        match (best, self.player) {
            (None, _) => true,
            (Some(b), Player::Controller) => val < b.value,
            (Some(b), Player::Disturbance) => val > b.value,
        }
    }

    fn select(&self, t_index: usize, path: &Path) -> Result<Selection> {
        let j_max = self
            .partition
            .nodes
            .iter()
            .position(|&s| s == t_index)
            .ok_or_else(|| LabError::InvalidArgument(format!("node {t_index} is not a partition node")))?;
        let sign = self.sign();
        let mut prev: Option<Selection> = None;
        for j in 0..=j_max {
            let s = self.partition.nodes[j];
            let col = &self.u_table[&s];
            let mut best: Option<Selection> = None;
            for (k, m) in self.bundle.members.iter().enumerate() {
                let nu = self.penalty.eval_difference(s, path, m);
                let val = col[k] + sign * nu.nu;
                if self.better(val, &best) {
                    best = Some(Selection {
                        member: Some(k),
                        path: m.clone(),
                        value: val,
                        nu,
                    });
                }
            }
            if let Some(p) = &prev {
                let from = self.partition.nodes[j - 1];
                for pi in 0..self.problem.p_set.len() {
                    for qi in 0..self.problem.q_set.len() {
                        let mut c = p.path.clone();
                        self.problem.integrate_segment(
                            &mut c,
                            from,
                            s,
                            self.problem.p_set[pi],
                            self.problem.q_set[qi],
                        )?;
                        let nu = self.penalty.eval_difference(s, path, &c);
                        let val = self.u.eval(s, &c)? + sign * nu.nu;
                        if self.better(val, &best) {
                            best = Some(Selection {
                                member: None,
                                path: c,
                                value: val,
                                nu,
                            });
                        }
                    }
                }
                let width = (s - from) as f64 * self.problem.grid().dt();
                for e in &self.probe_basis {
                    for c in PROBE_SCALES {
                        for dir in [1.0, -1.0] {
                            let r = dir * c * self.penalty.eps.powi(3) / width;
                            let mut probe = path.clone();
                            for i in from..s {
                                let f = path.forcing(i).ok_or(LabError::MissingForcing)?;
                                let g: Vec<f64> = f.iter().zip(e).map(|(a, b)| a + r * b).collect();
                                advance(&self.problem.disc, self.problem.op.as_ref(), &mut probe, i, &g)?;
                            }
                            let nu = self.penalty.eval_difference(s, path, &probe);
                            let val = self.u.eval(s, &probe)? + sign * nu.nu;
                            if self.better(val, &best) {
                                best = Some(Selection {
                                    member: None,
                                    path: probe,
                                    value: val,
                                    nu,
                                });
                            }
                        }
                    }
                }
            }
            prev = best;
        }
        Ok(prev.expect("nonempty bundle"))
    }

    /// `u^ε(t, x)` at a partition node.
    pub fn value(&self, t_index: usize, path: &Path) -> Result<f64> {
        Ok(self.select(t_index, path)?.value)
    }

    pub fn decide(&self, t_index: usize, path: &Path) -> Result<ShiftDecision> {
        let sel = self.select(t_index, path)?;
        let sign = self.sign();
        let z: Vec<f64> = sel.nu.dx_nu.iter().map(|v| sign * v).collect();
        let spec = HamiltonianSpec::new(self.problem, HamiltonianMode::IsaacsMinmax);
        let hist = path.history(t_index);
        let table: Vec<Vec<f64>> = (0..self.problem.p_set.len())
            .map(|pi| {
                (0..self.problem.q_set.len())
                    .map(|qi| spec.integrand(&hist, &z, pi, qi))
                    .collect()
            })
            .collect();
        let choice = match self.player {
            Player::Controller => reduce_table(HamiltonianMode::IsaacsMinmax, &table).p_index,
            Player::Disturbance => reduce_table(HamiltonianMode::IsaacsMaxmin, &table).q_index,
        };
        Ok(ShiftDecision {
            member: sel.member,
            u_eps: sel.value,
            z,
            choice,
        })
    }
}

impl FeedbackStrategy for ExtremalShift<'_> {
    fn player(&self) -> Player {
        self.player
    }

    fn name(&self) -> String {
        format!("extremal-shift(eps={}, u={})", self.penalty.eps, self.u.name())
    }

    fn choose(&self, t_index: usize, path: &Path) -> Result<usize> {
        Ok(self.decide(t_index, path)?.choice)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GuaranteeRow {
    pub eps: f64,
    pub intervals: usize,
    pub mesh: f64,
    pub u0: f64,
    /// `J_a` for the controller, `J_b` for the disturbance.
    pub guaranteed: f64,
    /// `J_a − u(t₀, x₀)` or `u(t₀, x₀) − J_b`.
    pub gap: f64,
    /// `(1 − ε)ε`.
    pub bound_term: f64,
    /// Largest `Σ_i D_i⁺ + (h − u^ε(T))⁺` over the replies, where
    /// `D_i = ∫ℓ + u^ε(s_{i+1}) − u^ε(s_i)` (signs reversed for the
    /// disturbance).
    pub residual: f64,
    /// Tree values on the partition; `None` when the tree exceeds the budget.
    pub upper_tree: Option<f64>,
    pub lower_tree: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GuaranteeReport {
    pub player: Player,
    pub rows: Vec<GuaranteeRow>,
    /// `upper tree ≤ J_a` (or `J_b ≤ lower tree`) wherever the tree fits
    /// the budget.
    pub bracket_passed: bool,
    /// Residuals strictly decrease along the ladder.
    pub monotone: bool,
    pub passed: bool,
}

/// Telescoped defects of `u^ε` along one play.
fn defect_sum(shift: &ExtremalShift<'_>, problem: &ControlProblem, play: &GameRollout) -> Result<f64> {
    let sign = shift.sign();
    let vals = shift
        .partition
        .nodes
        .iter()
        .map(|&s| shift.value(s, &play.path))
        .collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    for (j, c) in play.segment_costs.iter().enumerate() {
        total += (sign * (c + vals[j + 1] - vals[j])).max(0.0);
    }
    let terminal = problem.terminal_cost(&play.path) - vals[vals.len() - 1];
    Ok(total + (sign * terminal).max(0.0))
}

/// Plays the extremal-shift strategy of `player` against every
/// piecewise-constant reply over a ladder of `(ε, number of intervals)`.
///
/// Along every play `J − u^ε(t₀, x₀) = Σ_i D_i + (h − u^ε(T))` and
/// `u_a^ε(t₀, x₀) = u(t₀, x₀) + (1 − ε)ε`, so the guarantee
/// `J_a − u ≤ (1 − ε)ε + residual` holds by telescoping; the substantive
/// claim is the decrease of the residual along the ladder.
pub fn check_guarantee(
    problem: &ControlProblem,
    x0: &Path,
    u: &dyn CandidateFunctional,
    bundle: &TrajectoryBundle,
    ladder: &[(f64, usize)],
    player: Player,
) -> Result<GuaranteeReport> {
    let t0 = bundle.t0_index;
    let grid = problem.grid();
    let u0 = u.eval(t0, x0)?;
    let mut rows = Vec::with_capacity(ladder.len());
    for &(eps, m) in ladder {
        let partition = Partition::uniform(grid, t0, m)?;
        let shift = ExtremalShift::new(problem, u, bundle, eps, &partition, player)?;
        let plays = enumerate_replies(problem, x0, &partition, &shift)?;
        let guaranteed = extreme(player, &plays).value;
        let residual = plays
            .par_iter()
            .map(|g| defect_sum(&shift, problem, g))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let (upper_tree, lower_tree) = match tree_game_values(problem, x0, &partition) {
            Ok((up, lo)) => (Some(up), Some(lo)),
            Err(LabError::BudgetExceeded { .. }) => (None, None),
            Err(e) => return Err(e),
        };
        let gap = shift.sign() * (guaranteed - u0);
        let bound_term = (1.0 - eps) * eps;
        rows.push(GuaranteeRow {
            eps,
            intervals: m,
            mesh: partition.mesh(grid),
            u0,
            guaranteed,
            gap,
            bound_term,
            residual,
            upper_tree,
            lower_tree,
            passed: gap <= bound_term + residual + 1e-10 * (1.0 + u0.abs()),
        });
    }
    let bracket_passed = rows.iter().all(|r| match player {
        Player::Controller => r.upper_tree.is_none_or(|up| up <= r.guaranteed),
        Player::Disturbance => r.lower_tree.is_none_or(|lo| r.guaranteed <= lo),
    });
    let monotone = rows.windows(2).all(|w| w[1].residual < w[0].residual);
    let passed = bracket_passed && monotone && rows.iter().all(|r| r.passed);
    Ok(GuaranteeReport {
        player,
        rows,
        bracket_passed,
        monotone,
        passed,
    })
}
