//! Minimax sub/supersolution checks on trajectory bundles, their
//! infinitesimal form, empirical comparison and stability sweeps.
//!
//! Every existential quantifier over `X^L(t₀, x₀)` is replaced by a search
//! over a finite bundle. A pass is a certificate (a witness was found); a
//! failure only means that no witness was found in this bundle and is never
//! a disproof.

use crate::control::{all_schedules, ControlProblem, TreeMode};
use crate::error::{LabError, Result};
use crate::hamiltonian::HamiltonianSpec;
use crate::pathspace::{sample_bundle, BundleSpec, Path, TrajectoryBundle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Debug;
use std::sync::{Arc, Mutex};

/// Wording attached to every minimax report.
pub const WITNESS_NOTE: &str =
    "pass = witness found in the bundle; fail = no witness found in this bundle (not a disproof)";

/// A non-anticipating functional `u(t, x)` evaluated at grid nodes.
pub trait CandidateFunctional: Debug + Send + Sync {
    fn name(&self) -> String;

    /// The `L` of the trajectory spaces the candidate is tested on.
    fn declared_l(&self) -> f64;

    fn eval(&self, t_index: usize, path: &Path) -> Result<f64>;
}

/// `u ≡ c`.
#[derive(Debug, Clone)]
pub struct ConstCandidate {
    pub value: f64,
    pub l: f64,
}

impl CandidateFunctional for ConstCandidate {
    fn name(&self) -> String {
        format!("const({})", self.value)
    }

    fn declared_l(&self) -> f64 {
        self.l
    }

    fn eval(&self, _t_index: usize, _path: &Path) -> Result<f64> {
        Ok(self.value)
    }
}

/// `u(t, x) = −K t`.
#[derive(Debug, Clone)]
pub struct LinearInTime {
    pub slope: f64,
    pub l: f64,
    pub dt: f64,
}

impl CandidateFunctional for LinearInTime {
    fn name(&self) -> String {
        format!("linear-in-time({})", self.slope)
    }

    fn declared_l(&self) -> f64 {
        self.l
    }

    fn eval(&self, t_index: usize, _path: &Path) -> Result<f64> {
        Ok(-self.slope * t_index as f64 * self.dt)
    }
}

/// `u + δ`.
#[derive(Debug, Clone)]
pub struct Shifted {
    pub inner: Arc<dyn CandidateFunctional>,
    pub delta: f64,
}

impl CandidateFunctional for Shifted {
    fn name(&self) -> String {
        format!("{}{:+}", self.inner.name(), self.delta)
    }

    fn declared_l(&self) -> f64 {
        self.inner.declared_l()
    }

    fn eval(&self, t_index: usize, path: &Path) -> Result<f64> {
        Ok(self.inner.eval(t_index, path)? + self.delta)
    }
}

type ValueKey = (usize, Vec<u64>);

/// Exact tree value, memoised on the bit pattern of the history.
#[derive(Debug)]
pub struct TreeValue {
    pub problem: Arc<ControlProblem>,
    pub mode: TreeMode,
    cache: Mutex<BTreeMap<ValueKey, f64>>,
}

impl TreeValue {
    pub fn new(problem: Arc<ControlProblem>, mode: TreeMode) -> Self {
        TreeValue {
            problem,
            mode,
            cache: Mutex::new(BTreeMap::new()),
        }
    }

    fn key(t_index: usize, path: &Path) -> ValueKey {
        let bits = (0..=t_index)
            .flat_map(|i| path.value(i).iter().map(|v| v.to_bits()))
            .collect();
        (t_index, bits)
    }
}

impl CandidateFunctional for TreeValue {
    fn name(&self) -> String {
        match self.mode {
            TreeMode::Bellman => "bellman-value".into(),
            TreeMode::Upper => "upper-game-value".into(),
            TreeMode::Lower => "lower-game-value".into(),
        }
    }

    fn declared_l(&self) -> f64 {
        self.problem.lf
    }

    fn eval(&self, t_index: usize, path: &Path) -> Result<f64> {
        let key = Self::key(t_index, path);
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let v = self.problem.brute_force_value(t_index, path, self.mode)?.value;
        self.cache.lock().expect("cache lock").insert(key, v);
        Ok(v)
    }
}

/// Parameters available to candidate constructors.
#[derive(Debug, Clone)]
pub struct CandidateContext {
    pub problem: Arc<ControlProblem>,
    pub shift: f64,
    pub constant: f64,
    pub slope: f64,
}

type CandidateCtor = fn(&CandidateContext) -> Result<Arc<dyn CandidateFunctional>>;

/// Name → constructor table for candidate functionals.
#[derive(Clone)]
pub struct CandidateRegistry {
    ctors: BTreeMap<String, CandidateCtor>,
}

impl Debug for CandidateRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.ctors.keys()).finish()
    }
}

impl CandidateRegistry {
    pub fn builtin() -> Self {
        let mut r = CandidateRegistry {
            ctors: BTreeMap::new(),
        };
        r.register("bellman-value", |c| {
            let mode = c.problem.default_mode();
            Ok(Arc::new(TreeValue::new(c.problem.clone(), mode)))
        });
        r.register("const", |c| {
            Ok(Arc::new(ConstCandidate {
                value: c.constant,
                l: c.problem.lf,
            }))
        });
        r.register("shifted", |c| {
            let mode = c.problem.default_mode();
            Ok(Arc::new(Shifted {
                inner: Arc::new(TreeValue::new(c.problem.clone(), mode)),
                delta: c.shift,
            }))
        });
        r.register("linear-in-time", |c| {
            Ok(Arc::new(LinearInTime {
                slope: c.slope,
                l: c.problem.lf,
                dt: c.problem.grid().dt(),
            }))
        });
        r
    }

    pub fn register(&mut self, name: &str, ctor: CandidateCtor) {
        self.ctors.insert(name.to_string(), ctor);
    }

    pub fn names(&self) -> Vec<&str> {
        self.ctors.keys().map(String::as_str).collect()
    }

    pub fn build(&self, name: &str, ctx: &CandidateContext) -> Result<Arc<dyn CandidateFunctional>> {
        let ctor = self.ctors.get(name).ok_or_else(|| LabError::UnknownName {
            kind: "candidate",
            name: name.to_string(),
        })?;
        ctor(ctx)
    }
}

/// `5·tol_disc·(1 + |z|)`.
pub fn tol_mm(tol_disc: f64, z_norm: f64) -> f64 {
    5.0 * tol_disc * (1.0 + z_norm)
}

/// `{0, ±e_1, …, ±e_k}` followed by `random` Gaussian directions with
/// norms uniform on `[0, 2]`.
pub fn z_samples(
    disc: &crate::gelfand::GelfandDiscretization,
    k: usize,
    random: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let n = disc.n();
    let mut out = vec![vec![0.0; n]];
    for j in 1..=k.min(n) {
        let e = disc.basis_vector(j);
        out.push(e.clone());
        out.push(e.into_iter().map(|v| -v).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let nrm = disc.norm_h(&g).max(1e-300);
        let r: f64 = rng.gen_range(0.0..2.0);
        out.push(g.into_iter().map(|v| v * r / nrm).collect());
    }
    out
}

/// Bundle used for certification: the optimal rollout, every control
/// schedule in lexicographic order (constant schedules first), then random
/// admissible members up to `spec.size`.
pub fn certification_bundle(
    problem: &ControlProblem,
    t0_index: usize,
    x0: &Path,
    spec: BundleSpec,
    mode: TreeMode,
) -> Result<TrajectoryBundle> {
    if spec.l + 1e-12 < problem.lf {
        return Err(LabError::InvalidArgument(format!(
            "bundle L = {} is below L_f = {}",
            spec.l, problem.lf
        )));
    }
    let intervals = problem.control_bounds(t0_index).len() - 1;
    let nq = if mode == TreeMode::Bellman {
        1
    } else {
        problem.q_set.len()
    };
    let np = problem.p_set.len();
    let mut schedules: Vec<Vec<(usize, usize)>> = Vec::new();
    let opt = problem.brute_force_value(t0_index, x0, mode)?.argmin;
    schedules.push(opt);
    for p in 0..np {
        for q in 0..nq {
            schedules.push(vec![(p, q); intervals]);
        }
    }
    if (problem.leaves(mode, intervals)) <= spec.size as u128 {
        schedules.extend(all_schedules(np, nq, intervals));
    }
    let mut seen = std::collections::BTreeSet::new();
    schedules.retain(|s| seen.insert(s.clone()));
    schedules.truncate(spec.size.max(1));
    let mut members: Vec<Path> = schedules
        .par_iter()
        .map(|s| problem.rollout(t0_index, x0, s))
        .collect::<Result<_>>()?;
    if members.len() < spec.size {
        let extra = sample_bundle(
            &problem.disc,
            problem.op.as_ref(),
            problem.grid().node(t0_index),
            x0,
            BundleSpec {
                size: spec.size - members.len(),
                ..spec
            },
        )?;
        members.extend(extra.members);
    }
    Ok(TrajectoryBundle {
        t0_index,
        l: spec.l,
        seed: spec.seed,
        k: spec.k,
        members,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Super,
    Sub,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimaxRow {
    pub z_index: usize,
    pub z_norm: f64,
    pub t: f64,
    /// Super: `min_x [u(t,x) + ∫…] − u(t₀,x₀)`; sub: the `max` version.
    pub best_slack: f64,
    pub witness: usize,
    pub tol: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimaxReport {
    pub side: Side,
    pub candidate: String,
    pub members: usize,
    pub rows: Vec<MinimaxRow>,
    pub inequality_passed: bool,
    /// Super: `min (u(T,x) − h(x))`; sub: `max (u(T,x) − h(x))`.
    pub terminal_worst: f64,
    pub terminal_tol: f64,
    pub terminal_passed: bool,
    pub passed: bool,
    pub note: &'static str,
}

/// Candidate values and integrated Hamiltonian terms over a bundle.
struct Tabulation {
    /// `u(t_i, x_m)` for `i ∈ t0 ∪ ts`, keyed by node.
    values: BTreeMap<usize, Vec<f64>>,
    /// `cum[z][m][i − t0] = Σ_{j<i} dt[(−f_j, z) + F(t_j, x_m, z)]`.
    cum: Vec<Vec<Vec<f64>>>,
    terminal_gap: Vec<f64>,
}

fn tabulate(
    u: &dyn CandidateFunctional,
    spec: &HamiltonianSpec<'_>,
    bundle: &TrajectoryBundle,
    zs: &[Vec<f64>],
    nodes: &[usize],
) -> Result<Tabulation> {
    let t0 = bundle.t0_index;
    let grid = spec.problem.grid();
    let last = grid.steps();
    let dt = grid.dt();
    let mut keys: Vec<usize> = nodes.to_vec();
    keys.push(t0);
    keys.push(last);
    keys.sort_unstable();
    keys.dedup();
    let mut values = BTreeMap::new();
    for &k in &keys {
        let col: Vec<f64> = bundle
            .members
            .par_iter()
            .map(|m| u.eval(k, m))
            .collect::<Result<_>>()?;
        values.insert(k, col);
    }
    let cum: Vec<Vec<Vec<f64>>> = zs
        .par_iter()
        .map(|z| {
            bundle
                .members
                .iter()
                .map(|m| {
                    let mut acc = vec![0.0; last - t0 + 1];
                    for i in t0..last {
                        let hist = m.history(i);
                        let f = m.forcing(i).ok_or(LabError::MissingForcing)?;
                        let term = -hist.inner(f, z) + spec.eval(&hist, z)?.value;
                        acc[i + 1 - t0] = acc[i - t0] + dt * term;
                    }
                    Ok(acc)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let terminal_gap = bundle
        .members
        .iter()
        .zip(&values[&last])
        .map(|(m, u)| u - spec.problem.terminal_cost(m))
        .collect();
    Ok(Tabulation {
        values,
        cum,
        terminal_gap,
    })
}

fn side_report(
    side: Side,
    u: &dyn CandidateFunctional,
    tab: &Tabulation,
    bundle: &TrajectoryBundle,
    zs: &[Vec<f64>],
    ts: &[usize],
    tol_disc: f64,
    weight: f64,
) -> MinimaxReport {
    let t0 = bundle.t0_index;
    let dt = bundle.members[0].grid().dt();
    let u0 = tab.values[&t0][0];
    let mut rows = Vec::new();
    for (zi, z) in zs.iter().enumerate() {
        let zn = (weight * z.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let tol = tol_mm(tol_disc, zn);
        for &t in ts.iter().filter(|&&t| t > t0) {
            let mut best = match side {
                Side::Super => f64::INFINITY,
                Side::Sub => f64::NEG_INFINITY,
            };
            let mut witness = 0;
            for m in 0..bundle.members.len() {
                let s = tab.values[&t][m] + tab.cum[zi][m][t - t0] - u0;
                let better = match side {
                    Side::Super => s < best,
                    Side::Sub => s > best,
                };
                if better {
                    best = s;
                    witness = m;
                }
            }
            let passed = match side {
                Side::Super => best <= tol,
                Side::Sub => best >= -tol,
            };
            rows.push(MinimaxRow {
                z_index: zi,
                z_norm: zn,
                t: t as f64 * dt,
                best_slack: best,
                witness,
                tol,
                passed,
            });
        }
    }
    let terminal_tol = tol_mm(tol_disc, 0.0);
    let (terminal_worst, terminal_passed) = match side {
        Side::Super => {
            let w = tab.terminal_gap.iter().cloned().fold(f64::INFINITY, f64::min);
            (w, w >= -terminal_tol)
        }
        Side::Sub => {
            let w = tab
                .terminal_gap
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            (w, w <= terminal_tol)
        }
    };
    let inequality_passed = rows.iter().all(|r| r.passed);
    MinimaxReport {
        side,
        candidate: u.name(),
        members: bundle.members.len(),
        rows,
        inequality_passed,
        terminal_worst,
        terminal_tol,
        terminal_passed,
        passed: inequality_passed && terminal_passed,
        note: WITNESS_NOTE,
    }
}

/// Both one-sided checks on the same tabulation.
pub fn check_minimax(
    u: &dyn CandidateFunctional,
    spec: &HamiltonianSpec<'_>,
    bundle: &TrajectoryBundle,
    zs: &[Vec<f64>],
    ts: &[usize],
    tol_disc: f64,
) -> Result<(MinimaxReport, MinimaxReport)> {
    if bundle.is_empty() {
        return Err(LabError::InvalidArgument("empty bundle".into()));
    }
    let tab = tabulate(u, spec, bundle, zs, ts)?;
    let w = bundle.members[0].weight();
    Ok((
        side_report(Side::Super, u, &tab, bundle, zs, ts, tol_disc, w),
        side_report(Side::Sub, u, &tab, bundle, zs, ts, tol_disc, w),
    ))
}

pub fn check_supersolution(
    u: &dyn CandidateFunctional,
    spec: &HamiltonianSpec<'_>,
    bundle: &TrajectoryBundle,
    zs: &[Vec<f64>],
    ts: &[usize],
    tol_disc: f64,
) -> Result<MinimaxReport> {
    Ok(check_minimax(u, spec, bundle, zs, ts, tol_disc)?.0)
}

pub fn check_subsolution(
    u: &dyn CandidateFunctional,
    spec: &HamiltonianSpec<'_>,
    bundle: &TrajectoryBundle,
    zs: &[Vec<f64>],
    ts: &[usize],
    tol_disc: f64,
) -> Result<MinimaxReport> {
    Ok(check_minimax(u, spec, bundle, zs, ts, tol_disc)?.1)
}

#[derive(Debug, Clone, Serialize)]
pub struct InfinitesimalRow {
    pub z_index: usize,
    pub z_norm: f64,
    pub deltas: Vec<f64>,
    /// `min_x [u(t₀+δ,x) − u(t₀,x₀) + ∫…]/δ` per `δ`.
    pub super_quotients: Vec<f64>,
    /// The `max` version.
    pub sub_quotients: Vec<f64>,
    pub tol: f64,
    pub super_passed: bool,
    pub sub_passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct InfinitesimalReport {
    pub candidate: String,
    pub rows: Vec<InfinitesimalRow>,
    pub super_passed: bool,
    pub sub_passed: bool,
    pub note: &'static str,
}

/// Forward difference quotients at `t₀` for the given step counts `deltas`
/// (solver steps, ascending); the smallest one decides.
pub fn check_infinitesimal(
    u: &dyn CandidateFunctional,
    spec: &HamiltonianSpec<'_>,
    bundle: &TrajectoryBundle,
    zs: &[Vec<f64>],
    deltas: &[usize],
    tol_disc: f64,
) -> Result<InfinitesimalReport> {
    if bundle.is_empty() || deltas.is_empty() {
        return Err(LabError::InvalidArgument("empty bundle or delta list".into()));
    }
    let t0 = bundle.t0_index;
    let grid = spec.problem.grid();
    let ts: Vec<usize> = deltas.iter().map(|d| t0 + d).collect();
    if ts.iter().any(|&t| t > grid.steps()) {
        return Err(LabError::InvalidArgument("δ reaches past T".into()));
    }
    let tab = tabulate(u, spec, bundle, zs, &ts)?;
    let u0 = tab.values[&t0][0];
    let w = bundle.members[0].weight();
    let mut rows = Vec::new();
    for (zi, z) in zs.iter().enumerate() {
        let zn = (w * z.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let tol = tol_mm(tol_disc, zn);
        let mut sup_q = Vec::new();
        let mut sub_q = Vec::new();
        for &t in &ts {
            let delta = (t - t0) as f64 * grid.dt();
            let slacks = (0..bundle.members.len())
                .map(|m| tab.values[&t][m] + tab.cum[zi][m][t - t0] - u0);
            let (lo, hi) = slacks.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| {
                (a.min(s), b.max(s))
            });
            sup_q.push(lo / delta);
            sub_q.push(hi / delta);
        }
        rows.push(InfinitesimalRow {
            z_index: zi,
            z_norm: zn,
            deltas: ts.iter().map(|t| (t - t0) as f64 * grid.dt()).collect(),
            super_passed: sup_q[0] <= tol,
            sub_passed: sub_q[0] >= -tol,
            super_quotients: sup_q,
            sub_quotients: sub_q,
            tol,
        });
    }
    Ok(InfinitesimalReport {
        candidate: u.name(),
        super_passed: rows.iter().all(|r| r.super_passed),
        sub_passed: rows.iter().all(|r| r.sub_passed),
        rows,
        note: WITNESS_NOTE,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub sub: String,
    pub sup: String,
    pub samples: usize,
    /// `max (u_sub − u_super)`.
    pub max_excess: f64,
    pub tol: f64,
    pub passed: bool,
}

/// `u_sub ≤ u_super + tol` on every `(t, member)` sample.
pub fn empirical_comparison(
    u_sub: &dyn CandidateFunctional,
    u_super: &dyn CandidateFunctional,
    bundle: &TrajectoryBundle,
    ts: &[usize],
    tol: f64,
) -> Result<ComparisonReport> {
    let pairs: Vec<(usize, usize)> = ts
        .iter()
        .flat_map(|&t| (0..bundle.members.len()).map(move |m| (t, m)))
        .collect();
    let excess: Vec<f64> = pairs
        .par_iter()
        .map(|&(t, m)| {
            let x = &bundle.members[m];
            Ok(u_sub.eval(t, x)? - u_super.eval(t, x)?)
        })
        .collect::<Result<_>>()?;
    let max_excess = excess.into_iter().fold(f64::NEG_INFINITY, f64::max);
    Ok(ComparisonReport {
        sub: u_sub.name(),
        sup: u_super.name(),
        samples: pairs.len(),
        max_excess,
        tol,
        passed: max_excess <= tol,
    })
}

/// Perturbation families `(F_n, h_n) → (F, h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityFamily {
    /// `h_n = h + 1/n`.
    TerminalShift,
    /// `ℓ_n = ℓ(1 + 1/n)`.
    ScaledRunning,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityRow {
    pub n: usize,
    pub max_gap: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub family: StabilityFamily,
    /// `κ_s` in `|v_n − v| ≤ κ_s/n`.
    pub kappa_s: f64,
    /// `(T − t₀)·max|ℓ|` over the enumerated rollouts, for reference.
    pub crude_kappa: f64,
    pub rows: Vec<StabilityRow>,
    pub monotone: bool,
    pub tol: f64,
    pub passed: bool,
}

/// Sweeps `n ∈ ns`, comparing `v_n` with `v` on the given states `(t₀, x)`.
///
/// For the scaled family `κ_s = max_{states, a} |∫ℓ|`, the exact bound on
/// `|J_n(a) − J(a)|·n` over the enumerated schedules.
pub fn stability_sweep(
    problem: &ControlProblem,
    family: StabilityFamily,
    states: &[(usize, Path)],
    ns: &[usize],
    tol: f64,
) -> Result<StabilityReport> {
    let mode = problem.default_mode();
    let base: Vec<f64> = states
        .par_iter()
        .map(|(t, x)| problem.value(*t, x))
        .collect::<Result<_>>()?;
    let (kappa_s, crude_kappa) = match family {
        StabilityFamily::TerminalShift => (1.0, 1.0),
        StabilityFamily::ScaledRunning => {
            let mut zero_h = problem.clone();
            zero_h.spec.terminal.clear();
            zero_h.terminal_shift = 0.0;
            let mut k: f64 = 0.0;
            let mut crude: f64 = 0.0;
            for (t, x) in states {
                let intervals = zero_h.control_bounds(*t).len() - 1;
                let nq = if mode == TreeMode::Bellman {
                    1
                } else {
                    zero_h.q_set.len()
                };
                for s in all_schedules(zero_h.p_set.len(), nq, intervals) {
                    let (path, j) = zero_h.rollout_with_cost(*t, x, &s)?;
                    k = k.max(j.abs());
                    let bounds = zero_h.control_bounds(*t);
                    let mut lmax: f64 = 0.0;
                    for (w, c) in bounds.windows(2).zip(&s) {
                        for i in w[0]..w[1] {
                            let (p, q) = (zero_h.p_set[c.0], zero_h.q_set[c.1]);
                            lmax = lmax.max(zero_h.running_cost(&path.history(i), p, q).abs());
                        }
                    }
                    let span = zero_h.grid().horizon() - zero_h.grid().node(*t);
                    crude = crude.max(span * lmax);
                }
            }
            (k, crude)
        }
    };
    let mut rows = Vec::new();
    for &n in ns {
        let pn = match family {
            StabilityFamily::TerminalShift => problem.with_terminal_shift(1.0 / n as f64),
            StabilityFamily::ScaledRunning => problem.with_running_scale(1.0 + 1.0 / n as f64),
        };
        let vals: Vec<f64> = states
            .par_iter()
            .map(|(t, x)| pn.value(*t, x))
            .collect::<Result<_>>()?;
        let max_gap = vals
            .iter()
            .zip(&base)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        rows.push(StabilityRow {
            n,
            max_gap,
            bound: kappa_s / n as f64,
        });
    }
    let monotone = rows.windows(2).all(|w| w[1].max_gap <= w[0].max_gap + tol);
    let passed = monotone && rows.iter().all(|r| r.max_gap <= r.bound + tol);
    Ok(StabilityReport {
        family,
        kappa_s,
        crude_kappa,
        rows,
        monotone,
        tol,
        passed,
    })
}
