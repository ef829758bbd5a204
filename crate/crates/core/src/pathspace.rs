//! Time-gridded `H`-valued paths, non-anticipating history views, the
//! pseudo-metric `d_∞`, and sampled bundles standing in for `X^L(t₀,x₀)`.

use crate::error::{LabError, Result};
use crate::evolution::{apriori_constants, solve_ivp, AprioriConstants, Forcing};
use crate::gelfand::{GelfandDiscretization, MonotoneOperator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

/// Uniform grid `t_i = i·dt`, `i = 0..=steps`, on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    dt: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, horizon: f64) -> Result<Self> {
        if !(dt > 0.0) || !(horizon > 0.0) {
            return Err(LabError::InvalidArgument(format!(
                "need dt > 0 and T > 0, got dt = {dt}, T = {horizon}"
            )));
        }
        let ratio = horizon / dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) || steps < 1.0 {
            return Err(LabError::InvalidArgument(format!(
                "horizon {horizon} is not a multiple of dt = {dt}"
            )));
        }
        Ok(TimeGrid {
            dt,
            steps: steps as usize,
        })
    }

    pub fn with_steps(dt: f64, steps: usize) -> Self {
        TimeGrid { dt, steps }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Index of the grid node at time `t`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let r = t / self.dt;
        let i = r.round();
        if (r - i).abs() > 1e-9 * r.abs().max(1.0) || i < 0.0 || i > self.steps as f64 {
            return Err(LabError::OffGrid { t, dt: self.dt });
        }
        Ok(i as usize)
    }

    /// Node index `⌊(t_i − τ)/dt⌋` clamped at zero.
    pub fn delayed_index(&self, i: usize, tau: f64) -> usize {
        let r = (self.node(i) - tau) / self.dt;
        if r <= 0.0 {
            0
        } else {
            // tolerate rounding just below an integer
            (r + 1e-9).floor() as usize
        }
    }
}

/// A trajectory on the full grid, with optional per-interval forcing and
/// running aggregates kept consistent with the values.
///
/// `forcing[i]` is the constant right-hand side on `(t_i, t_{i+1}]`; it is
/// meaningful for `i ≥ forcing_from`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    grid: TimeGrid,
    h: f64,
    values: Vec<Vec<f64>>,
    forcing: Vec<Vec<f64>>,
    forcing_from: usize,
    birth: usize,
    running_sup: Vec<f64>,
    integral: Vec<Vec<f64>>,
    integral_sq: Vec<f64>,
}

impl Path {
    /// Constant path `x(t) ≡ x0`.
    pub fn constant(grid: TimeGrid, h: f64, x0: Vec<f64>) -> Self {
        let values = vec![x0; grid.steps() + 1];
        Self::from_values(grid, h, values).expect("lengths agree by construction")
    }

    pub fn from_values(grid: TimeGrid, h: f64, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != grid.steps() + 1 {
            return Err(LabError::DimensionMismatch {
                expected: grid.steps() + 1,
                got: values.len(),
            });
        }
        let n = values[0].len();
        if let Some(bad) = values.iter().find(|v| v.len() != n) {
            return Err(LabError::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        let steps = grid.steps();
        let mut p = Path {
            grid,
            h,
            values,
            forcing: vec![vec![0.0; n]; steps],
            forcing_from: steps,
            birth: 0,
            running_sup: vec![0.0; steps + 1],
            integral: vec![vec![0.0; n]; steps + 1],
            integral_sq: vec![0.0; steps + 1],
        };
        p.refresh_from(0);
        Ok(p)
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    /// Quadrature weight of the `H` inner product.
    pub fn weight(&self) -> f64 {
        self.h
    }

    pub fn birth(&self) -> usize {
        self.birth
    }

    pub fn set_birth(&mut self, i: usize) {
        self.birth = i;
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn norm_at(&self, i: usize) -> f64 {
        norm(self.h, &self.values[i])
    }

    pub fn norm_of(&self, v: &[f64]) -> f64 {
        norm(self.h, v)
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.h * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }

    /// `max_{s ≤ t_i} |x(s)|`.
    pub fn running_sup(&self, i: usize) -> f64 {
        self.running_sup[i]
    }

    /// Left-rectangle `∫₀^{t_i} x(s) ds`.
    pub fn integral(&self, i: usize) -> &[f64] {
        &self.integral[i]
    }

    /// Left-rectangle `∫₀^{t_i} |x(s)|² ds`.
    pub fn integral_sq(&self, i: usize) -> f64 {
        self.integral_sq[i]
    }

    pub fn forcing(&self, i: usize) -> Option<&[f64]> {
        (i >= self.forcing_from && i < self.grid.steps()).then(|| self.forcing[i].as_slice())
    }

    pub fn forcing_from(&self) -> usize {
        self.forcing_from
    }

    pub fn has_forcing_from(&self, i: usize) -> bool {
        self.forcing_from <= i
    }

    /// Writes node `i` and refreshes the aggregates at `i`; nodes after `i`
    /// must be rewritten in order before their aggregates are read.
    pub fn set_node(&mut self, i: usize, v: &[f64]) {
        self.values[i].copy_from_slice(v);
        self.refresh_node(i);
    }

    pub fn set_forcing(&mut self, i: usize, g: &[f64]) {
        self.forcing[i].copy_from_slice(g);
    }

    pub fn mark_forcing_from(&mut self, i: usize) {
        self.forcing_from = i;
    }

    fn refresh_node(&mut self, i: usize) {
        let nrm = norm(self.h, &self.values[i]);
        if i == 0 {
            self.running_sup[0] = nrm;
            self.integral[0].iter_mut().for_each(|v| *v = 0.0);
            self.integral_sq[0] = 0.0;
            return;
        }
        let dt = self.grid.dt();
        self.running_sup[i] = self.running_sup[i - 1].max(nrm);
        let (before, after) = self.integral.split_at_mut(i);
        for ((dst, prev), x) in after[0]
            .iter_mut()
            .zip(&before[i - 1])
            .zip(&self.values[i - 1])
        {
            *dst = prev + dt * x;
        }
        let prev_norm = norm(self.h, &self.values[i - 1]);
        self.integral_sq[i] = self.integral_sq[i - 1] + dt * prev_norm * prev_norm;
    }

    fn refresh_from(&mut self, i: usize) {
        for j in i..=self.grid.steps() {
            self.refresh_node(j);
        }
    }

    /// Non-anticipating view of the path up to node `i`.
    pub fn history(&self, i: usize) -> History<'_> {
        History { path: self, upto: i }
    }

    /// Largest `H` norm over the grid.
    pub fn sup_norm(&self) -> f64 {
        self.running_sup[self.grid.steps()]
    }

    /// The path frozen at `x(t)` after `t`. Forcing is dropped past `t`.
    pub fn stop(&self, t: f64) -> Result<Path> {
        let i = self.grid.index_of(t)?;
        Ok(self.stop_at(i))
    }

    pub fn stop_at(&self, i: usize) -> Path {
        let mut out = self.clone();
        let frozen = self.values[i].clone();
        for j in i + 1..=self.grid.steps() {
            out.values[j].copy_from_slice(&frozen);
        }
        out.refresh_from(i + 1);
        if out.forcing_from > i {
            out.forcing_from = self.grid.steps();
        }
        for j in i..self.grid.steps() {
            out.forcing[j].iter_mut().for_each(|v| *v = 0.0);
        }
        out
    }

    /// Long-format CSV: `t, x_1..x_n, f_1..f_n` (forcing blank when absent).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let n = self.dim();
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|k| format!("x{k}")));
        header.extend((1..=n).map(|k| format!("f{k}")));
        w.write_record(&header)?;
        for i in 0..=self.grid.steps() {
            let mut rec = vec![fmt_f64(self.grid.node(i))];
            rec.extend(self.values[i].iter().map(|v| fmt_f64(*v)));
            match self.forcing(i) {
                Some(f) => rec.extend(f.iter().map(|v| fmt_f64(*v))),
                None => rec.extend(std::iter::repeat_n(String::new(), n)),
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip decimal representation.
pub fn fmt_f64(v: f64) -> String {
    // negative zero prints as 0.0
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:?}")
}

fn norm(h: f64, v: &[f64]) -> f64 {
    (h * v.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

/// Read-only view of a path restricted to `[0, t_upto]`.
#[derive(Debug, Clone, Copy)]
pub struct History<'a> {
    path: &'a Path,
    upto: usize,
}

impl<'a> History<'a> {
    pub fn index(&self) -> usize {
        self.upto
    }

    pub fn time(&self) -> f64 {
        self.path.grid.node(self.upto)
    }

    pub fn grid(&self) -> TimeGrid {
        self.path.grid
    }

    pub fn weight(&self) -> f64 {
        self.path.h
    }

    pub fn current(&self) -> &'a [f64] {
        &self.path.values[self.upto]
    }

    pub fn current_norm(&self) -> f64 {
        norm(self.path.h, self.current())
    }

    /// Value at node `j ≤ upto`; later nodes are clamped to `upto`.
    pub fn at(&self, j: usize) -> &'a [f64] {
        &self.path.values[j.min(self.upto)]
    }

    /// `x((t − τ) ∨ 0)` with left-constant interpolation.
    pub fn delayed(&self, tau: f64) -> &'a [f64] {
        &self.path.values[self.path.grid.delayed_index(self.upto, tau)]
    }

    pub fn integral(&self) -> &'a [f64] {
        &self.path.integral[self.upto]
    }

    pub fn integral_sq(&self) -> f64 {
        self.path.integral_sq[self.upto]
    }

    pub fn running_sup(&self) -> f64 {
        self.path.running_sup[self.upto]
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.path.inner(a, b)
    }

    pub fn norm_of(&self, v: &[f64]) -> f64 {
        norm(self.path.h, v)
    }

    pub fn path(&self) -> &'a Path {
        self.path
    }
}

/// `d_∞((t,x),(s,y)) = |t − s| + max_r |x(r∧t) − y(r∧s)|` over grid nodes.
pub fn d_infty(t: f64, x: &Path, s: f64, y: &Path) -> Result<f64> {
    if x.grid != y.grid || x.dim() != y.dim() {
        return Err(LabError::GridMismatch);
    }
    let it = x.grid.index_of(t)?;
    let is = y.grid.index_of(s)?;
    let mut best: f64 = 0.0;
    for r in 0..=x.grid.steps() {
        let a = &x.values[r.min(it)];
        let b = &y.values[r.min(is)];
        let d = norm(x.h, &crate::gelfand::sub(a, b));
        best = best.max(d);
    }
    Ok((t - s).abs() + best)
}

/// `max_{s ≤ t_i} |x(s) − y(s)|`.
pub fn sup_gap_upto(x: &Path, y: &Path, i: usize) -> f64 {
    (0..=i)
        .map(|j| norm(x.h, &crate::gelfand::sub(&x.values[j], &y.values[j])))
        .fold(0.0, f64::max)
}

/// Admissible random forcing of a bundle member.
#[derive(Debug, Clone)]
pub enum MemberForcing {
    Zero,
    /// `s·L(1 + m(t)) e_k` with `s = ±1`.
    Extreme { mode: usize, sign: f64 },
    /// Per-interval draws `θ_i·L(1 + m(t_i)) d_i`, `d_i` on the unit sphere of
    /// the first `k` modes.
    Random { thetas: Vec<f64>, directions: Vec<Vec<f64>> },
}

struct BundleForcing<'a> {
    kind: &'a MemberForcing,
    basis: &'a [Vec<f64>],
    l: f64,
    birth: usize,
}

impl Forcing for BundleForcing<'_> {
    fn eval(&self, hist: &History<'_>) -> Vec<f64> {
        let n = hist.current().len();
        let scale = self.l * (1.0 + hist.running_sup());
        let mut g = vec![0.0; n];
        match self.kind {
            MemberForcing::Zero => {}
            MemberForcing::Extreme { mode, sign } => {
                for (gi, e) in g.iter_mut().zip(&self.basis[*mode]) {
                    *gi = sign * scale * e;
                }
            }
            MemberForcing::Random { thetas, directions } => {
                let j = hist.index() - self.birth;
                let amp = thetas[j] * scale;
                for (k, c) in directions[j].iter().enumerate() {
                    for (gi, e) in g.iter_mut().zip(&self.basis[k]) {
                        *gi += amp * c * e;
                    }
                }
            }
        }
        g
    }
}

/// Finite sample of `X^L(t₀, x₀)`.
#[derive(Debug, Clone)]
pub struct TrajectoryBundle {
    pub t0_index: usize,
    pub l: f64,
    pub seed: u64,
    pub k: usize,
    pub members: Vec<Path>,
}

impl TrajectoryBundle {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Largest `|f^x(t_i)| / (L(1 + m(t_i)))` excess over the members;
    /// non-positive means every stored forcing is admissible.
    pub fn admissibility_excess(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for m in &self.members {
            for i in self.t0_index..m.grid().steps() {
                let f = m.forcing(i).map(|f| m.norm_of(f)).unwrap_or(0.0);
                let bound = self.l * (1.0 + m.running_sup(i));
                worst = worst.max(f - bound);
            }
        }
        if worst == f64::NEG_INFINITY {
            0.0
        } else {
            worst
        }
    }

    /// `max |x(t_{i+1}) − x(t_i)| / √Δt` over members and intervals after `t₀`.
    pub fn equicontinuity_constant(&self) -> f64 {
        let mut k: f64 = 0.0;
        for m in &self.members {
            let dt = m.grid().dt();
            for i in self.t0_index..m.grid().steps() {
                let d = m.norm_of(&crate::gelfand::sub(m.value(i + 1), m.value(i)));
                k = k.max(d / dt.sqrt());
            }
        }
        k
    }
}

/// Parameters of [`sample_bundle`].
#[derive(Debug, Clone, Copy)]
pub struct BundleSpec {
    pub l: f64,
    pub size: usize,
    pub k: usize,
    pub seed: u64,
}

/// Draws the member forcings: the zero member, the `2k` extreme members
/// `±L(1+m)e_j`, then random piecewise-constant admissible forcings.
pub fn bundle_forcings(spec: BundleSpec, intervals: usize) -> Vec<MemberForcing> {
    if spec.l == 0.0 {
        return vec![MemberForcing::Zero];
    }
    let size = spec.size.max(1);
    let mut out = vec![MemberForcing::Zero];
    'det: for mode in 0..spec.k {
        for sign in [1.0, -1.0] {
            if out.len() >= size {
                break 'det;
            }
            out.push(MemberForcing::Extreme { mode, sign });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    while out.len() < size {
        let mut thetas = Vec::with_capacity(intervals);
        let mut directions = Vec::with_capacity(intervals);
        for _ in 0..intervals {
            thetas.push(rng.gen_range(0.0..=1.0));
            directions.push(unit_direction(&mut rng, spec.k));
        }
        out.push(MemberForcing::Random { thetas, directions });
    }
    out
}

fn unit_direction(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    loop {
        let d: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
        let nrm = d.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
        if nrm > 1e-12 {
            return d.into_iter().map(|v| v / nrm).collect();
        }
    }
}

/// Samples a bundle rooted at `(t₀, x₀)`; members agree with `x0_prefix`
/// on `[0, t₀]` exactly.
pub fn sample_bundle(
    disc: &GelfandDiscretization,
    op: &dyn MonotoneOperator,
    t0: f64,
    x0_prefix: &Path,
    spec: BundleSpec,
) -> Result<TrajectoryBundle> {
    let grid = x0_prefix.grid();
    let t0_index = grid.index_of(t0)?;
    let k = spec.k.clamp(1, disc.n());
    let spec = BundleSpec { k, ..spec };
    let basis: Vec<Vec<f64>> = (1..=k).map(|j| disc.basis_vector(j)).collect();
    let forcings = bundle_forcings(spec, grid.steps() - t0_index);
    let members = forcings
        .par_iter()
        .map(|kind| {
            let rhs = BundleForcing {
                kind,
                basis: &basis,
                l: spec.l,
                birth: t0_index,
            };
            solve_ivp(disc, op, x0_prefix, t0_index, &rhs)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryBundle {
        t0_index,
        l: spec.l,
        seed: spec.seed,
        k,
        members,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PseudometricReport {
    pub pairs: usize,
    pub constant_c: f64,
    /// `min (rhs − lhs)` over pairs.
    pub min_slack: f64,
    /// `max lhs / rhs` over pairs with nonzero right side.
    pub max_ratio: f64,
    pub passed: bool,
}

/// Checks `max_{s≤t}|x − y|² ≤ 2‖f^x − f^y‖_{L²}‖x − y‖_{L²} ≤ 4C‖x − y‖_{L²}`
/// on all member pairs, with integrals over `[t₀, t]`.
pub fn check_equiv_pseudometrics(
    disc: &GelfandDiscretization,
    op: &dyn MonotoneOperator,
    bundle: &TrajectoryBundle,
    x0_prefix: &Path,
    t: f64,
) -> Result<PseudometricReport> {
    let grid = x0_prefix.grid();
    let it = grid.index_of(t)?;
    let c: AprioriConstants = apriori_constants(
        disc,
        op,
        grid.node(bundle.t0_index),
        x0_prefix,
        bundle.l,
        grid.horizon(),
    )?;
    let t0 = bundle.t0_index;
    let dt = grid.dt();
    let m = &bundle.members;
    let mut min_slack = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    let mut pairs = 0;
    let mut passed = true;
    for a in 0..m.len() {
        for b in a + 1..m.len() {
            pairs += 1;
            let (x, y) = (&m[a], &m[b]);
            let lhs = sup_gap_upto(x, y, it).powi(2);
            // right-endpoint quadrature matches the implicit scheme's energy identity
            let mut l2 = 0.0;
            let mut l2f = 0.0;
            for i in t0..it {
                let dx = crate::gelfand::sub(x.value(i + 1), y.value(i + 1));
                l2 += dt * x.norm_of(&dx).powi(2);
                if let (Some(fx), Some(fy)) = (x.forcing(i), y.forcing(i)) {
                    l2f += dt * x.norm_of(&crate::gelfand::sub(fx, fy)).powi(2);
                }
            }
            let l2 = l2.sqrt();
            let mid = 2.0 * l2f.sqrt() * l2;
            let rhs = 4.0 * c.c * l2;
            let tol = 1e-9 * (1.0 + rhs);
            passed &= lhs <= mid + tol && mid <= rhs + tol;
            min_slack = min_slack.min(rhs - lhs);
            if rhs > 0.0 {
                max_ratio = max_ratio.max(lhs / rhs);
            }
        }
    }
    if pairs == 0 {
        min_slack = 0.0;
    }
    Ok(PseudometricReport {
        pairs,
        constant_c: c.c,
        min_slack,
        max_ratio,
        passed,
    })
}
