//! Verification suites, looked up by name. Each suite builds everything it
//! needs from the experiment config and returns pass/fail checks plus
//! plot-ready tables; suites share no state.

use crate::chainrule::{
    check_chain_rule, check_derivative_limits, check_parts, forced_path, FunctionalRegistry, Ladder,
};
use crate::config::ExperimentConfig;
use crate::control::{check_dpp, check_value_regularity, ControlProblem, ProblemSpec, RegularityCase, TreeMode};
use crate::error::{LabError, Result};
use crate::evolution::{apriori_constants, solve_ivp, verify_continuous_dependence, ConstantForcing};
use crate::game::{
    check_guarantee, check_nu_derivatives, guaranteed_result, tree_game_values, ConstantStrategy,
    ExtremalShift, FeedbackStrategy, Partition, Penalty, Player,
};
use crate::gelfand::{
    check_coercivity_boundedness, check_monotonicity, zero_operator_counterexample, OperatorRegistry,
    ZeroOperator,
};
use crate::hamiltonian::{check_isaacs, coupled_bilinear_counterexample, HamiltonianSpec};
use crate::minimax::{
    certification_bundle, check_infinitesimal, check_minimax, empirical_comparison, stability_sweep,
    tol_mm, z_samples, CandidateContext, CandidateRegistry, Shifted, StabilityFamily, TreeValue,
};
use crate::pathspace::{check_equiv_pseudometrics, fmt_f64, sample_bundle, Path, TimeGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Debug;
use std::io::Write;
use std::sync::Arc;

/// One assertion of a suite. Checks with `required = false` are reported
/// but do not decide the outcome.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub required: bool,
    pub detail: serde_json::Value,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Serialize) -> Result<Self> {
        Ok(Check {
            name: name.to_string(),
            passed,
            required: true,
            detail: serde_json::to_value(detail)?,
        })
    }

    pub fn informational(name: &str, passed: bool, detail: impl Serialize) -> Result<Self> {
        Ok(Check {
            required: false,
            ..Self::new(name, passed, detail)?
        })
    }
}

/// Long-format table written as CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn f(v: f64) -> String {
    fmt_f64(v)
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteOutcome {
    pub suite: String,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl SuiteOutcome {
    fn new(suite: &str) -> Self {
        SuiteOutcome {
            suite: suite.to_string(),
            checks: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().filter(|c| c.required).all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Inputs shared by all suites.
#[derive(Debug, Clone)]
pub struct SuiteContext {
    pub config: ExperimentConfig,
    /// Overrides `verification.candidate`.
    pub candidate: Option<String>,
}

impl SuiteContext {
    pub fn new(config: ExperimentConfig) -> Self {
        SuiteContext {
            config,
            candidate: None,
        }
    }

    fn candidate(&self) -> &str {
        self.candidate
            .as_deref()
            .unwrap_or(&self.config.verification.candidate)
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.config.seed);
        r.set_stream(stream);
        r
    }
}

pub trait Suite: Debug + Send + Sync {
    fn name(&self) -> &'static str;

    fn summary(&self) -> &'static str;

    fn run(&self, ctx: &SuiteContext) -> Result<SuiteOutcome>;
}

fn uniform_vectors(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

/// Monotonicity, coercivity and growth of the configured operator, and the
/// non-compactness family of the zero operator.
#[derive(Debug, Clone, Copy)]
pub struct OperatorsSuite;

/// Sampled pairs and vectors for operator checks.
pub const OPERATOR_SAMPLES: usize = 100;

impl Suite for OperatorsSuite {
    fn name(&self) -> &'static str {
        "operators"
    }

    fn summary(&self) -> &'static str {
        "monotonicity, coercivity and boundedness of A; zero-operator counterexample"
    }

    fn run(&self, ctx: &SuiteContext) -> Result<SuiteOutcome> {
        let cfg = &ctx.config;
        let disc = cfg.discretization()?;
        let op = OperatorRegistry::builtin().build(&cfg.operator)?;
        let mut rng = ctx.rng(1);
        let n = disc.n();
        let flat = uniform_vectors(&mut rng, n, 2 * OPERATOR_SAMPLES);
        let pairs: Vec<(Vec<f64>, Vec<f64>)> =
            flat.chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect();
        let samples = uniform_vectors(&mut rng, n, OPERATOR_SAMPLES);
        let mut out = SuiteOutcome::new(self.name());
        let mut table = Table::new(
            "operator_checks",
            &["operator", "check", "declared", "measured", "slack", "passed"],
        );

        let mono = check_monotonicity(&disc, op.as_ref(), 0.0, &pairs)?;
        table.push(vec![
            mono.operator.clone(),
            "monotonicity".into(),
            f(0.0),
            f(mono.min_pairing),
            f(mono.min_pairing),
            mono.passed.to_string(),
        ]);
        out.checks.push(Check::new("monotonicity", mono.passed, &mono)?);

        let coer = check_coercivity_boundedness(&disc, op.as_ref(), 0.0, &samples)?;
        table.push(vec![
            coer.operator.clone(),
            "coercivity".into(),
            f(coer.declared.c2),
            f(coer.measured_c2),
            f(coer.coercivity_slack),
            coer.coercive.to_string(),
        ]);
        table.push(vec![
            coer.operator.clone(),
            "boundedness".into(),
            f(coer.declared.c1),
            f(coer.measured_c1),
            f(coer.boundedness_slack),
            coer.bounded.to_string(),
        ]);
        out.checks
            .push(Check::new("coercivity-boundedness", coer.passed(), &coer)?);

        let zero = check_coercivity_boundedness(&disc, &ZeroOperator, 0.0, &samples)?;
        table.push(vec![
            zero.operator.clone(),
            "coercivity".into(),
            f(zero.declared.c2),
            f(zero.measured_c2),
            f(zero.coercivity_slack),
            zero.coercive.to_string(),
        ]);
        out.checks
            .push(Check::new("zero-operator-not-coercive", !zero.coercive, &zero)?);

        let modes: Vec<usize> = (0..)
            .map(|j| 1usize << j)
            .take_while(|k| 2 * k <= n)
            .collect();
        let rows = zero_operator_counterexample(n, cfg.grid.dt, &modes)?;
        let unit = rows.iter().all(|r| (r.h_norm_at_one - 1.0).abs() < 1e-10);
        let vanishing = rows
            .windows(2)
            .all(|w| w[1].test_inner.abs() < w[0].test_inner.abs());
        let mut ce = Table::new(
            "counterexample",
            &["k", "h_norm_at_one", "v_norm_at_one", "l2v_norm", "test_inner"],
        );
        for r in &rows {
            ce.push(vec![
                r.k.to_string(),
                f(r.h_norm_at_one),
                f(r.v_norm_at_one),
                f(r.l2v_norm),
                f(r.test_inner),
            ]);
        }
        out.checks.push(Check::new(
            "zero-operator-counterexample",
            unit && vanishing,
            &rows,
        )?);
        out.tables.push(table);
        out.tables.push(ce);
        Ok(out)
    }
}

/// Refinement ladder of the calculus checks.
pub const CALCULUS_STEPS: [f64; 3] = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];

/// Integration by parts, the functional chain rule and the path-derivative
/// limits on forced solutions of the configured equation.
#[derive(Debug, Clone, Copy)]
pub struct CalculusSuite;

impl CalculusSuite {
    fn pieces(disc: &crate::gelfand::GelfandDiscretization, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let k = 3.min(disc.n());
        (0..4)
            .map(|_| {
                let mut g = vec![0.0; disc.n()];
                for m in 1..=k {
                    let c: f64 = rng.gen_range(-1.0..1.0);
                    for (gi, e) in g.iter_mut().zip(disc.basis_vector(m)) {
                        *gi += c * e;
                    }
                }
                g
            })
            .collect()
    }
}

impl Suite for CalculusSuite {
    fn name(&self) -> &'static str {
        "calculus"
    }

    fn summary(&self) -> &'static str {
        "integration by parts, functional chain rule and path-derivative limits with Δt ladders"
    }

    fn run(&self, ctx: &SuiteContext) -> Result<SuiteOutcome> {
        let cfg = &ctx.config;
        let disc = cfg.discretization()?;
        let op = OperatorRegistry::builtin().build(&cfg.operator)?;
        let op = op.as_ref();
        let horizon = cfg.grid.horizon;
        let mut rng = ctx.rng(2);
        let px = Self::pieces(&disc, &mut rng);
        let py = Self::pieces(&disc, &mut rng);
        let x0 = disc.basis_vector(1);
        let y0: Vec<f64> = disc.basis_vector(2.min(disc.n())).iter().map(|v| 0.5 * v).collect();
        let mut out = SuiteOutcome::new(self.name());
        let mut table = Table::new("calculus_ladders", &["check", "functional", "dt", "residual"]);
        let record = |table: &mut Table, check: &str, functional: &str, l: &Ladder| {
            for (dt, r) in l.steps.iter().zip(&l.residuals) {
                table.push(vec![check.into(), functional.into(), f(*dt), f(*r)]);
            }
        };

        let parts = Ladder::run(&CALCULUS_STEPS, |dt| {
            let g = TimeGrid::new(dt, horizon)?;
            let x = forced_path(&disc, op, g, &x0, &px)?;
            let y = forced_path(&disc, op, g, &y0, &py)?;
            Ok(check_parts(&disc, op, &x, &y, 0, g.steps())?.residual)
        })?;
        record(&mut table, "parts", "", &parts);
        out.checks.push(Check::new("parts-order", parts.passed, &parts)?);

        // y frozen at a state with forcing A(y): the identity is the
        // fundamental theorem of calculus for (x(·), y)
        let g = TimeGrid::new(CALCULUS_STEPS[2], horizon)?;
        let ay = op.apply(&disc, 0.0, &y0);
        let y_const = solve_ivp(
            &disc,
            op,
            &Path::constant(g, disc.h(), y0.clone()),
            0,
            &ConstantForcing(ay),
        )?;
        let x = forced_path(&disc, op, g, &x0, &px)?;
        let ftc = check_parts(&disc, op, &x, &y_const, 0, g.steps())?;
        let ftc_ok = ftc.residual <= 1e-8 * (1.0 + ftc.lhs.abs());
        out.checks.push(Check::new("parts-constant-y", ftc_ok, &ftc)?);

        let functionals = FunctionalRegistry::builtin();
        let mut limits = Table::new(
            "derivative_limits",
            &["functional", "step", "dt_error", "max_error"],
        );
        for name in functionals.names() {
            let phi = functionals.build(name, &disc)?;
            let chain = Ladder::run(&CALCULUS_STEPS, |dt| {
                let g = TimeGrid::new(dt, horizon)?;
                let x = forced_path(&disc, op, g, &x0, &px)?;
                Ok(check_chain_rule(&disc, op, phi.as_ref(), &x, 0, g.steps())?.residual)
            })?;
            record(&mut table, "chain-rule", name, &chain);
            out.checks
                .push(Check::new(&format!("chain-rule-order:{name}"), chain.passed, &chain)?);

            let lim = check_derivative_limits(&disc, phi.as_ref(), &x, g.steps() / 4, 3)?;
            for r in &lim.rows {
                limits.push(vec![name.into(), f(r.step), f(r.dt_error), f(r.max_error)]);
            }
            out.checks
                .push(Check::new(&format!("derivative-limits:{name}"), lim.passed, &lim)?);
        }
        out.tables.push(table);
        out.tables.push(limits);
        Ok(out)
    }
}

fn random_schedule(rng: &mut ChaCha8Rng, problem: &ControlProblem) -> Vec<(usize, usize)> {
    (0..problem.control_intervals())
        .map(|_| {
            (
                rng.gen_range(0..problem.p_set.len()),
                rng.gen_range(0..problem.q_set.len()),
            )
        })
        .collect()
}

/// A-priori bounds on bundles, continuous dependence, the dynamic
/// programming identity and value regularity.
#[derive(Debug, Clone, Copy)]
pub struct ControlSuite;

impl ControlSuite {
    /// `f = L_f x(t)`, no operator: the dependence bound is attained up to
    /// the time discretization.
    pub fn saturating_problem(cfg: &ExperimentConfig) -> Result<ControlProblem> {
        let spec = ProblemSpec {
            dynamics: vec![crate::control::DynamicsTerm::StateGain { gain: cfg.problem.lf }],
            running: vec![],
            terminal: vec![],
            p_set: vec![0.0],
            q_set: vec![0.0],
            lf: cfg.problem.lf,
            control_intervals: cfg.problem.control_intervals,
            initial: cfg.problem.initial.clone(),
        };
        ControlProblem::new(cfg.discretization()?, Arc::new(ZeroOperator), cfg.time_grid()?, spec)
    }
}

impl Suite for ControlSuite {
    fn name(&self) -> &'static str {
        "control"
    }

    fn summary(&self) -> &'static str {
        "a-priori bound, continuous dependence, dynamic programming and value regularity"
    }

    fn run(&self, ctx: &SuiteContext) -> Result<SuiteOutcome> {
        let cfg = &ctx.config;
        let problem = cfg.build_problem()?;
        let x0 = problem.initial_path();
        let tol = cfg.tol_disc();
        let spec = cfg.bundle_spec();
        let mode = problem.default_mode();
        let mut rng = ctx.rng(3);
        let mut out = SuiteOutcome::new(self.name());

        let sampled = sample_bundle(&problem.disc, problem.op.as_ref(), 0.0, &x0, spec)?;
        let certified = certification_bundle(&problem, 0, &x0, spec, mode)?;
        let c = apriori_constants(&problem.disc, problem.op.as_ref(), 0.0, &x0, spec.l, cfg.grid.horizon)?;
        let mut apriori = Table::new("apriori", &["bundle", "member", "sup_norm", "c2"]);
        let mut violations = 0;
        for (label, b) in [("sampled", &sampled), ("certification", &certified)] {
            for (m, x) in b.members.iter().enumerate() {
                if x.sup_norm() > c.c2 {
                    violations += 1;
                }
                apriori.push(vec![label.into(), m.to_string(), f(x.sup_norm()), f(c.c2)]);
            }
        }
        out.checks.push(Check::new(
            "apriori-bound",
            violations == 0,
            serde_json::json!({ "constants": c, "violations": violations }),
        )?);
        let excess = sampled.admissibility_excess();
        out.checks
            .push(Check::new("bundle-admissible", excess <= 1e-12, serde_json::json!({ "excess": excess }))?);
        let pm = check_equiv_pseudometrics(
            &problem.disc,
            problem.op.as_ref(),
            &sampled,
            &x0,
            cfg.grid.horizon,
        )?;
        out.checks.push(Check::new("equivalent-pseudometrics", pm.passed, &pm)?);

        let mut dep = Table::new(
            "continuous_dependence",
            &["pair", "initial_gap", "max_excess", "final_slack"],
        );
        let mut dep_ok = true;
        let mut worst = f64::NEG_INFINITY;
        let n = problem.disc.n();
        for pair in 0..cfg.verification.samples {
            let radius: f64 = rng.gen_range(0.0..0.5);
            let mut d = uniform_vectors(&mut rng, n, 1).remove(0);
            let dn = problem.disc.norm_h(&d).max(1e-300);
            d.iter_mut().for_each(|v| *v *= radius / dn);
            let y: Vec<f64> = problem.initial_state().iter().zip(&d).map(|(a, b)| a + b).collect();
            let y0 = Path::constant(problem.grid(), problem.disc.h(), y);
            let sched = random_schedule(&mut rng, &problem);
            let r = verify_continuous_dependence(&problem, 0, &x0, &y0, &sched, tol)?;
            dep_ok &= r.passed;
            worst = worst.max(r.max_excess);
            dep.push(vec![
                pair.to_string(),
                f(r.initial_gap),
                f(r.max_excess),
                f(r.final_slack),
            ]);
        }
        out.checks.push(Check::new(
            "continuous-dependence",
            dep_ok,
            serde_json::json!({ "pairs": cfg.verification.samples, "max_excess": worst, "tol": tol }),
        )?);

        let sat = Self::saturating_problem(cfg)?;
        let sx = sat.initial_path();
        let shift: Vec<f64> = sat
            .initial_state()
            .iter()
            .zip(sat.disc.basis_vector(1))
            .map(|(a, e)| a + 0.5 * e)
            .collect();
        let sy = Path::constant(sat.grid(), sat.disc.h(), shift);
        let sched = vec![(0, 0); sat.control_intervals()];
        let sr = verify_continuous_dependence(&sat, 0, &sx, &sy, &sched, tol)?;
        let tight = sr.passed && sr.final_slack.abs() <= 3.0 * tol;
        out.checks.push(Check::new("dependence-saturating-tight", tight, &sr)?);

        let bounds = problem.control_bounds(0);
        let mut dpp_ok = true;
        let mut dpp = Table::new("dpp", &["t", "value", "dpp_value", "diff"]);
        let mut dpp_reports = Vec::new();
        for &t in &bounds[1..bounds.len() - 1] {
            let r = check_dpp(&problem, 0, &x0, t, mode)?;
            dpp_ok &= r.passed;
            dpp.push(vec![f(r.t), f(r.value), f(r.dpp_value), f(r.diff)]);
            dpp_reports.push(r);
        }
        out.checks.push(Check::new("dpp", dpp_ok, &dpp_reports)?);

        let k = bounds.len() - 1;
        let cases: Vec<RegularityCase> = (0..cfg.verification.samples)
            .map(|_| {
                let a = rng.gen_range(0..sampled.len());
                let b = rng.gen_range(0..sampled.len());
                let j = rng.gen_range(0..k);
                RegularityCase {
                    t0_index: bounds[j],
                    t1_index: bounds[j + 1],
                    x0: sampled.members[a].clone(),
                    y0: sampled.members[b].clone(),
                }
            })
            .collect();
        let reg = check_value_regularity(&problem, &cases, spec.l, tol)?;
        let mut regt = Table::new(
            "value_regularity",
            &["t0", "t1", "space_gap", "space_bound", "time_gap", "time_bound"],
        );
        for r in &reg.rows {
            regt.push(vec![
                f(r.t0),
                f(r.t1),
                f(r.space_gap),
                f(r.space_bound),
                f(r.time_gap),
                f(r.time_bound),
            ]);
        }
        out.checks.push(Check::new(
            "value-regularity",
            reg.passed,
            serde_json::json!({
                "space_constant": reg.space_constant,
                "time_constant": reg.time_constant,
                "max_space_ratio": reg.max_space_ratio,
                "max_time_ratio": reg.max_time_ratio,
                "tol": reg.tol,
            }),
        )?);
        out.tables.extend([apriori, dep, dpp, regt]);
        Ok(out)
    }
}

/// Minimax super/subsolution certification of a candidate, the shifted
/// candidates, comparison and stability.
#[derive(Debug, Clone, Copy)]
pub struct MinimaxSuite;

impl Suite for MinimaxSuite {
    fn name(&self) -> &'static str {
        "minimax"
    }

    fn summary(&self) -> &'static str {
        "minimax inequalities on a certification bundle, shifted candidates, comparison and stability"
    }

    fn run(&self, ctx: &SuiteContext) -> Result<SuiteOutcome> {
        let cfg = &ctx.config;
        let problem = Arc::new(cfg.build_problem()?);
        let x0 = problem.initial_path();
        let mode = problem.default_mode();
        let tol = cfg.tol_disc();
        let delta = 10.0 * tol_mm(tol, 0.0);
        let bundle = certification_bundle(&problem, 0, &x0, cfg.bundle_spec(), mode)?;
        let zs = z_samples(
            &problem.disc,
            cfg.bundle.k,
            cfg.verification.random_directions,
            cfg.seed,
        );
        let bounds = problem.control_bounds(0);
        let ts = &bounds[..bounds.len() - 1];
        let hspec = HamiltonianSpec::natural(&problem);
        let cctx = CandidateContext {
            problem: problem.clone(),
            shift: delta,
            constant: 0.0,
            slope: 0.0,
        };
        let name = ctx.candidate();
        let u = CandidateRegistry::builtin().build(name, &cctx)?;
        let mut out = SuiteOutcome::new(self.name());
        let mut table = Table::new(
            "minimax",
            &["candidate", "side", "z_index", "z_norm", "t", "best_slack", "tol", "passed"],
        );

        let (sup, sub) = check_minimax(u.as_ref(), &hspec, &bundle, &zs, ts, tol)?;
        for rep in [&sup, &sub] {
            for r in &rep.rows {
                table.push(vec![
                    rep.candidate.clone(),
                    format!("{:?}", rep.side).to_lowercase(),
                    r.z_index.to_string(),
                    f(r.z_norm),
                    f(r.t),
                    f(r.best_slack),
                    f(r.tol),
                    r.passed.to_string(),
                ]);
            }
        }
        out.checks.push(Check::new("supersolution", sup.passed, &sup)?);
        out.checks.push(Check::new("subsolution", sub.passed, &sub)?);
        // whole control intervals: the tree value obeys the DPP only on the control grid
        let spi = problem.steps_per_interval();
        let deltas: Vec<usize> = [1, 2]
            .into_iter()
            .map(|j| j * spi)
            .filter(|&d| d <= problem.grid().steps())
            .collect();
        let inf = check_infinitesimal(u.as_ref(), &hspec, &bundle, &zs, &deltas, tol)?;
        out.checks.push(Check::new(
            "infinitesimal",
            inf.super_passed && inf.sub_passed,
            &inf,
        )?);

        if name == "bellman-value" {
            let base: Arc<dyn crate::minimax::CandidateFunctional> =
                Arc::new(TreeValue::new(problem.clone(), mode));
            let up = Shifted {
                inner: base.clone(),
                delta,
            };
            let down = Shifted {
                inner: base.clone(),
                delta: -delta,
            };
            let (up_sup, up_sub) = check_minimax(&up, &hspec, &bundle, &zs, ts, tol)?;
            let (dn_sup, dn_sub) = check_minimax(&down, &hspec, &bundle, &zs, ts, tol)?;
            let predicted = up_sup.passed
                && !up_sub.terminal_passed
                && up_sub.inequality_passed
                && dn_sub.passed
                && !dn_sup.terminal_passed
                && dn_sup.inequality_passed;
            out.checks.push(Check::new(
                "shifted-candidates",
                predicted,
                serde_json::json!({
                    "delta": delta,
                    "plus": { "super": up_sup.passed, "sub_terminal": up_sub.terminal_passed, "sub_inequality": up_sub.inequality_passed },
                    "minus": { "sub": dn_sub.passed, "super_terminal": dn_sup.terminal_passed, "super_inequality": dn_sup.inequality_passed },
                }),
            )?);

            let raised = Arc::new(problem.with_terminal_shift(delta));
            let hi = TreeValue::new(raised, mode);
            let cmp = empirical_comparison(base.as_ref(), &hi, &bundle, ts, 1e-12)?;
            out.checks.push(Check::new("comparison", cmp.passed, &cmp)?);

            let t_mid = bounds[(bounds.len() - 1) / 2];
            let states: Vec<(usize, Path)> = std::iter::once((0, x0.clone()))
                .chain(bundle.members.iter().take(4).map(|m| (t_mid, m.clone())))
                .collect();
            let mut st = Table::new("stability", &["family", "n", "max_gap", "bound"]);
            for family in [StabilityFamily::TerminalShift, StabilityFamily::ScaledRunning] {
                let r = stability_sweep(&problem, family, &states, &cfg.verification.stability_ns, 1e-12)?;
                for row in &r.rows {
                    st.push(vec![
                        format!("{family:?}"),
                        row.n.to_string(),
                        f(row.max_gap),
                        f(row.bound),
                    ]);
                }
                let exact = match family {
                    StabilityFamily::TerminalShift => r
                        .rows
                        .iter()
                        .all(|row| (row.max_gap - row.bound).abs() <= 1e-10),
                    StabilityFamily::ScaledRunning => true,
                };
                out.checks.push(Check::new(
                    &format!("stability:{}", serde_json::to_value(family)?.as_str().unwrap_or("")),
                    r.passed && exact,
                    &r,
                )?);
            }
            out.tables.push(st);
        }
        out.tables.insert(0, table);
        Ok(out)
    }
}

/// Isaacs condition, guaranteed results against tree values, and the
/// extremal-shift ladder.
#[derive(Debug, Clone, Copy)]
pub struct GameSuite;

impl Suite for GameSuite {
    fn name(&self) -> &'static str {
        "game"
    }

    fn summary(&self) -> &'static str {
        "Isaacs condition, J_b ≤ tree value ≤ J_a, extremal-shift ladder and ν^ε derivatives"
    }

    fn run(&self, ctx: &SuiteContext) -> Result<SuiteOutcome> {
        let cfg = &ctx.config;
        let problem = Arc::new(cfg.build_problem()?);
        let x0 = problem.initial_path();
        let grid = problem.grid();
        let ladder: Vec<(f64, usize)> = cfg
            .verification
            .ladder
            .iter()
            .map(|s| (s.eps, s.intervals))
            .collect();
        let eps0 = (-2.0 * problem.lf * grid.horizon()).exp();
        if let Some(&(eps, _)) = ladder.iter().find(|(e, _)| *e >= eps0) {
            return Err(LabError::Config(format!(
                "ladder eps {eps} is not below e^(-2 L_f T) = {eps0}"
            )));
        }
        let bundle = certification_bundle(&problem, 0, &x0, cfg.bundle_spec(), TreeMode::Upper)?;
        let mut out = SuiteOutcome::new(self.name());

        let zs = z_samples(&problem.disc, cfg.bundle.k, cfg.verification.random_directions, cfg.seed);
        let bounds = problem.control_bounds(0);
        let mut samples = Vec::new();
        for m in &bundle.members {
            for &t in &bounds {
                for z in &zs {
                    samples.push((m.history(t), z.clone()));
                }
            }
        }
        let isaacs = check_isaacs(&problem, &samples)?;
        out.checks.push(Check::new("isaacs", isaacs.passed, &isaacs)?);
        let coupled = coupled_bilinear_counterexample()?;
        out.checks.push(Check::new(
            "coupled-counterexample",
            (coupled.max_gap - 2.0).abs() < 1e-12,
            &coupled,
        )?);

        let u = TreeValue::new(problem.clone(), TreeMode::Upper);
        let mut bracket = Table::new(
            "bracket",
            &["intervals", "player", "strategy", "guaranteed", "upper", "lower"],
        );
        let mut bracket_ok = true;
        for &(eps, m) in &ladder {
            if problem.leaves(TreeMode::Upper, m) > problem.budget as u128 {
                continue;
            }
            let part = Partition::uniform(grid, 0, m)?;
            let (upper, lower) = tree_game_values(&problem, &x0, &part)?;
            bracket_ok &= lower <= upper + 1e-12;
            let mut strategies: Vec<Box<dyn FeedbackStrategy + '_>> = Vec::new();
            for p in 0..problem.p_set.len() {
                strategies.push(Box::new(ConstantStrategy {
                    player: Player::Controller,
                    index: p,
                }));
            }
            for q in 0..problem.q_set.len() {
                strategies.push(Box::new(ConstantStrategy {
                    player: Player::Disturbance,
                    index: q,
                }));
            }
            for player in [Player::Controller, Player::Disturbance] {
                strategies.push(Box::new(ExtremalShift::new(&problem, &u, &bundle, eps, &part, player)?));
            }
            for s in &strategies {
                let g = guaranteed_result(&problem, &x0, &part, s.as_ref())?;
                bracket_ok &= match s.player() {
                    Player::Controller => upper <= g.value + 1e-12,
                    Player::Disturbance => g.value <= lower + 1e-12,
                };
                bracket.push(vec![
                    m.to_string(),
                    format!("{:?}", s.player()).to_lowercase(),
                    s.name(),
                    f(g.value),
                    f(upper),
                    f(lower),
                ]);
            }
        }
        out.checks.push(Check::new(
            "bracket",
            bracket_ok,
            serde_json::json!({ "rows": bracket.rows.len() }),
        )?);

        let mut gt = Table::new(
            "guarantee",
            &["player", "eps", "intervals", "u0", "guaranteed", "gap", "bound_term", "residual"],
        );
        let ctrl = check_guarantee(&problem, &x0, &u, &bundle, &ladder, Player::Controller)?;
        let cheap: Vec<(f64, usize)> = ladder
            .iter()
            .copied()
            .filter(|&(_, m)| (problem.p_set.len() as u128).pow(m as u32) <= 256)
            .collect();
        let dist = check_guarantee(&problem, &x0, &u, &bundle, &cheap, Player::Disturbance)?;
        for rep in [&ctrl, &dist] {
            for r in &rep.rows {
                gt.push(vec![
                    format!("{:?}", rep.player).to_lowercase(),
                    f(r.eps),
                    r.intervals.to_string(),
                    f(r.u0),
                    f(r.guaranteed),
                    f(r.gap),
                    f(r.bound_term),
                    f(r.residual),
                ]);
            }
        }
        out.checks.push(Check::new("extremal-shift-controller", ctrl.passed, &ctrl)?);
        out.checks
            .push(Check::informational("extremal-shift-disturbance", dist.passed, &dist)?);

        let (eps, _) = ladder.first().copied().unwrap_or((eps0 / 2.0, 1));
        let penalty = Penalty::new(eps, problem.lf, 0.0, grid.horizon())?;
        let y = &bundle.members[bundle.len() - 1];
        let dirs: Vec<Vec<f64>> = (1..=cfg.bundle.k.min(problem.disc.n()))
            .map(|k| problem.disc.basis_vector(k))
            .collect();
        let ts: Vec<usize> = (0..grid.steps()).step_by((grid.steps() / 8).max(1)).collect();
        let fd = check_nu_derivatives(&penalty, y, &ts, &dirs, 1e-5);
        out.checks.push(Check::new("nu-derivatives", fd.passed, &fd)?);
        out.tables.extend([bracket, gt]);
        Ok(out)
    }
}

/// Name → suite table.
#[derive(Debug, Clone)]
pub struct SuiteRegistry {
    suites: BTreeMap<String, Arc<dyn Suite>>,
}

impl SuiteRegistry {
    pub fn empty() -> Self {
        SuiteRegistry {
            suites: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(OperatorsSuite));
        r.register(Arc::new(CalculusSuite));
        r.register(Arc::new(ControlSuite));
        r.register(Arc::new(MinimaxSuite));
        r.register(Arc::new(GameSuite));
        r
    }

    pub fn register(&mut self, suite: Arc<dyn Suite>) {
        self.suites.insert(suite.name().to_string(), suite);
    }

    pub fn names(&self) -> Vec<&str> {
        self.suites.keys().map(String::as_str).collect()
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Suite>> {
        self.suites.get(name).cloned().ok_or_else(|| LabError::UnknownName {
            kind: "suite",
            name: name.to_string(),
        })
    }

    pub fn run(&self, name: &str, ctx: &SuiteContext) -> Result<SuiteOutcome> {
        self.get(name)?.run(ctx)
    }
}
