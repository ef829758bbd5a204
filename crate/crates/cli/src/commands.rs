use crate::args::Common;
use crate::artifacts::ArtifactDir;
use minimax_lab::config::ExperimentConfig;
use minimax_lab::control::{ControlProblem, TreeMode};
use minimax_lab::evolution::apriori_constants;
use minimax_lab::game::{check_guarantee, GuaranteeReport, Player};
use minimax_lab::minimax::{certification_bundle, CandidateRegistry, TreeValue};
use minimax_lab::pathspace::{fmt_f64, Path};
use minimax_lab::presets::PresetRegistry;
use minimax_lab::suites::{Check, SuiteContext, SuiteOutcome, SuiteRegistry, Table};
use minimax_lab::{LabError, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use std::path::PathBuf;
use std::sync::Arc;

/// Replies enumerated by the disturbance-side guarantee before it is skipped.
const DISTURBANCE_REPLY_CAP: u128 = 256;

/// A loaded config plus where it came from.
#[derive(Debug)]
pub struct Session {
    pub config: ExperimentConfig,
    pub preset: Option<String>,
    pub out: ArtifactDir,
}

impl Session {
    pub fn open(common: &Common) -> Result<Self> {
        let (config, preset) = match (&common.config, &common.preset) {
            (Some(path), _) => (ExperimentConfig::from_path(path)?, None),
            (None, Some(name)) => (PresetRegistry::builtin().config(name)?, Some(name.clone())),
            (None, None) => return Err(LabError::Config("either --config or --preset is required".into())),
        };
        let dir = common
            .out
            .clone()
            .or_else(|| config.output.dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out").join(&config.name));
        let out = ArtifactDir::create(dir)?;
        Ok(Session { config, preset, out })
    }

    fn manifest(&self, command: &str) -> Result<()> {
        self.out.write_manifest(command, &self.config, self.preset.as_deref())
    }
}

/// Result of a subcommand whose artifacts have been written.
#[derive(Debug)]
pub struct Status {
    pub passed: bool,
    pub lines: Vec<String>,
    /// First error raised by a suite that did not finish.
    pub error: Option<LabError>,
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct CheckLine<'a> {
    name: &'a str,
    passed: bool,
    required: bool,
}

#[derive(Debug, Serialize)]
struct SuiteLine<'a> {
    suite: &'a str,
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    checks: Vec<CheckLine<'a>>,
}

fn check_lines(checks: &[Check]) -> Vec<CheckLine<'_>> {
    checks
        .iter()
        .map(|c| CheckLine {
            name: &c.name,
            passed: c.passed,
            required: c.required,
        })
        .collect()
}

fn status_lines(suite: &str, checks: &[Check]) -> Vec<String> {
    checks
        .iter()
        .map(|c| {
            let verdict = match (c.passed, c.required) {
                (true, _) => "PASS",
                (false, true) => "FAIL",
                (false, false) => "note",
            };
            format!("{verdict:4} {suite}/{}", c.name)
        })
        .collect()
}

fn write_summary(s: &Session, command: &str, suites: &[SuiteLine<'_>]) -> Result<bool> {
    let passed = suites.iter().all(|x| x.passed);
    s.out.write_json(
        "summary.json",
        &json!({
            "command": command,
            "config": s.config.name,
            "passed": passed,
            "suites": suites,
        }),
    )?;
    Ok(passed)
}

fn nearest_zero(set: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in set.iter().enumerate() {
        if v.abs() < set[best].abs() {
            best = i;
        }
    }
    best
}

fn schedule_string(problem: &ControlProblem, s: &[(usize, usize)]) -> String {
    s.iter()
        .map(|&(p, q)| {
            if problem.is_game() {
                format!("{}:{}", fmt_f64(problem.p_set[p]), fmt_f64(problem.q_set[q]))
            } else {
                fmt_f64(problem.p_set[p])
            }
        })
        .collect::<Vec<_>>()
        .join(";")
}

pub fn solve_evolution(common: &Common, p_index: Option<usize>, q_index: Option<usize>) -> Result<Status> {
    let s = Session::open(common)?;
    s.manifest("solve-evolution")?;
    let problem = s.config.build_problem()?;
    let p = p_index.unwrap_or_else(|| nearest_zero(&problem.p_set));
    let q = q_index.unwrap_or_else(|| nearest_zero(&problem.q_set));
    let x0 = problem.initial_path();
    let schedule = vec![(p, q); problem.control_intervals()];
    let (path, cost) = problem.rollout_with_cost(0, &x0, &schedule)?;
    if s.config.output.paths {
        s.out.write_path("path.csv", &path)?;
    }
    let grid = problem.grid();
    let mut norms = Table::new("norms", &["t", "h_norm", "v_norm", "running_sup"]);
    for i in 0..=grid.steps() {
        norms.push(vec![
            fmt_f64(grid.node(i)),
            fmt_f64(path.norm_at(i)),
            fmt_f64(problem.disc.norm_v(path.value(i))),
            fmt_f64(path.running_sup(i)),
        ]);
    }
    s.out.write_table(&norms)?;

    let mut checks = Vec::new();
    if problem.op.constants(&problem.disc).c2 > 0.0 {
        let k = apriori_constants(&problem.disc, problem.op.as_ref(), 0.0, &x0, problem.lf, grid.horizon())?;
        let sup = path.sup_norm();
        checks.push(Check::new(
            "apriori-bound",
            sup <= k.c2,
            json!({ "sup_norm": sup, "c2": k.c2, "constants": k }),
        )?);
    }
    s.out.write_json(
        "evolution.json",
        &json!({
            "operator": problem.op.name(),
            "p": problem.p_set[p],
            "q": problem.q_set[q],
            "cost": cost,
            "sup_norm": path.sup_norm(),
            "final_norm": path.norm_at(grid.steps()),
            "checks": checks,
        }),
    )?;
    let lines = status_lines("solve-evolution", &checks);
    let passed = write_summary(
        &s,
        "solve-evolution",
        &[SuiteLine {
            suite: "solve-evolution",
            passed: checks.iter().all(|c| c.passed),
            error: None,
            checks: check_lines(&checks),
        }],
    )?;
    Ok(Status {
        passed,
        lines,
        error: None,
        dir: Some(s.out.root().to_path_buf()),
    })
}

pub fn value(common: &Common, t0: f64, state_id: usize, sweep: bool) -> Result<Status> {
    let s = Session::open(common)?;
    s.manifest(if sweep { "value --sweep" } else { "value" })?;
    let problem = s.config.build_problem()?;
    let mode = problem.default_mode();
    let grid = problem.grid();
    let x0 = problem.initial_path();
    let bundle = certification_bundle(&problem, 0, &x0, s.config.bundle_spec(), mode)?;
    let state = |id: usize| -> Result<&Path> {
        match id {
            0 => Ok(&x0),
            k => bundle.members.get(k - 1).ok_or_else(|| {
                LabError::InvalidArgument(format!(
                    "state id {k} exceeds the {} bundle members",
                    bundle.len()
                ))
            }),
        }
    };
    let mut lines = Vec::new();
    if sweep {
        let times = problem.control_bounds(0);
        let cases: Vec<(usize, usize)> = (0..=bundle.len())
            .flat_map(|id| times.iter().map(move |&t| (id, t)))
            .collect();
        let rows: Vec<Vec<String>> = cases
            .par_iter()
            .map(|&(id, t)| {
                let x = state(id)?.stop_at(t);
                let rec = problem.brute_force_value(t, &x, mode)?;
                Ok(vec![
                    id.to_string(),
                    fmt_f64(grid.node(t)),
                    fmt_f64(rec.value),
                    schedule_string(&problem, &rec.argmin),
                ])
            })
            .collect::<Result<_>>()?;
        let mut table = Table::new("values", &["state_id", "t0", "value", "argmin"]);
        for r in rows {
            table.push(r);
        }
        lines.push(format!("swept {} states at {} times", bundle.len() + 1, times.len()));
        s.out.write_table(&table)?;
    } else {
        let i0 = grid.index_of(t0)?;
        let x = state(state_id)?.stop_at(i0);
        let rec = problem.brute_force_value(i0, &x, mode)?;
        let argmin: Vec<_> = rec
            .argmin
            .iter()
            .map(|&(p, q)| json!({ "p": problem.p_set[p], "q": problem.q_set[q] }))
            .collect();
        s.out.write_json(
            "value.json",
            &json!({
                "t0": grid.node(i0),
                "state_id": state_id,
                "mode": format!("{mode:?}").to_lowercase(),
                "value": rec.value,
                "argmin": argmin,
                "argmin_indices": rec.argmin,
            }),
        )?;
        if s.config.output.paths {
            let opt = problem.rollout(i0, &x, &rec.argmin)?;
            s.out.write_path("argmin_path.csv", &opt)?;
        }
        lines.push(format!("value {} at t0 = {}", fmt_f64(rec.value), fmt_f64(grid.node(i0))));
    }
    let passed = write_summary(
        &s,
        "value",
        &[SuiteLine {
            suite: "value",
            passed: true,
            error: None,
            checks: Vec::new(),
        }],
    )?;
    Ok(Status {
        passed,
        lines,
        error: None,
        dir: Some(s.out.root().to_path_buf()),
    })
}

/// `(ε, m)` rungs and whether they form one refinement chain.
fn game_ladder(cfg: &ExperimentConfig, eps: &[f64], parts: &[usize]) -> (Vec<(f64, usize)>, bool) {
    match (eps.is_empty(), parts.is_empty()) {
        (true, true) => (
            cfg.verification.ladder.iter().map(|r| (r.eps, r.intervals)).collect(),
            true,
        ),
        _ => {
            let eps = if eps.is_empty() {
                cfg.verification.ladder.iter().map(|r| r.eps).collect()
            } else {
                eps.to_vec()
            };
            let parts = if parts.is_empty() {
                vec![cfg.problem.control_intervals]
            } else {
                parts.to_vec()
            };
            if eps.len() == parts.len() {
                (eps.into_iter().zip(parts).collect(), true)
            } else {
                let rungs = eps.iter().flat_map(|&e| parts.iter().map(move |&m| (e, m))).collect();
                (rungs, false)
            }
        }
    }
}

pub fn game(common: &Common, eps: &[f64], parts: &[usize]) -> Result<Status> {
    let s = Session::open(common)?;
    s.manifest("game")?;
    let problem = Arc::new(s.config.build_problem()?);
    let (ladder, chain) = game_ladder(&s.config, eps, parts);
    let x0 = problem.initial_path();
    let bundle = certification_bundle(&problem, 0, &x0, s.config.bundle_spec(), TreeMode::Upper)?;
    let u = TreeValue::new(problem.clone(), TreeMode::Upper);
    let ctrl = check_guarantee(&problem, &x0, &u, &bundle, &ladder, Player::Controller)?;
    let cheap: Vec<(f64, usize)> = ladder
        .iter()
        .copied()
        .filter(|&(_, m)| (problem.p_set.len() as u128).pow(m as u32) <= DISTURBANCE_REPLY_CAP)
        .collect();
    let dist = check_guarantee(&problem, &x0, &u, &bundle, &cheap, Player::Disturbance)?;

    let mut table = Table::new(
        "game_ladder",
        &[
            "eps", "intervals", "mesh", "value", "j_a", "j_b", "gap_a", "gap_b", "bound_term", "residual_a",
            "residual_b", "upper_tree", "lower_tree",
        ],
    );
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for r in &ctrl.rows {
        let b = dist.rows.iter().find(|d| d.eps == r.eps && d.intervals == r.intervals);
        table.push(vec![
            fmt_f64(r.eps),
            r.intervals.to_string(),
            fmt_f64(r.mesh),
            fmt_f64(r.u0),
            fmt_f64(r.guaranteed),
            opt(b.map(|b| b.guaranteed)),
            fmt_f64(r.gap),
            opt(b.map(|b| b.gap)),
            fmt_f64(r.bound_term),
            fmt_f64(r.residual),
            opt(b.map(|b| b.residual)),
            opt(r.upper_tree),
            opt(r.lower_tree),
        ]);
    }
    s.out.write_table(&table)?;
    s.out.write_json("game.json", &json!({ "controller": ctrl, "disturbance": dist }))?;

    let bracket = |name: &str, rep: &GuaranteeReport| Check::new(name, rep.bracket_passed, json!({ "rows": rep.rows.len() }));
    let monotone = json!({ "residuals": ctrl.rows.iter().map(|r| r.residual).collect::<Vec<_>>() });
    let checks = vec![
        bracket("bracket-controller", &ctrl)?,
        bracket("bracket-disturbance", &dist)?,
        if chain {
            Check::new("residual-decreasing", ctrl.monotone, monotone)?
        } else {
            Check::informational("residual-decreasing", ctrl.monotone, monotone)?
        },
    ];
    let lines = status_lines("game", &checks);
    let passed = write_summary(
        &s,
        "game",
        &[SuiteLine {
            suite: "game",
            passed: checks.iter().filter(|c| c.required).all(|c| c.passed),
            error: None,
            checks: check_lines(&checks),
        }],
    )?;
    Ok(Status {
        passed,
        lines,
        error: None,
        dir: Some(s.out.root().to_path_buf()),
    })
}

pub fn verify(common: &Common, suite: &str, candidate: Option<String>) -> Result<Status> {
    let s = Session::open(common)?;
    let registry = SuiteRegistry::builtin();
    let names: Vec<String> = if suite == "all" {
        s.config.verification.suites.clone()
    } else {
        registry.get(suite)?;
        vec![suite.to_string()]
    };
    if let Some(c) = &candidate {
        if !CandidateRegistry::builtin().names().contains(&c.as_str()) {
            return Err(LabError::UnknownName {
                kind: "candidate",
                name: c.clone(),
            });
        }
    }
    s.manifest(&format!("verify {suite}"))?;
    let ctx = SuiteContext {
        config: s.config.clone(),
        candidate,
    };
    let outcomes: Vec<Result<SuiteOutcome>> = names.par_iter().map(|n| registry.run(n, &ctx)).collect();

    let mut lines = Vec::new();
    let mut error = None;
    let mut summary = Vec::new();
    for (name, outcome) in names.iter().zip(outcomes) {
        match outcome {
            Ok(o) => {
                s.out.write_json(&format!("{name}.json"), &o)?;
                for t in &o.tables {
                    s.out.write_table(t)?;
                }
                lines.extend(status_lines(name, &o.checks));
                summary.push((name.as_str(), Ok(o)));
            }
            Err(e) => {
                lines.push(format!("ERR  {name}: {e}"));
                summary.push((name.as_str(), Err(e.to_string())));
                error.get_or_insert(e);
            }
        }
    }
    let rows: Vec<SuiteLine<'_>> = summary
        .iter()
        .map(|(name, o)| match o {
            Ok(o) => SuiteLine {
                suite: name,
                passed: o.passed(),
                error: None,
                checks: check_lines(&o.checks),
            },
            Err(e) => SuiteLine {
                suite: name,
                passed: false,
                error: Some(e.clone()),
                checks: Vec::new(),
            },
        })
        .collect();
    let passed = write_summary(&s, &format!("verify {suite}"), &rows)?;
    Ok(Status {
        passed,
        lines,
        error,
        dir: Some(s.out.root().to_path_buf()),
    })
}
