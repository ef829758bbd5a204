//! Experiment configuration: JSON with unknown fields rejected, a published
//! schema, and validation before anything is built.

use crate::control::{ControlProblem, ProblemSpec};
use crate::error::{LabError, Result};
use crate::evolution::tol_disc;
use crate::gelfand::{GelfandDiscretization, OperatorRegistry, OperatorSpec};
use crate::pathspace::{BundleSpec, TimeGrid};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::path::Path as FsPath;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Length `ℓ` of the spatial interval `(0, ℓ)`.
    #[serde(default = "default_domain_length")]
    pub domain_length: f64,
    /// Interior grid points.
    pub n: usize,
    pub dt: f64,
    pub horizon: f64,
}

fn default_domain_length() -> f64 {
    std::f64::consts::PI
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct BundleConfig {
    #[serde(default = "default_bundle_size")]
    pub size: usize,
    /// Number of sine modes carrying the random forcings.
    #[serde(default = "default_bundle_modes")]
    pub k: usize,
    /// Forcing growth constant; defaults to `L_f`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
}

fn default_bundle_size() -> usize {
    64
}

fn default_bundle_modes() -> usize {
    3
}

impl Default for BundleConfig {
    fn default() -> Self {
        BundleConfig {
            size: default_bundle_size(),
            k: default_bundle_modes(),
            l: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    /// `κ` in `tol_disc = κ(Δt + h²)`.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

fn default_kappa() -> f64 {
    1.0
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            kappa: default_kappa(),
        }
    }
}

/// One rung `(ε, number of partition intervals)` of the extremal-shift ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct LadderStep {
    pub eps: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct VerificationConfig {
    /// Suites run by `verify all`.
    #[serde(default = "default_suites")]
    pub suites: Vec<String>,
    /// Candidate functional for the minimax suite.
    #[serde(default = "default_candidate")]
    pub candidate: String,
    /// Random `z` directions added to `{0, ±e_1, …, ±e_k}`.
    #[serde(default = "default_random_directions")]
    pub random_directions: usize,
    /// Randomized pairs for sampled inequalities.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_ladder")]
    pub ladder: Vec<LadderStep>,
    /// Refinements `n` of the stability sweep.
    #[serde(default = "default_stability_ns")]
    pub stability_ns: Vec<usize>,
}

fn default_suites() -> Vec<String> {
    ["operators", "calculus", "control", "minimax", "game"]
        .map(String::from)
        .to_vec()
}

fn default_candidate() -> String {
    "bellman-value".into()
}

fn default_random_directions() -> usize {
    8
}

fn default_samples() -> usize {
    50
}

fn default_ladder() -> Vec<LadderStep> {
    [(0.2, 2), (0.1, 4), (0.05, 8)]
        .map(|(eps, intervals)| LadderStep { eps, intervals })
        .to_vec()
}

fn default_stability_ns() -> Vec<usize> {
    vec![1, 2, 4, 8, 16]
}

impl Default for VerificationConfig {
    fn default() -> Self {
        VerificationConfig {
            suites: default_suites(),
            candidate: default_candidate(),
            random_directions: default_random_directions(),
            samples: default_samples(),
            ladder: default_ladder(),
            stability_ns: default_stability_ns(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Artifact directory; `--out` overrides it, `out/<name>` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// Write trajectories as long-format CSV.
    #[serde(default = "default_true")]
    pub paths: bool,
}

fn default_true() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            paths: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridConfig,
    pub operator: OperatorSpec,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub bundle: BundleConfig,
    #[serde(default)]
    pub tolerance: ToleranceConfig,
    /// Largest number of tree leaves or opponent replies enumerated.
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub verification: VerificationConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_budget() -> usize {
    crate::control::DEFAULT_BUDGET
}

/// Desk-scale limits enforced by [`ExperimentConfig::validate`].
pub const MAX_GRID_POINTS: usize = 64;
pub const MAX_CONTROL_INTERVALS: usize = 8;
pub const MAX_BUNDLE: usize = 256;

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &FsPath) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Compact JSON with fields in declaration order.
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// JSON schema of the config format.
    pub fn schema() -> serde_json::Value {
        serde_json::to_value(schemars::schema_for!(ExperimentConfig)).expect("schema serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LabError::Config(m));
        let g = &self.grid;
        if !(g.domain_length > 0.0 && g.domain_length.is_finite()) {
            return bad(format!("domain_length must be positive, got {}", g.domain_length));
        }
        if g.n == 0 || g.n > MAX_GRID_POINTS {
            return bad(format!("n must lie in 1..={MAX_GRID_POINTS}, got {}", g.n));
        }
        let grid = TimeGrid::new(g.dt, g.horizon).map_err(|e| LabError::Config(e.to_string()))?;
        let p = &self.problem;
        if p.control_intervals == 0 || p.control_intervals > MAX_CONTROL_INTERVALS {
            return bad(format!(
                "control_intervals must lie in 1..={MAX_CONTROL_INTERVALS}, got {}",
                p.control_intervals
            ));
        }
        if grid.steps() % p.control_intervals != 0 {
            return bad(format!(
                "{} control intervals do not divide {} solver steps",
                p.control_intervals,
                grid.steps()
            ));
        }
        if p.p_set.is_empty() || p.q_set.is_empty() {
            return bad("control sets must be nonempty".into());
        }
        let required = p.required_lf(g.horizon);
        if !(p.lf >= required - 1e-12) {
            return bad(format!("lf = {} is below the required {}", p.lf, required));
        }
        if self.bundle.size == 0 || self.bundle.size > MAX_BUNDLE {
            return bad(format!("bundle size must lie in 1..={MAX_BUNDLE}"));
        }
        if let Some(l) = self.bundle.l {
            if l + 1e-12 < p.lf {
                return bad(format!("bundle l = {l} is below lf = {}", p.lf));
            }
        }
        if !(self.tolerance.kappa > 0.0) {
            return bad("tolerance.kappa must be positive".into());
        }
        let v = &self.verification;
        let suites = crate::suites::SuiteRegistry::builtin();
        for name in &v.suites {
            suites.get(name).map_err(|e| LabError::Config(e.to_string()))?;
        }
        // the ladder only feeds the game suite
        let plays_game = v.suites.iter().any(|s| s == "game");
        for step in &v.ladder {
            if !(step.eps > 0.0 && step.eps < 1.0) {
                return bad(format!("ladder eps must lie in (0, 1), got {}", step.eps));
            }
            if step.intervals == 0
                || step.intervals > MAX_CONTROL_INTERVALS
                || (plays_game && grid.steps() % step.intervals != 0)
            {
                return bad(format!(
                    "ladder intervals {} must divide {} steps and be at most {MAX_CONTROL_INTERVALS}",
                    step.intervals,
                    grid.steps()
                ));
            }
        }
        if v.stability_ns.contains(&0) {
            return bad("stability_ns entries must be positive".into());
        }
        OperatorRegistry::builtin()
            .build(&self.operator)
            .map_err(|e| if e.is_schema_error() { e } else { LabError::Config(e.to_string()) })?;
        Ok(())
    }

    pub fn discretization(&self) -> Result<GelfandDiscretization> {
        GelfandDiscretization::assemble(self.grid.domain_length, self.grid.n)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grid.dt, self.grid.horizon)
    }

    pub fn build_problem(&self) -> Result<ControlProblem> {
        self.build_problem_with(&OperatorRegistry::builtin())
    }

    pub fn build_problem_with(&self, registry: &OperatorRegistry) -> Result<ControlProblem> {
        let op = registry.build(&self.operator)?;
        let mut problem =
            ControlProblem::new(self.discretization()?, op, self.time_grid()?, self.problem.clone())?;
        problem.budget = self.budget;
        Ok(problem)
    }

    pub fn bundle_spec(&self) -> BundleSpec {
        BundleSpec {
            l: self.bundle.l.unwrap_or(self.problem.lf),
            size: self.bundle.size,
            k: self.bundle.k,
            seed: self.seed,
        }
    }

    /// `κ(Δt + h²)`.
    pub fn tol_disc(&self) -> f64 {
        let h = self.grid.domain_length / (self.grid.n as f64 + 1.0);
        tol_disc(self.tolerance.kappa, self.grid.dt, h)
    }
}
