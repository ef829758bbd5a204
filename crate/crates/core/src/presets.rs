//! Shipped example configurations, looked up by name.

use crate::config::{
    BundleConfig, ExperimentConfig, GridConfig, OutputConfig, ToleranceConfig, VerificationConfig,
};
use crate::control::{CostTerm, DynamicsTerm, ModeAmplitude, ProblemSpec, TerminalTerm, DEFAULT_BUDGET};
use crate::error::{LabError, Result};
use crate::gelfand::OperatorSpec;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::Arc;

pub trait Preset: Debug + Send + Sync {
    fn name(&self) -> &'static str;

    fn summary(&self) -> &'static str;

    fn config(&self) -> ExperimentConfig;
}

fn grid(n: usize, dt: f64, horizon: f64) -> GridConfig {
    GridConfig {
        domain_length: PI,
        n,
        dt,
        horizon,
    }
}

fn experiment(name: &str, grid: GridConfig, operator: OperatorSpec, problem: ProblemSpec) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        seed: 7,
        grid,
        operator,
        problem,
        bundle: BundleConfig::default(),
        tolerance: ToleranceConfig::default(),
        budget: DEFAULT_BUDGET,
        verification: VerificationConfig::default(),
        output: OutputConfig::default(),
    }
}

impl ExperimentConfig {
    fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    fn without_game_suite(mut self) -> Self {
        self.verification.suites.retain(|s| s != "game");
        self
    }
}

/// Heat equation steered by a distributed control on the first mode.
#[derive(Debug, Clone, Copy)]
pub struct HeatDistributedControl;

impl Preset for HeatDistributedControl {
    fn name(&self) -> &'static str {
        "heat-distributed-control"
    }

    fn summary(&self) -> &'static str {
        "heat equation, control p·e1 with p in {-1, 0, 1}, cost |x(t)| + p²/2, terminal |x(T)|"
    }

    fn config(&self) -> ExperimentConfig {
        experiment(
            self.name(),
            grid(16, 1.0 / 32.0, 1.0),
            OperatorSpec::named("linear_laplacian"),
            ProblemSpec {
                dynamics: vec![DynamicsTerm::ControlProfile {
                    mode: 1,
                    amplitude: 1.0,
                }],
                running: vec![
                    CostTerm::StateNorm { weight: 1.0 },
                    CostTerm::ControlQuad { weight: 0.5 },
                ],
                terminal: vec![TerminalTerm::Norm { weight: 1.0 }],
                p_set: vec![-1.0, 0.0, 1.0],
                q_set: vec![0.0],
                lf: 1.0,
                control_intervals: 4,
                initial: vec![ModeAmplitude {
                    mode: 1,
                    amplitude: 1.0,
                }],
            },
        )
        .without_game_suite()
    }
}

/// Heat equation whose running cost reads the state a quarter unit back.
#[derive(Debug, Clone, Copy)]
pub struct HeatDelayCost;

impl Preset for HeatDelayCost {
    fn name(&self) -> &'static str {
        "heat-delay-cost"
    }

    fn summary(&self) -> &'static str {
        "heat equation, control p·e1, cost |x(t - 1/4)| + p²/4, terminal |x(T)|"
    }

    fn config(&self) -> ExperimentConfig {
        experiment(
            self.name(),
            grid(16, 1.0 / 32.0, 1.0),
            OperatorSpec::named("linear_laplacian"),
            ProblemSpec {
                dynamics: vec![DynamicsTerm::ControlProfile {
                    mode: 1,
                    amplitude: 1.0,
                }],
                running: vec![
                    CostTerm::DelayedStateNorm {
                        weight: 1.0,
                        tau: 0.25,
                    },
                    CostTerm::ControlQuad { weight: 0.25 },
                ],
                terminal: vec![TerminalTerm::Norm { weight: 1.0 }],
                p_set: vec![-1.0, 0.0, 1.0],
                q_set: vec![0.0],
                lf: 1.0,
                control_intervals: 4,
                initial: vec![
                    ModeAmplitude {
                        mode: 1,
                        amplitude: 1.0,
                    },
                    ModeAmplitude {
                        mode: 2,
                        amplitude: 0.5,
                    },
                ],
            },
        )
        .without_game_suite()
    }
}

/// Uncontrolled p-Laplacian flow with `p = 4`.
#[derive(Debug, Clone, Copy)]
pub struct PLaplacianUncontrolled;

impl Preset for PLaplacianUncontrolled {
    fn name(&self) -> &'static str {
        "p-laplacian-uncontrolled"
    }

    fn summary(&self) -> &'static str {
        "4-Laplacian flow without control, cost |x(t)|, terminal |x(T)|"
    }

    fn config(&self) -> ExperimentConfig {
        experiment(
            self.name(),
            grid(16, 1.0 / 32.0, 1.0),
            OperatorSpec::p_laplacian(4.0),
            ProblemSpec {
                dynamics: vec![],
                running: vec![CostTerm::StateNorm { weight: 1.0 }],
                terminal: vec![TerminalTerm::Norm { weight: 1.0 }],
                p_set: vec![0.0],
                q_set: vec![0.0],
                lf: 1.0,
                control_intervals: 4,
                initial: vec![ModeAmplitude {
                    mode: 1,
                    amplitude: 1.0,
                }],
            },
        )
        .without_game_suite()
    }
}

/// Heat equation with a controller on mode 1 and a disturbance on mode 2;
/// control and disturbance enter `f` and `ℓ` in separate additive terms.
#[derive(Debug, Clone, Copy)]
pub struct SeparatedBilinearGame;

impl Preset for SeparatedBilinearGame {
    fn name(&self) -> &'static str {
        "separated-bilinear-game"
    }

    fn summary(&self) -> &'static str {
        "heat equation game, f = p·e1 + q·e2, cost |x|/2 + p²/2 - q², terminal |x(T)|, T = 1/2"
    }

    fn config(&self) -> ExperimentConfig {
        experiment(
            self.name(),
            grid(16, 1.0 / 64.0, 0.5),
            OperatorSpec::named("linear_laplacian"),
            ProblemSpec {
                dynamics: vec![
                    DynamicsTerm::ControlProfile {
                        mode: 1,
                        amplitude: 1.0,
                    },
                    DynamicsTerm::DisturbanceProfile {
                        mode: 2,
                        amplitude: 1.0,
                    },
                ],
                running: vec![
                    CostTerm::StateNorm { weight: 0.5 },
                    CostTerm::ControlQuad { weight: 0.5 },
                    CostTerm::DisturbanceQuad { weight: -1.0 },
                ],
                terminal: vec![TerminalTerm::Norm { weight: 1.0 }],
                p_set: vec![-1.0, 0.0, 1.0],
                q_set: vec![-0.5, 0.5],
                lf: 1.5,
                control_intervals: 4,
                initial: vec![ModeAmplitude {
                    mode: 1,
                    amplitude: 1.0,
                }],
            },
        )
        .with_budget(8192)
    }
}

/// Name → preset table.
#[derive(Debug, Clone)]
pub struct PresetRegistry {
    presets: BTreeMap<String, Arc<dyn Preset>>,
}

impl PresetRegistry {
    pub fn empty() -> Self {
        PresetRegistry {
            presets: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(HeatDistributedControl));
        r.register(Arc::new(HeatDelayCost));
        r.register(Arc::new(PLaplacianUncontrolled));
        r.register(Arc::new(SeparatedBilinearGame));
        r
    }

    pub fn register(&mut self, preset: Arc<dyn Preset>) {
        self.presets.insert(preset.name().to_string(), preset);
    }

    pub fn names(&self) -> Vec<&str> {
        self.presets.keys().map(String::as_str).collect()
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Preset>> {
        self.presets.get(name).cloned().ok_or_else(|| LabError::UnknownName {
            kind: "preset",
            name: name.to_string(),
        })
    }

    pub fn config(&self, name: &str) -> Result<ExperimentConfig> {
        Ok(self.get(name)?.config())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_build() {
        let reg = PresetRegistry::builtin();
        assert_eq!(reg.names().len(), 4);
        for name in reg.names() {
            let cfg = reg.config(name).unwrap();
            cfg.validate().unwrap();
            let p = cfg.build_problem().unwrap();
            assert!(p.lf >= cfg.problem.required_lf(cfg.grid.horizon));
            assert_eq!(cfg.verification.suites.iter().any(|s| s == "game"), p.is_game());
            let back = ExperimentConfig::from_json_str(&cfg.canonical_json().unwrap()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn game_preset_admits_the_epsilon_ladder() {
        let cfg = PresetRegistry::builtin().config("separated-bilinear-game").unwrap();
        let eps0 = (-2.0 * cfg.problem.lf * cfg.grid.horizon).exp();
        assert!(eps0 > 0.2);
        assert!(cfg.budget >= 3usize.pow(8));
    }

    #[test]
    fn unknown_preset() {
        let err = PresetRegistry::builtin().get("wave").unwrap_err();
        assert!(err.is_schema_error());
    }
}
