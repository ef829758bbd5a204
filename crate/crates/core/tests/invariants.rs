//! Property tests for the structural invariants of each module.

use minimax_lab::chainrule::FunctionalRegistry;
use minimax_lab::config::ExperimentConfig;
use minimax_lab::control::{ControlProblem, CostTerm, DynamicsTerm, TreeMode};
use minimax_lab::evolution::{solve_ivp, ZeroForcing};
use minimax_lab::game::{rollout, ExtremalShift, OpenLoopStrategy, Partition, Penalty, Player};
use minimax_lab::gelfand::{GelfandDiscretization, LinearLaplacian, MonotoneOperator, PLaplacian};
use minimax_lab::hamiltonian::HamiltonianSpec;
use minimax_lab::minimax::{certification_bundle, check_minimax, z_samples, CandidateFunctional, TreeValue};
use minimax_lab::pathspace::{sample_bundle, BundleSpec, Path, TimeGrid, TrajectoryBundle};
use minimax_lab::presets::PresetRegistry;
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

fn small(name: &str, n: usize) -> ExperimentConfig {
    let mut cfg = PresetRegistry::builtin().config(name).unwrap();
    cfg.grid.n = n;
    cfg.bundle.size = 16;
    cfg.validate().unwrap();
    cfg
}

fn vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n)
}

fn random_path(disc: &GelfandDiscretization, grid: TimeGrid, x0: &[f64], gain: f64) -> Path {
    let start = Path::constant(grid, disc.h(), x0.to_vec());
    solve_ivp(disc, &LinearLaplacian, &start, 0, &move |h: &minimax_lab::pathspace::History<'_>| {
        let t = h.time();
        h.current().iter().map(|v| gain * (3.0 * t).sin() * (1.0 + v)).collect::<Vec<f64>>()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pairing_of_h_vectors_is_the_h_inner_product(u in vector(12), v in vector(12)) {
        let disc = GelfandDiscretization::assemble(PI, 12).unwrap();
        let scale = 1.0 + disc.norm_h(&u) * disc.norm_h(&v);
        prop_assert!((disc.pairing(&u, &v) - disc.inner(&u, &v)).abs() <= 1e-12 * scale);
    }

    #[test]
    fn embedding_chain_holds(v in vector(12)) {
        let disc = GelfandDiscretization::assemble(PI, 12).unwrap();
        let slack = 1e-12 * (1.0 + disc.norm_v(&v));
        prop_assert!(disc.norm_h(&v) <= disc.poincare_constant() * disc.norm_v(&v) + slack);
        prop_assert!(disc.norm_vstar(&v) <= disc.dual_embedding_constant() * disc.norm_h(&v) + slack);
    }

    #[test]
    fn p_laplacian_at_two_is_the_laplacian(v in vector(10)) {
        let disc = GelfandDiscretization::assemble(PI, 10).unwrap();
        let a = PLaplacian::new(2.0).unwrap().apply(&disc, 0.0, &v);
        let b = LinearLaplacian.apply(&disc, 0.0, &v);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn p_laplacian_is_monotone(p in 2.0f64..6.0, v in vector(10), w in vector(10)) {
        let disc = GelfandDiscretization::assemble(PI, 10).unwrap();
        let op = PLaplacian::new(p).unwrap();
        let (av, aw) = (op.apply(&disc, 0.0, &v), op.apply(&disc, 0.0, &w));
        let da: Vec<f64> = av.iter().zip(&aw).map(|(a, b)| a - b).collect();
        let dx: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a - b).collect();
        let scale: f64 = 1.0 + da.iter().map(|x| x.abs()).sum::<f64>();
        prop_assert!(disc.pairing(&da, &dx) >= -1e-10 * scale);
    }

    #[test]
    fn unforced_energy_never_grows(p in 2.0f64..5.0, x0 in vector(10)) {
        let disc = GelfandDiscretization::assemble(PI, 10).unwrap();
        let grid = TimeGrid::new(1.0 / 32.0, 0.5).unwrap();
        let op = PLaplacian::new(p).unwrap();
        let path = solve_ivp(&disc, &op, &Path::constant(grid, disc.h(), x0), 0, &ZeroForcing).unwrap();
        for i in 0..grid.steps() {
            prop_assert!(path.norm_at(i + 1) <= path.norm_at(i) * (1.0 + 1e-10) + 1e-12);
        }
    }

    #[test]
    fn lipschitz_feedback_gap_obeys_gronwall(x0 in vector(8), d in vector(8), l in 0.1f64..2.0) {
        let disc = GelfandDiscretization::assemble(PI, 8).unwrap();
        let grid = TimeGrid::new(1.0 / 32.0, 1.0).unwrap();
        let feedback = move |h: &minimax_lab::pathspace::History<'_>| -> Vec<f64> {
            h.current().iter().map(|v| l * v.sin()).collect()
        };
        let y0: Vec<f64> = x0.iter().zip(&d).map(|(a, b)| a + 0.1 * b).collect();
        let x = solve_ivp(&disc, &LinearLaplacian, &Path::constant(grid, disc.h(), x0.clone()), 0, &feedback).unwrap();
        let y = solve_ivp(&disc, &LinearLaplacian, &Path::constant(grid, disc.h(), y0), 0, &feedback).unwrap();
        let again = solve_ivp(&disc, &LinearLaplacian, &Path::constant(grid, disc.h(), x0), 0, &feedback).unwrap();
        prop_assert_eq!(x.values(), again.values());
        let delta = x.norm_of(&x.value(0).iter().zip(y.value(0)).map(|(a, b)| a - b).collect::<Vec<_>>());
        for i in 0..=grid.steps() {
            let gap: Vec<f64> = x.value(i).iter().zip(y.value(i)).map(|(a, b)| a - b).collect();
            let bound = (l * grid.node(i)).exp() * delta;
            prop_assert!(x.norm_of(&gap) <= bound + 1e-12);
        }
    }

    #[test]
    fn test_functionals_do_not_anticipate(x0 in vector(8), gain in -1.0f64..1.0, frac in 0.0f64..1.0) {
        let disc = GelfandDiscretization::assemble(PI, 8).unwrap();
        let grid = TimeGrid::new(1.0 / 16.0, 1.0).unwrap();
        let x = random_path(&disc, grid, &x0, gain);
        let i = (frac * grid.steps() as f64) as usize;
        let stopped = x.stop_at(i);
        let reg = FunctionalRegistry::builtin();
        for name in reg.names() {
            let phi = reg.build(name, &disc).unwrap();
            prop_assert_eq!(phi.eval(i, &x), phi.eval(i, &stopped));
            prop_assert_eq!(phi.dt_phi(i, &x), phi.dt_phi(i, &stopped));
            prop_assert_eq!(phi.dx_phi(i, &x), phi.dx_phi(i, &stopped));
        }
        let pen = Penalty::new(0.05, 1.0, 0.0, 1.0).unwrap();
        prop_assert_eq!(pen.eval(i, &x).nu, pen.eval(i, &stopped).nu);
    }

    #[test]
    fn nu_is_positive_below_eps0(eps_frac in 0.01f64..0.99, lf in 0.1f64..2.0, x0 in vector(8), gain in -1.0f64..1.0) {
        let disc = GelfandDiscretization::assemble(PI, 8).unwrap();
        let grid = TimeGrid::new(1.0 / 16.0, 0.5).unwrap();
        let eps = eps_frac * (-2.0 * lf * 0.5f64).exp();
        let pen = Penalty::new(eps, lf, 0.0, 0.5).unwrap();
        let y = random_path(&disc, grid, &x0, gain);
        for i in 0..=grid.steps() {
            prop_assert!(pen.eval(i, &y).nu > 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn bundle_prefix_is_exact(seed in any::<u64>(), j in 0usize..4) {
        let cfg = small("heat-delay-cost", 8);
        let problem = cfg.build_problem().unwrap();
        let base = sample_bundle(&problem.disc, problem.op.as_ref(), 0.0, &problem.initial_path(), cfg.bundle_spec()).unwrap();
        let t0 = problem.control_bounds(0)[j];
        let x0 = base.members[base.len() - 1].stop_at(t0);
        let spec = BundleSpec { seed, ..cfg.bundle_spec() };
        let b = sample_bundle(&problem.disc, problem.op.as_ref(), problem.grid().node(t0), &x0, spec).unwrap();
        for m in &b.members {
            for r in 0..=t0 {
                prop_assert_eq!(m.value(r), x0.value(r));
            }
        }
        prop_assert!(b.admissibility_excess() <= 1e-12);
    }

    #[test]
    fn value_does_not_anticipate(member in 0usize..16, j in 0usize..4) {
        let cfg = small("heat-delay-cost", 8);
        let problem = cfg.build_problem().unwrap();
        let b = sample_bundle(&problem.disc, problem.op.as_ref(), 0.0, &problem.initial_path(), cfg.bundle_spec()).unwrap();
        let x = &b.members[member];
        let t0 = problem.control_bounds(0)[j];
        prop_assert_eq!(problem.value(t0, x).unwrap(), problem.value(t0, &x.stop_at(t0)).unwrap());
    }

    #[test]
    fn larger_costs_give_larger_values(scale in 1.0f64..3.0, shift in 0.0f64..1.0) {
        let cfg = small("heat-distributed-control", 8);
        let problem = cfg.build_problem().unwrap();
        let x0 = problem.initial_path();
        let v = problem.value(0, &x0).unwrap();
        let bigger = problem.with_running_scale(scale).with_terminal_shift(shift);
        prop_assert!(v <= bigger.value(0, &x0).unwrap());
    }

    #[test]
    fn hamiltonian_scales_with_costs_and_dynamics(c in 0.1f64..4.0, z in vector(8)) {
        let cfg = small("heat-distributed-control", 8);
        let mut scaled = cfg.clone();
        for t in &mut scaled.problem.running {
            scale_cost(t, c);
        }
        for t in &mut scaled.problem.dynamics {
            if let DynamicsTerm::ControlProfile { amplitude, .. } = t {
                *amplitude *= c;
            }
        }
        let (p, q) = (cfg.build_problem().unwrap(), scaled.build_problem().unwrap());
        let x = p.initial_path();
        let f = HamiltonianSpec::natural(&p).eval(&x.history(0), &z).unwrap();
        let g = HamiltonianSpec::natural(&q).eval(&x.history(0), &z).unwrap();
        prop_assert!((g.value - c * f.value).abs() <= 1e-12 * (1.0 + f.value.abs()));
    }
}

fn scale_cost(t: &mut CostTerm, c: f64) {
    match t {
        CostTerm::StateNorm { weight } | CostTerm::ControlQuad { weight } => *weight *= c,
        other => panic!("unexpected term {other:?}"),
    }
}

fn minimax_setup() -> (Arc<ControlProblem>, TrajectoryBundle, Vec<Vec<f64>>, Vec<usize>, f64) {
    let cfg = small("heat-distributed-control", 8);
    let problem = Arc::new(cfg.build_problem().unwrap());
    let x0 = problem.initial_path();
    let bundle = certification_bundle(&problem, 0, &x0, cfg.bundle_spec(), TreeMode::Bellman).unwrap();
    let zs = z_samples(&problem.disc, cfg.bundle.k, 2, cfg.seed);
    let bounds = problem.control_bounds(0);
    let ts = bounds[..bounds.len() - 1].to_vec();
    (problem, bundle, zs, ts, cfg.tol_disc())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn minimax_checks_ignore_member_order(perm in Just((0..16usize).collect::<Vec<_>>()).prop_shuffle()) {
        let (problem, bundle, zs, ts, tol) = minimax_setup();
        let u = TreeValue::new(problem.clone(), TreeMode::Bellman);
        let spec = HamiltonianSpec::natural(&problem);
        let shuffled = TrajectoryBundle {
            members: perm.iter().map(|&i| bundle.members[i].clone()).collect(),
            ..bundle.clone()
        };
        let (a_sup, a_sub) = check_minimax(&u, &spec, &bundle, &zs, &ts, tol).unwrap();
        let (b_sup, b_sub) = check_minimax(&u, &spec, &shuffled, &zs, &ts, tol).unwrap();
        for (a, b) in [(&a_sup, &b_sup), (&a_sub, &b_sub)] {
            prop_assert_eq!(a.passed, b.passed);
            for (r, s) in a.rows.iter().zip(&b.rows) {
                prop_assert_eq!(r.best_slack, s.best_slack);
            }
        }
    }

    #[test]
    fn enlarging_the_bundle_keeps_supersolution_passes(keep in 1usize..16) {
        let (problem, bundle, zs, ts, tol) = minimax_setup();
        let u = TreeValue::new(problem.clone(), TreeMode::Bellman);
        let spec = HamiltonianSpec::natural(&problem);
        let sub_bundle = TrajectoryBundle {
            members: bundle.members[..keep].to_vec(),
            ..bundle.clone()
        };
        let (small_sup, _) = check_minimax(&u, &spec, &sub_bundle, &zs, &ts, tol).unwrap();
        let (big_sup, _) = check_minimax(&u, &spec, &bundle, &zs, &ts, tol).unwrap();
        prop_assert!(!small_sup.passed || big_sup.passed);
        for (s, b) in small_sup.rows.iter().zip(&big_sup.rows) {
            prop_assert!(b.best_slack <= s.best_slack);
        }
    }

    #[test]
    fn rollouts_do_not_anticipate_the_opponent(
        head in prop::collection::vec(0usize..2, 2),
        tail_a in prop::collection::vec(0usize..2, 2),
        tail_b in prop::collection::vec(0usize..2, 2),
    ) {
        let cfg = small("separated-bilinear-game", 8);
        let problem = Arc::new(cfg.build_problem().unwrap());
        let x0 = problem.initial_path();
        let bundle = certification_bundle(&problem, 0, &x0, cfg.bundle_spec(), TreeMode::Upper).unwrap();
        let u = TreeValue::new(problem.clone(), TreeMode::Upper);
        let part = Partition::uniform(problem.grid(), 0, 4).unwrap();
        let a = ExtremalShift::new(&problem, &u as &dyn CandidateFunctional, &bundle, 0.1, &part, Player::Controller).unwrap();
        let play = |tail: &[usize]| {
            let indices: Vec<usize> = head.iter().chain(tail).copied().collect();
            let b = OpenLoopStrategy { player: Player::Disturbance, partition: part.clone(), indices };
            rollout(&problem, &x0, &part, &a, &b).unwrap().controls
        };
        let (ca, cb) = (play(&tail_a), play(&tail_b));
        // the controller's move on interval j sees the disturbance only before s_j
        prop_assert_eq!(&ca[..=head.len()].iter().map(|c| c.0).collect::<Vec<_>>(), &cb[..=head.len()].iter().map(|c| c.0).collect::<Vec<_>>());
        prop_assert_eq!(&ca[..head.len()], &cb[..head.len()]);
    }
}

#[test]
fn suites_run_independently() {
    let cfg = small("heat-distributed-control", 8);
    let reg = minimax_lab::suites::SuiteRegistry::builtin();
    let ctx = minimax_lab::suites::SuiteContext::new(cfg);
    let first = serde_json::to_string(&reg.run("operators", &ctx).unwrap()).unwrap();
    reg.run("calculus", &ctx).unwrap();
    reg.run("control", &ctx).unwrap();
    let again = serde_json::to_string(&reg.run("operators", &ctx).unwrap()).unwrap();
    assert_eq!(first, again);
}

#[test]
fn refinement_of_the_control_grid_never_raises_the_value() {
    let cfg = small("heat-delay-cost", 8);
    let coarse = cfg.build_problem().unwrap().with_control_intervals(2).unwrap();
    let fine = coarse.with_control_intervals(4).unwrap();
    let x0 = coarse.initial_path();
    assert!(fine.value(0, &x0).unwrap() <= coarse.value(0, &x0).unwrap() + 1e-15);
}
