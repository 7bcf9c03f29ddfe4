mod common;

use common::*;
use consensus_core::baselines::{
    dgd_diminishing_step, dgd_fixed_step, extra_step, mix, nids_step, run_baseline, BaselineConfig, BaselineKind,
    Targets,
};
use consensus_core::diagnostics::{centralized_oracle, Reference};
use consensus_core::network::NetworkModel;
use consensus_core::objectives::{Objective, Problem, ProblemKind};
use consensus_core::Stacked;
use nalgebra::{DMatrix, DVector};

const UNREACHABLE: Targets = Targets { consensus_violation: -1.0, optimality_residual: -1.0 };

fn capped_config(kind: BaselineKind, rounds: usize) -> BaselineConfig {
    BaselineConfig { round_cap: rounds, ..BaselineConfig::new(kind) }
}

fn default_alpha(kind: BaselineKind, problem: &Problem, net: &NetworkModel) -> f64 {
    kind.default_alpha(problem.lipschitz_max(), net.spectral.lambda_n)
}

#[test]
fn single_agent_runs_are_gradient_descent() {
    let (problem, _) = small_problem(ProblemKind::Ridge, 1, 20, 4, 2);
    let net = NetworkModel::single_agent();
    let reference = centralized_oracle(&problem).unwrap();
    for kind in BaselineKind::ALL {
        let alpha = default_alpha(kind, &problem, &net);
        let record = run_baseline(&capped_config(kind, 60), &problem, &net, &reference, UNREACHABLE, 0).unwrap();
        let mut x = vec![0.0; 4];
        for k in 1..=60 {
            let step = if kind == BaselineKind::DgdDiminishing { dgd_diminishing_step(k, alpha) } else { alpha };
            let g = problem.smooth_gradient(0, &x).unwrap();
            x.iter_mut().zip(&g).for_each(|(a, b)| *a -= step * b);
        }
        assert!(max_abs_diff(&record.final_states[0], &x) < 1e-12, "{kind:?}");
    }
}

#[test]
fn run_loop_matches_step_functions() {
    let (problem, _) = small_problem(ProblemKind::Logistic, 6, 12, 3, 4);
    let net = ring(6);
    let w = &net.mixing;
    let reference = centralized_oracle(&problem).unwrap();
    let rounds = 25;
    for kind in BaselineKind::ALL {
        let alpha = default_alpha(kind, &problem, &net);
        let record = run_baseline(&capped_config(kind, rounds), &problem, &net, &reference, UNREACHABLE, 3).unwrap();
        assert_eq!(record.summary.total_rounds, rounds);
        assert_eq!(record.samples.len(), rounds + 1);

        let mut prev = Stacked::zeros(6, 3);
        let mut x = match kind {
            BaselineKind::Nids => {
                let g = stacked_gradients(&problem, &prev);
                from_vec(&(to_vec(&prev) - alpha * to_vec(&g)), 6, 3)
            }
            BaselineKind::DgdDiminishing => dgd_fixed_step(&prev, w, &problem, dgd_diminishing_step(1, alpha)),
            _ => dgd_fixed_step(&prev, w, &problem, alpha),
        };
        for k in 2..=rounds {
            let next = match kind {
                BaselineKind::DgdFixed => dgd_fixed_step(&x, w, &problem, alpha),
                BaselineKind::DgdDiminishing => dgd_fixed_step(&x, w, &problem, dgd_diminishing_step(k, alpha)),
                BaselineKind::Extra => extra_step(&x, &prev, w, &problem, alpha),
                BaselineKind::Nids => {
                    let (gc, gp) = (stacked_gradients(&problem, &x), stacked_gradients(&problem, &prev));
                    nids_step(&x, &prev, &gc, &gp, w, alpha)
                }
            };
            prev = x;
            x = next;
        }
        let got: Vec<f64> = record.final_states.concat();
        assert!(max_abs_diff(&got, x.as_slice()) < 1e-12, "{kind:?}");
    }
}

#[test]
fn identical_shards_make_the_minimizer_a_consensual_fixed_point() {
    let mut rng = rng(1);
    let a = DMatrix::from_fn(10, 3, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
    let b = DVector::from_fn(10, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
    let problem = Problem::new(Objective::Ridge { lambda: 0.1 }, vec![(a, b); 5]).unwrap();
    let net = ring(5);
    let reference = centralized_oracle(&problem).unwrap();
    let x = Stacked::consensual(5, &reference.x_star);
    let g = stacked_gradients(&problem, &x);
    let alpha = 0.3;
    let checks = [
        dgd_fixed_step(&x, &net.mixing, &problem, alpha),
        extra_step(&x, &x, &net.mixing, &problem, alpha),
        nids_step(&x, &x, &g, &g, &net.mixing, alpha),
    ];
    for next in checks {
        assert!(max_abs_diff(next.as_slice(), x.as_slice()) < 1e-12);
    }
}

#[test]
fn mixing_preserves_the_average() {
    let mut rng = rng(4);
    let net = ring(7);
    let x = random_stacked(&mut rng, 7, 3, 2.0);
    assert!(max_abs_diff(&mix(&x, &net.mixing).average(), &x.average()) < 1e-14);
}

#[test]
fn zero_problem_converges_before_any_exchange() {
    let shards = vec![(DMatrix::zeros(4, 2), DVector::zeros(4)); 3];
    let problem = Problem::new(Objective::Ridge { lambda: 0.0 }, shards).unwrap();
    let net = ring(3);
    // Every point minimizes; the oracle rightly refuses the singular Hessian.
    assert!(centralized_oracle(&problem).is_err());
    let reference = Reference { x_star: vec![0.0; 2], f_star: 0.0, residual: 0.0, iterations: 0 };
    let targets = Targets { consensus_violation: 0.0, optimality_residual: 0.0 };
    for kind in BaselineKind::ALL {
        let record = run_baseline(&BaselineConfig::new(kind), &problem, &net, &reference, targets, 0).unwrap();
        assert!(record.summary.converged);
        assert_eq!(record.summary.total_rounds, 0);
    }
}

#[test]
fn cap_marks_the_run_unconverged() {
    let (problem, _) = small_problem(ProblemKind::Ridge, 4, 10, 3, 5);
    let net = ring(4);
    let reference = centralized_oracle(&problem).unwrap();
    let record =
        run_baseline(&capped_config(BaselineKind::DgdFixed, 17), &problem, &net, &reference, UNREACHABLE, 0).unwrap();
    assert!(!record.summary.converged);
    assert!(record.summary.capped);
    assert_eq!(record.summary.total_rounds, 17);
    let rounds: Vec<usize> = record.samples.iter().map(|s| s.round).collect();
    assert_eq!(rounds, (0..=17).collect::<Vec<_>>());
}

#[test]
fn exact_methods_reach_tight_targets() {
    let (problem, _) = small_problem(ProblemKind::Ridge, 6, 15, 3, 6);
    let net = ring(6);
    let reference = centralized_oracle(&problem).unwrap();
    let targets = Targets { consensus_violation: 1e-6, optimality_residual: 1e-6 };
    for kind in [BaselineKind::Extra, BaselineKind::Nids] {
        let record = run_baseline(&BaselineConfig::new(kind), &problem, &net, &reference, targets, 0).unwrap();
        assert!(record.summary.converged, "{kind:?}");
        let last = record.final_sample().unwrap();
        assert!(last.consensus_violation <= 1e-6 && last.optimality_residual <= 1e-6);
    }
}

#[test]
fn elastic_net_requires_opt_in() {
    let (problem, _) = small_problem(ProblemKind::ElasticNet, 4, 10, 5, 1);
    let net = ring(4);
    let reference = centralized_oracle(&problem).unwrap();
    let config = capped_config(BaselineKind::Extra, 10);
    assert!(run_baseline(&config, &problem, &net, &reference, UNREACHABLE, 0).is_err());
    let forced = BaselineConfig { force_nonsmooth: true, ..config };
    assert!(run_baseline(&forced, &problem, &net, &reference, UNREACHABLE, 0).is_ok());
}

#[test]
fn noisy_runs_are_deterministic_per_seed() {
    let (problem, _) = small_problem(ProblemKind::Ridge, 5, 10, 3, 2);
    let net = ring(5);
    let reference = centralized_oracle(&problem).unwrap();
    let config = BaselineConfig { comm_sigma: 1e-2, ..capped_config(BaselineKind::Nids, 40) };
    let go = |seed| run_baseline(&config, &problem, &net, &reference, UNREACHABLE, seed).unwrap().final_states;
    assert_eq!(go(3), go(3));
    assert_ne!(go(3), go(4));
}
