use potinv::fem::{EvaluationMatrix, NodalField, Operators};
use potinv::harness::{ExperimentConfig, Instance};
use potinv::inversion::{adapt, reconstruct, AdaptiveConfig, AdaptiveOutcome, InversionConfig, Problem, StepInit};
use potinv::mesh::{generate_points, Mesh, PointKind};
use potinv::observation::{observe, GroundTruth, NoiseKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn interval_gradient_matches_central_differences() {
    let gt = GroundTruth::from_ids(1, "ex3ab_q", "const1", 512).unwrap();
    let points = generate_points(1, PointKind::Perturbed, 200, 1).unwrap();
    let obs = observe(&gt, &points, 0.01, NoiseKind::Uniform, 1).unwrap();
    let ops = Operators::new(Mesh::structured(1, 32).unwrap());
    let eval = EvaluationMatrix::new(ops.mesh(), &points).unwrap();
    let f = NodalField::constant(ops.mesh(), 1.0);
    let problem = Problem::new(&ops, &eval, &obs.values, &f, 1e-7).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let q: Vec<f64> = (0..ops.num_nodes()).map(|_| rng.random_range(1.2..4.8)).collect();
    let grad = problem.gradient(&q).unwrap();
    for node in [0, 7, 16, 31, 32] {
        let mut plus = q.clone();
        let mut minus = q.clone();
        plus[node] += 1e-5;
        minus[node] -= 1e-5;
        let fd = (problem.objective(&plus).unwrap().value - problem.objective(&minus).unwrap().value) / 2e-5;
        let rel = (fd - grad[node]).abs() / grad[node].abs();
        assert!(rel <= 1e-5, "node {node}: fd {fd:e} vs {:e}", grad[node]);
    }
}

fn small_instance() -> (ExperimentConfig, Instance) {
    let config = ExperimentConfig {
        m: 8,
        m_fine: 32,
        k: 21,
        sigma: 0.02,
        ..ExperimentConfig::default()
    };
    let gt = config.ground_truth().unwrap();
    let instance = Instance::new(&config, &gt, config.m, config.k, config.seed).unwrap();
    (config, instance)
}

#[test]
fn unit_initial_step_still_descends() {
    let (config, instance) = small_instance();
    let problem = instance.problem(1e-7).unwrap();
    let inv = InversionConfig {
        step_init: StepInit::Fixed(1.0),
        max_iter: 30,
        ..config.inversion_config(1e-7).unwrap()
    };
    let rec = reconstruct(&problem, &inv).unwrap();
    assert!(rec.history.windows(2).all(|w| w[1].objective < w[0].objective));
    assert!(rec.history.last().unwrap().objective < rec.history[0].objective);
}

#[test]
fn adaptive_loop_reports_inner_failure() {
    let (config, mut instance) = small_instance();
    instance.ops.max_iter = 1;
    let problem = instance.problem(1e-6).unwrap();
    let run = adapt(
        &problem,
        &config.inversion_config(1e-6).unwrap(),
        &AdaptiveConfig::for_points(instance.num_points()),
        None,
    )
    .unwrap();
    assert!(matches!(run.outcome, AdaptiveOutcome::Failed(_)));
    assert!(run.trace.is_empty());
    assert!(run.reconstruction.is_none());
}

#[test]
fn adaptive_trace_is_monotone_and_self_consistent() {
    let (config, instance) = small_instance();
    let run = instance.adapt(&config).unwrap();
    assert_eq!(run.outcome, AdaptiveOutcome::Converged);
    let steps: Vec<f64> = run.trace.windows(2).map(|w| w[1].gamma - w[0].gamma).collect();
    assert!(steps.iter().all(|&s| s <= 1e-12) || steps.iter().all(|&s| s >= -1e-12));
    let last = run.trace.last().unwrap();
    assert!(((run.gamma_next - last.gamma) / last.gamma).abs() <= 1e-3);
    assert!(last.e_q.unwrap() > 0.0);
}
