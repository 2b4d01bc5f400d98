//! End-to-end optimizer behavior: degenerate-hyperparameter collapses,
//! gradient-evaluation budgets, momentum arithmetic, and trajectory
//! output format.

use sharpopt::bench::BenchConfig;
use sharpopt::mlp::MlpModel;
use sharpopt::model::{CountingModel, DifferentiableModel, QuadraticModel};
use sharpopt::optim::{
    write_trajectory_csv, FisherMode, OptimConfig, Optimizer, TrajectoryRecord, Variant,
};
use sharpopt::rng::RandomSource;
use sharpopt::toy2d::ToyModel;

fn config(variant: Variant, gamma: f64, eta: f64) -> OptimConfig {
    OptimConfig {
        variant,
        gamma,
        eta,
        lr: 0.05,
        momentum: 0.9,
        weight_decay: 1e-4,
        fisher_mode: FisherMode::GradientMagnitude,
    }
}

/// Runs `steps` optimizer steps and returns the raw parameter bits after
/// each step, so collapse checks can demand bitwise equality.
fn run_bits<M: DifferentiableModel>(
    model: &M,
    cfg: OptimConfig,
    start: &[f64],
    batch: &[M::Example],
    steps: usize,
) -> Vec<Vec<u64>> {
    let mut opt = Optimizer::new(cfg, start.len()).unwrap();
    let mut params = start.to_vec();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (next, _) = opt.step(model, &params, batch, cfg.lr).unwrap();
        params = next;
        out.push(params.iter().map(|p| p.to_bits()).collect());
    }
    out
}

#[test]
fn zero_radius_collapses_every_variant_to_sgd_on_the_toy_model() {
    let model = ToyModel::reference();
    let start = [-5.0, 20.0];
    let base = run_bits(&model, config(Variant::Sgd, 0.0, 0.0), &start, &[()], 100);
    for variant in [Variant::Sam, Variant::Asam, Variant::Fsam] {
        let cfg = config(variant, 0.0, 1.0);
        let got = run_bits(&model, cfg, &start, &[()], 100);
        assert_eq!(got, base, "{variant} with zero radius diverged from sgd");
    }
}

#[test]
fn zero_radius_collapses_every_variant_to_sgd_on_the_mlp() {
    let cfg = BenchConfig::default();
    let model = MlpModel::new(cfg.model_spec()).unwrap();
    let mut rng = RandomSource::new(12);
    let start = model.init_params(&mut rng);
    let data = cfg.test_data().unwrap();
    let batch = &data.points[..32];

    let base = run_bits(&model, config(Variant::Sgd, 0.0, 0.0), &start, batch, 100);
    for variant in [Variant::Sam, Variant::Asam, Variant::Fsam] {
        let got = run_bits(&model, config(variant, 0.0, 1.0), &start, batch, 100);
        assert_eq!(got, base, "{variant} with zero radius diverged from sgd");
    }
}

#[test]
fn zero_anti_regularizer_collapses_fisher_variant_to_sam() {
    // With eta = 0 the anti-regularized inverse metric is exactly all
    // ones, so the Fisher probe reproduces the Euclidean probe bit for
    // bit — on both models.
    let toy = ToyModel::reference();
    let start = [-5.0, 20.0];
    let sam = run_bits(&toy, config(Variant::Sam, 0.1, 0.0), &start, &[()], 100);
    let fsam = run_bits(&toy, config(Variant::Fsam, 0.1, 0.0), &start, &[()], 100);
    assert_eq!(sam, fsam);

    let cfg = BenchConfig::default();
    let model = MlpModel::new(cfg.model_spec()).unwrap();
    let mut rng = RandomSource::new(12);
    let init = model.init_params(&mut rng);
    let data = cfg.test_data().unwrap();
    let batch = &data.points[..32];
    let sam = run_bits(&model, config(Variant::Sam, 0.05, 0.0), &init, batch, 100);
    let fsam = run_bits(&model, config(Variant::Fsam, 0.05, 0.0), &init, batch, 100);
    assert_eq!(sam, fsam);
}

#[test]
fn sgd_uses_one_gradient_evaluation_per_step_and_probing_variants_two() {
    let toy = ToyModel::reference();
    let counting = CountingModel::new(&toy);
    for (variant, expected) in [
        (Variant::Sgd, 1),
        (Variant::Sam, 2),
        (Variant::Asam, 2),
        (Variant::Fsam, 2),
    ] {
        counting.reset();
        let cfg = OptimConfig {
            variant,
            gamma: 0.1,
            eta: 1.0,
            lr: 0.1,
            momentum: 0.0,
            weight_decay: 0.0,
            fisher_mode: FisherMode::GradientMagnitude,
        };
        let mut opt = Optimizer::new(cfg, 2).unwrap();
        opt.step(&counting, &[-5.0, 20.0], &[()], 0.1).unwrap();
        assert_eq!(
            counting.grad_evals(),
            expected,
            "{variant}: wrong gradient budget"
        );
        assert_eq!(counting.loss_evals(), 0, "{variant}: stray loss-only evals");
    }
}

#[test]
fn momentum_and_weight_decay_follow_the_update_rule() {
    // Quadratic loss: grad = theta. Hand-roll two steps of
    //   buf <- m*buf + (g + wd*theta); theta <- theta - lr*buf.
    let model = QuadraticModel::new(1);
    let cfg = OptimConfig {
        variant: Variant::Sgd,
        gamma: 0.0,
        eta: 0.0,
        lr: 0.1,
        momentum: 0.5,
        weight_decay: 0.01,
        fisher_mode: FisherMode::GradientMagnitude,
    };
    let mut opt = Optimizer::new(cfg, 1).unwrap();
    let (p1, _) = opt.step(&model, &[1.0], &[()], 0.1).unwrap();
    let buf1 = 1.0 + 0.01 * 1.0; // 1.01
    let expect1 = 1.0 - 0.1 * buf1; // 0.899
    assert!((p1[0] - expect1).abs() < 1e-15);
    let (p2, _) = opt.step(&model, &p1, &[()], 0.1).unwrap();
    let buf2 = 0.5 * buf1 + (expect1 + 0.01 * expect1);
    let expect2 = expect1 - 0.1 * buf2;
    assert!((p2[0] - expect2).abs() < 1e-15);
}

#[test]
fn probing_step_descends_the_quadratic() {
    let model = QuadraticModel::new(2);
    for variant in [Variant::Sam, Variant::Asam, Variant::Fsam] {
        let cfg = OptimConfig {
            variant,
            gamma: 0.01,
            eta: 1.0,
            lr: 0.1,
            momentum: 0.0,
            weight_decay: 0.0,
            fisher_mode: FisherMode::GradientMagnitude,
        };
        let mut opt = Optimizer::new(cfg, 2).unwrap();
        let mut params = vec![1.0, -2.0];
        let l0 = model.loss(&params, &[()]).unwrap();
        for _ in 0..20 {
            let (next, _) = opt.step(&model, &params, &[()], cfg.lr).unwrap();
            params = next;
        }
        let l1 = model.loss(&params, &[()]).unwrap();
        assert!(l1 < l0, "{variant}: loss went {l0} -> {l1}");
    }
}

#[test]
fn trajectory_csv_layout_matches_recorded_steps() {
    let records = vec![
        TrajectoryRecord {
            iter: 0,
            params: vec![1.0, 2.0],
            loss: 0.5,
            probe_norm: 0.0,
            lr: 0.1,
        },
        TrajectoryRecord {
            iter: 1,
            params: vec![0.9, 1.9],
            loss: 0.4,
            probe_norm: 0.01,
            lr: 0.09,
        },
    ];
    let mut with_params = Vec::new();
    write_trajectory_csv(&mut with_params, &records, true).unwrap();
    let text = String::from_utf8(with_params).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "iter,loss,probe_norm,lr,theta_0,theta_1");
    assert_eq!(lines.clone().count(), 2);
    assert!(lines.next().unwrap().starts_with("0,"));

    let mut without = Vec::new();
    write_trajectory_csv(&mut without, &records, false).unwrap();
    let text = String::from_utf8(without).unwrap();
    assert_eq!(text.lines().next().unwrap(), "iter,loss,probe_norm,lr");
}

#[test]
fn invalid_hyperparameters_are_rejected_up_front() {
    let bad = [
        OptimConfig { gamma: -0.1, ..OptimConfig::sgd(0.1) },
        OptimConfig { eta: -1.0, ..OptimConfig::sgd(0.1) },
        OptimConfig { momentum: 1.0, ..OptimConfig::sgd(0.1) },
        OptimConfig { weight_decay: -1e-3, ..OptimConfig::sgd(0.1) },
        OptimConfig::sgd(0.0),
        OptimConfig::sgd(-0.5),
    ];
    for cfg in bad {
        assert!(Optimizer::new(cfg, 2).is_err(), "{cfg:?} accepted");
    }
}
