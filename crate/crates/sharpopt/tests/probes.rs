//! Property tests for the perturbation rules: every probe lands exactly
//! on its constraint boundary, maximizes the linearized loss over that
//! boundary, and actually raises the loss for small radii.

use proptest::collection::vec;
use proptest::prelude::*;

use sharpopt::model::DifferentiableModel;
use sharpopt::optim::{asam_probe, fsam_probe, sam_probe};
use sharpopt::rng::RandomSource;
use sharpopt::toy2d::ToyModel;
use sharpopt::vector::dot;

const REL_TOL: f64 = 1e-9;

fn close_rel(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * b.abs().max(a.abs())
}

/// Entries big enough that squaring cannot underflow to zero.
fn entry() -> impl Strategy<Value = f64> {
    prop_oneof![(-100.0..100.0f64), (-1.0..1.0f64)]
        .prop_filter("avoid zero-ish entries", |v| v.abs() > 1e-6)
}

proptest! {
    #[test]
    fn sam_probe_sits_on_the_sphere(
        g in vec(entry(), 1..8),
        gamma in 1e-6..10.0f64,
    ) {
        let p = sam_probe(&g, gamma);
        prop_assert!(p.grad_norm > 0.0);
        prop_assert!(close_rel(p.constraint_value, gamma * gamma),
            "constraint {} vs {}", p.constraint_value, gamma * gamma);
    }

    #[test]
    fn asam_probe_sits_on_its_ellipsoid(
        pairs in vec((entry(), entry()), 1..8),
        gamma in 1e-6..10.0f64,
    ) {
        let theta: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let g: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let p = asam_probe(&theta, &g, gamma).unwrap();
        prop_assert!(p.grad_norm > 0.0);
        prop_assert!(close_rel(p.constraint_value, gamma * gamma),
            "constraint {} vs {}", p.constraint_value, gamma * gamma);
    }

    #[test]
    fn fsam_probe_sits_on_its_ellipsoid(
        pairs in vec((entry(), 1e-4..100.0f64), 1..8),
        gamma in 1e-6..10.0f64,
    ) {
        let g: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let inv: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let p = fsam_probe(&g, &inv, gamma).unwrap();
        prop_assert!(p.grad_norm > 0.0);
        prop_assert!(close_rel(p.constraint_value, gamma * gamma),
            "constraint {} vs {}", p.constraint_value, gamma * gamma);
    }

    /// No feasible perturbation gains more linearized loss than the probe.
    #[test]
    fn probes_maximize_linearized_gain(
        pairs in vec((entry(), entry(), 1e-4..100.0f64), 1..8),
        gamma in 1e-6..10.0f64,
        seed in any::<u64>(),
    ) {
        let theta: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let g: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let inv: Vec<f64> = pairs.iter().map(|p| p.2).collect();
        let k = g.len();
        let mut rng = RandomSource::new(seed);

        let sam = sam_probe(&g, gamma);
        let asam = asam_probe(&theta, &g, gamma).unwrap();
        let fsam = fsam_probe(&g, &inv, gamma).unwrap();
        let best = [
            dot(&g, &sam.epsilon).unwrap(),
            dot(&g, &asam.epsilon).unwrap(),
            dot(&g, &fsam.epsilon).unwrap(),
        ];

        for _ in 0..50 {
            let v: Vec<f64> = (0..k).map(|_| rng.standard_normal()).collect();
            // Rescale the direction onto each constraint boundary.
            let s_sam = gamma / v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let s_asam = gamma
                / v.iter()
                    .zip(&theta)
                    .map(|(x, t)| (x / t) * (x / t))
                    .sum::<f64>()
                    .sqrt();
            let s_fsam = gamma
                / v.iter()
                    .zip(&inv)
                    .map(|(x, f)| x * x / f)
                    .sum::<f64>()
                    .sqrt();
            for (b, s) in best.iter().zip([s_sam, s_asam, s_fsam]) {
                let cand: Vec<f64> = v.iter().map(|x| x * s).collect();
                let gain = dot(&g, &cand).unwrap();
                prop_assert!(gain <= b + REL_TOL * (1.0 + b.abs()),
                    "candidate gain {gain} beats probe gain {b}");
            }
        }
    }

    /// Small probes never decrease the loss beyond rounding.
    #[test]
    fn small_probes_do_not_descend(
        mu in -50.0..50.0f64,
        sigma in 1.0..50.0f64,
        gamma in 1e-8..1e-3f64,
    ) {
        let model = ToyModel::reference();
        let theta = [mu, sigma];
        let g = model.grad(&theta, &[()]).unwrap();

        let sigma2 = sigma * sigma;
        let inv = [sigma2, sigma2 / 2.0];
        let probes = [
            sam_probe(&g, gamma),
            asam_probe(&theta, &g, gamma).unwrap(),
            fsam_probe(&g, &inv, gamma).unwrap(),
        ];
        let base = model.loss(&theta, &[()]).unwrap();
        for p in probes {
            let moved = [theta[0] + p.epsilon[0], theta[1] + p.epsilon[1]];
            if moved[1] <= 0.0 {
                continue;
            }
            let l = model.loss(&moved, &[()]).unwrap();
            prop_assert!(l >= base - 1e-6, "loss fell {base} -> {l} (probe {:?})", p.epsilon);
        }
    }

    /// Zero radius gives a zero probe regardless of the other inputs.
    #[test]
    fn zero_gamma_means_zero_probe(
        pairs in vec((entry(), entry(), 1e-4..100.0f64), 1..8),
    ) {
        let theta: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let g: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let inv: Vec<f64> = pairs.iter().map(|p| p.2).collect();
        let zeros = vec![0.0; g.len()];
        prop_assert_eq!(&sam_probe(&g, 0.0).epsilon, &zeros);
        prop_assert_eq!(&asam_probe(&theta, &g, 0.0).unwrap().epsilon, &zeros);
        prop_assert_eq!(&fsam_probe(&g, &inv, 0.0).unwrap().epsilon, &zeros);
    }

    /// An all-ones inverse metric reduces the Fisher probe to SAM exactly.
    #[test]
    fn identity_metric_collapses_fisher_probe_to_sam(
        g in vec(entry(), 1..8),
        gamma in 1e-6..10.0f64,
    ) {
        let ones = vec![1.0; g.len()];
        let f = fsam_probe(&g, &ones, gamma).unwrap();
        let s = sam_probe(&g, gamma);
        prop_assert_eq!(f.epsilon, s.epsilon);
        prop_assert_eq!(f.grad_norm.to_bits(), s.grad_norm.to_bits());
    }
}

#[test]
fn zero_gradient_freezes_every_probe() {
    let g = [0.0, 0.0, 0.0];
    let theta = [1.0, -2.0, 3.0];
    let inv = [1.0, 2.0, 3.0];
    for eps in [
        sam_probe(&g, 0.5).epsilon,
        asam_probe(&theta, &g, 0.5).unwrap().epsilon,
        fsam_probe(&g, &inv, 0.5).unwrap().epsilon,
    ] {
        assert_eq!(eps, vec![0.0; 3]);
    }
}

#[test]
fn zero_parameters_freeze_asam() {
    let p = asam_probe(&[0.0, 0.0], &[3.0, -4.0], 1.0).unwrap();
    assert_eq!(p.epsilon, vec![0.0, 0.0]);
    assert_eq!(p.grad_norm, 0.0);
    assert_eq!(p.constraint_value, 0.0);
}
