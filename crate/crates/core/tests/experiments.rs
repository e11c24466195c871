use std::f64::consts::PI;

use jacobi_greedy::experiments::*;
use jacobi_greedy::{JacobiParams, NormalizationMode};
use proptest::prelude::*;

fn legendre() -> JacobiParams {
    JacobiParams::legendre()
}

/// `‖Σ_{n∈A_N} n^{1/2} P_n‖_{L_p(dx)}` by the trapezoid rule in θ on `points`
/// intervals, with Legendre polynomials from Bonnet's recursion.
fn dense_block_norm(big_n: usize, p: f64, points: usize) -> f64 {
    let top = 3 * big_n - 2;
    let h = PI / points as f64;
    let mut sum = 0.0;
    for i in 1..points {
        let theta = i as f64 * h;
        let x = theta.cos();
        let (mut prev, mut cur) = (1.0, x);
        let mut total = 0.0;
        for n in 1..=top {
            if n >= big_n && (n - big_n).is_multiple_of(2) {
                total += (n as f64).sqrt() * cur;
            }
            let next = ((2 * n + 1) as f64 * x * cur - n as f64 * prev) / (n + 1) as f64;
            prev = cur;
            cur = next;
        }
        sum += total.abs().powf(p) * theta.sin() * h;
    }
    sum.powf(1.0 / p)
}

#[test]
fn block_sum_matches_dense_trapezoid() {
    let cfg = ExperimentConfig::new(legendre(), 3.0, vec![8, 16]).with_mode(NormalizationMode::SqrtScaled);
    let r = block_sum_experiment(&cfg).unwrap();
    let dense = dense_block_norm(8, 3.0, 1_000_000);
    assert!((r.norms[0] - dense).abs() < 1e-3 * dense, "{} vs {dense}", r.norms[0]);
}

#[test]
fn block_sum_at_two_has_half_slope() {
    let cfg = ExperimentConfig::new(legendre(), 2.0, geometric_grid(8, 128)).with_mode(NormalizationMode::SqrtScaled);
    let r = block_sum_experiment(&cfg).unwrap();
    assert!((r.fit.slope - 0.5).abs() < 0.02, "{}", r.fit.slope);
    assert_eq!(r.omega, 0.5);
    // Orthogonality: ‖Σ n^{1/2} P_n‖_2² = Σ 2n/(2n+1).
    for (&n, &v) in r.sizes.iter().zip(&r.norms) {
        let exact: f64 = (0..n).map(|k| (n + 2 * k) as f64).map(|m| 2.0 * m / (2.0 * m + 1.0)).sum();
        assert!((v - exact.sqrt()).abs() < 1e-9 * v);
    }
}

#[test]
fn orthonormal_average_at_two_is_sqrt_n() {
    let cfg = ExperimentConfig::new(legendre(), 2.0, vec![4, 8, 16, 32]).with_samples(8).with_seed(1);
    let r = average_block_experiment(&cfg).unwrap();
    for (i, &n) in r.sizes.iter().enumerate() {
        let want = (n as f64).sqrt();
        assert!((r.orthonormal.square_norms[i] - want).abs() < 1e-6 * want);
        assert!((r.orthonormal.rademacher_means[i] - want).abs() < 1e-6 * want);
    }
    assert!((r.orthonormal.rademacher_fit.slope - 0.5).abs() < 1e-9);
}

#[test]
fn average_ratio_stays_in_fixed_interval() {
    let cfg = ExperimentConfig::new(JacobiParams::new(0.5, 0.0).unwrap(), 2.5, geometric_grid(4, 128)).with_seed(11);
    let r = average_block_experiment(&cfg).unwrap();
    let (lo, hi) = r.orthonormal.ratio_range;
    assert!(lo > 0.5 && hi < 2.0 && hi / lo < 1.5, "{lo} {hi}");
}

#[test]
fn experiments_are_deterministic() {
    let cfg = ExperimentConfig::new(legendre(), 3.0, vec![4, 8, 16]).with_samples(16).with_seed(9);
    let a = average_block_experiment(&cfg).unwrap();
    let b = average_block_experiment(&cfg).unwrap();
    assert_eq!(a, b);
    let cfg = cfg.with_mode(NormalizationMode::SqrtScaled);
    assert_eq!(block_sum_experiment(&cfg).unwrap(), block_sum_experiment(&cfg).unwrap());
}

#[test]
fn geometric_identity_fuzz() {
    for params in [legendre(), JacobiParams::new(1.0, -0.3).unwrap()] {
        let worst = geometric_sum_fuzz(params, 10_000, 64, 1e-3, 17).unwrap();
        assert!(worst < 1e-9, "{worst}");
    }
}

#[test]
fn near_one_alpha_one() {
    let degrees: Vec<usize> = (1..=100).map(|k| 10 * k).collect();
    let r = near_one_experiment(JacobiParams::new(1.0, 0.0).unwrap(), &degrees, &[0.5]).unwrap();
    let e = &r.envelopes[0];
    assert!(e.min_ratio > 0.0 && e.max_ratio / e.min_ratio <= NEAR_ONE_MAX_SPREAD, "{e:?}");
    assert!((r.root_fit.slope + 2.0).abs() < 0.05, "{}", r.root_fit.slope);
}

#[test]
fn near_one_sweep_selects_largest_bounded_d() {
    let degrees = [10, 40, 160];
    let r = near_one_experiment(legendre(), &degrees, &[8.0, 0.5, 2.0]).unwrap();
    let bounded: Vec<f64> = r.envelopes.iter().filter(|e| e.bounded).map(|e| e.d).collect();
    assert_eq!(r.selected_d, bounded.iter().copied().reduce(f64::max));
    assert!(!r.envelopes[0].bounded, "d = 8 reaches past the first zero");
}

#[test]
fn witness_at_two_and_three() {
    let mut cfg = WitnessConfig::new(legendre(), 2.0, 3);
    cfg.block_sizes = geometric_grid(8, 128);
    cfg.average_sizes = geometric_grid(8, 128);
    cfg.samples = 16;
    let w = main_theorem_witness(&cfg).unwrap();
    assert!(w.gap.abs() < 0.04, "{}", w.gap);
    assert_eq!(w.verdict, Verdict::ConsistentWithQuasiGreedy);

    cfg.p = 3.0;
    let w = main_theorem_witness(&cfg).unwrap();
    assert!(w.gap > 0.25, "{}", w.gap);
    assert_eq!(w.verdict, Verdict::ConsistentWithNonQuasiGreedy);
    assert!(w.sign_ratios.windows(2).all(|r| r[1] < r[0]), "{:?}", w.sign_ratios);
}

proptest! {
    #[test]
    fn critical_exponents_are_conjugate(a in -0.49f64..5.0, b in -0.49f64..5.0) {
        let params = JacobiParams::new(a, b).unwrap();
        let c = critical_exponents(params).unwrap();
        prop_assert!((1.0 / c.p_crit + 1.0 / c.q_crit - 1.0).abs() < 1e-12);
        prop_assert!(c.contains(2.0));
        prop_assert!((omega_exponent(params, 2.0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn omega_minus_half_has_sign_of_p_minus_two(a in -0.49f64..3.0, b in -0.49f64..3.0, t in 0.01f64..0.99) {
        let params = JacobiParams::new(a, b).unwrap();
        let c = critical_exponents(params).unwrap();
        let p = c.p_crit + t * (c.q_crit - c.p_crit);
        prop_assume!((p - 2.0).abs() > 1e-6);
        let w = omega_exponent(params, p).unwrap();
        prop_assert!((w - 0.5) * (p - 2.0) > 0.0, "p={} omega={}", p, w);
    }
}
