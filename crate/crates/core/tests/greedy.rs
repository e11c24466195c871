use jacobi_greedy::greedy::{
    block_witness_expansion, greedy_approx, greedy_ordering, quasi_greedy_profile, quasi_greedy_profile_terms,
    quasi_greedy_ratio, Expansion, ScaledTerm,
};
use jacobi_greedy::quadrature::MeshConfig;
use jacobi_greedy::{JacobiParams, NormalizationMode};
use proptest::prelude::*;

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Lexicographically smallest permutation among those sorted by non-increasing magnitude.
fn brute_force_order(e: &Expansion) -> Vec<usize> {
    let support: Vec<usize> = e.support().collect();
    permutations(&support)
        .into_iter()
        .filter(|perm| perm.windows(2).all(|w| e.coeff(w[0]).abs() >= e.coeff(w[1]).abs()))
        .min()
        .unwrap_or_default()
}

fn expansion_strategy(max_support: usize) -> impl Strategy<Value = Expansion> {
    // Coefficients from a small set so that ties in magnitude are common.
    let coeff = prop::sample::select(vec![-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0, 0.25]);
    prop::collection::vec((0usize..40, coeff), 1..=max_support).prop_map(|pairs| {
        let mut e = Expansion::new(JacobiParams::legendre(), NormalizationMode::Orthonormal);
        for (n, c) in pairs {
            e.set(n, c);
        }
        e
    })
}

fn mesh() -> MeshConfig {
    MeshConfig::default().with_tolerance(1e-7)
}

proptest! {
    #[test]
    fn ordering_matches_brute_force(e in expansion_strategy(7)) {
        prop_assert_eq!(greedy_ordering(&e).order, brute_force_order(&e));
    }

    #[test]
    fn nesting(e in expansion_strategy(8)) {
        for m in 0..e.len() {
            let small = greedy_approx(&e, m);
            let big = greedy_approx(&e, m + 1);
            prop_assert!(small.support().all(|n| big.coeff(n) == e.coeff(n)));
            prop_assert_eq!(big.len(), m + 1);
        }
        prop_assert_eq!(greedy_approx(&e, e.len()), e);
    }

    #[test]
    fn idempotence(e in expansion_strategy(8), m in 0usize..10) {
        let g = greedy_approx(&e, m);
        prop_assert_eq!(greedy_approx(&g, m), g.clone());
        for k in 0..=m {
            prop_assert_eq!(greedy_approx(&g, k), greedy_approx(&e, k));
        }
    }

    #[test]
    fn scaling_preserves_ordering(e in expansion_strategy(8), s in prop::sample::select(vec![-7.5, -1.0, 1e-3, 2.0, 1e6])) {
        prop_assert_eq!(greedy_ordering(&e.scaled(s)).order, greedy_ordering(&e).order);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ratio_is_scale_invariant(e in expansion_strategy(5), s in prop::sample::select(vec![-3.0, 0.125, 40.0])) {
        let a = quasi_greedy_ratio(&e, 3.0, &mesh()).unwrap();
        let b = quasi_greedy_ratio(&e.scaled(s), 3.0, &mesh()).unwrap();
        prop_assert!((a - b).abs() <= 1e-6 * a, "{} vs {}", a, b);
    }

    #[test]
    fn p2_contraction(e in expansion_strategy(8)) {
        let r = quasi_greedy_ratio(&e, 2.0, &MeshConfig::default()).unwrap();
        prop_assert!(r <= 1.0 + 1e-8, "{}", r);
    }

    #[test]
    fn rescaled_system_ratio_stays_comparable(lambdas in prop::collection::vec(0.5f64..=2.0, 12)) {
        let params = JacobiParams::new(0.5, 0.0).unwrap();
        let tests: [&[(usize, f64)]; 3] = [
            &[(0, 1.0), (1, -0.9), (3, 0.8), (6, 0.7)],
            &[(2, 2.0), (4, 1.0), (5, 1.0), (8, -1.0), (11, 0.5)],
            &[(1, 0.3), (7, -1.2), (9, 1.1), (10, 1.0)],
        ];
        for coeffs in tests {
            let e = Expansion::from_coeffs(params, NormalizationMode::Orthonormal, coeffs.iter().copied());
            let base = quasi_greedy_ratio(&e, 3.0, &mesh()).unwrap();
            let terms: Vec<ScaledTerm> = e
                .terms(None)
                .unwrap()
                .into_iter()
                .map(|t| ScaledTerm { scale: t.scale * lambdas[t.index], ..t })
                .collect();
            let perturbed = quasi_greedy_profile_terms(params, &terms, 3.0, &mesh()).unwrap().max_ratio;
            prop_assert!(perturbed <= 4.0 * base, "{} vs {}", perturbed, base);
        }
    }
}

#[test]
fn crafted_block_expansion_ratio_grows() {
    let params = JacobiParams::legendre();
    let ratios: Vec<f64> = [8, 32, 128]
        .iter()
        .map(|&n| {
            let e = block_witness_expansion(params, NormalizationMode::SqrtScaled, n, 5, 0.01);
            quasi_greedy_profile(&e, 3.0, &mesh()).unwrap().max_ratio
        })
        .collect();
    assert!(ratios[0] < ratios[1] && ratios[1] < ratios[2], "{ratios:?}");
    assert!(ratios[2] > 1.5 * ratios[0], "{ratios:?}");
}

#[test]
fn crafted_block_expansion_is_flat_at_p2() {
    let params = JacobiParams::legendre();
    for n in [8, 64] {
        let e = block_witness_expansion(params, NormalizationMode::Orthonormal, n, 5, 0.01);
        assert!(quasi_greedy_ratio(&e, 2.0, &mesh()).unwrap() <= 1.0 + 1e-8);
    }
}
