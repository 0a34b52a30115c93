mod common;

use common::{close, mixed_arm, random_policy, sparse_arm};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg64;
use whittle::arm::classify_matrix_chain;
use whittle::linalg::{build_A_matrix, solve_dense, woodbury_block_update};
use whittle::oracle::{enumerate_bellman_optimal, naive_whittle, oracle_gittins};
use whittle::{
    ChainKind, Criterion, DenseMatrix, LinalgError, Policy, RestlessArm, SolverOptions, Variant,
    Verdict, advantage_at, classify_policy_chain, compute_indices, default_recompute_count,
    generate_banded, gittins_indices, is_weakly_communicating, validate_arm,
};

fn random_matrix(n: usize, rng: &mut Pcg64) -> DenseMatrix {
    // Diagonal shift keeps the instances well conditioned.
    DenseMatrix::from_fn(n, n, |i, j| {
        rng.random::<f64>() - 0.5 + if i == j { n as f64 / 2.0 } else { 0.0 }
    })
}

fn run(arm: &RestlessArm, variant: Variant, check: bool) -> whittle::IndexResult {
    let opts = SolverOptions::default()
        .with_variant(variant)
        .with_check(check);
    compute_indices(arm, &opts).unwrap()
}

// Indices far beyond the reward scale come from nearly reducible arms and are
// only accurate to about 1e-7 relative in any variant, so those get a looser
// relative bound.
fn same_verdict(a: &Verdict, b: &Verdict, tol: f64) -> bool {
    match (a, b) {
        (Verdict::Indexable(x), Verdict::Indexable(y)) => {
            let big = x.iter().any(|v| v.is_finite() && v.abs() > 1e6);
            close(x, y, if big { tol.max(1e-6) } else { tol })
        }
        _ => a == b,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn unichain_iff_invertible(n in 1usize..=8, density in 0.0f64..0.6, seed in any::<u64>()) {
        let arm = sparse_arm(n, density, seed);
        let policy = random_policy(n, seed);
        let unichain = classify_policy_chain(&arm, &policy).kind == ChainKind::Unichain;
        let a = build_A_matrix(&arm, &policy);
        let solved = solve_dense(&a, &DenseMatrix::identity(n));
        prop_assert_eq!(unichain, solved.is_ok(), "{:?}", solved.err());
    }

    #[test]
    fn weakly_communicating_is_unichain_average(
        n in 1usize..=8, density in 0.0f64..0.6, seed in any::<u64>(),
    ) {
        let arm = sparse_arm(n, density, seed);
        let avg: Vec<f64> = arm.p0().iter().zip(arm.p1()).map(|(a, b)| 0.5 * (a + b)).collect();
        prop_assert_eq!(
            is_weakly_communicating(&arm),
            classify_matrix_chain(n, &avg).kind == ChainKind::Unichain
        );
    }

    #[test]
    fn generated_arms_are_valid_and_reproducible(n in 1usize..=30, half in 0usize..30, seed in any::<u64>()) {
        let b = (2 * half + 1).min(2 * n - 1);
        let arm = generate_banded(n, b, seed).unwrap();
        prop_assert!(validate_arm(&arm.to_raw()).is_ok());
        prop_assert_eq!(&arm, &generate_banded(n, b, seed).unwrap());
        let w = (b - 1) / 2;
        for i in 0..n {
            for j in 0..n {
                if i.abs_diff(j) > w {
                    prop_assert_eq!(arm.p0()[i * n + j], 0.0);
                    prop_assert_eq!(arm.p1()[i * n + j], 0.0);
                }
            }
        }
    }

    #[test]
    fn solve_dense_residual(n in 1usize..=60, seed in any::<u64>()) {
        let mut rng = Pcg64::seed_from_u64(seed);
        let a = random_matrix(n, &mut rng);
        let b = DenseMatrix::from_fn(n, n, |_, _| rng.random::<f64>());
        let x = solve_dense(&a, &b).unwrap();
        let res = x.matmul(&a).sub(&b).norm_inf();
        prop_assert!(res <= 1e-8 * b.norm_inf().max(1.0), "residual {}", res);
    }

    #[test]
    fn composed_rank_one_updates_match_scratch(n in 2usize..=50, k in 1usize..=6, seed in any::<u64>()) {
        let mut rng = Pcg64::seed_from_u64(seed);
        let mut a = random_matrix(n, &mut rng);
        let mut inv = solve_dense(&a, &DenseMatrix::identity(n)).unwrap();
        for _ in 0..k {
            // Replace one row of A, as a policy change does.
            let i = rng.random_range(0..n);
            let delta: Vec<f64> = (0..n).map(|_| 0.3 * (rng.random::<f64>() - 0.5)).collect();
            let u = DenseMatrix::from_fn(n, 1, |r, _| if r == i { 1.0 } else { 0.0 });
            let v = DenseMatrix::from_vec(1, n, delta.clone());
            inv = match woodbury_block_update(&inv, &u, &DenseMatrix::identity(1), &v) {
                Ok(m) => m,
                Err(LinalgError::InnerSingular) => return Ok(()),
                Err(e) => panic!("{e}"),
            };
            for (j, d) in delta.iter().enumerate() {
                a[(i, j)] += d;
            }
        }
        let scratch = solve_dense(&a, &DenseMatrix::identity(n)).unwrap();
        let err = inv.sub(&scratch).max_abs() / scratch.max_abs();
        prop_assert!(err <= 1e-8, "relative error {}", err);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn variants_agree(n in 1usize..=60, seed in any::<u64>()) {
        let arm = mixed_arm(n, seed);
        let cubic = run(&arm, Variant::Cubic, true);
        for v in [Variant::Naive, Variant::Block(default_recompute_count(n)), Variant::Block(3)] {
            let other = run(&arm, v, true);
            prop_assert!(same_verdict(&cubic.verdict, &other.verdict, 1e-7), "{:?}: {:?} vs {:?}", v, cubic, other);
        }
        if cubic.is_indexable() {
            let nc = run(&arm, Variant::Cubic, false);
            prop_assert_eq!(&cubic.verdict, &nc.verdict);
        }
    }

    #[test]
    fn sparse_arms_agree_with_naive(n in 1usize..=8, density in 0.0f64..0.5, seed in any::<u64>()) {
        let arm = sparse_arm(n, density, seed);
        prop_assume!(is_weakly_communicating(&arm));
        let naive = naive_whittle(&arm, Criterion::AverageReward).unwrap();
        for v in [Variant::Cubic, Variant::Block(2)] {
            let r = run(&arm, v, true);
            prop_assert!(same_verdict(&naive.verdict, &r.verdict, 1e-7), "{:?}: {:?} vs {:?}", v, naive, r);
        }
    }

    #[test]
    fn indices_follow_sigma_and_certify_zero_crossings(n in 1usize..=12, seed in any::<u64>()) {
        let arm = mixed_arm(n, seed);
        let r = run(&arm, Variant::Cubic, true);
        let Some(lambda) = r.indices() else { return Ok(()); };
        let ordered: Vec<f64> = r.sigma.iter().map(|&i| lambda[i]).collect();
        prop_assert!(ordered.windows(2).all(|w| w[0] <= w[1]), "{:?}", ordered);
        let mut policy = Policy::all(n);
        for &s in &r.sigma {
            let l = lambda[s];
            if l.is_infinite() {
                break;
            }
            let alpha = advantage_at(&arm, &policy, l, Criterion::AverageReward).unwrap();
            prop_assert!(alpha[s].abs() <= 1e-6, "state {}: {}", s, alpha[s]);
            for (i, a) in alpha.iter().enumerate() {
                if policy.contains(i) {
                    prop_assert!(*a >= -1e-6);
                } else {
                    prop_assert!(*a <= 1e-6);
                }
            }
            policy.set(s, false);
        }
    }

    #[test]
    fn policies_between_breakpoints_are_unique(n in 1usize..=7, seed in any::<u64>()) {
        let arm = mixed_arm(n, seed);
        let r = run(&arm, Variant::Cubic, true);
        let Some(lambda) = r.indices() else { return Ok(()); };
        let mut policy = Policy::all(n);
        let mut prev = f64::NEG_INFINITY;
        for &s in &r.sigma {
            let l = lambda[s];
            if l > prev + 1e-6 && l.is_finite() {
                let probe = if prev.is_finite() { 0.5 * (prev + l) } else { l - 1.0 };
                let opt = enumerate_bellman_optimal(&arm, probe).unwrap();
                prop_assert_eq!(opt, vec![policy.clone()], "penalty {}", probe);
            }
            policy.set(s, false);
            prev = l;
        }
        // Each finite index switches its state off in every optimal policy.
        for (i, &l) in lambda.iter().enumerate() {
            if l.is_finite() {
                let below = enumerate_bellman_optimal(&arm, l - 1e-4).unwrap();
                let above = enumerate_bellman_optimal(&arm, l + 1e-4).unwrap();
                prop_assert!(below.iter().all(|p| p.contains(i)));
                prop_assert!(above.iter().all(|p| !p.contains(i)));
            }
        }
    }

    #[test]
    fn rested_arms_are_always_indexable(n in 1usize..=20, beta in 0.05f64..0.995, seed in any::<u64>()) {
        let base = mixed_arm(n, seed);
        let arm = RestlessArm::rested(base.p1(), base.r1(), None).unwrap();
        let opts = SolverOptions::default().with_criterion(Criterion::Discounted(beta));
        let r = compute_indices(&arm, &opts).unwrap();
        prop_assert!(r.is_indexable(), "{:?}", r);
        let g = gittins_indices(base.p1(), base.r1(), beta).unwrap();
        prop_assert!(close(r.indices().unwrap(), &g, 1e-7));
        let o = oracle_gittins(base.p1(), base.r1(), beta);
        prop_assert!(close(&g, &o, 1e-7), "{:?} vs {:?}", g, o);
    }

    #[test]
    fn advantage_is_affine(n in 1usize..=10, seed in any::<u64>(), l1 in -5.0f64..5.0, l2 in -5.0f64..5.0) {
        let arm = generate_banded(n, 2 * n - 1, seed).unwrap();
        let policy = random_policy(n, seed);
        let c = Criterion::AverageReward;
        let a1 = advantage_at(&arm, &policy, l1, c).unwrap();
        let a2 = advantage_at(&arm, &policy, l2, c).unwrap();
        let mid = advantage_at(&arm, &policy, 0.5 * (l1 + l2), c).unwrap();
        for i in 0..n {
            prop_assert!((a1[i] + a2[i] - 2.0 * mid[i]).abs() <= 1e-9);
        }
    }
}

#[test]
fn full_policy_advantage_slope_is_minus_one() {
    let arm = whittle::generate_dense_uniform(7, 3);
    let all = Policy::all(7);
    let h = 1e-3;
    let a = advantage_at(&arm, &all, 0.2, Criterion::AverageReward).unwrap();
    let b = advantage_at(&arm, &all, 0.2 + h, Criterion::AverageReward).unwrap();
    for i in 0..7 {
        assert!(((b[i] - a[i]) / h + 1.0).abs() < 1e-9);
    }
}

#[test]
fn larger_arms_agree_across_variants() {
    for (n, seed) in [(120, 1u64), (200, 2), (200, 5)] {
        let arm = mixed_arm(n, seed);
        let cubic = run(&arm, Variant::Cubic, true);
        for v in [
            Variant::Naive,
            Variant::Block(default_recompute_count(n)),
            Variant::Block(7),
        ] {
            let other = run(&arm, v, true);
            assert!(
                same_verdict(&cubic.verdict, &other.verdict, 1e-7),
                "n={n} {v:?}"
            );
        }
    }
}
