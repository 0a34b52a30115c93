#![allow(dead_code)]

use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg64;
use whittle::{Policy, RestlessArm, generate_banded, generate_dense_uniform};

/// Random arm whose rows keep each entry with probability `density`
/// (at least one per row), so that multichain policies occur.
pub fn sparse_arm(n: usize, density: f64, seed: u64) -> RestlessArm {
    let mut rng = Pcg64::seed_from_u64(seed);
    let matrix = |rng: &mut Pcg64| {
        let mut p = vec![0.0; n * n];
        for row in p.chunks_mut(n) {
            let keep = rng.random_range(0..n);
            for (j, v) in row.iter_mut().enumerate() {
                if j == keep || rng.random::<f64>() < density {
                    *v = rng.random::<f64>() + 0.05;
                }
            }
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
        p
    };
    let p0 = matrix(&mut rng);
    let p1 = matrix(&mut rng);
    let r0 = (0..n).map(|_| rng.random::<f64>()).collect();
    let r1 = (0..n).map(|_| rng.random::<f64>()).collect();
    RestlessArm::from_flat(n, p0, p1, r0, r1, None).unwrap()
}

/// Dense for even seeds, tridiagonal for odd ones.
pub fn mixed_arm(n: usize, seed: u64) -> RestlessArm {
    if seed.is_multiple_of(2) {
        generate_dense_uniform(n, seed)
    } else {
        generate_banded(n, 3.min(2 * n - 1), seed).unwrap()
    }
}

pub fn random_policy(n: usize, seed: u64) -> Policy {
    let mut rng = Pcg64::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut p = Policy::empty(n);
    for i in 0..n {
        p.set(i, rng.random::<bool>());
    }
    p
}

/// Componentwise agreement within `tol (1 + |x|)`, treating infinities as
/// exact. Large indices come from ill-conditioned arms, where only the
/// relative error is meaningful.
pub fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            if x.is_infinite() || y.is_infinite() {
                x == y
            } else {
                (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs()))
            }
        })
}
