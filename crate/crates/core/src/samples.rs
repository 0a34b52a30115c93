//! Small hand-specified arms with known behaviour.
//!
//! The three-state arms are given to three decimals, so their rows are
//! renormalized to sum to one.

use crate::arm::RestlessArm;

fn normalized(n: usize, mut p: Vec<f64>) -> Vec<f64> {
    for row in p.chunks_mut(n) {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= s);
    }
    p
}

fn build(n: usize, p0: &[f64], p1: &[f64], r0: &[f64], r1: &[f64]) -> RestlessArm {
    RestlessArm::from_flat(
        n,
        normalized(n, p0.to_vec()),
        normalized(n, p1.to_vec()),
        r0.to_vec(),
        r1.to_vec(),
        None,
    )
    .expect("sample arm is valid")
}

/// Indexable three-state arm with indices close to (0.3, 0.8, 0.7).
pub fn three_state_indexable() -> RestlessArm {
    build(
        3,
        &[
            0.363, 0.503, 0.134, 0.082, 0.754, 0.164, 0.246, 0.029, 0.724,
        ],
        &[
            0.172, 0.175, 0.653, 0.055, 0.931, 0.014, 0.155, 0.627, 0.218,
        ],
        &[0.0; 3],
        &[0.441, 0.803, 0.426],
    )
}

/// Three-state arm that is not indexable.
pub fn three_state_non_indexable() -> RestlessArm {
    build(
        3,
        &[
            0.005, 0.793, 0.202, 0.027, 0.558, 0.415, 0.736, 0.249, 0.015,
        ],
        &[
            0.718, 0.254, 0.028, 0.347, 0.097, 0.556, 0.015, 0.956, 0.029,
        ],
        &[0.0; 3],
        &[0.699, 0.362, 0.715],
    )
}

/// Both actions identical and free: every state has index 0.
pub fn two_state_identical_actions() -> RestlessArm {
    let p = [0.0, 1.0, 0.0, 1.0];
    build(2, &p, &p, &[1.0, 1.0], &[1.0, 1.0])
}

/// Resting in state 0 is absorbing, so the passive policy is multichain
/// and is optimal only together with a multichain neighbour.
pub fn two_state_ambiguous() -> RestlessArm {
    build(
        2,
        &[1.0, 0.0, 0.0, 1.0],
        &[0.0, 1.0, 0.0, 1.0],
        &[1.0, 1.0],
        &[1.0, 1.0],
    )
}

/// Indexable with indices (+∞, 0) even though the passive policy is
/// multichain.
pub fn two_state_infinite_index() -> RestlessArm {
    build(
        2,
        &[1.0, 0.0, 0.0, 1.0],
        &[0.0, 1.0, 0.0, 1.0],
        &[0.0, 1.0],
        &[1.0, 1.0],
    )
}

/// The all-active policy is multichain, so the recursion cannot start.
pub fn two_state_multichain_start() -> RestlessArm {
    build(
        2,
        &[0.0, 1.0, 0.0, 1.0],
        &[1.0, 0.0, 0.0, 1.0],
        &[0.0, 0.0],
        &[0.0, 1.0],
    )
}
