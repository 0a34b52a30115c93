//! Restless arms: data model, validation, random generation and chain structure.

use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum deviation of a row sum from 1.
pub const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArmError {
    #[error("row {row} of P{action} sums to {sum}")]
    NonStochasticRow { row: usize, action: u8, sum: f64 },
    #[error("entry ({row}, {col}) of P{action} is {value}, outside [0, 1]")]
    BadEntry {
        row: usize,
        col: usize,
        action: u8,
        value: f64,
    },
    #[error("reward r{action}[{state}] is not finite")]
    NonFiniteReward { state: usize, action: u8 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("discount {0} is not in (0, 1)")]
    BadDiscount(f64),
    #[error("bandwidth {b} invalid for n = {n} (must be odd and at most 2n-1)")]
    BadBandwidth { n: usize, b: usize },
}

/// Arm record as it appears on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawArm {
    pub n: usize,
    #[serde(rename = "P0")]
    pub p0: Vec<Vec<f64>>,
    #[serde(rename = "P1")]
    pub p1: Vec<Vec<f64>>,
    pub r0: Vec<f64>,
    pub r1: Vec<f64>,
    #[serde(default)]
    pub discount: Option<f64>,
}

/// A validated two-action arm. Matrices are stored dense and row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RestlessArm {
    n: usize,
    p0: Vec<f64>,
    p1: Vec<f64>,
    r0: Vec<f64>,
    r1: Vec<f64>,
    discount: Option<f64>,
}

impl RestlessArm {
    /// Builds an arm from row-major flat matrices, validating it.
    pub fn from_flat(
        n: usize,
        p0: Vec<f64>,
        p1: Vec<f64>,
        r0: Vec<f64>,
        r1: Vec<f64>,
        discount: Option<f64>,
    ) -> Result<Self, ArmError> {
        if n == 0 {
            return Err(ArmError::ShapeMismatch("n must be at least 1".into()));
        }
        for (name, len, want) in [
            ("P0", p0.len(), n * n),
            ("P1", p1.len(), n * n),
            ("r0", r0.len(), n),
            ("r1", r1.len(), n),
        ] {
            if len != want {
                return Err(ArmError::ShapeMismatch(format!(
                    "{name} has {len} entries, expected {want}"
                )));
            }
        }
        for (action, p) in [(0u8, &p0), (1u8, &p1)] {
            for row in 0..n {
                let r = &p[row * n..(row + 1) * n];
                for (col, &value) in r.iter().enumerate() {
                    if !(0.0..=1.0).contains(&value) {
                        return Err(ArmError::BadEntry {
                            row,
                            col,
                            action,
                            value,
                        });
                    }
                }
                let sum: f64 = r.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(ArmError::NonStochasticRow { row, action, sum });
                }
            }
        }
        for (action, r) in [(0u8, &r0), (1u8, &r1)] {
            if let Some(state) = r.iter().position(|x| !x.is_finite()) {
                return Err(ArmError::NonFiniteReward { state, action });
            }
        }
        if let Some(beta) = discount
            && !(beta > 0.0 && beta < 1.0)
        {
            return Err(ArmError::BadDiscount(beta));
        }
        Ok(Self {
            n,
            p0,
            p1,
            r0,
            r1,
            discount,
        })
    }

    /// Rested arm: the state is frozen and unrewarded while passive.
    pub fn rested(p: &[f64], r: &[f64], discount: Option<f64>) -> Result<Self, ArmError> {
        let n = r.len();
        let mut eye = vec![0.0; n * n];
        for i in 0..n {
            eye[i * n + i] = 1.0;
        }
        Self::from_flat(n, eye, p.to_vec(), vec![0.0; n], r.to_vec(), discount)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Transition matrix of `action` (0 passive, 1 active), row-major.
    pub fn p(&self, action: u8) -> &[f64] {
        if action == 0 { &self.p0 } else { &self.p1 }
    }

    pub fn p0(&self) -> &[f64] {
        &self.p0
    }

    pub fn p1(&self) -> &[f64] {
        &self.p1
    }

    pub fn r0(&self) -> &[f64] {
        &self.r0
    }

    pub fn r1(&self) -> &[f64] {
        &self.r1
    }

    pub fn discount(&self) -> Option<f64> {
        self.discount
    }

    pub fn with_discount(mut self, discount: Option<f64>) -> Result<Self, ArmError> {
        if let Some(beta) = discount
            && !(beta > 0.0 && beta < 1.0)
        {
            return Err(ArmError::BadDiscount(beta));
        }
        self.discount = discount;
        Ok(self)
    }

    /// Row `i` of the transition matrix chosen by `policy`.
    pub fn policy_row(&self, policy: &Policy, i: usize) -> &[f64] {
        let p = if policy.contains(i) {
            &self.p1
        } else {
            &self.p0
        };
        &p[i * self.n..(i + 1) * self.n]
    }

    /// Largest absolute reward over both actions.
    pub fn max_abs_reward(&self) -> f64 {
        self.r0
            .iter()
            .chain(&self.r1)
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn to_raw(&self) -> RawArm {
        let rows = |p: &[f64]| p.chunks(self.n).map(<[f64]>::to_vec).collect();
        RawArm {
            n: self.n,
            p0: rows(&self.p0),
            p1: rows(&self.p1),
            r0: self.r0.clone(),
            r1: self.r1.clone(),
            discount: self.discount,
        }
    }
}

/// Validates a raw record into an arm.
pub fn validate_arm(raw: &RawArm) -> Result<RestlessArm, ArmError> {
    let n = raw.n;
    let flatten = |name: &str, m: &[Vec<f64>]| -> Result<Vec<f64>, ArmError> {
        if m.len() != n {
            return Err(ArmError::ShapeMismatch(format!(
                "{name} has {} rows, expected {n}",
                m.len()
            )));
        }
        let mut out = Vec::with_capacity(n * n);
        for (i, row) in m.iter().enumerate() {
            if row.len() != n {
                return Err(ArmError::ShapeMismatch(format!(
                    "{name} row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            out.extend_from_slice(row);
        }
        Ok(out)
    };
    let p0 = flatten("P0", &raw.p0)?;
    let p1 = flatten("P1", &raw.p1)?;
    RestlessArm::from_flat(n, p0, p1, raw.r0.clone(), raw.r1.clone(), raw.discount)
}

/// A policy: the set of states where the active action is taken.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Policy {
    active: Vec<bool>,
}

impl Policy {
    pub fn all(n: usize) -> Self {
        Self {
            active: vec![true; n],
        }
    }

    pub fn empty(n: usize) -> Self {
        Self {
            active: vec![false; n],
        }
    }

    pub fn from_states(n: usize, states: &[usize]) -> Self {
        let mut p = Self::empty(n);
        for &s in states {
            p.active[s] = true;
        }
        p
    }

    /// Policy whose active set is given by the bits of `mask`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        Self {
            active: (0..n).map(|i| mask >> i & 1 == 1).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.active.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.active[i]
    }

    pub fn set(&mut self, i: usize, on: bool) {
        self.active[i] = on;
    }

    pub fn len(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.active.iter().any(|&a| a)
    }

    pub fn states(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.active[i]).collect()
    }

    pub fn is_superset_of(&self, other: &Policy) -> bool {
        self.active
            .iter()
            .zip(&other.active)
            .all(|(&a, &b)| a || !b)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.active
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainKind {
    Unichain,
    Multichain,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainVerdict {
    pub kind: ChainKind,
    /// Recurrent classes, each sorted, ordered by smallest member.
    pub recurrent_classes: Vec<Vec<usize>>,
}

/// Recurrent classes of the chain whose support is given by `edge(i, j)`.
///
/// These are the strongly connected components with no outgoing edge.
pub fn recurrent_classes(n: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| edge(i, j)).collect())
        .collect();
    let comp = tarjan(&adj);
    let ncomp = comp.iter().copied().max().map_or(0, |c| c + 1);
    let mut closed = vec![true; ncomp];
    for i in 0..n {
        for &j in &adj[i] {
            if comp[i] != comp[j] {
                closed[comp[i]] = false;
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
    for i in 0..n {
        if closed[comp[i]] {
            classes[comp[i]].push(i);
        }
    }
    classes.retain(|c| !c.is_empty());
    classes.sort_by_key(|c| c[0]);
    classes
}

// Iterative Tarjan; returns the component id of every vertex.
fn tarjan(adj: &[Vec<usize>]) -> Vec<usize> {
    const UNSEEN: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut stack = Vec::new();
    let mut call: Vec<(usize, usize)> = Vec::new();
    let mut next = 0;
    let mut ncomp = 0;

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        while let Some(&(v, e)) = call.last() {
            if e == 0 && index[v] == UNSEEN {
                index[v] = next;
                low[v] = next;
                next += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if e < adj[v].len() {
                let w = adj[v][e];
                call.last_mut().unwrap().1 += 1;
                if index[w] == UNSEEN {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w] = false;
                    comp[w] = ncomp;
                    if w == v {
                        break;
                    }
                }
                ncomp += 1;
            }
        }
    }
    comp
}

fn verdict(classes: Vec<Vec<usize>>) -> ChainVerdict {
    let kind = if classes.len() == 1 {
        ChainKind::Unichain
    } else {
        ChainKind::Multichain
    };
    ChainVerdict {
        kind,
        recurrent_classes: classes,
    }
}

/// Structural chain analysis of the transition matrix induced by `policy`.
pub fn classify_policy_chain(arm: &RestlessArm, policy: &Policy) -> ChainVerdict {
    let n = arm.n();
    verdict(recurrent_classes(n, |i, j| {
        arm.policy_row(policy, i)[j] > 0.0
    }))
}

/// Chain analysis of an arbitrary row-major matrix's support.
pub fn classify_matrix_chain(n: usize, p: &[f64]) -> ChainVerdict {
    verdict(recurrent_classes(n, |i, j| p[i * n + j] > 0.0))
}

/// True when (P0 + P1) / 2 has a single recurrent class.
pub fn is_weakly_communicating(arm: &RestlessArm) -> bool {
    let (p0, p1, n) = (arm.p0(), arm.p1(), arm.n());
    recurrent_classes(n, |i, j| p0[i * n + j] > 0.0 || p1[i * n + j] > 0.0).len() == 1
}

// Exponential(1) by inversion.
fn exp1(rng: &mut Pcg64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln()
}

fn normalize(row: &mut [f64]) {
    let s: f64 = row.iter().sum();
    if s > 0.0 {
        row.iter_mut().for_each(|x| *x /= s);
    } else {
        let v = 1.0 / row.len() as f64;
        row.iter_mut().for_each(|x| *x = v);
    }
}

/// Dense random arm: rows of i.i.d. Exponential(1) draws normalized to one,
/// rewards Uniform[0, 1).
///
/// Draw order is P0 rows, P1 rows, r0, r1 from a `Pcg64` seeded with
/// `seed_from_u64(seed)`.
pub fn generate_dense_uniform(n: usize, seed: u64) -> RestlessArm {
    let b = 2 * n - 1;
    generate_banded(n, b, seed).expect("full bandwidth is always valid")
}

/// Random arm whose matrices have `b` nonzero diagonals.
///
/// Only in-band entries are drawn, so `b = 2n - 1` gives the dense generator.
pub fn generate_banded(n: usize, b: usize, seed: u64) -> Result<RestlessArm, ArmError> {
    assert!(n >= 1, "n must be positive");
    if b.is_multiple_of(2) || b > 2 * n - 1 {
        return Err(ArmError::BadBandwidth { n, b });
    }
    let half = (b - 1) / 2;
    let mut rng = Pcg64::seed_from_u64(seed);
    let draw_matrix = |rng: &mut Pcg64| {
        let mut p = vec![0.0; n * n];
        for i in 0..n {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let row = &mut p[i * n + lo..=i * n + hi];
            row.iter_mut().for_each(|x| *x = exp1(rng));
            normalize(row);
        }
        p
    };
    let p0 = draw_matrix(&mut rng);
    let p1 = draw_matrix(&mut rng);
    let r0: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let r1: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    RestlessArm::from_flat(n, p0, p1, r0, r1, None)
}
