//! Brute-force reference computations for small arms.
//!
//! Everything here except [`naive_whittle`] evaluates policies with its own
//! nalgebra solves and never touches the recursion in `index_solver`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::arm::{ChainKind, Policy, RestlessArm, classify_policy_chain, is_weakly_communicating};
use crate::index_solver::{
    Criterion, DEN_TOL, IndexResult, SolverError, SolverOptions, Variant, Verdict,
    affine_advantage, check_preconditions,
};
use crate::linalg::AffineVector;

/// Largest arm accepted by [`oracle_indexability`].
pub const MAX_ORACLE_N: usize = 10;
/// Largest arm accepted by [`enumerate_bellman_optimal`].
pub const MAX_ENUMERATE_N: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("{0} states is too many for exhaustive enumeration")]
    TooLarge(usize),
    #[error("arm is not weakly communicating")]
    NotWeaklyCommunicating,
    #[error("action preference of state {0} is not monotone in the penalty")]
    NonMonotone(usize),
}

/// Reference index computation that re-solves the policy evaluation from
/// scratch at every iteration, O(n⁴) overall.
pub fn naive_whittle(arm: &RestlessArm, criterion: Criterion) -> Result<IndexResult, SolverError> {
    let opts = SolverOptions {
        variant: Variant::Naive,
        criterion,
        ..SolverOptions::default()
    };
    check_preconditions(arm, &opts)?;
    Ok(naive_whittle_with(arm, &opts))
}

pub(crate) fn naive_whittle_with(arm: &RestlessArm, opts: &SolverOptions) -> IndexResult {
    let n = arm.n();
    let eps_z = opts.tolerance * (1.0 + arm.max_abs_reward());
    let mut policy = Policy::all(n);
    let mut sigma = Vec::with_capacity(n);
    let mut lambda = vec![f64::NAN; n];
    let mut prev = f64::NEG_INFINITY;
    let done = |verdict, sigma, iterations| IndexResult {
        verdict,
        sigma,
        iterations,
    };

    for k in 1..=n {
        let Ok(adv) = affine_advantage(arm, &policy, opts.criterion) else {
            return done(Verdict::Multichain { at_policy: policy }, sigma, k - 1);
        };
        // α_i(λ) = z_i - (λ - prev) den_i
        let z: Vec<f64> = (0..n).map(|i| adv.c0[i] + prev * adv.c1[i]).collect();
        let den: Vec<f64> = adv.c1.iter().map(|c| -c).collect();
        let mut best = (usize::MAX, f64::INFINITY);
        for i in policy.states() {
            let mu = if k == 1 {
                adv.c0[i]
            } else if z[i].abs() <= eps_z {
                prev
            } else if z[i] > eps_z && den[i] > DEN_TOL {
                prev + z[i] / den[i]
            } else {
                f64::INFINITY
            };
            if best.0 == usize::MAX || mu < best.1 {
                best = (i, mu);
            }
        }
        let (sel, mu) = best;

        if opts.check_indexability && k > 1 && mu > prev + eps_z {
            let alpha_at_mu = |i: usize| {
                if mu.is_infinite() {
                    if den[i].abs() <= DEN_TOL {
                        z[i]
                    } else if den[i] > 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        f64::INFINITY
                    }
                } else {
                    adv.c0[i] + mu * adv.c1[i]
                }
            };
            if let Some(w) = (0..n).find(|&i| !policy.contains(i) && alpha_at_mu(i) >= -eps_z) {
                return done(
                    Verdict::NonIndexable {
                        at_iteration: k,
                        witness_state: w,
                    },
                    sigma,
                    k,
                );
            }
        }
        if mu == f64::INFINITY {
            for i in policy.states() {
                lambda[i] = f64::INFINITY;
                sigma.push(i);
            }
            return done(Verdict::Indexable(lambda), sigma, k);
        }
        lambda[sel] = mu;
        sigma.push(sel);
        policy.set(sel, false);
        prev = mu;
    }
    if opts.criterion == Criterion::AverageReward
        && classify_policy_chain(arm, &policy).kind == ChainKind::Multichain
    {
        return done(Verdict::Multichain { at_policy: policy }, sigma, n);
    }
    done(Verdict::Indexable(lambda), sigma, n)
}

/// Average-reward evaluation of a unichain policy, affine in the penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEvaluation {
    /// Gain as `(g0, g1)`, meaning `g(λ) = g0 + λ g1`.
    pub gain: (f64, f64),
    /// Bias normalized so that the first state's bias is zero.
    pub bias: AffineVector,
    pub advantage: AffineVector,
}

/// Solves `g + h_i = r^π_i - λ π_i + Σ_j P^π_ij h_j` with `h_0 = 0`.
/// Returns `None` for multichain policies.
pub fn evaluate_policy(arm: &RestlessArm, policy: &Policy) -> Option<PolicyEvaluation> {
    if classify_policy_chain(arm, policy).kind == ChainKind::Multichain {
        return None;
    }
    let n = arm.n();
    // Unknowns: g, h_1 .. h_{n-1}.
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DMatrix::<f64>::zeros(n, 2);
    for i in 0..n {
        let p = arm.policy_row(policy, i);
        m[(i, 0)] = 1.0;
        for j in 1..n {
            m[(i, j)] = -p[j];
        }
        if i > 0 {
            m[(i, i)] += 1.0;
        }
        let on = policy.contains(i);
        rhs[(i, 0)] = if on { arm.r1()[i] } else { arm.r0()[i] };
        rhs[(i, 1)] = if on { -1.0 } else { 0.0 };
    }
    let sol = m.lu().solve(&rhs)?;
    let h = |c: usize| -> Vec<f64> {
        let mut v = vec![0.0; n];
        for j in 1..n {
            v[j] = sol[(j, c)];
        }
        v
    };
    let (h0, h1) = (h(0), h(1));
    let row = |p: &[f64], i: usize, v: &[f64]| -> f64 { (0..n).map(|j| p[i * n + j] * v[j]).sum() };
    let (p0, p1) = (arm.p0(), arm.p1());
    let mut a0 = vec![0.0; n];
    let mut a1 = vec![0.0; n];
    for i in 0..n {
        a0[i] = arm.r1()[i] - arm.r0()[i] + row(p1, i, &h0) - row(p0, i, &h0);
        a1[i] = -1.0 + row(p1, i, &h1) - row(p0, i, &h1);
    }
    Some(PolicyEvaluation {
        gain: (sol[(0, 0)], sol[(0, 1)]),
        bias: AffineVector { c0: h0, c1: h1 },
        advantage: AffineVector { c0: a0, c1: a1 },
    })
}

/// All unichain policies that are Bellman optimal at penalty `lambda`, i.e.
/// whose advantage is non-negative on the policy and non-positive off it,
/// within `1e-8`. Multichain policies are skipped.
pub fn enumerate_bellman_optimal(
    arm: &RestlessArm,
    lambda: f64,
) -> Result<Vec<Policy>, OracleError> {
    let n = arm.n();
    if n > MAX_ENUMERATE_N {
        return Err(OracleError::TooLarge(n));
    }
    if !is_weakly_communicating(arm) {
        return Err(OracleError::NotWeaklyCommunicating);
    }
    let tol = 1e-8;
    let mut out = Vec::new();
    for mask in 0..1u64 << n {
        let policy = Policy::from_mask(n, mask);
        let Some(ev) = evaluate_policy(arm, &policy) else {
            continue;
        };
        let alpha = ev.advantage.at(lambda);
        let ok = (0..n).all(|i| {
            if policy.contains(i) {
                alpha[i] >= -tol
            } else {
                alpha[i] <= tol
            }
        });
        if ok {
            out.push(policy);
        }
    }
    Ok(out)
}

/// Verdict of the exhaustive indexability oracle.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleVerdict {
    Indexable(Vec<f64>),
    NonIndexable,
    /// Some penalty range is decided only by multichain policies, which the
    /// oracle does not evaluate.
    Unsupported(String),
}

impl OracleVerdict {
    pub fn status(&self) -> &'static str {
        match self {
            OracleVerdict::Indexable(_) => "indexable",
            OracleVerdict::NonIndexable => "non_indexable",
            OracleVerdict::Unsupported(_) => "unsupported",
        }
    }
}

#[derive(Debug, Clone)]
struct Interval {
    policy: Policy,
    lo: f64,
    hi: f64,
}

// Penalties at which a unichain policy satisfies the Bellman sign pattern.
fn bo_interval(policy: &Policy, adv: &AffineVector, const_tol: f64) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..policy.n() {
        // Express as s (a + λ b) ≥ 0.
        let s = if policy.contains(i) { 1.0 } else { -1.0 };
        let (a, b) = (s * adv.c0[i], s * adv.c1[i]);
        if b.abs() <= 1e-12 {
            if a < -const_tol {
                return None;
            }
        } else if b > 0.0 {
            lo = lo.max(-a / b);
        } else {
            hi = hi.min(-a / b);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

fn near(a: f64, b: f64) -> f64 {
    1e-9 * (1.0 + a.abs().min(1e12) + b.abs().min(1e12))
}

/// Decides indexability by enumerating every policy and the penalty range
/// over which it is Bellman optimal.
///
/// The arm is non-indexable when some policy optimal at λ fails to contain
/// a policy optimal at some λ′ > λ. Indices are the largest penalty at which
/// a policy activating the state is still optimal.
pub fn oracle_indexability(arm: &RestlessArm) -> Result<OracleVerdict, OracleError> {
    let n = arm.n();
    if n > MAX_ORACLE_N {
        return Err(OracleError::TooLarge(n));
    }
    if !is_weakly_communicating(arm) {
        return Err(OracleError::NotWeaklyCommunicating);
    }
    let const_tol = 1e-9 * (1.0 + arm.max_abs_reward());
    let mut intervals = Vec::new();
    for mask in 0..1u64 << n {
        let policy = Policy::from_mask(n, mask);
        let Some(ev) = evaluate_policy(arm, &policy) else {
            continue;
        };
        if let Some((lo, hi)) = bo_interval(&policy, &ev.advantage, const_tol) {
            // A state on the boundary of its sign constraint could be
            // toggled; if that neighbour is multichain the oracle is blind.
            for i in 0..n {
                let a = ev.advantage.c0[i];
                let b = ev.advantage.c1[i];
                let tight = if b.abs() <= 1e-12 {
                    a.abs() <= const_tol
                } else {
                    let root = -a / b;
                    root >= lo - near(root, lo) && root <= hi + near(root, hi)
                };
                if tight {
                    let mut other = policy.clone();
                    other.set(i, !policy.contains(i));
                    if classify_policy_chain(arm, &other).kind == ChainKind::Multichain {
                        return Ok(OracleVerdict::Unsupported(format!(
                            "policy {:?} ties with multichain policy {:?}",
                            policy.states(),
                            other.states()
                        )));
                    }
                }
            }
            intervals.push(Interval { policy, lo, hi });
        }
    }

    // Every penalty must be covered by some unichain optimal policy.
    let mut sorted: Vec<&Interval> = intervals.iter().collect();
    sorted.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut reach = f64::NEG_INFINITY;
    let mut covered = sorted.first().is_some_and(|iv| iv.lo == f64::NEG_INFINITY);
    for iv in &sorted {
        if iv.lo > reach + near(iv.lo, reach) && reach != f64::NEG_INFINITY {
            covered = false;
        }
        reach = reach.max(iv.hi);
    }
    if !covered || reach != f64::INFINITY {
        return Ok(OracleVerdict::Unsupported(
            "some penalties have no unichain Bellman-optimal policy".into(),
        ));
    }

    for a in &intervals {
        for b in &intervals {
            if !a.policy.is_superset_of(&b.policy) && a.lo < b.hi - near(a.lo, b.hi) {
                return Ok(OracleVerdict::NonIndexable);
            }
        }
    }

    let mut lambda = vec![f64::NEG_INFINITY; n];
    for iv in &intervals {
        for i in iv.policy.states() {
            lambda[i] = lambda[i].max(iv.hi);
        }
    }
    Ok(OracleVerdict::Indexable(lambda))
}

// Penalized discounted MDP solved by value iteration, warm-started.
struct ValueIteration<'a> {
    arm: &'a RestlessArm,
    beta: f64,
    v: Vec<f64>,
}

impl ValueIteration<'_> {
    fn q(&self, v: &[f64], i: usize, lambda: f64) -> (f64, f64) {
        let n = self.arm.n();
        let (p0, p1) = (self.arm.p0(), self.arm.p1());
        let mut e0 = 0.0;
        let mut e1 = 0.0;
        for j in 0..n {
            e0 += p0[i * n + j] * v[j];
            e1 += p1[i * n + j] * v[j];
        }
        (
            self.arm.r0()[i] + self.beta * e0,
            self.arm.r1()[i] - lambda + self.beta * e1,
        )
    }

    // Sign of the activation preference at `state`: +1 active, -1 passive,
    // 0 for a tie at the resolution of the stopping rule.
    fn preference(&mut self, lambda: f64, state: usize) -> i8 {
        let n = self.arm.n();
        let beta = self.beta;
        let scale = 1.0 + self.arm.max_abs_reward() + lambda.abs();
        let stop = 1e-10 * (1.0 - beta) / beta * scale;
        let mut next = vec![0.0; n];
        loop {
            let mut dmin = f64::INFINITY;
            let mut dmax = f64::NEG_INFINITY;
            for (i, slot) in next.iter_mut().enumerate() {
                let (a, b) = self.q(&self.v, i, lambda);
                *slot = a.max(b);
                let d = *slot - self.v[i];
                dmin = dmin.min(d);
                dmax = dmax.max(d);
            }
            std::mem::swap(&mut self.v, &mut next);
            let span = dmax - dmin;
            let (a, b) = self.q(&self.v, state, lambda);
            let pref = b - a;
            // The optimal values lie within β/(1-β)·span of a common shift
            // of the current iterate, which moves both actions' values alike.
            let err = 2.0 * beta * beta / (1.0 - beta) * span;
            if pref.abs() > err {
                return if pref > 0.0 { 1 } else { -1 };
            }
            if span < stop {
                return 0;
            }
        }
    }
}

/// Whittle index of `state` for the discounted criterion by bisection on the
/// penalty, each probe solved by value iteration. Returns `±∞` when the
/// preference does not change sign within `|λ| ≤ 10 (1 + max|r|) / (1 - β)`.
pub fn oracle_discounted_index(
    arm: &RestlessArm,
    beta: f64,
    state: usize,
    tol: f64,
) -> Result<f64, OracleError> {
    let mut vi = ValueIteration {
        arm,
        beta,
        v: vec![0.0; arm.n()],
    };
    let limit = 10.0 * (1.0 + arm.max_abs_reward()) / (1.0 - beta);
    let mut probes: Vec<(f64, i8)> = Vec::new();
    let mut probe = |vi: &mut ValueIteration, lambda: f64| {
        let s = vi.preference(lambda, state);
        probes.push((lambda, s));
        s
    };

    let mut width = 1.0 + arm.max_abs_reward();
    let (mut lo, mut hi);
    loop {
        lo = -width.min(limit);
        hi = width.min(limit);
        let (sl, sh) = (probe(&mut vi, lo), probe(&mut vi, hi));
        if sl <= 0 && lo <= -limit {
            return finish(probes, state, f64::NEG_INFINITY);
        }
        if sh >= 0 && hi >= limit {
            return finish(probes, state, f64::INFINITY);
        }
        if sl > 0 && sh < 0 {
            break;
        }
        width *= 2.0;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match probe(&mut vi, mid) {
            1 => lo = mid,
            -1 => hi = mid,
            _ => return finish(probes, state, mid),
        }
    }
    finish(probes, state, 0.5 * (lo + hi))
}

fn finish(mut probes: Vec<(f64, i8)>, state: usize, value: f64) -> Result<f64, OracleError> {
    probes.sort_by(|a, b| a.0.total_cmp(&b.0));
    if probes.windows(2).any(|w| w[1].1 > w[0].1) {
        return Err(OracleError::NonMonotone(state));
    }
    Ok(value)
}

/// Gittins indices by the largest-index-first method.
///
/// With `S` the states ranked so far, each remaining state `i` is scored by
/// the reward and discounted time accumulated from `i` until the chain
/// first leaves `S`; the best ratio is the next index.
pub fn oracle_gittins(p: &[f64], r: &[f64], beta: f64) -> Vec<f64> {
    let n = r.len();
    let pm = DMatrix::from_row_slice(n, n, p);
    let mut ranked: Vec<usize> = Vec::with_capacity(n);
    let mut index = vec![0.0; n];
    let mut left: Vec<usize> = (0..n).collect();
    while !left.is_empty() {
        let m = ranked.len();
        let (num_s, den_s) = if m == 0 {
            (DVector::zeros(0), DVector::zeros(0))
        } else {
            let mut a = DMatrix::<f64>::identity(m, m);
            for (x, &i) in ranked.iter().enumerate() {
                for (y, &j) in ranked.iter().enumerate() {
                    a[(x, y)] -= beta * pm[(i, j)];
                }
            }
            let rs = DVector::from_iterator(m, ranked.iter().map(|&i| r[i]));
            let lu = a.lu();
            let num = lu.solve(&rs).expect("I - βP is invertible");
            let den = lu
                .solve(&DVector::from_element(m, 1.0))
                .expect("I - βP is invertible");
            (num, den)
        };
        let mut best = (0usize, f64::NEG_INFINITY);
        for (slot, &i) in left.iter().enumerate() {
            let mut num = r[i];
            let mut den = 1.0;
            for (x, &j) in ranked.iter().enumerate() {
                num += beta * pm[(i, j)] * num_s[x];
                den += beta * pm[(i, j)] * den_s[x];
            }
            let ratio = num / den;
            if ratio > best.1 {
                best = (slot, ratio);
            }
        }
        let i = left.remove(best.0);
        index[i] = best.1;
        ranked.push(i);
    }
    index
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm::generate_dense_uniform;
    use crate::samples::*;

    fn arm(n: usize, p0: &[f64], p1: &[f64], r0: &[f64], r1: &[f64]) -> RestlessArm {
        RestlessArm::from_flat(n, p0.to_vec(), p1.to_vec(), r0.to_vec(), r1.to_vec(), None).unwrap()
    }

    #[test]
    fn evaluation_residual() {
        let a = generate_dense_uniform(5, 2);
        let pol = Policy::from_mask(5, 0b10110);
        let ev = evaluate_policy(&a, &pol).unwrap();
        let lambda = 0.37;
        let g = ev.gain.0 + lambda * ev.gain.1;
        let h = ev.bias.at(lambda);
        for i in 0..5 {
            let on = pol.contains(i);
            let r = if on { a.r1()[i] - lambda } else { a.r0()[i] };
            let ph: f64 = (0..5).map(|j| a.policy_row(&pol, i)[j] * h[j]).sum();
            assert!((g + h[i] - r - ph).abs() < 1e-9);
        }
        assert_eq!(h[0], 0.0);
    }

    #[test]
    fn bellman_optimal_sets() {
        let a = three_state_indexable();
        assert_eq!(
            enumerate_bellman_optimal(&a, 0.0).unwrap(),
            vec![Policy::all(3)]
        );
        assert_eq!(
            enumerate_bellman_optimal(&a, 0.5).unwrap(),
            vec![Policy::from_states(3, &[1, 2])]
        );
        let high = enumerate_bellman_optimal(&a, 2.0).unwrap();
        assert!(high.contains(&Policy::empty(3)));
        assert_eq!(
            enumerate_bellman_optimal(&generate_dense_uniform(13, 0), 0.0),
            Err(OracleError::TooLarge(13))
        );
    }

    #[test]
    fn oracle_on_small_examples() {
        let OracleVerdict::Indexable(l) = oracle_indexability(&three_state_indexable()).unwrap()
        else {
            panic!()
        };
        for (got, want) in l.iter().zip([0.3, 0.8, 0.7]) {
            assert!((got - want).abs() < 0.05);
        }
        // Both actions identical: every policy is optimal at λ = 0.
        let same = arm(
            2,
            &[0.0, 1.0, 0.0, 1.0],
            &[0.0, 1.0, 0.0, 1.0],
            &[1.0, 1.0],
            &[1.0, 1.0],
        );
        assert_eq!(
            oracle_indexability(&same).unwrap(),
            OracleVerdict::Indexable(vec![0.0, 0.0])
        );
        let blind = arm(
            2,
            &[1.0, 0.0, 0.0, 1.0],
            &[0.0, 1.0, 0.0, 1.0],
            &[1.0, 1.0],
            &[1.0, 1.0],
        );
        assert!(matches!(
            oracle_indexability(&blind).unwrap(),
            OracleVerdict::Unsupported(_)
        ));
    }

    #[test]
    fn naive_on_one_state() {
        let a = arm(1, &[1.0], &[1.0], &[0.5], &[2.0]);
        let r = naive_whittle(&a, Criterion::AverageReward).unwrap();
        assert_eq!(r.verdict, Verdict::Indexable(vec![1.5]));
    }

    #[test]
    fn gittins_closed_forms() {
        let beta = 0.9;
        let g = oracle_gittins(&[0.0, 1.0, 0.0, 1.0], &[0.0, 1.0], beta);
        assert!((g[0] - beta).abs() < 1e-12 && (g[1] - 1.0).abs() < 1e-12);
        let p = generate_dense_uniform(6, 3);
        let g = oracle_gittins(p.p0(), &[0.4; 6], 0.5);
        assert!(g.iter().all(|x| (x - 0.4).abs() < 1e-12));
    }

    #[test]
    fn discounted_bisection_on_single_state() {
        let a = RestlessArm::rested(&[1.0], &[0.3], None).unwrap();
        let l = oracle_discounted_index(&a, 0.9, 0, 1e-10).unwrap();
        assert!((l - 0.3).abs() < 1e-8, "{l}");
    }

    #[test]
    fn discounted_bisection_matches_gittins() {
        let p = generate_dense_uniform(5, 12);
        let a = RestlessArm::rested(p.p1(), p.r1(), None).unwrap();
        let g = oracle_gittins(p.p1(), p.r1(), 0.9);
        for (i, gi) in g.iter().enumerate() {
            let l = oracle_discounted_index(&a, 0.9, i, 1e-10).unwrap();
            assert!((l - gi).abs() < 1e-8, "{i}: {l} vs {gi}");
        }
    }
}
