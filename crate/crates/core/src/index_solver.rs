//! Whittle index computation: indexability test plus indices in one pass.
//!
//! States are removed from the active set in increasing index order. The
//! matrix `X = Δ A⁻¹` of the current policy is never formed in full after
//! the first iteration: each needed column is advanced lazily through the
//! rank-one corrections stored in `W`, and the block variant periodically
//! folds those corrections back into `X` with one Woodbury update.

use thiserror::Error;

use crate::arm::{ChainKind, Policy, RestlessArm, classify_policy_chain, is_weakly_communicating};
use crate::linalg::{self, AffineVector, DenseMatrix, LinalgError, Lu};

/// Default relative tolerance for the `z = 0` and `z ≥ 0` tests.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
/// Absolute tolerance on the denominators `1 - y` and `1 + X_σσ`.
pub const DEN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    AverageReward,
    Discounted(f64),
}

impl Criterion {
    pub fn beta(self) -> Option<f64> {
        match self {
            Criterion::AverageReward => None,
            Criterion::Discounted(b) => Some(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Fresh policy evaluation at every iteration, O(n⁴).
    Naive,
    /// Rank-one recursion over a single initial factorization.
    Cubic,
    /// Recursion with `X` rebuilt this many times in total (including the
    /// initial factorization) at evenly spaced iterations.
    Block(usize),
}

/// Recommended number of full computations for the block variant.
pub fn default_recompute_count(n: usize) -> usize {
    ((2.0 * (n as f64).powf(0.1)).round() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub check_indexability: bool,
    pub variant: Variant,
    pub criterion: Criterion,
    /// Relative tolerance; the absolute `z` tolerance is
    /// `tolerance * (1 + max |r|)`.
    pub tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            check_indexability: true,
            variant: Variant::Cubic,
            criterion: Criterion::AverageReward,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl SolverOptions {
    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_criterion(mut self, criterion: Criterion) -> Self {
        self.criterion = criterion;
        self
    }

    pub fn with_check(mut self, check: bool) -> Self {
        self.check_indexability = check;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("arm is not weakly communicating")]
    NotWeaklyCommunicating,
    #[error("policy {0:?} is multichain")]
    MultichainPolicy(Vec<usize>),
    #[error("invalid options: {0}")]
    BadOptions(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    /// Indices in original state order; may contain `+∞`.
    Indexable(Vec<f64>),
    NonIndexable {
        at_iteration: usize,
        witness_state: usize,
    },
    Multichain {
        at_policy: Policy,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexResult {
    pub verdict: Verdict,
    /// States in the order they left the active set. On an indexable result
    /// with infinite indices the remaining states follow in id order.
    pub sigma: Vec<usize>,
    pub iterations: usize,
}

impl IndexResult {
    pub fn indices(&self) -> Option<&[f64]> {
        match &self.verdict {
            Verdict::Indexable(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_indexable(&self) -> bool {
        matches!(self.verdict, Verdict::Indexable(_))
    }

    /// Short status name: `indexable`, `non_indexable` or `multichain`.
    pub fn status(&self) -> &'static str {
        match self.verdict {
            Verdict::Indexable(_) => "indexable",
            Verdict::NonIndexable { .. } => "non_indexable",
            Verdict::Multichain { .. } => "multichain",
        }
    }
}

/// Tests indexability and computes the indices of `arm`.
pub fn compute_indices(
    arm: &RestlessArm,
    opts: &SolverOptions,
) -> Result<IndexResult, SolverError> {
    if opts.variant == Variant::Naive {
        check_preconditions(arm, opts)?;
        return Ok(crate::oracle::naive_whittle_with(arm, opts));
    }
    let mut state = match init_state(arm, opts)? {
        Init::Running(s) => s,
        Init::Done(r) => return Ok(r),
    };
    loop {
        if let Step::Finished(r) = iterate(&mut state) {
            return Ok(r);
        }
    }
}

pub(crate) fn check_preconditions(
    arm: &RestlessArm,
    opts: &SolverOptions,
) -> Result<(), SolverError> {
    if let Variant::Block(0) = opts.variant {
        return Err(SolverError::BadOptions(
            "block recompute count must be at least 1".into(),
        ));
    }
    if opts.tolerance.is_nan() || opts.tolerance < 0.0 {
        return Err(SolverError::BadOptions(format!(
            "tolerance {}",
            opts.tolerance
        )));
    }
    if let Criterion::Discounted(b) = opts.criterion {
        if !(b > 0.0 && b < 1.0) {
            return Err(SolverError::BadOptions(format!(
                "discount {b} outside (0, 1)"
            )));
        }
    } else if !is_weakly_communicating(arm) {
        return Err(SolverError::NotWeaklyCommunicating);
    }
    Ok(())
}

/// Outcome of [`init_state`]: either a state to iterate or an early verdict.
#[allow(clippy::large_enum_variant)]
pub enum Init<'a> {
    Running(SolverState<'a>),
    Done(IndexResult),
}

/// Outcome of one [`iterate`] call.
pub enum Step {
    Continue,
    Finished(IndexResult),
}

/// Working state of the recursion.
///
/// Row and column arrays are kept in position coordinates: position `p`
/// holds state `perm[p]`. Active states occupy positions `0..active_len`;
/// the `k`-th removed state sits at position `n - k` from then on.
pub struct SolverState<'a> {
    n: usize,
    beta: Option<f64>,
    discounted: bool,
    check: bool,
    spacing: Option<usize>,
    eps_z: f64,
    eps_den: f64,
    k: usize,
    active_len: usize,
    perm: Vec<usize>,
    pos_of: Vec<usize>,
    sigma: Vec<usize>,
    mu_min: f64,
    lambda: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    // X at level `base`, n × n row-major.
    x: Vec<f64>,
    base: usize,
    // W[:, j] = X^{ℓ+1}[:, σ^ℓ] for ℓ = base + j, rows of stride `w_cap`.
    w: Vec<f64>,
    w_cap: usize,
    w_cols: usize,
    col: Vec<f64>,
    coef: Vec<f64>,
    empty_multichain: bool,
    arm: &'a RestlessArm,
}

impl SolverState<'_> {
    /// Iterations completed so far.
    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn sigma(&self) -> &[usize] {
        &self.sigma
    }

    pub fn mu_min(&self) -> f64 {
        self.mu_min
    }

    /// Current active states in id order.
    pub fn active(&self) -> Vec<usize> {
        let mut a = self.perm[..self.active_len].to_vec();
        a.sort_unstable();
        a
    }

    fn by_state(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![f64::NAN; self.n];
        for p in 0..self.n {
            out[self.perm[p]] = v[p];
        }
        out
    }

    pub fn y(&self) -> Vec<f64> {
        self.by_state(&self.y)
    }

    pub fn z(&self) -> Vec<f64> {
        self.by_state(&self.z)
    }

    /// Column `σ^{k-1}` of `X^k` produced by the last update, by state. Rows
    /// that were not tracked (passive rows without indexability checking)
    /// are NaN.
    pub fn last_x_column(&self) -> Vec<f64> {
        let mut out = self.by_state(&self.col);
        if !self.check {
            for p in self.active_len + 1..self.n {
                out[self.perm[p]] = f64::NAN;
            }
        }
        out
    }

    fn rows(&self) -> usize {
        if self.check {
            self.n
        } else {
            (self.active_len + 1).min(self.n)
        }
    }

    fn swap_positions(&mut self, p: usize, q: usize) {
        if p == q {
            return;
        }
        let n = self.n;
        self.perm.swap(p, q);
        self.pos_of[self.perm[p]] = p;
        self.pos_of[self.perm[q]] = q;
        self.y.swap(p, q);
        self.z.swap(p, q);
        self.col.swap(p, q);
        let (lo, hi) = (p.min(q), p.max(q));
        let (a, b) = self.x.split_at_mut(hi * n);
        a[lo * n..(lo + 1) * n].swap_with_slice(&mut b[..n]);
        for r in 0..n {
            self.x.swap(r * n + p, r * n + q);
        }
        if self.w_cols > 0 {
            let c = self.w_cap;
            let (a, b) = self.w.split_at_mut(hi * c);
            a[lo * c..lo * c + self.w_cols].swap_with_slice(&mut b[..self.w_cols]);
        }
    }

    fn remove(&mut self, p: usize, mu: f64) {
        let state = self.perm[p];
        self.lambda[state] = mu;
        self.sigma.push(state);
        self.swap_positions(p, self.active_len - 1);
        self.active_len -= 1;
    }

    fn active_policy(&self) -> Policy {
        Policy::from_states(self.n, &self.perm[..self.active_len])
    }

    // Column σ^{k-1} of X^k into `self.col`, where σ^{k-1} sits at
    // position `ps`. Returns false when the next policy is multichain.
    fn update_x(&mut self, ps: usize) -> bool {
        let n = self.n;
        let rows = self.rows();
        let m = self.w_cols;
        let cap = self.w_cap;
        let hi = n - self.base;
        // X^ℓ[σ^ℓ, σ^k] for ℓ = base .. k-1: forward substitution on the rows
        // owned by W columns (column j belongs to position hi - j), in groups.
        let mut j0 = 0;
        while j0 < m {
            let g = (m - j0).min(ROW_GROUP);
            let mut part = [0.0; ROW_GROUP];
            if g == ROW_GROUP {
                let top = hi - (j0 + g - 1);
                let d = dot_rows::<ROW_GROUP>(&self.w[top * cap..], cap, &self.coef[..j0]);
                for (r, v) in d.into_iter().enumerate() {
                    part[g - 1 - r] = v;
                }
            } else {
                for (t, v) in part.iter_mut().enumerate().take(g) {
                    let pl = hi - (j0 + t);
                    *v = dot(&self.w[pl * cap..pl * cap + j0], &self.coef[..j0]);
                }
            }
            for (t, v) in part.iter().enumerate().take(g) {
                let j = j0 + t;
                let pl = hi - j;
                let tri = dot(&self.w[pl * cap + j0..pl * cap + j], &self.coef[j0..j]);
                self.coef[j] = self.x[pl * n + ps] - v - tri;
            }
            j0 += g;
        }
        let coef = &self.coef[..m];
        let lo = (hi + 1 - m).min(rows);
        sweep(&self.x, n, ps, &self.w, cap, coef, &mut self.col, 0..lo);
        sweep(
            &self.x,
            n,
            ps,
            &self.w,
            cap,
            coef,
            &mut self.col,
            (hi + 1).min(rows)..rows,
        );
        // The W-owned rows already hold the leading part of their product
        // in `coef`; only the tail is left to subtract.
        let mut j0 = (hi + 1).saturating_sub(rows);
        while j0 < m {
            let end = (j0 + ROW_GROUP).min(m);
            let g = end - j0;
            let mut common = [0.0; ROW_GROUP];
            if g == ROW_GROUP {
                let top = hi - (end - 1);
                let d = dot_rows::<ROW_GROUP>(&self.w[top * cap + end..], cap, &coef[end..]);
                for (r, v) in d.into_iter().enumerate() {
                    common[g - 1 - r] = v;
                }
            } else {
                for (t, v) in common.iter_mut().enumerate().take(g) {
                    let p = hi - (j0 + t);
                    *v = dot(&self.w[p * cap + end..p * cap + m], &coef[end..]);
                }
            }
            for (t, v) in common.iter().enumerate().take(g) {
                let j = j0 + t;
                let p = hi - j;
                let head = dot(&self.w[p * cap + j..p * cap + end], &coef[j..end]);
                self.col[p] = coef[j] - head - v;
            }
            j0 = end;
        }
        let den = 1.0 + self.col[ps];
        if !self.discounted && den.abs() <= self.eps_den {
            return false;
        }
        let inv = 1.0 / den;
        for p in 0..rows {
            let v = self.col[p] * inv;
            self.col[p] = v;
            self.w[p * cap + m] = v;
        }
        self.w_cols += 1;
        // The rank-one step above already ran the multichain test for σ^k,
        // so a fold only has to refresh the matrix.
        match self.spacing {
            Some(spacing) if self.k.is_multiple_of(spacing) => self.recompute(ps),
            _ => true,
        }
    }

    // Folds the corrections of σ^base..σ^k into X, giving X^{k+1}.
    fn recompute(&mut self, ps: usize) -> bool {
        let n = self.n;
        let k = self.k;
        let s0 = n - k;
        let m = k - self.base + 1;
        let cols = s0 + 1;
        let rows = if self.check { n } else { s0 + 1 };
        debug_assert_eq!(ps, s0);

        let mut ok = false;
        let mut core = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                core[j * m + i] = self.x[(s0 + i) * n + s0 + j];
            }
            core[i * m + i] += 1.0;
        }
        if let Ok(lu) = Lu::factor(m, core) {
            // T = (I + X_SS)⁻¹ X_SC, column-major m × cols.
            let mut t = vec![0.0; m * cols];
            for c in 0..cols {
                for i in 0..m {
                    t[c * m + i] = self.x[(s0 + i) * n + c];
                }
            }
            lu.solve_in_place(&mut t);
            drop(lu);
            // L = X_RS copied, column-major rows × m.
            let mut l = vec![0.0; rows * m];
            for i in 0..m {
                for r in 0..rows {
                    l[i * rows + r] = self.x[r * n + s0 + i];
                }
            }
            // X is row-major, so its transpose is a column-major view.
            let dst =
                faer::MatMut::from_column_major_slice_with_stride_mut(&mut self.x, cols, rows, n)
                    .transpose_mut();
            linalg::gemm_sub(
                dst,
                faer::MatRef::from_column_major_slice(&l, rows, m),
                faer::MatRef::from_column_major_slice(&t, m, cols),
            );
            ok = self.x[..rows * n].iter().all(|v| v.is_finite());
        }
        if !ok && !self.fresh_solve() {
            return false;
        }
        self.base = k + 1;
        self.w_cols = 0;
        for p in 0..rows {
            self.col[p] = self.x[p * n + ps];
        }
        true
    }

    // X = Δ A⁻¹ for the current active set, from scratch.
    fn fresh_solve(&mut self) -> bool {
        let n = self.n;
        let policy = self.active_policy();
        let beta = self.beta;
        let a = if let Some(b) = beta {
            linalg::build_discounted_matrix(self.arm, &policy, b)
        } else {
            linalg::build_A_matrix(self.arm, &policy)
        };
        let mut ap = vec![0.0; n * n];
        for p in 0..n {
            for q in 0..n {
                ap[p * n + q] = a[(self.perm[p], self.perm[q])];
            }
        }
        drop(a);
        let mut drow = vec![0.0; n];
        for p in 0..n {
            linalg::fill_delta_row(self.arm, beta, self.perm[p], &mut drow);
            for q in 0..n {
                self.x[p * n + q] = drow[self.perm[q]];
            }
        }
        match Lu::factor(n, ap) {
            Ok(lu) => {
                lu.solve_in_place(&mut self.x);
                true
            }
            Err(_) => false,
        }
    }

    fn finish(&mut self, verdict: Verdict) -> Step {
        Step::Finished(IndexResult {
            verdict,
            sigma: std::mem::take(&mut self.sigma),
            iterations: self.k,
        })
    }
}

const LANES: usize = 4;
const ROW_GROUP: usize = 8;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    dot_rows::<1>(a, 0, b)[0]
}

// Dot products of R rows of `w`, `stride` apart, with `c`. Reading several
// rows together keeps more memory streams in flight; the summation order of
// a row does not depend on R, so grouping never changes the result.
#[inline(never)]
fn dot_rows<const R: usize>(w: &[f64], stride: usize, c: &[f64]) -> [f64; R] {
    let len = c.len();
    let full = len - len % LANES;
    let rows: [&[f64]; R] = std::array::from_fn(|r| &w[r * stride..r * stride + len]);
    let mut acc = [[0.0f64; LANES]; R];
    for i in (0..full).step_by(LANES) {
        let cc = &c[i..i + LANES];
        for r in 0..R {
            let a = &rows[r][i..i + LANES];
            for l in 0..LANES {
                acc[r][l] += a[l] * cc[l];
            }
        }
    }
    std::array::from_fn(|r| {
        let mut s = (acc[r][0] + acc[r][2]) + (acc[r][1] + acc[r][3]);
        for i in full..len {
            s += rows[r][i] * c[i];
        }
        s
    })
}

// out[p] = x[p·n + ps] − W[p, ..m]·coef for p in `range`.
#[allow(clippy::too_many_arguments)]
fn sweep(
    x: &[f64],
    n: usize,
    ps: usize,
    w: &[f64],
    cap: usize,
    coef: &[f64],
    out: &mut [f64],
    range: std::ops::Range<usize>,
) {
    let m = coef.len();
    let mut p = range.start;
    while p + ROW_GROUP <= range.end {
        let d = dot_rows::<ROW_GROUP>(&w[p * cap..], cap, coef);
        for (r, v) in d.iter().enumerate() {
            out[p + r] = x[(p + r) * n + ps] - v;
        }
        p += ROW_GROUP;
    }
    for p in p..range.end {
        out[p] = x[p * n + ps] - dot(&w[p * cap..p * cap + m], coef);
    }
}

// Position of the smallest μ among active positions, ties to the smallest state id.
fn argmin(mu: impl Iterator<Item = (usize, f64)>, perm: &[usize]) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (p, v) in mu {
        if best.0 == usize::MAX || v < best.1 || (v == best.1 && perm[p] < perm[best.0]) {
            best = (p, v);
        }
    }
    best
}

/// Builds `X¹`, `μ¹` and performs the first removal.
pub fn init_state<'a>(arm: &'a RestlessArm, opts: &SolverOptions) -> Result<Init<'a>, SolverError> {
    check_preconditions(arm, opts)?;
    let n = arm.n();
    let beta = opts.criterion.beta();
    let discounted = beta.is_some();
    let spacing = match opts.variant {
        Variant::Block(count) => Some(n.div_ceil(count)),
        _ => None,
    };

    let mut x = vec![0.0; n * n];
    for i in 0..n {
        linalg::fill_delta_row(arm, beta, i, &mut x[i * n..(i + 1) * n]);
    }
    let p1_is_identity = (0..n).all(|i| arm.p1()[i * n + i] == 1.0);
    match beta {
        Some(b) if p1_is_identity => {
            let s = 1.0 / (1.0 - b);
            x.iter_mut().for_each(|v| *v *= s);
        }
        _ => {
            let all = Policy::all(n);
            let a = match beta {
                Some(b) => linalg::build_discounted_matrix(arm, &all, b),
                None => linalg::build_A_matrix(arm, &all),
            };
            // Row-major A is Aᵀ column-major; X A = Δ is Aᵀ Xᵀ = Δᵀ.
            match Lu::factor(n, a.into_vec()) {
                Ok(lu) => lu.solve_in_place(&mut x),
                Err(LinalgError::Singular { .. }) if !discounted => {
                    return Ok(Init::Done(IndexResult {
                        verdict: Verdict::Multichain { at_policy: all },
                        sigma: Vec::new(),
                        iterations: 0,
                    }));
                }
                Err(e) => return Err(SolverError::BadOptions(e.to_string())),
            }
        }
    }

    let (r0, r1) = (arm.r0(), arm.r1());
    let mu: Vec<f64> = (0..n)
        .map(|i| r1[i] - r0[i] + dot(&x[i * n..(i + 1) * n], r1))
        .collect();
    let perm: Vec<usize> = (0..n).collect();
    let (p, mu_min) = argmin(mu.iter().copied().enumerate(), &perm);
    let z = mu.iter().map(|m| m - mu_min).collect();

    let w_cap = match spacing {
        Some(s) => s.min(n.saturating_sub(1)),
        None => n.saturating_sub(1),
    };
    let mut state = SolverState {
        n,
        beta,
        discounted,
        check: opts.check_indexability,
        spacing,
        eps_z: opts.tolerance * (1.0 + arm.max_abs_reward()),
        eps_den: DEN_TOL,
        k: 1,
        active_len: n,
        pos_of: perm.clone(),
        perm,
        sigma: Vec::with_capacity(n),
        mu_min,
        lambda: vec![f64::NAN; n],
        y: vec![0.0; n],
        z,
        x,
        base: 1,
        w: Vec::new(),
        w_cap,
        w_cols: 0,
        col: vec![0.0; n],
        coef: vec![0.0; w_cap],
        empty_multichain: !discounted
            && classify_policy_chain(arm, &Policy::empty(n)).kind == ChainKind::Multichain,
        arm,
    };
    state.z[p] = 0.0;
    state.remove(p, mu_min);
    state.w = vec![0.0; n * w_cap];
    Ok(Init::Running(state))
}

/// One iteration of the main loop.
pub fn iterate(s: &mut SolverState) -> Step {
    let n = s.n;
    if s.active_len == 0 {
        if s.empty_multichain {
            return s.finish(Verdict::Multichain {
                at_policy: Policy::empty(n),
            });
        }
        let lambda = s.lambda.clone();
        return s.finish(Verdict::Indexable(lambda));
    }
    let ps = s.active_len;
    if !s.update_x(ps) {
        let at_policy = s.active_policy();
        return s.finish(Verdict::Multichain { at_policy });
    }
    s.k += 1;

    let rows = s.rows();
    let gain = 1.0 - s.y[ps];
    for p in 0..rows {
        s.y[p] += gain * s.col[p];
    }

    let (eps_z, eps_den, prev) = (s.eps_z, s.eps_den, s.mu_min);
    let (z, y) = (&s.z, &s.y);
    let mu_of = |p: usize| {
        let den = 1.0 - y[p];
        if z[p].abs() <= eps_z {
            prev
        } else if z[p] > eps_z && den > eps_den {
            prev + z[p] / den
        } else {
            f64::INFINITY
        }
    };
    let (sel, mu) = argmin((0..s.active_len).map(|p| (p, mu_of(p))), &s.perm);
    let step = mu - prev;

    for p in 0..rows {
        let den = 1.0 - s.y[p];
        if step.is_infinite() {
            if den.abs() > eps_den {
                s.z[p] = if den > 0.0 {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                };
            }
        } else {
            s.z[p] -= step * den;
        }
    }
    if step.is_finite() {
        s.z[sel] = 0.0;
    }

    if s.check && mu > prev + eps_z {
        let witness = (s.active_len..n)
            .filter(|&p| s.z[p] >= -eps_z)
            .map(|p| s.perm[p])
            .min();
        if let Some(witness_state) = witness {
            let at_iteration = s.k;
            return s.finish(Verdict::NonIndexable {
                at_iteration,
                witness_state,
            });
        }
    }

    if mu == f64::INFINITY {
        let mut rest = s.perm[..s.active_len].to_vec();
        rest.sort_unstable();
        for &i in &rest {
            s.lambda[i] = f64::INFINITY;
        }
        s.sigma.extend(rest);
        let lambda = s.lambda.clone();
        return s.finish(Verdict::Indexable(lambda));
    }

    s.mu_min = mu;
    s.remove(sel, mu);
    Step::Continue
}

/// Affine advantage `α^π(λ) = c0 + λ c1` of activating each state before
/// following `policy`.
pub fn affine_advantage(
    arm: &RestlessArm,
    policy: &Policy,
    criterion: Criterion,
) -> Result<AffineVector, SolverError> {
    let n = arm.n();
    let beta = criterion.beta();
    let a = match beta {
        Some(b) => linalg::build_discounted_matrix(arm, policy, b),
        None => {
            if classify_policy_chain(arm, policy).kind == ChainKind::Multichain {
                return Err(SolverError::MultichainPolicy(policy.states()));
            }
            linalg::build_A_matrix(arm, policy)
        }
    };
    // Right-hand sides: rewards of the policy and its activation indicator.
    let rhs = DenseMatrix::from_fn(n, 2, |i, c| match (c, policy.contains(i)) {
        (0, true) => arm.r1()[i],
        (0, false) => arm.r0()[i],
        (_, on) => f64::from(u8::from(on)),
    });
    let u =
        linalg::solve_left(&a, &rhs).map_err(|_| SolverError::MultichainPolicy(policy.states()))?;
    let du = linalg::build_delta(arm, beta).matmul(&u);
    let c0 = (0..n)
        .map(|i| arm.r1()[i] - arm.r0()[i] + du[(i, 0)])
        .collect();
    let c1 = (0..n).map(|i| -1.0 - du[(i, 1)]).collect();
    Ok(AffineVector { c0, c1 })
}

/// Active advantage of every state under `policy` at penalty `lambda`.
pub fn advantage_at(
    arm: &RestlessArm,
    policy: &Policy,
    lambda: f64,
    criterion: Criterion,
) -> Result<Vec<f64>, SolverError> {
    Ok(affine_advantage(arm, policy, criterion)?.at(lambda))
}

/// Gittins indices of the rested chain `(P, r)` under discount `beta`.
///
/// Computed as the negated indices of the arm with the two actions
/// swapped, whose first policy matrix is `(1 - β) I`, so no linear solve is
/// needed to start.
pub fn gittins_indices(p: &[f64], r: &[f64], beta: f64) -> Result<Vec<f64>, crate::Error> {
    let n = r.len();
    let mut eye = vec![0.0; n * n];
    for i in 0..n {
        eye[i * n + i] = 1.0;
    }
    let swapped = RestlessArm::from_flat(n, p.to_vec(), eye, r.to_vec(), vec![0.0; n], Some(beta))?;
    let opts = SolverOptions {
        check_indexability: false,
        variant: Variant::Cubic,
        criterion: Criterion::Discounted(beta),
        tolerance: DEFAULT_TOLERANCE,
    };
    let res = compute_indices(&swapped, &opts)?;
    match res.verdict {
        Verdict::Indexable(v) => Ok(v.into_iter().map(|x| -x).collect()),
        other => unreachable!("rested discounted arm gave {other:?}"),
    }
}
