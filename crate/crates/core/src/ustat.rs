//! Exact U-statistics over all size-`k` column subsets and the Monte-Carlo
//! engine for marginal, joint and worst-case tail probabilities.
//!
//! Every Monte-Carlo routine evaluates the kernel once per trial and then
//! thresholds that value against the whole `a` grid, so estimated curves are
//! monotone in `a` by construction. Trials run in parallel over
//! `trial_index`; accumulation is integer counting, so results do not depend
//! on the degree of parallelism.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::ensembles::{sample_columns, EnsembleSpec};
use crate::kernels::{gram2_extremes, KernelId};
use crate::{Error, Result};

/// Largest number of subsets enumerated per matrix unless overridden.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

/// Number of size-`k` subsets of `n` items, saturating at `f64::INFINITY`
/// once it no longer fits a `u128`.
pub fn subset_count(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        match acc.checked_mul((n - i) as u128) {
            Some(v) => acc = v / (i as u128 + 1),
            None => return f64::INFINITY,
        }
    }
    acc as f64
}

/// Lexicographic enumeration of sorted size-`k` subsets of `0..n`.
#[derive(Debug, Clone)]
pub struct Subsets {
    n: usize,
    current: Vec<usize>,
    done: bool,
}

impl Iterator for Subsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let k = self.current.len();
        // rightmost position that can still move right
        let mut i = k;
        while i > 0 {
            i -= 1;
            if self.current[i] < self.n - k + i {
                self.current[i] += 1;
                for j in i + 1..k {
                    self.current[j] = self.current[j - 1] + 1;
                }
                return Some(out);
            }
        }
        self.done = true;
        Some(out)
    }
}

/// All size-`k` subsets of `0..n` in lexicographic order, refusing more than
/// [`DEFAULT_ENUMERATION_CAP`] of them.
pub fn subsets(n: usize, k: usize) -> Result<Subsets> {
    subsets_with_cap(n, k, DEFAULT_ENUMERATION_CAP)
}

pub fn subsets_with_cap(n: usize, k: usize, cap: u64) -> Result<Subsets> {
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "subset size must satisfy 0 < k <= n, got n={n}, k={k}"
        )));
    }
    let count = subset_count(n, k);
    if count > cap as f64 {
        return Err(Error::EnumerationInfeasible { n, k, count, cap });
    }
    Ok(Subsets {
        n,
        current: (0..k).collect(),
        done: false,
    })
}

/// Two size-`k` subsets sharing exactly `overlap` indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetPair {
    pub s: Vec<usize>,
    pub r: Vec<usize>,
    pub overlap: usize,
}

impl SubsetPair {
    /// `S = {0..k-1}` and `R = {k-i .. 2k-i-1}`; by column exchangeability
    /// this pair represents every pair with overlap `i`.
    pub fn canonical(k: usize, overlap: usize) -> Result<Self> {
        if overlap == 0 || overlap >= k {
            return Err(Error::InvalidInput(format!(
                "overlap must satisfy 1 <= i <= k-1, got i={overlap}, k={k}"
            )));
        }
        Ok(Self {
            s: (0..k).collect(),
            r: (k - overlap..2 * k - overlap).collect(),
            overlap,
        })
    }

    /// Number of distinct columns the pair touches, `2k - i`.
    pub fn span(&self) -> usize {
        self.s.len() + self.r.len() - self.overlap
    }
}

/// Monte-Carlo probability estimate at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TailEstimate {
    pub a: f64,
    pub point: f64,
    pub std_err: f64,
    pub count: u64,
    pub trials: u64,
}

impl TailEstimate {
    pub fn from_count(a: f64, count: u64, trials: u64) -> Self {
        let point = count as f64 / trials as f64;
        Self {
            a,
            point,
            std_err: (point * (1.0 - point) / trials as f64).sqrt(),
            count,
            trials,
        }
    }
}

/// Gram matrix `A^T A` built from column dot products. The entry for a
/// column pair is computed identically whichever matrix the columns sit in,
/// so a principal submatrix of a full Gram equals the Gram of the subset.
pub fn gram(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        let ci = a.column(i);
        for j in 0..=i {
            let v = ci.dot(&a.column(j));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Evaluates kernels on principal submatrices of a Gram matrix, reusing a
/// scratch buffer for `k > 2`.
struct GramKernel {
    kernel: KernelId,
    m: usize,
    scratch: DMatrix<f64>,
}

impl GramKernel {
    fn new(kernel: KernelId, k: usize, m: usize) -> Result<Self> {
        kernel.check_order(k)?;
        Ok(Self {
            kernel,
            m,
            scratch: DMatrix::zeros(k, k),
        })
    }

    fn eval(&mut self, g: &DMatrix<f64>, idx: &[usize]) -> Result<f64> {
        match idx.len() {
            1 => {
                let d = g[(idx[0], idx[0])].max(0.0);
                Ok(match self.kernel {
                    KernelId::Ric => (d - 1.0).abs(),
                    KernelId::SigmaMaxSq => d,
                    KernelId::NegSigmaMinSq => -d,
                    KernelId::Coherence => unreachable!("order checked at construction"),
                })
            }
            2 => {
                let (i, j) = (idx[0], idx[1]);
                let (g00, g10, g11) = (g[(i, i)], g[(j, i)], g[(j, j)]);
                if self.kernel == KernelId::Coherence {
                    if g00 <= 0.0 || g11 <= 0.0 {
                        return Err(Error::Degenerate(
                            "coherence kernel undefined for a zero column".into(),
                        ));
                    }
                    return Ok((g10.abs() / (g00.sqrt() * g11.sqrt())).min(1.0));
                }
                let (mut lo, hi) = gram2_extremes(g00, g10, g11);
                if self.m < 2 {
                    lo = 0.0;
                }
                Ok(match self.kernel {
                    KernelId::Ric => (hi - 1.0).max(1.0 - lo),
                    KernelId::SigmaMaxSq => hi,
                    KernelId::NegSigmaMinSq => -lo,
                    KernelId::Coherence => unreachable!(),
                })
            }
            _ => {
                for (r, &ir) in idx.iter().enumerate() {
                    for (c, &ic) in idx.iter().enumerate() {
                        self.scratch[(r, c)] = g[(ir, ic)];
                    }
                }
                self.kernel.evaluate_gram(&self.scratch, self.m)
            }
        }
    }
}

fn check_finite_matrix(phi: &DMatrix<f64>) -> Result<()> {
    for c in 0..phi.ncols() {
        for r in 0..phi.nrows() {
            let value = phi[(r, c)];
            if !value.is_finite() {
                return Err(Error::NonFinite { row: r, col: c, value });
            }
        }
    }
    Ok(())
}

/// Kernel value on every size-`k` column subset of `phi`, in lexicographic order.
pub fn subset_kernel_values(
    phi: &DMatrix<f64>,
    kernel: KernelId,
    k: usize,
    cap: u64,
) -> Result<Vec<f64>> {
    check_finite_matrix(phi)?;
    let it = subsets_with_cap(phi.ncols(), k, cap)?;
    let g = gram(phi);
    let mut eval = GramKernel::new(kernel, k, phi.nrows())?;
    it.map(|s| eval.eval(&g, &s)).collect()
}

/// `(1 / C(n,k)) * sum_S 1{zeta(phi_S) > a}`.
pub fn u_statistic(phi: &DMatrix<f64>, kernel: KernelId, k: usize, a: f64) -> Result<f64> {
    let values = subset_kernel_values(phi, kernel, k, DEFAULT_ENUMERATION_CAP)?;
    let hits = values.iter().filter(|&&v| kernel.exceeds(v, a)).count();
    Ok(hits as f64 / values.len() as f64)
}

/// `max_S zeta(phi_S)`; for the coherence kernel this is the mutual coherence.
pub fn max_over_subsets(phi: &DMatrix<f64>, kernel: KernelId, k: usize) -> Result<f64> {
    max_over_subsets_with_cap(phi, kernel, k, DEFAULT_ENUMERATION_CAP)
}

pub fn max_over_subsets_with_cap(
    phi: &DMatrix<f64>,
    kernel: KernelId,
    k: usize,
    cap: u64,
) -> Result<f64> {
    let values = subset_kernel_values(phi, kernel, k, cap)?;
    Ok(values.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

fn validate_mc(spec: &EnsembleSpec, kernel: KernelId, k: usize, trials: u64) -> Result<()> {
    kernel.check_order(k)?;
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    if k > spec.n() {
        return Err(Error::InvalidInput(format!(
            "subset size k={k} exceeds column count n={}",
            spec.n()
        )));
    }
    Ok(())
}

/// Integer exceedance counts over a grid, summed across trials.
fn count_exceedances<F>(a_grid: &[f64], trials: u64, per_trial: F) -> Result<Vec<u64>>
where
    F: Fn(u64, &mut Vec<u64>) -> Result<()> + Sync,
{
    (0..trials)
        .into_par_iter()
        .try_fold(
            || vec![0u64; a_grid.len()],
            |mut acc, t| {
                per_trial(t, &mut acc)?;
                Ok(acc)
            },
        )
        .try_reduce(
            || vec![0u64; a_grid.len()],
            |mut x, y| {
                x.iter_mut().zip(y).for_each(|(a, b)| *a += b);
                Ok(x)
            },
        )
}

fn estimates(a_grid: &[f64], counts: &[u64], trials: u64) -> Vec<TailEstimate> {
    a_grid
        .iter()
        .zip(counts)
        .map(|(&a, &c)| TailEstimate::from_count(a, c, trials))
        .collect()
}

/// Marginal tail `p(a) = Pr{zeta(A_S) > a}` on the fixed subset `{0..k-1}`.
pub fn mc_marginal_tail(
    spec: &EnsembleSpec,
    kernel: KernelId,
    k: usize,
    a_grid: &[f64],
    trials: u64,
) -> Result<Vec<TailEstimate>> {
    let subset: Vec<usize> = (0..k).collect();
    mc_marginal_tail_on(spec, kernel, &subset, a_grid, trials)
}

/// Marginal tail estimated on an arbitrary fixed subset of columns.
pub fn mc_marginal_tail_on(
    spec: &EnsembleSpec,
    kernel: KernelId,
    subset: &[usize],
    a_grid: &[f64],
    trials: u64,
) -> Result<Vec<TailEstimate>> {
    let k = subset.len();
    validate_mc(spec, kernel, k, trials)?;
    let width = subset.iter().max().map_or(0, |&x| x + 1);
    if width > spec.n() {
        return Err(Error::InvalidInput(format!(
            "subset index {} out of range for n={}",
            width - 1,
            spec.n()
        )));
    }
    let counts = count_exceedances(a_grid, trials, |t, acc| {
        let a = sample_columns(spec, t, width);
        let g = gram(&a);
        let z = GramKernel::new(kernel, k, spec.m())?.eval(&g, subset)?;
        for (c, &thr) in acc.iter_mut().zip(a_grid) {
            *c += kernel.exceeds(z, thr) as u64;
        }
        Ok(())
    })?;
    Ok(estimates(a_grid, &counts, trials))
}

/// Joint tail `q_i(a) = Pr{zeta(A_S) > a, zeta(A_R) > a}` on the canonical
/// pair with overlap `i`.
pub fn mc_joint_tail(
    spec: &EnsembleSpec,
    kernel: KernelId,
    k: usize,
    overlap: usize,
    a_grid: &[f64],
    trials: u64,
) -> Result<Vec<TailEstimate>> {
    validate_mc(spec, kernel, k, trials)?;
    let pair = SubsetPair::canonical(k, overlap)?;
    if pair.span() > spec.n() {
        return Err(Error::InvalidInput(format!(
            "overlap {overlap} needs 2k-i = {} columns, ensemble has n = {}",
            pair.span(),
            spec.n()
        )));
    }
    let counts = count_exceedances(a_grid, trials, |t, acc| {
        let a = sample_columns(spec, t, pair.span());
        let g = gram(&a);
        let mut eval = GramKernel::new(kernel, k, spec.m())?;
        let zs = eval.eval(&g, &pair.s)?;
        let zr = eval.eval(&g, &pair.r)?;
        for (c, &thr) in acc.iter_mut().zip(a_grid) {
            *c += (kernel.exceeds(zs, thr) && kernel.exceeds(zr, thr)) as u64;
        }
        Ok(())
    })?;
    Ok(estimates(a_grid, &counts, trials))
}

/// Worst-case tail `Pr{max_S zeta(A_S) > a}` by exhaustive enumeration per trial.
pub fn mc_extreme_tail(
    spec: &EnsembleSpec,
    kernel: KernelId,
    k: usize,
    a_grid: &[f64],
    trials: u64,
) -> Result<Vec<TailEstimate>> {
    Ok(run_extreme_experiment(spec, kernel, k, a_grid, trials, DEFAULT_ENUMERATION_CAP, false)?.extreme)
}

/// Worst-case, marginal and joint tails estimated from the same trials.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremeExperiment {
    pub extreme: Vec<TailEstimate>,
    pub marginal: Vec<TailEstimate>,
    /// `joint[i - 1]` holds `q_i` for overlaps `i = 1..k-1`.
    pub joint: Vec<Vec<TailEstimate>>,
}

/// One pass over `trials` matrices collecting the worst-case statistic, the
/// marginal on `{0..k-1}` and the joint on every canonical pair.
///
/// With `with_joint` the ensemble must have at least `2k - 1` columns.
pub fn run_extreme_experiment(
    spec: &EnsembleSpec,
    kernel: KernelId,
    k: usize,
    a_grid: &[f64],
    trials: u64,
    cap: u64,
    with_joint: bool,
) -> Result<ExtremeExperiment> {
    validate_mc(spec, kernel, k, trials)?;
    let n = spec.n();
    // fail before spawning any work
    subsets_with_cap(n, k, cap)?;
    let pairs: Vec<SubsetPair> = if with_joint {
        (1..k).map(|i| SubsetPair::canonical(k, i)).collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    if let Some(p) = pairs.iter().find(|p| p.span() > n) {
        return Err(Error::InvalidInput(format!(
            "joint estimation with overlap {} needs n >= {}, got n = {n}",
            p.overlap,
            p.span()
        )));
    }
    let g_len = a_grid.len();
    // layout: [extreme | marginal | joint_1 | ... | joint_{k-1}]
    let counts = count_exceedances_wide(g_len * (2 + pairs.len()), trials, |t, acc| {
        let a = sample_columns(spec, t, n);
        let g = gram(&a);
        let mut eval = GramKernel::new(kernel, k, spec.m())?;
        let mut max = f64::NEG_INFINITY;
        let mut first = None;
        for s in subsets_with_cap(n, k, cap)? {
            let z = eval.eval(&g, &s)?;
            if first.is_none() {
                first = Some(z);
            }
            max = max.max(z);
        }
        let zs = first.expect("at least one subset");
        let zr: Vec<f64> = pairs
            .iter()
            .map(|p| eval.eval(&g, &p.r))
            .collect::<Result<_>>()?;
        for (j, &thr) in a_grid.iter().enumerate() {
            let s_hit = kernel.exceeds(zs, thr);
            acc[j] += kernel.exceeds(max, thr) as u64;
            acc[g_len + j] += s_hit as u64;
            for (p, &z) in zr.iter().enumerate() {
                acc[(2 + p) * g_len + j] += (s_hit && kernel.exceeds(z, thr)) as u64;
            }
        }
        Ok(())
    })?;
    let block = |b: usize| estimates(a_grid, &counts[b * g_len..(b + 1) * g_len], trials);
    Ok(ExtremeExperiment {
        extreme: block(0),
        marginal: block(1),
        joint: (0..pairs.len()).map(|p| block(2 + p)).collect(),
    })
}

fn count_exceedances_wide<F>(width: usize, trials: u64, per_trial: F) -> Result<Vec<u64>>
where
    F: Fn(u64, &mut Vec<u64>) -> Result<()> + Sync,
{
    let dummy = vec![0.0; width];
    count_exceedances(&dummy, trials, per_trial)
}

/// `f(a, b) = Pr{|(A_1/|A_1|)^T b| > a}` for a single random column of the
/// ensemble (only `m`, the family and the seed of `spec` are used).
pub fn mc_projection_tail(
    spec: &EnsembleSpec,
    b: &DVector<f64>,
    a_grid: &[f64],
    trials: u64,
) -> Result<Vec<TailEstimate>> {
    if b.len() != spec.m() {
        return Err(Error::InvalidInput(format!(
            "direction has length {}, ensemble has m = {}",
            b.len(),
            spec.m()
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    let bnorm = b.norm();
    if bnorm == 0.0 || !bnorm.is_finite() {
        return Err(Error::Degenerate("direction must be a nonzero finite vector".into()));
    }
    let counts = count_exceedances(a_grid, trials, |t, acc| {
        let col = sample_columns(spec, t, 1);
        let c = col.column(0);
        let norm = c.norm();
        if norm == 0.0 {
            return Err(Error::Degenerate("sampled a zero column".into()));
        }
        let proj = (c.dot(b) / (norm * bnorm)).abs();
        for (cnt, &thr) in acc.iter_mut().zip(a_grid) {
            *cnt += (proj > thr) as u64;
        }
        Ok(())
    })?;
    Ok(estimates(a_grid, &counts, trials))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{sample_matrix, Family};
    use crate::kernels::{coherence_kernel, ric_kernel};
    use crate::linalg::select_columns;
    use proptest::prelude::*;

    #[test]
    fn enumeration_examples() {
        let s: Vec<_> = subsets(3, 2).unwrap().collect();
        assert_eq!(s, vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        let s: Vec<_> = subsets(4, 4).unwrap().collect();
        assert_eq!(s, vec![vec![0, 1, 2, 3]]);
        assert_eq!(subsets(25, 2).unwrap().count(), 300);
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        match subsets(100, 5) {
            Err(Error::EnumerationInfeasible { n, k, count, .. }) => {
                assert_eq!((n, k), (100, 5));
                assert_eq!(count, 75_287_520.0);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
        assert!(subsets_with_cap(10, 3, 119).is_err());
        assert!(subsets_with_cap(10, 3, 120).is_ok());
        assert!(subsets(3, 0).is_err());
        assert!(subsets(3, 4).is_err());
    }

    proptest! {
        #[test]
        fn enumeration_is_complete_and_sorted(n in 1usize..12, k in 1usize..6) {
            prop_assume!(k <= n);
            let all: Vec<Vec<usize>> = subsets(n, k).unwrap().collect();
            prop_assert_eq!(all.len() as f64, subset_count(n, k));
            for w in all.windows(2) {
                prop_assert!(w[0] < w[1]);
            }
            for s in &all {
                prop_assert!(s.windows(2).all(|p| p[0] < p[1]));
                prop_assert!(*s.last().unwrap() < n);
            }
        }
    }

    #[test]
    fn u_statistic_hand_enumeration() {
        // columns e1, e1, e2
        let phi = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let u = u_statistic(&phi, KernelId::Coherence, 2, 0.5).unwrap();
        assert!((u - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(u_statistic(&phi, KernelId::Coherence, 2, 1.0).unwrap(), 0.0);
        assert_eq!(u_statistic(&phi, KernelId::Coherence, 2, -0.1).unwrap(), 1.0);
        assert_eq!(max_over_subsets(&phi, KernelId::Coherence, 2).unwrap(), 1.0);
    }

    #[test]
    fn orthonormal_columns_have_zero_ric() {
        let phi = DMatrix::<f64>::identity(5, 5);
        for k in 1..=5 {
            assert!(max_over_subsets(&phi, KernelId::Ric, k).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn max_matches_brute_force_svd() {
        let spec = EnsembleSpec::new(Family::Gaussian, 3, 4, 2024).unwrap();
        for t in 0..20 {
            let phi = sample_matrix(&spec, t).data;
            let mut brute = f64::NEG_INFINITY;
            for i in 0..4 {
                for j in i + 1..4 {
                    let sv = select_columns(&phi, &[i, j]).svd(false, false).singular_values;
                    let hi = sv.max().powi(2);
                    let lo = sv.min().powi(2);
                    brute = brute.max((hi - 1.0).max(1.0 - lo));
                }
            }
            let got = max_over_subsets(&phi, KernelId::Ric, 2).unwrap();
            assert!((got - brute).abs() < 1e-12, "{got} vs {brute}");
        }
    }

    #[test]
    fn u_statistic_zero_iff_max_below() {
        let spec = EnsembleSpec::new(Family::Gaussian, 4, 7, 3).unwrap();
        for t in 0..10 {
            let phi = sample_matrix(&spec, t).data;
            for kernel in [KernelId::Ric, KernelId::SigmaMaxSq, KernelId::NegSigmaMinSq] {
                let mx = max_over_subsets(&phi, kernel, 3).unwrap();
                for a in [-2.0, -0.5, 0.0, 0.3, 1.0, 1.7, 3.0] {
                    let u = u_statistic(&phi, kernel, 3, a).unwrap();
                    assert!((0.0..=1.0).contains(&u));
                    let below = mx <= kernel.event_threshold(a);
                    assert_eq!(u == 0.0, below, "kernel {kernel:?} a={a}");
                }
            }
        }
    }

    #[test]
    fn subset_values_match_direct_kernels() {
        let spec = EnsembleSpec::new(Family::Bernoulli, 6, 6, 8).unwrap();
        let phi = sample_matrix(&spec, 0).data;
        let v = subset_kernel_values(&phi, KernelId::Ric, 3, 100).unwrap();
        for (s, z) in subsets(6, 3).unwrap().zip(&v) {
            let direct = ric_kernel(&select_columns(&phi, &s)).unwrap();
            assert!((direct - z).abs() < 1e-12);
        }
        let v = subset_kernel_values(&phi, KernelId::Coherence, 2, 100).unwrap();
        for (s, z) in subsets(6, 2).unwrap().zip(&v) {
            let direct = coherence_kernel(&select_columns(&phi, &s)).unwrap();
            assert!((direct - z).abs() < 1e-14);
        }
    }

    #[test]
    fn marginal_below_all_values_is_one_and_deterministic() {
        let spec = EnsembleSpec::new(Family::Gaussian, 4, 6, 17).unwrap();
        let grid = [-10.0, 0.5, 1.0, 2.0, 50.0];
        let a = mc_marginal_tail(&spec, KernelId::SigmaMaxSq, 2, &grid, 500).unwrap();
        assert_eq!(a[0].point, 1.0);
        assert_eq!(a[4].point, 0.0);
        for w in a.windows(2) {
            assert!(w[0].count >= w[1].count);
        }
        let b = mc_marginal_tail(&spec, KernelId::SigmaMaxSq, 2, &grid, 500).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn chi_square_marginal_tail() {
        // m = 2, k = 1: |col|^2 ~ chi2_2 / 2, so Pr{|col|^2 > a} = exp(-a)
        let spec = EnsembleSpec::new(Family::Gaussian, 2, 1, 31).unwrap();
        let grid = [0.25, 0.5, 1.0, 1.5, 2.0];
        let est = mc_marginal_tail(&spec, KernelId::SigmaMaxSq, 1, &grid, 40_000).unwrap();
        for e in est {
            let exact = (-e.a).exp();
            assert!((e.point - exact).abs() <= 3.0 * e.std_err, "{e:?} vs {exact}");
        }
    }

    #[test]
    fn joint_is_subset_of_marginal_event() {
        let spec = EnsembleSpec::new(Family::Gaussian, 5, 8, 41).unwrap();
        let grid: Vec<f64> = (0..20).map(|i| 0.2 * i as f64).collect();
        let exp = run_extreme_experiment(&spec, KernelId::SigmaMaxSq, 3, &grid, 3000, 1000, true).unwrap();
        for (j, p) in exp.marginal.iter().enumerate() {
            assert!(exp.extreme[j].count >= p.count);
            for q in &exp.joint {
                assert!(q[j].count <= p.count);
            }
        }
        // the same trials through the standalone routines
        let p = mc_marginal_tail(&spec, KernelId::SigmaMaxSq, 3, &grid, 3000).unwrap();
        let q1 = mc_joint_tail(&spec, KernelId::SigmaMaxSq, 3, 1, &grid, 3000).unwrap();
        let e = mc_extreme_tail(&spec, KernelId::SigmaMaxSq, 3, &grid, 3000).unwrap();
        assert_eq!(p, exp.marginal);
        assert_eq!(q1, exp.joint[0]);
        assert_eq!(e, exp.extreme);
        assert_eq!(mc_joint_tail(&spec, KernelId::SigmaMaxSq, 3, 1, &[-1.0], 10).unwrap()[0].point, 1.0);
    }

    #[test]
    fn joint_rejects_bad_overlap() {
        let spec = EnsembleSpec::new(Family::Gaussian, 5, 5, 1).unwrap();
        assert!(mc_joint_tail(&spec, KernelId::Ric, 3, 0, &[0.0], 10).is_err());
        assert!(mc_joint_tail(&spec, KernelId::Ric, 3, 3, &[0.0], 10).is_err());
        // 2k - i = 7 > n = 5
        assert!(mc_joint_tail(&spec, KernelId::Ric, 4, 1, &[0.0], 10).is_err());
    }

    #[test]
    fn extreme_refuses_infeasible_enumeration() {
        let spec = EnsembleSpec::new(Family::Gaussian, 5, 200, 1).unwrap();
        assert!(matches!(
            mc_extreme_tail(&spec, KernelId::Ric, 4, &[0.0], 1),
            Err(Error::EnumerationInfeasible { .. })
        ));
    }

    #[test]
    fn extreme_tail_vanishes_above_k_for_unit_columns() {
        // bernoulli columns are unit norm, so sigma_max^2 <= trace = k
        let spec = EnsembleSpec::new(Family::Bernoulli, 4, 6, 5).unwrap();
        let e = mc_extreme_tail(&spec, KernelId::SigmaMaxSq, 3, &[3.0, 3.5], 200).unwrap();
        assert!(e.iter().all(|t| t.count == 0));
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let spec = EnsembleSpec::new(Family::Bernoulli, 6, 9, 77).unwrap();
        let grid = [0.2, 0.4, 0.6];
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    run_extreme_experiment(&spec, KernelId::Coherence, 2, &grid, 700, 1000, true).unwrap()
                })
        };
        assert_eq!(run(1), run(5));
    }

    #[test]
    fn k1_u_statistic_is_binomial() {
        // n * U_n(a) ~ Binomial(n, p) with p = exp(-a) for m = 2 gaussian
        let (n, a, trials) = (12usize, 1.0f64, 4000u64);
        let spec = EnsembleSpec::new(Family::Gaussian, 2, n, 9).unwrap();
        let p = (-a).exp();
        let samples: Vec<f64> = (0..trials)
            .map(|t| n as f64 * u_statistic(&sample_matrix(&spec, t).data, KernelId::SigmaMaxSq, 1, a).unwrap())
            .collect();
        let mean = samples.iter().sum::<f64>() / trials as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        assert!((mean - n as f64 * p).abs() <= 3.0 * se, "{mean} vs {}", n as f64 * p);
        // binomial variance n p (1-p)
        let bin_var = n as f64 * p * (1.0 - p);
        assert!((var / bin_var - 1.0).abs() < 0.1, "{var} vs {bin_var}");
    }

    #[test]
    fn exchangeable_subsets_agree() {
        let spec = EnsembleSpec::new(Family::Gaussian, 4, 9, 123).unwrap();
        let grid = [0.5, 1.0, 1.5, 2.5];
        let a = mc_marginal_tail(&spec, KernelId::Ric, 2, &grid, 20_000).unwrap();
        let b = mc_marginal_tail_on(&spec, KernelId::Ric, &[3, 8], &grid, 20_000).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let se = (x.std_err.powi(2) + y.std_err.powi(2)).sqrt();
            assert!((x.point - y.point).abs() <= 3.0 * se.max(1e-12), "{x:?} {y:?}");
        }
    }

    #[test]
    fn gaussian_column_norm_has_unit_mean() {
        let spec = EnsembleSpec::new(Family::Gaussian, 10, 1, 4).unwrap();
        let trials = 10_000u64;
        let v: Vec<f64> = (0..trials)
            .map(|t| sample_columns(&spec, t, 1).column(0).norm_squared())
            .collect();
        let mean = v.iter().sum::<f64>() / trials as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        assert!((mean - 1.0).abs() <= 3.0 * (var / trials as f64).sqrt());
    }

    #[test]
    fn distinct_trials_are_uncorrelated() {
        let spec = EnsembleSpec::new(Family::Gaussian, 3, 3, 2).unwrap();
        let trials = 1000u64;
        // entry (0,0) of trial t versus trial t + trials
        let xs: Vec<f64> = (0..trials).map(|t| sample_columns(&spec, t, 1)[(0, 0)]).collect();
        let ys: Vec<f64> = (0..trials).map(|t| sample_columns(&spec, t + trials, 1)[(0, 0)]).collect();
        let mx = xs.iter().sum::<f64>() / trials as f64;
        let my = ys.iter().sum::<f64>() / trials as f64;
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>();
        let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        let r = cov / (vx * vy).sqrt();
        // SE of the sample correlation under independence ~ 1/sqrt(N)
        assert!(r.abs() <= 3.0 / (trials as f64).sqrt(), "r = {r}");
    }

    #[test]
    fn projection_tail_rejects_bad_direction() {
        let spec = EnsembleSpec::new(Family::Gaussian, 3, 1, 2).unwrap();
        assert!(mc_projection_tail(&spec, &DVector::zeros(3), &[0.1], 10).is_err());
        assert!(mc_projection_tail(&spec, &DVector::from_element(2, 1.0), &[0.1], 10).is_err());
    }
}
