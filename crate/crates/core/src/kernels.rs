//! Subset functions evaluated on `m x k` column submatrices.
//!
//! All kernels are symmetric under column reordering. Thresholding follows
//! the strict `zeta > a` convention; ties count as non-exceedance.

use nalgebra::DMatrix;

use crate::linalg::{eig2, sym_extreme_eigenvalues};
use crate::{Error, Result};

/// Which subset function is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelId {
    /// `max(sigma_max^2 - 1, 1 - sigma_min^2)`.
    Ric,
    /// `sigma_max^2`.
    SigmaMaxSq,
    /// `-sigma_min^2`. Thresholds are given on `sigma_min^2` itself: the
    /// indicator at `a` is `-sigma_min^2 > -a`, i.e. `sigma_min^2 < a`.
    NegSigmaMinSq,
    /// `|a1^T a2| / (|a1| |a2|)`, only for two columns.
    Coherence,
}

impl KernelId {
    /// Value `v` of the kernel is counted as exceeding threshold `a` when
    /// `v > event_threshold(a)`.
    #[inline]
    pub fn event_threshold(self, a: f64) -> f64 {
        match self {
            KernelId::NegSigmaMinSq => -a,
            _ => a,
        }
    }

    #[inline]
    pub fn exceeds(self, value: f64, a: f64) -> bool {
        value > self.event_threshold(a)
    }

    /// Checks that the kernel is defined for subsets of size `k`.
    pub fn check_order(self, k: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::InvalidInput("subset size k must be positive".into()));
        }
        if self == KernelId::Coherence && k != 2 {
            return Err(Error::InvalidInput(format!(
                "coherence kernel requires k = 2, got k = {k}"
            )));
        }
        Ok(())
    }

    /// Kernel value on a column submatrix.
    pub fn evaluate(self, a_sub: &DMatrix<f64>) -> Result<f64> {
        self.check_order(a_sub.ncols())?;
        match self {
            KernelId::Coherence => coherence_kernel(a_sub),
            _ => {
                let (lo, hi) = squared_singular_extremes(a_sub)?;
                Ok(self.from_extremes(lo, hi))
            }
        }
    }

    /// Kernel value from the `k x k` Gram matrix `A_S^T A_S` of a submatrix
    /// with `m` rows. Inputs are assumed finite.
    pub fn evaluate_gram(self, gram: &DMatrix<f64>, m: usize) -> Result<f64> {
        let k = gram.nrows();
        match self {
            KernelId::Coherence => {
                self.check_order(k)?;
                coherence_from_gram(gram[(0, 0)], gram[(1, 0)], gram[(1, 1)])
            }
            _ => {
                let (lo, hi) = clamp_extremes(sym_extreme_eigenvalues(gram), k > m);
                Ok(self.from_extremes(lo, hi))
            }
        }
    }

    fn from_extremes(self, sig_min_sq: f64, sig_max_sq: f64) -> f64 {
        match self {
            KernelId::Ric => (sig_max_sq - 1.0).max(1.0 - sig_min_sq),
            KernelId::SigmaMaxSq => sig_max_sq,
            KernelId::NegSigmaMinSq => -sig_min_sq,
            KernelId::Coherence => unreachable!("coherence is not a singular-value kernel"),
        }
    }
}

impl std::str::FromStr for KernelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "ric" => Ok(KernelId::Ric),
            "sigma_max_sq" => Ok(KernelId::SigmaMaxSq),
            "neg_sigma_min_sq" => Ok(KernelId::NegSigmaMinSq),
            "coherence" => Ok(KernelId::Coherence),
            _ => Err(Error::InvalidInput(format!("unknown kernel '{s}'"))),
        }
    }
}

fn check_finite(a: &DMatrix<f64>) -> Result<()> {
    if a.is_empty() {
        return Err(Error::InvalidInput("empty submatrix".into()));
    }
    for c in 0..a.ncols() {
        for r in 0..a.nrows() {
            let v = a[(r, c)];
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: r,
                    col: c,
                    value: v,
                });
            }
        }
    }
    Ok(())
}

fn clamp_extremes((lo, hi): (f64, f64), rank_deficient: bool) -> (f64, f64) {
    let hi = hi.max(0.0);
    let lo = if rank_deficient { 0.0 } else { lo.clamp(0.0, hi) };
    (lo, hi)
}

/// `(sigma_min^2, sigma_max^2)` of `a_sub`, from the smaller of the two Gram
/// matrices. When `k > m` the minimum is exactly zero.
pub fn squared_singular_extremes(a_sub: &DMatrix<f64>) -> Result<(f64, f64)> {
    check_finite(a_sub)?;
    let (m, k) = a_sub.shape();
    let gram = if k <= m {
        a_sub.tr_mul(a_sub)
    } else {
        a_sub * a_sub.transpose()
    };
    Ok(clamp_extremes(sym_extreme_eigenvalues(&gram), k > m))
}

/// Restricted-isometry kernel `max(sigma_max^2 - 1, 1 - sigma_min^2)`; never negative.
pub fn ric_kernel(a_sub: &DMatrix<f64>) -> Result<f64> {
    KernelId::Ric.evaluate(a_sub)
}

/// Normalized absolute inner product of the two columns of `a_sub`.
pub fn coherence_kernel(a_sub: &DMatrix<f64>) -> Result<f64> {
    if a_sub.ncols() != 2 {
        return Err(Error::InvalidInput(format!(
            "coherence kernel requires 2 columns, got {}",
            a_sub.ncols()
        )));
    }
    check_finite(a_sub)?;
    let c0 = a_sub.column(0);
    let c1 = a_sub.column(1);
    coherence_from_gram(c0.norm_squared(), c0.dot(&c1), c1.norm_squared())
}

fn coherence_from_gram(g00: f64, g10: f64, g11: f64) -> Result<f64> {
    if g00 <= 0.0 || g11 <= 0.0 {
        return Err(Error::Degenerate(
            "coherence kernel undefined for a zero column".into(),
        ));
    }
    // Cauchy-Schwarz holds exactly; rounding can push slightly above 1
    Ok((g10.abs() / (g00.sqrt() * g11.sqrt())).min(1.0))
}

/// `1{zeta(a_sub) > a}` with the kernel's threshold convention.
pub fn indicator(kernel: KernelId, a_sub: &DMatrix<f64>, a: f64) -> Result<u8> {
    Ok(kernel.exceeds(kernel.evaluate(a_sub)?, a) as u8)
}

/// Extreme squared singular values of a two-column Gram matrix.
#[inline]
pub fn gram2_extremes(g00: f64, g10: f64, g11: f64) -> (f64, f64) {
    let (lo, hi) = eig2(g00, g10, g11);
    (lo.max(0.0), hi.max(0.0))
}
