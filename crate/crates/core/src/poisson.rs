//! Poisson approximation of the worst-case tail and its error bounds.
//!
//! With `lambda = C(n,k) p(a)`, `Pr{max_S zeta(A_S) <= a}` is approximated by
//! `exp(-lambda)`. Three nested upper bounds on the approximation error are
//! provided:
//!
//! ```text
//! eps_full   = (1 - e^-lambda) { p [C(n,k) - C(n-k,k)] + sum_r C(k,r) C(n-k,k-r) q_r / p }
//! eps_mid    = (1 - e^-lambda) p [C(n,k) - C(n-k,k)] + sum_r C(k,r) C(n-k,k-r) C(n,k) q_r
//! eps_single = (1 - e^-lambda) p [C(n,k) - C(n-k,k)]
//!              + 2^k (e(2k-1)/(k-1))^(k-1) (e n/(2k-1))^(2k-1) q_{k-1}
//! ```
//!
//! `eps_full <= eps_mid` because `1 - e^-x <= x`; `eps_mid <= eps_single`
//! whenever every `q_r <= q_{k-1}`.
//!
//! Binomial coefficients overflow quickly, so every product is accumulated
//! as a sum of logarithms and exponentiated once. Results that would exceed
//! [`LARGE`] saturate to it.

use statrs::function::gamma::ln_gamma;

use crate::ustat::TailEstimate;
use crate::{Error, Result};

/// Saturation value for quantities whose logarithm exceeds `ln(LARGE)`.
pub const LARGE: f64 = 1e300;

/// Below this `min(k, n-k)` the log-binomial is an explicit sum of logs.
const DIRECT_SUM_LIMIT: u64 = 256;

/// `ln C(n, k)`.
pub fn log_binomial(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(Error::InvalidInput(format!(
            "log_binomial requires 0 <= k <= n, got n={n}, k={k}"
        )));
    }
    Ok(ln_binom_unchecked(n, k))
}

fn ln_binom_unchecked(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    if k == 0 {
        return 0.0;
    }
    if k <= DIRECT_SUM_LIMIT {
        (0..k)
            .map(|i| ((n - i) as f64 / (i + 1) as f64).ln())
            .sum()
    } else {
        ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
    }
}

/// `ln C(n, k)`, or `None` when the coefficient is zero (`k > n`).
fn ln_binom_or_zero(n: u64, k: u64) -> Option<f64> {
    (k <= n).then(|| ln_binom_unchecked(n, k))
}

/// `exp(x)` capped at [`LARGE`].
pub fn exp_saturating(x: f64) -> f64 {
    if x >= LARGE.ln() {
        LARGE
    } else {
        x.exp()
    }
}

/// Accumulates `sum_i exp(l_i)` from log-terms without overflow.
#[derive(Debug, Clone, Copy)]
struct LogSum {
    max: f64,
    scaled: f64,
}

impl LogSum {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }

    fn add(&mut self, l: f64) {
        if l == f64::NEG_INFINITY {
            return;
        }
        if l > self.max {
            self.scaled = self.scaled * (self.max - l).exp() + 1.0;
            self.max = l;
        } else {
            self.scaled += (l - self.max).exp();
        }
    }

    fn ln(self) -> f64 {
        if self.scaled == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// `lambda_n = C(n, k) p`, saturating at [`LARGE`].
pub fn lambda_n(n: u64, k: u64, p: f64) -> Result<f64> {
    check_nk(n, k)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInput(format!("p must lie in [0, 1], got {p}")));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    Ok(exp_saturating(ln_binom_unchecked(n, k) + p.ln()))
}

/// `exp(-lambda)`, the Poisson approximation to `Pr{U_n(a) = 0}`.
pub fn poisson_zero_approx(lambda: f64) -> f64 {
    (-lambda).exp()
}

/// `1 - exp(-lambda)`, computed without cancellation for small `lambda`.
pub fn one_minus_exp_neg(lambda: f64) -> f64 {
    -(-lambda).exp_m1()
}

fn check_nk(n: u64, k: u64) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "need 0 < k <= n, got n={n}, k={k}"
        )));
    }
    Ok(())
}

fn check_inputs(n: u64, k: u64, p: f64, q: &[f64]) -> Result<()> {
    check_nk(n, k)?;
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::domain(
            "poisson error bound",
            format!("requires 0 < p <= 1, got p = {p}"),
        ));
    }
    if q.len() as u64 != k - 1 {
        return Err(Error::InvalidInput(format!(
            "expected k-1 = {} joint probabilities, got {}",
            k - 1,
            q.len()
        )));
    }
    if let Some((r, &v)) = q.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidInput(format!(
            "q_{} must lie in [0, 1], got {v}",
            r + 1
        )));
    }
    Ok(())
}

/// Overlaps `r` (1-based) whose joint estimate exceeds the marginal, which no
/// true distribution allows but Monte-Carlo noise can produce.
pub fn joint_inconsistencies(p: f64, q: &[f64]) -> Vec<usize> {
    q.iter()
        .enumerate()
        .filter(|(_, &v)| v > p)
        .map(|(r, _)| r + 1)
        .collect()
}

/// `ln(C(n,k) - C(n-k,k))`; `-inf` when the difference vanishes.
fn ln_binom_gap(n: u64, k: u64) -> f64 {
    let top = ln_binom_unchecked(n, k);
    match ln_binom_or_zero(n - k, k) {
        None => top,
        Some(low) => {
            let ratio = (low - top).exp();
            if ratio >= 1.0 {
                f64::NEG_INFINITY
            } else {
                top + (-ratio).ln_1p()
            }
        }
    }
}

/// `ln(C(k,r) C(n-k,k-r))`, `None` if the product is zero.
fn ln_overlap_weight(n: u64, k: u64, r: u64) -> Option<f64> {
    Some(ln_binom_unchecked(k, r) + ln_binom_or_zero(n - k, k - r)?)
}

/// Coefficient multiplying `q_{k-1}` in the single-term bound, in log domain.
fn ln_single_coefficient(n: u64, k: u64) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    let two_k1 = 2.0 * kf - 1.0;
    kf * std::f64::consts::LN_2
        + (kf - 1.0) * (1.0 + two_k1.ln() - (kf - 1.0).ln())
        + two_k1 * (1.0 + nf.ln() - two_k1.ln())
}

/// Full error bound; for `k = 1` the joint sum is empty.
pub fn eps_full(n: u64, k: u64, p: f64, q: &[f64]) -> Result<f64> {
    check_inputs(n, k, p, q)?;
    let lam = lambda_n(n, k, p)?;
    let mut inner = LogSum::new();
    inner.add(p.ln() + ln_binom_gap(n, k));
    for (r, &qr) in (1..k).zip(q) {
        if let Some(w) = ln_overlap_weight(n, k, r) {
            inner.add(w + qr.ln() - p.ln());
        }
    }
    Ok(exp_saturating(one_minus_exp_neg(lam).ln() + inner.ln()))
}

/// Intermediate bound obtained with `1 - e^-lambda <= lambda` on the joint terms.
pub fn eps_mid(n: u64, k: u64, p: f64, q: &[f64]) -> Result<f64> {
    check_inputs(n, k, p, q)?;
    let lam = lambda_n(n, k, p)?;
    let ln_cnk = ln_binom_unchecked(n, k);
    let mut acc = LogSum::new();
    acc.add(one_minus_exp_neg(lam).ln() + p.ln() + ln_binom_gap(n, k));
    for (r, &qr) in (1..k).zip(q) {
        if let Some(w) = ln_overlap_weight(n, k, r) {
            acc.add(w + ln_cnk + qr.ln());
        }
    }
    Ok(exp_saturating(acc.ln()))
}

/// Bound depending on the largest-overlap joint probability only. Needs `k >= 2`.
pub fn eps_single(n: u64, k: u64, p: f64, q_top: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::Unsupported(
            "single-term error bound needs k >= 2".into(),
        ));
    }
    let mut q = vec![0.0; (k - 1) as usize];
    q[(k - 2) as usize] = q_top;
    check_inputs(n, k, p, &q)?;
    let lam = lambda_n(n, k, p)?;
    let mut acc = LogSum::new();
    acc.add(one_minus_exp_neg(lam).ln() + p.ln() + ln_binom_gap(n, k));
    acc.add(ln_single_coefficient(n, k) + q_top.ln());
    Ok(exp_saturating(acc.ln()))
}

/// Per-threshold bundle of Poisson quantities.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PoissonReport {
    pub a: f64,
    pub p: f64,
    /// `q[r-1] = q_r` for `r = 1..k-1`.
    pub q: Vec<f64>,
    pub lambda: f64,
    pub approx_zero: f64,
    pub one_minus_approx_zero: f64,
    pub eps_full: f64,
    pub eps_mid: f64,
    /// `None` for `k = 1`.
    pub eps_single: Option<f64>,
    /// Overlaps whose joint input exceeded `p`.
    pub flagged_overlaps: Vec<usize>,
    /// First-order standard errors, present when built from Monte-Carlo estimates.
    pub std_errs: Option<EpsStdErrs>,
}

/// Delta-method standard errors of the three bounds.
///
/// Uses `se(eps)^2 = (d eps/dp)^2 se(p)^2 + sum_r (d eps/dq_r)^2 se(q_r)^2`,
/// ignoring the correlation between estimates taken from the same trials.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EpsStdErrs {
    pub eps_full: f64,
    pub eps_mid: f64,
    pub eps_single: Option<f64>,
}

impl PoissonReport {
    pub fn new(n: u64, k: u64, a: f64, p: f64, q: &[f64]) -> Result<Self> {
        let lambda = lambda_n(n, k, p)?;
        let eps_single = if k >= 2 {
            Some(eps_single(n, k, p, q.last().copied().unwrap_or(0.0))?)
        } else {
            None
        };
        Ok(Self {
            a,
            p,
            q: q.to_vec(),
            lambda,
            approx_zero: poisson_zero_approx(lambda),
            one_minus_approx_zero: one_minus_exp_neg(lambda),
            eps_full: eps_full(n, k, p, q)?,
            eps_mid: eps_mid(n, k, p, q)?,
            eps_single,
            flagged_overlaps: joint_inconsistencies(p, q),
            std_errs: None,
        })
    }

    /// Builds the report from Monte-Carlo estimates and propagates their
    /// standard errors to the bounds.
    pub fn from_estimates(n: u64, k: u64, p: &TailEstimate, q: &[TailEstimate]) -> Result<Self> {
        let qv: Vec<f64> = q.iter().map(|e| e.point).collect();
        let mut report = Self::new(n, k, p.a, p.point, &qv)?;
        let lam = report.lambda;
        let e = poisson_zero_approx(lam);
        let o = report.one_minus_approx_zero;
        let cnk = exp_saturating(ln_binom_unchecked(n, k));
        let gap = exp_saturating(ln_binom_gap(n, k));
        let w: Vec<f64> = (1..k)
            .map(|r| ln_overlap_weight(n, k, r).map_or(0.0, exp_saturating))
            .collect();
        let pp = p.point;
        let sum_wq: f64 = w.iter().zip(&qv).map(|(w, q)| w * q).sum();

        let d_full_p = cnk * e * (pp * gap + sum_wq / pp) + o * (gap - sum_wq / (pp * pp));
        let d_first_p = cnk * e * pp * gap + o * gap;
        let se_q = |coef: &dyn Fn(usize) -> f64| -> f64 {
            q.iter()
                .enumerate()
                .map(|(r, est)| (coef(r) * est.std_err).powi(2))
                .sum()
        };
        let full = ((d_full_p * p.std_err).powi(2) + se_q(&|r| o * w[r] / pp)).sqrt();
        let mid = ((d_first_p * p.std_err).powi(2) + se_q(&|r| w[r] * cnk)).sqrt();
        let single = report.eps_single.map(|_| {
            let coef = exp_saturating(ln_single_coefficient(n, k));
            let se_top = q.last().map_or(0.0, |e| e.std_err);
            ((d_first_p * p.std_err).powi(2) + (coef * se_top).powi(2)).sqrt()
        });
        report.std_errs = Some(EpsStdErrs {
            eps_full: full.min(LARGE),
            eps_mid: mid.min(LARGE),
            eps_single: single.map(|s| s.min(LARGE)),
        });
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_bigint::BigUint;

    fn big_binom(n: u64, k: u64) -> BigUint {
        let mut acc = BigUint::from(1u32);
        for i in 0..k {
            acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
        }
        acc
    }

    /// ln of a big integer via its leading 64 bits and bit length.
    fn big_ln(x: &BigUint) -> f64 {
        let bits = x.bits();
        if bits <= 64 {
            return (x.iter_u64_digits().next().unwrap_or(0) as f64).ln();
        }
        let shift = bits - 64;
        let top = (x >> shift).iter_u64_digits().next().unwrap() as f64;
        top.ln() + shift as f64 * std::f64::consts::LN_2
    }

    fn exact_u128(n: u64, k: u64) -> u128 {
        if k > n {
            return 0;
        }
        let mut acc: u128 = 1;
        for i in 0..k {
            acc = acc * (n - i) as u128 / (i + 1) as u128;
        }
        acc
    }

    #[test]
    fn log_binomial_small_values() {
        assert_eq!(log_binomial(17, 0).unwrap(), 0.0);
        assert_relative_eq!(log_binomial(4, 2).unwrap(), 6f64.ln(), max_relative = 1e-15);
        assert!(log_binomial(3, 4).is_err());
    }

    #[test]
    fn log_binomial_matches_big_integers() {
        let cases = [
            (1000, 10),
            (60, 30),
            (10_000, 3),
            (10_000, 255),
            (10_000, 257),
            (10_000, 5000),
            (10_000, 9_999),
            (2_000, 700),
        ];
        for (n, k) in cases {
            let exact = big_ln(&big_binom(n, k));
            let got = log_binomial(n, k).unwrap();
            assert_relative_eq!(got, exact, max_relative = 1e-10);
        }
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda_n(4, 2, 0.0).unwrap(), 0.0);
        assert_relative_eq!(lambda_n(4, 2, 0.1).unwrap(), 0.6, max_relative = 1e-14);
        assert_relative_eq!(lambda_n(37, 1, 0.02).unwrap(), 37.0 * 0.02, max_relative = 1e-14);
        assert_eq!(lambda_n(100_000, 500, 1.0).unwrap(), LARGE);
        assert!(lambda_n(4, 2, 1.5).is_err());
    }

    #[test]
    fn zero_approx_examples() {
        assert_eq!(poisson_zero_approx(0.0), 1.0);
        assert_relative_eq!(poisson_zero_approx(0.6), 0.548_811_636_094_026_4, max_relative = 1e-15);
        assert_eq!(poisson_zero_approx(1e6), 0.0);
        assert_eq!(one_minus_exp_neg(0.0), 0.0);
        assert_relative_eq!(one_minus_exp_neg(1e-20), 1e-20, max_relative = 1e-12);
    }

    #[test]
    fn eps_full_examples() {
        let e = eps_full(10, 1, 0.1, &[]).unwrap();
        assert_relative_eq!(e, (1.0 - (-1.0f64).exp()) * 0.1, max_relative = 1e-14);
        assert_relative_eq!(e, 0.063_212_055_882_855_77, max_relative = 1e-12);

        let e = eps_full(4, 2, 0.1, &[0.01]).unwrap();
        let expect = (1.0 - (-0.6f64).exp()) * (0.1 * 5.0 + 4.0 * 0.1);
        assert_relative_eq!(e, expect, max_relative = 1e-13);
        assert!((e - 0.40607).abs() < 5e-5);

        // q = 0 leaves only the first term
        let e = eps_full(9, 3, 0.02, &[0.0, 0.0]).unwrap();
        let lam = 84.0 * 0.02;
        let expect = (1.0 - (-lam as f64).exp()) * 0.02 * (84.0 - 20.0);
        assert_relative_eq!(e, expect, max_relative = 1e-13);
    }

    #[test]
    fn eps_mid_examples() {
        let e = eps_mid(4, 2, 0.1, &[0.01]).unwrap();
        let expect = (1.0 - (-0.6f64).exp()) * 0.5 + 4.0 * 6.0 * 0.01;
        assert_relative_eq!(e, expect, max_relative = 1e-13);
        assert!((e - 0.46560).abs() < 5e-5);
        assert_relative_eq!(
            eps_mid(9, 3, 0.02, &[0.0, 0.0]).unwrap(),
            eps_full(9, 3, 0.02, &[0.0, 0.0]).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn eps_single_examples() {
        let first = (1.0 - (-0.6f64).exp()) * 0.5;
        assert_relative_eq!(eps_single(4, 2, 0.1, 0.0).unwrap(), first, max_relative = 1e-13);
        let e = 1f64.exp();
        let coef = 4.0 * (3.0 * e) * (4.0 * e / 3.0).powi(3);
        let got = eps_single(4, 2, 0.1, 0.01).unwrap();
        assert_relative_eq!(got, first + coef * 0.01, max_relative = 1e-13);
        assert!((got - 15.756).abs() < 5e-3, "{got}");
        assert!(matches!(eps_single(10, 1, 0.1, 0.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn preconditions() {
        assert!(eps_full(10, 2, 0.0, &[0.0]).is_err());
        assert!(eps_mid(10, 2, -0.1, &[0.0]).is_err());
        assert!(eps_full(10, 3, 0.1, &[0.0]).is_err());
        assert!(eps_full(10, 2, 0.1, &[1.2]).is_err());
        // q > p is accepted and flagged
        assert!(eps_full(10, 2, 0.1, &[0.2]).is_ok());
        assert_eq!(joint_inconsistencies(0.1, &[0.05, 0.2, 0.3]), vec![2, 3]);
        let r = PoissonReport::new(10, 3, 1.0, 0.1, &[0.05, 0.2]).unwrap();
        assert_eq!(r.flagged_overlaps, vec![2]);
    }

    #[test]
    fn binomial_gap_handles_small_n() {
        // n < 2k: C(n-k, k) = 0
        let e = eps_full(5, 3, 0.1, &[0.0, 0.0]).unwrap();
        let lam: f64 = 10.0 * 0.1;
        assert_relative_eq!(e, (1.0 - (-lam).exp()) * 0.1 * 10.0, max_relative = 1e-13);
    }

    #[test]
    fn appendix_identities_hold_exactly() {
        // sum_{r=1}^{k-1} C(k,r) = 2^k - 2 and C(n-k,i) C(n,k) = C(k+i,i) C(n,k+i)
        for k in 1..=30u64 {
            let s: u128 = (1..k).map(|r| exact_u128(k, r)).sum();
            assert_eq!(s, (1u128 << k) - 2);
        }
        for n in 1..=60u64 {
            for k in 0..=n {
                for i in 0..=(n - k) {
                    let lhs = big_binom(n - k, i) * big_binom(n, k);
                    let rhs = big_binom(k + i, i) * big_binom(n, k + i);
                    assert_eq!(lhs, rhs, "n={n} k={k} i={i}");
                    let l = log_binomial(n - k, i).unwrap() + log_binomial(n, k).unwrap();
                    let r = log_binomial(k + i, i).unwrap() + log_binomial(n, k + i).unwrap();
                    assert!((l - r).abs() <= 1e-12 * l.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn one_minus_exp_is_below_lambda() {
        for i in 0..2000 {
            let lam = i as f64 * 0.01;
            assert!(one_minus_exp_neg(lam) <= lam);
        }
    }

    #[test]
    fn std_errs_are_propagated() {
        let p = TailEstimate::from_count(1.0, 100, 10_000);
        let q = [TailEstimate::from_count(1.0, 3, 10_000)];
        let r = PoissonReport::from_estimates(20, 2, &p, &q).unwrap();
        let se = r.std_errs.unwrap();
        assert!(se.eps_full > 0.0 && se.eps_mid > 0.0 && se.eps_single.unwrap() > 0.0);
        // finite-difference check of the eps_full sensitivity
        let h = 1e-7;
        let dp = (eps_full(20, 2, 0.01 + h, &[3e-4]).unwrap() - eps_full(20, 2, 0.01 - h, &[3e-4]).unwrap()) / (2.0 * h);
        let dq = (eps_full(20, 2, 0.01, &[3e-4 + h]).unwrap() - eps_full(20, 2, 0.01, &[3e-4 - h]).unwrap()) / (2.0 * h);
        let expect = ((dp * p.std_err).powi(2) + (dq * q[0].std_err).powi(2)).sqrt();
        assert_relative_eq!(se.eps_full, expect, max_relative = 1e-5);
    }
}
