//! Closed-form tail bounds and constants.
//!
//! Divergence-based marginal and joint bounds for extreme squared singular
//! values, the trace-moment presets they depend on, union and concentration
//! bounds, coherence bounds, and a few auxiliary constants. All logarithms
//! are natural.
//!
//! Bounds are returned raw and may exceed 1; use [`is_vacuous`] to flag them.
//! Evaluators with a validity domain reject arguments outside it unless
//! called with [`DomainMode::Permissive`], which evaluates any argument for
//! which the displayed formula is finite.

use std::f64::consts::{LN_2, PI, SQRT_2};

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ensembles::{fill_entries, stream_rng, Family};
use crate::linalg::{sym_expm, sym_extreme_eigenvalues, trace_product};
use crate::poisson::{exp_saturating, one_minus_exp_neg};
use crate::{Error, Result};

/// Which extreme is bounded: `sigma_max^2 > a` or `sigma_min^2 < a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Max,
    Min,
}

impl std::str::FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Side::Max),
            "min" => Ok(Side::Min),
            other => Err(Error::InvalidInput(format!(
                "unknown side '{other}' (expected max or min)"
            ))),
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Max => "max",
            Side::Min => "min",
        })
    }
}

/// Whether theorem validity domains are enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DomainMode {
    #[default]
    Strict,
    Permissive,
}

/// A bound above 1 carries no information about a probability.
pub fn is_vacuous(value: f64) -> bool {
    value > 1.0
}

/// Binary divergence `D(a||b) = a ln(a/b) + (1-a) ln((1-a)/(1-b))`, with `0 ln 0 = 0`.
pub fn divergence(a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::domain("divergence", format!("need a in [0, 1], got a = {a}")));
    }
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::domain("divergence", format!("need b in (0, 1), got b = {b}")));
    }
    let mut d = 0.0;
    if a > 0.0 {
        d += a * (a / b).ln();
    }
    if a < 1.0 {
        d += (1.0 - a) * ((1.0 - a) / (1.0 - b)).ln();
    }
    Ok(d.max(0.0))
}

fn check_k(k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    Ok(k as f64)
}

fn check_m(m: u32) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidInput("m must be positive".into()));
    }
    Ok(m as f64)
}

/// `D(a/k || tau)`, the exponent of [`marginal_bound`] per unit of `m`.
pub fn marginal_exponent(side: Side, a: f64, k: u32, tau: f64, mode: DomainMode) -> Result<f64> {
    let kf = check_k(k)?;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::domain("marginal bound", format!("need tau in (0, 1), got {tau}")));
    }
    if mode == DomainMode::Strict {
        let edge = kf * tau;
        let ok = match side {
            Side::Max => edge < a && a < kf,
            Side::Min => 0.0 < a && a < edge,
        };
        if !ok {
            let range = match side {
                Side::Max => format!("({edge}, {kf})"),
                Side::Min => format!("(0, {edge})"),
            };
            return Err(Error::domain(
                "marginal bound",
                format!("{side} side needs a in {range}, got a = {a}"),
            ));
        }
    }
    divergence(a / kf, tau)
}

/// `k exp(-m D(a/k || tau))`, bounding `Pr{sigma_max^2 > a}` (max side) or
/// `Pr{sigma_min^2 < a}` (min side) for one `m x k` submatrix.
pub fn marginal_bound(side: Side, a: f64, k: u32, m: u32, tau: f64) -> Result<f64> {
    marginal_bound_with(side, a, k, m, tau, DomainMode::Strict)
}

pub fn marginal_bound_with(
    side: Side,
    a: f64,
    k: u32,
    m: u32,
    tau: f64,
    mode: DomainMode,
) -> Result<f64> {
    let mf = check_m(m)?;
    let d = marginal_exponent(side, a, k, tau, mode)?;
    Ok(k as f64 * (-mf * d).exp())
}

fn check_c1_c2(what: &'static str, c1: f64, c2: f64) -> Result<()> {
    if !(c1 > 0.0 && c1 < 1.0) {
        return Err(Error::domain(what, format!("need c1 in (0, 1), got c1 = {c1}")));
    }
    if !(c2 > 0.0 && c2 <= 1.0) {
        return Err(Error::domain(what, format!("need c2 in (0, 1], got c2 = {c2}")));
    }
    Ok(())
}

/// `1/2 sqrt(1 + 4 (1/c2 - 1)(1 - a/k)(a/k) / (1 - c1)^2) - 1/2`.
pub fn c4_constant(a: f64, k: u32, c1: f64, c2: f64) -> Result<f64> {
    let x = a / check_k(k)?;
    if !(0.0..1.0).contains(&x) {
        return Err(Error::domain("c4", format!("need 0 <= a/k < 1, got a/k = {x}")));
    }
    check_c1_c2("c4", c1, c2)?;
    let rad = 1.0 + 4.0 * (1.0 / c2 - 1.0) * (1.0 - x) * x / ((1.0 - c1) * (1.0 - c1));
    Ok((0.5 * rad.sqrt() - 0.5).max(0.0))
}

/// `(a/k) ln((c4 + a/k)/(a/k)) - 1/2 ln(c2 (1+c4)^2 + (1-c2) ((1-a/k)/(1-c1))^2)`.
pub fn c3_constant(a: f64, k: u32, c1: f64, c2: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::domain("c3", format!("need a > 0, got a = {a}")));
    }
    let c4 = c4_constant(a, k, c1, c2)?;
    let x = a / k as f64;
    let r = (1.0 - x) / (1.0 - c1);
    let inner = c2 * (1.0 + c4) * (1.0 + c4) + (1.0 - c2) * r * r;
    if !(inner > 0.0) {
        return Err(Error::domain("c3", format!("log argument {inner} is not positive")));
    }
    Ok(x * ((c4 + x) / x).ln() - 0.5 * inner.ln())
}

/// Origin of a [`TauPreset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetFamily {
    Bernoulli,
    Gaussian,
    Custom,
}

/// Trace-moment constants for `m x k` submatrices: `tau_q` bounds the joint
/// trace moment, `tau_p_max`/`tau_p_min` the expected row outer product.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TauPreset {
    pub tau_q: f64,
    pub tau_p_max: f64,
    pub tau_p_min: f64,
    pub k: u32,
    pub family: PresetFamily,
}

impl TauPreset {
    /// `tau_q = 3/k^2`, `tau_p = 1/k`.
    pub fn bernoulli(k: u32) -> Result<Self> {
        let kf = check_k(k)?;
        Ok(Self {
            tau_q: 3.0 / (kf * kf),
            tau_p_max: 1.0 / kf,
            tau_p_min: 1.0 / kf,
            k,
            family: PresetFamily::Bernoulli,
        })
    }

    /// `tau_q = 5/k^2`, `tau_p = 1/k`.
    pub fn gaussian(k: u32) -> Result<Self> {
        let kf = check_k(k)?;
        Ok(Self {
            tau_q: 5.0 / (kf * kf),
            tau_p_max: 1.0 / kf,
            tau_p_min: 1.0 / kf,
            k,
            family: PresetFamily::Gaussian,
        })
    }

    pub fn for_family(family: Family, k: u32) -> Result<Self> {
        match family {
            Family::Bernoulli => Self::bernoulli(k),
            Family::Gaussian => Self::gaussian(k),
        }
    }

    /// Requires positive constants with `max(tau_p_max, tau_p_min) <= sqrt(tau_q)`.
    pub fn custom(k: u32, tau_q: f64, tau_p_max: f64, tau_p_min: f64) -> Result<Self> {
        check_k(k)?;
        for (name, v) in [("tau_q", tau_q), ("tau_p_max", tau_p_max), ("tau_p_min", tau_p_min)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        let limit = tau_q.sqrt();
        if tau_p_max.max(tau_p_min) > limit * (1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!(
                "preset needs max(tau_p_max, tau_p_min) <= sqrt(tau_q) = {limit}"
            )));
        }
        Ok(Self {
            tau_q,
            tau_p_max,
            tau_p_min,
            k,
            family: PresetFamily::Custom,
        })
    }

    pub fn tau_p(&self, side: Side) -> f64 {
        match side {
            Side::Max => self.tau_p_max,
            Side::Min => self.tau_p_min,
        }
    }

    /// `tau_q / tau_p`.
    pub fn c1(&self, side: Side) -> f64 {
        self.tau_q / self.tau_p(side)
    }

    /// `tau_p^2 / tau_q`.
    pub fn c2(&self, side: Side) -> f64 {
        let p = self.tau_p(side);
        p * p / self.tau_q
    }
}

/// `D(a/k || c1) + c3(a, k, c1, c2)`, half the exponent of [`joint_bound`] per unit of `m`.
///
/// Strict mode requires `k tau_p < a < k` and `a/k > c1` on the max side and
/// `0 < a < k tau_p` with `a/k < c1` on the min side.
pub fn joint_halved_exponent(side: Side, a: f64, preset: &TauPreset, mode: DomainMode) -> Result<f64> {
    let k = preset.k;
    let kf = check_k(k)?;
    let (c1, c2) = (preset.c1(side), preset.c2(side));
    check_c1_c2("joint bound", c1, c2)?;
    let x = a / kf;
    if mode == DomainMode::Strict {
        let edge = kf * preset.tau_p(side);
        let (ok, need) = match side {
            Side::Max => (
                edge < a && a < kf && x > c1,
                format!("a in ({}, {kf})", edge.max(kf * c1)),
            ),
            Side::Min => (0.0 < a && a < edge && x < c1, format!("a in (0, {})", edge.min(kf * c1))),
        };
        if !ok {
            return Err(Error::domain(
                "joint bound",
                format!("{side} side with c1 = {c1} needs {need}, got a = {a}"),
            ));
        }
    }
    let d = divergence(x, c1).map_err(|e| Error::domain("joint bound divergence", e.to_string()))?;
    let c3 = c3_constant(a, k, c1, c2).map_err(|e| Error::domain("joint bound c3", e.to_string()))?;
    let v = d + c3;
    if !v.is_finite() {
        return Err(Error::domain("joint bound", format!("exponent is not finite at a = {a}")));
    }
    Ok(v)
}

/// `k^2 exp(-2m (D(a/k || c1) + c3))` with `c1 = tau_q/tau_p`, `c2 = tau_p^2/tau_q`;
/// bounds `q_i(a)` for every overlap `1 <= i <= k-1`.
pub fn joint_bound(side: Side, a: f64, m: u32, preset: &TauPreset) -> Result<f64> {
    joint_bound_with(side, a, m, preset, DomainMode::Strict)
}

pub fn joint_bound_with(
    side: Side,
    a: f64,
    m: u32,
    preset: &TauPreset,
    mode: DomainMode,
) -> Result<f64> {
    let mf = check_m(m)?;
    let e = joint_halved_exponent(side, a, preset, mode)?;
    let kf = preset.k as f64;
    Ok(exp_saturating(2.0 * kf.ln() - 2.0 * mf * e))
}

/// `max(E A^4, (E A^2)^2) + 2 (E A^2)^2`.
pub fn tau_q_estimate(second_moment: f64, fourth_moment: f64) -> Result<f64> {
    if !(second_moment > 0.0 && second_moment.is_finite() && fourth_moment.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "moments must be positive and finite, got E A^2 = {second_moment}, E A^4 = {fourth_moment}"
        )));
    }
    let sq = second_moment * second_moment;
    if fourth_moment < sq * (1.0 - 1e-12) {
        return Err(Error::InvalidMoments {
            fourth: fourth_moment,
            second_sq: sq,
        });
    }
    Ok(fourth_moment.max(sq) + 2.0 * sq)
}

/// `exp(-eps^2 / c)` with `c = 2` (Gaussian) or `c = 16` (Bernoulli).
pub fn ledoux_tail(eps: f64, family: Family) -> f64 {
    let c = match family {
        Family::Gaussian => 2.0,
        Family::Bernoulli => 16.0,
    };
    (-eps * eps / c).exp()
}

/// `2 (e n / k)^k exp(-m eps^2 / 2)`.
pub fn ric_union_bound(n: u64, k: u64, m: u32, eps: f64) -> Result<f64> {
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("need 0 < k <= n, got n={n}, k={k}")));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    let (nf, kf) = (n as f64, k as f64);
    let ln = LN_2 + kf * (1.0 + (nf / kf).ln()) - m as f64 * eps * eps / 2.0;
    Ok(exp_saturating(ln))
}

/// `2 exp(-m a^2 / 2)`, bounding the tail of `|a1^T b|` for a random unit column.
pub fn coherence_tail_bound(a: f64, m: u32) -> f64 {
    2.0 * (-(m as f64) * a * a / 2.0).exp()
}

/// Gaussian-tail proxy `2 exp(-m a^2 / 2) / (a sqrt(2 pi))` for the
/// coherence marginal tail.
pub fn coherence_gaussian_p(a: f64, m: u32) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::domain("coherence proxy", format!("need a > 0, got a = {a}")));
    }
    Ok(coherence_tail_bound(a, m) / (a * (2.0 * PI).sqrt()))
}

/// The two summands of the coherence approximation-error bound.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CoherenceEps {
    /// `(1 - e^-lambda)(4n - 6) exp(-m a^2 / 2)`.
    pub term1: f64,
    /// `4 n^3 exp(-m a^2)`.
    pub term2: f64,
}

impl CoherenceEps {
    pub fn total(&self) -> f64 {
        self.term1 + self.term2
    }
}

pub fn coherence_eps_bound(n: u64, m: u32, a: f64, lambda: f64) -> Result<CoherenceEps> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("need n >= 2, got n = {n}")));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidInput(format!("lambda must be nonnegative, got {lambda}")));
    }
    let (nf, mf) = (n as f64, m as f64);
    Ok(CoherenceEps {
        term1: one_minus_exp_neg(lambda) * (4.0 * nf - 6.0) * (-mf * a * a / 2.0).exp(),
        term2: exp_saturating((4.0f64).ln() + 3.0 * nf.ln() - mf * a * a),
    })
}

/// Both sides of the rate condition `m beta_bar (a/k) > (k - 1/2)(1 + ln(n/(k-1)))`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RateCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

/// Diagnostic evaluation of the rate condition under which the worst-case
/// tail decays exponentially in `m`. Lower-order terms in `k` are dropped.
pub fn ddd_rate_check(n: u64, k: u64, m: f64, a: f64, beta_bar: f64) -> Result<RateCheck> {
    if k < 2 || n <= k {
        return Err(Error::InvalidInput(format!("need 2 <= k < n, got n={n}, k={k}")));
    }
    if !(beta_bar > 0.0) {
        return Err(Error::InvalidInput(format!("beta_bar must be positive, got {beta_bar}")));
    }
    let kf = k as f64;
    let lhs = m * beta_bar * (a / kf);
    let rhs = (kf - 0.5) * (1.0 + (n as f64 / (kf - 1.0)).ln());
    Ok(RateCheck {
        lhs,
        rhs,
        satisfied: lhs > rhs,
    })
}

/// `(k - 1) coh`, the Gershgorin bound on the isometry kernel of unit-norm columns.
pub fn gershgorin_ric(coh: f64, k: u32) -> f64 {
    k.saturating_sub(1) as f64 * coh
}

/// `sqrt((n - m) / (m (n - 1)))`, clamped to 0 for `n <= m`.
pub fn welch_lower_bound(n: u64, m: u64) -> Result<f64> {
    if n < 2 || m == 0 {
        return Err(Error::InvalidInput(format!("need n > 1 and m >= 1, got n={n}, m={m}")));
    }
    if n <= m {
        return Ok(0.0);
    }
    let (nf, mf) = (n as f64, m as f64);
    Ok(((nf - mf) / (mf * (nf - 1.0))).sqrt())
}

/// Recovery-guarantee constants `(c1, c2)` for a restricted isometry constant `delta` of order `2k`:
/// `c1 = 4 sqrt(1 + delta) / (1 - delta (1 + sqrt 2))`,
/// `c2 = 2 (delta (1 - sqrt 2) - 1) / (delta (1 + sqrt 2) - 1)`.
pub fn recovery_constants(delta: f64) -> Result<(f64, f64)> {
    let limit = SQRT_2 - 1.0;
    if !(0.0..limit).contains(&delta) {
        return Err(Error::domain(
            "recovery constants",
            format!("guarantee needs 0 <= delta < sqrt(2) - 1, got {delta}"),
        ));
    }
    let c1 = 4.0 * (1.0 + delta).sqrt() / (1.0 - delta * (1.0 + SQRT_2));
    let c2 = 2.0 * (delta * (1.0 - SQRT_2) - 1.0) / (delta * (1.0 + SQRT_2) - 1.0);
    Ok((c1, c2))
}

/// Labeled curve of `(a, value)` points with strictly increasing `a`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BoundCurve {
    pub label: String,
    points: Vec<(f64, f64)>,
}

impl BoundCurve {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            points: Vec::new(),
        }
    }

    pub fn from_points(label: impl Into<String>, points: Vec<(f64, f64)>) -> Result<Self> {
        let mut c = Self::new(label);
        for (a, v) in points {
            c.push(a, v)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, a: f64, value: f64) -> Result<()> {
        if let Some(&(last, _)) = self.points.last() {
            if !(a > last) {
                return Err(Error::InvalidInput(format!(
                    "curve '{}' needs strictly increasing a, got {a} after {last}",
                    self.label
                )));
            }
        }
        self.points.push((a, value));
        Ok(())
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

/// Both sides of the two trace-exponential inequalities
/// `Tr(C e^{hX}) <= Tr C + (e^h - 1) Tr(CX)` and
/// `Tr(C e^{-hX}) <= Tr C + (e^{-h} - 1) Tr(CX)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TraceExpCheck {
    pub plus_lhs: f64,
    pub plus_rhs: f64,
    pub minus_lhs: f64,
    pub minus_rhs: f64,
    pub trace_c: f64,
    pub h: f64,
}

impl TraceExpCheck {
    /// Both inequalities hold up to `rel_tol * Tr(C) * e^h`.
    pub fn holds(&self, rel_tol: f64) -> bool {
        let slack = rel_tol * self.trace_c * self.h.exp();
        self.plus_lhs <= self.plus_rhs + slack && self.minus_lhs <= self.minus_rhs + slack
    }
}

/// Evaluates the trace-exponential inequalities for PSD `x` with
/// `lambda_max(x) <= 1`, PSD `c` and `0 < h <= 3`.
pub fn trace_exp_check(x: &DMatrix<f64>, c: &DMatrix<f64>, h: f64) -> Result<TraceExpCheck> {
    if !x.is_square() || x.shape() != c.shape() || x.nrows() == 0 {
        return Err(Error::InvalidInput("x and c must be square of equal nonzero order".into()));
    }
    if !(h > 0.0 && h <= 3.0) {
        return Err(Error::domain("trace exponential", format!("need h in (0, 3], got {h}")));
    }
    let (xlo, xhi) = sym_extreme_eigenvalues(x);
    let (clo, _) = sym_extreme_eigenvalues(c);
    let tol = 1e-12 * (1.0 + x.trace().abs() + c.trace().abs());
    if xlo < -tol || xhi > 1.0 + tol {
        return Err(Error::domain(
            "trace exponential",
            format!("x must be PSD with lambda_max <= 1, eigenvalues in [{xlo}, {xhi}]"),
        ));
    }
    if clo < -tol {
        return Err(Error::domain("trace exponential", format!("c must be PSD, lambda_min = {clo}")));
    }
    let tr_c = c.trace();
    let tr_cx = trace_product(c, x);
    Ok(TraceExpCheck {
        plus_lhs: trace_product(c, &sym_expm(x, h)),
        plus_rhs: tr_c + h.exp_m1() * tr_cx,
        minus_lhs: trace_product(c, &sym_expm(x, -h)),
        minus_rhs: tr_c + (-h).exp_m1() * tr_cx,
        trace_c: tr_c,
        h,
    })
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: u64,
}

const MOMENT_CHUNK: u64 = 4096;

fn quad_form(m: &DMatrix<f64>, v: &[f64]) -> f64 {
    let k = v.len();
    let mut s = 0.0;
    for j in 0..k {
        let mut row = 0.0;
        for i in 0..k {
            row += m[(i, j)] * v[i];
        }
        s += row * v[j];
    }
    s
}

/// Monte-Carlo estimate of `E Tr(C X) Tr(D Y)` where `X = x x^T`, `Y = y y^T`
/// are row outer products of two `k`-column submatrices sharing `overlap`
/// columns, with entries of variance `1/k` (`+-1/sqrt(k)` for Bernoulli).
///
/// Sample `s` draws `2k - overlap` entries from stream `s` of `seed`; `x` is
/// the first `k` of them and `y` the `k` starting at `k - overlap`. The
/// reduction is chunked in a fixed order, so the result does not depend on
/// the thread count.
pub fn mc_trace_moment(
    family: Family,
    k: usize,
    overlap: usize,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
    samples: u64,
    seed: u64,
) -> Result<MeanEstimate> {
    if k == 0 || overlap > k {
        return Err(Error::InvalidInput(format!(
            "need k >= 1 and overlap <= k, got k={k}, overlap={overlap}"
        )));
    }
    if c.shape() != (k, k) || d.shape() != (k, k) {
        return Err(Error::InvalidInput(format!("c and d must be {k} x {k}")));
    }
    if samples < 2 {
        return Err(Error::InvalidInput("need at least 2 samples".into()));
    }
    let scale = 1.0 / (k as f64).sqrt();
    let width = 2 * k - overlap;
    let chunks = samples.div_ceil(MOMENT_CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|ch| {
            let mut buf = vec![0.0; width];
            let (mut s1, mut s2) = (0.0, 0.0);
            for s in ch * MOMENT_CHUNK..((ch + 1) * MOMENT_CHUNK).min(samples) {
                let mut rng: ChaCha8Rng = stream_rng(seed, s);
                fill_entries(&mut rng, family, scale, &mut buf);
                let v = quad_form(c, &buf[..k]) * quad_form(d, &buf[k - overlap..]);
                s1 += v;
                s2 += v * v;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = partial
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let nf = samples as f64;
    let mean = s1 / nf;
    let var = ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0);
    Ok(MeanEstimate {
        mean,
        std_err: (var / nf).sqrt(),
        samples,
    })
}
