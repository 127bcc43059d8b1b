//! Invariant suites run by the `check` command.
//!
//! Each group reports pass, fail or skip. Monte-Carlo groups are skipped when
//! the configured trial count is below [`MIN_MC_TRIALS`], since their
//! confidence intervals would be too wide to separate a bug from noise.
//! Deterministic groups always run.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::bounds::{
    coherence_tail_bound, divergence, joint_bound_with, joint_halved_exponent, marginal_bound,
    marginal_exponent, mc_trace_moment, tau_q_estimate, trace_exp_check, DomainMode, Side,
    TauPreset,
};
use crate::ensembles::{row_outer_products, sample_columns, sample_matrix, stream_rng, EnsembleSpec, Family};
use crate::kernels::{coherence_kernel, squared_singular_extremes, KernelId};
use crate::linalg::{select_columns, sym_extreme_eigenvalues};
use crate::poisson::{eps_full, eps_mid, eps_single, log_binomial};
use crate::ustat::{
    max_over_subsets, mc_joint_tail, mc_marginal_tail, mc_marginal_tail_on, mc_projection_tail,
    subset_count, subsets, u_statistic,
};

/// Monte-Carlo groups need at least this many trials to run.
pub const MIN_MC_TRIALS: u64 = 1000;

/// Stream offsets separating the helper generators from matrix trials.
const PSD_STREAM: u64 = 1 << 40;
const UNIT_STREAM: u64 = 2 << 40;
const LEMMA_STREAM: u64 = 3 << 40;
const CHAIN_STREAM: u64 = 4 << 40;

#[derive(Debug, Clone, Copy)]
pub struct CheckConfig {
    pub trials: u64,
    pub seed: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            trials: 20_000,
            seed: 20_240_601,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GroupResult {
    pub group: String,
    pub status: Status,
    pub detail: String,
}

type Outcome = std::result::Result<String, String>;

fn lib<T>(r: crate::Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Random PSD `k x k` matrix `B B^T` with Gaussian `B`, reproducible from `(seed, index)`.
pub fn random_psd(seed: u64, index: u64, k: usize) -> DMatrix<f64> {
    let spec = EnsembleSpec::new(Family::Gaussian, k, k, seed).expect("k >= 1");
    let b = sample_columns(&spec, PSD_STREAM + index, k);
    &b * b.transpose()
}

/// Uniformly distributed unit vector of length `m`.
pub fn random_unit_vector(seed: u64, index: u64, m: usize) -> DVector<f64> {
    let spec = EnsembleSpec::new(Family::Gaussian, m, 1, seed).expect("m >= 1");
    let v = sample_columns(&spec, UNIT_STREAM + index, 1).column(0).clone_owned();
    let n = v.norm();
    v / n
}

/// Instance `(X, C, h)` for the trace-exponential inequalities: PSD `X`
/// with `lambda_max(X) <= 1`, PSD `C`, `h in (0, 3]`. Every fourth instance
/// uses a rank-one `X` with unit eigenvalue, where the inequalities are tight.
pub fn random_lemma_instance(seed: u64, index: u64, k: usize) -> (DMatrix<f64>, DMatrix<f64>, f64) {
    let mut rng = stream_rng(seed, LEMMA_STREAM + index);
    let h = 3.0 * (1.0 - rng.random::<f64>());
    let c = random_psd(seed, 2 * index, k);
    let x = if index % 4 == 0 {
        let v = random_unit_vector(seed, index, k);
        &v * v.transpose()
    } else {
        let raw = random_psd(seed, 2 * index + 1, k);
        let (_, hi) = sym_extreme_eigenvalues(&raw);
        raw * (rng.random::<f64>() / hi)
    };
    (x, c, h)
}

/// Random valid input `(n, k, p, q_1..q_{k-1})` for the error-bound chain:
/// `2 <= k <= 10`, `k <= n <= 100`, `p` log-uniform on `[1e-12, 1]` and
/// `0 <= q_r <= q_{k-1} <= p`.
pub fn random_chain_input(seed: u64, index: u64) -> (u64, u64, f64, Vec<f64>) {
    let mut rng = stream_rng(seed, CHAIN_STREAM + index);
    let k = rng.random_range(2..=10u64);
    let n = rng.random_range(k..=100u64);
    let p = 10f64.powf(-12.0 * rng.random::<f64>());
    let q_top = p * rng.random::<f64>();
    let mut q: Vec<f64> = (1..k - 1).map(|_| q_top * rng.random::<f64>()).collect();
    q.push(q_top);
    (n, k, p, q)
}

/// Runs every group in a fixed order.
pub fn run_all(cfg: &CheckConfig) -> Vec<GroupResult> {
    let groups: [(&str, bool, fn(&CheckConfig) -> Outcome); 10] = [
        ("ensembles", false, ensembles_exact),
        ("ensembles_mc", true, ensembles_mc),
        ("kernels", false, kernels_exact),
        ("ustat", false, ustat_exact),
        ("ustat_mc", true, ustat_mc),
        ("poisson", false, poisson_exact),
        ("bounds", false, bounds_exact),
        ("bounds_lemma", false, bounds_lemma),
        ("bounds_mc", true, bounds_mc),
        ("coherence_mc", true, coherence_mc),
    ];
    groups
        .iter()
        .map(|&(name, mc, f)| {
            if mc && cfg.trials < MIN_MC_TRIALS {
                return GroupResult {
                    group: name.into(),
                    status: Status::Skip,
                    detail: format!(
                        "{} trials < {MIN_MC_TRIALS}; confidence intervals too wide",
                        cfg.trials
                    ),
                };
            }
            let (status, detail) = match f(cfg) {
                Ok(d) => (Status::Pass, d),
                Err(d) => (Status::Fail, d),
            };
            GroupResult {
                group: name.into(),
                status,
                detail,
            }
        })
        .collect()
}

pub fn all_passed(results: &[GroupResult]) -> bool {
    results.iter().all(|r| r.status != Status::Fail)
}

fn ensembles_exact(cfg: &CheckConfig) -> Outcome {
    let mut checked = 0;
    for (family, m, n) in [(Family::Bernoulli, 4, 6), (Family::Bernoulli, 9, 3), (Family::Gaussian, 7, 5)] {
        let spec = lib(EnsembleSpec::new(family, m, n, cfg.seed))?;
        for t in 0..20 {
            let a = sample_matrix(&spec, t);
            ensure(a == sample_matrix(&spec, t), || format!("trial {t} not reproducible"))?;
            ensure(sample_columns(&spec, t, 2) == a.data.columns(0, 2).clone_owned(), || {
                "column prefix differs from full matrix".into()
            })?;
            if family == Family::Bernoulli {
                for c in a.data.column_iter() {
                    let norm = c.norm();
                    ensure((norm - 1.0).abs() <= 1e-12, || format!("bernoulli column norm {norm}"))?;
                }
            }
            let k = n.min(3);
            let sub = a.data.columns(0, k).clone_owned();
            let scale = (m as f64 / k as f64).sqrt();
            let xs = row_outer_products(&sub, scale);
            let sum = xs.iter().fold(DMatrix::zeros(k, k), |acc, x| acc + x);
            let target = sub.transpose() * &sub * (scale * scale);
            ensure((sum - &target).norm() <= 1e-12 * target.norm().max(1.0), || {
                "row outer products do not sum to the scaled Gram".into()
            })?;
            for x in &xs {
                let (lo, _) = sym_extreme_eigenvalues(x);
                ensure(lo >= -1e-12 * x.trace().max(1.0), || format!("outer product eigenvalue {lo}"))?;
                if family == Family::Bernoulli {
                    let bound = 1.0 / k as f64 + 1e-15;
                    ensure(x.iter().all(|v| v.abs() <= bound), || "entry above 1/k".into())?;
                }
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} samples: reproducible, prefix-stable, normalized, PSD outer products"))
}

fn ensembles_mc(cfg: &CheckConfig) -> Outcome {
    let spec = lib(EnsembleSpec::new(Family::Gaussian, 10, 1, cfg.seed))?;
    let t = cfg.trials;
    let (mut s1, mut s2) = (0.0, 0.0);
    for i in 0..t {
        let v = sample_columns(&spec, i, 1).norm_squared();
        s1 += v;
        s2 += v * v;
    }
    let mean = s1 / t as f64;
    let se = ((s2 / t as f64 - mean * mean) / t as f64).sqrt();
    ensure((mean - 1.0).abs() <= 3.0 * se, || format!("mean |col|^2 = {mean}, se {se}"))?;

    let pairs = 1000u64;
    let bern = lib(EnsembleSpec::new(Family::Bernoulli, 3, 2, cfg.seed))?;
    for (spec, entry) in [(&spec, 0usize), (&bern, 4usize)] {
        let xs: Vec<(f64, f64)> = (0..pairs)
            .map(|j| {
                let a = sample_matrix(spec, 2 * j).data;
                let b = sample_matrix(spec, 2 * j + 1).data;
                (a[entry], b[entry])
            })
            .collect();
        let r = correlation(&xs);
        ensure(r.abs() <= 3.0 / (pairs as f64).sqrt(), || {
            format!("entry {entry} correlated across trials: r = {r}")
        })?;
    }
    Ok(format!("mean |col|^2 = {mean:.5} (se {se:.5}); trial streams uncorrelated"))
}

fn correlation(xs: &[(f64, f64)]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = xs.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x / n, b + y / n));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in xs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

fn kernels_exact(cfg: &CheckConfig) -> Outcome {
    let mut rng = stream_rng(cfg.seed, CHAIN_STREAM - 1);
    let mut count = 0;
    for t in 0..200u64 {
        let m = rng.random_range(1..=6usize);
        let k = rng.random_range(2..=5usize);
        let family = if t % 2 == 0 { Family::Gaussian } else { Family::Bernoulli };
        let a = sample_columns(&lib(EnsembleSpec::new(family, m, k, cfg.seed ^ t))?, t, k);
        let mut perm: Vec<usize> = (0..k).collect();
        for i in (1..k).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let b = select_columns(&a, &perm);
        for kernel in [KernelId::Ric, KernelId::SigmaMaxSq, KernelId::NegSigmaMinSq] {
            let (x, y) = (lib(kernel.evaluate(&a))?, lib(kernel.evaluate(&b))?);
            ensure((x - y).abs() <= 1e-12 * x.abs().max(1.0), || {
                format!("{kernel:?} not permutation invariant: {x} vs {y}")
            })?;
        }
        let (lo, hi) = lib(squared_singular_extremes(&a))?;
        let ric = lib(KernelId::Ric.evaluate(&a))?;
        ensure((ric - (hi - 1.0).max(1.0 - lo)).abs() <= 1e-12, || "ric differs from one-sided max".into())?;
        let unit = DMatrix::from_columns(&a.column_iter().map(|c| c / c.norm()).collect::<Vec<_>>());
        let coh = lib(max_over_subsets(&unit, KernelId::Coherence, 2))?;
        ensure((0.0..=1.0).contains(&coh), || format!("coherence {coh} outside [0, 1]"))?;
        let pair = lib(coherence_kernel(&select_columns(&a, &[1, 0])))?;
        let pair2 = lib(coherence_kernel(&select_columns(&a, &[0, 1])))?;
        ensure(pair == pair2, || "coherence not symmetric".into())?;
        let ru = lib(KernelId::Ric.evaluate(&unit))?;
        ensure(ru <= (k - 1) as f64 * coh + 1e-9, || format!("ric {ru} above gershgorin {}", (k - 1) as f64 * coh))?;
        count += 1;
    }
    Ok(format!("{count} random submatrices: symmetric, consistent, Gershgorin-bounded"))
}

fn ustat_exact(cfg: &CheckConfig) -> Outcome {
    for (n, k) in [(3, 2), (4, 4), (25, 2), (9, 3)] {
        let c = lib(subsets(n, k))?.count() as f64;
        ensure(c == subset_count(n, k), || format!("C({n},{k}) enumeration count {c}"))?;
    }
    let spec = lib(EnsembleSpec::new(Family::Gaussian, 4, 7, cfg.seed))?;
    for t in 0..30 {
        let phi = sample_matrix(&spec, t).data;
        for kernel in [KernelId::Ric, KernelId::SigmaMaxSq, KernelId::NegSigmaMinSq] {
            let k = 2 + (t as usize % 2);
            let mx = lib(max_over_subsets(&phi, kernel, k))?;
            for a in [0.1, 0.5, 1.0, 1.5, 2.5] {
                let thr = kernel.event_threshold(a);
                let u = lib(u_statistic(&phi, kernel, k, a))?;
                ensure((u == 0.0) == (mx <= thr), || {
                    format!("U = {u} but max = {mx} at threshold {thr} ({kernel:?})")
                })?;
            }
        }
    }
    Ok("enumeration counts exact; U = 0 iff max <= a".into())
}

fn ustat_mc(cfg: &CheckConfig) -> Outcome {
    let t = cfg.trials;
    let grid = [0.25, 0.5, 1.0, 1.5, 2.0];
    let chi = lib(EnsembleSpec::new(Family::Gaussian, 2, 1, cfg.seed))?;
    let est = lib(mc_marginal_tail(&chi, KernelId::SigmaMaxSq, 1, &grid, t))?;
    for e in &est {
        let truth = (-e.a).exp();
        let se = (truth * (1.0 - truth) / t as f64).sqrt();
        ensure((e.point - truth).abs() <= 3.0 * se, || {
            format!("chi-square tail at a={}: {} vs {truth}", e.a, e.point)
        })?;
    }
    ensure(est.windows(2).all(|w| w[1].point <= w[0].point), || "marginal curve not monotone".into())?;

    let j = lib(EnsembleSpec::new(Family::Gaussian, 5, 5, cfg.seed))?;
    let jgrid: Vec<f64> = (0..12).map(|i| 1.0 + 0.25 * i as f64).collect();
    let q1 = lib(mc_joint_tail(&j, KernelId::SigmaMaxSq, 3, 1, &jgrid, t))?;
    let q2 = lib(mc_joint_tail(&j, KernelId::SigmaMaxSq, 3, 2, &jgrid, t))?;
    for (a, b) in q1.iter().zip(&q2) {
        if a.point >= 0.01 {
            let se = a.std_err.hypot(b.std_err);
            ensure(b.point >= a.point - 3.0 * se, || {
                format!("q2 = {} < q1 = {} at a = {}", b.point, a.point, a.a)
            })?;
        }
    }

    let ex = lib(EnsembleSpec::new(Family::Bernoulli, 6, 8, cfg.seed))?;
    let egrid = [1.2, 1.6, 2.0];
    let p0 = lib(mc_marginal_tail(&ex, KernelId::SigmaMaxSq, 2, &egrid, t))?;
    let p1 = lib(mc_marginal_tail_on(&ex, KernelId::SigmaMaxSq, &[3, 6], &egrid, t))?;
    for (a, b) in p0.iter().zip(&p1) {
        ensure((a.point - b.point).abs() <= 3.0 * a.std_err.hypot(b.std_err), || {
            format!("exchangeability: {} vs {} at a = {}", a.point, b.point, a.a)
        })?;
    }

    let n = 6usize;
    let bin = lib(EnsembleSpec::new(Family::Gaussian, 2, n, cfg.seed))?;
    let reps = t.min(5000);
    let a = 1.0;
    let (mut s1, mut s2) = (0.0, 0.0);
    for i in 0..reps {
        let c = n as f64 * lib(u_statistic(&sample_matrix(&bin, i).data, KernelId::SigmaMaxSq, 1, a))?;
        s1 += c;
        s2 += c * c;
    }
    let mean = s1 / reps as f64;
    let se = ((s2 / reps as f64 - mean * mean) / reps as f64).sqrt();
    let expect = n as f64 * (-a).exp();
    ensure((mean - expect).abs() <= 3.0 * se, || format!("k=1 count mean {mean} vs {expect}"))?;
    Ok(format!("chi-square oracle, joint ordering, exchangeability and binomial law hold over {t} trials"))
}

fn poisson_exact(cfg: &CheckConfig) -> Outcome {
    let draws = 10_000u64;
    for i in 0..draws {
        let (n, k, p, q) = random_chain_input(cfg.seed, i);
        let f = lib(eps_full(n, k, p, &q))?;
        let m = lib(eps_mid(n, k, p, &q))?;
        let s = lib(eps_single(n, k, p, *q.last().expect("k >= 2")))?;
        ensure(f <= m * (1.0 + 1e-12) && m <= s * (1.0 + 1e-12), || {
            format!("chain violated at n={n}, k={k}, p={p}: {f} {m} {s}")
        })?;
    }
    for n in 1..=60u64 {
        for k in 0..=n {
            for i in 0..=(n - k) {
                let l = lib(log_binomial(n - k, i))? + lib(log_binomial(n, k))?;
                let r = lib(log_binomial(k + i, i))? + lib(log_binomial(n, k + i))?;
                ensure((l - r).abs() <= 1e-12 * l.abs().max(1.0), || {
                    format!("binomial identity fails at n={n}, k={k}, i={i}")
                })?;
            }
        }
    }
    for k in 1..=30u64 {
        let s: f64 = (1..k).map(|r| lib(log_binomial(k, r)).map(f64::exp)).sum::<Result<f64, _>>()?;
        ensure((s - (2f64.powi(k as i32) - 2.0)).abs() <= 1e-12 * s.max(1.0), || {
            format!("sum of C({k}, r) = {s}")
        })?;
    }
    Ok(format!("{draws} chain draws without violation; binomial identities hold"))
}

fn bounds_exact(_: &CheckConfig) -> Outcome {
    for k in [2u32, 4, 8] {
        let tau = 0.5 / k as f64;
        let p = lib(TauPreset::custom(k, tau * tau, tau, tau))?;
        for a in [0.6, 0.9, 1.3] {
            if a >= k as f64 {
                continue;
            }
            let j = lib(joint_bound_with(Side::Max, a, 40, &p, DomainMode::Permissive))?;
            let mg = lib(marginal_bound(Side::Max, a, k, 40, tau))?;
            let kf = k as f64;
            ensure((j - kf * kf * (mg / kf).powi(2)).abs() <= 1e-12 * j.max(1e-300), || {
                format!("unit c2 identity fails at k={k}, a={a}")
            })?;
        }
    }
    for (side, a) in [(Side::Max, 1.5), (Side::Max, 3.5), (Side::Min, 0.5)] {
        let mut prev = (f64::INFINITY, f64::INFINITY);
        let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (0.0f64, 0.0f64));
        for k in 4..=20u32 {
            let p = lib(TauPreset::bernoulli(k))?;
            let me = lib(marginal_exponent(side, a, k, p.tau_p(side), DomainMode::Permissive))?;
            let je = lib(joint_halved_exponent(side, a, &p, DomainMode::Permissive))?;
            ensure(me > 0.0 && je > 0.0 && me < prev.0 && je < prev.1, || {
                format!("exponents at {side} a={a}, k={k} not positive and decreasing")
            })?;
            prev = (me, je);
            let kf = k as f64;
            lo = (lo.0.min(kf * me), lo.1.min(kf * je));
            hi = (hi.0.max(kf * me), hi.1.max(kf * je));
        }
        ensure(hi.0 < 2.0 * lo.0 && hi.1 < 2.0 * lo.1, || format!("k * exponent spread too wide at {side} a={a}"))?;
    }
    for m in 1..200u32 {
        let p = lib(TauPreset::bernoulli(10))?;
        let pairs = [
            (lib(marginal_bound(Side::Max, 2.0, 10, m, 0.1))?, lib(marginal_bound(Side::Max, 2.0, 10, m + 1, 0.1))?),
            (
                lib(joint_bound_with(Side::Max, 4.0, m, &p, DomainMode::Strict))?,
                lib(joint_bound_with(Side::Max, 4.0, m + 1, &p, DomainMode::Strict))?,
            ),
            (coherence_tail_bound(0.4, m), coherence_tail_bound(0.4, m + 1)),
        ];
        ensure(pairs.iter().all(|(a, b)| b <= a), || format!("bound increases from m={m} to m+1"))?;
    }
    ensure(divergence(0.3, 0.3).map_err(|e| e.to_string())? == 0.0, || "D(a||a) != 0".into())?;
    Ok("unit-c2 identity, exponent halving diagnostic and monotonicity in m hold".into())
}

fn bounds_lemma(cfg: &CheckConfig) -> Outcome {
    let n = 1000u64;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..n {
        let k = 2 + (i % 5) as usize;
        let (x, c, h) = random_lemma_instance(cfg.seed, i, k);
        let r = lib(trace_exp_check(&x, &c, h))?;
        let scale = r.trace_c * h.exp();
        worst = worst
            .max((r.plus_lhs - r.plus_rhs) / scale)
            .max((r.minus_lhs - r.minus_rhs) / scale);
        ensure(r.holds(1e-9), || format!("instance {i} violates the trace inequalities: {r:?}"))?;
    }
    Ok(format!("{n} instances; largest relative excess {worst:.3e}"))
}

fn bounds_mc(cfg: &CheckConfig) -> Outcome {
    let k = 6usize;
    for family in [Family::Bernoulli, Family::Gaussian] {
        let (second, fourth) = match family {
            Family::Bernoulli => (1.0 / k as f64, 1.0 / (k * k) as f64),
            Family::Gaussian => (1.0 / k as f64, 3.0 / (k * k) as f64),
        };
        let tau_q = lib(tau_q_estimate(second, fourth))?;
        for pair in 0..5u64 {
            let c = random_psd(cfg.seed, 100 + 2 * pair, k);
            let d = random_psd(cfg.seed, 101 + 2 * pair, k);
            let norm = c.trace() * d.trace();
            for overlap in [0, k / 2, k] {
                let e = lib(mc_trace_moment(family, k, overlap, &c, &d, cfg.trials, cfg.seed ^ pair))?;
                ensure(e.mean <= tau_q * norm + 3.0 * e.std_err, || {
                    format!("{family} overlap {overlap}: {} > {}", e.mean / norm, tau_q)
                })?;
            }
        }
    }
    Ok(format!("trace moments below tau_q for both presets over {} samples", cfg.trials))
}

fn coherence_mc(cfg: &CheckConfig) -> Outcome {
    let m = 20usize;
    let grid: Vec<f64> = (1..=20).map(|i| i as f64 / 21.0).collect();
    for family in [Family::Gaussian, Family::Bernoulli] {
        let spec = lib(EnsembleSpec::new(family, m, 1, cfg.seed))?;
        let b = random_unit_vector(cfg.seed, 7, m);
        for e in lib(mc_projection_tail(&spec, &b, &grid, cfg.trials))? {
            let bound = coherence_tail_bound(e.a, m as u32);
            ensure(e.point <= bound + 3.0 * e.std_err, || {
                format!("{family} projection tail {} > {bound} at a = {}", e.point, e.a)
            })?;
        }
    }
    Ok(format!("projection tails below 2 exp(-m a^2 / 2) over {} trials", cfg.trials))
}
