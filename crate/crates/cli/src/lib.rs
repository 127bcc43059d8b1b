//! Figure, table and check runners behind the `ustat-cs` binary.
//!
//! Every runner turns a resolved [`RunConfig`] into a [`Table`], which is
//! rendered as CSV with a header row and `{:.16e}` floats (17 significant
//! digits, round-trip exact). Undefined values are written as `nan`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ustat_cs::bounds::{
    coherence_eps_bound, coherence_gaussian_p, is_vacuous, joint_bound_with, joint_halved_exponent,
    marginal_bound_with, marginal_exponent, DomainMode, Side, TauPreset,
};
use ustat_cs::check::{run_all, CheckConfig, GroupResult};
use ustat_cs::ensembles::{EnsembleSpec, Family};
use ustat_cs::kernels::KernelId;
use ustat_cs::poisson::{
    eps_full, eps_mid, eps_single, exp_saturating, lambda_n, log_binomial, one_minus_exp_neg,
};
use ustat_cs::ustat::{run_extreme_experiment, DEFAULT_ENUMERATION_CAP};

/// Environment variable consulted for the seed when neither a flag nor the
/// config file sets one.
pub const SEED_ENV: &str = "USTAT_CS_SEED";
pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_STEPS: usize = 60;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Infeasible(_) => 2,
        }
    }
}

impl From<ustat_cs::Error> for CliError {
    fn from(e: ustat_cs::Error) -> Self {
        match e {
            ustat_cs::Error::EnumerationInfeasible { .. } => CliError::Infeasible(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    FigExtreme,
    FigRates,
    FigCoherence,
    BoundsTable,
    Check,
}

/// Which panels `fig-rates` emits: the `a` grid at fixed `k`, the `k` range
/// at fixed `a`, or both (in that order).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Panel {
    A,
    B,
    Both,
}

impl FromStr for Panel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "a" => Ok(Panel::A),
            "b" => Ok(Panel::B),
            "both" => Ok(Panel::Both),
            other => Err(format!("unknown panel '{other}' (expected a, b or both)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    Bernoulli,
    Gaussian,
    Custom,
}

impl FromStr for PresetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bernoulli" => Ok(PresetKind::Bernoulli),
            "gaussian" => Ok(PresetKind::Gaussian),
            "custom" => Ok(PresetKind::Custom),
            other => Err(format!("unknown preset '{other}'")),
        }
    }
}

/// Unresolved settings: every field is optional so flags and config-file
/// entries can be layered.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub ensemble: Option<Family>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub a_min: Option<f64>,
    pub a_max: Option<f64>,
    pub a_steps: Option<usize>,
    pub overlap: Option<usize>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub permissive: Option<bool>,
    pub kernel: Option<KernelId>,
    pub side: Option<Side>,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub a_fixed: Option<f64>,
    pub panel: Option<Panel>,
    pub preset: Option<PresetKind>,
    pub tau_q: Option<f64>,
    pub tau_p: Option<f64>,
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| CliError::Config(format!("bad value '{v}' for '{key}': {e}")))
}

fn parse_bool(key: &str, v: &str) -> CliResult<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Config(format!("bad boolean '{v}' for '{key}'"))),
    }
}

impl Overrides {
    /// Parses a flat `key = value` file. Keys use the long flag names with
    /// either `-` or `_`; blank lines and `#` comments are ignored.
    pub fn from_config_text(text: &str) -> CliResult<Self> {
        let mut o = Overrides::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim().replace('_', "-");
            let v = value.trim();
            let k = key.as_str();
            match k {
                "ensemble" => o.ensemble = Some(parse_value(k, v)?),
                "m" => o.m = Some(parse_value(k, v)?),
                "n" => o.n = Some(parse_value(k, v)?),
                "k" => o.k = Some(parse_value(k, v)?),
                "trials" => o.trials = Some(parse_value(k, v)?),
                "seed" => o.seed = Some(parse_value(k, v)?),
                "a-min" => o.a_min = Some(parse_value(k, v)?),
                "a-max" => o.a_max = Some(parse_value(k, v)?),
                "a-steps" => o.a_steps = Some(parse_value(k, v)?),
                "overlap" => o.overlap = Some(parse_value(k, v)?),
                "threads" => o.threads = Some(parse_value(k, v)?),
                "out" => o.out = Some(PathBuf::from(v)),
                "permissive" => o.permissive = Some(parse_bool(k, v)?),
                "kernel" => o.kernel = Some(parse_value(k, v)?),
                "side" => o.side = Some(parse_value(k, v)?),
                "k-min" => o.k_min = Some(parse_value(k, v)?),
                "k-max" => o.k_max = Some(parse_value(k, v)?),
                "a-fixed" => o.a_fixed = Some(parse_value(k, v)?),
                "panel" => o.panel = Some(parse_value(k, v)?),
                "preset" => o.preset = Some(parse_value(k, v)?),
                "tau-q" => o.tau_q = Some(parse_value(k, v)?),
                "tau-p" => o.tau_p = Some(parse_value(k, v)?),
                other => {
                    return Err(CliError::Config(format!(
                        "line {}: unknown key '{other}'",
                        lineno + 1
                    )))
                }
            }
        }
        Ok(o)
    }

    pub fn from_config_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_config_text(&text)
    }

    /// Fields set in `self` win over those in `lower`.
    pub fn layered_over(self, lower: Overrides) -> Overrides {
        macro_rules! pick {
            ($($f:ident),*) => { Overrides { $($f: self.$f.or(lower.$f)),* } };
        }
        pick!(
            ensemble, m, n, k, trials, seed, a_min, a_max, a_steps, overlap, threads, out,
            permissive, kernel, side, k_min, k_max, a_fixed, panel, preset, tau_q, tau_p
        )
    }
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub family: Family,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub trials: u64,
    pub seed: u64,
    pub a_min: f64,
    pub a_max: f64,
    pub a_steps: usize,
    pub overlap: Option<usize>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub permissive: bool,
    pub kernel: KernelId,
    pub side: Side,
    pub k_min: usize,
    pub k_max: usize,
    pub a_fixed: f64,
    pub panel: Panel,
    pub preset: PresetKind,
    pub tau_q: Option<f64>,
    pub tau_p: Option<f64>,
}

fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => Ok(Some(parse_value(SEED_ENV, v.trim())?)),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::Config(format!("{SEED_ENV}: {e}"))),
    }
}

impl RunConfig {
    /// Fills unset fields with the subcommand defaults, reading the seed
    /// from [`SEED_ENV`] if it is still unset, and validates the result.
    pub fn resolve(subcommand: Subcommand, o: Overrides) -> CliResult<Self> {
        use Subcommand::*;
        let family_default = match subcommand {
            FigExtreme => Family::Gaussian,
            _ => Family::Bernoulli,
        };
        let family = o.ensemble.unwrap_or(family_default);
        let kernel = o.kernel.unwrap_or(KernelId::SigmaMaxSq);
        let side = o.side.unwrap_or(Side::Max);
        let (m, n, k, trials) = match subcommand {
            FigExtreme => (5, 10, 2, 20_000),
            FigCoherence => (50, 100, 2, 5_000),
            FigRates => (100, 100, 20, 1),
            BoundsTable => (200, 1000, 10, 1),
            Check => (1, 1, 1, CheckConfig::default().trials),
        };
        let k = o.k.unwrap_or(k);
        let (a_min, a_max) = match (subcommand, kernel, side) {
            (FigExtreme, KernelId::NegSigmaMinSq, _) => (0.0, 1.0),
            (FigExtreme, _, _) => (0.5, 6.0),
            (FigCoherence, _, _) => (0.2, 1.0),
            (FigRates, _, Side::Max) => (3.1, 10.0),
            (FigRates, _, Side::Min) => (0.1, 0.9),
            (BoundsTable, _, Side::Max) => (0.35 * k as f64, 0.95 * k as f64),
            (BoundsTable, _, Side::Min) => (0.05, 0.95),
            (Check, _, _) => (0.0, 1.0),
        };
        let a_fixed_default = match side {
            Side::Max => 3.5,
            Side::Min => 0.5,
        };
        let seed = match o.seed {
            Some(s) => s,
            None => env_seed()?.unwrap_or(DEFAULT_SEED),
        };
        let preset = o.preset.unwrap_or(match family {
            Family::Bernoulli => PresetKind::Bernoulli,
            Family::Gaussian => PresetKind::Gaussian,
        });
        let cfg = RunConfig {
            subcommand,
            family,
            m: o.m.unwrap_or(m),
            n: o.n.unwrap_or(n),
            k,
            trials: o.trials.unwrap_or(trials),
            seed,
            a_min: o.a_min.unwrap_or(a_min),
            a_max: o.a_max.unwrap_or(a_max),
            a_steps: o.a_steps.unwrap_or(DEFAULT_STEPS),
            overlap: o.overlap,
            threads: o.threads,
            out: o.out,
            permissive: o.permissive.unwrap_or(false),
            kernel,
            side,
            k_min: o.k_min.unwrap_or(4),
            k_max: o.k_max.unwrap_or(20),
            a_fixed: o.a_fixed.unwrap_or(a_fixed_default),
            panel: o.panel.unwrap_or(Panel::Both),
            preset,
            tau_q: o.tau_q,
            tau_p: o.tau_p,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.m == 0 || self.n == 0 || self.k == 0 {
            return bad(format!("m, n, k must be positive (m={}, n={}, k={})", self.m, self.n, self.k));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.a_min.is_finite() && self.a_max.is_finite() && self.a_min < self.a_max) {
            return bad(format!("need a-min < a-max, got [{}, {}]", self.a_min, self.a_max));
        }
        if self.a_steps < 2 {
            return bad(format!("a-steps must be at least 2, got {}", self.a_steps));
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        match self.subcommand {
            Subcommand::FigExtreme => {
                if !matches!(self.kernel, KernelId::SigmaMaxSq | KernelId::NegSigmaMinSq) {
                    return bad("fig-extreme supports kernels sigma-max-sq and neg-sigma-min-sq".into());
                }
                if self.k > self.n {
                    return bad(format!("k = {} exceeds n = {}", self.k, self.n));
                }
                if let Some(i) = self.overlap {
                    if i == 0 || i >= self.k {
                        return bad(format!("overlap must lie in [1, k-1], got {i}"));
                    }
                }
            }
            Subcommand::FigCoherence => {
                if self.k != 2 {
                    return bad(format!("fig-coherence requires k = 2, got k = {}", self.k));
                }
                if self.n < 2 {
                    return bad("fig-coherence requires n >= 2".into());
                }
            }
            Subcommand::FigRates => {
                if self.k_min == 0 || self.k_min > self.k_max {
                    return bad(format!("need 1 <= k-min <= k-max, got {}..{}", self.k_min, self.k_max));
                }
                self.preset_for(self.k)?;
            }
            Subcommand::BoundsTable => {
                if self.k > self.n {
                    return bad(format!("k = {} exceeds n = {}", self.k, self.n));
                }
                self.preset_for(self.k)?;
            }
            Subcommand::Check => {}
        }
        Ok(())
    }

    /// Uniform threshold grid over `[a_min, a_max]`.
    pub fn grid(&self) -> Vec<f64> {
        let step = (self.a_max - self.a_min) / (self.a_steps - 1) as f64;
        (0..self.a_steps)
            .map(|i| {
                if i + 1 == self.a_steps {
                    self.a_max
                } else {
                    self.a_min + step * i as f64
                }
            })
            .collect()
    }

    fn mode(&self) -> DomainMode {
        if self.permissive {
            DomainMode::Permissive
        } else {
            DomainMode::Strict
        }
    }

    /// Trace-moment preset for subset size `k`. A custom preset takes
    /// `tau_q` and `tau_p` (used for both sides) from the config.
    pub fn preset_for(&self, k: usize) -> CliResult<TauPreset> {
        let k32 = u32::try_from(k).map_err(|_| CliError::Config(format!("k = {k} too large")))?;
        Ok(match self.preset {
            PresetKind::Bernoulli => TauPreset::bernoulli(k32)?,
            PresetKind::Gaussian => TauPreset::gaussian(k32)?,
            PresetKind::Custom => {
                let (Some(q), Some(p)) = (self.tau_q, self.tau_p) else {
                    return Err(CliError::Config("custom preset needs tau-q and tau-p".into()));
                };
                TauPreset::custom(k32, q, p, p)?
            }
        })
    }

    fn spec(&self) -> CliResult<EnsembleSpec> {
        Ok(EnsembleSpec::new(self.family, self.m, self.n, self.seed)?)
    }

    fn m_u32(&self) -> CliResult<u32> {
        u32::try_from(self.m).map_err(|_| CliError::Config(format!("m = {} too large", self.m)))
    }
}

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Num(f64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn num(r: Result<f64, impl Sized>) -> Cell {
        Cell::Num(r.unwrap_or(f64::NAN))
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(v) => Some(v as f64),
            Cell::Num(v) => Some(v),
            _ => None,
        }
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Num(v) if v.is_nan() => f.write_str("nan"),
            Cell::Num(v) if v.is_infinite() => f.write_str(if *v > 0.0 { "inf" } else { "-inf" }),
            Cell::Num(v) => write!(f, "{v:.16e}"),
            Cell::Text(s) => f.write_str(s),
            Cell::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// Header plus rows, the unit every runner produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let mut first = true;
            for c in row {
                if !first {
                    s.push(',');
                }
                first = false;
                write!(s, "{c}").expect("writing to a String");
            }
            s.push('\n');
        }
        s
    }

    /// Numeric values of a named column.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        self.rows.iter().map(|r| r[j].as_f64()).collect()
    }
}

/// Runs `f` on a pool with `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Worst-case tail of `sigma_max^2` (or `sigma_min^2`) against the Poisson
/// approximation built from Monte-Carlo marginal and joint estimates taken
/// on the same trials.
///
/// With `overlap` set only that joint probability is estimated; the other
/// `q_hat` columns and the bounds needing them are `nan`.
pub fn run_fig_extreme(cfg: &RunConfig) -> CliResult<Table> {
    let spec = cfg.spec()?;
    let grid = cfg.grid();
    let k = cfg.k;
    let need_joint = k >= 2 && 2 * k - 1 <= cfg.n;
    let exp = with_threads(cfg.threads, || {
        run_extreme_experiment(&spec, cfg.kernel, k, &grid, cfg.trials, DEFAULT_ENUMERATION_CAP, need_joint)
    })??;
    let mut cols: Vec<String> = ["a", "empirical_extreme", "empirical_se", "p_hat"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend((1..k).map(|i| format!("q_hat_{i}")));
    cols.extend(
        ["lambda", "one_minus_exp_neg_lambda", "eps_full", "eps_mid", "eps_single"]
            .iter()
            .map(|s| s.to_string()),
    );
    let mut t = Table::new(cols);
    let (n64, k64) = (cfg.n as u64, k as u64);
    for (j, &a) in grid.iter().enumerate() {
        let p = exp.marginal[j].point;
        let q: Vec<f64> = (1..k)
            .map(|i| match (need_joint, cfg.overlap) {
                (false, _) => f64::NAN,
                (true, Some(o)) if o != i => f64::NAN,
                (true, _) => exp.joint[i - 1][j].point,
            })
            .collect();
        let all_q = q.iter().all(|v| !v.is_nan());
        let lambda = lambda_n(n64, k64, p)?;
        let mut row = vec![
            Cell::Num(a),
            Cell::Num(exp.extreme[j].point),
            Cell::Num(exp.extreme[j].std_err),
            Cell::Num(p),
        ];
        row.extend(q.iter().map(|&v| Cell::Num(v)));
        row.push(Cell::Num(lambda));
        row.push(Cell::Num(one_minus_exp_neg(lambda)));
        let defined = |ok: bool, f: &dyn Fn() -> ustat_cs::Result<f64>| {
            if ok {
                Cell::num(f())
            } else {
                Cell::Num(f64::NAN)
            }
        };
        row.push(defined(all_q || k == 1, &|| eps_full(n64, k64, p, &q)));
        row.push(defined(all_q || k == 1, &|| eps_mid(n64, k64, p, &q)));
        let top = q.last().copied().unwrap_or(f64::NAN);
        row.push(defined(k >= 2 && !top.is_nan(), &|| eps_single(n64, k64, p, top)));
        t.rows.push(row);
    }
    Ok(t)
}

/// Marginal exponent `D(a/k || tau_p)` and halved joint exponent
/// `D(a/k || c1) + c3` per unit of `m`. Panel a sweeps the `a` grid at
/// `k`; panel b sweeps `k_min..=k_max` at `a_fixed`. Values outside the
/// strict validity domain are `nan` unless `permissive` is set.
pub fn run_fig_rates(cfg: &RunConfig) -> CliResult<Table> {
    let cols = ["k", "a", "side", "marginal_exponent", "joint_halved_exponent"];
    let mut t = Table::new(cols.iter().map(|s| s.to_string()).collect());
    let mut points: Vec<(usize, f64)> = Vec::new();
    if cfg.panel != Panel::B {
        points.extend(cfg.grid().into_iter().map(|a| (cfg.k, a)));
    }
    if cfg.panel != Panel::A {
        points.extend((cfg.k_min..=cfg.k_max).map(|k| (k, cfg.a_fixed)));
    }
    for (k, a) in points {
        let preset = cfg.preset_for(k)?;
        let side = cfg.side;
        t.rows.push(vec![
            Cell::Int(k as u64),
            Cell::Num(a),
            Cell::Text(side.to_string()),
            Cell::num(marginal_exponent(side, a, preset.k, preset.tau_p(side), cfg.mode())),
            Cell::num(joint_halved_exponent(side, a, &preset, cfg.mode())),
        ]);
    }
    Ok(t)
}

/// Worst-case coherence tail against `1 - exp(-lambda)` with
/// `lambda = C(n, 2) p(a)` from the Gaussian-tail proxy, plus the two
/// summands of the coherence error bound.
pub fn run_fig_coherence(cfg: &RunConfig) -> CliResult<Table> {
    let spec = cfg.spec()?;
    let grid = cfg.grid();
    let exp = with_threads(cfg.threads, || {
        run_extreme_experiment(&spec, KernelId::Coherence, 2, &grid, cfg.trials, DEFAULT_ENUMERATION_CAP, false)
    })??;
    let cols = [
        "a",
        "empirical_coherence_tail",
        "empirical_se",
        "p_gaussian_proxy",
        "lambda",
        "one_minus_exp_neg_lambda",
        "eps_term1",
        "eps_term2",
    ];
    let mut t = Table::new(cols.iter().map(|s| s.to_string()).collect());
    let m = cfg.m_u32()?;
    let ln_pairs = log_binomial(cfg.n as u64, 2)?;
    for (j, &a) in grid.iter().enumerate() {
        let p = coherence_gaussian_p(a, m);
        let lambda = p.as_ref().map(|&p| exp_saturating(ln_pairs + p.ln())).unwrap_or(f64::NAN);
        let eps = if lambda.is_nan() {
            None
        } else {
            Some(coherence_eps_bound(cfg.n as u64, m, a, lambda)?)
        };
        t.rows.push(vec![
            Cell::Num(a),
            Cell::Num(exp.extreme[j].point),
            Cell::Num(exp.extreme[j].std_err),
            Cell::num(p),
            Cell::Num(lambda),
            Cell::Num(one_minus_exp_neg(lambda)),
            Cell::Num(eps.map_or(f64::NAN, |e| e.term1)),
            Cell::Num(eps.map_or(f64::NAN, |e| e.term2)),
        ]);
    }
    Ok(t)
}

/// Marginal, joint and union bounds over the `a` grid. `union_bound` is
/// `C(n, k)` times the marginal bound; `vacuous` is true unless the union
/// bound is at most 1.
pub fn run_bounds_table(cfg: &RunConfig) -> CliResult<Table> {
    let cols = ["a", "side", "marginal_bound", "joint_bound", "union_bound", "vacuous"];
    let mut t = Table::new(cols.iter().map(|s| s.to_string()).collect());
    let preset = cfg.preset_for(cfg.k)?;
    let m = cfg.m_u32()?;
    let ln_subsets = log_binomial(cfg.n as u64, cfg.k as u64)?;
    let side = cfg.side;
    for a in cfg.grid() {
        let marginal = marginal_bound_with(side, a, preset.k, m, preset.tau_p(side), cfg.mode());
        let joint = joint_bound_with(side, a, m, &preset, cfg.mode());
        let union = marginal
            .as_ref()
            .map(|&v| if v > 0.0 { exp_saturating(ln_subsets + v.ln()) } else { 0.0 })
            .unwrap_or(f64::NAN);
        t.rows.push(vec![
            Cell::Num(a),
            Cell::Text(side.to_string()),
            Cell::num(marginal),
            Cell::num(joint),
            Cell::Num(union),
            Cell::Bool(union.is_nan() || is_vacuous(union)),
        ]);
    }
    Ok(t)
}

/// Runs every invariant group; MC groups use `trials` and `seed`.
pub fn run_check(cfg: &RunConfig) -> CliResult<Vec<GroupResult>> {
    let c = CheckConfig {
        trials: cfg.trials,
        seed: cfg.seed,
    };
    with_threads(cfg.threads, || run_all(&c))
}

/// JSON-lines rendering of a check report.
pub fn check_report_lines(results: &[GroupResult]) -> String {
    let mut s = String::new();
    for r in results {
        s.push_str(&serde_json::to_string(r).expect("group results serialize"));
        s.push('\n');
    }
    s
}
