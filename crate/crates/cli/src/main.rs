use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};
use ustat_cs::bounds::Side;
use ustat_cs::check::all_passed;
use ustat_cs::ensembles::Family;
use ustat_cs::kernels::KernelId;
use ustat_cs_cli::{
    check_report_lines, run_bounds_table, run_check, run_fig_coherence, run_fig_extreme,
    run_fig_rates, CliResult, Overrides, Panel, PresetKind, RunConfig, Subcommand,
};

/// Poisson-approximation experiments for restricted isometry and coherence
/// of random sensing matrices.
///
/// Settings are taken from flags, then from the `--config` file, then from
/// built-in defaults. When no seed is given the `USTAT_CS_SEED` environment
/// variable is used.
#[derive(Parser, Debug)]
#[command(name = "ustat-cs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Subcommand, Debug)]
enum Command {
    /// Worst-case tail of an extreme squared singular value against the Poisson approximation.
    FigExtreme {
        #[command(flatten)]
        common: Common,
        /// sigma-max-sq or neg-sigma-min-sq.
        #[arg(long)]
        kernel: Option<KernelId>,
    },
    /// Marginal and halved joint exponents over a grid of a and a range of k.
    FigRates {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        preset: PresetArgs,
        #[arg(long)]
        k_min: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
        /// Threshold used for the sweep over k.
        #[arg(long)]
        a_fixed: Option<f64>,
        /// a, b or both.
        #[arg(long)]
        panel: Option<Panel>,
    },
    /// Worst-case coherence tail against the Poisson approximation.
    FigCoherence {
        #[command(flatten)]
        common: Common,
    },
    /// Marginal, joint and union bounds over a grid of a.
    BoundsTable {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        preset: PresetArgs,
    },
    /// Runs the invariant suites and prints one JSON line per group.
    Check {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Flat key = value file with the same keys as the long flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// gaussian or bernoulli.
    #[arg(long)]
    ensemble: Option<Family>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    a_min: Option<f64>,
    #[arg(long)]
    a_max: Option<f64>,
    #[arg(long)]
    a_steps: Option<usize>,
    /// Estimate only this joint overlap (fig-extreme).
    #[arg(long)]
    overlap: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluate bounds outside their validity domains.
    #[arg(long)]
    permissive: bool,
}

#[derive(Args, Debug, Default)]
struct PresetArgs {
    /// max or min.
    #[arg(long)]
    side: Option<Side>,
    /// bernoulli, gaussian or custom (defaults to the ensemble).
    #[arg(long)]
    preset: Option<PresetKind>,
    #[arg(long)]
    tau_q: Option<f64>,
    /// Used for both sides of a custom preset.
    #[arg(long)]
    tau_p: Option<f64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            ensemble: self.ensemble,
            m: self.m,
            n: self.n,
            k: self.k,
            trials: self.trials,
            seed: self.seed,
            a_min: self.a_min,
            a_max: self.a_max,
            a_steps: self.a_steps,
            overlap: self.overlap,
            threads: self.threads,
            out: self.out.clone(),
            permissive: self.permissive.then_some(true),
            ..Default::default()
        }
    }
}

fn resolve(sub: Subcommand, common: &Common, flags: Overrides) -> CliResult<RunConfig> {
    let file = match &common.config {
        Some(p) => Overrides::from_config_file(p)?,
        None => Overrides::default(),
    };
    RunConfig::resolve(sub, flags.layered_over(file))
}

fn emit(cfg: &RunConfig, text: &str) -> CliResult<()> {
    match &cfg.out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<bool> {
    let (sub, common, flags) = match cli.command {
        Command::FigExtreme { common, kernel } => {
            let mut f = common.overrides();
            f.kernel = kernel;
            (Subcommand::FigExtreme, common, f)
        }
        Command::FigRates {
            common,
            preset,
            k_min,
            k_max,
            a_fixed,
            panel,
        } => {
            let mut f = common.overrides();
            f.side = preset.side;
            f.preset = preset.preset;
            f.tau_q = preset.tau_q;
            f.tau_p = preset.tau_p;
            f.k_min = k_min;
            f.k_max = k_max;
            f.a_fixed = a_fixed;
            f.panel = panel;
            (Subcommand::FigRates, common, f)
        }
        Command::FigCoherence { common } => {
            let f = common.overrides();
            (Subcommand::FigCoherence, common, f)
        }
        Command::BoundsTable { common, preset } => {
            let mut f = common.overrides();
            f.side = preset.side;
            f.preset = preset.preset;
            f.tau_q = preset.tau_q;
            f.tau_p = preset.tau_p;
            (Subcommand::BoundsTable, common, f)
        }
        Command::Check { common } => {
            let f = common.overrides();
            (Subcommand::Check, common, f)
        }
    };
    let cfg = resolve(sub, &common, flags)?;
    let table = match sub {
        Subcommand::FigExtreme => run_fig_extreme(&cfg)?,
        Subcommand::FigRates => run_fig_rates(&cfg)?,
        Subcommand::FigCoherence => run_fig_coherence(&cfg)?,
        Subcommand::BoundsTable => run_bounds_table(&cfg)?,
        Subcommand::Check => {
            let results = run_check(&cfg)?;
            emit(&cfg, &check_report_lines(&results))?;
            return Ok(all_passed(&results));
        }
    };
    emit(&cfg, &table.to_csv())?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
