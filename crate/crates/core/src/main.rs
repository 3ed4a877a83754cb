use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use smoothmix::harness::{run_bounds, run_converge, run_lemmas, run_rate, ExperimentConfig, RunOptions, RunReport};
use smoothmix::{Error, Result};

#[derive(Parser)]
#[command(name = "smoothmix", version, about = "Convergence, bound and lemma experiments for smooth normal mixtures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// experiment config (TOML)
    #[arg(long)]
    config: Option<PathBuf>,
    /// output directory; overrides `out` in the config
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// write every built model to <out>/models/
    #[arg(long)]
    dump_model: bool,
    /// overrides `seed` in the config
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// KL series, rate fits and advisory checks along the m-grid
    Converge(Common),
    /// randomized sweeps of the Gaussian Riemann-sum inequalities
    Lemmas {
        #[command(flatten)]
        common: Common,
        /// draws per lemma; overrides `lemmas.size` in the config
        #[arg(long)]
        size: Option<usize>,
    },
    /// explicit bound breakdowns and the KL dominance table
    Bounds(Common),
    /// rate fits of an existing kl_series.csv
    Rate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
}

fn load(c: &Common) -> Result<Option<ExperimentConfig>> {
    let Some(path) = &c.config else { return Ok(None) };
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    Ok(Some(cfg))
}

fn require(cfg: Option<ExperimentConfig>) -> Result<ExperimentConfig> {
    cfg.ok_or_else(|| Error::Config("--config is required for this command".into()))
}

fn options(c: &Common, cfg: Option<&ExperimentConfig>) -> Result<RunOptions> {
    if c.workers == 0 {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    let out = c
        .out
        .clone()
        .or_else(|| cfg.and_then(|g| g.out.clone()))
        .ok_or_else(|| Error::Config("no output directory: pass --out or set `out` in the config".into()))?;
    Ok(RunOptions { out, workers: c.workers, dump_model: c.dump_model })
}

fn summary(r: &RunReport, out: &Path) {
    println!("{}: wrote {}", r.command, out.display());
    for s in &r.series {
        let last = s.series.points.last().expect("non-empty series");
        println!("  {} KL(m = {}) = {:.4e} ± {:.1e}", s.kind, last.m, last.estimate.value, last.estimate.std_error);
    }
    for f in &r.rate_fits {
        if let Some(fit) = &f.fit {
            let theory = f.theoretical_exponent.map_or("n/a".to_string(), |e| format!("-{e:.4}"));
            println!("  {} ({}) slope {:.4} ± {:.4}, theory {theory}", f.kind, f.method, fit.slope, fit.slope_se);
        }
    }
    for d in &r.dominance {
        println!("  {} m = {}: KL {:.4e} vs bound {:.4e} dominated = {}", d.kind, d.m, d.kl, d.bound_total, d.dominated);
    }
    for l in &r.lemmas {
        println!("  {:?}: {} draws, {} violations, min margin {:.3e}", l.lemma, l.draws, l.violations, l.min_margin);
    }
    for w in &r.warnings {
        println!("  warning: {w}");
    }
}

fn run(cli: Cli) -> Result<()> {
    let (report, out) = match &cli.command {
        Command::Converge(c) => {
            let cfg = require(load(c)?)?;
            let o = options(c, Some(&cfg))?;
            (run_converge(&cfg, &o)?, o.out)
        }
        Command::Bounds(c) => {
            let cfg = require(load(c)?)?;
            let o = options(c, Some(&cfg))?;
            (run_bounds(&cfg, &o)?, o.out)
        }
        Command::Lemmas { common, size } => {
            let cfg = load(common)?;
            let o = options(common, cfg.as_ref())?;
            let size = size
                .or_else(|| cfg.as_ref().and_then(|c| c.lemmas.as_ref().map(|l| l.size)))
                .ok_or_else(|| Error::Config("no sweep size: pass --size or set `lemmas.size`".into()))?;
            let seed = common
                .seed
                .or_else(|| cfg.as_ref().map(|c| c.seed))
                .ok_or_else(|| Error::Config("no seed: pass --seed or --config".into()))?;
            (run_lemmas(size, seed, &o)?, o.out)
        }
        Command::Rate { common, input } => {
            let cfg = load(common)?;
            let o = options(common, cfg.as_ref())?;
            (run_rate(input, cfg.as_ref(), &o)?, o.out)
        }
    };
    summary(&report, &out);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SMOOTHMIX_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
