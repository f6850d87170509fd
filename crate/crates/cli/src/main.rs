use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use wzlab::codecs::design::{design, DesignSpec};
use wzlab::lattice::{distortion_upper_bound, LatticeParams};
use wzlab::rd_theory::{rd_conditional, rd_gaussian, reverse_waterfill};
use wzlab::selftest::run_selftest;
use wzlab::sim::{run_experiment, ExperimentConfig, RunOptions};
use wzlab::Error;

const SEED_ENV: &str = "WZLAB_SEED";

/// Dithered modulo lattice Wyner-Ziv workbench.
#[derive(Debug, Parser)]
#[command(name = "wzlab", version, about)]
struct Cli {
    /// Worker threads for simulations; 0 uses every available core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Master seed; overrides both the config and WZLAB_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for every file the command writes.
    #[arg(long, global = true, default_value = "wzlab-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Gaussian, conditional, or reverse-waterfilled rate-distortion values.
    Rd(RdArgs),
    /// Terms of the distortion upper bound for truncated Gaussian shaping.
    Bound(BoundArgs),
    /// Run an experiment config and write its report files.
    Sim(SimArgs),
    /// Fast invariant checks.
    Selftest(SelftestArgs),
    /// Grid-search a codec design and write the resulting codec config.
    Design(DesignArgs),
}

#[derive(Debug, Args)]
struct RdArgs {
    /// Source variance for R(D) = max(0, log2(sigma2 / D) / 2).
    #[arg(long, conflicts_with_all = ["sigma2_x_given_y", "lambdas"])]
    sigma2: Option<f64>,
    /// Conditional variance for the Wyner-Ziv rate.
    #[arg(long, conflicts_with = "lambdas")]
    sigma2_x_given_y: Option<f64>,
    /// Comma-separated component variances for reverse waterfilling.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    /// Target distortion (total distortion for waterfilling).
    #[arg(long)]
    d: f64,
}

#[derive(Debug, Args)]
struct BoundArgs {
    #[arg(long)]
    sigma2_z: f64,
    #[arg(long)]
    sigma2_d: f64,
    /// Modulo interval length A.
    #[arg(long)]
    a: f64,
    /// ASK order M.
    #[arg(long)]
    m: usize,
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// External reliability sequence; must match the pinned checksum.
    #[arg(long)]
    reliability: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    #[arg(long)]
    reliability: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DesignArgs {
    /// Design spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// File name of the codec config written under --out.
    #[arg(long, default_value = "codec.json")]
    name: String,
}

/// Failure classes mapped to exit codes 2 and 1.
enum Failure {
    Usage(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    /// Bad input is a usage error; anything that fails while running is internal.
    fn from_lib(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::InvalidParams(_)
            | Error::InvalidRegime(_)
            | Error::InvalidMatrix(_)
            | Error::SingularCovariance(_)
            | Error::DomainError(_)
            | Error::DimensionMismatch { .. }
            | Error::AllocationOverflow { .. }
            | Error::MissingDataFile(_) => Failure::Usage(e.into()),
            _ => Failure::Internal(e.into()),
        }
    }
}

fn lib<T>(r: wzlab::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::from_lib)
}

fn seed_override(flag: Option<u64>) -> Result<Option<u64>, Failure> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| Failure::Usage(anyhow!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn cmd_rd(args: &RdArgs) -> Result<(), Failure> {
    if let Some(s) = args.sigma2 {
        println!("{}", lib(rd_gaussian(s, args.d))?);
    } else if let Some(s) = args.sigma2_x_given_y {
        println!("{}", lib(rd_conditional(s, args.d))?);
    } else if let Some(l) = &args.lambdas {
        let plan = lib(reverse_waterfill(l, args.d))?;
        println!("lambda,{}", plan.level_lambda);
        println!("component,lambda_i,rate_i,distortion_i,active");
        for (i, c) in plan.per_component.iter().enumerate() {
            println!("{i},{},{},{},{}", c.lambda_i, c.rate_i, c.distortion_i, c.active);
        }
        println!("total_rate,{}", plan.total_rate());
    } else {
        return Err(Failure::Usage(anyhow!("rd needs one of --sigma2, --sigma2-x-given-y, --lambdas")));
    }
    Ok(())
}

fn cmd_bound(args: &BoundArgs) -> Result<(), Failure> {
    let p = lib(LatticeParams::new(args.a, args.m, args.sigma2_d, args.sigma2_z))?;
    let b = lib(distortion_upper_bound(&p))?;
    println!("sigma2_d,t_iz,shaping_excess,d_min,total");
    println!("{},{},{},{},{}", b.sigma2_d, b.t_iz, b.shaping_excess, b.d_min, b.total);
    Ok(())
}

fn cmd_sim(args: &SimArgs, cli: &Cli) -> Result<(), Failure> {
    let mut cfg = lib(ExperimentConfig::load(&args.config))?;
    if let Some(seed) = seed_override(cli.seed)? {
        cfg.set_master_seed(seed);
    }
    let opts = RunOptions { jobs: cli.jobs, reliability: args.reliability.clone() };
    let summary = lib(run_experiment(&cfg, &opts, &cli.out))?;
    println!("{summary}");
    println!("wrote {}", cli.out.display());
    Ok(())
}

fn cmd_selftest(args: &SelftestArgs, cli: &Cli) -> Result<(), Failure> {
    let checks = run_selftest(args.reliability.as_deref(), seed_override(cli.seed)?.unwrap_or(0));
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Failure::Internal(anyhow!("{failed} of {} checks failed", checks.len())));
    }
    println!("all {} checks passed", checks.len());
    Ok(())
}

fn read_spec(path: &Path) -> anyhow::Result<DesignSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_design(args: &DesignArgs, cli: &Cli) -> Result<(), Failure> {
    let mut spec = read_spec(&args.spec).map_err(Failure::Usage)?;
    if let Some(seed) = seed_override(cli.seed)? {
        spec.seed = seed;
    }
    let (cfg, _) = lib(design(&spec, |p| {
        eprintln!("sigma2_d {:.4} eps {:.3} -> {:.5} +- {:.5}", p.sigma2_d, p.eps, p.mean_distortion, p.stderr);
    }))?;
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display())).map_err(Failure::Internal)?;
    let path = cli.out.join(&args.name);
    std::fs::write(&path, cfg.to_json() + "\n").with_context(|| format!("writing {}", path.display())).map_err(Failure::Internal)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Rd(a) => cmd_rd(a),
        Command::Bound(a) => cmd_bound(a),
        Command::Sim(a) => cmd_sim(a, &cli),
        Command::Selftest(a) => cmd_selftest(a, &cli),
        Command::Design(a) => cmd_design(a, &cli),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
