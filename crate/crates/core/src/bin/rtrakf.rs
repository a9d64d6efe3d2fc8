use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rtrakf_core::config::ExperimentConfig;
use rtrakf_core::diagnostics::invariant_suite;
use rtrakf_core::sim::{emit_csv, run_battery, MetricRow};
use rtrakf_core::{Error, Result};

#[derive(Parser)]
#[command(name = "rtrakf", version, about = "Adaptive Kalman filter with SPD noise covariance estimation")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the benchmark experiment and write per-step metrics as CSV.
    Run(RunArgs),
    /// Gramian diagnostics and the invariant suite on the benchmark system.
    Check(CheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// rtr or rls.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    lags: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma-separated seed list; runs concurrently, one CSV per seed.
    #[arg(long)]
    seeds: Option<String>,
    /// Output CSV. With several seeds, `{seed}` in the path is replaced,
    /// otherwise `_seed<S>` is inserted before the extension.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat key = value file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value_t = 1e4)]
    tau: f64,
    #[arg(long, default_value_t = 3)]
    m: usize,
    /// Steps for the Gramian sweep, the annihilation check and the short filter run.
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn build_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    let overrides: [(&str, Option<String>); 9] = [
        ("method", args.method.clone()),
        ("steps", args.steps.map(|v| v.to_string())),
        ("tau", args.tau.map(|v| v.to_string())),
        ("m", args.m.map(|v| v.to_string())),
        ("lags", args.lags.map(|v| v.to_string())),
        ("eps", args.eps.map(|v| v.to_string())),
        ("seed", args.seed.map(|v| v.to_string())),
        ("seeds", args.seeds.clone()),
        ("out", args.out.as_ref().map(|p| p.display().to_string())),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn seed_path(base: &Path, seed: u64, many: bool) -> PathBuf {
    let text = base.display().to_string();
    if text.contains("{seed}") {
        return PathBuf::from(text.replace("{seed}", &seed.to_string()));
    }
    if !many {
        return base.to_path_buf();
    }
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}_seed{seed}.{}", ext.to_string_lossy()),
        None => format!("{stem}_seed{seed}"),
    };
    base.with_file_name(name)
}

fn summary(seed: u64, rows: &[MetricRow]) -> String {
    let last = rows.last().expect("validated steps give at least one row");
    let q_min = rows.iter().map(|r| r.q_eig[0]).fold(f64::INFINITY, f64::min);
    format!(
        "seed={seed} rows={} final_q_err={:.4e} final_r_err={:.4e} final_p_gap={:.4e} min_q_eig={:.4e}",
        rows.len(),
        last.q_err_fro,
        last.r_err_fro,
        last.p_gap_fro,
        q_min
    )
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = build_config(&args)?;
    let many = cfg.seeds.len() > 1;
    let out = match &cfg.out {
        Some(out) => out.clone(),
        None if many => return Err(Error::Config("--out is required with several seeds".into())),
        None => PathBuf::new(),
    };
    if cfg.out.is_some() {
        for seed in &cfg.seeds {
            let path = seed_path(&out, *seed, many);
            let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            if !dir.is_dir() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("output directory {} does not exist", dir.display()),
                )));
            }
        }
    }
    for (seed, result) in cfg.seeds.iter().zip(run_battery(&cfg, &cfg.seeds)) {
        let rows = result?;
        if cfg.out.is_none() {
            print!("{}", rtrakf_core::sim::csv_string(&rows)?);
        } else {
            let path = seed_path(&out, *seed, many);
            emit_csv(&rows, &path)?;
            eprintln!("{} out={}", summary(*seed, &rows), path.display());
        }
    }
    Ok(())
}

fn check(args: CheckArgs) -> Result<bool> {
    let mut cfg = ExperimentConfig::default();
    cfg.tau = args.tau;
    cfg.m = args.m;
    cfg.lags = cfg.lags.min(args.m);
    cfg.steps = args.steps;
    cfg.validate()?;
    let mut ok = true;
    for c in invariant_suite(&cfg, args.seed)? {
        let status = if c.passed { "ok" } else { "FAIL" };
        println!(
            "check {} {status} worst={:.3e} tol={:.3e} {}",
            c.name, c.worst, c.tolerance, c.detail
        );
        if !c.passed {
            eprintln!("error kind=invariant check={} msg={:?}", c.name, c.detail);
            ok = false;
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Command::Run(args) => run(args).map(|_| true),
        Command::Check(args) => check(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error kind={} msg={:?}", e.kind(), e.to_string());
            ExitCode::from(2)
        }
    }
}
