mod config;
mod manifest;

use clap::{Parser, Subcommand};
use config::{Mode, RunConfig};
use manifest::RunManifest;
use sisde::harness::{
    run_invariant_drift, run_ms_convergence, run_weak_convergence, write_drift_csv, ConvergenceReport,
    ErrorFamily, HarnessError,
};
use sisde::methods::{detect_deterministic_order, Method};
use sisde::problems::Observable;
use sisde::trees::{enumerate_trees, DEFAULT_ORDER_CAP};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Thread count for the sample-parallel harness.
const THREADS_VAR: &str = "SISDE_THREADS";

#[derive(Parser)]
#[command(name = "sisde", version, about = "B-series integrators for single-integrand Stratonovich SDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rooted trees with order, α and γ.
    Trees {
        #[arg(long, default_value_t = 5)]
        max_order: usize,
    },
    /// Deterministic and predicted stochastic order of a tableau method.
    CheckOrder {
        #[arg(long)]
        method: String,
        #[arg(long, default_value_t = 8)]
        max_order: usize,
    },
    /// Mean-square or weak convergence study.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// H and C drift along one path.
    Invariants {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Band(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Band(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Band(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Trees { max_order } => cmd_trees(max_order),
        Command::CheckOrder { method, max_order } => cmd_check_order(&method, max_order),
        Command::Convergence {
            config,
            mode,
            samples,
            seed,
            out,
        } => cmd_convergence(&config, mode.as_deref(), samples, seed, out),
        Command::Invariants { config, out } => cmd_invariants(&config, out),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("{THREADS_VAR}={value:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn cmd_trees(max_order: usize) -> Result<(), Failure> {
    if max_order > DEFAULT_ORDER_CAP {
        return Err(Failure::Usage(format!(
            "--max-order {max_order} exceeds the cap {DEFAULT_ORDER_CAP}"
        )));
    }
    let trees = enumerate_trees(max_order).map_err(|e| Failure::Usage(e.to_string()))?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut counts = vec![0usize; max_order];
    for tree in &trees {
        counts[tree.order() - 1] += 1;
    }
    let mut last = 0;
    for tree in &trees {
        if tree.order() != last {
            last = tree.order();
            let _ = writeln!(out, "# order {last}: {} trees", counts[last - 1]);
        }
        let _ = writeln!(out, "{}, {}, {}, {}", tree, tree.order(), tree.alpha(), tree.gamma());
    }
    Ok(())
}

fn cmd_check_order(name: &str, max_order: usize) -> Result<(), Failure> {
    let method = Method::<f64>::from_name(name).map_err(|e| Failure::Usage(e.to_string()))?;
    let tableau = method.tableau().ok_or_else(|| {
        Failure::Usage(format!(
            "{name} is not a Runge-Kutta tableau; measure its order empirically with `sisde convergence`"
        ))
    })?;
    let report = detect_deterministic_order(tableau, max_order).map_err(|e| Failure::Usage(e.to_string()))?;
    println!("method {}", method.name());
    println!(
        "deterministic order {}, stochastic order {}",
        report.deterministic_order, report.stochastic_order
    );
    match &report.first_failure {
        Some((tree, residual)) => println!("first failing tree {tree} (residual {residual:.3e})"),
        None => println!("all order conditions hold up to order {max_order}"),
    }
    Ok(())
}

fn load(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    RunConfig::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| io_failure(path, e))
}

fn write_manifest(out: &Path, manifest: &RunManifest) -> Result<PathBuf, Failure> {
    let mut path = out.as_os_str().to_owned();
    path.push(".manifest");
    let path = PathBuf::from(path);
    std::fs::write(&path, manifest.render()).map_err(|e| io_failure(&path, e))?;
    Ok(path)
}

fn cmd_convergence(
    path: &Path,
    mode: Option<&str>,
    samples: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let mut config = load(path)?;
    if let Some(m) = mode {
        config.mode = Mode::parse(m).ok_or_else(|| Failure::Usage(format!("--mode {m:?} is not ms or weak")))?;
    }
    if let Some(n) = samples {
        config.experiment.samples = n;
    }
    if let Some(s) = seed {
        config.experiment.driver = config.experiment.driver.clone().with_seed(s);
    }
    if out.is_some() {
        config.out = out;
    }
    let out = config.out.clone().unwrap_or_else(|| PathBuf::from("convergence.csv"));
    config.experiment.validate()?;
    let manifest = RunManifest::new("convergence", &config);

    let report = match config.mode {
        Mode::MeanSquare => run_ms_convergence(&config.experiment)?,
        Mode::Weak => run_weak_convergence(&config.experiment)?,
    };
    log_rows(&report);
    let mut file = create(&out)?;
    report
        .write_csv(&mut file)
        .and_then(|()| file.flush())
        .map_err(|e| io_failure(&out, e))?;
    let manifest_path = write_manifest(&out, &manifest)?;

    for fit in &report.fits {
        match &fit.fit {
            Some(f) => println!(
                "{} {}: slope {:.3} (intercept {:.3}, residual {:.2e})",
                fit.method, fit.family, f.slope, f.intercept, f.residual
            ),
            None => println!("{} {}: no fit (fewer than two usable step sizes)", fit.method, fit.family),
        }
    }
    println!("wrote {} and {}", out.display(), manifest_path.display());
    check_bands(&config, &report)
}

fn log_rows(report: &ConvergenceReport) {
    for row in &report.rows {
        eprintln!(
            "{} h={:.6e} {}: error {:.6e} ± {:.1e} ({} samples, {} invalid)",
            row.method, row.h, row.family, row.error.value, row.error.stderr, row.samples, row.invalid
        );
    }
}

fn check_bands(config: &RunConfig, report: &ConvergenceReport) -> Result<(), Failure> {
    let mut violations = Vec::new();
    for band in &config.bands {
        let family = if band.family == "ms" {
            if config.mode != Mode::MeanSquare {
                continue;
            }
            ErrorFamily::MeanSquare
        } else {
            if config.mode != Mode::Weak {
                continue;
            }
            let obs: Observable = band.family.parse().map_err(|e: sisde::problems::ProblemError| {
                Failure::Usage(e.to_string())
            })?;
            if !config.experiment.observables.contains(&obs) {
                return Err(Failure::Usage(format!(
                    "acceptance band {}.{} names an observable the run does not measure",
                    band.method, band.family
                )));
            }
            ErrorFamily::Weak(obs)
        };
        let label = format!("{}.{}", band.method, band.family);
        match report.slope(&band.method, &family) {
            Some(s) if (band.low..=band.high).contains(&s) => println!("band {label} [{}, {}]: ok ({s:.3})", band.low, band.high),
            Some(s) => violations.push(format!("{label} slope {s:.3} outside [{}, {}]", band.low, band.high)),
            None => violations.push(format!("{label} has no fitted slope")),
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Band(violations.join("; ")))
    }
}

fn cmd_invariants(path: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let mut config = load(path)?;
    if out.is_some() {
        config.out = out;
    }
    let out = config.out.clone().unwrap_or_else(|| PathBuf::from("drift.csv"));
    let manifest = RunManifest::new("invariants", &config);
    let points = run_invariant_drift(&config.experiment)?;
    let mut file = create(&out)?;
    write_drift_csv(&points, &mut file)
        .and_then(|()| file.flush())
        .map_err(|e| io_failure(&out, e))?;
    let manifest_path = write_manifest(&out, &manifest)?;
    let dh = points.iter().map(|p| p.dh.abs()).fold(0.0, f64::max);
    let dc = points.iter().map(|p| p.dc.abs()).fold(0.0, f64::max);
    println!("max |dH| = {dh:.3e}, max |dC| = {dc:.3e} over {} steps", points.len() - 1);
    println!("wrote {} and {}", out.display(), manifest_path.display());
    match config.max_drift {
        Some(bound) if !(dh <= bound && dc <= bound) => {
            Err(Failure::Band(format!("drift exceeds max_drift = {bound:e}")))
        }
        _ => Ok(()),
    }
}
