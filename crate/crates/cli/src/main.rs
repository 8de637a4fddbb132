mod config;
mod run;

use clap::{Parser, Subcommand};
use config::{parse_variant, short_name, ConfigError, RunConfig};
use flatband_core::fock::ModeLayout;
use flatband_core::formfactor::{FormFactorModel, ModelKind};
use flatband_core::identities::identity_suite;
use flatband_core::lattice::MomentumGrid;
use flatband_core::predict::predict_dims;
use std::path::PathBuf;
use std::process::ExitCode;

/// Thread count for the parallel parts of assembly and kernel solves.
const THREADS_ENV: &str = "FLATBAND_THREADS";

#[derive(Parser)]
#[command(
    name = "flatband",
    version,
    about = "Ground-space verification for flat-band interacting Hamiltonians"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tasks of a JSON config and write report.json and dimensions.csv.
    Run {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Print the closed-form ground-space dimensions.
    Predict {
        #[arg(long)]
        variant: String,
        #[arg(long)]
        nk: usize,
    },
    /// Run the operator-identity suite on a small grid.
    Identities {
        /// Grid as AxB, e.g. 3x1.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        variant: String,
        #[arg(long, default_value = "LLL")]
        model: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn config_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}

fn init_threads() -> Result<(), ConfigError> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError(format!("{THREADS_ENV}={v} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError(e.to_string()))
}

fn parse_grid(s: &str) -> Result<(usize, usize), ConfigError> {
    let bad = || ConfigError(format!("invalid grid '{s}' (expected AxB with A, B ≥ 1)"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let (a, b): (usize, usize) = (
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    );
    if a == 0 || b == 0 {
        return Err(bad());
    }
    Ok((a, b))
}

fn parse_model(s: &str) -> Result<ModelKind, ConfigError> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| {
        ConfigError(format!(
            "unknown model '{s}' (expected LLL, ThetaSampled or DegenerateConstant)"
        ))
    })
}

fn cmd_run(path: PathBuf, out: PathBuf) -> ExitCode {
    let cfg = match RunConfig::load(&path) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let outcome = match run::execute(&cfg) {
        Ok(o) => o,
        Err(e) => return config_error(e),
    };
    if let Err(e) = run::write_outputs(&outcome, &out) {
        eprintln!("error: writing outputs to {}: {e}", out.display());
        return ExitCode::from(2);
    }
    print!("{}", outcome.csv);
    if outcome.failures.is_empty() {
        println!("all certificates passed");
        ExitCode::SUCCESS
    } else {
        let names = outcome.failures.join(" + ");
        println!("FAILED: {names}");
        eprintln!("failed invariants: {names}");
        ExitCode::from(1)
    }
}

fn cmd_predict(variant: &str, nk: usize) -> ExitCode {
    let v = match parse_variant(variant) {
        Ok(v) => v,
        Err(e) => return config_error(e),
    };
    if nk == 0 {
        return config_error("nk must be at least 1");
    }
    let p = predict_dims(v, nk);
    println!("variant,nk,lambda_plus,dim");
    for (l, d) in &p.per_lambda {
        println!("{},{nk},{l},{d}", short_name(v));
    }
    println!("{},{nk},total,{}", short_name(v), p.total);
    ExitCode::SUCCESS
}

fn cmd_identities(grid: &str, variant: &str, model: &str, seed: u64) -> ExitCode {
    let parsed =
        parse_grid(grid).and_then(|g| Ok((g, parse_variant(variant)?, parse_model(model)?)));
    let ((nx, ny), v, kind) = match parsed {
        Ok(x) => x,
        Err(e) => return config_error(e),
    };
    let g = match MomentumGrid::new(nx, ny) {
        Ok(g) => g,
        Err(e) => return config_error(e),
    };
    let modes = ModeLayout::new(v, g.len()).map(|l| l.n_modes());
    if let Ok(m) = modes {
        if m > flatband_core::identities::MAX_IDENTITY_MODES {
            return config_error(format!("{m} modes exceed the identity-suite limit of 12"));
        }
    }
    let model = match FormFactorModel::new(kind, &g, None, 64) {
        Ok(m) => m,
        Err(e) => return config_error(e),
    };
    let checks = match identity_suite(v, &model, seed) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    println!("identity,error,expect_failure,passed");
    let mut ok = true;
    for c in &checks {
        println!(
            "\"{}\",{:.3e},{},{}",
            c.name, c.error, c.expect_failure, c.passed
        );
        ok &= c.passed;
    }
    if ok {
        println!(
            "{} identities hold on {}x{} {}",
            checks.len(),
            nx,
            ny,
            short_name(v)
        );
        ExitCode::SUCCESS
    } else {
        println!("FAILED");
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        return config_error(e);
    }
    match cli.command {
        Command::Run { config, out } => cmd_run(config, out),
        Command::Predict { variant, nk } => cmd_predict(&variant, nk),
        Command::Identities {
            grid,
            variant,
            model,
            seed,
        } => cmd_identities(&grid, &variant, &model, seed),
    }
}
