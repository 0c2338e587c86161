//! Command-line front end: pricing, implied vols, paths, Greeks,
//! benchmark-table reproduction and Monte Carlo smile scans.
//!
//! All results go to stdout as a single JSON object; CSV artifacts are
//! written to `--out` paths with a header row and `#`-prefixed metadata
//! comments. Exit codes: 0 success, 1 benchmark tolerance failure,
//! 2 usage error, 3 solver/model error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use asian_mlp::bachelier::Monitoring;
use asian_mlp::continuous::{el_residual, mlp_closed_form, mlp_fixed_point, mlp_path, FixedPointConfig};
use asian_mlp::discrete::discrete_implied_vol;
use asian_mlp::mc::{mc_smile, McConfig};
use asian_mlp::model::ModelSpec;
use asian_mlp::pricer::{greeks_approx, price_asian, sigma_b0_continuous};

use asian_mlp_cli::benchmark::{run_benchmark, BenchTable};
use asian_mlp_cli::config::{build_model, parse_config_file, ModelParams};

#[derive(Parser)]
#[command(
    name = "asian-mlp",
    version,
    about = "Asian option pricing in local volatility models via most-likely-path asymptotics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Approximate Asian call price (drift-adjusted Bachelier benchmark)
    Price(PriceArgs),
    /// Leading implied normal volatility σ_b,0
    Vol(VolArgs),
    /// Solve and export the most-likely path
    Path(PathArgs),
    /// Approximate delta and gamma
    Greeks(GreeksArgs),
    /// Recompute a published benchmark table against golden data
    Benchmark(BenchmarkArgs),
    /// Monte Carlo vs asymptotic implied-vol smile over a strike grid
    Smile(SmileArgs),
}

#[derive(Args, Clone)]
struct ModelFlags {
    /// Model kind: bachelier | tdbachelier | bs | cir | tdcir | quadratic
    #[arg(long)]
    model: Option<String>,
    /// Initial price
    #[arg(long)]
    s0: Option<f64>,
    /// Volatility scale σ
    #[arg(long)]
    sigma: Option<f64>,
    /// Time-decay rate λ of θ(t) = e^{−λt}
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    /// Linear coefficient ψ of the quadratic kind
    #[arg(long, allow_negative_numbers = true)]
    psi: Option<f64>,
    /// Quadratic coefficient γ of the quadratic kind
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// key = value config file; explicit flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ModelFlags {
    fn build(&self) -> Result<ModelSpec> {
        let flags = ModelParams {
            kind: self.model.clone(),
            sigma: self.sigma,
            lambda: self.lambda,
            psi: self.psi,
            gamma: self.gamma,
            s0: self.s0,
        };
        let merged = match &self.config {
            Some(path) => flags.or(parse_config_file(path)?),
            None => flags,
        };
        build_model(&merged)
    }
}

#[derive(Args)]
struct PriceArgs {
    #[command(flatten)]
    model: ModelFlags,
    /// Strike
    #[arg(long)]
    k: f64,
    /// Expiry in years
    #[arg(long)]
    t: f64,
    /// Risk-free rate
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    r: f64,
    /// Dividend yield
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    q: f64,
}

#[derive(Args)]
struct VolArgs {
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long)]
    k: f64,
    #[arg(long)]
    t: f64,
    /// Number of fixings for discrete monitoring (continuous if omitted)
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct PathArgs {
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long)]
    k: f64,
    #[arg(long)]
    t: f64,
    /// Grid intervals (even)
    #[arg(long, default_value_t = 400)]
    grid_n: usize,
    /// Solver: auto | closed | fixed-point
    #[arg(long, default_value = "auto")]
    method: String,
    /// Write the sampled path as CSV (t,s,s_dot)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GreeksArgs {
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long)]
    k: f64,
    #[arg(long)]
    t: f64,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Table to reproduce: bs | cir
    #[arg(long)]
    table: BenchTable,
    /// Write the recomputed rows as CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SmileArgs {
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long)]
    t: f64,
    #[arg(long)]
    k_min: f64,
    #[arg(long)]
    k_max: f64,
    #[arg(long)]
    k_step: f64,
    /// Monte Carlo paths
    #[arg(long, default_value_t = 100_000)]
    paths: u64,
    #[arg(long, default_value_t = 200)]
    steps_per_year: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = false)]
    antithetic: bool,
    /// Drift μ of the simulated dynamics (and discount rate)
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    drift: f64,
    /// Write the smile as CSV (k,mc_vol,vol_lo,vol_hi,mlp_vol)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("ASIAN_MLP_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .ok();
        }
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            println!(
                "{}",
                serde_json::json!({ "error": format!("{e:#}") })
            );
            ExitCode::from(3)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Price(args) => {
            let model = args.model.build()?;
            let report = price_asian(&model, args.k, args.t, args.r, args.q)?;
            emit(&report)?;
        }
        Command::Vol(args) => {
            let model = args.model.build()?;
            let (monitoring, sigma_b0) = match args.n {
                None => (
                    "continuous".to_string(),
                    sigma_b0_continuous(&model, args.k, args.t)?,
                ),
                Some(n) => (
                    format!("discrete({n})"),
                    discrete_implied_vol(&model, args.k, args.t, n)?,
                ),
            };
            #[derive(Serialize)]
            struct VolOut {
                model: String,
                s0: f64,
                strike: f64,
                expiry: f64,
                monitoring: String,
                sigma_b0: f64,
            }
            emit(&VolOut {
                model: model.kind().name().to_string(),
                s0: model.s0(),
                strike: args.k,
                expiry: args.t,
                monitoring,
                sigma_b0,
            })?;
        }
        Command::Path(args) => {
            let model = args.model.build()?;
            let path = match args.method.as_str() {
                "auto" => mlp_path(&model, args.k, args.t, args.grid_n)?,
                "closed" => mlp_closed_form(&model, args.k, args.t, args.grid_n)?,
                "fixed-point" => {
                    let cfg = FixedPointConfig {
                        grid_n: args.grid_n,
                        ..FixedPointConfig::default()
                    };
                    mlp_fixed_point(&model, args.k, args.t, &cfg)?.0
                }
                other => anyhow::bail!("unknown method {other}; expected auto, closed or fixed-point"),
            };
            let residual = el_residual(&model, &path)?;
            if let Some(out) = &args.out {
                let mut file = std::fs::File::create(out)
                    .with_context(|| format!("creating {}", out.display()))?;
                writeln!(file, "# model: {}", model.kind().name())?;
                writeln!(file, "# strike: {}, expiry: {}", args.k, args.t)?;
                path.write_csv(&mut file)?;
            }
            #[derive(Serialize)]
            struct PathOut {
                model: String,
                s0: f64,
                strike: f64,
                expiry: f64,
                grid_n: usize,
                method: String,
                multiplier: f64,
                rate: f64,
                mean: f64,
                el_interior: f64,
                el_boundary: f64,
                csv: Option<String>,
            }
            emit(&PathOut {
                model: model.kind().name().to_string(),
                s0: model.s0(),
                strike: args.k,
                expiry: args.t,
                grid_n: args.grid_n,
                method: format!("{:?}", path.method()),
                multiplier: path.multiplier(),
                rate: path.rate(),
                mean: path.mean(),
                el_interior: residual.interior,
                el_boundary: residual.boundary,
                csv: args.out.map(|p| p.display().to_string()),
            })?;
        }
        Command::Greeks(args) => {
            let model = args.model.build()?;
            let report = greeks_approx(&model, args.k, args.t)?;
            #[derive(Serialize)]
            struct GreeksOut {
                model: String,
                s0: f64,
                strike: f64,
                expiry: f64,
                #[serde(flatten)]
                report: asian_mlp::pricer::GreeksReport,
            }
            emit(&GreeksOut {
                model: model.kind().name().to_string(),
                s0: model.s0(),
                strike: args.k,
                expiry: args.t,
                report,
            })?;
        }
        Command::Benchmark(args) => {
            let rows = run_benchmark(args.table)?;
            let max_abs = rows.iter().map(|r| r.abs_dev).fold(0.0f64, f64::max);
            let max_rel_dev = rows
                .iter()
                .map(|r| (r.rel_discrp_pct - r.rel_discrp_printed_pct).abs())
                .fold(0.0f64, f64::max);
            let all_pass = rows.iter().all(|r| r.pass);
            if let Some(out) = &args.out {
                let mut file = std::fs::File::create(out)
                    .with_context(|| format!("creating {}", out.display()))?;
                writeln!(file, "# benchmark table reproduction")?;
                writeln!(file, "case,s0,k,r,sigma,t,computed,alw,reference,rel_discrp_pct,pass")?;
                for r in &rows {
                    writeln!(
                        file,
                        "{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.2},{}",
                        r.case, r.s0, r.k, r.r, r.sigma, r.t,
                        r.computed, r.alw_printed, r.reference, r.rel_discrp_pct, r.pass
                    )?;
                }
            }
            #[derive(Serialize)]
            struct BenchOut {
                table: String,
                rows: Vec<asian_mlp_cli::benchmark::BenchmarkRow>,
                max_abs_dev: f64,
                max_rel_discrp_dev_pp: f64,
                all_pass: bool,
            }
            let table = match args.table {
                BenchTable::Bs => "bs",
                BenchTable::Cir => "cir",
            };
            let failed: Vec<u32> = rows.iter().filter(|r| !r.pass).map(|r| r.case).collect();
            emit(&BenchOut {
                table: table.to_string(),
                rows,
                max_abs_dev: max_abs,
                max_rel_discrp_dev_pp: max_rel_dev,
                all_pass,
            })?;
            if !all_pass {
                eprintln!("benchmark rows out of tolerance: cases {failed:?}");
                return Ok(ExitCode::from(1));
            }
        }
        Command::Smile(args) => {
            let model = args.model.build()?;
            if args.k_step.is_nan() || args.k_step <= 0.0 || args.k_max < args.k_min {
                anyhow::bail!("strike grid needs k_min <= k_max and k_step > 0");
            }
            let mut strikes = Vec::new();
            let mut k = args.k_min;
            while k <= args.k_max + 1e-9 * args.k_step {
                strikes.push(k);
                k += args.k_step;
            }
            let cfg = McConfig {
                steps_per_year: args.steps_per_year,
                n_paths: args.paths,
                seed: args.seed,
                antithetic: args.antithetic,
                drift: args.drift,
            };
            let table = mc_smile(&model, &strikes, args.t, Monitoring::Continuous, &cfg)?;
            let mlp_vols: Vec<Result<f64, asian_mlp::Error>> = strikes
                .par_iter()
                .map(|&k| sigma_b0_continuous(&model, k, args.t))
                .collect();
            let (ranges_s, ranges_t) =
                model.default_validation_ranges(args.k_max, args.t);
            let diag = model.validate(ranges_s, ranges_t, 101)?;

            let mut csv = Vec::new();
            writeln!(csv, "# model: {}", model.kind().name())?;
            writeln!(
                csv,
                "# paths: {}, steps_per_year: {}, seed: {}, antithetic: {}, drift: {}",
                cfg.n_paths, cfg.steps_per_year, cfg.seed, cfg.antithetic, cfg.drift
            )?;
            if diag.growth_violation {
                writeln!(
                    csv,
                    "# warning: diffusion grows superlinearly; asymptotic assumptions are heuristic here"
                )?;
            }
            if !diag.positive {
                writeln!(csv, "# warning: diffusion not positive on the validation grid")?;
            }
            writeln!(csv, "k,mc_vol,vol_lo,vol_hi,mlp_vol")?;
            let mut failures: Vec<(f64, String)> = table.failures.clone();
            for (row, mlp) in table.rows.iter().zip(&mlp_vols) {
                match mlp {
                    Ok(v) => writeln!(
                        csv,
                        "{:.6},{:.6},{:.6},{:.6},{:.6}",
                        row.strike, row.vol, row.vol_lo, row.vol_hi, v
                    )?,
                    Err(e) => failures.push((row.strike, e.to_string())),
                }
            }
            for (k, reason) in &failures {
                eprintln!("strike {k}: {reason}");
            }
            match &args.out {
                Some(path) => {
                    std::fs::write(path, &csv)
                        .with_context(|| format!("writing {}", path.display()))?;
                    #[derive(Serialize)]
                    struct SmileOut {
                        model: String,
                        rows: usize,
                        failures: Vec<(f64, String)>,
                        csv: String,
                    }
                    emit(&SmileOut {
                        model: model.kind().name().to_string(),
                        rows: table.rows.len(),
                        failures,
                        csv: path.display().to_string(),
                    })?;
                }
                None => {
                    std::io::stdout().write_all(&csv)?;
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn emit<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}
