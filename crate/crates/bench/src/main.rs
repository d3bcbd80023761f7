use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zfbound::ScenarioConfig;
use zfbound_bench::{
    load_config, run_realization, run_scenario, scan_dual, write_report, write_scan, BenchError, Method, RunOptions,
    RunReport,
};

#[derive(Parser)]
#[command(name = "zfbench", version, about = "Dual bounds and primal heuristics for ZF SDMA/OFDMA allocation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Output directory for reports.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Keep the per-iteration dual trace.
    #[arg(long)]
    emit_trace: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one realization and print bounds and the allocation summary.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        realization: u64,
    },
    /// Monte Carlo run over the configured sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Dual-function grid on one realization.
    Scan {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        realization: u64,
        /// Comma-separated power multipliers; omit to maximize over lambda.
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        /// Comma-separated rate multipliers of the first real-time user.
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1,1.5,2,3,4")]
        mus: Vec<f64>,
    },
    /// Exhaustive enumeration on small instances, alongside the other methods.
    Oracle {
        #[command(flatten)]
        common: Common,
    },
}

fn configure(common: &Common) -> Result<ScenarioConfig, BenchError> {
    let mut config = match &common.config {
        Some(p) => load_config(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = common.seed {
        config.seed = s;
    }
    if let Some(r) = common.realizations {
        config.realizations = r;
    }
    if common.threads == Some(0) {
        return Err(BenchError::Config("--threads must be >= 1".into()));
    }
    config.validate().map_err(|e| BenchError::Config(e.to_string()))?;
    Ok(config)
}

fn options(common: &Common) -> RunOptions {
    RunOptions {
        threads: common.threads,
        emit_trace: common.emit_trace,
        keep_allocations: false,
    }
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

fn print_aggregates(report: &RunReport) {
    let sweep = report.sweep_parameter.as_deref().unwrap_or("point");
    println!("{sweep:>12} {:>14} {:>12} {:>10} {:>9} {:>10}", "method", "objective", "gap %", "feasible", "iters");
    for a in &report.aggregates {
        println!(
            "{:>12} {:>14} {:>12} {:>10} {:>9} {:>10}",
            fmt(a.sweep_value),
            a.method.name(),
            fmt(a.mean_objective),
            fmt(a.mean_gap_percent),
            a.feasible_count,
            fmt(a.mean_iterations)
        );
    }
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Solve { common, realization } => {
            let config = configure(&common)?;
            let rec = run_realization(&config, &config.instance, None, realization, &options(&common))?;
            println!("upper bound     {:.6}", rec.upper_bound);
            println!("dual converged  {} after {} iterations", rec.dual_converged, rec.dual.iterations);
            for m in [Method::Recovery, Method::WeightAdjust, Method::Oracle] {
                let r = rec.result(m);
                println!("{:<15} {:?} objective {} gap % {}", m.name(), r.status, fmt(r.objective), fmt(r.gap_percent));
            }
            if let Some(out) = &common.out {
                let report = RunReport {
                    config: config.clone(),
                    sweep_parameter: None,
                    aggregates: zfbound_bench::runner::aggregate(std::slice::from_ref(&rec), &[None]),
                    records: vec![rec],
                };
                for p in write_report(&report, out)? {
                    println!("wrote {}", p.display());
                }
            }
        }
        Command::Sweep { common } => sweep(configure(&common)?, &common)?,
        Command::Oracle { common } => {
            let mut config = configure(&common)?;
            config.oracle.enabled = true;
            sweep(config, &common)?;
        }
        Command::Scan {
            common,
            realization,
            lambdas,
            mus,
        } => {
            let config = configure(&common)?;
            let grid = scan_dual(&config, realization, lambdas.as_deref(), &mus)?;
            match &common.out {
                Some(out) => println!("wrote {}", write_scan(&grid, out)?.display()),
                None => print!("{}", grid.to_delimited()),
            }
        }
    }
    Ok(())
}

fn sweep(config: ScenarioConfig, common: &Common) -> Result<(), BenchError> {
    let report = run_scenario(&config, &options(common))?;
    print_aggregates(&report);
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    for p in write_report(&report, &out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
