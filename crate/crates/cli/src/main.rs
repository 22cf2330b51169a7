use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use delayrate::bound::{build_youla_program, phi_of_d, YoulaProgram};
use delayrate::info::gaussian_directed_info_auto;
use delayrate::lqg::d_inf;
use delayrate::sim::operational_run;
use delayrate::sweep::{awgn_directed_info, emit_outputs, run_sweep, SweepConfig, RATE_TOLERANCE_BITS};
use delayrate::Error;

/// Rate lower bounds and operational rates for loops closed over delayed digital channels.
#[derive(Debug, Parser)]
#[command(name = "delayrate", version)]
struct Cli {
    /// Sweep configuration (JSON). Without it the built-in example plant is used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for `sweep`.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the simulation seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Performance floor D_inf(h) for each delay.
    Dinf {
        /// Delays to evaluate; defaults to the configured ones.
        #[arg(long, value_delimiter = ',')]
        delays: Option<Vec<usize>>,
    },
    /// Minimal SNR and rate lower bound at one performance level.
    Bound(PointArgs),
    /// Quantized-loop simulation of the optimal design at one performance level.
    Simulate(PointArgs),
    /// Full sweep over delays and performance levels; writes sweep.csv, sweep.json, plot.dat.
    Sweep,
    /// Directed-information estimate of the designed loop next to its bound.
    VerifyDi(PointArgs),
}

#[derive(Debug, Args)]
struct PointArgs {
    /// Channel delay h.
    #[arg(long, default_value_t = 0)]
    h: usize,
    /// Absolute performance level D.
    #[arg(long, conflicts_with = "multiplier")]
    d: Option<f64>,
    /// Performance level as a multiple of D_inf(h).
    #[arg(long)]
    multiplier: Option<f64>,
    /// Simulation length; defaults to the configured one.
    #[arg(long)]
    steps: Option<usize>,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(String),
    Point(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Json(_) => Failure::Config(e.to_string()),
            e => Failure::Point(e),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Point(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> Result<SweepConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => SweepConfig::from_file(path)?,
        None => SweepConfig::from_json(r#"{"delays": [0, 1, 2, 3, 4]}"#)?,
    };
    if let Some(seed) = cli.seed {
        cfg.simulation.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::Config("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::Dinf { delays } => {
            let delays = delays.clone().unwrap_or_else(|| cfg.delays.clone());
            let mut out = Vec::new();
            for h in delays {
                let floor = d_inf(&cfg.plant, h)?;
                out.push(json!({ "h": h, "d_inf": floor.value }));
            }
            print_json(&out);
            Ok(0)
        }
        Command::Bound(args) => {
            let (program, d) = point_program(&cfg, args)?;
            print_json(&phi_of_d(&program, d)?);
            Ok(0)
        }
        Command::Simulate(args) => {
            let (program, d) = point_program(&cfg, args)?;
            let point = phi_of_d(&program, d)?;
            let steps = args.steps.unwrap_or(cfg.simulation.steps);
            let run = operational_run(&program, &point, steps, cfg.simulation.seed, cfg.simulation.markov_order)?;
            let di = gaussian_directed_info_auto(&run.trace.y, &run.trace.u, args.h)?;
            print_json(&json!({
                "rate_lower_bits": point.rate_lower_bits,
                "operational": run.point,
                "directed_info_bits": di.bits(),
                "bound_check_passed": run.point.rate_bits >= di.bits() - RATE_TOLERANCE_BITS,
            }));
            Ok(0)
        }
        Command::VerifyDi(args) => {
            let (program, d) = point_program(&cfg, args)?;
            let point = phi_of_d(&program, d)?;
            let steps = args.steps.unwrap_or(cfg.simulation.steps);
            let est = awgn_directed_info(&program, &point, steps, cfg.simulation.seed)?;
            print_json(&json!({
                "h": args.h,
                "D": d,
                "rate_lower_bits": point.rate_lower_bits,
                "directed_info_bits": est.bits(),
                "estimate": est,
            }));
            Ok(0)
        }
        Command::Sweep => {
            let result = run_sweep(&cfg)?;
            let paths = emit_outputs(&result, &cli.out)?;
            for p in &paths {
                println!("{}", p.display());
            }
            let failures = result.failures();
            if failures > 0 {
                eprintln!("{failures} of {} points did not complete", result.rows.len());
                return Ok(2);
            }
            Ok(0)
        }
    }
}

fn point_program(cfg: &SweepConfig, args: &PointArgs) -> Result<(YoulaProgram, f64), Failure> {
    let floor = d_inf(&cfg.plant, args.h)?;
    let d = match (args.d, args.multiplier) {
        (Some(d), _) => d,
        (None, Some(m)) => m * floor.value,
        (None, None) => return Err(Failure::Config("one of --d or --multiplier is required".into())),
    };
    let s = &cfg.solver;
    let opts = delayrate::bound::YoulaOptions { grid_size: s.grid_size, n_q: s.n_q, n_q_max: s.n_q_max };
    let program = build_youla_program(&cfg.plant, args.h, &floor.observer, opts)?;
    Ok((program, d))
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}
