//! Command-line front end for the closed-loop WPT simulator.
//!
//! Exit codes: 0 on success, 1 for configuration errors, 2 when a slot or
//! the run itself fails.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wpt_core::harness::{
    emit_results, oracle_check, run_experiment, run_sweep, write_sweep, ExperimentSummary,
    OracleCheckConfig, Scenario, ScenarioError, SWEEP_PARAMS,
};
use wpt_core::optimizer::ORACLE_MAX_TONES;

#[derive(Parser)]
#[command(name = "wpt-sim", version, about = "Closed-loop wireless power transfer simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo experiment and optionally write per-trial CSV.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Per-trial results CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat the experiment for each value of one scenario parameter.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Parameter to vary.
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(SWEEP_PARAMS))]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<f64>,
        /// Summary CSV, one row per value.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the closed-form weights with an exhaustive search on few tones.
    OracleCheck {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Number of tones, spread evenly across the active band.
        #[arg(long, default_value_t = 4)]
        tones: usize,
        /// Random channel draws.
        #[arg(long, default_value_t = 20)]
        channels: usize,
        /// Amplitude quantization levels of the search.
        #[arg(long, default_value_t = 16)]
        amp_levels: usize,
        /// Phase quantization levels of the search.
        #[arg(long, default_value_t = 16)]
        phase_levels: usize,
        /// Comma-separated β values to compare.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        betas: Vec<f64>,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario TOML file.
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in scenario: nlos or los.
    #[arg(long)]
    preset: Option<String>,
    /// Override the number of trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<Scenario, ScenarioError> {
        let mut sc = match (&self.scenario, &self.preset) {
            (Some(path), _) => Scenario::load(path)?,
            (None, Some(name)) => Scenario::preset(name)
                .ok_or_else(|| ScenarioError::Invalid(format!("unknown preset '{name}' (expected nlos or los)")))?,
            (None, None) => Scenario::nlos(),
        };
        if let Some(trials) = self.trials {
            sc.trials = trials;
        }
        if let Some(seed) = self.seed {
            sc.seed = seed;
        }
        sc.validate()?;
        Ok(sc)
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn print_summary(s: &ExperimentSummary) {
    let ok = s.successes().count();
    println!("scenario          {}", s.scenario);
    println!("trials            {ok} ok, {} failed", s.trials.len() - ok);
    println!(
        "dc (adaptive)     {:.6e} ± {:.3e}",
        s.dc_adaptive.mean, s.dc_adaptive.stddev
    );
    println!(
        "dc (non-adaptive) {:.6e} ± {:.3e}",
        s.dc_nonadaptive.mean, s.dc_nonadaptive.stddev
    );
    println!("mean gain         {:.3} %", s.mean_gain_percent);
    println!("adaptive wins     {:.1} %", 100.0 * s.adaptive_win_rate);
    println!(
        "duty-cycled dc    {:.6e} / {:.6e}",
        s.duty_cycled_dc_adaptive.mean, s.duty_cycled_dc_nonadaptive.mean
    );
    println!(
        "curve dc (µW)     {:.4} / {:.4}",
        1e6 * s.curve_dc_adaptive.mean,
        1e6 * s.curve_dc_nonadaptive.mean
    );
    for (t, e) in s.failures() {
        eprintln!("trial {} (seed {}) failed: {e}", t.trial_id, t.seed);
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { scenario, out } => {
            let sc = scenario.resolve()?;
            let summary = run_experiment(&sc)?;
            print_summary(&summary);
            if let Some(path) = out {
                emit_results(&summary, &path)
                    .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))?;
            }
            let failed = summary.failures().count();
            if failed > 0 {
                return Err(Failure::Runtime(format!("{failed} trial(s) failed")));
            }
        }
        Command::Sweep { scenario, param, values, out } => {
            let sc = scenario.resolve()?;
            let points = run_sweep(&sc, &param, &values)?;
            println!("{param:>18} {:>14} {:>14} {:>10} {:>8}", "dc_adaptive", "dc_nonadaptive", "gain_%", "wins_%");
            for p in &points {
                let s = &p.summary;
                println!(
                    "{:>18} {:>14.6e} {:>14.6e} {:>10.3} {:>8.1}",
                    p.value,
                    s.dc_adaptive.mean,
                    s.dc_nonadaptive.mean,
                    s.mean_gain_percent,
                    100.0 * s.adaptive_win_rate
                );
            }
            if let Some(path) = out {
                let file = std::fs::File::create(&path)
                    .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))?;
                write_sweep(&param, &points, std::io::BufWriter::new(file))
                    .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))?;
            }
            let failed: usize = points.iter().map(|p| p.summary.failures().count()).sum();
            if failed > 0 {
                return Err(Failure::Runtime(format!("{failed} trial(s) failed")));
            }
        }
        Command::OracleCheck { scenario, tones, channels, amp_levels, phase_levels, betas } => {
            if tones == 0 || tones > ORACLE_MAX_TONES {
                return Err(Failure::Config(format!("--tones must be between 1 and {ORACLE_MAX_TONES}")));
            }
            let sc = scenario.resolve()?;
            let cfg = OracleCheckConfig {
                tones,
                channels,
                seed: sc.seed,
                amp_levels,
                phase_levels,
                betas,
            };
            let check = oracle_check(&sc, &cfg)?;
            println!("{:>6} {:>12}", "beta", "mean_ratio");
            for (beta, mean) in check.betas.iter().zip(check.mean_by_beta()) {
                println!("{beta:>6} {mean:>12.4}");
            }
            let best = check.best_ratios();
            if !best.is_empty() {
                let worst = best.iter().copied().fold(f64::INFINITY, f64::min);
                let mean = best.iter().sum::<f64>() / best.len() as f64;
                println!("best over beta: worst {worst:.4}, mean {mean:.4}");
            }
        }
    }
    Ok(())
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
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
