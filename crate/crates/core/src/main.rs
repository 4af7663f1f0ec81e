use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dpsrk::cli::plot::cmd_plot;
use dpsrk::cli::{
    cmd_max_distance, cmd_mc, cmd_optimize_mu, cmd_optimize_pump, cmd_presets_list, cmd_rate,
    cmd_sweep, Axis, CliError, DetectorSelect, FMode, McMode, McOptions, ScenarioOptions,
    SweepSpec, EXIT_USAGE,
};
use dpsrk::security::AttackLabel;

#[derive(Parser)]
#[command(name = "dpsrk", version, about = "DPS-QKD secure key rate modeling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Source {
    /// Scenario file (key = value lines).
    #[arg(long, value_name = "FILE")]
    scenario: Option<PathBuf>,
    /// Named parameter set, see `presets list`.
    #[arg(long)]
    preset: Option<String>,
    /// Detector for presets: si, ingaas or both.
    #[arg(long, default_value = "si")]
    detector: DetectorSelect,
    /// Bob's interferometer delay count N.
    #[arg(long = "n")]
    delay_n: Option<u32>,
    /// individual_mem, individual_nomem, hybrid_mem or hybrid_nomem.
    #[arg(long)]
    attack: Option<AttackLabel>,
    /// Dead-time multiplier δ.
    #[arg(long)]
    delta: Option<f64>,
    /// Error-correction efficiency: table or fixed.
    #[arg(long = "f-mode", default_value = "table")]
    f_mode: FMode,
}

impl Source {
    fn options(&self) -> ScenarioOptions {
        ScenarioOptions {
            scenario: self.scenario.clone(),
            preset: self.preset.clone(),
            detector: self.detector,
            delay_n: self.delay_n,
            attack: self.attack,
            delta: self.delta,
            f_mode: self.f_mode,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Every rate quantity at one fiber length.
    Rate {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        length: f64,
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
    },
    /// CSV sweep over distance, pump power or mean photon number.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "distance")]
        axis: Axis,
        #[arg(long)]
        lo: f64,
        #[arg(long)]
        hi: f64,
        #[arg(long)]
        steps: usize,
        /// Fiber length for pump and mu sweeps.
        #[arg(long)]
        length: Option<f64>,
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
    },
    /// Longest fiber with secure rate above --rmin.
    MaxDistance {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 0.0)]
        rmin: f64,
    },
    /// Mean photon number that maximizes the secure rate.
    OptimizeMu {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        length: f64,
        #[arg(long = "mu-lo", default_value_t = 0.001)]
        mu_lo: f64,
        #[arg(long = "mu-hi", default_value_t = 1.0)]
        mu_hi: f64,
    },
    /// Pump power that minimizes the up-converter NEP.
    OptimizePump {
        #[arg(long, value_name = "FILE")]
        scenario: Option<PathBuf>,
        #[arg(long = "pump-lo", default_value_t = 1e-4)]
        pump_lo: f64,
        #[arg(long = "pump-hi", default_value_t = 0.5)]
        pump_hi: f64,
    },
    /// Monte Carlo check of the analytic link model.
    Mc {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        length: f64,
        #[arg(long, default_value_t = 10_000_000)]
        pulses: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "link")]
        mode: McMode,
        /// Fraction of pulses Eve intercepts (ir mode).
        #[arg(long = "ir-fraction", default_value_t = 1.0)]
        ir_fraction: f64,
        /// Eve's interferometer delay (ir mode).
        #[arg(long = "eve-m", default_value_t = 1)]
        eve_m: u32,
        /// Bob's delay set, comma separated.
        #[arg(long = "bob-n", value_delimiter = ',')]
        bob_n: Option<Vec<u32>>,
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
    },
    /// Emit a matplotlib script for a sweep CSV.
    Plot {
        csv: PathBuf,
        #[arg(long, short, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Built-in and user parameter sets.
    Presets {
        #[command(subcommand)]
        action: PresetsAction,
    },
}

#[derive(Subcommand)]
enum PresetsAction {
    List,
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    match cli.command {
        Command::Rate {
            source,
            length,
            csv,
        } => cmd_rate(&source.options(), length, csv.as_deref(), out),
        Command::Sweep {
            source,
            axis,
            lo,
            hi,
            steps,
            length,
            csv,
        } => cmd_sweep(
            &source.options(),
            &SweepSpec {
                axis,
                lo,
                hi,
                steps,
                length_km: length,
            },
            csv.as_deref(),
            out,
        ),
        Command::MaxDistance { source, rmin } => cmd_max_distance(&source.options(), rmin, out),
        Command::OptimizeMu {
            source,
            length,
            mu_lo,
            mu_hi,
        } => cmd_optimize_mu(&source.options(), length, (mu_lo, mu_hi), out),
        Command::OptimizePump {
            scenario,
            pump_lo,
            pump_hi,
        } => cmd_optimize_pump(scenario.as_deref(), (pump_lo, pump_hi), out),
        Command::Mc {
            source,
            length,
            pulses,
            seed,
            mode,
            ir_fraction,
            eve_m,
            bob_n,
            csv,
        } => cmd_mc(
            &source.options(),
            &McOptions {
                length_km: length,
                n_pulses: pulses,
                seed,
                mode,
                ir_fraction,
                eve_delay_m: eve_m,
                bob_delays: bob_n,
            },
            csv.as_deref(),
            out,
        ),
        Command::Plot { csv, output } => cmd_plot(&csv, output.as_deref(), out),
        Command::Presets {
            action: PresetsAction::List,
        } => cmd_presets_list(out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let code = match run(cli, &mut out) {
        Ok(code) => code,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    let _ = out.flush();
    ExitCode::from(code as u8)
}
