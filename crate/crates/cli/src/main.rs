mod commands;
mod output;
mod presets;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "fiberlink", version, about = "Cavity-to-cavity state transfer over a lossy fiber")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, conflicts_with = "fig")]
    pub config: Option<PathBuf>,
    /// Bundled figure preset (3, 4a, 4b, 5, 6a, 6b, 6c, 6d, 7, 9).
    #[arg(long, global = true)]
    pub fig: Option<String>,
    /// Directory for CSV files and the run manifest; tables go to stdout otherwise.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print results as JSON.
    #[arg(long, global = true)]
    pub json: bool,
    /// Worker threads for parallel evaluation.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Derived rates and closed-form transfer probabilities.
    Analyze,
    /// Recompute the survey of experimental parameters.
    Table,
    /// Integrate one transfer with the protocol from the configuration.
    Simulate(SimulateArgs),
    /// Optimize the drive parameters of AP and/or WPS.
    Optimize(OptimizeArgs),
    /// Optimized AP against fiber length.
    SweepLength(SweepArgs),
    /// Fiber length beyond which AP no longer beats P₁.
    Lmax(LmaxArgs),
    /// Hybrid cavity-fiber eigenmodes.
    Modes(ModesArgs),
    /// Transfer probability against the pulse separation x_spl.
    Timing(TimingArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Full,
    Hybrid,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProtocolChoice {
    Ap,
    Wps,
    Both,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "full")]
    pub model: Model,
    /// Fiber modes on each side of resonance; overrides the configuration.
    #[arg(long)]
    pub n_modes: Option<usize>,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// Double N until F changes by less than this.
    #[arg(long)]
    pub converge: Option<f64>,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    #[arg(long, value_enum, default_value = "both")]
    pub protocol: ProtocolChoice,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Fiber lengths in m; defaults to the preset's list.
    #[arg(long, value_delimiter = ',')]
    pub lengths: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct LmaxArgs {
    /// Output-coupling probabilities; defaults to the preset's list or the configured cavity.
    #[arg(long, value_delimiter = ',')]
    pub pout: Vec<f64>,
    /// Attenuation in dB/km; defaults to the preset's list, the configured fiber, or 0.2.
    #[arg(long, value_delimiter = ',')]
    pub attenuation: Vec<f64>,
    /// Required advantage F_AP − P₁ at the crossing.
    #[arg(long)]
    pub margin: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ModesArgs {
    /// Fiber modes on each side of resonance.
    #[arg(long, default_value_t = 1)]
    pub n: usize,
}

#[derive(Args, Debug)]
pub struct TimingArgs {
    #[arg(long, default_value_t = 0.8)]
    pub x_min: f64,
    #[arg(long, default_value_t = 2.1)]
    pub x_max: f64,
    #[arg(long, default_value_t = 27)]
    pub x_points: usize,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            std::process::exit(output::EXIT_CONFIG);
        }
    }
    if let Err(e) = commands::run(&cli) {
        eprintln!("error: {e:#}");
        std::process::exit(output::exit_code(&e));
    }
}
