//! The `alo` command: create ALOs from a chat backend, derive interaction
//! ALOs, simulate them, export scene bundles for the browser harness and
//! measure response variability.
//!
//! Exit codes: 0 on success, 1 when the work failed (unknown ALO, parse or
//! validation failure, backend or I/O error), 2 for usage errors.

mod commands;
mod config;
mod error;
mod repl;
mod transcript;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use commands::{default_scenario, Session};
pub use config::{BackendChoice, CliConfig, GatewaySettings, Overrides, Settings, WorldDefaults};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "alo", version, about = "Create, simulate, export and analyse Abstract Language Objects")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Default, Args)]
pub struct GlobalArgs {
    /// Chat/embedding backend [default: mock]
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendChoice>,
    /// Seed for the mock backend and the simulator [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Registry directory [default: registry]
    #[arg(long, global = true, value_name = "DIR")]
    pub registry: Option<PathBuf>,
    /// Settings file (JSON)
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory for traces, bundles, runs and transcripts [default: runs]
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// Ask the backend for an ALO and store it in the registry.
    Create {
        name: String,
        /// Replace an existing ALO of the same name.
        #[arg(long)]
        force: bool,
    },
    /// Derive the "<a> meets <b>" ALO and its interaction rule.
    Interact {
        a: String,
        b: String,
        /// Setting the encounter takes place in.
        #[arg(long)]
        context: Option<String>,
        #[arg(long)]
        force: bool,
    },
    /// Run the simulator and write trace.jsonl and snapshots.jsonl.
    ///
    /// Without a scenario file every registered ALO is placed once and
    /// every registered interaction between them is bound.
    Simulate {
        /// `[SCENARIO] TICKS`
        #[arg(num_args = 1..=2, value_names = ["SCENARIO", "TICKS"], required = true)]
        args: Vec<String>,
    },
    /// Write scene.bundle.json and one update script per ALO.
    Export {
        /// Scenario file; defaults as for `simulate`.
        scenario: Option<PathBuf>,
    },
    /// Repeat a prompt at several temperatures and compare the responses.
    Analyze {
        /// Run configuration file (JSON).
        run_config: Option<PathBuf>,
        /// Trials per temperature.
        #[arg(long)]
        n: Option<usize>,
        /// Temperatures, comma separated.
        #[arg(long, value_delimiter = ',', value_name = "T,...")]
        temperatures: Option<Vec<f64>>,
        /// User prompt.
        #[arg(long)]
        prompt: Option<String>,
        /// System prompt variant: none, markdown or codegen.
        #[arg(long, value_name = "VARIANT")]
        system_prompt: Option<String>,
    },
    /// Print the image prompt for an ALO and its parameter coverage.
    ImagePrompt {
        name: String,
        /// Text appended to the prompt.
        #[arg(long, default_value = alo_core::prompt::DEFAULT_IMAGE_SUFFIX, allow_hyphen_values = true)]
        suffix: String,
    },
    /// Read commands from standard input, one per line.
    Repl,
}

/// Runs a parsed command line, printing errors to standard error.
pub fn main_with(cli: Cli) -> ExitCode {
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.global.config {
        Some(path) => CliConfig::load(path)?,
        None => CliConfig::default(),
    };
    let overrides = Overrides {
        backend: cli.global.backend,
        seed: cli.global.seed,
        registry: cli.global.registry.clone(),
        out: cli.global.out.clone(),
    };
    let mut session = Session::new(Settings::resolve(config, overrides)?);
    match cli.command {
        Command::Repl => repl::run(&mut session, std::io::stdin().lock(), std::io::stdout()),
        command => session.execute(command, &mut std::io::stdout()),
    }
}
