use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flowcap::expcli::{self, Experiment, ExperimentConfig, RunError, EXAMPLES, OUT_DIR_ENV};
use flowcap::NamedField;

/// Build, compose and analyze flow maps of control-family systems.
#[derive(Parser)]
#[command(name = "flowcap", version)]
struct Cli {
    /// Same as `flowcap list`.
    #[arg(long)]
    list: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config. Artifacts go to the config's `output`, or to
    /// `$FLOWCAP_OUT_DIR/<name>` when that variable is set.
    Run { config: PathBuf },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// List built-in fields, experiment kinds and example configs.
    List,
    /// Print a built-in example config.
    Show { name: String },
}

fn list() {
    println!("named fields:");
    for f in NamedField::ALL {
        println!("  {:<14} {}", f.name(), f.description());
    }
    println!("experiment kinds:");
    for k in Experiment::KINDS {
        println!("  {k}");
    }
    println!("example configs (flowcap show <name>):");
    for (name, text) in EXAMPLES {
        let about = ExperimentConfig::from_json(text)
            .ok()
            .and_then(|c| c.description)
            .unwrap_or_default();
        println!("  {name:<30} {about}");
    }
}

fn run(path: &Path) -> Result<(), RunError> {
    let config = expcli::load_config(path)?;
    let root = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    let dir = expcli::output_dir(&config, root.as_deref());
    let outcome = expcli::run(&config, &dir)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    for a in &outcome.artifacts {
        println!("wrote {}", a.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match (cli.command, cli.list) {
        (Some(c), _) => c,
        (None, true) => Command::List,
        (None, false) => {
            eprintln!("flowcap: no command given, see --help");
            return ExitCode::from(2);
        }
    };
    match command {
        Command::List => {
            list();
            ExitCode::SUCCESS
        }
        Command::Show { name } => match expcli::example(&name) {
            Some(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("flowcap: no example named {name}");
                ExitCode::from(2)
            }
        },
        Command::Validate { config } => match expcli::validate(&config) {
            Ok(ds) if ds.is_empty() => {
                println!("ok");
                ExitCode::SUCCESS
            }
            Ok(ds) => {
                for d in ds {
                    println!("{d}");
                }
                ExitCode::from(2)
            }
            Err(e) => {
                eprintln!("flowcap: cannot read {}: {e}", config.display());
                ExitCode::from(2)
            }
        },
        Command::Run { config } => match run(&config) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("flowcap: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}
