use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nlsobolev_cli::{list_recipes, run, write_outputs, ExperimentConfig, RunError};

#[derive(Parser)]
#[command(name = "nlsobolev", version, about = "Nonlocal Taylor-remainder functionals and jet reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the recipe named in a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = "NLSOBOLEV_OUT_DIR", default_value = "out")]
        out: PathBuf,
        /// Worker threads; results do not depend on this.
        #[arg(long)]
        threads: Option<usize>,
        /// `key=value` with a dotted key, e.g. `schedule.count=5`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print the available recipes as JSON.
    ListRecipes,
}

fn execute(config: PathBuf, out: PathBuf, overrides: Vec<String>) -> Result<(), RunError> {
    let cfg = ExperimentConfig::load(&config, &overrides)?;
    let result = run(&cfg)?;
    let files = write_outputs(&result, &out)?;
    eprintln!("{} -> {}", result.recipe, files.summary.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListRecipes => {
            println!("{}", serde_json::to_string_pretty(&list_recipes()).expect("serializable"));
            ExitCode::SUCCESS
        }
        Command::Run { config, out, threads, overrides } => {
            let outcome = match threads {
                Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
                    Ok(pool) => pool.install(|| execute(config, out, overrides)),
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(2);
                    }
                },
                None => execute(config, out, overrides),
            };
            match outcome {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
