use std::process::ExitCode;

use clap::Parser;
use tradeshock::{run, Command, ConfigArgs, RunConfig};

#[derive(Parser)]
#[command(name = "tradeshock", version, about = "Shock propagation experiments on trade networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    config: ConfigArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = RunConfig::resolve(&cli.config).and_then(|cfg| run(cli.command, &cfg).map(|o| (cfg, o)));
    match outcome {
        Ok((cfg, outcome)) => {
            let m = &outcome.manifest;
            eprintln!(
                "{}: {} years, {} files written to {}",
                cli.command.name(),
                m.years.len(),
                m.outputs.len() + 1,
                cfg.output_dir.display()
            );
            for f in &m.failures {
                eprintln!("  year {} failed in {}: {}", f.year, f.stage, f.error);
            }
            ExitCode::from(outcome.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
