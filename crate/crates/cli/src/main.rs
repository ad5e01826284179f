mod args;
mod commands;
mod common;
mod error;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use error::Result;
use sogtok_core::manifest::RunManifest;

fn run(cli: Cli) -> Result<(RunManifest, Option<std::path::PathBuf>)> {
    Ok(match &cli.command {
        Command::Train(a) => (commands::train(a)?, Some(a.out.clone())),
        Command::Tokenize(a) => (commands::tokenize(a, cli.jobs)?, Some(a.out.clone())),
        Command::GenCorpus(a) => (commands::gen_corpus(a, cli.jobs)?, Some(a.out.clone())),
        Command::GenPrompts(a) => (commands::gen_prompts(a)?, Some(a.out.clone())),
        Command::Eval(a) => (commands::eval(a)?, Some(a.out.clone())),
        Command::Stats(a) => (commands::stats(a, cli.jobs)?, Some(a.out.clone())),
        Command::Replay(a) => (commands::replay(a, cli.jobs)?, None),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok((manifest, Some(dir))) => {
            println!(
                "{}: wrote {} files and {}",
                manifest.command,
                manifest.outputs.len(),
                commands::manifest_path(&dir).display()
            );
            ExitCode::SUCCESS
        }
        Ok((_, None)) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
