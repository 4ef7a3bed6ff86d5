//! Command-line driver. Every subcommand is a pure function of its input
//! files, flags, and seed: rerunning a command writes byte-identical
//! outputs, and the effective configuration is echoed into a manifest.

mod attrib_common;
mod build_corpus;
mod config;
mod eval_attrib;
mod eval_av;
mod report_cmd;
mod train_attrib;
mod train_embed;
mod util;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "qattr", version, about = "Stylometric character embeddings and quotation attribution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw plays or annotated novels into a canonical corpus.
    BuildCorpus(build_corpus::Args),
    /// Train the character embedder on a built play corpus.
    TrainEmbed(train_embed::Args),
    /// Authorship-verification AUC under the scene/play/CC/CQ protocols.
    EvalAv(eval_av::Args),
    /// Train quotation-attribution scorers, one per cross-validation fold.
    TrainAttrib(train_attrib::Args),
    /// Attribute quotes with trained scorers and report accuracy.
    EvalAttrib(eval_attrib::Args),
    /// Render tables and comparisons from stored run artifacts.
    Report(report_cmd::Args),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::BuildCorpus(args) => build_corpus::run(&args),
        Command::TrainEmbed(args) => train_embed::run(&args),
        Command::EvalAv(args) => eval_av::run(&args),
        Command::TrainAttrib(args) => train_attrib::run(&args),
        Command::EvalAttrib(args) => eval_attrib::run(&args),
        Command::Report(args) => report_cmd::run(&args),
    };
    if let Err(errors) = result {
        for line in &errors {
            eprintln!("error: {line}");
        }
        std::process::exit(1);
    }
}
