//! Command-line driver: argument definitions, the frame pipeline and one
//! function per subcommand.

pub mod args;
pub mod commands;
pub mod pipeline;

use anyhow::Result;
use args::{Cli, Command};

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(a) => commands::run(a),
        Command::Sonify(a) => commands::sonify(a),
        Command::SynthGen(a) => commands::synth_gen(a),
        Command::EdfCompare(a) => commands::edf_compare(a),
        Command::Eval(a) => commands::eval(a),
    }
}
