//! Binary entry point; all logic lives in [`graphcube::cli`].

use clap::Parser;

fn main() {
    let cli = graphcube::cli::Cli::parse();
    if let Err(e) = graphcube::cli::run(cli) {
        eprintln!("graphcube: {e}");
        std::process::exit(1);
    }
}
