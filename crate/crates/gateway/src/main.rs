use clap::Parser;
use symwrap_gateway::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
