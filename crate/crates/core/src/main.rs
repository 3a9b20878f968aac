use clap::Parser;
use pareto_diffusion::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
