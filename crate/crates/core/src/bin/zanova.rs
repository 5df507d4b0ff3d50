use clap::Parser;
use zanova::cli::{execute, Cli};

fn main() {
    std::process::exit(execute(&Cli::parse()));
}
