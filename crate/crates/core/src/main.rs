use clap::Parser;

fn main() {
    std::process::exit(hle::cli::run(hle::cli::Cli::parse()));
}
