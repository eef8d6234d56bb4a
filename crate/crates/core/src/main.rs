use clap::Parser;

fn main() {
    let cli = jchm::cli::Cli::parse();
    std::process::exit(jchm::cli::run(&cli));
}
