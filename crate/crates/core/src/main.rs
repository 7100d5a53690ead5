use clap::Parser;

fn main() {
    let cli = stable_heat::cli::Cli::parse();
    std::process::exit(stable_heat::cli::run(&cli));
}
