use clap::Parser;

fn main() {
    let cli = bellaudit_cli::Cli::parse();
    std::process::exit(bellaudit_cli::run(cli));
}
