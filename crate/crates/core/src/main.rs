use clap::Parser;

fn main() {
    let cli = exoplore::cli::Cli::parse();
    if let Err(e) = exoplore::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
