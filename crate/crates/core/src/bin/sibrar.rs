use clap::Parser;

fn main() {
    let cli = sibrar::cli::Cli::parse();
    if let Err(e) = sibrar::cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
