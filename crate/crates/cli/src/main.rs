use clap::Parser;

fn main() {
    let cli = polinfer_cli::Cli::parse();
    if let Err(e) = polinfer_cli::execute(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
