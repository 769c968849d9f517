use clap::Parser;

fn main() {
    let cli = relscene_cli::Cli::parse();
    if let Err(e) = relscene_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
