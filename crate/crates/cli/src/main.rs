use clap::Parser;
use landscape_cli::commands::{run, Cli};

fn main() {
    // Parse errors (unknown subcommands or flags) print usage and exit with 2.
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log)
        .format_timestamp(None)
        .init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
