use clap::Parser;
use jaitts_cli::{exit, log_level, run, Cli};

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(log_level(&cli))
        .parse_default_env()
        .target(env_logger::Target::Stderr)
        .init();
    let stdout = std::io::stdout();
    let code = match run(cli, &mut stdout.lock()) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
