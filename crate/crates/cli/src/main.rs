use clap::Parser;
use finsler_cli::{commands, report, Cli};

fn main() {
    let cli = Cli::parse();
    let outcome = commands::configure_threads().and_then(|()| commands::run(&cli.command));
    match outcome {
        Ok(value) => print!("{}", report::render(&value)),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
