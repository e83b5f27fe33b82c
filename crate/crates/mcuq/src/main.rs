use clap::Parser;

use mcuq::{Cli, EXIT_USAGE};

fn main() {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; anything else is a
            // usage error under the exit-code contract.
            use clap::error::ErrorKind;
            let _ = e.print();
            match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => std::process::exit(0),
                _ => std::process::exit(EXIT_USAGE),
            }
        }
    };
    if let Err(err) = mcuq::run(cli, argv) {
        eprintln!("error: {:#}", err.source);
        std::process::exit(err.code);
    }
}
