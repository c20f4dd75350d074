//! styleflow: temporally coherent video and spherical-image stylization.
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 data error
//! (I/O, formats, manifests), 3 numeric failure.

mod commands;

use clap::Parser;

use styleflow_core::Error;

#[derive(Parser)]
#[command(name = "styleflow", version, about = "Coherent video and spherical stylization")]
struct Cli {
    #[command(subcommand)]
    command: commands::Command,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 1,
        Error::Numeric(_) => 3,
        _ => 2,
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are not usage errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}
