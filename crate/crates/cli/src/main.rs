// SPDX-License-Identifier: Apache-2.0

use std::process::ExitCode;

use clap::Parser;
use ctxfpga_cli::{run, Cli, EXIT_OK, EXIT_VERIFY};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(report) => {
            print!("{}", report.render(cli.format));
            let written = match &cli.out {
                Some(dir) => report.write_files(dir),
                None => Ok(()),
            };
            match written {
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
                Ok(()) if report.failed => EXIT_VERIFY,
                Ok(()) => EXIT_OK,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
