// Copyright 2026 The Fragility Developers
// SPDX-License-Identifier: Apache-2.0

use std::process::ExitCode;

use clap::Parser;
use fragility_cli::{exit_code, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match run(&cli, &argv) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            if let Some(fragility_core::Error::Diagnostic { trajectory, .. }) = err.downcast_ref() {
                eprintln!("trajectory (k, p_hat):");
                for (k, p) in trajectory {
                    eprintln!("  {k}, {p:.4}");
                }
            }
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
