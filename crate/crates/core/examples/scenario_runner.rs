//! Runs a JSON scenario through the same entry point as the command line
//! tool and prints the check verdicts and a grid refinement table.
//!
//! cargo run --release --example scenario_runner [config.json] [output-dir]

use std::path::PathBuf;

use agestruct::scenario::{convergence_table, parse_config, run, Command, RunOptions};

const DEFAULT: &str = r#"{
  "model": "sir",
  "grid": {"a_max": 20, "n_cells": 400},
  "horizon": 5,
  "params": {"gamma": 1, "nu_S": 0.5, "eta": 1, "beta": {"const": 1}, "nu_I": {"const": 1}},
  "initial": {"S": 1, "i": {"nodes": [0, 1, 1, 20], "values": [1, 1, 0, 0]}},
  "checks": ["sandwich", "conservation", "invariance"]
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let text = match args.next() {
        Some(path) => std::fs::read_to_string(path)?,
        None => DEFAULT.to_string(),
    };
    let output_dir = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("agestruct-example"));
    let scenario = parse_config(&text)?;

    let outcome = run(
        &scenario,
        Command::Simulate,
        &RunOptions {
            output_dir: output_dir.clone(),
            quiet: true,
        },
    )?;
    for c in &outcome.checks {
        println!("{:<20} {:?}  worst margin {:.3e}", c.name, c.verdict, c.worst_margin);
    }
    println!("artifacts in {}", output_dir.display());

    let table = convergence_table(&scenario, 3)?;
    println!("{:>6} {:>10} {:>14} {:>14}", "cells", "da", "residual", "error in S");
    for row in &table.rows {
        println!(
            "{:>6} {:>10.5} {:>14.4e} {:>14}",
            row.n_cells,
            row.da,
            row.conservation_residual.unwrap_or(f64::NAN),
            row.series_error.map_or("-".into(), |e| format!("{e:.4e}"))
        );
    }
    println!("observed orders: {:?}", table.series_orders);
    Ok(())
}
