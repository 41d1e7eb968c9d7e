//! Characteristic roots of the frozen systems and the conserved
//! functional `e^{-lambda t} F(t)`.
//!
//! cargo run --release --example spectral_roots

use agestruct::hiv::HivParams;
use agestruct::sir::{sir_frozen_simulate, SirParams};
use agestruct::spectral::{conservation_residual, solve_lambda_hiv, spectral_sir};
use agestruct::{make_grid, AgeProfile};

fn main() -> agestruct::Result<()> {
    let g = make_grid(40.0, 4000)?;
    let p = SirParams::new(
        1.0,
        1.0,
        1.0,
        AgeProfile::constant(g, 1.0),
        AgeProfile::constant(g, 1.0),
        1.0,
    )?;
    // with unit kernels the root is eta S - nu, so lambda(S) = S - 1
    for s in [0.5, 1.0, 2.0, 3.0] {
        let sd = spectral_sir(s, &p, &g)?;
        println!("SIR frozen at S = {s}: lambda = {:+.10}", sd.lambda);
    }

    let i0 = AgeProfile::from_fn(g, |a| if a < 1.0 { 1.0 } else { 0.0 });
    let sd = spectral_sir(2.0, &p, &g)?;
    let traj = sir_frozen_simulate(&i0, 2.0, &p, &g, 2.0)?;
    println!(
        "conservation residual over t in [0, 2]: {:.3e}",
        conservation_residual(&traj, &sd)?
    );

    let q = HivParams::new(
        1.0,
        1.0,
        1.0,
        1.0,
        AgeProfile::constant(g, 4.0),
        AgeProfile::constant(g, 1.0),
        1.0,
    )?;
    println!("HIV frozen at T = 1: lambda = {:+.10}", solve_lambda_hiv(1.0, &q, &g)?);
    Ok(())
}
