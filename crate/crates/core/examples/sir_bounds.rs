//! Simulates the age-of-infection SIR model and checks it against the
//! frozen systems at the a priori bounds on `S`.
//!
//! cargo run --release --example sir_bounds

use agestruct::comparison::sandwich_verify;
use agestruct::sir::{sir_bounds, sir_frozen_simulate, sir_simulate, SirParams, SirState};
use agestruct::{make_grid, AgeProfile};

fn main() -> agestruct::Result<()> {
    let g = make_grid(40.0, 2000)?;
    // gamma, nu_S, eta, beta(a), nu(a), delta
    let p = SirParams::new(
        1.0,
        0.5,
        1.0,
        AgeProfile::from_fn(g, |a| 2.0 * a * (-a).exp()),
        AgeProfile::constant(g, 1.0),
        1.0,
    )?;
    let x0 = SirState {
        s: 1.0,
        i: AgeProfile::from_fn(g, |a| if a < 1.0 { 1.0 } else { 0.0 }),
    };
    let horizon = 20.0;

    let b = sir_bounds(&x0, &p)?;
    println!("S_- = {:.6}, S_+ = {:.6}, M = {:.6}", b.s_minus, b.s_plus, b.m);

    let mid = sir_simulate(&x0, &p, &g, horizon)?;
    let lo = sir_frozen_simulate(&x0.i, b.s_minus, &p, &g, horizon)?;
    let hi = sir_frozen_simulate(&x0.i, b.s_plus, &p, &g, horizon)?;

    for n in (0..mid.len()).step_by(mid.len() / 5) {
        let d = &mid.diagnostics[n];
        println!(
            "t = {:5.1}  S = {:.5}  I = {:.5}  int beta i = {:.5}",
            d.t, mid.states[n].s, d.total_mass, d.weighted_mass
        );
    }

    let rep = sandwich_verify(&lo, &mid, &hi, 1e-6 + 5.0 * g.da())?;
    println!(
        "sandwich {}: lower margin {:.3e}, upper margin {:.3e}",
        if rep.passed { "holds" } else { "fails" },
        rep.lower_margin,
        rep.upper_margin
    );
    Ok(())
}
