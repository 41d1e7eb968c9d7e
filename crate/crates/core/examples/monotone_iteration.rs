//! Builds the solution of a frozen SIR system as the limit of an
//! increasing sequence started from a verified subsolution, and runs the
//! renewal iteration for the boundary value.
//!
//! cargo run --release --example monotone_iteration

use agestruct::comparison::{
    check_subsolution, monotone_iterate, transport_candidate, volterra_iterate_b, IterateOptions,
};
use agestruct::sir::{sir_frozen_simulate, SirModel, SirParams};
use agestruct::{make_grid, AgeProfile};

fn main() -> agestruct::Result<()> {
    let g = make_grid(10.0, 500)?;
    let p = SirParams::new(
        1.0,
        0.5,
        1.0,
        AgeProfile::from_fn(g, |a| (-0.3 * a).exp()),
        AgeProfile::constant(g, 1.0),
        1.0,
    )?;
    let i0 = AgeProfile::from_fn(g, |a| (1.0 - a / 10.0).max(0.0));
    let s = 2.5;
    let horizon = 1.0;

    let model = SirModel::frozen(p.clone(), i0.clone(), s)?;
    let start = transport_candidate(&model, horizon)?;
    let sub = check_subsolution(&model, &start, 1e-9 * (1.0 + i0.max_abs()))?;
    println!("transported data is a subsolution: {}", sub.passed);

    let rep = monotone_iterate(&model, &start, horizon, &IterateOptions::default())?;
    println!(
        "converged {} after {} iterations in {} windows, gamma = {:.3}, every pair increasing: {}",
        rep.converged,
        rep.iterations,
        rep.windows,
        rep.gamma,
        rep.all_increasing()
    );

    let direct = sir_frozen_simulate(&i0, s, &p, &g, horizon)?;
    let dist = rep
        .fixed_point
        .states
        .iter()
        .zip(&direct.states)
        .map(|(a, b)| a.i.sup_distance(&b.i).unwrap())
        .fold(0.0, f64::max);
    println!("distance to direct stepping: {dist:.2e}");

    let steps = g.steps_for(horizon)?;
    let vol = volterra_iterate_b(&i0, s, &p, &g, horizon, 12, &vec![0.0; steps + 1])?;
    for (k, b) in vol.iterates.iter().enumerate() {
        println!("renewal iterate {k:2}: B(t_end) = {:.8}", b[steps]);
    }
    println!("exact discrete boundary value: {:.8}", vol.limit[steps]);
    Ok(())
}
