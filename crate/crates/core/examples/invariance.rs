//! Interior and boundary regions cut by the end of the infectivity kernel.
//!
//! cargo run --release --example invariance

use agestruct::invariance::{a_star, invariance_check, BoundaryChecks};
use agestruct::sir::{sir_simulate, SirParams, SirState};
use agestruct::{make_grid, AgeProfile};

fn main() -> agestruct::Result<()> {
    let g = make_grid(40.0, 2000)?;
    // infectious only before age 2
    let beta = AgeProfile::from_fn(g, |a| if a < 2.0 - 1e-9 { 1.5 } else { 0.0 });
    let astar = a_star(&beta)?;
    println!("kernel support ends at a* = {}", astar.value());
    let p = SirParams::new(1.0, 0.5, 1.0, beta.clone(), AgeProfile::constant(g, 1.0), 1.0)?;

    for (label, lo, hi) in [("young infected", 0.0, 1.0), ("old infected", 2.5, 3.5)] {
        let x0 = SirState {
            s: 1.0,
            i: AgeProfile::from_fn(g, |a| if a >= lo && a < hi { 1.0 } else { 0.0 }),
        };
        let traj = sir_simulate(&x0, &p, &g, 20.0)?;
        let rep = invariance_check(
            &traj,
            astar,
            1e-12 * x0.i.l1_norm(),
            &BoundaryChecks {
                kernel: Some(&beta),
                decay_rate: Some(1.0),
            },
        )?;
        println!(
            "{label}: starts in {:?}, stays: {}, min mass below a* {:.3e}, final S {:.4}",
            rep.initial_region,
            rep.first_flip.is_none(),
            rep.min_mass,
            traj.last().s
        );
    }
    Ok(())
}
