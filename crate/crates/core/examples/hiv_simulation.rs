//! Within-host HIV model with age-since-infection of infected cells.
//!
//! cargo run --release --example hiv_simulation

use agestruct::hiv::{hiv_bounds, hiv_simulate, HivParams, HivState};
use agestruct::{make_grid, AgeProfile};

fn main() -> agestruct::Result<()> {
    let g = make_grid(30.0, 1500)?;
    // s, d, k, c, p(a), delta(a), delta0
    let p = HivParams::new(
        10.0,
        0.1,
        0.02,
        3.0,
        AgeProfile::from_fn(g, |a| 5.0 * (1.0 - (-a).exp())),
        AgeProfile::from_fn(g, |a| 0.5 + 0.05 * a),
        0.5,
    )?;
    let x0 = HivState {
        t: 100.0,
        v: 1.0,
        i: AgeProfile::zeros(g, 1),
    };
    let b = hiv_bounds(&x0, &p)?;
    println!(
        "T in [{:.4}, {:.4}], V <= {:.4}, effective loss d1 = {:.4}",
        b.t_minus, b.t_plus, b.v_cap, b.d_1
    );

    let traj = hiv_simulate(&x0, &p, &g, 30.0)?;
    println!("{:>6} {:>10} {:>10} {:>10}", "t", "T", "V", "infected");
    for n in (0..traj.len()).step_by(150) {
        let st = &traj.states[n];
        println!(
            "{:6.1} {:10.4} {:10.4} {:10.4}",
            traj.diagnostics[n].t, st.t, st.v, traj.diagnostics[n].total_mass
        );
    }
    let within = traj
        .states
        .iter()
        .all(|s| s.t >= b.t_minus - 1e-9 && s.t <= b.t_plus + 1e-9 && s.v <= b.v_cap + 1e-9);
    println!("trajectory stays within the bounds: {within}");
    Ok(())
}
