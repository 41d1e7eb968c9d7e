//! Nonlinear general model: certify the order assumptions by sampling,
//! then classify initial data whose trajectories are monotone in time.
//!
//! cargo run --release --example general_model

use agestruct::agefn::AgeFunction;
use agestruct::general::{
    assumption_probe, trajectory_monotone_check, GeneralParams, GeneralState, ScalarResponse, SeparableSpec,
};
use agestruct::{make_grid, AgeProfile};

fn main() -> agestruct::Result<()> {
    let g = make_grid(20.0, 1000)?;

    // crowding lowers mortality's weight, birth stops at age 3
    let crowded = SeparableSpec::scalar(
        AgeFunction::constant(1.0),
        ScalarResponse::InverseLinear { scale: 0.5 },
        AgeFunction::Table {
            nodes: vec![0.0, 3.0, 3.0, 20.0],
            values: vec![2.0, 2.0, 0.0, 0.0],
        },
        ScalarResponse::Constant { value: 1.0 },
    );
    let p = GeneralParams::separable(g, &crowded)?;
    let probe = assumption_probe(&p, 5.0, 64, 1)?;
    println!("certified: {}, shift gamma = {:?}", probe.certified, probe.gamma);

    // birth falls with population size
    let suppressed = SeparableSpec::scalar(
        AgeFunction::constant(1.0),
        ScalarResponse::Constant { value: 1.0 },
        AgeFunction::constant(2.0),
        ScalarResponse::Exponential { rate: -3.0 },
    );
    let q = GeneralParams::separable(g, &suppressed)?;
    let probe = assumption_probe(&q, 5.0, 64, 1)?;
    if let Some(cx) = &probe.counterexample {
        println!("not certified: {} with margin {:.3e}", cx.kind, cx.margin);
    }

    let linear = SeparableSpec::scalar(
        AgeFunction::constant(1.0),
        ScalarResponse::Constant { value: 1.0 },
        AgeFunction::constant(3.0),
        ScalarResponse::Constant { value: 1.0 },
    );
    let r = GeneralParams::separable(g, &linear)?;
    for rate in [2.0, 0.5] {
        let u0 = GeneralState {
            u: AgeProfile::from_fn(g, |a| (-rate * a).exp()),
        };
        let rep = trajectory_monotone_check(&u0, &r, &g, 2.0)?;
        println!(
            "u0 = e^(-{rate} a): {:?} (verified on the run: {})",
            rep.classification, rep.verified
        );
    }
    Ok(())
}
