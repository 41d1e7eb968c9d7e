//! Acceptance criteria run as one binary, printing a pass/fail line per
//! criterion. Exits nonzero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use agestruct::agefn::AgeFunction;
use agestruct::comparison::{
    check_subsolution, monotone_iterate, transport_candidate, volterra_iterate_b, IterateOptions, OrderVerdict,
};
use agestruct::general::{
    assumption_probe, general_simulate, random_profile, trajectory_monotone_check, GeneralParams, GeneralState,
    ScalarResponse, SeparableSpec, TimeMonotonicity,
};
use agestruct::hiv::{hiv_bounds, hiv_frozen_simulate, hiv_simulate, HivParams, HivState};
use agestruct::invariance::{a_star, boundary_explicit, invariance_check, AStar, BoundaryChecks, Region};
use agestruct::scenario::{parse_config, run, Command, RunOptions};
use agestruct::sir::{sir_bounds, sir_frozen_simulate, sir_simulate, SirModel, SirParams, SirState};
use agestruct::spectral::{conservation_residual, solve_lambda_hiv, solve_lambda_sir, spectral_sir};
use agestruct::{make_grid, AgeGrid, AgeProfile, ModelState, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn order_tol(scale: f64) -> f64 {
    1e-9 * (1.0 + scale)
}

fn indicator(g: AgeGrid, lo: f64, hi: f64) -> AgeProfile {
    // half-open [lo, hi) on nodes
    AgeProfile::from_fn(g, move |a| if a >= lo - 1e-9 && a < hi - 1e-9 { 1.0 } else { 0.0 })
}

fn generic_sir(g: AgeGrid) -> SirParams {
    SirParams::new(
        1.0,
        0.5,
        1.0,
        AgeProfile::constant(g, 1.0),
        AgeProfile::constant(g, 1.0),
        1.0,
    )
    .unwrap()
}

fn unit_hiv(g: AgeGrid, p: f64) -> HivParams {
    HivParams::new(
        1.0,
        1.0,
        1.0,
        1.0,
        AgeProfile::constant(g, p),
        AgeProfile::constant(g, 1.0),
        1.0,
    )
    .unwrap()
}

fn flat<S: ModelState>(s: &S) -> Vec<f64> {
    let mut v = s.scalars();
    v.extend_from_slice(s.profile().values());
    v
}

/// Largest `lower - upper - tol` over steps, nodes and compartments.
fn worst_order_violation<S: ModelState>(lo: &Trajectory<S>, hi: &Trajectory<S>, extra: f64) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for (a, b) in lo.states.iter().zip(&hi.states) {
        let (fa, fb) = (flat(a), flat(b));
        let scale = fa.iter().chain(&fb).fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = order_tol(scale) + extra;
        for (x, y) in fa.iter().zip(&fb) {
            worst = worst.max(x - y - tol);
        }
    }
    worst
}

fn criterion_1() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for n in [4000, 8000] {
        let g = make_grid(40.0, n).unwrap();
        let p = SirParams::new(
            1.0,
            1.0,
            1.0,
            AgeProfile::constant(g, 1.0),
            AgeProfile::constant(g, 1.0),
            1.0,
        )
        .unwrap();
        let t0 = Instant::now();
        let lam = solve_lambda_sir(2.0, &p, &g).map_err(|e| e.to_string())?;
        let dt = t0.elapsed().as_secs_f64();
        ok &= (lam - 1.0).abs() < 1e-8 && dt < 1.0;
        notes.push(format!("SIR n={n}: |lambda-1|={:.1e} ({dt:.3}s)", (lam - 1.0).abs()));
    }
    let g = make_grid(40.0, 4000).unwrap();
    let p = HivParams::new(
        1.0,
        1.0,
        1.0,
        1.0,
        AgeProfile::constant(g, 4.0),
        AgeProfile::constant(g, 1.0),
        1.0,
    )
    .unwrap();
    let t0 = Instant::now();
    let lam = solve_lambda_hiv(1.0, &p, &g).map_err(|e| e.to_string())?;
    let dt = t0.elapsed().as_secs_f64();
    ok &= (lam - 1.0).abs() < 1e-8 && dt < 1.0;
    notes.push(format!("HIV: |lambda-1|={:.1e} ({dt:.3}s)", (lam - 1.0).abs()));
    check(ok, notes.join("; "))
}

fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let mut res = Vec::new();
    for n in [4000, 8000] {
        let g = make_grid(40.0, n).unwrap();
        let p = generic_sir(g);
        let i0 = indicator(g, 0.0, 1.0);
        let traj = sir_frozen_simulate(&i0, 2.0, &p, &g, 2.0).map_err(|e| e.to_string())?;
        let sd = spectral_sir(2.0, &p, &g).map_err(|e| e.to_string())?;
        res.push(conservation_residual(&traj, &sd).map_err(|e| e.to_string())?);
    }
    let dt = t0.elapsed().as_secs_f64();
    let ratio = res[0] / res[1];
    check(
        res[0] <= 0.05 && (1.7..=2.3).contains(&ratio) && dt < 5.0,
        format!(
            "residual {:.4e} at dt=0.01, {:.4e} at dt=0.005, ratio {ratio:.3} ({dt:.2}s)",
            res[0], res[1]
        ),
    )
}

fn criterion_3() -> Outcome {
    let t0 = Instant::now();
    let g = make_grid(40.0, 4000).unwrap();
    let tol = 1e-6 + 5.0 * g.da();
    let horizon = 20.0;
    let i0 = indicator(g, 0.0, 1.0);

    let p = generic_sir(g);
    let x0 = SirState { s: 1.0, i: i0.clone() };
    let b = sir_bounds(&x0, &p).map_err(|e| e.to_string())?;
    let mid = sir_simulate(&x0, &p, &g, horizon).map_err(|e| e.to_string())?;
    let lo = sir_frozen_simulate(&i0, b.s_minus, &p, &g, horizon).map_err(|e| e.to_string())?;
    let hi = sir_frozen_simulate(&i0, b.s_plus, &p, &g, horizon).map_err(|e| e.to_string())?;
    let sir_v = worst_order_violation(&lo, &mid, 0.0).max(worst_order_violation(&mid, &hi, 0.0));

    let q = unit_hiv(g, 1.0);
    let y0 = HivState {
        t: 1.0,
        v: 0.0,
        i: i0.clone(),
    };
    let hb = hiv_bounds(&y0, &q).map_err(|e| e.to_string())?;
    let hmid = hiv_simulate(&y0, &q, &g, horizon).map_err(|e| e.to_string())?;
    let hlo = hiv_frozen_simulate(&i0, 0.0, hb.t_minus, &q, &g, horizon).map_err(|e| e.to_string())?;
    let hhi = hiv_frozen_simulate(&i0, 0.0, hb.t_plus, &q, &g, horizon).map_err(|e| e.to_string())?;
    let hiv_v = worst_order_violation(&hlo, &hmid, 0.0).max(worst_order_violation(&hmid, &hhi, 0.0));
    let dt = t0.elapsed().as_secs_f64();
    // violations below are measured beyond the order tolerance; <= 0 means none
    check(
        sir_v <= tol && hiv_v <= tol && dt < 30.0,
        format!(
            "SIR S in [{}, {}], worst violation {:.2e}; HIV T in [{}, {}], worst violation {:.2e}; tol {tol:.2e} ({dt:.1}s)",
            b.s_minus, b.s_plus, sir_v.max(0.0), hb.t_minus, hb.t_plus, hiv_v.max(0.0)
        ),
    )
}

fn criterion_4() -> Outcome {
    let t0 = Instant::now();
    let g = make_grid(10.0, 1000).unwrap();
    let p = generic_sir(g);
    let i0 = indicator(g, 0.0, 1.0);
    let model = SirModel::frozen(p.clone(), i0.clone(), 3.0).map_err(|e| e.to_string())?;
    let cand = transport_candidate(&model, 1.0).map_err(|e| e.to_string())?;
    let rep = monotone_iterate(&model, &cand, 1.0, &IterateOptions::default()).map_err(|e| e.to_string())?;
    let direct = sir_frozen_simulate(&i0, 3.0, &p, &g, 1.0).map_err(|e| e.to_string())?;
    let mut dist = 0.0f64;
    for (a, b) in rep.fixed_point.states.iter().zip(&direct.states) {
        dist = dist.max(a.i.sup_distance(&b.i).unwrap()).max((a.s - b.s).abs());
    }
    let dt = t0.elapsed().as_secs_f64();
    check(
        rep.converged && dist <= 1e-8 && dt < 10.0,
        format!(
            "sup distance {dist:.2e} after {} iterations in {} windows ({dt:.2}s)",
            rep.iterations, rep.windows
        ),
    )
}

fn random_knots(rng: &mut ChaCha8Rng, g: AgeGrid, lo: f64, hi: f64) -> AgeProfile {
    let knots: Vec<f64> = (0..=6).map(|_| lo + (hi - lo) * rng.gen::<f64>()).collect();
    let a_max = g.a_max();
    AgeProfile::from_fn(g, |a| {
        let x = a / a_max * 6.0;
        let k = (x.floor() as usize).min(5);
        let t = x - k as f64;
        knots[k] * (1.0 - t) + knots[k + 1] * t
    })
}

fn increasing(flags: &[OrderVerdict]) -> usize {
    flags
        .iter()
        .filter(|f| matches!(f, OrderVerdict::Increasing | OrderVerdict::Equal))
        .count()
}

fn criterion_5() -> Outcome {
    let g = make_grid(10.0, 200).unwrap();
    let horizon = 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut psi_pairs, mut psi_ok, mut vol_pairs, mut vol_ok) = (0, 0, 0, 0);
    let mut unverified = 0;
    for draw in 0..20u64 {
        let delta = 0.2 + rng.gen::<f64>();
        let beta = random_knots(&mut rng, g, 0.0, 2.0);
        let nu = random_knots(&mut rng, g, delta, delta + 1.0);
        let eta = 0.5 + 1.5 * rng.gen::<f64>();
        let s = 0.5 + 2.5 * rng.gen::<f64>();
        let p = SirParams::new(1.0, 0.5, eta, beta, nu, delta).map_err(|e| e.to_string())?;
        let i0 = random_knots(&mut rng, g, 0.0, 1.0);

        let model = SirModel::frozen(p.clone(), i0.clone(), s).map_err(|e| e.to_string())?;
        let cand = transport_candidate(&model, horizon).map_err(|e| e.to_string())?;
        let sub = check_subsolution(&model, &cand, order_tol(i0.max_abs())).map_err(|e| e.to_string())?;
        if !sub.passed {
            unverified += 1;
            continue;
        }
        let opts = IterateOptions {
            seed: draw,
            ..IterateOptions::default()
        };
        let rep = monotone_iterate(&model, &cand, horizon, &opts).map_err(|e| e.to_string())?;
        psi_pairs += rep.monotone_flags.len();
        psi_ok += increasing(&rep.monotone_flags);

        let steps = g.steps_for(horizon).unwrap();
        let vol = volterra_iterate_b(&i0, s, &p, &g, horizon, 10, &vec![0.0; steps + 1]).map_err(|e| e.to_string())?;
        vol_pairs += vol.monotone_flags.len();
        vol_ok += increasing(&vol.monotone_flags);
    }
    check(
        unverified == 0 && psi_ok == psi_pairs && vol_ok == vol_pairs && psi_pairs > 0,
        format!(
            "fixed-point iterates {psi_ok}/{psi_pairs} ordered, renewal iterates {vol_ok}/{vol_pairs} ordered, {unverified} unverified starts"
        ),
    )
}

fn criterion_6() -> Outcome {
    let g = make_grid(40.0, 4000).unwrap();
    let horizon = 20.0;
    let beta = indicator(g, 0.0, 2.0);
    let astar = a_star(&beta).map_err(|e| e.to_string())?;
    if astar != AStar::Finite(2.0) {
        return Err(format!("a* = {astar:?}, expected 2"));
    }
    let p =
        SirParams::new(1.0, 0.5, 1.0, beta.clone(), AgeProfile::constant(g, 1.0), 1.0).map_err(|e| e.to_string())?;

    // boundary region: i0 on (a*, a*+1]
    let i0 = AgeProfile::from_fn(g, |a| if a > 2.0 + 1e-9 && a <= 3.0 + 1e-9 { 1.0 } else { 0.0 });
    let x0 = SirState { s: 1.0, i: i0.clone() };
    let traj = sir_simulate(&x0, &p, &g, horizon).map_err(|e| e.to_string())?;
    let surv = p.survival();
    let n0 = i0.l1_norm();
    let (mut dev, mut decay_excess, mut closed_form) = (0.0f64, f64::NEG_INFINITY, 0.0f64);
    let mut expected = i0.clone();
    for (n, st) in traj.states.iter().enumerate() {
        let t = g.time(n);
        if n > 0 {
            expected = agestruct::operator::transport_step(&expected, &surv, &[0.0])
                .unwrap()
                .profile;
        }
        dev = dev.max(st.i.sup_distance(&expected).unwrap());
        // closed form i0(a - t) e^{-t} for unit removal
        for j in 0..g.len() {
            let a = g.node(j);
            let v = if a - t > 2.0 + 1e-9 && a - t <= 3.0 + 1e-9 {
                (-t).exp()
            } else {
                0.0
            };
            closed_form = closed_form.max((st.i.get(j, 0) - v).abs());
        }
        decay_excess = decay_excess.max(st.i.l1_norm() / ((-t).exp() * n0) - 1.0);
    }
    let explicit_end = boundary_explicit(&i0, &surv, horizon).unwrap();
    dev = dev.max(traj.last().i.sup_distance(&explicit_end).unwrap());
    let rep = invariance_check(
        &traj,
        astar,
        1e-12 * n0,
        &BoundaryChecks {
            kernel: Some(&beta),
            decay_rate: Some(1.0),
        },
    )
    .map_err(|e| e.to_string())?;
    let boundary_ok = rep.passed
        && rep.initial_region == Region::Boundary
        && dev <= 1e-10
        && closed_form <= 1e-10
        && decay_excess <= 1e-9;

    // interior region
    let y0 = SirState {
        s: 1.0,
        i: indicator(g, 0.0, 1.0),
    };
    let itraj = sir_simulate(&y0, &p, &g, horizon).map_err(|e| e.to_string())?;
    let tol_mass = 1e-12 * y0.i.l1_norm();
    let irep = invariance_check(&itraj, astar, tol_mass, &BoundaryChecks::default()).map_err(|e| e.to_string())?;
    let interior_ok = irep.passed && irep.initial_region == Region::Interior && irep.min_mass > tol_mass;

    // HIV with free virus
    let q = HivParams::new(
        1.0,
        1.0,
        1.0,
        1.0,
        indicator(g, 0.0, 2.0),
        AgeProfile::constant(g, 1.0),
        1.0,
    )
    .map_err(|e| e.to_string())?;
    let z0 = HivState {
        t: 1.0,
        v: 0.5,
        i: AgeProfile::zeros(g, 1),
    };
    let htraj = hiv_simulate(&z0, &q, &g, horizon).map_err(|e| e.to_string())?;
    let hastar = a_star(&q.p_prod).map_err(|e| e.to_string())?;
    let hrep = invariance_check(&htraj, hastar, 1e-12 * 0.5, &BoundaryChecks::default()).map_err(|e| e.to_string())?;
    let hiv_ok = hrep.passed && hrep.initial_region == Region::Interior;

    check(
        boundary_ok && interior_ok && hiv_ok,
        format!(
            "boundary run: deviation {dev:.1e}, closed form {closed_form:.1e}, decay excess {decay_excess:.1e}; interior min mass {:.2e} > {tol_mass:.0e}; HIV min mass {:.2e}, stays {:?}",
            irep.min_mass, hrep.min_mass, hrep.initial_region
        ),
    )
}

fn criterion_7() -> Outcome {
    let pairs = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // frozen SIR and HIV: exact order
    let g = make_grid(10.0, 200).unwrap();
    let horizon = 2.0;
    let p = generic_sir(g);
    let q = unit_hiv(g, 1.0);
    let (mut sir_bad, mut hiv_bad) = (0, 0);
    let mut worst_frozen = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let lo = random_profile(&mut rng, g, 1, 2.0);
        let hi = lo.try_add(&random_profile(&mut rng, g, 1, 2.0)).unwrap();
        let a = sir_frozen_simulate(&lo, 3.0, &p, &g, horizon).map_err(|e| e.to_string())?;
        let b = sir_frozen_simulate(&hi, 3.0, &p, &g, horizon).map_err(|e| e.to_string())?;
        let v = worst_order_violation(&a, &b, 0.0);
        worst_frozen = worst_frozen.max(v);
        sir_bad += usize::from(v > 0.0);

        let (v_lo, v_hi) = (rng.gen::<f64>(), 1.0 + rng.gen::<f64>());
        let a = hiv_frozen_simulate(&lo, v_lo, 2.0, &q, &g, horizon).map_err(|e| e.to_string())?;
        let b = hiv_frozen_simulate(&hi, v_hi, 2.0, &q, &g, horizon).map_err(|e| e.to_string())?;
        let v = worst_order_violation(&a, &b, 0.0);
        worst_frozen = worst_frozen.max(v);
        hiv_bad += usize::from(v > 0.0);
    }

    // general model with probe-certified parameters
    let gg = make_grid(10.0, 100).unwrap();
    let spec = SeparableSpec::scalar(
        AgeFunction::constant(1.0),
        ScalarResponse::InverseLinear { scale: 0.5 },
        AgeFunction::Table {
            nodes: vec![0.0, 3.0, 3.0, 10.0],
            values: vec![2.0, 2.0, 0.0, 0.0],
        },
        ScalarResponse::Constant { value: 1.0 },
    );
    let gp = GeneralParams::separable(gg, &spec).map_err(|e| e.to_string())?;
    let probe = assumption_probe(&gp, 5.0, 64, 7).map_err(|e| e.to_string())?;
    if !probe.certified {
        return Err(format!(
            "probe did not certify the general model: {:?}",
            probe.counterexample
        ));
    }
    let mut gen_bad = 0;
    let mut worst_general = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let lo = random_profile(&mut rng, gg, 1, 2.0);
        let hi = lo.try_add(&random_profile(&mut rng, gg, 1, 2.0)).unwrap();
        let a = general_simulate(&GeneralState { u: lo }, &gp, &gg, horizon).map_err(|e| e.to_string())?;
        let b = general_simulate(&GeneralState { u: hi }, &gp, &gg, horizon).map_err(|e| e.to_string())?;
        let v = worst_order_violation(&a, &b, 5.0 * gg.da());
        worst_general = worst_general.max(v);
        gen_bad += usize::from(v > 0.0);
    }
    check(
        sir_bad + hiv_bad + gen_bad == 0,
        format!(
            "unordered pairs: frozen SIR {sir_bad}/{pairs}, frozen HIV {hiv_bad}/{pairs}, general {gen_bad}/{pairs}; worst excess frozen {worst_frozen:.1e}, general {worst_general:.1e}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let g = make_grid(20.0, 2000).unwrap();
    let spec = SeparableSpec::scalar(
        AgeFunction::constant(1.0),
        ScalarResponse::Constant { value: 1.0 },
        AgeFunction::constant(3.0),
        ScalarResponse::Constant { value: 1.0 },
    );
    let p = GeneralParams::separable(g, &spec).map_err(|e| e.to_string())?;
    let horizon = 2.0;
    let fast = GeneralState {
        u: AgeProfile::from_fn(g, |a| (-2.0 * a).exp()),
    };
    let rep = trajectory_monotone_check(&fast, &p, &g, horizon).map_err(|e| e.to_string())?;
    let traj = general_simulate(&fast, &p, &g, horizon).map_err(|e| e.to_string())?;
    let mut reversal = 0.0f64;
    for w in traj.states.windows(2) {
        let tol = order_tol(w[1].u.max_abs());
        for (a, b) in w[0].u.values().iter().zip(w[1].u.values()) {
            reversal = reversal.max(a - b - tol);
        }
    }
    let slow = GeneralState {
        u: AgeProfile::from_fn(g, |a| (-0.5 * a).exp()),
    };
    let slow_rep = trajectory_monotone_check(&slow, &p, &g, horizon).map_err(|e| e.to_string())?;
    check(
        rep.classification == TimeMonotonicity::Increasing
            && reversal <= 0.0
            && slow_rep.classification == TimeMonotonicity::Neither,
        format!(
            "e^(-2a): {:?}, largest step-over-step decrease beyond tolerance {:.1e}; e^(-a/2): {:?}",
            rep.classification,
            reversal.max(0.0),
            slow_rep.classification
        ),
    )
}

const DETERMINISM_CONFIGS: [(&str, &str); 3] = [
    (
        "sir",
        r#"{
        "model": "sir", "grid": {"a_max": 10, "n_cells": 200}, "horizon": 4,
        "params": {"gamma": 1, "nu_S": 0.5, "eta": 1, "beta": {"const": 1}, "nu_I": {"const": 1}},
        "initial": {"S": 1, "i": {"nodes": [0, 1, 1, 10], "values": [1, 1, 0, 0]}},
        "checks": ["sandwich", "conservation", "invariance", "monotone_pairs", "convergence"],
        "seed": 11, "options": {"pairs": 5}
    }"#,
    ),
    (
        "hiv",
        r#"{
        "model": "hiv", "grid": {"a_max": 10, "n_cells": 200}, "horizon": 4,
        "params": {"s": 1, "d": 1, "k": 1, "c": 1, "p": {"const": 1}, "delta": {"const": 1}},
        "initial": {"T": 1, "V": 0.2, "i": {"nodes": [0, 1, 1, 10], "values": [1, 1, 0, 0]}},
        "checks": ["sandwich", "conservation", "invariance", "monotone_pairs"],
        "seed": 3, "options": {"pairs": 5}
    }"#,
    ),
    (
        "general",
        r#"{
        "model": "general", "grid": {"a_max": 10, "n_cells": 100}, "horizon": 2,
        "params": {"dim": 1, "mu0": [{"const": 1}], "chi": {"kind": "inverse_linear", "scale": 0.5},
                   "beta0": [{"nodes": [0, 3, 3, 10], "values": [2, 2, 0, 0]}], "psi": {"kind": "constant", "value": 1},
                   "alpha": [{"const": 1}], "sigma": [{"const": 1}]},
        "initial": {"u": [{"nodes": [0, 10], "values": [1, 0]}]},
        "checks": ["assumption_probe", "trajectory_monotone", "monotone_pairs"],
        "seed": 9, "options": {"pairs": 5, "probe_samples": 16}
    }"#,
    ),
];

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn criterion_9() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for (name, text) in DETERMINISM_CONFIGS {
        let sc = parse_config(text).map_err(|e| e.to_string())?;
        let mut commands = vec![Command::Simulate, Command::Compare, Command::Convergence { levels: 2 }];
        if name != "general" {
            commands.extend([Command::Spectral, Command::Bounds, Command::Invariance]);
        } else {
            commands.push(Command::Probe);
        }
        for cmd in commands {
            let mut outputs = Vec::new();
            for rep in 0..2 {
                let dir = root.path().join(format!("{name}-{}-{rep}", cmd.name()));
                let opts = RunOptions {
                    output_dir: dir.clone(),
                    quiet: true,
                };
                run(&sc, cmd, &opts).map_err(|e| format!("{name} {}: {e}", cmd.name()))?;
                outputs.push(read_dir_bytes(&dir));
            }
            if outputs[0] != outputs[1] {
                return Err(format!("{name} {}: artifacts differ between runs", cmd.name()));
            }
            compared += outputs[0].len();
        }
    }
    Ok(format!("{compared} artifacts byte-identical across repeated runs"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("characteristic roots", criterion_1),
        ("conservation law", criterion_2),
        ("sandwich between frozen bounds", criterion_3),
        ("fixed point equals direct stepping", criterion_4),
        ("increasing iterates", criterion_5),
        ("invariant regions", criterion_6),
        ("monotone semiflow", criterion_7),
        ("trajectory monotonicity", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let out = f();
        let secs = t0.elapsed().as_secs_f64();
        match out {
            Ok(msg) => println!("criterion {} ({name}): PASS [{secs:.2}s] {msg}", k + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL [{secs:.2}s] {msg}", k + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
