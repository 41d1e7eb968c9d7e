use agestruct::scenario::{convergence_table, parse_config, run, Command, RunOptions};

fn sir_config(extra_initial: &str, beta: &str, s0: f64, n_cells: usize, horizon: f64) -> String {
    format!(
        r#"{{
        "model": "sir", "grid": {{"a_max": 20, "n_cells": {n_cells}}}, "horizon": {horizon},
        "params": {{"gamma": 1, "nu_S": 0.5, "eta": 1, "beta": {beta}, "nu_I": {{"const": 1}}}},
        "initial": {{"S": {s0}, "i": {extra_initial}}}
    }}"#
    )
}

#[test]
fn frozen_conservation_residual_is_first_order() {
    let text = sir_config(
        r#"{"nodes": [0, 1, 1, 20], "values": [1, 1, 0, 0]}"#,
        r#"{"const": 1}"#,
        1.0,
        1000,
        2.0,
    );
    let table = convergence_table(&parse_config(&text).unwrap(), 3).unwrap();
    assert_eq!(table.conservation_orders.len(), 2);
    for o in &table.conservation_orders {
        assert!((0.8..=1.2).contains(o), "orders {:?}", table.conservation_orders);
    }
    assert!(table.passed());
}

#[test]
fn pure_transport_is_exact_on_every_grid() {
    // kernel vanishes beyond a = 2 and the infected start beyond it; S sits at its equilibrium
    let text = sir_config(
        r#"{"nodes": [0, 2, 2, 3, 3, 20], "values": [0, 0, 1, 1, 0, 0]}"#,
        r#"{"nodes": [0, 2, 2, 20], "values": [1, 1, 0, 0]}"#,
        2.0,
        200,
        5.0,
    );
    let table = convergence_table(&parse_config(&text).unwrap(), 3).unwrap();
    for row in &table.rows[..2] {
        assert!(row.profile_error.unwrap() < 1e-12, "{row:?}");
        assert!(row.series_error.unwrap() < 1e-12, "{row:?}");
    }
    assert!(table.passed());
}

#[test]
fn hiv_virus_series_is_first_order() {
    let text = r#"{
        "model": "hiv", "grid": {"a_max": 20, "n_cells": 200}, "horizon": 5,
        "params": {"s": 1, "d": 1, "k": 1, "c": 1, "p": {"const": 1}, "delta": {"const": 1}},
        "initial": {"T": 1, "V": 0.2, "i": {"nodes": [0, 1, 1, 20], "values": [1, 1, 0, 0]}}
    }"#;
    let table = convergence_table(&parse_config(text).unwrap(), 3).unwrap();
    assert_eq!(table.series, "V");
    assert_eq!(table.series_orders.len(), 1);
    assert!(
        (0.8..=1.2).contains(&table.series_orders[0]),
        "{:?}",
        table.series_orders
    );
}

#[test]
fn compare_passes_on_epidemic_and_general_models() {
    let tmp = tempfile::tempdir().unwrap();
    let sir = sir_config(
        r#"{"nodes": [0, 1, 1, 20], "values": [1, 1, 0, 0]}"#,
        r#"{"const": 1}"#,
        1.0,
        200,
        4.0,
    );
    let general = r#"{
        "model": "general", "grid": {"a_max": 10, "n_cells": 100}, "horizon": 2,
        "params": {"dim": 2,
                   "mu0": [{"const": 1}, {"const": 0}, {"const": 0}, {"const": 1.5}],
                   "chi": {"kind": "inverse_linear", "scale": 0.5},
                   "beta0": [{"const": 0}, {"const": 1}, {"const": 0.5}, {"const": 0}],
                   "psi": {"kind": "constant", "value": 1},
                   "alpha": [{"const": 1}, {"const": 0}, {"const": 0}, {"const": 1}],
                   "sigma": [{"const": 1}, {"const": 0}, {"const": 0}, {"const": 1}]},
        "initial": {"u": [{"const": 0.3}, {"nodes": [0, 10], "values": [1, 0]}]},
        "options": {"pairs": 4}
    }"#;
    for (name, text) in [("sir", sir.as_str()), ("general", general)] {
        let sc = parse_config(text).unwrap();
        let opts = RunOptions {
            output_dir: tmp.path().join(name),
            quiet: true,
        };
        if name == "general" {
            let probe = run(&sc, Command::Probe, &opts).unwrap();
            assert!(probe.checks[0].passed(), "{}", probe.checks[0].details);
        }
        let out = run(&sc, Command::Compare, &opts).unwrap();
        for c in &out.checks {
            assert!(c.passed(), "{name}: {} failed: {}", c.name, c.details);
        }
        assert_eq!(out.exit_code(), 0);
    }
}

#[test]
fn commands_outside_their_model_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = parse_config(&sir_config(r#"{"const": 0}"#, r#"{"const": 1}"#, 1.0, 100, 1.0)).unwrap();
    let opts = RunOptions {
        output_dir: tmp.path().to_path_buf(),
        quiet: true,
    };
    let err = run(&sc, Command::Probe, &opts).unwrap_err().to_string();
    assert!(err.contains("general"), "{err}");
}

#[test]
fn boundary_invariance_check_through_runner() {
    let tmp = tempfile::tempdir().unwrap();
    let text = sir_config(
        r#"{"nodes": [0, 2.05, 2.05, 3, 3, 20], "values": [0, 0, 1, 1, 0, 0]}"#,
        r#"{"nodes": [0, 2, 2, 20], "values": [1, 1, 0, 0]}"#,
        1.0,
        400,
        10.0,
    );
    let sc = parse_config(&text).unwrap();
    let opts = RunOptions {
        output_dir: tmp.path().to_path_buf(),
        quiet: true,
    };
    let out = run(&sc, Command::Invariance, &opts).unwrap();
    let inv = &out.checks[0];
    assert!(inv.passed(), "{}", inv.details);
    assert_eq!(inv.details["initial_region"], "boundary");
    assert!(inv.details["explicit_deviation"].as_f64().unwrap() <= 1e-10);
}
