//! End-to-end tests for the command-line surface: exit codes, file
//! outputs, determinism of the CSV table, and the behaviour of the
//! negative-control systems.

use std::fs;

use tfred_cli::commands::{
    cmd_check, cmd_converge, cmd_list, run_condition_checks, EXIT_FAILED, EXIT_OK,
};
use tfred_cli::config::RunConfig;
use tfred_cli::run;
use tfred_core::conditions::Verdict;
use tfred_core::examples::get_example_with;

#[test]
fn list_shows_every_example() {
    let (exit, text) = cmd_list();
    assert_eq!(exit, EXIT_OK);
    assert_eq!(text.lines().count(), 6, "header plus five systems:\n{text}");
    for name in [
        "mm_reversible_small_e0",
        "mm_irrev_slow_k2",
        "comp_inhibition_small_e0",
        "maltose_transport",
        "comp_inhibition_2d",
    ] {
        assert!(text.contains(name), "{text}");
    }
    assert_eq!(run(&["tfred", "list"]), EXIT_OK);
}

#[test]
fn check_writes_run_config_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let code = run(&["tfred", "check", "--system", "linear_toy", "--out", out]);
    assert_eq!(code, EXIT_OK);

    let cfg_text = fs::read_to_string(dir.path().join("run.cfg")).unwrap();
    let recovered: RunConfig = cfg_text.parse().unwrap();
    assert_eq!(recovered.system, "linear_toy");
    assert_eq!(recovered.out_dir.as_deref(), Some(dir.path()));

    let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("all_certified = true"), "{report}");
}

#[test]
fn jordan_control_fails_check() {
    assert_eq!(
        run(&["tfred", "check", "--system", "jordan_block"]),
        EXIT_FAILED
    );
}

#[test]
fn usage_errors_exit_with_code_two() {
    assert_eq!(run(&["tfred", "check", "--system", "no_such_system"]), 2);
    assert_eq!(
        run(&["tfred", "check", "--system", "linear_toy", "--set", "k1"]),
        2
    );
    assert_eq!(
        run(&[
            "tfred", "converge", "--system", "linear_toy", "--eps", "0.001,0.01"
        ]),
        2
    );
    assert_eq!(run(&["tfred", "check"]), 2, "missing --system");
    assert_eq!(run(&["tfred", "frobnicate"]), 2, "unknown subcommand");
}

#[test]
fn converge_tables_are_byte_identical_across_runs() {
    let sweep = |dir: &std::path::Path| {
        let cfg = RunConfig {
            system: "linear_toy".into(),
            eps_list: vec![1e-1, 1e-2],
            t_end: 10.0,
            out_dir: Some(dir.to_path_buf()),
            ..RunConfig::default()
        };
        let (exit, text) = cmd_converge(&cfg).unwrap();
        assert_eq!(exit, EXIT_OK, "{text}");
        fs::read(dir.join("table.csv")).unwrap()
    };
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let first = sweep(d1.path());
    let second = sweep(d2.path());
    assert_eq!(first, second, "CSV output must be reproducible");
    let text = String::from_utf8(first).unwrap();
    assert!(
        text.starts_with("eps,sup_err,tail_err,n_steps_full,n_steps_reduced,wall_ms"),
        "{text}"
    );
    for line in text.lines().skip(1) {
        assert!(line.ends_with(",0.000"), "timing should be zeroed: {line}");
    }
}

#[test]
fn reversible_mm_converges_under_default_flags() {
    let cfg = RunConfig {
        system: "mm_reversible_small_e0".into(),
        ..RunConfig::default()
    };
    let (exit, text) = cmd_converge(&cfg).unwrap();
    assert_eq!(exit, EXIT_OK, "{text}");
    assert!(text.contains("sup error strictly decreasing in eps: yes"), "{text}");
    assert!(text.contains("tail error within factor 1 of sup error: yes"), "{text}");
}

#[test]
fn converge_refuses_to_sweep_an_uncertified_system() {
    let cfg = RunConfig {
        system: "jordan_block".into(),
        eps_list: vec![1e-1, 1e-2],
        t_end: 5.0,
        ..RunConfig::default()
    };
    let (exit, text) = cmd_converge(&cfg).unwrap();
    assert_eq!(exit, EXIT_FAILED);
    assert!(text.contains("--force"), "{text}");
}

#[test]
fn oscillatory_control_fails_the_tail_check_even_when_forced() {
    // The secular phase drift keeps the error oscillating through the
    // tail window, where the denser tail grid finds a larger maximum
    // than the sup grid; the default full-length window is needed for
    // the oscillation to develop.
    let cfg = RunConfig {
        system: "oscillatory_nonexample".into(),
        force: true,
        ..RunConfig::default()
    };
    let (exit, text) = cmd_converge(&cfg).unwrap();
    assert_eq!(exit, EXIT_FAILED, "{text}");
    assert!(text.contains("tail error within factor 1 of sup error: no"), "{text}");
    assert!(text.contains("sup error strictly decreasing in eps: yes"), "{text}");
}

#[test]
fn shrunken_region_check_fails_with_a_flux_witness() {
    let ex = get_example_with("shrunken_cis", &[]).unwrap();
    let report = run_condition_checks(&ex, &RunConfig::default());
    match report.get("CIS") {
        Some(Verdict::Failed { witness, .. }) => {
            assert!(!witness.is_empty(), "witness point expected");
        }
        other => panic!("expected CIS failure, got {other:?}"),
    }
    let cfg = RunConfig { system: "shrunken_cis".into(), ..RunConfig::default() };
    let (exit, text) = cmd_check(&cfg).unwrap();
    assert_eq!(exit, EXIT_FAILED);
    assert!(text.contains("CIS = failed"), "{text}");
}

#[test]
fn maltose_check_passes_and_names_the_skipped_chart_condition() {
    let cfg = RunConfig { system: "maltose_transport".into(), ..RunConfig::default() };
    let (exit, text) = cmd_check(&cfg).unwrap();
    assert_eq!(exit, EXIT_OK, "{text}");
    assert!(text.contains("GP = skipped"), "{text}");
    assert!(text.contains("continuation curve"), "{text}");
}

#[test]
fn config_file_feeds_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    let cfg = RunConfig {
        system: "linear_toy".into(),
        eps_list: vec![1e-1, 1e-2],
        t_end: 10.0,
        ..RunConfig::default()
    };
    fs::write(&path, cfg.to_string()).unwrap();
    let code = run(&["tfred", "check", "--config", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
}

#[test]
fn parameter_overrides_reach_the_model() {
    // Doubling s0 moves the reversible stationary point to
    // s* = s0 / 2 under unit rate constants; the check still certifies.
    let ex = get_example_with(
        "mm_reversible_small_e0",
        &[("s0".to_string(), 2.0)],
    )
    .unwrap();
    let report = run_condition_checks(&ex, &RunConfig::default());
    assert!(report.all_certified(), "{report}");
    let cfg = RunConfig {
        system: "mm_reversible_small_e0".into(),
        overrides: vec![("s0".to_string(), 2.0)],
        ..RunConfig::default()
    };
    let (exit, _) = cmd_check(&cfg).unwrap();
    assert_eq!(exit, EXIT_OK);
}
