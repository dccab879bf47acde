//! Subcommand implementations. Each command returns its exit code together
//! with the text it prints, so the whole surface is testable without
//! spawning processes; file output happens only when the configuration
//! names an output directory.
//!
//! Exit code contract: 0 on success, 1 on a mathematical failure (a
//! condition that does not certify, a sweep that does not converge), 2 on
//! configuration or usage errors. Commands do not panic.

use std::fmt::Write as _;
use std::fs;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tfred_core::conditions::{
    check_cis, check_lc_1d, check_tf0_tfi, check_tfii, decay_envelope,
    find_stationary_points, fit_ambient_certificate, verify_lyapunov, ConditionReport,
    LyapunovCertificate, Verdict,
};
use tfred_core::examples::{
    example_names, get_example_with, oracle_reduced_rhs, ExampleError, ExampleSystem,
    LyapunovPlan,
};
use tfred_core::integrate::{convergence_sweep, IntegratorConfig, Method};
use tfred_core::manifold::{sample_manifold, Chart, TOL_Y};
use tfred_core::reduction::{
    verify_decomposition, ReducedField, DECOMPOSITION_RESIDUAL_TOL,
};

use crate::config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Manifold samples drawn for each certification check.
const CHECK_SAMPLES: usize = 30;
/// Face samples for the invariant-region check.
const CIS_FACE_SAMPLES: usize = 30;
/// Chart-domain samples for the graph-parametrization check.
const GP_SAMPLES: usize = 200;

/// A usage-level failure: the run could not even be attempted.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<ExampleError> for UsageError {
    fn from(e: ExampleError) -> Self {
        UsageError(e.to_string())
    }
}

impl From<std::io::Error> for UsageError {
    fn from(e: std::io::Error) -> Self {
        UsageError(format!("i/o error: {e}"))
    }
}

fn resolve(cfg: &RunConfig) -> Result<ExampleSystem, UsageError> {
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    Ok(get_example_with(&cfg.system, &cfg.overrides)?)
}

fn write_output(cfg: &RunConfig, name: &str, content: &str) -> Result<(), UsageError> {
    if let Some(dir) = &cfg.out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(name), content)?;
    }
    Ok(())
}

fn record_run_config(cfg: &RunConfig) -> Result<(), UsageError> {
    write_output(cfg, "run.cfg", &cfg.to_string())
}

// ---------------------------------------------------------------------------
// list

pub struct SystemRow {
    pub name: String,
    pub dim: usize,
    pub chart: &'static str,
    pub description: String,
}

fn chart_kind(ex: &ExampleSystem) -> &'static str {
    match ex.manifold.chart {
        Chart::Graph { .. } => "graph",
        Chart::Curve1d { .. } => "curve",
        Chart::Implicit => "implicit",
    }
}

/// Rows for the worked examples in registry order.
pub fn registry_rows() -> Vec<SystemRow> {
    example_names()
        .iter()
        .filter_map(|name| get_example_with(name, &[]).ok())
        .map(|ex| SystemRow {
            name: ex.name.to_string(),
            dim: ex.system.dim,
            chart: chart_kind(&ex),
            description: ex.description.to_string(),
        })
        .collect()
}

/// Fixed-width table over the given rows; the header line is always
/// present so an empty registry still renders something parseable.
pub fn render_system_rows(rows: &[SystemRow]) -> String {
    let mut out = String::from("name                      dim  chart  description\n");
    for r in rows {
        let _ = writeln!(out, "{:<25} {:>3}  {:<5}  {}", r.name, r.dim, r.chart, r.description);
    }
    out
}

pub fn cmd_list() -> (i32, String) {
    (EXIT_OK, render_system_rows(&registry_rows()))
}

// ---------------------------------------------------------------------------
// check

fn ambient_sampling_seed(cfg: &RunConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed)
}

fn verdict_from_error(e: impl std::fmt::Display) -> Verdict {
    Verdict::Failed { witness: Vec::new(), detail: e.to_string() }
}

/// Graph-parametrization check: embed chart-domain samples and confirm
/// they land on the variety mu = 0. Curve charts have no global graph to
/// check, which the report states explicitly.
fn check_gp(ex: &ExampleSystem, rng: &mut ChaCha8Rng) -> Verdict {
    match &ex.manifold.chart {
        Chart::Graph { domain, .. } => {
            let tol = 10.0 * TOL_Y;
            let mut worst = 0.0f64;
            let mut witness = None;
            for w in domain.sample_interior(GP_SAMPLES, rng) {
                let x = ex.manifold.embed(w.as_slice());
                let res = ex.manifold.mu_residual(x.as_slice());
                if res > worst {
                    worst = res;
                    witness = Some(x);
                }
            }
            if worst <= tol {
                Verdict::CertifiedAtSamples { samples: GP_SAMPLES, margin: tol - worst }
            } else {
                Verdict::Failed {
                    witness: witness.map(|x| x.as_slice().to_vec()).unwrap_or_default(),
                    detail: format!(
                        "chart embedding leaves the variety mu = 0 (residual {worst:.3e})"
                    ),
                }
            }
        }
        Chart::Curve1d { .. } => Verdict::Skipped {
            reason: "slow manifold shipped as a continuation curve; no graph chart to verify"
                .into(),
        },
        Chart::Implicit => Verdict::Skipped {
            reason: "slow manifold given implicitly; no graph chart to verify".into(),
        },
    }
}

fn check_stationary(ex: &ExampleSystem, rf: &ReducedField) -> Verdict {
    match find_stationary_points(rf, &ex.manifold, ex.region()) {
        Ok(found) if found.len() == 1 => {
            let q_norm = rf.eval(found[0].as_slice()).map(|q| q.amax()).unwrap_or(f64::NAN);
            Verdict::CertifiedAtSamples { samples: 1, margin: q_norm }
        }
        Ok(found) => Verdict::Failed {
            witness: found.first().map(|x| x.as_slice().to_vec()).unwrap_or_default(),
            detail: format!(
                "found {} stationary points of the reduced flow in the region, expected exactly one",
                found.len()
            ),
        },
        Err(e) => verdict_from_error(e),
    }
}

fn check_lyapunov_plan(
    ex: &ExampleSystem,
    rf: &ReducedField,
) -> (Verdict, Option<LyapunovCertificate>) {
    let build = match &ex.lyapunov {
        LyapunovPlan::Curve { z } => check_lc_1d(rf, &ex.manifold, z),
        LyapunovPlan::Ambient { phi, z, a, k } => {
            fit_ambient_certificate(rf, &ex.manifold, phi.clone(), z, *a, *k, 400)
        }
        LyapunovPlan::None => {
            return (
                Verdict::Skipped {
                    reason: "no stability certificate shipped for this system".into(),
                },
                None,
            )
        }
    };
    match build {
        Ok(cert) => match verify_lyapunov(&cert, rf, &ex.manifold, 80) {
            Ok(report) if report.all_certified() => {
                (Verdict::CertifiedAtSamples { samples: 80, margin: cert.nu }, Some(cert))
            }
            Ok(report) => {
                let detail = report
                    .entries
                    .iter()
                    .filter(|(_, v)| !v.is_certified())
                    .map(|(n, v)| format!("{n}: {v}"))
                    .collect::<Vec<_>>()
                    .join("; ");
                (
                    Verdict::Failed {
                        witness: cert.z.as_slice().to_vec(),
                        detail: format!("certificate did not verify ({detail})"),
                    },
                    Some(cert),
                )
            }
            Err(e) => (verdict_from_error(e), Some(cert)),
        },
        Err(e) => (verdict_from_error(e), None),
    }
}

/// The full certification pipeline for one system. Every hypothesis gets
/// an entry; skipped ones are named with a reason.
pub fn run_condition_checks(ex: &ExampleSystem, cfg: &RunConfig) -> ConditionReport {
    let mut rng = ambient_sampling_seed(cfg);
    let rf = ex.reduced_field();
    let mut report = ConditionReport::default();

    let dec_verdict = match sample_manifold(&ex.manifold, CHECK_SAMPLES) {
        Ok(sample) => {
            let mut points = sample.points;
            points.extend(ex.region().sample_interior(CHECK_SAMPLES, &mut rng));
            let dr = verify_decomposition(&ex.decomposition, &ex.system, &points);
            if dr.ok {
                Verdict::CertifiedAtSamples {
                    samples: dr.n_samples,
                    margin: DECOMPOSITION_RESIDUAL_TOL - dr.max_rel_residual,
                }
            } else {
                Verdict::Failed { witness: Vec::new(), detail: dr.to_string() }
            }
        }
        Err(e) => verdict_from_error(e),
    };
    report.push("decomposition", dec_verdict);

    match check_tf0_tfi(&ex.system, &ex.decomposition, &ex.manifold, CHECK_SAMPLES) {
        Ok((tf0, tfi)) => {
            report.push("TF0", tf0);
            report.push("TFI", tfi);
        }
        Err(e) => {
            report.push("TF0", verdict_from_error(&e));
            report.push("TFI", verdict_from_error(&e));
        }
    }

    match check_tfii(&ex.system, &ex.manifold, CHECK_SAMPLES) {
        Ok(v) => report.push("TFII", v),
        Err(e) => report.push("TFII", verdict_from_error(e)),
    }

    report.push(
        "CIS",
        check_cis(&ex.system, ex.region(), &ex.cis_eps, CIS_FACE_SAMPLES),
    );
    report.push("GP", check_gp(ex, &mut rng));
    report.push("stationary", check_stationary(ex, &rf));
    let (lc, _) = check_lyapunov_plan(ex, &rf);
    report.push("LC", lc);
    report
}

fn report_text(ex: &ExampleSystem, cfg: &RunConfig, report: &ConditionReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "system: {} ({})", ex.name, ex.description);
    let _ = writeln!(out, "dimension: {}, chart: {}", ex.system.dim, chart_kind(ex));
    let _ = writeln!(out, "eps checked for invariance: {:?}", ex.cis_eps);
    let _ = writeln!(out, "sampling seed: {}", cfg.seed);
    let _ = writeln!(out);
    let _ = write!(out, "{report}");
    let _ = writeln!(out);
    let _ = writeln!(out, "[results]");
    for (name, verdict) in &report.entries {
        let status = match verdict {
            Verdict::CertifiedAtSamples { .. } => "certified",
            Verdict::Failed { .. } => "failed",
            Verdict::Skipped { .. } => "skipped",
        };
        let _ = writeln!(out, "{name} = {status}");
    }
    let _ = writeln!(out, "all_certified = {}", report.all_certified());
    out
}

pub fn cmd_check(cfg: &RunConfig) -> Result<(i32, String), UsageError> {
    let ex = resolve(cfg)?;
    record_run_config(cfg)?;
    let report = run_condition_checks(&ex, cfg);
    let text = report_text(&ex, cfg, &report);
    write_output(cfg, "report.txt", &text)?;
    let exit = if report.all_certified() { EXIT_OK } else { EXIT_FAILED };
    Ok((exit, text))
}

// ---------------------------------------------------------------------------
// reduce

pub fn cmd_reduce(cfg: &RunConfig) -> Result<(i32, String), UsageError> {
    let ex = resolve(cfg)?;
    record_run_config(cfg)?;
    let rf = ex.reduced_field();
    let mut out = String::new();
    let _ = writeln!(out, "system: {} ({})", ex.name, ex.description);

    let sample = match sample_manifold(&ex.manifold, 20) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(out, "manifold sampling failed: {e}");
            write_output(cfg, "report.txt", &out)?;
            return Ok((EXIT_FAILED, out));
        }
    };
    let dr = verify_decomposition(&ex.decomposition, &ex.system, &sample.points);
    let _ = writeln!(out, "{dr}");

    let mut oracle_dev: Option<f64> = None;
    let _ = writeln!(out);
    let _ = writeln!(out, "reduced field q = Q h1 at manifold samples:");
    for x in sample.points.iter().take(8) {
        match rf.eval(x.as_slice()) {
            Ok(q) => {
                if let Ok(reference) = oracle_reduced_rhs(&ex, x.as_slice()) {
                    let dev = (0..q.len())
                        .map(|i| (q[i] - reference[i]).abs() / (1.0 + reference[i].abs()))
                        .fold(0.0f64, f64::max);
                    let best = oracle_dev.get_or_insert(0.0);
                    *best = best.max(dev);
                }
                let coords: Vec<String> =
                    x.iter().map(|v| format!("{v:+.6e}")).collect();
                let values: Vec<String> =
                    q.iter().map(|v| format!("{v:+.6e}")).collect();
                let _ = writeln!(out, "  x = [{}]", coords.join(", "));
                let _ = writeln!(out, "  q = [{}]", values.join(", "));
            }
            Err(e) => {
                let _ = writeln!(out, "  evaluation failed: {e}");
                write_output(cfg, "report.txt", &out)?;
                return Ok((EXIT_FAILED, out));
            }
        }
    }
    let _ = writeln!(out);
    match oracle_dev {
        Some(dev) => {
            let _ = writeln!(
                out,
                "worst relative deviation from the closed-form reduction: {dev:.3e}"
            );
        }
        None => {
            let _ = writeln!(out, "no closed-form reduction shipped for comparison");
        }
    }
    let ok = dr.ok && oracle_dev.map_or(true, |d| d < 1e-6);
    write_output(cfg, "report.txt", &out)?;
    Ok((if ok { EXIT_OK } else { EXIT_FAILED }, out))
}

// ---------------------------------------------------------------------------
// lyapunov

pub fn cmd_lyapunov(cfg: &RunConfig) -> Result<(i32, String), UsageError> {
    let ex = resolve(cfg)?;
    record_run_config(cfg)?;
    let rf = ex.reduced_field();
    let (verdict, cert) = check_lyapunov_plan(&ex, &rf);
    let mut out = String::new();
    let _ = writeln!(out, "system: {} ({})", ex.name, ex.description);
    if let Some(cert) = &cert {
        let _ = writeln!(out, "{cert}");
        let _ = writeln!(out, "contraction constant c = {:.6}", cert.contraction_constant());
        let _ = writeln!(out, "decay envelope gamma(tau) for phi0 = 1:");
        for tau in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0] {
            if let Ok(g) = decay_envelope(cert, 1.0, tau) {
                let _ = writeln!(out, "  tau = {tau:>5}: {g:.6e}");
            }
        }
    }
    let _ = writeln!(out, "verdict: {verdict}");
    write_output(cfg, "certificate.txt", &out)?;
    let exit = if verdict.is_certified() { EXIT_OK } else { EXIT_FAILED };
    Ok((exit, out))
}

// ---------------------------------------------------------------------------
// converge

pub fn cmd_converge(cfg: &RunConfig) -> Result<(i32, String), UsageError> {
    let ex = resolve(cfg)?;
    record_run_config(cfg)?;

    if !cfg.force {
        let report = run_condition_checks(&ex, cfg);
        if !report.all_certified() {
            let mut out = report_text(&ex, cfg, &report);
            let _ = writeln!(
                out,
                "\ncondition checks failed; not sweeping (pass --force to override)"
            );
            write_output(cfg, "report.txt", &out)?;
            return Ok((EXIT_FAILED, out));
        }
    }

    let rf = ex.reduced_field();
    let int_cfg = IntegratorConfig {
        rtol: cfg.rtol,
        atol: cfg.atol,
        method: Method::Rosenbrock,
        ..IntegratorConfig::default()
    };
    let table = convergence_sweep(
        &ex.system,
        &rf,
        &ex.manifold,
        ex.x0.as_slice(),
        &cfg.eps_list,
        cfg.tau0,
        cfg.t_end,
        &int_cfg,
    );

    let csv = table.to_csv(cfg.timing);
    write_output(cfg, "table.csv", &csv)?;

    let decreasing = table.sup_strictly_decreasing();
    let tail_ok = table.tail_within(cfg.tail_factor);
    let mut summary = String::new();
    let _ = writeln!(summary, "system: {}", ex.name);
    let _ = writeln!(summary, "window: [{}, {}]", cfg.tau0, cfg.t_end);
    let _ = writeln!(
        summary,
        "sup error strictly decreasing in eps: {}",
        if decreasing { "yes" } else { "no" }
    );
    let _ = writeln!(
        summary,
        "tail error within factor {} of sup error: {}",
        cfg.tail_factor,
        if tail_ok { "yes" } else { "no" }
    );
    match table.empirical_slope() {
        Some(slope) => {
            let _ = writeln!(summary, "empirical order in eps: {slope:.3}");
        }
        None => {
            let _ = writeln!(summary, "empirical order in eps: n/a");
        }
    }
    for row in &table.rows {
        if let Some(reason) = &row.failed {
            let _ = writeln!(summary, "row eps = {:.3e} failed: {}", row.eps, reason);
        }
    }
    write_output(cfg, "summary.txt", &summary)?;

    let mut out = summary;
    let _ = writeln!(out);
    let _ = write!(out, "{csv}");
    let exit = if decreasing && tail_ok { EXIT_OK } else { EXIT_FAILED };
    Ok((exit, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_renders_the_five_examples() {
        let rows = registry_rows();
        assert_eq!(rows.len(), 5);
        let text = render_system_rows(&rows);
        assert_eq!(text.lines().count(), 6);
        assert!(text.lines().next().unwrap().starts_with("name"));
        for name in example_names() {
            assert!(text.contains(name), "missing {name}");
        }
    }

    #[test]
    fn list_rendering_scales_with_the_registry() {
        let empty = render_system_rows(&[]);
        assert_eq!(empty.lines().count(), 1, "header only");
        let mut rows = registry_rows();
        rows.push(SystemRow {
            name: "user_plugin".into(),
            dim: 7,
            chart: "graph",
            description: "registered by a downstream crate".into(),
        });
        let text = render_system_rows(&rows);
        assert_eq!(text.lines().count(), 7);
        assert!(text.contains("user_plugin"));
    }

    #[test]
    fn check_passes_on_the_linear_toy() {
        let cfg = RunConfig { system: "linear_toy".into(), ..RunConfig::default() };
        let (exit, text) = cmd_check(&cfg).unwrap();
        assert_eq!(exit, EXIT_OK, "{text}");
        assert!(text.contains("all_certified = true"));
    }

    #[test]
    fn check_fails_on_the_jordan_control() {
        let cfg = RunConfig { system: "jordan_block".into(), ..RunConfig::default() };
        let (exit, text) = cmd_check(&cfg).unwrap();
        assert_eq!(exit, EXIT_FAILED, "{text}");
        assert!(text.contains("TFI = failed"), "{text}");
    }

    #[test]
    fn unknown_system_is_a_usage_error() {
        let cfg = RunConfig { system: "perpetuum_mobile".into(), ..RunConfig::default() };
        let err = cmd_check(&cfg).unwrap_err();
        assert!(err.0.contains("unknown system"), "{err}");
    }
}
