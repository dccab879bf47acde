//! Exercises the crate from the outside, the way a downstream user would:
//! a slow-fast system assembled from scratch runs through decomposition,
//! condition checks, reduction, and a convergence sweep; the shipped
//! examples are probed for the library-wide trajectory invariants.

use nalgebra::DMatrix;

use tfred_core::conditions::{check_tf0_tfi, check_tfii};
use tfred_core::dual::Dual;
use tfred_core::examples::get_example;
use tfred_core::integrate::{
    convergence_sweep, integrate, FnField, IntegratorConfig, Method,
};
use tfred_core::manifold::{fast_fiber_project, sample_manifold, Chart, SlowManifold};
use tfred_core::model::{Polytope, SmoothMap, SmoothMatMap, SystemBuilder};
use tfred_core::reduction::{verify_decomposition, Decomposition, ReducedField};

/// Fast relaxation onto the parabola y = x^2 with slow exponential decay
/// along it. Everything about this system is known in closed form, so it
/// makes a good end-to-end probe of the public API.
fn parabola_relax() -> (tfred_core::model::PerturbedSystem, SlowManifold) {
    let sys = SystemBuilder::new("parabola_relax", 2)
        .h0(|x, out| {
            out[0] = Dual::constant(0.0);
            out[1] = &(&x[0] * &x[0]) - &x[1];
        })
        .h1(|x, out| {
            out[0] = -&x[0];
            out[1] = Dual::constant(0.0);
        })
        .build();
    let p = SmoothMatMap::from_constant(2, DMatrix::from_column_slice(2, 1, &[0.0, -1.0]));
    let mu = SmoothMap::new(2, 1, |x, out| out[0] = &x[1] - &(&x[0] * &x[0]));
    let dec = Decomposition::user_supplied(p, mu).unwrap();
    let region = Polytope::from_box(&[-1.0, -0.1], &[1.0, 1.1], "ambient box").unwrap();
    let gamma = SmoothMap::new(1, 1, |w, out| out[0] = &w[0] * &w[0]);
    let domain = Polytope::from_box(&[-1.0], &[1.0], "chart domain").unwrap();
    let chart = Chart::Graph { slow: vec![0], fast: vec![1], gamma, domain };
    let mf = SlowManifold::new(dec, region, chart);
    (sys, mf)
}

#[test]
fn a_user_built_system_runs_through_the_whole_pipeline() {
    let (sys, mf) = parabola_relax();

    let sample = sample_manifold(&mf, 20).unwrap();
    let report = verify_decomposition(&mf.dec, &sys, &sample.points);
    assert!(report.ok, "{report}");

    let (tf0, tfi) = check_tf0_tfi(&sys, &mf.dec, &mf, 20).unwrap();
    assert!(tf0.is_certified(), "{tf0}");
    assert!(tfi.is_certified(), "{tfi}");
    let tfii = check_tfii(&sys, &mf, 20).unwrap();
    assert!(tfii.is_certified(), "{tfii}");

    // On y = x^2 the projection gives q = (-x, -2 x^2), the push-forward
    // of the slow decay x' = -x.
    let rf = ReducedField::new(&sys, &mf.dec);
    for x in [-0.8, -0.3, 0.5, 0.9] {
        let q = rf.eval(&[x, x * x]).unwrap();
        assert!((q[0] + x).abs() < 1e-12, "q0 at {x}: {}", q[0]);
        assert!((q[1] + 2.0 * x * x).abs() < 1e-12, "q1 at {x}: {}", q[1]);
    }

    // Reduced trajectory against the exact solution x(t) = x0 e^{-t}.
    let field = FnField {
        dim: 2,
        f: |x: &[f64], out: &mut [f64]| {
            out.copy_from_slice(rf.eval(x).unwrap().as_slice());
        },
    };
    let cfg = IntegratorConfig {
        rtol: 1e-10,
        method: Method::BogackiShampine,
        ..IntegratorConfig::default()
    };
    let traj = integrate(&field, &[0.8, 0.64], 3.0, &cfg).unwrap();
    for (t, state) in traj.times().iter().zip(traj.states()) {
        let exact = 0.8 * (-t).exp();
        assert!((state[0] - exact).abs() < 1e-8, "x error at t = {t}");
        assert!(mf.mu_residual(state.as_slice()) < 1e-9, "left the manifold at t = {t}");
    }

    // The full system converges to the reduced one as eps shrinks.
    let table = convergence_sweep(
        &sys,
        &rf,
        &mf,
        &[0.8, 0.2],
        &[1e-1, 1e-2, 1e-3],
        0.1,
        10.0,
        &IntegratorConfig::default(),
    );
    assert!(table.sup_strictly_decreasing(), "{}", table.to_csv(false));
    assert!(table.tail_within(1.0), "{}", table.to_csv(false));
}

#[test]
fn reduced_trajectories_conserve_mu_for_the_shipped_examples() {
    for name in ["mm_reversible_small_e0", "maltose_transport", "comp_inhibition_2d"] {
        let ex = get_example(name).unwrap();
        let rf = ex.reduced_field();
        let start = fast_fiber_project(&ex.system, &ex.manifold, ex.x0.as_slice()).unwrap();
        let field = FnField {
            dim: rf.dim(),
            f: |x: &[f64], out: &mut [f64]| {
                out.copy_from_slice(rf.eval(x).unwrap().as_slice());
            },
        };
        let cfg = IntegratorConfig {
            rtol: 1e-10,
            method: Method::BogackiShampine,
            ..IntegratorConfig::default()
        };
        let traj = integrate(&field, start.as_slice(), 20.0, &cfg).unwrap();
        for (t, state) in traj.times().iter().zip(traj.states()) {
            let residual = ex.manifold.mu_residual(state.as_slice());
            assert!(residual <= 1e-8, "{name}: mu residual {residual:.3e} at tau = {t}");
        }
    }
}

#[test]
fn stiff_full_integration_stays_within_the_step_budget() {
    // At eps = 1e-4 the full system is stiff with rate 1e4 on the slow
    // time scale; the implicit integrator should need well under 100x
    // the steps of the nonstiff reduced run.
    let ex = get_example("mm_reversible_small_e0").unwrap();
    let rf = ex.reduced_field();
    let table = convergence_sweep(
        &ex.system,
        &rf,
        &ex.manifold,
        ex.x0.as_slice(),
        &[1e-4],
        0.1,
        50.0,
        &IntegratorConfig::default(),
    );
    let row = &table.rows[0];
    assert!(row.failed.is_none(), "{:?}", row.failed);
    assert!(
        row.n_steps_full < 100 * row.n_steps_reduced,
        "full {} vs reduced {}",
        row.n_steps_full,
        row.n_steps_reduced
    );
}

#[test]
fn halving_eps_never_increases_the_sup_error() {
    let ex = get_example("mm_reversible_small_e0").unwrap();
    let rf = ex.reduced_field();
    let table = convergence_sweep(
        &ex.system,
        &rf,
        &ex.manifold,
        ex.x0.as_slice(),
        &[4e-2, 2e-2, 1e-2],
        0.1,
        50.0,
        &IntegratorConfig::default(),
    );
    assert!(table.sup_strictly_decreasing(), "{}", table.to_csv(false));
}
