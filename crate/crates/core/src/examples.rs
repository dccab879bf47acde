//! Worked example systems: classical enzyme mechanisms, a competitive
//! inhibition network, and Stiefenhofer's maltose transport model, each
//! shipped with a decomposition `h0 = P mu`, a chart for the slow manifold,
//! a compact invariant region, and an independently derived closed form of
//! the reduced equation.
//!
//! The closed-form oracles are transcriptions of hand computations and are
//! kept deliberately separate from the projection-based reduction in
//! [`crate::reduction`]; the test suite plays the two routes against each
//! other at many sample points. A second, fully independent route lifts
//! each reaction network to unreduced species coordinates by plain mass
//! action and checks that the shipped right-hand sides agree with the lift
//! under the conservation-law substitutions.
//!
//! Besides the five worked examples the registry resolves a linear
//! two-state toy and three deliberately broken control systems used to
//! exercise the failure paths of the certification pipeline.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dual::Dual;
use crate::manifold::{Chart, SlowManifold, TOL_Y};
use crate::model::{Polytope, SmoothMap, SmoothMatMap, SystemBuilder};
use crate::model::PerturbedSystem;
use crate::reduction::{decompose_structural, Decomposition, ReducedField};

/// Points whose slow-manifold residual exceeds this are rejected by
/// [`oracle_reduced_rhs`].
pub const ORACLE_RESIDUAL_TOL: f64 = 100.0 * TOL_Y;

#[derive(Debug, Error)]
pub enum ExampleError {
    #[error("unknown system '{name}'; known systems: {known}")]
    UnknownName { name: String, known: String },
    #[error("unknown parameter '{name}' for system '{system}'; valid parameters: {valid}")]
    UnknownParameter { name: String, system: String, valid: String },
    #[error("point is off the slow manifold (residual {residual:.3e}); the closed-form reduction is only defined on it")]
    OffManifold { residual: f64 },
    #[error("system '{0}' ships no closed-form reduced equation")]
    NoOracle(String),
    #[error("example construction failed: {0}")]
    Construction(String),
}

/// Closed-form reduced right-hand side, evaluated in ambient coordinates on
/// the slow manifold.
pub type ReducedOracle = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;

/// How the stability of the reduced flow should be certified.
pub enum LyapunovPlan {
    /// One-dimensional slow manifold: build the arc-length certificate
    /// around the stationary point `z`.
    Curve { z: DVector<f64> },
    /// Hand-picked ambient Lyapunov function `phi` with comparison
    /// exponent `a` and decay exponent `k`.
    Ambient { phi: SmoothMap, z: DVector<f64>, a: u32, k: f64 },
    /// No stability certificate is claimed (negative controls).
    None,
}

/// A fully assembled example: the perturbed system together with every
/// piece of data the certification pipeline consumes.
pub struct ExampleSystem {
    pub name: &'static str,
    pub description: &'static str,
    pub system: PerturbedSystem,
    pub decomposition: Decomposition,
    pub manifold: SlowManifold,
    /// Independently derived reduced equation, if one is shipped.
    pub closed_form_reduced: Option<ReducedOracle>,
    /// Closed-form stationary points of the reduced flow inside the region.
    pub closed_form_stationary: Vec<DVector<f64>>,
    pub lyapunov: LyapunovPlan,
    /// Default initial condition for convergence sweeps.
    pub x0: DVector<f64>,
    /// eps values at which the invariant-region check is claimed to hold.
    pub cis_eps: Vec<f64>,
}

impl ExampleSystem {
    pub fn region(&self) -> &Polytope {
        &self.manifold.region
    }

    pub fn reduced_field(&self) -> ReducedField {
        ReducedField::new(&self.system, &self.decomposition)
    }
}

/// Names of the worked examples, in presentation order.
pub fn example_names() -> [&'static str; 5] {
    [
        "mm_reversible_small_e0",
        "mm_irrev_slow_k2",
        "comp_inhibition_small_e0",
        "maltose_transport",
        "comp_inhibition_2d",
    ]
}

/// The linear demonstration toy and the deliberately failing controls.
pub fn control_names() -> [&'static str; 4] {
    ["linear_toy", "jordan_block", "oscillatory_nonexample", "shrunken_cis"]
}

fn params_from(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

/// Default parameter set of a registered system, or `None` for unknown
/// names. All kinetic constants and totals default to one.
pub fn default_params(name: &str) -> Option<BTreeMap<String, f64>> {
    let p = match name {
        "mm_reversible_small_e0" => params_from(&[
            ("k1", 1.0),
            ("km1", 1.0),
            ("k2", 1.0),
            ("km2", 1.0),
            ("s0", 1.0),
            ("e0", 1.0),
            ("eps_max", 0.5),
        ]),
        "mm_irrev_slow_k2" => params_from(&[
            ("k1", 1.0),
            ("km1", 1.0),
            ("k2", 1.0),
            ("e0", 1.0),
            ("s0", 1.0),
            ("eps_max", 0.5),
        ]),
        "comp_inhibition_small_e0" => params_from(&[
            ("k1", 1.0),
            ("km1", 1.0),
            ("k2", 1.0),
            ("k3", 1.0),
            ("km3", 1.0),
            ("s0", 1.0),
            ("i0", 1.0),
            ("e0", 1.0),
            ("eps_max", 0.2),
        ]),
        "maltose_transport" => params_from(&[
            ("x0", 1.0),
            ("xi0", 1.0),
            ("z0", 1.0),
            ("r0", 1.0),
            ("eps_max", 0.5),
        ]),
        "comp_inhibition_2d" => params_from(&[
            ("k1", 1.0),
            ("km1", 1.0),
            ("k2", 1.0),
            ("k3", 1.0),
            ("km3", 1.0),
            ("e0", 1.0),
            ("s0", 1.0),
            ("i0", 1.0),
            ("eps_max", 0.5),
        ]),
        "linear_toy" | "jordan_block" | "oscillatory_nonexample" | "shrunken_cis" => {
            params_from(&[("eps_max", 0.5)])
        }
        _ => return None,
    };
    Some(p)
}

/// Resolve a registered system with its default parameters.
pub fn get_example(name: &str) -> Result<ExampleSystem, ExampleError> {
    get_example_with(name, &[])
}

/// Resolve a registered system with parameter overrides applied on top of
/// the defaults. Unknown parameter names are rejected.
pub fn get_example_with(
    name: &str,
    overrides: &[(String, f64)],
) -> Result<ExampleSystem, ExampleError> {
    let mut params = default_params(name).ok_or_else(|| ExampleError::UnknownName {
        name: name.to_string(),
        known: example_names()
            .iter()
            .chain(control_names().iter())
            .copied()
            .collect::<Vec<_>>()
            .join(", "),
    })?;
    for (key, value) in overrides {
        if !params.contains_key(key.as_str()) {
            return Err(ExampleError::UnknownParameter {
                name: key.clone(),
                system: name.to_string(),
                valid: params.keys().cloned().collect::<Vec<_>>().join(", "),
            });
        }
        params.insert(key.clone(), *value);
    }
    match name {
        "mm_reversible_small_e0" => mm_reversible_small_e0(&params),
        "mm_irrev_slow_k2" => mm_irrev_slow_k2(&params),
        "comp_inhibition_small_e0" => comp_inhibition_small_e0(&params),
        "maltose_transport" => maltose_transport(&params),
        "comp_inhibition_2d" => comp_inhibition_2d(&params),
        "linear_toy" => linear_toy(&params),
        "jordan_block" => jordan_block(&params),
        "oscillatory_nonexample" => oscillatory_nonexample(&params),
        "shrunken_cis" => shrunken_cis(&params),
        _ => unreachable!("registry dispatch out of sync with default_params"),
    }
}

/// Evaluate the shipped closed-form reduction at an ambient point on the
/// slow manifold.
pub fn oracle_reduced_rhs(
    ex: &ExampleSystem,
    x: &[f64],
) -> Result<DVector<f64>, ExampleError> {
    let residual = ex.manifold.mu_residual(x);
    if residual > ORACLE_RESIDUAL_TOL {
        return Err(ExampleError::OffManifold { residual });
    }
    match &ex.closed_form_reduced {
        Some(oracle) => Ok(oracle(x)),
        None => Err(ExampleError::NoOracle(ex.name.to_string())),
    }
}

fn construction(e: impl std::fmt::Display) -> ExampleError {
    ExampleError::Construction(e.to_string())
}

/// Reversible Michaelis-Menten mechanism with small total enzyme, in
/// substrate/complex coordinates `(s, c)`. The slow manifold is the
/// substrate axis `{c = 0}`.
fn mm_reversible_small_e0(p: &BTreeMap<String, f64>) -> Result<ExampleSystem, ExampleError> {
    let (k1, km1, k2, km2) = (p["k1"], p["km1"], p["k2"], p["km2"]);
    let (s0, e0, eps_max) = (p["s0"], p["e0"], p["eps_max"]);

    let mut b = SystemBuilder::new("mm_reversible_small_e0", 2);
    for (k, v) in p {
        b = b.param(k, *v);
    }
    let system = b
        .h0(move |x, out| {
            let (s, c) = (&x[0], &x[1]);
            out[0] = (k1 * s + km1) * c;
            out[1] = -((k1 * s + km1 + k2) * c) - km2 * c * (s0 - s - c);
        })
        .h1(move |x, out| {
            let (s, c) = (&x[0], &x[1]);
            out[0] = -(k1 * e0 * s);
            out[1] = k1 * e0 * s + km2 * e0 * (s0 - s - c);
        })
        .eps_max(eps_max)
        .build();

    let pmat = SmoothMatMap::new(2, 2, 1, move |x, out| {
        let (s, c) = (&x[0], &x[1]);
        out[0] = k1 * s + km1;
        out[1] = -(k1 * s + km1 + k2 + km2 * (s0 - s - c));
    });
    let mu = SmoothMap::new(2, 1, |x, out| out[0] = x[1].clone());
    let dec = Decomposition::user_supplied(pmat, mu).map_err(construction)?;

    let region = Polytope::new(
        2,
        vec![
            (vec![-1.0, 0.0], 0.0),
            (vec![0.0, -1.0], 0.0),
            (vec![1.0, 1.0], s0),
        ],
        "substrate-complex simplex",
    )
    .map_err(construction)?;
    let domain = Polytope::from_box(&[0.0], &[s0], "substrate axis").map_err(construction)?;
    let chart = Chart::Graph {
        slow: vec![0],
        fast: vec![1],
        gamma: SmoothMap::constant(1, DVector::zeros(1)),
        domain,
    };
    let manifold = SlowManifold::new(dec.clone(), region, chart);

    // Hand-derived reduction on {c = 0}; the stationary substrate level has
    // the closed form s* = km1 km2 s0 / (k1 k2 + km1 km2).
    let oracle: ReducedOracle = Arc::new(move |x| {
        let s = x[0];
        let q1 = -e0 * ((k1 * k2 + km1 * km2) * s - km1 * km2 * s0)
            / (k1 * s + km1 + k2 + km2 * (s0 - s));
        DVector::from_vec(vec![q1, 0.0])
    });
    let s_star = km1 * km2 * s0 / (k1 * k2 + km1 * km2);
    let z = DVector::from_vec(vec![s_star, 0.0]);

    Ok(ExampleSystem {
        name: "mm_reversible_small_e0",
        description: "reversible Michaelis-Menten, small total enzyme",
        system,
        decomposition: dec,
        manifold,
        closed_form_reduced: Some(oracle),
        closed_form_stationary: vec![z.clone()],
        lyapunov: LyapunovPlan::Curve { z },
        x0: DVector::from_vec(vec![0.9 * s0, 0.05 * s0]),
        cis_eps: vec![0.0, 0.5 * eps_max, eps_max],
    })
}

/// Irreversible Michaelis-Menten mechanism with slow product formation
/// `k2 -> eps k2`. The slow manifold is the classical quasi-steady-state
/// graph c = k1 e0 s / (k1 s + km1).
fn mm_irrev_slow_k2(p: &BTreeMap<String, f64>) -> Result<ExampleSystem, ExampleError> {
    let (k1, km1, k2) = (p["k1"], p["km1"], p["k2"]);
    let (e0, s0, eps_max) = (p["e0"], p["s0"], p["eps_max"]);

    let mut b = SystemBuilder::new("mm_irrev_slow_k2", 2);
    for (k, v) in p {
        b = b.param(k, *v);
    }
    let system = b
        .h0(move |x, out| {
            let (s, c) = (&x[0], &x[1]);
            let net = k1 * (e0 - c) * s - km1 * c;
            out[0] = -&net;
            out[1] = net;
        })
        .h1(move |x, out| {
            out[0] = Dual::constant(0.0);
            out[1] = -(k2 * &x[1]);
        })
        .eps_max(eps_max)
        .build();

    // Binding is the fast reaction, product formation the slow one.
    let stoich = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 1.0, -1.0]);
    let rates = SmoothMap::new(2, 2, move |x, out| {
        let (s, c) = (&x[0], &x[1]);
        out[0] = k1 * (e0 - c) * s - km1 * c;
        out[1] = k2 * c;
    });
    let dec = decompose_structural(&stoich, &[0], &rates).map_err(construction)?;

    let region = Polytope::new(
        2,
        vec![
            (vec![-1.0, 0.0], 0.0),
            (vec![0.0, -1.0], 0.0),
            (vec![1.0, 1.0], s0),
            (vec![0.0, 1.0], e0),
        ],
        "substrate-complex region",
    )
    .map_err(construction)?;

    // The graph chart is valid up to the substrate level s_w at which the
    // manifold leaves the region through the face s + c = s0.
    let gval = move |s: f64| k1 * e0 * s / (k1 * s + km1);
    let mut lo = 0.0;
    let mut hi = s0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid + gval(mid) <= s0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s_w = lo;
    let domain = Polytope::from_box(&[0.0], &[s_w], "substrate interval").map_err(construction)?;
    let gamma = SmoothMap::new(1, 1, move |w, out| {
        out[0] = k1 * e0 * &w[0] / (k1 * &w[0] + km1);
    });
    let chart = Chart::Graph { slow: vec![0], fast: vec![1], gamma, domain };
    let manifold = SlowManifold::new(dec.clone(), region, chart);

    let oracle: ReducedOracle = Arc::new(move |x| {
        let s = x[0];
        let d = k1 * s + km1;
        let q1 = -d * k1 * k2 * e0 * s / (k1 * km1 * e0 + d * d);
        let gamma_prime = k1 * e0 * km1 / (d * d);
        DVector::from_vec(vec![q1, gamma_prime * q1])
    });
    let z = DVector::zeros(2);

    Ok(ExampleSystem {
        name: "mm_irrev_slow_k2",
        description: "irreversible Michaelis-Menten, slow product formation",
        system,
        decomposition: dec,
        manifold,
        closed_form_reduced: Some(oracle),
        closed_form_stationary: vec![z.clone()],
        lyapunov: LyapunovPlan::Curve { z },
        x0: DVector::from_vec(vec![0.4 * s0, 0.1 * e0]),
        cis_eps: vec![0.0, 0.5 * eps_max, eps_max],
    })
}

/// Competitive inhibition with small total enzyme, in coordinates
/// `(s, c1, c2)`. Both complexes collapse on the fast time scale and the
/// slow manifold is the substrate axis.
fn comp_inhibition_small_e0(p: &BTreeMap<String, f64>) -> Result<ExampleSystem, ExampleError> {
    let (k1, km1, k2, k3, km3) = (p["k1"], p["km1"], p["k2"], p["k3"], p["km3"]);
    let (s0, i0, e0, eps_max) = (p["s0"], p["i0"], p["e0"], p["eps_max"]);

    let mut b = SystemBuilder::new("comp_inhibition_small_e0", 3);
    for (k, v) in p {
        b = b.param(k, *v);
    }
    let system = b
        .h0(move |x, out| {
            let (s, c1, c2) = (&x[0], &x[1], &x[2]);
            out[0] = km1 * c1 + k1 * s * (c1 + c2);
            out[1] = -(k1 * s * (c1 + c2)) - (km1 + k2) * c1;
            out[2] = -(k3 * (c1 + c2) * (i0 - c2)) - km3 * c2;
        })
        .h1(move |x, out| {
            let (s, c2) = (&x[0], &x[2]);
            out[0] = -(k1 * e0 * s);
            out[1] = k1 * e0 * s;
            out[2] = k3 * e0 * (i0 - c2);
        })
        .eps_max(eps_max)
        .build();

    let pmat = SmoothMatMap::new(3, 3, 2, move |x, out| {
        let (s, c2) = (&x[0], &x[2]);
        // Column for mu_1 = c1.
        out[0] = km1 + k1 * s;
        out[1] = -(k1 * s + km1 + k2);
        out[2] = -(k3 * (i0 - c2));
        // Column for mu_2 = c2.
        out[3] = k1 * s;
        out[4] = -(k1 * s);
        out[5] = -(k3 * (i0 - c2) + km3);
    });
    let mu = SmoothMap::new(3, 2, |x, out| {
        out[0] = x[1].clone();
        out[1] = x[2].clone();
    });
    let dec = Decomposition::user_supplied(pmat, mu).map_err(construction)?;

    // The cap c1 + c2 <= eps_max e0 makes the region compatible with the
    // enzyme conservation law; it is positively invariant exactly at
    // eps = eps_max, which is the value the invariance check targets.
    let region = Polytope::new(
        3,
        vec![
            (vec![-1.0, 0.0, 0.0], 0.0),
            (vec![0.0, -1.0, 0.0], 0.0),
            (vec![0.0, 0.0, -1.0], 0.0),
            (vec![1.0, 1.0, 0.0], s0),
            (vec![0.0, 0.0, 1.0], i0),
            (vec![0.0, 1.0, 1.0], eps_max * e0),
        ],
        "capped substrate-complex prism",
    )
    .map_err(construction)?;
    let domain = Polytope::from_box(&[0.0], &[s0], "substrate axis").map_err(construction)?;
    let chart = Chart::Graph {
        slow: vec![0],
        fast: vec![1, 2],
        gamma: SmoothMap::constant(1, DVector::zeros(2)),
        domain,
    };
    let manifold = SlowManifold::new(dec.clone(), region, chart);

    let oracle: ReducedOracle = Arc::new(move |x| {
        let s = x[0];
        let q1 = -e0 * k1 * k2 * km3 * s
            / (km3 * (k1 * s + km1) + (km1 + k2) * k3 * i0 + k2 * km3);
        DVector::from_vec(vec![q1, 0.0, 0.0])
    });
    let z = DVector::zeros(3);

    Ok(ExampleSystem {
        name: "comp_inhibition_small_e0",
        description: "competitive inhibition, small total enzyme",
        system,
        decomposition: dec,
        manifold,
        closed_form_reduced: Some(oracle),
        closed_form_stationary: vec![z.clone()],
        lyapunov: LyapunovPlan::Curve { z },
        x0: DVector::from_vec(vec![0.9, 0.05, 0.05]),
        cis_eps: vec![eps_max],
    })
}

/// Stiefenhofer's carrier model of maltose transport through a membrane,
/// in the reduced coordinates `(xi, y1, y2, y3)` after the conservation
/// laws have been eliminated. The release of transported maltose into the
/// interior is the slow reaction.
fn maltose_transport(p: &BTreeMap<String, f64>) -> Result<ExampleSystem, ExampleError> {
    let (x0p, xi0, z0, r0, eps_max) = (p["x0"], p["xi0"], p["z0"], p["r0"], p["eps_max"]);

    let e_terms = move |v: &[Dual]| -> (Dual, Dual, Dual, Dual) {
        let (xi, y1, y2, y3) = (&v[0], &v[1], &v[2], &v[3]);
        let zc = z0 - (y1 + y2 + y3);
        let xc = x0p + xi0 - (xi + y1 + y2);
        let rc = r0 - (y2 + y3);
        let e1 = -y2;
        let e2 = y1 - &zc * &xc;
        let e3 = y2 - y1 * &rc;
        let e4 = y3 - &zc * &rc;
        (e1, e2, e3, e4)
    };

    let mut b = SystemBuilder::new("maltose_transport", 4);
    for (k, v) in p {
        b = b.param(k, *v);
    }
    let system = b
        .h0(move |v, out| {
            let (_, e2, e3, e4) = e_terms(v);
            out[0] = Dual::constant(0.0);
            out[1] = -&e2 + &e3;
            out[2] = -&e3;
            out[3] = -&e4;
        })
        .h1(|v, out| {
            out[0] = v[2].clone();
            out[1] = Dual::constant(0.0);
            out[2] = -&v[2];
            out[3] = Dual::constant(0.0);
        })
        .eps_max(eps_max)
        .build();

    // Columns: slow release, then the three fast binding equilibria.
    let stoich = DMatrix::from_row_slice(
        4,
        4,
        &[
            -1.0, 0.0, 0.0, 0.0, //
            0.0, -1.0, 1.0, 0.0, //
            1.0, 0.0, -1.0, 0.0, //
            0.0, 0.0, 0.0, -1.0,
        ],
    );
    let rates = SmoothMap::new(4, 4, move |v, out| {
        let (e1, e2, e3, e4) = e_terms(v);
        out[0] = e1;
        out[1] = e2;
        out[2] = e3;
        out[3] = e4;
    });
    let dec = decompose_structural(&stoich, &[1, 2, 3], &rates).map_err(construction)?;

    let region = Polytope::new(
        4,
        vec![
            (vec![-1.0, 0.0, 0.0, 0.0], 0.0),
            (vec![0.0, -1.0, 0.0, 0.0], 0.0),
            (vec![0.0, 0.0, -1.0, 0.0], 0.0),
            (vec![0.0, 0.0, 0.0, -1.0], 0.0),
            (vec![0.0, 1.0, 1.0, 1.0], z0),
            (vec![0.0, 0.0, 1.0, 1.0], r0),
            (vec![1.0, 1.0, 1.0, 0.0], xi0 + x0p),
        ],
        "carrier stoichiometric region",
    )
    .map_err(construction)?;

    // The slow manifold is a curve that is not a coordinate graph; seed the
    // continuation with a fast Newton correction of an interior point.
    let guess = [0.25 * (xi0 + x0p), 0.2 * z0, 0.2 * z0, 0.2 * z0];
    let (seed, residual) =
        crate::reduction::newton_mu_correction(&dec, &guess, 60, 1e-13).map_err(construction)?;
    if residual > TOL_Y {
        return Err(ExampleError::Construction(format!(
            "curve seed did not settle on the slow manifold (residual {residual:.3e})"
        )));
    }
    let chart = Chart::Curve1d { seed, orientation: 1.0 };
    let manifold = SlowManifold::new(dec.clone(), region, chart);

    // Transcription of the hand-derived reduced system; n is the common
    // denominator produced by the projection.
    let oracle: ReducedOracle = Arc::new(move |v| {
        let (xi, y1, y2, y3) = (v[0], v[1], v[2], v[3]);
        let n = xi0 - xi + (y1 + y2 + y3 - z0) * (y2 + y3 - r0 - 1.0) - (y1 + y2)
            + 1.0
            + x0p;
        DVector::from_vec(vec![
            y2,
            y2 * (y1 + y2 + y3 - z0) / n,
            -y2 - y2 * (xi - xi0 + 2.0 * (y1 + y2) + y3 - (x0p + z0 + 1.0)) / n,
            y2 * ((y2 + y3) * (y1 + y2 + y3 - r0 - z0) + r0 * (z0 - y1)) / n,
        ])
    });

    // Stationary point: transport stalls once the interior maltose level
    // saturates, xi = x0 + xi0, with the carrier-maltose complexes empty
    // and y3 at the smaller root of y^2 - (z0 + r0 + 1) y + z0 r0.
    let w = z0 + r0 + 1.0;
    let y3_star = 0.5 * (w - (w * w - 4.0 * z0 * r0).sqrt());
    let z = DVector::from_vec(vec![x0p + xi0, 0.0, 0.0, y3_star]);

    Ok(ExampleSystem {
        name: "maltose_transport",
        description: "maltose transport carrier model, slow interior release",
        system,
        decomposition: dec,
        manifold,
        closed_form_reduced: Some(oracle),
        closed_form_stationary: vec![z.clone()],
        lyapunov: LyapunovPlan::Curve { z },
        x0: DVector::from_vec(vec![0.5, 0.25, 0.25, 0.25]),
        cis_eps: vec![0.0, 0.5 * eps_max, eps_max],
    })
}

/// Competitive inhibition with slow substrate kinetics: `k1`, `km1`, `k2`
/// all carry a factor eps while inhibitor binding stays fast. The slow
/// manifold is two-dimensional, the graph of the inhibitor complex level
/// over `(s, c1)`.
fn comp_inhibition_2d(p: &BTreeMap<String, f64>) -> Result<ExampleSystem, ExampleError> {
    let (k1, km1, k2, k3, km3) = (p["k1"], p["km1"], p["k2"], p["k3"], p["km3"]);
    let (e0, s0, i0, eps_max) = (p["e0"], p["s0"], p["i0"], p["eps_max"]);
    let kappa = km3 / k3;

    let mut b = SystemBuilder::new("comp_inhibition_2d", 3);
    for (k, v) in p {
        b = b.param(k, *v);
    }
    let system = b
        .h0(move |x, out| {
            let (c1, c2) = (&x[1], &x[2]);
            out[0] = Dual::constant(0.0);
            out[1] = Dual::constant(0.0);
            out[2] = k3 * (e0 - c1 - c2) * (i0 - c2) - km3 * c2;
        })
        .h1(move |x, out| {
            let (s, c1, c2) = (&x[0], &x[1], &x[2]);
            let bind = k1 * s * (e0 - c1 - c2);
            out[0] = km1 * c1 - &bind;
            out[1] = bind - (km1 + k2) * c1;
            out[2] = Dual::constant(0.0);
        })
        .eps_max(eps_max)
        .build();

    let stoich = DMatrix::from_row_slice(3, 3, &[-1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, 1.0]);
    let rates = SmoothMap::new(3, 3, move |x, out| {
        let (s, c1, c2) = (&x[0], &x[1], &x[2]);
        out[0] = k1 * s * (e0 - c1 - c2) - km1 * c1;
        out[1] = k2 * c1;
        out[2] = k3 * (e0 - c1 - c2) * (i0 - c2) - km3 * c2;
    });
    let dec = decompose_structural(&stoich, &[2], &rates).map_err(construction)?;

    let region = Polytope::new(
        3,
        vec![
            (vec![-1.0, 0.0, 0.0], 0.0),
            (vec![0.0, -1.0, 0.0], 0.0),
            (vec![0.0, 0.0, -1.0], 0.0),
            (vec![0.0, 1.0, 1.0], e0),
            (vec![1.0, 1.0, 0.0], s0),
            (vec![0.0, 0.0, 1.0], i0),
        ],
        "inhibition stoichiometric prism",
    )
    .map_err(construction)?;

    // Fast inhibitor equilibrium: c2 = theta(c1), the smaller root of the
    // binding quadratic.
    let domain = Polytope::new(
        2,
        vec![
            (vec![-1.0, 0.0], 0.0),
            (vec![0.0, -1.0], 0.0),
            (vec![1.0, 1.0], s0),
            (vec![0.0, 1.0], e0),
        ],
        "slow chart domain",
    )
    .map_err(construction)?;
    let gamma = SmoothMap::new(2, 1, move |w, out| {
        let c1 = &w[1];
        let u = kappa + e0 + i0 - c1;
        let disc = &u * &u - 4.0 * i0 * (e0 - c1);
        out[0] = (u - disc.sqrt()) * 0.5;
    });
    let chart = Chart::Graph { slow: vec![0, 1], fast: vec![2], gamma, domain };
    let manifold = SlowManifold::new(dec.clone(), region, chart);

    // On the manifold the projection leaves the (s, c1) components of h1
    // untouched; the c2 component follows from differentiating the fast
    // equilibrium condition.
    let oracle: ReducedOracle = Arc::new(move |x| {
        let (s, c1, c2) = (x[0], x[1], x[2]);
        let bind = k1 * s * (e0 - c1 - c2);
        let q0 = km1 * c1 - bind;
        let q1 = bind - (km1 + k2) * c1;
        let q2 = -(i0 - c2) * q1 / (kappa + e0 + i0 - c1 - 2.0 * c2);
        DVector::from_vec(vec![q0, q1, q2])
    });

    let u0 = kappa + e0 + i0;
    let theta0 = 0.5 * (u0 - (u0 * u0 - 4.0 * i0 * e0).sqrt());
    let z = DVector::from_vec(vec![0.0, 0.0, theta0]);

    // Linear comparison function for the two-dimensional slow flow; the
    // weight keeps the substrate term decaying against the worst-case
    // complex turnover on the chart domain.
    let alpha = 0.5 * k2 / (km1 + k1 * s0);
    let phi = SmoothMap::new(3, 1, move |x, out| {
        out[0] = (1.0 + alpha) * &x[0] + &x[1];
    });

    Ok(ExampleSystem {
        name: "comp_inhibition_2d",
        description: "competitive inhibition, slow substrate kinetics",
        system,
        decomposition: dec,
        manifold,
        closed_form_reduced: Some(oracle),
        closed_form_stationary: vec![z.clone()],
        lyapunov: LyapunovPlan::Ambient { phi, z, a: 1, k: 1.0 },
        x0: DVector::from_vec(vec![0.7, 0.1, 0.5]),
        cis_eps: vec![0.0, 0.5 * eps_max, eps_max],
    })
}

/// Linear two-state toy: fast relaxation onto the x1 axis, slow linear
/// decay along it. Small enough that every certificate has a closed form.
fn linear_toy(p: &BTreeMap<String, f64>) -> Result<ExampleSystem, ExampleError> {
    let eps_max = p["eps_max"];

    let mut b = SystemBuilder::new("linear_toy", 2);
    for (k, v) in p {
        b = b.param(k, *v);
    }
    let system = b
        .h0(|x, out| {
            out[0] = Dual::constant(0.0);
            out[1] = -&x[1];
        })
        .h1(|x, out| {
            out[0] = -&x[0];
            out[1] = Dual::constant(0.0);
        })
        .eps_max(eps_max)
        .build();

    let stoich = DMatrix::from_row_slice(2, 1, &[0.0, -1.0]);
    let rates = SmoothMap::new(2, 1, |x, out| out[0] = x[1].clone());
    let dec = decompose_structural(&stoich, &[0], &rates).map_err(construction)?;

    let region = Polytope::from_box(&[0.0, 0.0], &[1.0, 1.0], "unit box").map_err(construction)?;
    let domain = Polytope::from_box(&[0.0], &[1.0], "x1 axis").map_err(construction)?;
    let chart = Chart::Graph {
        slow: vec![0],
        fast: vec![1],
        gamma: SmoothMap::constant(1, DVector::zeros(1)),
        domain,
    };
    let manifold = SlowManifold::new(dec.clone(), region, chart);

    let oracle: ReducedOracle = Arc::new(|x| DVector::from_vec(vec![-x[0], 0.0]));
    let z = DVector::zeros(2);

    Ok(ExampleSystem {
        name: "linear_toy",
        description: "linear fast-slow toy on the unit box",
        system,
        decomposition: dec,
        manifold,
        closed_form_reduced: Some(oracle),
        closed_form_stationary: vec![z.clone()],
        lyapunov: LyapunovPlan::Curve { z },
        x0: DVector::from_vec(vec![1.0, 0.5]),
        cis_eps: vec![0.0, 0.5 * eps_max, eps_max],
    })
}

/// Negative control: the fast Jacobian is a nilpotent Jordan block, so the
/// kernel and image of D h0 do not split the space and the rank condition
/// on the deflated spectrum fails.
fn jordan_block(p: &BTreeMap<String, f64>) -> Result<ExampleSystem, ExampleError> {
    let eps_max = p["eps_max"];

    let mut b = SystemBuilder::new("jordan_block", 2);
    for (k, v) in p {
        b = b.param(k, *v);
    }
    let system = b
        .h0(|x, out| {
            out[0] = x[1].clone();
            out[1] = Dual::constant(0.0);
        })
        .h1(|x, out| {
            out[0] = -&x[0];
            out[1] = Dual::constant(0.0);
        })
        .eps_max(eps_max)
        .build();

    let pmat = SmoothMatMap::from_constant(2, DMatrix::from_column_slice(2, 1, &[1.0, 0.0]));
    let mu = SmoothMap::new(2, 1, |x, out| out[0] = x[1].clone());
    let dec = Decomposition::user_supplied(pmat, mu).map_err(construction)?;

    let region =
        Polytope::from_box(&[0.0, 0.0], &[1.0, 1.0], "unit box").map_err(construction)?;
    let domain = Polytope::from_box(&[0.0], &[1.0], "x1 axis").map_err(construction)?;
    let chart = Chart::Graph {
        slow: vec![0],
        fast: vec![1],
        gamma: SmoothMap::constant(1, DVector::zeros(1)),
        domain,
    };
    let manifold = SlowManifold::new(dec.clone(), region, chart);

    Ok(ExampleSystem {
        name: "jordan_block",
        description: "control: nilpotent fast Jacobian, no kernel-image splitting",
        system,
        decomposition: dec,
        manifold,
        closed_form_reduced: None,
        closed_form_stationary: vec![],
        lyapunov: LyapunovPlan::None,
        x0: DVector::from_vec(vec![0.5, 0.3]),
        cis_eps: vec![0.1],
    })
}

/// Negative control: the reduced flow is a pure rotation, so trajectories
/// converge pointwise as eps shrinks but never settle; the late-time error
/// stays as large as the early-time error.
fn oscillatory_nonexample(p: &BTreeMap<String, f64>) -> Result<ExampleSystem, ExampleError> {
    let eps_max = p["eps_max"];

    let mut b = SystemBuilder::new("oscillatory_nonexample", 3);
    for (k, v) in p {
        b = b.param(k, *v);
    }
    let system = b
        .h0(|x, out| {
            out[0] = Dual::constant(0.0);
            out[1] = Dual::constant(0.0);
            out[2] = -&x[2];
        })
        .h1(|x, out| {
            out[0] = -(&x[1] * (1.0 + &x[2]));
            out[1] = &x[0] * (1.0 + &x[2]);
            out[2] = Dual::constant(1.0);
        })
        .eps_max(eps_max)
        .build();

    let pmat = SmoothMatMap::from_constant(3, DMatrix::from_column_slice(3, 1, &[0.0, 0.0, -1.0]));
    let mu = SmoothMap::new(3, 1, |x, out| out[0] = x[2].clone());
    let dec = Decomposition::user_supplied(pmat, mu).map_err(construction)?;

    let region = Polytope::from_box(&[-2.0, -2.0, -2.0], &[2.0, 2.0, 2.0], "ambient box")
        .map_err(construction)?;
    let domain =
        Polytope::from_box(&[-2.0, -2.0], &[2.0, 2.0], "rotation plane").map_err(construction)?;
    let chart = Chart::Graph {
        slow: vec![0, 1],
        fast: vec![2],
        gamma: SmoothMap::constant(2, DVector::zeros(1)),
        domain,
    };
    let manifold = SlowManifold::new(dec.clone(), region, chart);

    Ok(ExampleSystem {
        name: "oscillatory_nonexample",
        description: "control: rotational reduced flow without late-time decay",
        system,
        decomposition: dec,
        manifold,
        closed_form_reduced: None,
        closed_form_stationary: vec![],
        lyapunov: LyapunovPlan::None,
        x0: DVector::from_vec(vec![1.0, 0.0, 0.5]),
        cis_eps: vec![0.1],
    })
}

/// Negative control: the linear toy on a box that has been cut in half, so
/// the slow drift pushes trajectories out through the x1 = 1/2 face.
fn shrunken_cis(p: &BTreeMap<String, f64>) -> Result<ExampleSystem, ExampleError> {
    let eps_max = p["eps_max"];

    let mut b = SystemBuilder::new("shrunken_cis", 2);
    for (k, v) in p {
        b = b.param(k, *v);
    }
    let system = b
        .h0(|x, out| {
            out[0] = Dual::constant(0.0);
            out[1] = -&x[1];
        })
        .h1(|_, out| {
            out[0] = Dual::constant(1.0);
            out[1] = Dual::constant(0.0);
        })
        .eps_max(eps_max)
        .build();

    let stoich = DMatrix::from_row_slice(2, 1, &[0.0, -1.0]);
    let rates = SmoothMap::new(2, 1, |x, out| out[0] = x[1].clone());
    let dec = decompose_structural(&stoich, &[0], &rates).map_err(construction)?;

    let region =
        Polytope::from_box(&[0.0, 0.0], &[0.5, 0.5], "half box").map_err(construction)?;
    let domain = Polytope::from_box(&[0.0], &[0.5], "x1 axis").map_err(construction)?;
    let chart = Chart::Graph {
        slow: vec![0],
        fast: vec![1],
        gamma: SmoothMap::constant(1, DVector::zeros(1)),
        domain,
    };
    let manifold = SlowManifold::new(dec.clone(), region, chart);

    Ok(ExampleSystem {
        name: "shrunken_cis",
        description: "control: outward slow drift through a region face",
        system,
        decomposition: dec,
        manifold,
        closed_form_reduced: None,
        closed_form_stationary: vec![],
        lyapunov: LyapunovPlan::None,
        x0: DVector::from_vec(vec![0.25, 0.2]),
        cis_eps: vec![0.1],
    })
}
