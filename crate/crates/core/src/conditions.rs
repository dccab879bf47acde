//! Numerical certification of the hypotheses under which a
//! Tikhonov-Fenichel reduction converges on unbounded time intervals: rank
//! and direct-sum structure of the fast Jacobian, Hurwitz stability of its
//! nonzero spectrum, positive invariance of the chemically relevant
//! region, uniqueness of the stationary point, and Lyapunov certificates
//! with explicit decay envelopes.
//!
//! The checkers realize Hoppensteadt's convergence conditions (I)-(VII)
//! for autonomous systems:
//!
//! * (I) existence of a degenerate solution: a stationary point of the
//!   reduced flow on the slow manifold ([`find_stationary_points`]).
//! * (II) smoothness of the right-hand sides: automatic, all fields are
//!   closed forms differentiated exactly in forward mode.
//! * (III) isolated bounded quasi-steady state branch: the manifold chart
//!   (graph or continuation curve), with isolation along the fast fibers
//!   given by the rank conditions ([`check_tf0_tfi`]).
//! * (IV), (V) uniformity in time: automatic for autonomous systems on a
//!   compact positively invariant region ([`check_cis`]).
//! * (VI) uniform asymptotic stability of the reduced flow: a Lyapunov
//!   certificate ([`check_lc_1d`], [`verify_lyapunov`]) with its decay
//!   envelope ([`decay_envelope`]).
//! * (VII) uniform asymptotic stability of the fast flow along the slow
//!   manifold: Routh-Hurwitz on the deflated characteristic polynomial
//!   ([`check_tfii`]).

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{
    char_poly, deflate_zero_roots, kernel_basis, numeric_rank, routh_hurwitz, LinalgError,
    DEFAULT_RANK_TOL,
};
use crate::manifold::{
    sample_manifold, tangent_space, ArcTable, ManifoldError, SlowManifold, TOL_Y,
};
use crate::model::{PerturbedSystem, Polytope, SmoothMap};
use crate::reduction::{newton_mu_correction, ReducedField, ReductionError};

/// Outward flux above this value counts as an invariance violation.
pub const FLUX_TOL: f64 = 1e-9;
/// Max-norm of the reduced field below which a point counts as stationary.
pub const STATIONARY_TOL: f64 = 1e-10;
/// Stationary points closer than this are considered identical.
const DEDUPE_DISTANCE: f64 = 1e-6;
/// Multistart count for the stationary-point search.
const STATIONARY_STARTS: usize = 40;
/// Relative threshold below which an eigenvalue counts as zero.
const EIG_ZERO_TOL: f64 = 1e-7;
/// The tangent eigenvalue must lie below minus this margin.
const LAMBDA_MARGIN: f64 = 1e-8;
/// Samples with phi below this are excluded from decay-rate fitting.
const PHI_FLOOR: f64 = 1e-12;
/// Safety factor applied to the fitted decay rate.
const NU_SAFETY: f64 = 0.9;
/// Arc-table resolution used when building 1-d certificates.
const LC_TABLE_NODES: usize = 400;
const CIS_SEED: u64 = 71;
const HURWITZ_MATCH_SEED: u64 = 733;

#[derive(Debug, thiserror::Error)]
pub enum ConditionError {
    #[error("point is not stationary: |q| = {q_norm:.3e}")]
    NotStationary { q_norm: f64 },
    #[error("tangent eigenvalue {lambda:.6e} is not below the stability margin")]
    NotLinearlyStable { lambda: f64 },
    #[error("reduced speed changes sign away from z at arc length {sigma:.4}")]
    MultipleEquilibria { sigma: f64 },
    #[error("Dq(z) has {zeros} near-zero eigenvalues, expected {expected}")]
    DegenerateSpectrum { zeros: usize, expected: usize },
    #[error("eigenvector of the nonzero eigenvalue misaligned with the tangent (cos = {cos:.6})")]
    EigenvectorMismatch { cos: f64 },
    #[error("decay exponent k = {k} is below 1")]
    ExponentOutOfRange { k: f64 },
    #[error("certificate constants degenerate: {0}")]
    DegenerateCertificate(String),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Outcome of one sampling-based certification.
#[derive(Debug, Clone)]
pub enum Verdict {
    /// Condition held at every sample; `margin` is the worst slack seen
    /// (for the symbolic Hurwitz match it is the worst deviation).
    CertifiedAtSamples { samples: usize, margin: f64 },
    Failed { witness: Vec<f64>, detail: String },
    Skipped { reason: String },
}

impl Verdict {
    pub fn is_certified(&self) -> bool {
        matches!(self, Verdict::CertifiedAtSamples { .. })
    }

    pub fn margin(&self) -> Option<f64> {
        match self {
            Verdict::CertifiedAtSamples { margin, .. } => Some(*margin),
            _ => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::CertifiedAtSamples { samples, margin } => {
                write!(f, "certified-at-samples (n = {samples}, margin = {margin:.3e})")
            }
            Verdict::Failed { witness, detail } => {
                write!(f, "failed at witness {witness:?}: {detail}")
            }
            Verdict::Skipped { reason } => write!(f, "skipped: {reason}"),
        }
    }
}

/// Named collection of verdicts with an overall pass flag.
#[derive(Debug, Clone, Default)]
pub struct ConditionReport {
    pub entries: Vec<(String, Verdict)>,
}

impl ConditionReport {
    pub fn push(&mut self, name: &str, verdict: Verdict) {
        self.entries.push((name.to_string(), verdict));
    }

    pub fn get(&self, name: &str) -> Option<&Verdict> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    /// True when no entry failed (skipped entries do not count against).
    pub fn all_certified(&self) -> bool {
        self.entries.iter().all(|(_, v)| !matches!(v, Verdict::Failed { .. }))
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, verdict) in &self.entries {
            writeln!(f, "{name}: {verdict}")?;
        }
        Ok(())
    }
}

/// Certifies at manifold samples that rank Dh0 = r (local representation
/// of the fast part) and that zero is a semisimple eigenvalue of
/// multiplicity m - r, i.e. the state space splits as ker + im of Dh0.
///
/// The multiplicity is established by two independent routes that must
/// agree: deflation of the characteristic polynomial by exactly x^{m-r}
/// (algebraic multiplicity) and the dimension of the numeric kernel
/// (geometric multiplicity).
pub fn check_tf0_tfi(
    sys: &PerturbedSystem,
    d: &crate::reduction::Decomposition,
    mf: &SlowManifold,
    n_samples: usize,
) -> Result<(Verdict, Verdict), ConditionError> {
    let sample = sample_manifold(mf, n_samples)?;
    let m = sys.dim;
    let r = d.r;
    let n = sample.points.len();
    let mut tf0: Result<f64, (Vec<f64>, String)> = Ok(f64::INFINITY);
    let mut tfi: Result<f64, (Vec<f64>, String)> = Ok(f64::INFINITY);
    for x in &sample.points {
        let jac = sys.h0.jacobian(x.as_slice());
        let sv = jac.clone().singular_values();
        let smax = sv.max().max(f64::MIN_POSITIVE);
        let rank = numeric_rank(&jac, DEFAULT_RANK_TOL);
        if tf0.is_ok() {
            if rank != r {
                tf0 = Err((
                    x.as_slice().to_vec(),
                    format!("rank Dh0 = {rank}, expected {r}"),
                ));
            } else if r > 0 {
                let next = sv.get(r).copied().unwrap_or(0.0);
                let gap = (sv[r - 1] - next) / smax;
                if let Ok(margin) = &mut tf0 {
                    *margin = margin.min(gap);
                }
            }
        }
        if tfi.is_ok() {
            let poly = char_poly(&jac)?;
            let route_a = deflate_zero_roots(&poly, m - r, 1e-8);
            let kdim = kernel_basis(&jac, 1e-8).ncols();
            let route_b_ok = kdim == m - r;
            match (&route_a, route_b_ok) {
                (Ok(deflated), true) => {
                    let scale = (0..=poly.degree())
                        .map(|i| poly.coeff(i).abs())
                        .fold(1.0f64, f64::max);
                    let c0 = deflated.coeff(0).abs() / scale;
                    if let Ok(margin) = &mut tfi {
                        *margin = margin.min(c0);
                    }
                }
                _ => {
                    let a_msg = match &route_a {
                        Ok(_) => "multiplicity matches".to_string(),
                        Err(e) => e.to_string(),
                    };
                    tfi = Err((
                        x.as_slice().to_vec(),
                        format!(
                            "deflation route: {a_msg}; kernel route: dim {kdim} vs expected {}",
                            m - r
                        ),
                    ));
                }
            }
        }
    }
    let wrap = |res: Result<f64, (Vec<f64>, String)>| match res {
        Ok(margin) => Verdict::CertifiedAtSamples { samples: n, margin },
        Err((witness, detail)) => Verdict::Failed { witness, detail },
    };
    Ok((wrap(tf0), wrap(tfi)))
}

/// Certifies at manifold samples that all nonzero eigenvalues of Dh0 have
/// negative real part, by Routh-Hurwitz on the characteristic polynomial
/// after removing the known zero roots. The margin is the smallest Hurwitz
/// determinant seen across all samples.
pub fn check_tfii(
    sys: &PerturbedSystem,
    mf: &SlowManifold,
    n_samples: usize,
) -> Result<Verdict, ConditionError> {
    let sample = sample_manifold(mf, n_samples)?;
    let m = sys.dim;
    let r = mf.dec.r;
    let mut min_minor = f64::INFINITY;
    for x in &sample.points {
        let jac = sys.h0.jacobian(x.as_slice());
        let poly = char_poly(&jac)?;
        let deflated = match deflate_zero_roots(&poly, m - r, 1e-8) {
            Ok(p) => p,
            Err(e) => {
                return Ok(Verdict::Skipped {
                    reason: format!("deflation failed at a sample ({e}); certify TFI first"),
                })
            }
        };
        let report = routh_hurwitz(&deflated);
        if !report.stable {
            return Ok(Verdict::Failed {
                witness: x.as_slice().to_vec(),
                detail: format!(
                    "Hurwitz test failed ({:?}); determinants {:?}",
                    report.first_failure, report.determinants
                ),
            });
        }
        min_minor = min_minor.min(report.min_determinant());
    }
    Ok(Verdict::CertifiedAtSamples { samples: sample.points.len(), margin: min_minor })
}

/// Lower-right 3x3 minor of the fast Jacobian of the maltose transport
/// system at eps = 0, in the nonnegative combinations a, b, c, d of the
/// concentrations.
pub fn maltose_minor(a: f64, b: f64, c: f64, d: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        3,
        &[
            -1.0 - a - b - c,
            -a - b + 1.0 + d,
            -a + d,
            c,
            -1.0 - d,
            -d,
            -c,
            -b - c,
            -1.0 - b - c,
        ],
    )
}

/// The closed-form Hurwitz quantities (A1, H2, A3) of [`maltose_minor`],
/// expanded as polynomials in a, b, c, d.
pub fn maltose_hurwitz_closed_form(a: f64, b: f64, c: f64, d: f64) -> (f64, f64, f64) {
    let a1 = 3.0 + 2.0 * b + 2.0 * c + d + a;
    let h2 = a * a * b
        + a * a * c
        + a * a * d
        + 3.0 * a * b * b
        + 7.0 * a * b * c
        + 4.0 * a * b * d
        + 3.0 * a * c * c
        + 4.0 * a * c * d
        + a * d * d
        + 2.0 * b * b * b
        + 7.0 * b * b * c
        + 3.0 * b * b * d
        + 7.0 * b * c * c
        + 6.0 * b * c * d
        + b * d * d
        + 2.0 * c * c * c
        + 3.0 * c * c * d
        + c * d * d
        + 2.0 * a * a
        + 10.0 * a * b
        + 9.0 * a * c
        + 6.0 * a * d
        + 10.0 * b * b
        + 21.0 * b * c
        + 10.0 * b * d
        + 9.0 * c * c
        + 10.0 * c * d
        + 2.0 * d * d
        + 8.0 * a
        + 16.0 * b
        + 14.0 * c
        + 8.0 * d
        + 8.0;
    let a3 = b * b * c
        + b * c * c
        + b * c * d
        + a * b
        + a * c
        + a * d
        + b * b
        + 2.0 * b * c
        + b * d
        + a
        + 2.0 * b
        + c
        + d
        + 1.0;
    (a1, h2, a3)
}

/// Cross-validates two independent evaluation routes for the maltose
/// Hurwitz quantities: characteristic-polynomial coefficients of the
/// assembled minor versus the expanded closed forms, at 200 random
/// nonnegative parameter tuples. The reported margin is the worst relative
/// deviation (smaller is better here).
pub fn check_hurwitz_symbolic_match() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(HURWITZ_MATCH_SEED);
    let mut max_dev = 0.0f64;
    for _ in 0..200 {
        let (a, b, c, d) = (
            rng.gen_range(0.0..5.0),
            rng.gen_range(0.0..5.0),
            rng.gen_range(0.0..5.0),
            rng.gen_range(0.0..5.0),
        );
        let minor = maltose_minor(a, b, c, d);
        let poly = match char_poly(&minor) {
            Ok(p) => p,
            Err(e) => {
                return Verdict::Failed {
                    witness: vec![a, b, c, d],
                    detail: format!("characteristic polynomial failed: {e}"),
                }
            }
        };
        let (a1, a2, a3) = (poly.coeff(2), poly.coeff(1), poly.coeff(0));
        let h2 = a1 * a2 - a3;
        let (a1_cf, h2_cf, a3_cf) = maltose_hurwitz_closed_form(a, b, c, d);
        for (have, want) in [(a1, a1_cf), (h2, h2_cf), (a3, a3_cf)] {
            let dev = (have - want).abs() / want.abs().max(1.0);
            if dev > max_dev {
                max_dev = dev;
            }
            if dev > 1e-9 {
                return Verdict::Failed {
                    witness: vec![a, b, c, d],
                    detail: format!("routes deviate by {dev:.3e} ({have} vs {want})"),
                };
            }
        }
    }
    Verdict::CertifiedAtSamples { samples: 200, margin: max_dev }
}

/// Certifies positive invariance of a compact polytope by sampling each
/// face and requiring the flux through the outward normal to be
/// nonpositive for every eps in `eps_list`. A sampling certificate, not a
/// proof; the margin is the smallest inward flux seen.
pub fn check_cis(
    sys: &PerturbedSystem,
    poly: &Polytope,
    eps_list: &[f64],
    n_per_face: usize,
) -> Verdict {
    assert!(!eps_list.is_empty(), "need at least one eps value");
    let mut rng = ChaCha8Rng::seed_from_u64(CIS_SEED);
    let mut min_margin = f64::INFINITY;
    let mut worst: Option<(usize, f64, Vec<f64>, f64)> = None;
    let mut checked = 0usize;
    for j in 0..poly.n_faces() {
        let pts = poly.sample_face(j, n_per_face, &mut rng);
        if pts.is_empty() {
            continue;
        }
        let normal = poly.unit_normal(j);
        for x in &pts {
            for &eps in eps_list {
                let h = match sys.eval_h(x.as_slice(), eps) {
                    Ok(h) => h,
                    Err(e) => {
                        return Verdict::Failed {
                            witness: x.as_slice().to_vec(),
                            detail: format!("field evaluation failed on face {j}: {e}"),
                        }
                    }
                };
                let flux = normal.dot(&h);
                checked += 1;
                if -flux < min_margin {
                    min_margin = -flux;
                    worst = Some((j, eps, x.as_slice().to_vec(), flux));
                }
            }
        }
    }
    if checked == 0 {
        return Verdict::Skipped { reason: "no face samples available".into() };
    }
    if min_margin >= -FLUX_TOL {
        Verdict::CertifiedAtSamples { samples: checked, margin: min_margin }
    } else {
        let (face, eps, witness, flux) = worst.unwrap();
        Verdict::Failed {
            witness,
            detail: format!("outward flux {flux:.3e} through face {face} at eps = {eps}"),
        }
    }
}

/// Finds all stationary points of the reduced flow on Y inside `region` by
/// Newton multistart on the augmented square system (mu(x) = 0, tangent
/// projection of q(x) = 0) from manifold samples. Roots are deduplicated
/// and verified against the stationarity tolerance; diverging starts are
/// skipped silently.
pub fn find_stationary_points(
    rf: &ReducedField,
    mf: &SlowManifold,
    region: &Polytope,
) -> Result<Vec<DVector<f64>>, ConditionError> {
    let sample = sample_manifold(mf, STATIONARY_STARTS)?;
    let m = mf.ambient_dim();
    let r = mf.dec.r;
    let mut roots: Vec<DVector<f64>> = Vec::new();
    'starts: for start in &sample.points {
        let mut x = start.clone();
        for _ in 0..60 {
            let (mu, dmu) = mf.dec.mu.eval_with_jacobian(x.as_slice());
            let q = match rf.eval(x.as_slice()) {
                Ok(v) => v,
                Err(_) => continue 'starts,
            };
            let tangent = kernel_basis(&dmu, 1e-8);
            if tangent.ncols() != m - r {
                continue 'starts;
            }
            let mut f = DVector::zeros(m);
            f.rows_mut(0, r).copy_from(&mu);
            f.rows_mut(r, m - r).copy_from(&(tangent.transpose() * &q));
            if f.amax() < 1e-13 {
                break;
            }
            let dq = match rf.jacobian(x.as_slice()) {
                Ok(v) => v,
                Err(_) => continue 'starts,
            };
            let mut a = DMatrix::zeros(m, m);
            a.rows_mut(0, r).copy_from(&dmu);
            a.rows_mut(r, m - r).copy_from(&(tangent.transpose() * &dq));
            let delta = match a.lu().solve(&f) {
                Some(d) => d,
                None => continue 'starts,
            };
            x -= &delta;
            if !x.iter().all(|v| v.is_finite()) || x.amax() > 1e9 {
                continue 'starts;
            }
            if delta.amax() <= 1e-14 * (1.0 + x.amax()) {
                break;
            }
        }
        let q_res = match rf.eval(x.as_slice()) {
            Ok(v) => v.amax(),
            Err(_) => continue 'starts,
        };
        let mu_res = mf.dec.mu.eval(x.as_slice()).amax();
        if q_res >= STATIONARY_TOL || mu_res >= 10.0 * TOL_Y || !region.contains(x.as_slice(), 1e-6)
        {
            continue 'starts;
        }
        if roots.iter().all(|root| (root - &x).norm() > DEDUPE_DISTANCE) {
            roots.push(x);
        }
    }
    roots.sort_by(|p, q| p.iter().partial_cmp(q.iter()).unwrap());
    Ok(roots)
}

/// How the Lyapunov function of a certificate is evaluated.
#[derive(Debug, Clone)]
pub enum PhiSpec {
    /// Closed-form function of the ambient coordinates.
    Ambient(SmoothMap),
    /// Tabulated along the arc length of a one-dimensional manifold.
    Arc(ArcPhi),
}

/// Tabulated Lyapunov data along a curve: per-node phi values and the
/// scalar reduced speed p, with z sitting at arc length `sigma_z`.
#[derive(Debug, Clone)]
pub struct ArcPhi {
    pub table: ArcTable,
    pub sigma_z: f64,
    pub phi: Vec<f64>,
    pub p: Vec<f64>,
}

impl ArcPhi {
    /// (phi, L_q phi) at an ambient point near the curve, by projecting to
    /// arc length and interpolating with a local parabola.
    pub fn eval(&self, x: &DVector<f64>) -> (f64, f64) {
        let sigma = self.table.project_sigma(x);
        let phi = self.interp(&self.phi, sigma).max(0.0);
        let p = self.interp(&self.p, sigma);
        (phi, -p * p)
    }

    fn interp(&self, vals: &[f64], sigma: f64) -> f64 {
        let s = &self.table.sigmas;
        let n = s.len();
        if n == 1 {
            return vals[0];
        }
        let idx = match s.binary_search_by(|v| v.partial_cmp(&sigma).unwrap()) {
            Ok(i) => return vals[i],
            Err(i) => i.clamp(1, n - 1),
        };
        if n == 2 {
            let t = (sigma - s[0]) / (s[1] - s[0]);
            return vals[0] * (1.0 - t) + vals[1] * t;
        }
        let j = idx.clamp(1, n - 2);
        let (s0, s1, s2) = (s[j - 1], s[j], s[j + 1]);
        let (v0, v1, v2) = (vals[j - 1], vals[j], vals[j + 1]);
        let l0 = (sigma - s1) * (sigma - s2) / ((s0 - s1) * (s0 - s2));
        let l1 = (sigma - s0) * (sigma - s2) / ((s1 - s0) * (s1 - s2));
        let l2 = (sigma - s0) * (sigma - s1) / ((s2 - s0) * (s2 - s1));
        v0 * l0 + v1 * l1 + v2 * l2
    }
}

/// Lyapunov data around a stationary point z of the reduced flow:
/// c1 |x-z|^a <= phi <= c2 |x-z|^a on the ball of radius rho, and
/// L_q(phi) <= -nu phi^k on the sampled manifold.
#[derive(Debug, Clone)]
pub struct LyapunovCertificate {
    pub phi: PhiSpec,
    pub z: DVector<f64>,
    pub nu: f64,
    pub k: f64,
    pub a: u32,
    pub c1: f64,
    pub c2: f64,
    pub rho: f64,
    /// Tangent eigenvalue of the linearization, when built from one.
    pub lambda: Option<f64>,
}

impl LyapunovCertificate {
    /// The constant c = (c2/c1)^(1/a) in the distance envelope
    /// |x(tau) - z| <= c |x0 - z| gamma(tau).
    pub fn contraction_constant(&self) -> f64 {
        (self.c2 / self.c1).powf(1.0 / self.a as f64)
    }
}

impl fmt::Display for LyapunovCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Lyapunov certificate")?;
        writeln!(f, "  z   = {:?}", self.z.as_slice())?;
        writeln!(
            f,
            "  nu  = {:.6e}, k = {}, a = {}, c1 = {:.6e}, c2 = {:.6e}, rho = {:.4}",
            self.nu, self.k, self.a, self.c1, self.c2, self.rho
        )?;
        writeln!(f, "  contraction constant (c2/c1)^(1/a) = {:.6}", self.contraction_constant())?;
        if let Some(lambda) = self.lambda {
            writeln!(f, "  tangent eigenvalue lambda = {lambda:.6e}")?;
        }
        match &self.phi {
            PhiSpec::Ambient(map) => writeln!(f, "  phi: closed form on {} coordinates", map.dim_in),
            PhiSpec::Arc(ap) => writeln!(
                f,
                "  phi: arc-length table ({} nodes, sigma_z = {:.4})",
                ap.table.len(),
                ap.sigma_z
            ),
        }
    }
}

/// Adaptive Simpson quadrature with Richardson correction.
fn adaptive_simpson<F: FnMut(f64) -> Result<f64, ConditionError>>(
    f: &mut F,
    a: f64,
    fa: f64,
    m: f64,
    fm: f64,
    b: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64, ConditionError> {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        Ok(left + right + delta / 15.0)
    } else {
        Ok(adaptive_simpson(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1)?
            + adaptive_simpson(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1)?)
    }
}

fn integrate_adaptive<F: FnMut(f64) -> Result<f64, ConditionError>>(
    f: &mut F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, ConditionError> {
    if a == b {
        return Ok(0.0);
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a)?, f(m)?, f(b)?);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    adaptive_simpson(f, a, fa, m, fm, b, fb, whole, tol, 12)
}

/// Scalar reduced speed p(sigma) = tangent . q along a tabulated curve,
/// oriented in the direction of increasing arc length.
struct ArcSpeed<'a> {
    rf: &'a ReducedField,
    mf: &'a SlowManifold,
    table: &'a ArcTable,
}

impl ArcSpeed<'_> {
    fn p(&self, sigma: f64) -> Result<f64, ConditionError> {
        let raw = self.table.point_at(sigma);
        let x = match newton_mu_correction(&self.mf.dec, raw.as_slice(), 2, 1e-13) {
            Ok((polished, _)) => polished,
            Err(_) => raw,
        };
        let s = &self.table.sigmas;
        let seg = match s.binary_search_by(|v| v.partial_cmp(&sigma).unwrap()) {
            Ok(i) => i.min(s.len() - 2),
            Err(i) => (i.max(1) - 1).min(s.len() - 2),
        };
        let chord = &self.table.points[seg + 1] - &self.table.points[seg];
        let dmu = self.mf.dec.mu.jacobian(x.as_slice());
        let basis = kernel_basis(&dmu, 1e-8);
        if basis.ncols() != 1 {
            return Err(ConditionError::DegenerateCertificate(format!(
                "tangent degenerates at sigma = {sigma:.4}"
            )));
        }
        let mut tangent = basis.column(0).clone_owned();
        if tangent.dot(&chord) < 0.0 {
            tangent = -tangent;
        }
        let q = self.rf.eval(x.as_slice())?;
        Ok(tangent.dot(&q))
    }
}

/// Builds a Lyapunov certificate for a one-dimensional slow manifold
/// around the stationary point z: verifies the spectrum of the reduced
/// linearization (one negative tangent eigenvalue, zeros elsewhere),
/// checks that the scalar reduced speed vanishes only at z, and integrates
/// phi(sigma) = -int_z^sigma p along the arc by adaptive quadrature. The
/// resulting certificate has a = 2 and k = 1 with fitted nu, c1, c2.
pub fn check_lc_1d(
    rf: &ReducedField,
    mf: &SlowManifold,
    z: &DVector<f64>,
) -> Result<LyapunovCertificate, ConditionError> {
    if mf.slow_dim() != 1 {
        return Err(ConditionError::DegenerateCertificate(
            "slow manifold is not one-dimensional".into(),
        ));
    }
    let m = mf.ambient_dim();
    let q_norm = rf.eval(z.as_slice())?.amax();
    if q_norm >= STATIONARY_TOL {
        return Err(ConditionError::NotStationary { q_norm });
    }

    // Spectrum structure of the linearization at z.
    let dq = rf.jacobian(z.as_slice())?;
    let eigs = dq.clone().complex_eigenvalues();
    let scale = 1.0 + eigs.iter().map(|e| e.norm()).fold(0.0f64, f64::max);
    let mut zeros = 0usize;
    let mut nonzero: Vec<nalgebra::Complex<f64>> = Vec::new();
    for e in eigs.iter() {
        if e.norm() <= EIG_ZERO_TOL * scale {
            zeros += 1;
        } else {
            nonzero.push(*e);
        }
    }
    if zeros != m - 1 || nonzero.len() != 1 {
        return Err(ConditionError::DegenerateSpectrum { zeros, expected: m - 1 });
    }
    let lambda = nonzero[0];
    if lambda.im.abs() > 1e-6 * scale || lambda.re >= -LAMBDA_MARGIN {
        return Err(ConditionError::NotLinearlyStable { lambda: lambda.re });
    }
    let lambda = lambda.re;

    // The eigenspace of lambda must be the tangent line of Y at z.
    let shifted = &dq - DMatrix::identity(m, m) * lambda;
    let mut eigvec = kernel_basis(&shifted, 1e-6);
    if eigvec.ncols() == 0 {
        eigvec = kernel_basis(&shifted, 1e-4);
    }
    let tangent = tangent_space(mf, z.as_slice())?;
    let cos = if eigvec.ncols() == 0 {
        0.0
    } else {
        eigvec.column(0).dot(&tangent.column(0)).abs()
    };
    if cos < 1.0 - 1e-6 {
        return Err(ConditionError::EigenvectorMismatch { cos });
    }

    // Arc-length table over Y within the region, with z located on it.
    let table = ArcTable::build(mf, LC_TABLE_NODES)?;
    let sigma_z = table.project_sigma(z);
    let on_curve = (table.point_at(sigma_z) - z).norm();
    if on_curve > 1e-6 * (1.0 + z.norm()) {
        return Err(ConditionError::DegenerateCertificate(format!(
            "z is {on_curve:.3e} away from the chart curve"
        )));
    }

    let speed = ArcSpeed { rf, mf, table: &table };
    let n = table.len();
    let mut p_nodes = vec![0.0f64; n];
    for i in 0..n {
        p_nodes[i] = speed.p(table.sigmas[i])?;
    }

    // The reduced speed may vanish only at z: positive on the left of z,
    // negative on the right (z attracts along the curve).
    let mean_gap = (table.sigmas[n - 1] - table.sigmas[0]) / (n - 1) as f64;
    let guard = 1.5 * mean_gap;
    for i in 0..n {
        let s = table.sigmas[i];
        if s < sigma_z - guard && p_nodes[i] <= 0.0 {
            return Err(ConditionError::MultipleEquilibria { sigma: s });
        }
        if s > sigma_z + guard && p_nodes[i] >= 0.0 {
            return Err(ConditionError::MultipleEquilibria { sigma: s });
        }
    }

    // phi at the nodes by cumulative adaptive quadrature from sigma_z.
    let mut phi = vec![0.0f64; n];
    let first_right = table.sigmas.partition_point(|&s| s < sigma_z);
    let mut f = |s: f64| speed.p(s);
    let mut prev = (sigma_z, 0.0f64);
    for i in first_right..n {
        let inc = integrate_adaptive(&mut f, prev.0, table.sigmas[i], 1e-11)?;
        phi[i] = (prev.1 - inc).max(0.0);
        prev = (table.sigmas[i], prev.1 - inc);
    }
    prev = (sigma_z, 0.0);
    for i in (0..first_right).rev() {
        let inc = integrate_adaptive(&mut f, prev.0, table.sigmas[i], 1e-11)?;
        phi[i] = (prev.1 - inc).max(0.0);
        prev = (table.sigmas[i], prev.1 - inc);
    }

    // Fit the decay rate and the two-sided norm-equivalence constants.
    let length = table.sigmas[n - 1] - table.sigmas[0];
    let rho = length / 4.0;
    let mut nu = f64::INFINITY;
    let mut c1 = f64::INFINITY;
    let mut c2 = 0.0f64;
    for i in 0..n {
        if phi[i] > PHI_FLOOR {
            nu = nu.min(p_nodes[i] * p_nodes[i] / phi[i]);
        }
        let d = (&table.points[i] - z).norm();
        if d > 1e-12 && d <= rho && phi[i] > 0.0 {
            let ratio = phi[i] / (d * d);
            c1 = c1.min(ratio);
            c2 = c2.max(ratio);
        }
    }
    nu *= NU_SAFETY;
    if !(nu > 0.0 && nu.is_finite() && c1 > 0.0 && c1.is_finite() && c2 >= c1) {
        return Err(ConditionError::DegenerateCertificate(format!(
            "fitted nu = {nu:.3e}, c1 = {c1:.3e}, c2 = {c2:.3e}"
        )));
    }

    Ok(LyapunovCertificate {
        phi: PhiSpec::Arc(ArcPhi { table, sigma_z, phi, p: p_nodes }),
        z: z.clone(),
        nu,
        k: 1.0,
        a: 2,
        c1,
        c2,
        rho,
        lambda: Some(lambda),
    })
}

/// Fits a certificate around z for a user-supplied Lyapunov function on
/// the sampled manifold: nu from the decay inequality with a safety
/// factor, c1/c2 from the two-sided power bounds inside the ball of
/// radius rho = quarter of the sampled chart diameter.
pub fn fit_ambient_certificate(
    rf: &ReducedField,
    mf: &SlowManifold,
    phi: SmoothMap,
    z: &DVector<f64>,
    a: u32,
    k: f64,
    n_samples: usize,
) -> Result<LyapunovCertificate, ConditionError> {
    if k < 1.0 {
        return Err(ConditionError::ExponentOutOfRange { k });
    }
    let sample = sample_manifold(mf, n_samples)?;
    let points = &sample.points;
    // Chart diameter from a bounded subsample of point pairs.
    let stride = (points.len() / 128).max(1);
    let sub: Vec<&DVector<f64>> = points.iter().step_by(stride).collect();
    let mut diameter = 0.0f64;
    for i in 0..sub.len() {
        for j in i + 1..sub.len() {
            diameter = diameter.max((sub[i] - sub[j]).norm());
        }
    }
    let rho = diameter / 4.0;

    let mut nu = f64::INFINITY;
    let mut c1 = f64::INFINITY;
    let mut c2 = 0.0f64;
    for x in points {
        let (v, grad) = phi.eval_with_jacobian(x.as_slice());
        let q = rf.eval(x.as_slice())?;
        let lq = (grad * q)[(0, 0)];
        let val = v[0];
        if val > PHI_FLOOR {
            let ratio = -lq / val.powf(k);
            nu = nu.min(ratio);
        }
        let d = (x - z).norm();
        if d > 1e-12 && d <= rho {
            let ratio = val / d.powi(a as i32);
            c1 = c1.min(ratio);
            c2 = c2.max(ratio);
        }
    }
    nu *= NU_SAFETY;
    if !(nu > 0.0 && nu.is_finite() && c1 > 0.0 && c1.is_finite() && c2 >= c1) {
        return Err(ConditionError::DegenerateCertificate(format!(
            "fitted nu = {nu:.3e}, c1 = {c1:.3e}, c2 = {c2:.3e}"
        )));
    }
    Ok(LyapunovCertificate {
        phi: PhiSpec::Ambient(phi),
        z: z.clone(),
        nu,
        k,
        a,
        c1,
        c2,
        rho,
        lambda: None,
    })
}

/// Re-checks a populated certificate at fresh manifold samples:
/// (i) phi vanishes at z and is positive elsewhere, (ii) the two-sided
/// power bounds hold inside the rho-ball, (iii) L_q(phi) <= -nu phi^k.
pub fn verify_lyapunov(
    cert: &LyapunovCertificate,
    rf: &ReducedField,
    mf: &SlowManifold,
    n_samples: usize,
) -> Result<ConditionReport, ConditionError> {
    let sample = sample_manifold(mf, n_samples)?;
    let eval = |x: &DVector<f64>| -> Result<(f64, f64), ConditionError> {
        match &cert.phi {
            PhiSpec::Ambient(map) => {
                let (v, grad) = map.eval_with_jacobian(x.as_slice());
                let q = rf.eval(x.as_slice())?;
                Ok((v[0], (grad * q)[(0, 0)]))
            }
            PhiSpec::Arc(ap) => Ok(ap.eval(x)),
        }
    };

    let mut report = ConditionReport::default();

    // (i) unique zero at z.
    let (phi_z, _) = eval(&cert.z)?;
    let mut positivity = if phi_z.abs() <= 1e-8 {
        Ok((0usize, f64::INFINITY))
    } else {
        Err((cert.z.as_slice().to_vec(), format!("phi(z) = {phi_z:.3e} is not zero")))
    };
    // (ii) power bounds, (iii) decay inequality.
    let mut bounds: Result<(usize, f64), (Vec<f64>, String)> = Ok((0, f64::INFINITY));
    let mut decay: Result<(usize, f64), (Vec<f64>, String)> = Ok((0, f64::INFINITY));

    let af = cert.a as i32;
    for x in &sample.points {
        let (phi, lq) = eval(x)?;
        let d = (x - &cert.z).norm();
        if let Ok((count, margin)) = &mut positivity {
            if d > 1e-7 {
                if phi <= 0.0 {
                    positivity = Err((
                        x.as_slice().to_vec(),
                        format!("phi = {phi:.3e} at distance {d:.3e} from z"),
                    ));
                } else {
                    *count += 1;
                    *margin = margin.min(phi);
                }
            }
        }
        if let Ok((count, margin)) = &mut bounds {
            if d > 1e-9 && d <= cert.rho {
                let da = d.powi(af);
                let slack = (phi - cert.c1 * da).min(cert.c2 * da - phi);
                if slack < -1e-6 * (1.0 + phi.abs()) {
                    bounds = Err((
                        x.as_slice().to_vec(),
                        format!(
                            "phi = {phi:.6e} outside [{:.6e}, {:.6e}]",
                            cert.c1 * da,
                            cert.c2 * da
                        ),
                    ));
                } else {
                    *count += 1;
                    *margin = margin.min(slack);
                }
            }
        }
        if let Ok((count, margin)) = &mut decay {
            let slack = -cert.nu * phi.powf(cert.k) - lq;
            if slack < -1e-7 * (1.0 + lq.abs()) {
                decay = Err((
                    x.as_slice().to_vec(),
                    format!("L_q phi = {lq:.6e} exceeds -nu phi^k = {:.6e}", -cert.nu * phi.powf(cert.k)),
                ));
            } else {
                *count += 1;
                *margin = margin.min(slack);
            }
        }
    }

    let wrap = |res: Result<(usize, f64), (Vec<f64>, String)>, empty_reason: &str| match res {
        Ok((0, _)) => Verdict::Skipped { reason: empty_reason.to_string() },
        Ok((samples, margin)) => Verdict::CertifiedAtSamples { samples, margin },
        Err((witness, detail)) => Verdict::Failed { witness, detail },
    };
    report.push("phi-positivity", wrap(positivity, "no samples away from z"));
    report.push("norm-equivalence", wrap(bounds, "no samples inside the comparison ball"));
    report.push("decay-inequality", wrap(decay, "no samples"));
    Ok(report)
}

/// Decay envelope gamma(tau) of the distance to z implied by a
/// certificate: exp(-nu tau / a) for k = 1 and the algebraic envelope
/// ((k-1) nu tau phi0^{k-1} + 1)^{1/[a(1-k)]} for k > 1; gamma(0) = 1 and
/// gamma is strictly decreasing.
pub fn decay_envelope(
    cert: &LyapunovCertificate,
    phi0: f64,
    tau: f64,
) -> Result<f64, ConditionError> {
    if cert.k < 1.0 {
        return Err(ConditionError::ExponentOutOfRange { k: cert.k });
    }
    assert!(tau >= 0.0, "decay envelope needs tau >= 0");
    assert!(phi0 > 0.0, "decay envelope needs phi0 > 0");
    let a = cert.a as f64;
    if (cert.k - 1.0).abs() < 1e-12 {
        Ok((-cert.nu * tau / a).exp())
    } else {
        let k = cert.k;
        let base = (k - 1.0) * cert.nu * tau * phi0.powf(k - 1.0) + 1.0;
        Ok(base.powf(1.0 / (a * (1.0 - k))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::Dual;
    use crate::manifold::Chart;
    use crate::model::{SmoothMatMap, SystemBuilder};
    use crate::reduction::{decompose_structural, Decomposition};

    fn toy() -> (PerturbedSystem, SlowManifold, ReducedField) {
        let sys = SystemBuilder::new("linear_toy", 2)
            .h0(|x, out| {
                out[0] = Dual::constant(0.0);
                out[1] = -&x[1];
            })
            .h1(|x, out| {
                out[0] = -&x[0];
                out[1] = Dual::constant(0.0);
            })
            .build();
        let s = DMatrix::from_column_slice(2, 1, &[0.0, -1.0]);
        let rates = SmoothMap::new(2, 1, |x, out| out[0] = x[1].clone());
        let dec = decompose_structural(&s, &[0], &rates).unwrap();
        let rf = ReducedField::new(&sys, &dec);
        let region = Polytope::from_box(&[0.0, 0.0], &[1.0, 1.0], "unit box").unwrap();
        let domain = Polytope::from_box(&[0.0], &[1.0], "w interval").unwrap();
        let gamma = SmoothMap::new(1, 1, |_, out| out[0] = Dual::constant(0.0));
        let chart = Chart::Graph { slow: vec![0], fast: vec![1], gamma, domain };
        let mf = SlowManifold::new(dec, region, chart);
        (sys, mf, rf)
    }

    #[test]
    fn toy_tf0_tfi_certified() {
        let (sys, mf, _) = toy();
        let (tf0, tfi) = check_tf0_tfi(&sys, &mf.dec.clone(), &mf, 20).unwrap();
        assert!(tf0.is_certified(), "{tf0}");
        assert!(tfi.is_certified(), "{tfi}");
        assert!(tf0.margin().unwrap() > 0.5);
        assert!(tfi.margin().unwrap() > 0.5);
    }

    #[test]
    fn jordan_block_fails_tfi_but_not_tf0() {
        // Dh0 = [[0,1],[0,0]]: rank 1 matches r, but the zero eigenvalue
        // has algebraic multiplicity 2 and geometric multiplicity 1.
        let sys = SystemBuilder::new("jordan", 2)
            .h0(|x, out| {
                out[0] = x[1].clone();
                out[1] = Dual::constant(0.0);
            })
            .h1(|x, out| {
                out[0] = -&x[0];
                out[1] = Dual::constant(0.0);
            })
            .build();
        let p = SmoothMatMap::new(2, 2, 1, |_, out| {
            out[0] = Dual::constant(1.0);
            out[1] = Dual::constant(0.0);
        });
        let mu = SmoothMap::new(2, 1, |x, out| out[0] = x[1].clone());
        let dec = Decomposition::user_supplied(p, mu).unwrap();
        let region = Polytope::from_box(&[0.0, 0.0], &[1.0, 1.0], "unit box").unwrap();
        let domain = Polytope::from_box(&[0.0], &[1.0], "w interval").unwrap();
        let gamma = SmoothMap::new(1, 1, |_, out| out[0] = Dual::constant(0.0));
        let mf = SlowManifold::new(
            dec.clone(),
            region,
            Chart::Graph { slow: vec![0], fast: vec![1], gamma, domain },
        );
        let (tf0, tfi) = check_tf0_tfi(&sys, &dec, &mf, 10).unwrap();
        assert!(tf0.is_certified(), "{tf0}");
        assert!(!tfi.is_certified(), "{tfi}");
        match tfi {
            Verdict::Failed { detail, .. } => assert!(detail.contains("kernel route")),
            other => panic!("expected failure, got {other}"),
        }
    }

    #[test]
    fn toy_tfii_certified() {
        let (sys, mf, _) = toy();
        let verdict = check_tfii(&sys, &mf, 20).unwrap();
        assert!(verdict.is_certified(), "{verdict}");
        assert!((verdict.margin().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hurwitz_routes_agree() {
        let verdict = check_hurwitz_symbolic_match();
        assert!(verdict.is_certified(), "{verdict}");
        assert!(verdict.margin().unwrap() < 1e-9);
    }

    #[test]
    fn hurwitz_constants_at_origin() {
        let poly = char_poly(&maltose_minor(0.0, 0.0, 0.0, 0.0)).unwrap();
        let (a1, a2, a3) = (poly.coeff(2), poly.coeff(1), poly.coeff(0));
        assert!((a1 - 3.0).abs() < 1e-12);
        assert!((a1 * a2 - a3 - 8.0).abs() < 1e-12);
        assert!((a3 - 1.0).abs() < 1e-12);
        let (a1p, h2p, a3p) = maltose_hurwitz_closed_form(0.0, 0.0, 0.0, 0.0);
        assert_eq!((a1p, h2p, a3p), (3.0, 8.0, 1.0));
    }

    #[test]
    fn unstable_minor_is_flagged() {
        // d < -3 makes A1 = 3 + d negative, which no Hurwitz test accepts.
        let poly = char_poly(&maltose_minor(0.0, 0.0, 0.0, -3.2)).unwrap();
        let report = routh_hurwitz(&poly);
        assert!(!report.stable);
        let roots = poly.roots();
        assert!(roots.iter().any(|r| r.re > 0.0), "some root crossed into the right half plane");
    }

    #[test]
    fn cis_toy_certified() {
        let (sys, mf, _) = toy();
        let verdict = check_cis(&sys, &mf.region, &[0.1, 0.01], 8);
        assert!(verdict.is_certified(), "{verdict}");
        assert!(verdict.margin().unwrap() >= -FLUX_TOL);
    }

    #[test]
    fn cis_detects_outward_drift() {
        // Constant rightward slow drift exits through the face x1 = 1/2.
        let sys = SystemBuilder::new("drift", 2)
            .h0(|x, out| {
                out[0] = Dual::constant(0.0);
                out[1] = -&x[1];
            })
            .h1(|_, out| {
                out[0] = Dual::constant(1.0);
                out[1] = Dual::constant(0.0);
            })
            .build();
        let small = Polytope::from_box(&[0.0, 0.0], &[0.5, 0.5], "shrunken box").unwrap();
        let verdict = check_cis(&sys, &small, &[0.1], 6);
        match verdict {
            Verdict::Failed { detail, .. } => assert!(detail.contains("outward flux")),
            other => panic!("expected a violation, got {other}"),
        }
    }

    #[test]
    fn toy_has_unique_stationary_point_at_origin() {
        let (_, mf, rf) = toy();
        let roots = find_stationary_points(&rf, &mf, &mf.region).unwrap();
        assert_eq!(roots.len(), 1, "{roots:?}");
        assert!(roots[0].norm() < 1e-10);
    }

    #[test]
    fn toy_certificate_matches_closed_forms() {
        // q = (-x1, 0) on Y = {x2 = 0}: p(sigma) = -sigma, phi = sigma^2/2,
        // so the fitted quantities are nu = 0.9 * min(p^2/phi) = 1.8 and
        // c1 = c2 = 1/2.
        let (_, mf, rf) = toy();
        let z = DVector::from_vec(vec![0.0, 0.0]);
        let cert = check_lc_1d(&rf, &mf, &z).unwrap();
        assert!((cert.nu - 1.8).abs() < 1e-6, "nu = {}", cert.nu);
        assert!((cert.c1 - 0.5).abs() < 1e-6, "c1 = {}", cert.c1);
        assert!((cert.c2 - 0.5).abs() < 1e-6, "c2 = {}", cert.c2);
        assert!((cert.rho - 0.25).abs() < 1e-9);
        assert_eq!(cert.a, 2);
        assert_eq!(cert.k, 1.0);
        let lambda = cert.lambda.unwrap();
        assert!((lambda + 1.0).abs() < 1e-6, "lambda = {lambda}");
        assert!((cert.contraction_constant() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn toy_certificate_verifies() {
        let (_, mf, rf) = toy();
        let z = DVector::from_vec(vec![0.0, 0.0]);
        let cert = check_lc_1d(&rf, &mf, &z).unwrap();
        let report = verify_lyapunov(&cert, &rf, &mf, 60).unwrap();
        assert!(report.all_certified(), "{report}");
        for name in ["phi-positivity", "norm-equivalence", "decay-inequality"] {
            assert!(report.get(name).unwrap().is_certified(), "{name}");
        }
    }

    #[test]
    fn ambient_certificate_on_toy() {
        // phi = x1 is linear near z = 0, so a = 1 and L_q phi = -x1 = -phi
        // give a fitted nu of exactly 0.9.
        let (_, mf, rf) = toy();
        let phi = SmoothMap::new(2, 1, |x, out| out[0] = x[0].clone());
        let z = DVector::from_vec(vec![0.0, 0.0]);
        let cert = fit_ambient_certificate(&rf, &mf, phi, &z, 1, 1.0, 50).unwrap();
        assert!((cert.nu - 0.9).abs() < 1e-9, "nu = {}", cert.nu);
        let report = verify_lyapunov(&cert, &rf, &mf, 50).unwrap();
        assert!(report.all_certified(), "{report}");
    }

    #[test]
    fn broken_decay_rate_is_caught() {
        let (_, mf, rf) = toy();
        let phi = SmoothMap::new(2, 1, |x, out| out[0] = x[0].clone());
        let z = DVector::from_vec(vec![0.0, 0.0]);
        let mut cert = fit_ambient_certificate(&rf, &mf, phi, &z, 1, 1.0, 50).unwrap();
        cert.nu = 2.0; // decay claim now exceeds the actual rate of 1
        let report = verify_lyapunov(&cert, &rf, &mf, 50).unwrap();
        assert!(!report.all_certified());
        assert!(!report.get("decay-inequality").unwrap().is_certified());
    }

    #[test]
    fn envelope_formulas() {
        let (_, mf, rf) = toy();
        let z = DVector::from_vec(vec![0.0, 0.0]);
        let mut cert = check_lc_1d(&rf, &mf, &z).unwrap();
        cert.nu = 1.0;
        cert.k = 1.0;
        cert.a = 2;
        assert!((decay_envelope(&cert, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((decay_envelope(&cert, 1.0, 2.0).unwrap() - (-1.0f64).exp()).abs() < 1e-12);
        cert.k = 2.0;
        assert!((decay_envelope(&cert, 1.0, 3.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((decay_envelope(&cert, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        cert.k = 0.5;
        assert!(matches!(
            decay_envelope(&cert, 1.0, 1.0),
            Err(ConditionError::ExponentOutOfRange { .. })
        ));
    }
}
