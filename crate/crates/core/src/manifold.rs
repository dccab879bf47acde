//! The slow manifold Y = V(mu) inside a compact region: graph and
//! one-dimensional charts, manifold sampling, tangent spaces, arc-length
//! tables, and projection of initial values along fast fibers.

use nalgebra::{DMatrix, DVector};

use crate::integrate::{integrate, FnField, IntegratorConfig, Method};
use crate::linalg::kernel_basis;
use crate::model::{Membership, PerturbedSystem, Polytope, SmoothMap};
use crate::reduction::{newton_mu_correction, Decomposition, ReductionError};

/// Max-norm residual of mu below which a point counts as on the manifold.
pub const TOL_Y: f64 = 1e-10;
/// Max-norm of the fast field below which its flow counts as settled.
pub const TOL_FP: f64 = 1e-12;
/// Fast-flow integration happens in chunks of this length, up to the cap.
const PROJECTION_CHUNK: f64 = 4.0;
const PROJECTION_T_MAX: f64 = 400.0;
/// Newton iteration budget of the continuation corrector.
const CORRECTOR_MAX_ITER: usize = 10;
/// Consecutive corrector failures before continuation gives up.
const STALL_LIMIT: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum ManifoldError {
    #[error(
        "fast flow did not settle within t = {t_max}: |h0| = {speed:.3e}, \
         |mu| = {residual:.3e} at {state:?}"
    )]
    ProjectionDiverged { t_max: f64, speed: f64, residual: f64, state: Vec<f64> },
    #[error("point is off the manifold: |mu| = {residual:.3e} exceeds {tol:.1e}")]
    OffManifold { residual: f64, tol: f64 },
    #[error("Dmu has rank {rank} at {state:?}, expected {expected} (constant rank fails)")]
    RankDefect { state: Vec<f64>, rank: usize, expected: usize },
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error("{0}")]
    Chart(String),
}

/// How the manifold is parameterized.
#[derive(Clone)]
pub enum Chart {
    /// Y is the graph of `gamma` over the domain W in the slow coordinates:
    /// x[slow] = w, x[fast] = gamma(w).
    Graph { slow: Vec<usize>, fast: Vec<usize>, gamma: SmoothMap, domain: Polytope },
    /// One-dimensional curve traced from a seed by arc-length continuation;
    /// `orientation` (+-1) fixes which branch counts as forward.
    Curve1d { seed: DVector<f64>, orientation: f64 },
    /// Implicit description only; sampling is unavailable.
    Implicit,
}

#[derive(Clone)]
pub struct SlowManifold {
    pub dec: Decomposition,
    pub region: Polytope,
    pub chart: Chart,
}

impl SlowManifold {
    pub fn new(dec: Decomposition, region: Polytope, chart: Chart) -> Self {
        assert_eq!(dec.dim(), region.dim, "decomposition and region dimensions differ");
        if let Chart::Graph { slow, fast, gamma, domain } = &chart {
            assert_eq!(slow.len() + fast.len(), region.dim);
            assert_eq!(gamma.dim_in, slow.len());
            assert_eq!(gamma.dim_out, fast.len());
            assert_eq!(domain.dim, slow.len());
        }
        SlowManifold { dec, region, chart }
    }

    pub fn ambient_dim(&self) -> usize {
        self.region.dim
    }

    pub fn slow_dim(&self) -> usize {
        self.ambient_dim() - self.dec.r
    }

    pub fn mu_residual(&self, x: &[f64]) -> f64 {
        self.dec.mu.eval(x).amax()
    }

    /// Ambient point of a graph chart at slow coordinates `w`.
    pub fn embed(&self, w: &[f64]) -> DVector<f64> {
        let Chart::Graph { slow, fast, gamma, .. } = &self.chart else {
            panic!("embed is only defined for graph charts");
        };
        let g = gamma.eval(w);
        let mut x = DVector::zeros(self.ambient_dim());
        for (i, &si) in slow.iter().enumerate() {
            x[si] = w[i];
        }
        for (j, &fj) in fast.iter().enumerate() {
            x[fj] = g[j];
        }
        x
    }
}

/// Points on Y together with their chart parameters (w for graphs, the
/// signed arc length for curves). `diagnostic` is set when continuation
/// stopped early; the collected prefix is still valid.
#[derive(Debug, Clone)]
pub struct ManifoldSample {
    pub points: Vec<DVector<f64>>,
    pub chart_params: Vec<Vec<f64>>,
    pub diagnostic: Option<String>,
}

/// Validates that `x` is on the manifold, polishing with fast-direction
/// Newton steps if the residual is above `TOL_Y`.
fn settle_on_manifold(dec: &Decomposition, x: DVector<f64>) -> Result<DVector<f64>, ManifoldError> {
    let residual = dec.mu.eval(x.as_slice()).amax();
    if residual <= TOL_Y {
        return Ok(x);
    }
    let (polished, res) = newton_mu_correction(dec, x.as_slice(), 10, 1e-13)?;
    if res > TOL_Y {
        return Err(ManifoldError::OffManifold { residual: res, tol: TOL_Y });
    }
    Ok(polished)
}

/// Samples approximately `n` manifold points: a tensor grid of cell centers
/// through graph charts, or arc-length continuation for curve charts.
pub fn sample_manifold(mf: &SlowManifold, n: usize) -> Result<ManifoldSample, ManifoldError> {
    assert!(n >= 2, "need at least two samples");
    match &mf.chart {
        Chart::Graph { .. } => sample_graph(mf, n),
        Chart::Curve1d { .. } => {
            let table = ArcTable::build(mf, n)?;
            Ok(ManifoldSample {
                chart_params: table.sigmas.iter().map(|&s| vec![s]).collect(),
                points: table.points,
                diagnostic: table.diagnostic,
            })
        }
        Chart::Implicit => Err(ManifoldError::Chart(
            "manifold has no chart; sampling an implicit-only manifold is not supported".into(),
        )),
    }
}

fn sample_graph(mf: &SlowManifold, n: usize) -> Result<ManifoldSample, ManifoldError> {
    let Chart::Graph { domain, .. } = &mf.chart else { unreachable!() };
    let s = domain.dim;
    let (lo, hi) = domain.bounding_box();
    let mut k = (n as f64).powf(1.0 / s as f64).ceil() as usize;
    k = k.max(2);
    for _ in 0..8 {
        let mut ws: Vec<Vec<f64>> = Vec::new();
        let mut idx = vec![0usize; s];
        loop {
            let w: Vec<f64> =
                (0..s).map(|j| lo[j] + (idx[j] as f64 + 0.5) * (hi[j] - lo[j]) / k as f64).collect();
            if domain.contains(&w, 1e-9) {
                ws.push(w);
            }
            let mut carry = 0;
            loop {
                idx[carry] += 1;
                if idx[carry] < k {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
                if carry == s {
                    break;
                }
            }
            if carry == s {
                break;
            }
        }
        if ws.len() >= n {
            let mut points = Vec::with_capacity(n);
            let mut params = Vec::with_capacity(n);
            for j in 0..n {
                let w = &ws[j * ws.len() / n];
                let x = settle_on_manifold(&mf.dec, mf.embed(w))?;
                if mf.region.contains(x.as_slice(), 1e-7) {
                    points.push(x);
                    params.push(w.clone());
                }
            }
            return Ok(ManifoldSample { points, chart_params: params, diagnostic: None });
        }
        k = (k * 3).div_ceil(2);
    }
    Err(ManifoldError::Chart(format!("chart domain `{}` yields too few grid points", domain.label)))
}

/// Maps an initial value to the slow manifold along its fast fiber by
/// integrating x' = h0(x) until the fast flow settles, then polishing with
/// Newton steps along the fast directions. The limit realizes the
/// intersection of the level set of the fast first integrals with Y.
pub fn fast_fiber_project(
    sys: &PerturbedSystem,
    mf: &SlowManifold,
    x0: &[f64],
) -> Result<DVector<f64>, ManifoldError> {
    let field = FnField {
        dim: sys.dim,
        f: |x: &[f64], out: &mut [f64]| {
            let v = sys.h0.eval(x);
            out.copy_from_slice(v.as_slice());
        },
    };
    let cfg = IntegratorConfig {
        rtol: 1e-12,
        atol: 1e-14,
        h_init: 1e-4,
        method: Method::BogackiShampine,
        ..Default::default()
    };
    let mut x = DVector::from_column_slice(x0);
    let mut t_used = 0.0;
    loop {
        let speed = sys.h0.eval(x.as_slice()).amax();
        if speed < TOL_FP {
            break;
        }
        if t_used >= PROJECTION_T_MAX {
            return Err(ManifoldError::ProjectionDiverged {
                t_max: PROJECTION_T_MAX,
                speed,
                residual: mf.mu_residual(x.as_slice()),
                state: x.as_slice().to_vec(),
            });
        }
        let traj = match integrate(&field, x.as_slice(), PROJECTION_CHUNK, &cfg) {
            Ok(t) => t,
            Err(_) => {
                return Err(ManifoldError::ProjectionDiverged {
                    t_max: PROJECTION_T_MAX,
                    speed,
                    residual: mf.mu_residual(x.as_slice()),
                    state: x.as_slice().to_vec(),
                })
            }
        };
        x = traj.end_state().clone();
        t_used += PROJECTION_CHUNK;
    }
    let (polished, residual) = newton_mu_correction(&mf.dec, x.as_slice(), 10, 1e-13)?;
    if residual > TOL_Y {
        return Err(ManifoldError::OffManifold { residual, tol: TOL_Y });
    }
    Ok(polished)
}

/// Orthonormal basis of the tangent space ker Dmu(x); `x` must lie on Y.
pub fn tangent_space(mf: &SlowManifold, x: &[f64]) -> Result<DMatrix<f64>, ManifoldError> {
    let residual = mf.mu_residual(x);
    if residual > 10.0 * TOL_Y {
        return Err(ManifoldError::OffManifold { residual, tol: 10.0 * TOL_Y });
    }
    let dmu = mf.dec.mu.jacobian(x);
    let basis = kernel_basis(&dmu, 1e-8);
    let expected = mf.slow_dim();
    if basis.ncols() != expected {
        return Err(ManifoldError::RankDefect {
            state: x.to_vec(),
            rank: mf.ambient_dim() - basis.ncols(),
            expected: mf.dec.r,
        });
    }
    Ok(basis)
}

/// Arc-length parameterization of a one-dimensional manifold: ascending
/// signed arc lengths with their ambient points. For curve charts sigma is
/// measured from the seed; for graph charts from the lower domain end.
#[derive(Debug, Clone)]
pub struct ArcTable {
    pub sigmas: Vec<f64>,
    pub points: Vec<DVector<f64>>,
    pub diagnostic: Option<String>,
}

impl ArcTable {
    pub fn build(mf: &SlowManifold, n: usize) -> Result<ArcTable, ManifoldError> {
        assert!(n >= 2);
        if mf.slow_dim() != 1 {
            return Err(ManifoldError::Chart(
                "arc tables require a one-dimensional slow manifold".into(),
            ));
        }
        match &mf.chart {
            Chart::Graph { .. } => build_arc_from_graph(mf, n),
            Chart::Curve1d { seed, orientation } => {
                let seed = seed.clone();
                build_arc_from_curve(mf, &seed, *orientation, n)
            }
            Chart::Implicit => {
                Err(ManifoldError::Chart("implicit-only manifolds have no arc table".into()))
            }
        }
    }

    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    pub fn sigma_range(&self) -> (f64, f64) {
        (self.sigmas[0], *self.sigmas.last().unwrap())
    }

    /// Linear interpolation of the curve at arc length `sigma`.
    pub fn point_at(&self, sigma: f64) -> DVector<f64> {
        let (lo, hi) = self.sigma_range();
        assert!(sigma >= lo - 1e-12 && sigma <= hi + 1e-12, "sigma {sigma} outside [{lo}, {hi}]");
        let idx = match self.sigmas.binary_search_by(|v| v.partial_cmp(&sigma).unwrap()) {
            Ok(i) => return self.points[i].clone(),
            Err(i) => i.clamp(1, self.sigmas.len() - 1),
        };
        let (s0, s1) = (self.sigmas[idx - 1], self.sigmas[idx]);
        let t = (sigma - s0) / (s1 - s0);
        &self.points[idx - 1] * (1.0 - t) + &self.points[idx] * t
    }

    /// Index of the table point closest to `x`.
    pub fn nearest_index(&self, x: &DVector<f64>) -> usize {
        let mut best = (0usize, f64::INFINITY);
        for (i, p) in self.points.iter().enumerate() {
            let d = (p - x).norm();
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    /// Arc length of the point on the (piecewise linear) curve closest to
    /// `x`, found by projecting onto the segments around the nearest node.
    pub fn project_sigma(&self, x: &DVector<f64>) -> f64 {
        let i = self.nearest_index(x);
        let mut best = (self.sigmas[i], (&self.points[i] - x).norm());
        for seg in [i.wrapping_sub(1), i] {
            if seg >= self.points.len().saturating_sub(1) {
                continue;
            }
            let (pa, pb) = (&self.points[seg], &self.points[seg + 1]);
            let chord = pb - pa;
            let len2 = chord.norm_squared();
            if len2 == 0.0 {
                continue;
            }
            let t = ((x - pa).dot(&chord) / len2).clamp(0.0, 1.0);
            let proj = pa + &chord * t;
            let d = (&proj - x).norm();
            if d < best.1 {
                best = (self.sigmas[seg] + t * (self.sigmas[seg + 1] - self.sigmas[seg]), d);
            }
        }
        best.0
    }
}

fn build_arc_from_graph(mf: &SlowManifold, n: usize) -> Result<ArcTable, ManifoldError> {
    let Chart::Graph { gamma, domain, .. } = &mf.chart else { unreachable!() };
    let (lo, hi) = domain.bounding_box();
    let (lo, hi) = (lo[0], hi[0]);
    let speed = |w: f64| -> f64 {
        let j = gamma.jacobian(&[w]);
        (1.0 + j.column(0).norm_squared()).sqrt()
    };
    let h = (hi - lo) / n as f64;
    let mut sigmas = Vec::with_capacity(n + 1);
    let mut points = Vec::with_capacity(n + 1);
    let mut sigma = 0.0;
    for i in 0..=n {
        let w = lo + i as f64 * h;
        if i > 0 {
            // Simpson on [w - h, w]
            let a = w - h;
            sigma += h / 6.0 * (speed(a) + 4.0 * speed(a + 0.5 * h) + speed(w));
        }
        let x = settle_on_manifold(&mf.dec, mf.embed(&[w]))?;
        sigmas.push(sigma);
        points.push(x);
    }
    Ok(ArcTable { sigmas, points, diagnostic: None })
}

/// Newton corrector onto the curve: solves mu(z) = 0 subject to staying in
/// the hyperplane through `pred` orthogonal to the current tangent.
fn correct_onto_curve(
    dec: &Decomposition,
    pred: &DVector<f64>,
    tangent: &DVector<f64>,
) -> Result<DVector<f64>, String> {
    let m = pred.len();
    let r = dec.r;
    let mut z = pred.clone();
    for _ in 0..CORRECTOR_MAX_ITER {
        let (mu, dmu) = dec.mu.eval_with_jacobian(z.as_slice());
        let mut a = DMatrix::zeros(m, m);
        a.rows_mut(0, r).copy_from(&dmu);
        a.row_mut(r).copy_from(&tangent.transpose());
        let mut rhs = DVector::zeros(m);
        rhs.rows_mut(0, r).copy_from(&mu);
        rhs[r] = tangent.dot(&(&z - pred));
        let delta = a.lu().solve(&rhs).ok_or("singular corrector matrix")?;
        if !delta.iter().all(|v| v.is_finite()) {
            return Err("corrector step is not finite".into());
        }
        z -= &delta;
        if delta.amax() <= 1e-13 * (1.0 + z.amax()) {
            break;
        }
    }
    let residual = dec.mu.eval(z.as_slice()).amax();
    if residual > TOL_Y {
        return Err(format!("corrector left |mu| = {residual:.3e}"));
    }
    Ok(z)
}

/// Unit tangent at a curve point, aligned with `prefer` when given.
fn curve_tangent(
    mf: &SlowManifold,
    x: &DVector<f64>,
    prefer: Option<&DVector<f64>>,
) -> Result<DVector<f64>, String> {
    let dmu = mf.dec.mu.jacobian(x.as_slice());
    let basis = kernel_basis(&dmu, 1e-8);
    if basis.ncols() != 1 {
        return Err(format!("tangent is not one-dimensional (kernel dim {})", basis.ncols()));
    }
    let mut t = basis.column(0).clone_owned();
    if let Some(p) = prefer {
        if t.dot(p) < 0.0 {
            t = -t;
        }
    }
    Ok(t)
}

struct Branch {
    sigmas: Vec<f64>,
    points: Vec<DVector<f64>>,
    diagnostic: Option<String>,
}

/// Traces one branch until the region boundary, a stall, or the point cap.
fn trace_branch(mf: &SlowManifold, start: &DVector<f64>, sign: f64, ds0: f64, cap: usize) -> Branch {
    let mut out = Branch { sigmas: Vec::new(), points: Vec::new(), diagnostic: None };
    let mut x = start.clone();
    let mut sigma = 0.0f64;
    let mut dir: Option<DVector<f64>> = None;
    let mut ds = ds0;
    let mut fails = 0usize;
    while out.points.len() < cap {
        let tangent = match curve_tangent(mf, &x, dir.as_ref()) {
            Ok(mut t) => {
                if dir.is_none() && sign < 0.0 {
                    t = -t;
                }
                t
            }
            Err(e) => {
                out.diagnostic = Some(format!("tangent failed at sigma = {sigma:.4}: {e}"));
                return out;
            }
        };
        let pred = &x + &tangent * ds;
        match correct_onto_curve(&mf.dec, &pred, &tangent) {
            Ok(z) => {
                if matches!(mf.region.membership(z.as_slice(), 1e-9), Membership::Outside) {
                    if let Some(b) = boundary_point(mf, &x, &tangent, ds) {
                        let step = (&b - &x).norm();
                        if step > 1e-12 {
                            sigma += step;
                            out.sigmas.push(sigma);
                            out.points.push(b);
                        }
                    }
                    return out;
                }
                sigma += (&z - &x).norm();
                dir = Some(tangent);
                x = z;
                out.sigmas.push(sigma);
                out.points.push(x.clone());
                fails = 0;
                ds = (ds * 2.0).min(ds0);
            }
            Err(e) => {
                fails += 1;
                if fails >= STALL_LIMIT {
                    out.diagnostic = Some(format!(
                        "continuation stalled after {fails} corrector failures at \
                         sigma = {sigma:.4}: {e}"
                    ));
                    return out;
                }
                ds *= 0.5;
            }
        }
    }
    out.diagnostic = Some(format!("point cap {cap} reached at sigma = {sigma:.4}"));
    out
}

/// Largest step along `tangent` from `x` whose corrected point stays in the
/// region; used to land on the boundary when a branch ends.
fn boundary_point(
    mf: &SlowManifold,
    x: &DVector<f64>,
    tangent: &DVector<f64>,
    ds: f64,
) -> Option<DVector<f64>> {
    let mut lo = 0.0f64;
    let mut hi = ds;
    let mut best: Option<DVector<f64>> = None;
    for _ in 0..48 {
        let mid = 0.5 * (lo + hi);
        let pred = x + tangent * mid;
        match correct_onto_curve(&mf.dec, &pred, tangent) {
            Ok(z) if !matches!(mf.region.membership(z.as_slice(), 1e-9), Membership::Outside) => {
                best = Some(z);
                lo = mid;
            }
            _ => hi = mid,
        }
    }
    best
}

fn build_arc_from_curve(
    mf: &SlowManifold,
    seed: &DVector<f64>,
    orientation: f64,
    n: usize,
) -> Result<ArcTable, ManifoldError> {
    let seed = settle_on_manifold(&mf.dec, seed.clone())?;
    if !mf.region.contains(seed.as_slice(), 1e-7) {
        return Err(ManifoldError::Chart("curve seed lies outside the region".into()));
    }
    let assemble = |fwd: Branch, bwd: Branch, seed: &DVector<f64>| -> ArcTable {
        let mut sigmas = Vec::with_capacity(fwd.points.len() + bwd.points.len() + 1);
        let mut points = Vec::with_capacity(sigmas.capacity());
        for i in (0..bwd.points.len()).rev() {
            sigmas.push(-bwd.sigmas[i]);
            points.push(bwd.points[i].clone());
        }
        sigmas.push(0.0);
        points.push(seed.clone());
        for i in 0..fwd.points.len() {
            sigmas.push(fwd.sigmas[i]);
            points.push(fwd.points[i].clone());
        }
        let diagnostic = match (fwd.diagnostic, bwd.diagnostic) {
            (None, None) => None,
            (a, b) => Some(
                [a.map(|d| format!("forward: {d}")), b.map(|d| format!("backward: {d}"))]
                    .into_iter()
                    .flatten()
                    .collect::<Vec<_>>()
                    .join("; "),
            ),
        };
        ArcTable { sigmas, points, diagnostic }
    };

    // First pass measures the curve length, the second distributes n steps
    // along it.
    let coarse_ds = mf.region.diameter() / 48.0;
    let fwd = trace_branch(mf, &seed, orientation, coarse_ds, 4 * 48);
    let bwd = trace_branch(mf, &seed, -orientation, coarse_ds, 4 * 48);
    let coarse = assemble(fwd, bwd, &seed);
    if coarse.diagnostic.is_some() || coarse.len() < 2 {
        return Ok(coarse);
    }
    let (lo, hi) = coarse.sigma_range();
    let ds = (hi - lo) / n as f64;
    let fwd = trace_branch(mf, &seed, orientation, ds, 4 * n + 64);
    let bwd = trace_branch(mf, &seed, -orientation, ds, 4 * n + 64);
    Ok(assemble(fwd, bwd, &seed))
}
