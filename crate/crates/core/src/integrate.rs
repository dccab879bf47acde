//! Adaptive initial-value integration for autonomous fields: a linearly
//! implicit L-stable Rosenbrock pair of order 3(2) for stiff slow-time runs
//! and the Bogacki-Shampine 3(2) explicit pair otherwise, both with cubic
//! Hermite dense output, plus trajectory comparison and the eps-sweep used
//! by the convergence experiments.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::manifold::{self, SlowManifold};
use crate::model::{central_difference_jacobian, PerturbedSystem};
use crate::reduction::{newton_mu_correction, ReducedField};

/// Step-size controller limits: h never shrinks or grows faster than this.
const SHRINK_LIMIT: f64 = 0.2;
const GROWTH_LIMIT: f64 = 5.0;
const SAFETY: f64 = 0.9;
/// A step below this fraction of the horizon aborts the run.
const UNDERFLOW_FRACTION: f64 = 1e-14;
/// Grid used for sup-norm comparison of two trajectories.
pub const DEFAULT_COMPARE_GRID: usize = 512;
/// Tolerance passed to the per-step first-integral projection hook.
const SWEEP_PROJECTION_TOL: f64 = 1e-12;

/// Diagonal parameter of the Rosenbrock scheme; gamma = 1/2 together with
/// the stage weights below gives L-stability and a stiffly accurate pair.
const ROS_GAMMA: f64 = 0.5;

/// An autonomous vector field. Errors are plain strings; the integrator
/// wraps them with the time at which they occurred.
pub trait Field {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), String>;

    /// Jacobian for the implicit method; the default is central differences
    /// over `eval` and suffices when no cheaper derivative path exists.
    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>, String> {
        let n = self.dim();
        let probe = |p: &[f64]| -> DVector<f64> {
            let mut out = vec![0.0; n];
            match self.eval(p, &mut out) {
                Ok(()) => DVector::from_vec(out),
                Err(_) => DVector::from_element(n, f64::NAN),
            }
        };
        let j = central_difference_jacobian(&probe, x, 1e-6);
        if j.iter().any(|v| !v.is_finite()) {
            return Err(format!("jacobian probe failed near {x:?}"));
        }
        Ok(j)
    }
}

/// A field given by a plain closure; used by tests and small experiments.
pub struct FnField<F: Fn(&[f64], &mut [f64])> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64])> Field for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), String> {
        (self.f)(x, out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err("non-finite field value".into());
        }
        Ok(())
    }
}

/// The full system on the slow time scale: x' = h(x, eps) / eps.
pub struct SlowTimeField<'a> {
    sys: &'a PerturbedSystem,
    eps: f64,
}

impl<'a> SlowTimeField<'a> {
    pub fn new(sys: &'a PerturbedSystem, eps: f64) -> Self {
        assert!(eps > 0.0, "slow-time scaling needs eps > 0");
        SlowTimeField { sys, eps }
    }
}

impl Field for SlowTimeField<'_> {
    fn dim(&self) -> usize {
        self.sys.dim
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), String> {
        let h = self.sys.eval_h(x, self.eps).map_err(|e| e.to_string())?;
        for (o, &v) in out.iter_mut().zip(h.iter()) {
            *o = v / self.eps;
        }
        Ok(())
    }

    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>, String> {
        let j = self.sys.jacobian_h(x, self.eps) / self.eps;
        if j.iter().any(|v| !v.is_finite()) {
            return Err(format!("non-finite jacobian near {x:?}"));
        }
        Ok(j)
    }
}

impl Field for ReducedField {
    fn dim(&self) -> usize {
        ReducedField::dim(self)
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), String> {
        let v = ReducedField::eval(self, x).map_err(|e| e.to_string())?;
        out.copy_from_slice(v.as_slice());
        Ok(())
    }

    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>, String> {
        ReducedField::jacobian(self, x).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Linearly implicit Rosenbrock 3(2), L-stable and stiffly accurate;
    /// for stiff problems.
    Rosenbrock,
    /// Bogacki-Shampine 3(2), explicit with FSAL.
    BogackiShampine,
}

#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub method: Method,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: 1e-8,
            atol: 1e-12,
            h_init: 1e-4,
            h_max: f64::INFINITY,
            method: Method::Rosenbrock,
            max_steps: 2_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn explicit() -> Self {
        IntegratorConfig { method: Method::BogackiShampine, ..Default::default() }
    }

    fn validate(&self) {
        assert!(
            self.rtol > 0.0 && self.rtol <= 1e-2,
            "rtol must lie in (0, 1e-2], got {}",
            self.rtol
        );
        assert!(self.atol > 0.0, "atol must be positive");
        assert!(self.h_init > 0.0 && self.h_max > 0.0, "step sizes must be positive");
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IntegrateError {
    #[error("field evaluation failed at t = {t:.6e}: {msg}")]
    FieldEval { t: f64, msg: String },
    #[error(
        "step size underflow at t = {t:.6e} (h = {h:.3e}); singularity or \
         excessive stiffness for the requested tolerances"
    )]
    StepUnderflow { t: f64, h: f64, partial: Trajectory },
    #[error("exceeded {max_steps} steps at t = {t:.6e}")]
    MaxSteps { max_steps: usize, t: f64, partial: Trajectory },
    #[error(
        "window [{tau0:.3}, {t_end:.3}] not covered by trajectory on \
         [{have0:.3}, {have1:.3}]"
    )]
    WindowNotCovered { tau0: f64, t_end: f64, have0: f64, have1: f64 },
    #[error("invalid window: tau0 = {tau0} must be nonnegative and below T = {t_end}")]
    BadWindow { tau0: f64, t_end: f64 },
}

/// Accepted nodes (t, y, y') of an adaptive run, with cubic Hermite dense
/// output between nodes (exact at the nodes themselves).
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<DVector<f64>>,
    derivs: Vec<DVector<f64>>,
    pub steps: usize,
    pub rejections: usize,
}

impl Trajectory {
    fn new() -> Self {
        Trajectory { times: Vec::new(), states: Vec::new(), derivs: Vec::new(), steps: 0, rejections: 0 }
    }

    fn push(&mut self, t: f64, y: DVector<f64>, f: DVector<f64>) {
        if let Some(&last) = self.times.last() {
            assert!(t > last, "nodes must advance in time");
        }
        self.times.push(t);
        self.states.push(y);
        self.derivs.push(f);
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn end_state(&self) -> &DVector<f64> {
        self.states.last().unwrap()
    }

    pub fn covers(&self, t0: f64, t1: f64) -> bool {
        let slack = 1e-12 * (1.0 + self.end_time().abs());
        self.start_time() <= t0 + slack && self.end_time() >= t1 - slack
    }

    /// Dense output at `t`, which must lie inside the covered range.
    pub fn eval(&self, t: f64) -> DVector<f64> {
        assert!(
            self.covers(t, t),
            "t = {t} outside trajectory range [{}, {}]",
            self.start_time(),
            self.end_time()
        );
        let idx = match self.times.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.states[i].clone(),
            Err(i) => i.clamp(1, self.times.len() - 1),
        };
        let (t0, t1) = (self.times[idx - 1], self.times[idx]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        &self.states[idx - 1] * h00
            + &self.derivs[idx - 1] * (h10 * h)
            + &self.states[idx] * h01
            + &self.derivs[idx] * (h11 * h)
    }
}

fn eval_vec(field: &dyn Field, y: &DVector<f64>) -> Result<DVector<f64>, String> {
    let mut out = vec![0.0; field.dim()];
    field.eval(y.as_slice(), &mut out)?;
    Ok(DVector::from_vec(out))
}

/// One four-stage Rosenbrock step from y with f0 = f(y); returns
/// (y1, f(y1), error estimate). The advancing solution has order 3, the
/// last stage doubles as the embedded order-2 error estimate, and one LU
/// factorization of W = I - h gamma J serves all stages.
fn rosenbrock_step(
    field: &dyn Field,
    y: &DVector<f64>,
    f0: &DVector<f64>,
    h: f64,
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>), String> {
    let n = y.len();
    let sing = || "singular Rosenbrock stage matrix".to_string();
    let jac = field.jacobian(y.as_slice())?;
    let w = DMatrix::identity(n, n) - jac * (h * ROS_GAMMA);
    let lu = w.lu();
    let hg = h * ROS_GAMMA;
    let k1 = lu.solve(&(f0 * hg)).ok_or_else(sing)?;
    let k2 = lu.solve(&(f0 * hg + &k1 * 2.0)).ok_or_else(sing)?;
    let f3 = eval_vec(field, &(y + &k1 * 2.0))?;
    let k3 = lu.solve(&(&f3 * hg + (&k1 - &k2) * 0.5)).ok_or_else(sing)?;
    let y4 = y + &k1 * 2.0 + &k3;
    let f4 = eval_vec(field, &y4)?;
    let k4 = lu.solve(&(&f4 * hg + (&k1 - &k2) * 0.5 - &k3 * (4.0 / 3.0))).ok_or_else(sing)?;
    let y1 = y4 + &k4;
    let f1 = eval_vec(field, &y1)?;
    Ok((y1, f1, k4))
}

/// One Bogacki-Shampine step; k1 = f(y) comes in, k4 = f(y1) goes out
/// (first-same-as-last).
fn bs3_step(
    field: &dyn Field,
    y: &DVector<f64>,
    k1: &DVector<f64>,
    h: f64,
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>), String> {
    let k2 = eval_vec(field, &(y + k1 * (0.5 * h)))?;
    let k3 = eval_vec(field, &(y + &k2 * (0.75 * h)))?;
    let y1 = y + (k1 * (2.0 / 9.0) + &k2 * (1.0 / 3.0) + &k3 * (4.0 / 9.0)) * h;
    let k4 = eval_vec(field, &y1)?;
    let err = (k1 * (-5.0 / 72.0) + &k2 * (1.0 / 12.0) + &k3 * (1.0 / 9.0) + &k4 * (-0.125)) * h;
    Ok((y1, k4, err))
}

fn error_norm(err: &DVector<f64>, y0: &DVector<f64>, y1: &DVector<f64>, cfg: &IntegratorConfig) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..err.len() {
        let scale = cfg.atol + cfg.rtol * y0[i].abs().max(y1[i].abs());
        worst = worst.max(err[i].abs() / scale);
    }
    worst
}

/// Integrates x' = f(x) over [0, t_end].
pub fn integrate(
    field: &dyn Field,
    x0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrateError> {
    integrate_with_projection(field, x0, t_end, cfg, None)
}

/// As `integrate`, with an optional hook applied to the state after every
/// accepted step (used to re-project reduced trajectories onto the level
/// set of the first integrals). The stored derivative is recomputed after
/// the hook so dense output stays consistent.
pub fn integrate_with_projection(
    field: &dyn Field,
    x0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
    hook: Option<&dyn Fn(&mut DVector<f64>) -> Result<(), String>>,
) -> Result<Trajectory, IntegrateError> {
    cfg.validate();
    assert!(t_end > 0.0, "horizon must be positive");
    assert_eq!(x0.len(), field.dim(), "initial state dimension mismatch");
    let mut traj = Trajectory::new();
    let mut y = DVector::from_column_slice(x0);
    let mut f = eval_vec(field, &y).map_err(|msg| IntegrateError::FieldEval { t: 0.0, msg })?;
    traj.push(0.0, y.clone(), f.clone());
    let mut t = 0.0f64;
    let mut h = cfg.h_init.min(cfg.h_max).min(t_end);
    let h_floor = UNDERFLOW_FRACTION * t_end;
    while t < t_end {
        if traj.steps + traj.rejections >= cfg.max_steps {
            return Err(IntegrateError::MaxSteps { max_steps: cfg.max_steps, t, partial: traj });
        }
        h = h.min(t_end - t);
        if h < h_floor {
            return Err(IntegrateError::StepUnderflow { t, h, partial: traj });
        }
        let attempt = match cfg.method {
            Method::Rosenbrock => rosenbrock_step(field, &y, &f, h),
            Method::BogackiShampine => bs3_step(field, &y, &f, h),
        };
        let (y1, f1, err) = match attempt {
            Ok(v) => v,
            Err(_) => {
                // Evaluation failed inside the step (left the domain, and
                // so on): retry smaller, the underflow guard bounds this.
                traj.rejections += 1;
                h *= SHRINK_LIMIT;
                continue;
            }
        };
        let errnorm = error_norm(&err, &y, &y1, cfg);
        let factor = (SAFETY * errnorm.max(1e-12).powf(-1.0 / 3.0)).clamp(SHRINK_LIMIT, GROWTH_LIMIT);
        if errnorm <= 1.0 {
            t += h;
            y = y1;
            if let Some(hook) = hook {
                hook(&mut y).map_err(|msg| IntegrateError::FieldEval { t, msg })?;
                f = eval_vec(field, &y).map_err(|msg| IntegrateError::FieldEval { t, msg })?;
            } else {
                f = f1;
            }
            traj.push(t, y.clone(), f.clone());
            traj.steps += 1;
            h = (h * factor).min(cfg.h_max);
        } else {
            traj.rejections += 1;
            h *= factor.min(1.0);
        }
    }
    Ok(traj)
}

/// Fixed-step driver without error control; only used to measure empirical
/// convergence orders of the two schemes.
pub fn fixed_step_integrate(
    field: &dyn Field,
    x0: &[f64],
    t_end: f64,
    n_steps: usize,
    method: Method,
) -> Result<DVector<f64>, String> {
    assert!(n_steps > 0);
    let h = t_end / n_steps as f64;
    let mut y = DVector::from_column_slice(x0);
    let mut f = eval_vec(field, &y)?;
    for _ in 0..n_steps {
        let (y1, f1, _) = match method {
            Method::Rosenbrock => rosenbrock_step(field, &y, &f, h)?,
            Method::BogackiShampine => bs3_step(field, &y, &f, h)?,
        };
        y = y1;
        f = f1;
    }
    Ok(y)
}

/// Max over a uniform grid on [tau0, t_end] of the sup-norm distance
/// between the dense outputs of the two trajectories.
pub fn compare_on_window(
    full: &Trajectory,
    reduced: &Trajectory,
    tau0: f64,
    t_end: f64,
    grid: usize,
) -> Result<f64, IntegrateError> {
    if !(tau0 >= 0.0 && tau0 < t_end) {
        return Err(IntegrateError::BadWindow { tau0, t_end });
    }
    assert!(grid >= 2);
    for traj in [full, reduced] {
        if !traj.covers(tau0, t_end) {
            return Err(IntegrateError::WindowNotCovered {
                tau0,
                t_end,
                have0: traj.start_time(),
                have1: traj.end_time(),
            });
        }
    }
    let mut sup = 0.0f64;
    for j in 0..grid {
        let t = tau0 + (t_end - tau0) * j as f64 / (grid - 1) as f64;
        let d = (full.eval(t) - reduced.eval(t)).amax();
        sup = sup.max(d);
    }
    Ok(sup)
}

/// One row of a convergence experiment; `failed` carries the reason when an
/// integration or comparison did not finish.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub sup_err: f64,
    pub tail_err: f64,
    pub n_steps_full: usize,
    pub n_steps_reduced: usize,
    pub wall_ms: f64,
    pub failed: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub tau0: f64,
    pub t_end: f64,
}

impl ConvergenceTable {
    /// True when sup_err strictly decreases along the (decreasing) eps rows.
    pub fn sup_strictly_decreasing(&self) -> bool {
        let errs: Vec<f64> = self.rows.iter().filter(|r| r.failed.is_none()).map(|r| r.sup_err).collect();
        !errs.is_empty()
            && errs.len() == self.rows.len()
            && errs.windows(2).all(|w| w[1] < w[0])
    }

    /// True when every row satisfies tail_err <= factor * sup_err. The tail
    /// window probes secular error growth: factor 1.0 asserts the defining
    /// inclusion with no slack, smaller factors demand active decay.
    pub fn tail_within(&self, factor: f64) -> bool {
        self.rows
            .iter()
            .all(|r| r.failed.is_none() && r.tail_err <= factor * r.sup_err)
    }

    /// Least-squares slope of log sup_err against log eps over the
    /// successful rows; `None` with fewer than two points.
    pub fn empirical_slope(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.failed.is_none() && r.sup_err > 0.0)
            .map(|r| (r.eps.ln(), r.sup_err.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let (sx, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
        let (sxx, sxy): (f64, f64) =
            pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 * p.0, b + p.0 * p.1));
        Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
    }

    /// CSV with the fixed column set. Timing is zeroed unless requested so
    /// that identical configurations produce byte-identical files.
    pub fn to_csv(&self, include_timing: bool) -> String {
        let mut out = String::from("eps,sup_err,tail_err,n_steps_full,n_steps_reduced,wall_ms\n");
        for r in &self.rows {
            let wall = if include_timing { r.wall_ms } else { 0.0 };
            out.push_str(&format!(
                "{:.6e},{:.6e},{:.6e},{},{},{:.3}\n",
                r.eps, r.sup_err, r.tail_err, r.n_steps_full, r.n_steps_reduced, wall
            ));
        }
        out
    }
}

/// Theorem-style convergence experiment: for each eps, the full system is
/// integrated on the slow time scale from x0 and compared on [tau0, T]
/// (and on the tail [T/2, T]) against the reduced flow started from the
/// fast-fiber projection of x0. Failed rows are recorded, not fatal.
#[allow(clippy::too_many_arguments)]
pub fn convergence_sweep(
    sys: &PerturbedSystem,
    rf: &ReducedField,
    mf: &SlowManifold,
    x0: &[f64],
    eps_list: &[f64],
    tau0: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> ConvergenceTable {
    assert!(!eps_list.is_empty(), "need at least one eps");
    assert!(
        eps_list.windows(2).all(|w| w[1] < w[0]) && *eps_list.last().unwrap() > 0.0,
        "eps_list must be strictly decreasing and positive"
    );
    let mut table = ConvergenceTable { rows: Vec::new(), tau0, t_end };
    let fail_all = |table: &mut ConvergenceTable, msg: String| {
        for &eps in eps_list {
            table.rows.push(ConvergenceRow {
                eps,
                sup_err: f64::NAN,
                tail_err: f64::NAN,
                n_steps_full: 0,
                n_steps_reduced: 0,
                wall_ms: 0.0,
                failed: Some(msg.clone()),
            });
        }
    };

    // The fast flow does not depend on eps, so one projection serves every
    // row; the same holds for the reduced trajectory itself.
    let x0_red = match manifold::fast_fiber_project(sys, mf, x0) {
        Ok(p) => p,
        Err(e) => {
            fail_all(&mut table, format!("fast-fiber projection failed: {e}"));
            return table;
        }
    };
    let dec = rf.decomposition().clone();
    let hook = move |y: &mut DVector<f64>| -> Result<(), String> {
        let (corrected, _) = newton_mu_correction(&dec, y.as_slice(), 2, SWEEP_PROJECTION_TOL)
            .map_err(|e| e.to_string())?;
        *y = corrected;
        Ok(())
    };
    let mut red_cfg = cfg.clone();
    red_cfg.method = Method::BogackiShampine;
    let reduced = match integrate_with_projection(rf, x0_red.as_slice(), t_end, &red_cfg, Some(&hook))
    {
        Ok(t) => t,
        Err(e) => {
            fail_all(&mut table, format!("reduced integration failed: {e}"));
            return table;
        }
    };

    for &eps in eps_list {
        let clock = Instant::now();
        let field = SlowTimeField::new(sys, eps);
        let row = match integrate(&field, x0, t_end, cfg) {
            Ok(full) => {
                let sup = compare_on_window(&full, &reduced, tau0, t_end, DEFAULT_COMPARE_GRID);
                let tail = compare_on_window(&full, &reduced, t_end / 2.0, t_end, DEFAULT_COMPARE_GRID);
                match (sup, tail) {
                    (Ok(sup_err), Ok(tail_err)) => ConvergenceRow {
                        eps,
                        sup_err,
                        tail_err,
                        n_steps_full: full.steps,
                        n_steps_reduced: reduced.steps,
                        wall_ms: clock.elapsed().as_secs_f64() * 1e3,
                        failed: None,
                    },
                    (s, t) => ConvergenceRow {
                        eps,
                        sup_err: f64::NAN,
                        tail_err: f64::NAN,
                        n_steps_full: full.steps,
                        n_steps_reduced: reduced.steps,
                        wall_ms: clock.elapsed().as_secs_f64() * 1e3,
                        failed: Some(format!("{:?}", s.err().or(t.err()))),
                    },
                }
            }
            Err(e) => ConvergenceRow {
                eps,
                sup_err: f64::NAN,
                tail_err: f64::NAN,
                n_steps_full: 0,
                n_steps_reduced: reduced.steps,
                wall_ms: clock.elapsed().as_secs_f64() * 1e3,
                failed: Some(e.to_string()),
            },
        };
        table.rows.push(row);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay() -> FnField<impl Fn(&[f64], &mut [f64])> {
        FnField { dim: 1, f: |x: &[f64], out: &mut [f64]| out[0] = -x[0] }
    }

    fn logistic() -> FnField<impl Fn(&[f64], &mut [f64])> {
        FnField { dim: 1, f: |x: &[f64], out: &mut [f64]| out[0] = x[0] * (1.0 - x[0]) }
    }

    fn logistic_exact(t: f64, x0: f64) -> f64 {
        1.0 / (1.0 + (1.0 / x0 - 1.0) * (-t).exp())
    }

    #[test]
    fn exponential_decay_within_tolerance() {
        for method in [Method::Rosenbrock, Method::BogackiShampine] {
            let cfg = IntegratorConfig { method, ..Default::default() };
            let traj = integrate(&decay(), &[1.0], 1.0, &cfg).unwrap();
            let err = (traj.end_state()[0] - (-1.0f64).exp()).abs();
            assert!(err <= 10.0 * cfg.rtol, "{method:?}: error {err:.3e}");
        }
    }

    #[test]
    fn stiff_decay_needs_few_steps() {
        let field = FnField { dim: 1, f: |x: &[f64], out: &mut [f64]| out[0] = -1000.0 * x[0] };
        // The absolute floor lets the controller stop resolving the decayed
        // component below 1e-7, which is what makes large steps possible.
        let cfg = IntegratorConfig {
            rtol: 1e-6,
            atol: 1e-7,
            h_init: 1e-5,
            method: Method::Rosenbrock,
            ..Default::default()
        };
        let traj = integrate(&field, &[1.0], 0.01, &cfg).unwrap();
        let exact = (-10.0f64).exp();
        assert!((traj.end_state()[0] - exact).abs() < 1e-5, "value {}", traj.end_state()[0]);
        assert!(traj.steps < 200, "stiff run took {} steps", traj.steps);
    }

    #[test]
    fn empirical_orders_match_advertised() {
        let x0 = [0.1];
        let t_end = 5.0;
        let exact = logistic_exact(t_end, x0[0]);
        for (method, advertised) in [(Method::Rosenbrock, 3.0), (Method::BogackiShampine, 3.0)] {
            let e1 = (fixed_step_integrate(&logistic(), &x0, t_end, 64, method).unwrap()[0]
                - exact)
                .abs();
            let e2 = (fixed_step_integrate(&logistic(), &x0, t_end, 128, method).unwrap()[0]
                - exact)
                .abs();
            let order = (e1 / e2).log2();
            assert!(
                (order - advertised).abs() <= 0.3,
                "{method:?}: empirical order {order:.2}, advertised {advertised}"
            );
        }
    }

    #[test]
    fn dense_output_is_node_exact_and_accurate() {
        let cfg = IntegratorConfig::explicit();
        let traj = integrate(&logistic(), &[0.1], 5.0, &cfg).unwrap();
        for (i, &t) in traj.times().iter().enumerate() {
            assert_eq!(traj.eval(t), traj.states()[i]);
        }
        for k in 0..50 {
            let t = 0.05 + 4.9 * k as f64 / 49.0;
            let err = (traj.eval(t)[0] - logistic_exact(t, 0.1)).abs();
            assert!(err < 1e-7, "dense output error {err:.3e} at t = {t}");
        }
    }

    #[test]
    fn projection_hook_is_applied_each_step() {
        // Field drifts the second component upward; the hook flattens it.
        let field = FnField {
            dim: 2,
            f: |x: &[f64], out: &mut [f64]| {
                out[0] = -x[0];
                out[1] = 1.0;
            },
        };
        let hook = |y: &mut DVector<f64>| -> Result<(), String> {
            y[1] = 0.0;
            Ok(())
        };
        let cfg = IntegratorConfig::explicit();
        let traj =
            integrate_with_projection(&field, &[1.0, 0.0], 2.0, &cfg, Some(&hook)).unwrap();
        assert_eq!(traj.end_state()[1], 0.0);
    }

    #[test]
    fn max_steps_is_reported_with_partial_progress() {
        let cfg = IntegratorConfig { max_steps: 3, ..IntegratorConfig::explicit() };
        match integrate(&decay(), &[1.0], 1.0, &cfg) {
            Err(IntegrateError::MaxSteps { max_steps: 3, partial, .. }) => {
                assert!(partial.steps <= 3 && partial.end_time() < 1.0);
            }
            other => panic!("expected MaxSteps, got {other:?}"),
        }
    }

    #[test]
    fn finite_time_blowup_underflows() {
        let field = FnField { dim: 1, f: |x: &[f64], out: &mut [f64]| out[0] = x[0] * x[0] };
        let cfg = IntegratorConfig::explicit();
        match integrate(&field, &[1.0], 2.0, &cfg) {
            Err(IntegrateError::StepUnderflow { t, .. }) => assert!(t < 1.1),
            other => panic!("expected StepUnderflow, got {other:?}"),
        }
    }

    #[test]
    fn compare_window_basics() {
        let cfg = IntegratorConfig::explicit();
        let a = integrate(&decay(), &[1.0], 2.0, &cfg).unwrap();
        let b = a.clone();
        assert_eq!(compare_on_window(&a, &b, 0.1, 2.0, 64).unwrap(), 0.0);
        assert!(matches!(
            compare_on_window(&a, &b, 2.0, 2.0, 64),
            Err(IntegrateError::BadWindow { .. })
        ));
        assert!(matches!(
            compare_on_window(&a, &b, 0.1, 3.0, 64),
            Err(IntegrateError::WindowNotCovered { .. })
        ));
    }

    #[test]
    fn comparison_grid_is_refinement_insensitive() {
        // Two slightly different flows; doubling the grid moves the sup by
        // well under one percent.
        let cfg = IntegratorConfig::explicit();
        let a = integrate(&decay(), &[1.0], 5.0, &cfg).unwrap();
        let field = FnField { dim: 1, f: |x: &[f64], out: &mut [f64]| out[0] = -1.05 * x[0] };
        let b = integrate(&field, &[1.0], 5.0, &cfg).unwrap();
        let s512 = compare_on_window(&a, &b, 0.1, 5.0, 512).unwrap();
        let s1024 = compare_on_window(&a, &b, 0.1, 5.0, 1024).unwrap();
        assert!((s512 - s1024).abs() / s512 < 0.01);
    }

    #[test]
    fn csv_zeroes_timing_by_default() {
        let table = ConvergenceTable {
            rows: vec![ConvergenceRow {
                eps: 0.1,
                sup_err: 0.5,
                tail_err: 0.25,
                n_steps_full: 10,
                n_steps_reduced: 5,
                wall_ms: 123.456,
                failed: None,
            }],
            tau0: 0.1,
            t_end: 50.0,
        };
        let csv = table.to_csv(false);
        assert!(csv.starts_with("eps,sup_err,tail_err,n_steps_full,n_steps_reduced,wall_ms\n"));
        assert!(csv.contains(",0.000\n"), "timing not zeroed: {csv}");
        assert!(table.to_csv(true).contains("123.456"));
    }

    #[test]
    fn table_verdict_helpers() {
        let mk = |eps: f64, sup: f64, tail: f64| ConvergenceRow {
            eps,
            sup_err: sup,
            tail_err: tail,
            n_steps_full: 1,
            n_steps_reduced: 1,
            wall_ms: 0.0,
            failed: None,
        };
        let good = ConvergenceTable {
            rows: vec![mk(1e-1, 0.1, 0.05), mk(1e-2, 0.01, 0.005), mk(1e-3, 0.001, 0.0005)],
            tau0: 0.1,
            t_end: 50.0,
        };
        assert!(good.sup_strictly_decreasing());
        assert!(good.tail_within(1.0));
        let slope = good.empirical_slope().unwrap();
        assert!((slope - 1.0).abs() < 1e-9, "slope {slope}");
        let flat = ConvergenceTable {
            rows: vec![mk(1e-1, 0.1, 0.1), mk(1e-2, 0.1, 0.1)],
            tau0: 0.1,
            t_end: 50.0,
        };
        assert!(!flat.sup_strictly_decreasing());
        assert!(!flat.tail_within(0.9));
    }
}
