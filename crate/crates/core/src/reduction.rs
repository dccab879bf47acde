//! Tikhonov-Fenichel reduction: given a product decomposition h0 = P mu, the
//! slow flow is x' = q(x) = Q(x) h1(x) with
//! Q(x) = Id - P(x) (Dmu(x) P(x))^{-1} Dmu(x).
//!
//! Q is a projection along the fast directions, and every entry of mu is a
//! first integral of the reduced flow: Dmu q = 0 holds as an algebraic
//! identity on the whole ambient domain, not only on the slow manifold.
//! Q is recomputed at every evaluation point; nothing is cached.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{numeric_rank, DEFAULT_RANK_TOL};
use crate::model::{central_difference_jacobian, PerturbedSystem, SmoothMap, SmoothMatMap};

/// Effective condition number of the pencil Dmu P beyond which the
/// constant-rank hypothesis is considered violated at that point.
pub const PENCIL_COND_LIMIT: f64 = 1e10;
/// Relative residual allowed for h0 - P mu when verifying a decomposition.
pub const DECOMPOSITION_RESIDUAL_TOL: f64 = 1e-10;
/// Step for the finite-difference Jacobian of the reduced field.
const REDUCED_JACOBIAN_STEP: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum ReductionError {
    #[error(
        "Dmu(x) P(x) is numerically singular at {location:?} \
         (effective condition {cond:.3e}); constant rank fails here"
    )]
    SingularPencil { location: Vec<f64>, cond: f64 },
    #[error(
        "fast stoichiometric submatrix has rank {rank} < {expected}; merge dependent fast \
         reactions (for instance a reversible pair) into one column carrying the net rate"
    )]
    RankDeficientFast { rank: usize, expected: usize },
    #[error("inconsistent decomposition shapes: {0}")]
    ShapeMismatch(String),
    #[error("reduced field evaluation failed at a finite-difference probe near {location:?}")]
    ProbeFailed { location: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecompositionSource {
    ReactionStructural,
    UserSupplied,
}

/// Product decomposition h0(x) = P(x) mu(x) with P of size m x r and mu of
/// size r; the slow manifold is the zero set of mu.
#[derive(Clone)]
pub struct Decomposition {
    pub r: usize,
    pub p: SmoothMatMap,
    pub mu: SmoothMap,
    pub source: DecompositionSource,
}

impl Decomposition {
    pub fn user_supplied(p: SmoothMatMap, mu: SmoothMap) -> Result<Self, ReductionError> {
        check_shapes(&p, &mu)?;
        Ok(Decomposition { r: mu.dim_out, p, mu, source: DecompositionSource::UserSupplied })
    }

    pub fn dim(&self) -> usize {
        self.p.rows
    }
}

fn check_shapes(p: &SmoothMatMap, mu: &SmoothMap) -> Result<(), ReductionError> {
    if p.cols != mu.dim_out {
        return Err(ReductionError::ShapeMismatch(format!(
            "P has {} columns but mu has {} entries",
            p.cols, mu.dim_out
        )));
    }
    if p.dim_in != mu.dim_in || p.rows != p.dim_in {
        return Err(ReductionError::ShapeMismatch(format!(
            "P maps R^{} to {}x{} matrices, mu is defined on R^{}",
            p.dim_in, p.rows, p.cols, mu.dim_in
        )));
    }
    Ok(())
}

/// Builds the decomposition for a mass-action split into fast and slow
/// reactions: P is the (constant) fast part of the stoichiometric matrix and
/// mu the corresponding rate entries, so that h0 = P mu by construction of
/// the network. A reversible fast reaction must enter as a single column
/// carrying the net rate, otherwise P loses column rank.
pub fn decompose_structural(
    stoichiometry: &DMatrix<f64>,
    fast_columns: &[usize],
    rates: &SmoothMap,
) -> Result<Decomposition, ReductionError> {
    let m = stoichiometry.nrows();
    let n_reactions = stoichiometry.ncols();
    let r = fast_columns.len();
    if r == 0 || r > m {
        return Err(ReductionError::ShapeMismatch(format!(
            "need between 1 and {m} fast reactions, got {r}"
        )));
    }
    if rates.dim_out != n_reactions || rates.dim_in != m {
        return Err(ReductionError::ShapeMismatch(format!(
            "rate map is R^{} -> R^{}, expected R^{m} -> R^{n_reactions}",
            rates.dim_in, rates.dim_out
        )));
    }
    if let Some(&j) = fast_columns.iter().find(|&&j| j >= n_reactions) {
        return Err(ReductionError::ShapeMismatch(format!(
            "fast column {j} out of range (matrix has {n_reactions} columns)"
        )));
    }
    let mut p = DMatrix::zeros(m, r);
    for (k, &j) in fast_columns.iter().enumerate() {
        p.column_mut(k).copy_from(&stoichiometry.column(j));
    }
    let rank = numeric_rank(&p, DEFAULT_RANK_TOL);
    if rank < r {
        return Err(ReductionError::RankDeficientFast { rank, expected: r });
    }
    let picked: Vec<usize> = fast_columns.to_vec();
    let all = rates.clone();
    let mu = SmoothMap::new(m, r, move |x, out| {
        let mut full = vec![crate::dual::Dual::constant(0.0); all.dim_out];
        all.eval_dual(x, &mut full);
        for (o, &j) in out.iter_mut().zip(picked.iter()) {
            *o = full[j].clone();
        }
    });
    Ok(Decomposition {
        r,
        p: SmoothMatMap::from_constant(m, p),
        mu,
        source: DecompositionSource::ReactionStructural,
    })
}

/// The projection Q(x) = Id - P(x) (Dmu(x) P(x))^{-1} Dmu(x).
///
/// Singularity of the pencil A = Dmu P is judged by the scale-aware estimate
/// |P| |Dmu| / sigma_min(A), which stays meaningful even for r = 1 where the
/// plain condition number of A is always 1.
pub fn projection_q(d: &Decomposition, x: &[f64]) -> Result<DMatrix<f64>, ReductionError> {
    let m = d.dim();
    let p = d.p.eval(x);
    let dmu = d.mu.jacobian(x);
    let a = &dmu * &p;
    let sv = a.clone().singular_values();
    let smin = sv.min();
    let scale = p.norm() * dmu.norm();
    let cond = if smin > 0.0 { scale / smin } else { f64::INFINITY };
    if !cond.is_finite() || cond > PENCIL_COND_LIMIT {
        return Err(ReductionError::SingularPencil { location: x.to_vec(), cond });
    }
    let w = a.lu().solve(&dmu).ok_or(ReductionError::SingularPencil {
        location: x.to_vec(),
        cond,
    })?;
    Ok(DMatrix::identity(m, m) - p * w)
}

/// q(x) = Q(x) h1(x), the reduced right-hand side in ambient coordinates.
pub fn reduced_rhs(
    d: &Decomposition,
    sys: &PerturbedSystem,
    x: &[f64],
) -> Result<DVector<f64>, ReductionError> {
    let q = projection_q(d, x)?;
    Ok(q * sys.h1.eval(x))
}

/// One or more Newton steps x <- x - P (Dmu P)^{-1} mu, driving mu(x) to
/// zero along the fast directions. Returns the corrected point and the final
/// max-norm residual of mu; stops early once the residual is below `tol`.
pub fn newton_mu_correction(
    d: &Decomposition,
    x: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<(DVector<f64>, f64), ReductionError> {
    let mut y = DVector::from_column_slice(x);
    let mut residual = d.mu.eval(y.as_slice()).amax();
    for _ in 0..max_iter {
        if residual <= tol {
            break;
        }
        let p = d.p.eval(y.as_slice());
        let (mu, dmu) = d.mu.eval_with_jacobian(y.as_slice());
        let a = &dmu * &p;
        let sv = a.clone().singular_values();
        let smin = sv.min();
        let scale = p.norm() * dmu.norm();
        let cond = if smin > 0.0 { scale / smin } else { f64::INFINITY };
        if !cond.is_finite() || cond > PENCIL_COND_LIMIT {
            return Err(ReductionError::SingularPencil { location: y.as_slice().to_vec(), cond });
        }
        let step = a.lu().solve(&mu).ok_or(ReductionError::SingularPencil {
            location: y.as_slice().to_vec(),
            cond,
        })?;
        y -= p * step;
        residual = d.mu.eval(y.as_slice()).amax();
    }
    Ok((y, residual))
}

/// The reduced vector field as a plain callable with a finite-difference
/// Jacobian (central differences; the field itself is built from exact
/// dual-number Jacobians of mu, so one numeric layer suffices).
#[derive(Clone)]
pub struct ReducedField {
    dec: Decomposition,
    h1: SmoothMap,
}

impl ReducedField {
    pub fn new(sys: &PerturbedSystem, dec: &Decomposition) -> Self {
        ReducedField { dec: dec.clone(), h1: sys.h1.clone() }
    }

    pub fn dim(&self) -> usize {
        self.dec.dim()
    }

    pub fn decomposition(&self) -> &Decomposition {
        &self.dec
    }

    pub fn projection(&self, x: &[f64]) -> Result<DMatrix<f64>, ReductionError> {
        projection_q(&self.dec, x)
    }

    pub fn eval(&self, x: &[f64]) -> Result<DVector<f64>, ReductionError> {
        let q = projection_q(&self.dec, x)?;
        Ok(q * self.h1.eval(x))
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>, ReductionError> {
        self.eval(x)?;
        let m = self.dim();
        let probe = |p: &[f64]| -> DVector<f64> {
            self.eval(p).unwrap_or_else(|_| DVector::from_element(m, f64::NAN))
        };
        let jac = central_difference_jacobian(&probe, x, REDUCED_JACOBIAN_STEP);
        if jac.iter().any(|v| !v.is_finite()) {
            return Err(ReductionError::ProbeFailed { location: x.to_vec() });
        }
        Ok(jac)
    }
}

/// Sampled evidence that a decomposition is valid: residual of h0 = P mu,
/// ranks at the first sample, and the worst pencil conditioning seen.
#[derive(Debug, Clone)]
pub struct DecompositionReport {
    pub n_samples: usize,
    pub max_rel_residual: f64,
    pub rank_p: usize,
    pub rank_dmu: usize,
    pub worst_cond: f64,
    pub ok: bool,
}

impl std::fmt::Display for DecompositionReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "decomposition {} over {} samples: |h0 - P mu| <= {:.2e} (relative), \
             rank P = {}, rank Dmu = {}, worst pencil condition {:.2e}",
            if self.ok { "valid" } else { "INVALID" },
            self.n_samples,
            self.max_rel_residual,
            self.rank_p,
            self.rank_dmu,
            self.worst_cond,
        )
    }
}

/// Checks h0 = P mu and the rank hypotheses over the given samples. Returns
/// a failing report rather than an error on mathematical failure.
pub fn verify_decomposition(
    d: &Decomposition,
    sys: &PerturbedSystem,
    samples: &[DVector<f64>],
) -> DecompositionReport {
    assert!(!samples.is_empty(), "verification needs at least one sample point");
    let r = d.r;
    let mut max_rel = 0.0f64;
    let mut worst_cond = 0.0f64;
    for x in samples {
        let xs = x.as_slice();
        let p = d.p.eval(xs);
        let mu = d.mu.eval(xs);
        let dmu = d.mu.jacobian(xs);
        let h0 = sys.h0.eval(xs);
        let res = (&h0 - &p * &mu).amax() / (1.0 + h0.amax());
        max_rel = max_rel.max(res);
        let a = &dmu * &p;
        let smin = a.singular_values().min();
        let cond =
            if smin > 0.0 { p.norm() * dmu.norm() / smin } else { f64::INFINITY };
        worst_cond = worst_cond.max(cond);
    }
    let x0 = samples[0].as_slice();
    let rank_p = numeric_rank(&d.p.eval(x0), DEFAULT_RANK_TOL);
    let rank_dmu = numeric_rank(&d.mu.jacobian(x0), DEFAULT_RANK_TOL);
    let ok = max_rel <= DECOMPOSITION_RESIDUAL_TOL
        && rank_p == r
        && rank_dmu == r
        && worst_cond <= PENCIL_COND_LIMIT;
    DecompositionReport { n_samples: samples.len(), max_rel_residual: max_rel, rank_p, rank_dmu, worst_cond, ok }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemBuilder;
    use rand::Rng;
    use rand::SeedableRng;

    /// x' = (0, -x2) + eps (-x1, 0): fast relaxation of x2, slow decay of x1.
    fn linear_toy() -> (PerturbedSystem, Decomposition) {
        let sys = SystemBuilder::new("linear_toy", 2)
            .h0(|x, out| {
                out[0] = crate::dual::Dual::constant(0.0);
                out[1] = -&x[1];
            })
            .h1(|x, out| {
                out[0] = -&x[0];
                out[1] = crate::dual::Dual::constant(0.0);
            })
            .build();
        let s = DMatrix::from_column_slice(2, 1, &[0.0, -1.0]);
        let rates = SmoothMap::new(2, 1, |x, out| out[0] = x[1].clone());
        let dec = decompose_structural(&s, &[0], &rates).unwrap();
        (sys, dec)
    }

    /// Reversible Michaelis-Menten at unit rates with e0 = eps (small-enzyme
    /// scaling), user-supplied P and mu = (c).
    fn mm_unit() -> (PerturbedSystem, Decomposition) {
        let sys = SystemBuilder::new("mm_unit", 2)
            .h0(|x, out| {
                let (s, c) = (&x[0], &x[1]);
                let kc = &(s + 1.0) * c; // (k1 s + km1) c
                out[0] = kc.clone();
                // -(k1 s + km1 + k2) c - km2 c (s0 - s - c)
                out[1] = -&(&(s + 2.0) * c) - &(c * &(1.0 - s - c));
            })
            .h1(|x, out| {
                let (s, c) = (&x[0], &x[1]);
                out[0] = -s;
                out[1] = s + &(1.0 - s - c);
            })
            .build();
        let p = SmoothMatMap::new(2, 2, 1, |x, out| {
            let (s, c) = (&x[0], &x[1]);
            out[0] = s + 1.0;
            out[1] = -&(s + 2.0) - &(1.0 - s - c);
        });
        let mu = SmoothMap::new(2, 1, |x, out| out[0] = x[1].clone());
        let dec = Decomposition::user_supplied(p, mu).unwrap();
        (sys, dec)
    }

    #[test]
    fn toy_projection_is_constant() {
        let (_, dec) = linear_toy();
        for x in [[0.3, 0.7], [2.0, -1.0]] {
            let q = projection_q(&dec, &x).unwrap();
            let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
            assert!((q - expected).amax() < 1e-14);
        }
    }

    #[test]
    fn toy_reduced_rhs() {
        let (sys, dec) = linear_toy();
        let q = reduced_rhs(&dec, &sys, &[0.7, 0.0]).unwrap();
        assert!((q[0] + 0.7).abs() < 1e-14 && q[1].abs() < 1e-14);
        // q is independent of the fast coordinate here
        let q = reduced_rhs(&dec, &sys, &[0.7, 0.3]).unwrap();
        assert!((q[0] + 0.7).abs() < 1e-14 && q[1].abs() < 1e-14);
    }

    #[test]
    fn structural_rejects_dependent_fast_columns() {
        // A reversible pair entered as two separate columns.
        let s = DMatrix::from_column_slice(2, 2, &[0.0, -1.0, 0.0, 1.0]);
        let rates = SmoothMap::new(2, 2, |x, out| {
            out[0] = x[1].clone();
            out[1] = x[0].clone();
        });
        match decompose_structural(&s, &[0, 1], &rates) {
            Err(ReductionError::RankDeficientFast { rank: 1, expected: 2 }) => {}
            Err(other) => panic!("expected rank deficiency, got {other:?}"),
            Ok(_) => panic!("expected rank deficiency, got a decomposition"),
        }
    }

    #[test]
    fn mm_decomposition_verifies() {
        let (sys, dec) = mm_unit();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<DVector<f64>> = (0..50)
            .map(|_| DVector::from_vec(vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..0.5)]))
            .collect();
        let rep = verify_decomposition(&dec, &sys, &samples);
        assert!(rep.ok, "{rep}");
        assert_eq!((rep.rank_p, rep.rank_dmu), (1, 1));
        assert!(rep.max_rel_residual < 1e-14);
    }

    #[test]
    fn mm_reduced_value_on_manifold() {
        // Printed closed form at unit rates, s = 1, c = 0:
        // s' = -((k1 k2 + km1 km2) s - km1 km2 s0) / (k1 s + km1 + k2 + km2 (s0 - s))
        //    = -(2 - 1) / 3 = -1/3.
        let (sys, dec) = mm_unit();
        let q = reduced_rhs(&dec, &sys, &[1.0, 0.0]).unwrap();
        assert!((q[0] + 1.0 / 3.0).abs() < 1e-12, "q1 = {}", q[0]);
        assert!(q[1].abs() < 1e-12);
    }

    #[test]
    fn projection_identities_at_random_points() {
        let (sys, dec) = mm_unit();
        let rf = ReducedField::new(&sys, &dec);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..0.5)];
            let q = rf.projection(&x).unwrap();
            let p = dec.p.eval(&x);
            assert!((&q * &q - &q).amax() < 1e-9, "Q^2 != Q");
            assert!((&q * &p).amax() < 1e-9, "QP != 0");
            assert!((q.trace() - 1.0).abs() < 1e-9, "trace Q != m - r");
            let dmu = dec.mu.jacobian(&x);
            let qv = rf.eval(&x).unwrap();
            assert!((dmu * qv).amax() < 1e-9, "Dmu q != 0 off the manifold");
        }
    }

    #[test]
    fn singular_pencil_is_reported() {
        // h0 = (x1^2/2, 0) = P mu with P = (x1, 0)^T scaled out: take
        // P = (1, 0)^T, mu = x1^2/2, so Dmu P = x1 vanishes at x1 = 0.
        let p = SmoothMatMap::new(2, 2, 1, |_, out| {
            out[0] = crate::dual::Dual::constant(1.0);
            out[1] = crate::dual::Dual::constant(0.0);
        });
        let mu = SmoothMap::new(2, 1, |x, out| out[0] = &(&x[0] * &x[0]) * 0.5);
        let dec = Decomposition::user_supplied(p, mu).unwrap();
        match projection_q(&dec, &[0.0, 0.5]) {
            Err(ReductionError::SingularPencil { cond, .. }) => assert!(!cond.is_finite()),
            other => panic!("expected singular pencil, got {other:?}"),
        }
        // Away from the singular locus the projection exists.
        assert!(projection_q(&dec, &[0.5, 0.5]).is_ok());
    }

    #[test]
    fn newton_correction_restores_mu_zero() {
        let (_, dec) = mm_unit();
        let (y, res) = newton_mu_correction(&dec, &[0.4, 0.05], 8, 1e-12).unwrap();
        assert!(res <= 1e-12);
        assert!(y[1].abs() <= 1e-12); // mu = (c)
        assert!((y[0] - 0.4).abs() < 0.2, "correction moved the slow variable too far");
    }

    #[test]
    fn reduced_jacobian_matches_dual_route_on_toy() {
        let (sys, dec) = linear_toy();
        let rf = ReducedField::new(&sys, &dec);
        let jac = rf.jacobian(&[0.4, 0.1]).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.0]);
        assert!((jac - expected).amax() < 1e-8);
    }
}
