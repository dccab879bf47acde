//! Dense helpers for the eigenvalue-splitting and stability checks: numeric
//! rank, characteristic polynomials, deflation of zero roots, and the
//! Routh-Hurwitz criterion.
//!
//! Characteristic polynomials use the Faddeev-LeVerrier recursion, chosen over
//! a Hessenberg determinant recursion for its simplicity; it is accurate for
//! the well-scaled matrices of dimension <= 12 handled here.

use nalgebra::{Complex, DMatrix};

/// Matrices beyond this size are rejected by `char_poly` (coefficient growth
/// makes the recursion unreliable).
pub const MAX_CHAR_POLY_DIM: usize = 12;
/// Default relative singular-value threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;
/// A Hurwitz minor with absolute value below this is reported marginal.
pub const HURWITZ_MARGIN_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension {0} exceeds the supported maximum {MAX_CHAR_POLY_DIM}")]
    TooLarge(usize),
    #[error(
        "zero-root multiplicity mismatch: coefficient c_{index} = {value:.3e} is nonzero \
         (|.| > {tol:.1e}) before {expected} roots were deflated"
    )]
    MultiplicityMismatch { index: usize, value: f64, tol: f64, expected: usize },
    #[error("polynomial has degree 0 after deflation")]
    DegenerateAfterDeflation,
}

/// Monic real polynomial `x^m + c_{m-1} x^{m-1} + ... + c_0`, coefficients
/// stored ascending with the leading 1 included.
#[derive(Debug, Clone, PartialEq)]
pub struct CharPoly {
    coeffs: Vec<f64>,
}

impl CharPoly {
    /// Builds from ascending coefficients; the last entry must be exactly 1.
    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty());
        assert_eq!(*coeffs.last().unwrap(), 1.0, "polynomial must be monic");
        CharPoly { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Ascending coefficients `c_0, ..., c_{m-1}, 1`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs[k]
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex<f64>) -> Complex<f64> {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Roots via eigenvalues of the companion matrix. Serves as the
    /// independent oracle for the stability tests.
    pub fn roots(&self) -> Vec<Complex<f64>> {
        let n = self.degree();
        if n == 0 {
            return Vec::new();
        }
        let mut c = DMatrix::zeros(n, n);
        for i in 1..n {
            c[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            c[(i, n - 1)] = -self.coeffs[i];
        }
        c.complex_eigenvalues().iter().copied().collect()
    }
}

/// Number of singular values above `tol` times the largest one.
pub fn numeric_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}

/// Orthonormal basis of the numeric kernel (columns), via SVD. Wide
/// matrices are padded with zero rows first: the thin SVD would otherwise
/// not expose the null directions beyond min(rows, cols).
pub fn kernel_basis(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let cols = m.ncols();
    let work = if m.nrows() < cols {
        let mut w = DMatrix::zeros(cols, cols);
        w.rows_mut(0, m.nrows()).copy_from(m);
        w
    } else {
        m.clone()
    };
    let svd = work.svd(false, true);
    let vt = svd.v_t.unwrap();
    let max = svd.singular_values.max();
    let keep: Vec<usize> = (0..cols)
        .filter(|&r| {
            let s = svd.singular_values.get(r).copied().unwrap_or(0.0);
            max <= 0.0 || s <= tol * max
        })
        .collect();
    let mut basis = DMatrix::zeros(cols, keep.len());
    for (k, &r) in keep.iter().enumerate() {
        basis.column_mut(k).copy_from(&vt.row(r).transpose());
    }
    basis
}

/// Characteristic polynomial `det(xI - M)` by the Faddeev-LeVerrier
/// recursion. Requires a square matrix of dimension <= 12.
pub fn char_poly(m: &DMatrix<f64>) -> Result<CharPoly, LinalgError> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(LinalgError::NotSquare { rows: n, cols: m.ncols() });
    }
    if n > MAX_CHAR_POLY_DIM {
        return Err(LinalgError::TooLarge(n));
    }
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    let mut aux = DMatrix::<f64>::identity(n, n);
    for k in 1..=n {
        aux = m * aux;
        let c = -aux.trace() / k as f64;
        coeffs[n - k] = c;
        for i in 0..n {
            aux[(i, i)] += c;
        }
    }
    Ok(CharPoly::from_coeffs(coeffs))
}

/// Divides out exactly `count` roots at zero: requires `|c_k| <= tol` for
/// `k < count` and `|c_count| > tol`, otherwise the algebraic multiplicity of
/// the zero eigenvalue does not match and `MultiplicityMismatch` is returned.
pub fn deflate_zero_roots(p: &CharPoly, count: usize, tol: f64) -> Result<CharPoly, LinalgError> {
    let deg = p.degree();
    assert!(count <= deg, "cannot deflate more roots than the degree");
    for k in 0..count {
        if p.coeff(k).abs() > tol {
            return Err(LinalgError::MultiplicityMismatch {
                index: k,
                value: p.coeff(k),
                tol,
                expected: count,
            });
        }
    }
    if count < deg && p.coeff(count).abs() <= tol {
        return Err(LinalgError::MultiplicityMismatch {
            index: count,
            value: p.coeff(count),
            tol,
            expected: count,
        });
    }
    let coeffs: Vec<f64> = p.coeffs()[count..].to_vec();
    if coeffs.len() < 2 {
        return Err(LinalgError::DegenerateAfterDeflation);
    }
    Ok(CharPoly::from_coeffs(coeffs))
}

/// Index of the quantity that decides against stability.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HurwitzFailure {
    /// Ascending coefficient index `k` of a nonpositive coefficient.
    Coefficient(usize),
    /// Index into the reported determinant list.
    Minor(usize),
}

/// Result of the Routh-Hurwitz test on a monic polynomial.
///
/// `determinants` holds the leading principal Hurwitz minors D_1..D_{n-1}
/// followed by the constant coefficient c_0 (equivalent to D_n because
/// D_n = c_0 D_{n-1}). For a cubic this list is exactly `[A1, A1 A2 - A3,
/// A3]` in the conventional notation.
#[derive(Debug, Clone)]
pub struct HurwitzReport {
    pub stable: bool,
    pub determinants: Vec<f64>,
    pub first_failure: Option<HurwitzFailure>,
    /// Set when some reported determinant lies within `HURWITZ_MARGIN_TOL`
    /// of zero; such borderline cases are never silently declared stable.
    pub marginal: Option<usize>,
}

impl HurwitzReport {
    /// Smallest reported determinant (the stability margin proxy).
    pub fn min_determinant(&self) -> f64 {
        self.determinants.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Routh-Hurwitz stability test. All roots of `p` have negative real part
/// iff every coefficient and every reported determinant is positive.
pub fn routh_hurwitz(p: &CharPoly) -> HurwitzReport {
    let n = p.degree();
    assert!(n >= 1, "constant polynomials have no roots to classify");
    // a[k] = coefficient of x^{n-k}: a[0] = 1 (monic).
    let a: Vec<f64> = (0..=n).map(|k| p.coeff(n - k)).collect();
    let entry = |row: usize, col: usize| -> f64 {
        // Hurwitz matrix H[row][col] = a_{2(col+1) - (row+1)} with a.get
        // out-of-range treated as 0.
        let idx = 2 * (col + 1) as isize - (row + 1) as isize;
        if idx < 0 || idx as usize > n {
            0.0
        } else {
            a[idx as usize]
        }
    };
    let mut determinants = Vec::with_capacity(n);
    for k in 1..n {
        let mut h = DMatrix::zeros(k, k);
        for r in 0..k {
            for c in 0..k {
                h[(r, c)] = entry(r, c);
            }
        }
        determinants.push(h.determinant());
    }
    determinants.push(p.coeff(0));

    let mut first_failure = None;
    for k in 0..n {
        if p.coeff(k) <= 0.0 {
            first_failure = Some(HurwitzFailure::Coefficient(k));
            break;
        }
    }
    if first_failure.is_none() {
        for (i, &d) in determinants.iter().enumerate() {
            if d <= 0.0 {
                first_failure = Some(HurwitzFailure::Minor(i));
                break;
            }
        }
    }
    let marginal = determinants
        .iter()
        .position(|&d| d.abs() < HURWITZ_MARGIN_TOL);
    HurwitzReport { stable: first_failure.is_none(), determinants, first_failure, marginal }
}
