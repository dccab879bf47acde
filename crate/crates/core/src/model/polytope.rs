//! Compact regions given by linear inequalities `n_j . x <= b_j`.
//!
//! Vertices are enumerated at build time (all dim-subsets of active
//! constraints); emptiness and unboundedness are rejected. Unboundedness is
//! detected through feasible edge rays at the vertices, which is exact for
//! polytopes whose faces are in general position (all shipped regions are
//! boxes, simplices and prisms).

use nalgebra::{DMatrix, DVector};
use rand::Rng;

const VERTEX_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum PolytopeError {
    #[error("polytope `{0}` is empty")]
    Empty(String),
    #[error("polytope `{0}` is unbounded")]
    Unbounded(String),
    #[error("inequality {index} has dimension {got}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error("polytope `{0}` needs at least dim+1 inequalities")]
    TooFewInequalities(String),
}

/// Location of a point relative to the polytope at a given tolerance.
#[derive(Debug, Clone, PartialEq)]
pub enum Membership {
    Inside,
    /// On the boundary; carries the indices of the active faces.
    Boundary(Vec<usize>),
    Outside,
}

/// Bounded nonempty intersection of half-spaces `n_j . x <= b_j`.
#[derive(Clone, Debug)]
pub struct Polytope {
    pub dim: usize,
    pub label: String,
    normals: Vec<DVector<f64>>,
    offsets: Vec<f64>,
    vertices: Vec<DVector<f64>>,
}

impl Polytope {
    pub fn new(
        dim: usize,
        inequalities: Vec<(Vec<f64>, f64)>,
        label: &str,
    ) -> Result<Self, PolytopeError> {
        for (i, (n, _)) in inequalities.iter().enumerate() {
            if n.len() != dim {
                return Err(PolytopeError::DimensionMismatch {
                    index: i,
                    expected: dim,
                    got: n.len(),
                });
            }
        }
        if inequalities.len() < dim + 1 {
            return Err(PolytopeError::TooFewInequalities(label.to_string()));
        }
        let normals: Vec<DVector<f64>> =
            inequalities.iter().map(|(n, _)| DVector::from_column_slice(n)).collect();
        let offsets: Vec<f64> = inequalities.iter().map(|&(_, b)| b).collect();
        let p = Polytope {
            dim,
            label: label.to_string(),
            normals,
            offsets,
            vertices: Vec::new(),
        };
        let vertices = p.enumerate_vertices();
        if vertices.is_empty() {
            return Err(PolytopeError::Empty(label.to_string()));
        }
        let p = Polytope { vertices, ..p };
        if p.has_feasible_ray() {
            return Err(PolytopeError::Unbounded(label.to_string()));
        }
        Ok(p)
    }

    /// Axis-aligned box `lo <= x <= hi`.
    pub fn from_box(lo: &[f64], hi: &[f64], label: &str) -> Result<Self, PolytopeError> {
        assert_eq!(lo.len(), hi.len());
        let dim = lo.len();
        let mut ineqs = Vec::with_capacity(2 * dim);
        for i in 0..dim {
            let mut n = vec![0.0; dim];
            n[i] = 1.0;
            ineqs.push((n.clone(), hi[i]));
            n[i] = -1.0;
            ineqs.push((n, -lo[i]));
        }
        Polytope::new(dim, ineqs, label)
    }

    pub fn n_faces(&self) -> usize {
        self.normals.len()
    }

    pub fn face(&self, j: usize) -> (&DVector<f64>, f64) {
        (&self.normals[j], self.offsets[j])
    }

    /// Outward unit normal of face `j`.
    pub fn unit_normal(&self, j: usize) -> DVector<f64> {
        let n = &self.normals[j];
        n / n.norm()
    }

    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    /// Signed violations scaled by the face normal length: negative inside.
    fn scaled_residuals(&self, x: &[f64]) -> Vec<f64> {
        let xv = DVector::from_column_slice(x);
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(|(n, &b)| (n.dot(&xv) - b) / n.norm())
            .collect()
    }

    pub fn membership(&self, x: &[f64], tol: f64) -> Membership {
        assert_eq!(x.len(), self.dim, "point dimension mismatch");
        let res = self.scaled_residuals(x);
        if res.iter().any(|&r| r > tol) {
            return Membership::Outside;
        }
        let active: Vec<usize> = res
            .iter()
            .enumerate()
            .filter(|(_, &r)| r.abs() <= tol)
            .map(|(j, _)| j)
            .collect();
        if active.is_empty() {
            Membership::Inside
        } else {
            Membership::Boundary(active)
        }
    }

    /// Inside or on the boundary at tolerance `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        !matches!(self.membership(x, tol), Membership::Outside)
    }

    pub fn bounding_box(&self) -> (DVector<f64>, DVector<f64>) {
        let mut lo = self.vertices[0].clone();
        let mut hi = self.vertices[0].clone();
        for v in &self.vertices {
            for i in 0..self.dim {
                lo[i] = lo[i].min(v[i]);
                hi[i] = hi[i].max(v[i]);
            }
        }
        (lo, hi)
    }

    /// Largest pairwise vertex distance.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, v) in self.vertices.iter().enumerate() {
            for w in &self.vertices[i + 1..] {
                d = d.max((v - w).norm());
            }
        }
        d
    }

    /// Vertices lying on face `j`. Empty for redundant (never active) faces.
    pub fn face_vertices(&self, j: usize) -> Vec<DVector<f64>> {
        let n = &self.normals[j];
        let b = self.offsets[j];
        let scale = n.norm();
        self.vertices
            .iter()
            .filter(|v| (n.dot(v) - b).abs() <= VERTEX_TOL * (1.0 + b.abs()) * scale)
            .cloned()
            .collect()
    }

    /// Random points on face `j` as convex combinations of its vertices.
    pub fn sample_face<R: Rng>(&self, j: usize, count: usize, rng: &mut R) -> Vec<DVector<f64>> {
        convex_samples(&self.face_vertices(j), count, rng)
    }

    /// Random points in the polytope as convex combinations of all vertices.
    pub fn sample_interior<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<DVector<f64>> {
        convex_samples(&self.vertices, count, rng)
    }

    fn enumerate_vertices(&self) -> Vec<DVector<f64>> {
        let m = self.normals.len();
        let mut verts: Vec<DVector<f64>> = Vec::new();
        let mut subset = vec![0usize; self.dim];
        let scale = 1.0 + self.offsets.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let visit = |chosen: &[usize], verts: &mut Vec<DVector<f64>>| {
            let mut a = DMatrix::zeros(self.dim, self.dim);
            let mut b = DVector::zeros(self.dim);
            for (r, &j) in chosen.iter().enumerate() {
                a.row_mut(r).copy_from(&self.normals[j].transpose());
                b[r] = self.offsets[j];
            }
            let lu = a.lu();
            if let Some(x) = lu.solve(&b) {
                if !x.iter().all(|c| c.is_finite()) {
                    return;
                }
                let feasible = self
                    .normals
                    .iter()
                    .zip(&self.offsets)
                    .all(|(n, &bo)| n.dot(&x) <= bo + VERTEX_TOL * scale * n.norm());
                if feasible
                    && !verts.iter().any(|v| (v - &x).norm() <= VERTEX_TOL * scale)
                {
                    verts.push(x);
                }
            }
        };
        combinations(m, self.dim, &mut subset, 0, 0, &mut |chosen| visit(chosen, &mut verts));
        verts
    }

    /// True if some vertex admits a direction feasible for every half-space.
    fn has_feasible_ray(&self) -> bool {
        let dtol = 1e-9;
        let ray_ok = |d: &DVector<f64>| self.normals.iter().all(|n| n.dot(d) <= dtol);
        // Coordinate directions catch axis-aligned recession quickly.
        for i in 0..self.dim {
            let mut d = DVector::zeros(self.dim);
            d[i] = 1.0;
            if ray_ok(&d) {
                return true;
            }
            d[i] = -1.0;
            if ray_ok(&d) {
                return true;
            }
        }
        if self.dim == 1 {
            return false;
        }
        for v in &self.vertices {
            let active: Vec<usize> = self
                .normals
                .iter()
                .zip(&self.offsets)
                .enumerate()
                .filter(|(_, (n, &b))| (n.dot(v) - b).abs() <= 1e-8 * (1.0 + b.abs()) * n.norm())
                .map(|(j, _)| j)
                .collect();
            if active.len() < self.dim - 1 {
                continue;
            }
            let mut subset = vec![0usize; self.dim - 1];
            let mut found = false;
            combinations(active.len(), self.dim - 1, &mut subset, 0, 0, &mut |chosen| {
                if found {
                    return;
                }
                let mut a = DMatrix::zeros(self.dim - 1, self.dim);
                for (r, &k) in chosen.iter().enumerate() {
                    a.row_mut(r).copy_from(&self.normals[active[k]].transpose());
                }
                let svd = a.svd(false, true);
                let vt = svd.v_t.as_ref().unwrap();
                // Rows of V^T with negligible singular value span the edge line.
                for r in 0..vt.nrows() {
                    let sv = svd.singular_values.get(r).copied().unwrap_or(0.0);
                    if sv <= 1e-10 * (1.0 + svd.singular_values[0]) || r >= self.dim - 1 {
                        let d = vt.row(r).transpose();
                        if ray_ok(&d) || ray_ok(&(-&d)) {
                            found = true;
                        }
                    }
                }
            });
            if found {
                return true;
            }
        }
        false
    }
}

fn convex_samples<R: Rng>(
    verts: &[DVector<f64>],
    count: usize,
    rng: &mut R,
) -> Vec<DVector<f64>> {
    if verts.is_empty() {
        return Vec::new();
    }
    let dim = verts[0].len();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        // Dirichlet(1) weights via normalized exponentials.
        let w: Vec<f64> = verts.iter().map(|_| -rng.gen::<f64>().ln()).collect();
        let s: f64 = w.iter().sum();
        let mut x = DVector::zeros(dim);
        for (v, wi) in verts.iter().zip(&w) {
            x += v * (wi / s);
        }
        out.push(x);
    }
    out
}

fn combinations(
    n: usize,
    k: usize,
    buf: &mut Vec<usize>,
    start: usize,
    depth: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    if depth == k {
        visit(buf);
        return;
    }
    for i in start..n {
        buf[depth] = i;
        combinations(n, k, buf, i + 1, depth + 1, visit);
    }
}
