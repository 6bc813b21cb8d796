//! Small dense linear-algebra helpers shared by the analysis routines.

use nalgebra::{DMatrix, DVector};

/// Power of ten that brings `max |entry|` into `[1, 10)`; 1 for a zero matrix.
/// Analysis tolerances are stated for matrices pre-scaled this way.
pub fn scale_of(m: &DMatrix<f64>) -> f64 {
    let max = m.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    if max == 0.0 {
        1.0
    } else {
        10f64.powi(max.log10().floor() as i32)
    }
}

/// Orthonormal basis of the zero-sum hyperplane `{y : sum y_i = 0}` as the
/// columns of an `n x (n-1)` matrix (Helmert construction).
pub fn hyperplane_basis(n: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(n, n - 1);
    for k in 1..n {
        let norm = (k as f64 * (k + 1) as f64).sqrt();
        for i in 0..k {
            q[(i, k - 1)] = 1.0 / norm;
        }
        q[(k, k - 1)] = -(k as f64) / norm;
    }
    q
}

/// Eigenvalues (ascending) of the symmetric part of `m` restricted to the
/// zero-sum hyperplane.
pub fn projected_symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let s = (m + m.transpose()) * 0.5;
    let q = hyperplane_basis(n);
    let projected = q.transpose() * s * q;
    let mut eig: Vec<f64> = projected
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eig
}

/// Solution of a dense square linear system by SVD with a relative rank
/// cutoff: minimum-norm particular solution, orthonormal null-space basis,
/// and the residual of the particular solution.
pub struct AffineSolution {
    pub particular: DVector<f64>,
    pub nullspace: Vec<DVector<f64>>,
    pub residual: f64,
}

pub fn solve_affine(a: &DMatrix<f64>, b: &DVector<f64>, rank_cutoff: f64) -> AffineSolution {
    let n = a.ncols();
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = rank_cutoff * smax.max(1e-300);

    // x = V S^+ U^T b over the retained singular values
    let utb = u.transpose() * b;
    let mut y = DVector::zeros(svd.singular_values.len());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            y[i] = utb[i] / s;
        }
    }
    let particular = v_t.transpose() * y;

    let mut nullspace = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff {
            nullspace.push(v_t.row(i).transpose());
        }
    }
    // for a wide matrix the trailing rows of v_t are null directions too
    for i in svd.singular_values.len()..n {
        nullspace.push(v_t.row(i).transpose());
    }

    let residual = (a * &particular - b).norm();
    AffineSolution {
        particular,
        nullspace,
        residual,
    }
}

/// Euclidean distance from `y` to the affine set `point + span(basis)` with an
/// orthonormal `basis`.
pub fn distance_to_affine(y: &DVector<f64>, point: &DVector<f64>, basis: &[DVector<f64>]) -> f64 {
    let mut d = y - point;
    for b in basis {
        let c = d.dot(b);
        d -= b * c;
    }
    d.norm()
}
