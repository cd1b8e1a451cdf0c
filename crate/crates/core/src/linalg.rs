//! Small dense complex linear-algebra helpers shared by the operator and
//! field layers. Orthonormalization uses modified Gram-Schmidt with a
//! second pass, and spectral quantities go through the Hermitian
//! eigensolver; the general SVD is avoided because its column pairing is
//! unreliable on the highly degenerate matrices these models produce.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Largest eigenvalue of a Hermitian matrix (0 for empty input).
fn hermitian_max_eig(g: &CMat) -> f64 {
    if g.nrows() == 0 {
        return 0.0;
    }
    nalgebra::SymmetricEigen::new(g.clone())
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
}

/// Largest singular value; zero for empty matrices.
pub fn opnorm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let g = if m.nrows() >= m.ncols() {
        m.adjoint() * m
    } else {
        m * m.adjoint()
    };
    hermitian_max_eig(&g).max(0.0).sqrt()
}

/// Orthonormal basis of the column span, dropping directions whose
/// residual after projection is at or below `rel_tol` times the largest
/// column norm. Two Gram-Schmidt passes keep the result orthonormal to
/// machine precision.
pub fn orthonormal_columns(m: &CMat, rel_tol: f64) -> CMat {
    let n = m.nrows();
    if n == 0 || m.ncols() == 0 {
        return CMat::zeros(n, 0);
    }
    let scale = (0..m.ncols())
        .map(|c| m.column(c).norm())
        .fold(0.0f64, f64::max);
    if scale == 0.0 {
        return CMat::zeros(n, 0);
    }
    let cutoff = rel_tol * scale;
    let mut basis: Vec<CVec> = Vec::new();
    for c in 0..m.ncols() {
        let mut v = m.column(c).clone_owned();
        for _ in 0..2 {
            for b in &basis {
                let coef = b.dotc(&v);
                v.axpy(-coef, b, cr(1.0));
            }
        }
        let norm = v.norm();
        if norm > cutoff {
            basis.push(v / cr(norm));
        }
    }
    let mut out = CMat::zeros(n, basis.len());
    for (i, b) in basis.iter().enumerate() {
        out.set_column(i, b);
    }
    out
}

/// Orthonormal basis of the kernel of a square matrix, via the Hermitian
/// eigendecomposition of `A* A`.
pub fn nullspace(m: &CMat, rel_tol: f64) -> CMat {
    assert_eq!(m.nrows(), m.ncols(), "nullspace expects a square matrix");
    let n = m.ncols();
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    let eig = nalgebra::SymmetricEigen::new(m.adjoint() * m);
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    let cutoff = rel_tol * rel_tol * max;
    let keep: Vec<usize> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l <= cutoff)
        .map(|(k, _)| k)
        .collect();
    let mut out = CMat::zeros(n, keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        out.set_column(dst, &eig.eigenvectors.column(src));
    }
    // The eigensolver keeps the basis orthonormal; one polish pass guards
    // against clustered-eigenvalue drift.
    orthonormal_columns(&out, 1e-12)
}

/// `‖Q_a Q_a* - Q_b Q_b*‖` for orthonormal bases; zero iff same span.
pub fn subspace_residual(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows().max(b.nrows());
    let pa = if a.ncols() == 0 {
        CMat::zeros(n, n)
    } else {
        a * a.adjoint()
    };
    let pb = if b.ncols() == 0 {
        CMat::zeros(n, n)
    } else {
        b * b.adjoint()
    };
    // The difference is Hermitian; its operator norm is the largest
    // absolute eigenvalue.
    let eig = nalgebra::SymmetricEigen::new(pa - pb);
    eig.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs()))
}

/// Outcome of a Hermitian minimum-norm solve.
pub struct MinNormSolve {
    pub solution: CVec,
    /// Smallest eigenvalue (can be slightly negative from rounding).
    pub eig_min: f64,
    /// Ratio of the largest eigenvalue to the retention cutoff.
    pub cond: f64,
}

/// Minimum-norm solution of `G x = b` for Hermitian PSD `G`, discarding
/// eigendirections at or below `rel_cutoff * λ_max`.
pub fn hermitian_min_norm_solve(g: &CMat, b: &CVec, rel_cutoff: f64) -> MinNormSolve {
    assert_eq!(g.nrows(), g.ncols());
    assert_eq!(g.nrows(), b.len());
    let n = g.nrows();
    if n == 0 {
        return MinNormSolve {
            solution: CVec::zeros(0),
            eig_min: 0.0,
            cond: 1.0,
        };
    }
    let eig = nalgebra::SymmetricEigen::new(g.clone());
    let eig_max = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    let eig_min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let cutoff = rel_cutoff * eig_max;
    let mut x = CVec::zeros(n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda <= cutoff || lambda <= 0.0 {
            continue;
        }
        let vk = eig.eigenvectors.column(k);
        let coef = vk.dotc(b) / cr(lambda);
        x.axpy(coef, &vk, cr(1.0));
    }
    MinNormSolve {
        solution: x,
        eig_min,
        cond: if cutoff > 0.0 { eig_max / cutoff } else { 1.0 },
    }
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn hermitian_min_eig(g: &CMat) -> f64 {
    if g.nrows() == 0 {
        return 0.0;
    }
    nalgebra::SymmetricEigen::new(g.clone())
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}
