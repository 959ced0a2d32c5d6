//! Small dense complex linear-algebra helpers shared by the engine and the
//! oracles.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use num_complex::Complex64 as C64;

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type CVec3 = Vector3<C64>;
pub type CMat3 = Matrix3<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Largest absolute entry.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// `max |m - m^dagger|`, zero for exactly Hermitian input.
pub fn hermitian_defect(m: &CMat) -> f64 {
    assert!(m.is_square());
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Hermitian part `(m + m^dagger) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of a Hermitian matrix. The input is symmetrized first
/// so that round-off asymmetry does not leak into the result. Eigenvalues come
/// back in ascending order together with matching eigenvector columns.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    (values, vectors)
}

/// Smallest eigenvalue of a Hermitian matrix (`+inf` for an empty matrix).
pub fn min_eigenvalue(m: &CMat) -> f64 {
    hermitian_eigen(m).0.first().copied().unwrap_or(f64::INFINITY)
}

/// Trace distance `||a - b||_1 / 2` between Hermitian matrices.
pub fn trace_distance(a: &CMat, b: &CMat) -> f64 {
    let (values, _) = hermitian_eigen(&(a - b));
    0.5 * values.iter().map(|v| v.abs()).sum::<f64>()
}

/// Induced 1-norm (maximum absolute column sum).
pub fn norm_one(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn trace(m: &CMat) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// Inverse through LU with partial pivoting, together with the 1-norm
/// condition estimate `|m|_1 |m^-1|_1`. Returns `None` when the factorization
/// breaks down.
pub fn lu_inverse(m: &CMat) -> Option<(CMat, f64)> {
    let inv = m.clone().lu().try_inverse()?;
    if inv.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    let cond = norm_one(m) * norm_one(&inv);
    Some((inv, cond))
}

/// Complex eigenvalues of a general square matrix.
pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    match m.clone().schur().eigenvalues() {
        Some(v) => v.iter().copied().collect(),
        None => Vec::new(),
    }
}

pub fn vec3(re: [f64; 3]) -> CVec3 {
    CVec3::new(re[0].into(), re[1].into(), re[2].into())
}

pub fn cvec3(v: [C64; 3]) -> CVec3 {
    CVec3::new(v[0], v[1], v[2])
}

/// Unconjugated bilinear product `a^T m b`.
pub fn bilinear(a: &CVec3, m: &CMat3, b: &CVec3) -> C64 {
    (a.transpose() * m * b)[(0, 0)]
}
