//! Small dense complex linear-algebra layer over nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn real_diagonal(vals: &[f64]) -> CMat {
    CMat::from_diagonal(&CVec::from_iterator(vals.len(), vals.iter().map(|&v| c(v))))
}

/// (A + A^H) / 2.
pub fn hermitianize(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Largest absolute entry, used as a scale for relative tolerances.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn trace_re(a: &CMat) -> f64 {
    a.trace().re
}

/// ‖A − B‖_F / max(‖B‖_F, tiny).
pub fn rel_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// n×n diagonal selector with ones at the listed positions.
pub fn selector(n: usize, idx: &[usize]) -> CMat {
    let mut e = CMat::zeros(n, n);
    for &i in idx {
        e[(i, i)] = ONE;
    }
    e
}

/// Hermitian eigendecomposition with eigenvalues sorted in descending order.
/// Ties keep the solver's index order, so the result is deterministic.
pub fn hermitian_eig(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    if !a.is_square() {
        return Err(Error::shape(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok((Vec::new(), CMat::zeros(0, 0)));
    }
    check_finite(a, "eigendecomposition input")?;
    let eig = SymmetricEigen::new(hermitianize(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((vals, vecs))
}

pub fn check_finite(a: &CMat, what: &str) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("{what} contains non-finite entries")))
    }
}

/// Cholesky factor of a Hermitian positive-definite matrix.
pub fn cholesky(a: &CMat) -> Result<Cholesky<C64, Dyn>> {
    check_finite(a, "Cholesky input")?;
    Cholesky::new(hermitianize(a))
        .ok_or_else(|| Error::conditioning("matrix is not numerically positive definite"))
}

/// Solves A X = B for Hermitian positive-definite A.
pub fn solve_hpd(a: &CMat, b: &CMat) -> Result<CMat> {
    Ok(cholesky(a)?.solve(b))
}

pub fn inv_hpd(a: &CMat) -> Result<CMat> {
    Ok(cholesky(a)?.inverse())
}

/// log det of a Hermitian positive-definite matrix.
pub fn logdet_hpd(a: &CMat) -> Result<f64> {
    let l = cholesky(a)?;
    Ok(2.0 * l.l_dirty().diagonal().iter().map(|d| d.re.ln()).sum::<f64>())
}

/// Solves the lower-triangular system L X = B.
pub fn solve_lower(l: &CMat, b: &CMat) -> Result<CMat> {
    l.solve_lower_triangular(b)
        .ok_or_else(|| Error::conditioning("singular triangular factor"))
}

/// Moore–Penrose pseudoinverse with the relative singular-value cutoff
/// max(m, n)·ε·σ_max. Returns the pseudoinverse and the numerical rank.
pub fn pinv(a: &CMat) -> Result<(CMat, usize)> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok((CMat::zeros(n, m), 0));
    }
    check_finite(a, "pseudoinverse input")?;
    let svd = SVD::new(a.clone(), true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = (m.max(n) as f64) * f64::EPSILON * smax;
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let vt = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut out = CMat::zeros(n, m);
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > tol && s > 0.0 {
            rank += 1;
            let v = vt.row(k).adjoint();
            let uh = u.column(k).adjoint();
            out += (v * uh).scale(1.0 / s);
        }
    }
    Ok((out, rank))
}

/// Numerical rank with the same cutoff as [`pinv`].
pub fn rank(a: &CMat) -> usize {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return 0;
    }
    let sv = a.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let tol = (m.max(n) as f64) * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > tol && s > 0.0).count()
}

/// Generalized Hermitian eigenproblem A v = λ B v with B positive definite.
///
/// Eigenvalues are returned in descending order and eigenvectors are
/// normalized so that V^H B V = I.
pub fn generalized_eig(a: &CMat, b: &CMat) -> Result<(Vec<f64>, CMat)> {
    if a.shape() != b.shape() || !a.is_square() {
        return Err(Error::shape("generalized eigenproblem needs equal square matrices"));
    }
    let chol = cholesky(b)?;
    let l = chol.l();
    let tmp = solve_lower(&l, a)?;
    let m = solve_lower(&l, &tmp.adjoint())?.adjoint();
    let (vals, w) = hermitian_eig(&m)?;
    let v = l
        .adjoint()
        .solve_upper_triangular(&w)
        .ok_or_else(|| Error::conditioning("singular whitening factor"))?;
    Ok((vals, v))
}

/// Smallest and largest eigenvalues of a Hermitian matrix.
pub fn eig_extremes(a: &CMat) -> Result<(f64, f64)> {
    let (vals, _) = hermitian_eig(a)?;
    match (vals.last(), vals.first()) {
        (Some(&lo), Some(&hi)) => Ok((lo, hi)),
        _ => Ok((0.0, 0.0)),
    }
}

/// Vertical concatenation of column vectors into a matrix.
pub fn hstack(cols: &[CVec], nrows: usize) -> CMat {
    let mut m = CMat::zeros(nrows, cols.len());
    for (j, v) in cols.iter().enumerate() {
        m.set_column(j, v);
    }
    m
}
