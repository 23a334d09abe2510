//! Dense complex linear algebra on top of faer.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{Col, Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = Mat<Complex64>;

pub fn to_complex(m: &Mat<f64>) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| Complex64::new(m[(i, j)], 0.0))
}

pub fn matvec(a: &CMat, x: &[Complex64]) -> Vec<Complex64> {
    debug_assert_eq!(a.ncols(), x.len());
    let mut out = vec![Complex64::new(0.0, 0.0); a.nrows()];
    for (j, xj) in x.iter().enumerate() {
        if *xj == Complex64::new(0.0, 0.0) {
            continue;
        }
        let col = a.col(j);
        for (i, o) in out.iter_mut().enumerate() {
            *o += col[i] * xj;
        }
    }
    out
}

pub fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn dot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// LU factorization with partial pivoting, checked for breakdown.
pub struct DenseLu {
    lu: PartialPivLu<Complex64>,
    n: usize,
    context: String,
}

impl std::fmt::Debug for DenseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DenseLu").field("n", &self.n).field("context", &self.context).finish()
    }
}

impl DenseLu {
    pub fn new(a: &CMat, context: impl Into<String>) -> Result<Self> {
        let context = context.into();
        if a.nrows() != a.ncols() {
            return Err(Error::SolveFailed(format!("{context}: non-square matrix")));
        }
        let lu = a.partial_piv_lu();
        let n = a.nrows();
        let this = Self { lu, n, context };
        // a zero pivot shows up as non-finite output on a probe solve
        let probe = this.solve(&vec![Complex64::new(1.0, 0.0); n])?;
        drop(probe);
        Ok(this)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn finish(&self, col: Col<Complex64>) -> Result<Vec<Complex64>> {
        let out: Vec<Complex64> = (0..self.n).map(|i| col[i]).collect();
        if out.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::SolveFailed(format!("{}: singular system", self.context)));
        }
        Ok(out)
    }

    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut col = Col::from_fn(self.n, |i| b[i]);
        self.lu.solve_in_place(&mut col);
        self.finish(col)
    }

    /// Solves `A^H x = b`.
    pub fn solve_adjoint(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut col = Col::from_fn(self.n, |i| b[i]);
        self.lu.solve_adjoint_in_place(&mut col);
        self.finish(col)
    }
}

/// LU of a real matrix applied to complex right-hand sides.
pub struct RealLu {
    lu: PartialPivLu<f64>,
    n: usize,
    context: String,
}

impl std::fmt::Debug for RealLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RealLu").field("n", &self.n).field("context", &self.context).finish()
    }
}

impl RealLu {
    pub fn new(a: &Mat<f64>, context: impl Into<String>) -> Result<Self> {
        let context = context.into();
        if a.nrows() != a.ncols() {
            return Err(Error::SolveFailed(format!("{context}: non-square matrix")));
        }
        let this = Self { lu: a.partial_piv_lu(), n: a.nrows(), context };
        this.solve(&vec![Complex64::new(1.0, 1.0); this.n])?;
        Ok(this)
    }

    fn split(&self, b: &[Complex64]) -> Mat<f64> {
        Mat::from_fn(self.n, 2, |i, j| if j == 0 { b[i].re } else { b[i].im })
    }

    fn join(&self, m: Mat<f64>) -> Result<Vec<Complex64>> {
        let out: Vec<Complex64> = (0..self.n).map(|i| Complex64::new(m[(i, 0)], m[(i, 1)])).collect();
        if out.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::SolveFailed(format!("{}: singular system", self.context)));
        }
        Ok(out)
    }

    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut m = self.split(b);
        self.lu.solve_in_place(&mut m);
        self.join(m)
    }

    /// Solves `A^T x = b`.
    pub fn solve_transpose(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut m = self.split(b);
        self.lu.solve_transpose_in_place(&mut m);
        self.join(m)
    }
}

fn tridiagonal(diag: &[f64], off: &[f64]) -> Mat<f64> {
    let m = diag.len();
    Mat::from_fn(m, m, |i, j| {
        if i == j {
            diag[i]
        } else if i + 1 == j {
            off[i]
        } else if j + 1 == i {
            off[j]
        } else {
            0.0
        }
    })
}

/// Largest eigenvalue of a symmetric tridiagonal matrix.
fn tridiagonal_max_eig(diag: &[f64], off: &[f64]) -> Result<f64> {
    let ev = tridiagonal(diag, off)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    Ok(ev.last().copied().unwrap_or(0.0))
}

/// Top eigenvector of a symmetric tridiagonal matrix.
fn tridiagonal_top_vector(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let evd = tridiagonal(diag, off)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    let u = evd.U();
    let last = u.ncols() - 1;
    Ok((0..u.nrows()).map(|i| u[(i, last)]).collect())
}

fn orthogonalize(v: &mut [Complex64], basis: &[Vec<Complex64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, v);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
        }
    }
}

/// Relative change accepted once the iteration cap is reached.
const CAP_TOL: f64 = 1e-7;

/// Largest singular value with its (unit) right singular vector.
#[derive(Debug, Clone)]
pub struct SingularPair {
    pub value: f64,
    pub right: Vec<Complex64>,
}

/// Largest singular value of an operator given only through products.
///
/// Lanczos on `M^H M` with full reorthogonalization. The start vector is a
/// fixed non-symmetric pattern so results are reproducible.
pub fn largest_singular_pair<A, H>(
    n_in: usize,
    mut apply: A,
    mut apply_adjoint: H,
    rel_tol: f64,
    max_iter: usize,
) -> Result<SingularPair>
where
    A: FnMut(&[Complex64]) -> Result<Vec<Complex64>>,
    H: FnMut(&[Complex64]) -> Result<Vec<Complex64>>,
{
    let mut v: Vec<Complex64> = (0..n_in)
        .map(|j| {
            let t = j as f64;
            Complex64::new(1.0 + 0.5 * (1.7 * t + 0.3).sin(), 0.25 * (0.9 * t).cos())
        })
        .collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut last = 0.0;
    let limit = max_iter.min(n_in);
    let finish = |basis: &[Vec<Complex64>], alpha: &[f64], beta: &[f64], value: f64| -> Result<SingularPair> {
        let y = tridiagonal_top_vector(alpha, &beta[..alpha.len() - 1])?;
        let mut right = vec![Complex64::new(0.0, 0.0); n_in];
        for (b, yi) in basis.iter().zip(&y) {
            for (r, bi) in right.iter_mut().zip(b) {
                *r += bi * *yi;
            }
        }
        let nr = norm(&right);
        right.iter_mut().for_each(|x| *x /= nr);
        Ok(SingularPair { value, right })
    };
    for it in 0..limit {
        let mv = apply(&v)?;
        let mut w = apply_adjoint(&mv)?;
        let a = dot(&v, &w).re;
        basis.push(v.clone());
        alpha.push(a);
        orthogonalize(&mut w, &basis);
        let b = norm(&w);
        let est = tridiagonal_max_eig(&alpha, &beta)?.max(0.0).sqrt();
        let change = (est - last).abs();
        let converged = it > 2 && change <= rel_tol * est;
        let exhausted = b <= 1e-14 * est.max(f64::MIN_POSITIVE) * est;
        // clustered top spectra stall; accept a settled estimate at the cap
        let settled = it + 1 == limit && (limit == n_in || change <= CAP_TOL * est);
        if converged || exhausted || settled {
            return finish(&basis, &alpha, &beta, est);
        }
        last = est;
        beta.push(b);
        v = w.into_iter().map(|x| x / b).collect();
    }
    Err(Error::NoConvergence(format!(
        "Lanczos singular value after {max_iter} iterations (last {last:e})"
    )))
}

/// Largest singular value only; see [`largest_singular_pair`].
pub fn largest_singular_value<A, H>(
    n_in: usize,
    apply: A,
    apply_adjoint: H,
    rel_tol: f64,
    max_iter: usize,
) -> Result<f64>
where
    A: FnMut(&[Complex64]) -> Result<Vec<Complex64>>,
    H: FnMut(&[Complex64]) -> Result<Vec<Complex64>>,
{
    largest_singular_pair(n_in, apply, apply_adjoint, rel_tol, max_iter).map(|p| p.value)
}

/// Singular values of a dense complex matrix, descending.
pub fn singular_values(a: &CMat) -> Result<Vec<f64>> {
    a.singular_values().map_err(|e| Error::Decomposition(format!("{e:?}")))
}

pub fn eigenvalues(a: &CMat) -> Result<Vec<Complex64>> {
    a.eigenvalues().map_err(|e| Error::Decomposition(format!("{e:?}")))
}

/// Solves a small dense system by LU (used for 2x2 influence matrices).
pub fn solve_small(a: [[Complex64; 2]; 2], b: [Complex64; 2]) -> Result<[Complex64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let scale = a.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
    if !(det.norm() > 1e-300) || det.norm() < 1e-14 * scale * scale {
        return Err(Error::SolveFailed(format!("singular 2x2 system, det = {det}")));
    }
    Ok([
        (b[0] * a[1][1] - a[0][1] * b[1]) / det,
        (a[0][0] * b[1] - b[0] * a[1][0]) / det,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_and_adjoint() {
        let a = Mat::from_fn(3, 3, |i, j| {
            Complex64::new((i * 3 + j) as f64 + if i == j { 5.0 } else { 0.0 }, (i as f64) - j as f64)
        });
        let lu = DenseLu::new(&a, "test").unwrap();
        let b = vec![Complex64::new(1.0, 2.0), Complex64::new(-1.0, 0.5), Complex64::new(0.0, 1.0)];
        let x = lu.solve(&b).unwrap();
        let r = matvec(&a, &x);
        assert!(r.iter().zip(&b).all(|(p, q)| (p - q).norm() < 1e-12));
        let xa = lu.solve_adjoint(&b).unwrap();
        let ah = Mat::from_fn(3, 3, |i, j| a[(j, i)].conj());
        let ra = matvec(&ah, &xa);
        assert!(ra.iter().zip(&b).all(|(p, q)| (p - q).norm() < 1e-12));
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = Mat::<Complex64>::zeros(3, 3);
        assert!(DenseLu::new(&a, "zero").is_err());
    }

    #[test]
    fn lanczos_matches_dense_svd() {
        let n = 40;
        let a = Mat::from_fn(n + 5, n, |i, j| {
            let x = (i * 7 + j * 13) as f64;
            Complex64::new((0.37 * x).sin() / (1.0 + (i as f64 - j as f64).abs()), (0.11 * x).cos() * 0.1)
        });
        let ah = Mat::from_fn(n, n + 5, |i, j| a[(j, i)].conj());
        let dense = singular_values(&a).unwrap()[0];
        let lz = largest_singular_value(
            n,
            |x| Ok(matvec(&a, x)),
            |y| Ok(matvec(&ah, y)),
            1e-13,
            n,
        )
        .unwrap();
        assert!((dense - lz).abs() < 1e-10 * dense, "{dense} vs {lz}");
        let pair = largest_singular_pair(n, |x| Ok(matvec(&a, x)), |y| Ok(matvec(&ah, y)), 1e-13, n).unwrap();
        let gain = norm(&matvec(&a, &pair.right));
        assert!((gain - dense).abs() < 1e-8 * dense);
    }

    #[test]
    fn small_solve() {
        let one = Complex64::new(1.0, 0.0);
        let x = solve_small([[one, 2.0 * one], [3.0 * one, 4.0 * one]], [one, one]).unwrap();
        assert!((x[0] + one).norm() < 1e-15 && (x[1] - one).norm() < 1e-15);
        assert!(solve_small([[one, one], [one, one]], [one, one]).is_err());
    }
}
