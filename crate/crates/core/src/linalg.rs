//! Small complex linear-algebra helpers shared across modules: Hermitian
//! symmetrization, Cholesky log-determinants, Hermitian eigenfactors and
//! Gauss-Legendre quadrature rules.

use crate::error::{Error, Result};
use crate::{CMat, CVec, Complex64};
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

/// (A + A^H)/2; absorbs round-off before factorizations.
pub fn hermitianize(a: &CMat) -> CMat {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Lower-triangular Cholesky factor of a Hermitian positive-definite matrix,
/// or `None` when a pivot fails strict positivity.
///
/// nalgebra's generic complex Cholesky takes complex square roots of negative
/// pivots instead of rejecting them, so indefinite Hermitian matrices would
/// "factor" silently; this one checks every pivot. Only the lower triangle of
/// the input is read.
pub fn hermitian_cholesky(a: &CMat) -> Option<CMat> {
    let n = a.nrows();
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let pivot = d.sqrt();
        l[(j, j)] = Complex64::new(pivot, 0.0);
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / pivot;
        }
    }
    Some(l)
}

/// log2 det from a Cholesky factor.
pub fn log2_det_from_factor(l: &CMat) -> f64 {
    let mut acc = 0.0;
    for i in 0..l.nrows() {
        acc += l[(i, i)].re.log2();
    }
    2.0 * acc
}

/// Solves `A X = B` for Hermitian positive-definite `A` given its Cholesky
/// factor (forward then adjoint back-substitution).
pub fn cholesky_solve(l: &CMat, b: &CMat) -> CMat {
    let y = l
        .solve_lower_triangular(b)
        .expect("cholesky factor has positive diagonal");
    l.adjoint()
        .solve_upper_triangular(&y)
        .expect("cholesky factor has positive diagonal")
}

/// log2 det of a Hermitian positive-definite matrix via Cholesky.
///
/// The input is symmetrized first; a failed factorization reports the matrix
/// size and diagonal for diagnosis.
pub fn log2_det_hermitian(a: &CMat) -> Result<f64> {
    let h = hermitianize(a);
    let l = hermitian_cholesky(&h).ok_or_else(|| {
        Error::Domain(format!(
            "cholesky failed: {}x{} matrix not positive definite (diag re: {:?})",
            h.nrows(),
            h.ncols(),
            h.diagonal().iter().map(|z| z.re).collect::<Vec<_>>()
        ))
    })?;
    Ok(log2_det_from_factor(&l))
}

/// Inverse of a Hermitian positive-definite matrix via Cholesky.
pub fn invert_hermitian(a: &CMat) -> Result<CMat> {
    let h = hermitianize(a);
    let l = hermitian_cholesky(&h).ok_or_else(|| {
        Error::Domain(format!(
            "cholesky inverse failed: {}x{} matrix not positive definite",
            h.nrows(),
            h.ncols()
        ))
    })?;
    let eye = CMat::identity(h.nrows(), h.ncols());
    Ok(cholesky_solve(&l, &eye))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMat) -> DVector<f64> {
    let mut ev = hermitianize(a).symmetric_eigenvalues();
    let mut v: Vec<f64> = ev.iter().copied().collect();
    v.sort_by(|x, y| x.partial_cmp(y).unwrap());
    for (dst, src) in ev.iter_mut().zip(v) {
        *dst = src;
    }
    ev
}

/// Factor F with F F^H = A for Hermitian PSD A, by eigendecomposition.
///
/// Eigenvalues below `eps_psd` in magnitude are treated as factorization
/// round-off and clipped to zero; anything below `-eps_psd` is rejected as
/// not positive semidefinite.
pub fn psd_factor(a: &CMat, eps_psd: f64) -> Result<CMat> {
    let h = hermitianize(a);
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let mut scaled = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -eps_psd {
            return Err(Error::Numerical(format!(
                "matrix is not PSD: eigenvalue {lambda:.3e} < -{eps_psd:.1e} \
                 (size {}, trace re {:.6})",
                h.nrows(),
                h.trace().re
            )));
        }
        let s = Complex64::new(if lambda < eps_psd { 0.0 } else { lambda.sqrt() }, 0.0);
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= s;
        }
    }
    Ok(scaled)
}

/// i.i.d. circularly-symmetric complex Gaussian vector with unit variance
/// per entry (real and imaginary parts each N(0, 1/2)).
pub fn complex_gaussian_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVec::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    })
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
///
/// Newton iteration on the Legendre polynomial with the usual Chebyshev-like
/// initial guesses; accurate to machine precision for the orders used here.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and P_n' by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Integrates `f` over [a, b] with an n-point Gauss-Legendre rule.
pub fn integrate_gl(f: impl Fn(f64) -> Complex64, a: f64, b: f64, n: usize) -> Complex64 {
    let (nodes, weights) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, w) in nodes.iter().zip(&weights) {
        acc += f(mid + half * x) * *w;
    }
    acc * Complex64::new(half, 0.0)
}
