//! Dense complex helpers shared by every module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Seed used wherever an algorithm needs a fixed pseudo-random start vector.
pub const START_SEED: u64 = 0x5eed_0f_1a7;

/// Dimension at or below which dense SVD backs up iterative norm estimates.
pub const SVD_FALLBACK_DIM: usize = 512;

#[inline]
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn all_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// `‖A − A†‖_max ≤ 1e-12·‖A‖_max`.
pub fn is_hermitian(m: &CMat) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = max_abs(m);
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev <= 1e-12 * scale
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let s = a[(i, j)];
            if s == C64::default() {
                continue;
            }
            for q in 0..bc {
                for p in 0..br {
                    out[(i * br + p, j * bc + q)] = s * b[(p, q)];
                }
            }
        }
    }
    out
}

fn split(m: &CMat) -> (DMatrix<f64>, DMatrix<f64>) {
    (m.map(|z| z.re), m.map(|z| z.im))
}

/// Complex product; large operands go through four real GEMMs, which are
/// much faster than the generic complex kernel.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "matmul shape");
    if a.nrows().max(a.ncols()).max(b.ncols()) < 48 {
        return a * b;
    }
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    CMat::from_fn(re.nrows(), re.ncols(), |i, j| C64::new(re[(i, j)], im[(i, j)]))
}

/// `a† b` without materialising the adjoint twice.
pub fn adjoint_mul(a: &CMat, b: &CMat) -> CMat {
    matmul(&a.adjoint(), b)
}

/// Solves `A X = B` by partial-pivoted LU with one step of iterative
/// refinement. Returns the solution and the residual `‖AX − B‖_F`.
pub fn lu_solve_refined(a: &CMat, b: &CMat) -> Option<(CMat, f64)> {
    let lu = a.clone().lu();
    let mut x = lu.solve(b)?;
    let r = b - a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let res = (b - a * &x).norm();
    if x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Some((x, res))
    } else {
        None
    }
}

pub fn singular_values(m: &CMat) -> DVector<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(0);
    }
    m.clone().svd(false, false).singular_values
}

/// Largest and smallest singular values via dense SVD.
pub fn sigma_extremes(m: &CMat) -> (f64, f64) {
    let s = singular_values(m);
    let max = s.iter().cloned().fold(0.0, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    (max, min)
}

/// `σ_max/σ_min`, used to annotate singularity errors.
pub fn cond_estimate(m: &CMat) -> f64 {
    let (hi, lo) = sigma_extremes(m);
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub fn start_vector(dim: usize, seed: u64) -> CVec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = CVec::from_fn(dim, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re, im)
    });
    let n = v.norm();
    v / c(n)
}

/// `‖M‖₂` by power iteration on `M†M`.
///
/// Stops when the eigen-residual of the Rayleigh quotient drops below
/// `1e-10` relative; falls back to SVD for small matrices if 10k
/// iterations were not enough.
pub fn spectral_norm(m: &CMat) -> Result<f64> {
    if !all_finite(m) {
        return Err(Error::Input("non-finite matrix entries".into()));
    }
    if m.nrows() == 0 || m.ncols() == 0 || max_abs(m) == 0.0 {
        return Ok(0.0);
    }
    let mut v = start_vector(m.ncols(), START_SEED);
    let mh = m.adjoint();
    for _ in 0..10_000 {
        let w = &mh * (m * &v);
        let lambda = v.dotc(&w).re;
        let resid = (&w - &v * c(lambda)).norm();
        let wn = w.norm();
        if wn == 0.0 {
            break;
        }
        if resid <= 1e-10 * lambda.abs() {
            return Ok(lambda.max(0.0).sqrt());
        }
        v = w / c(wn);
    }
    if m.nrows().max(m.ncols()) <= SVD_FALLBACK_DIM {
        return Ok(sigma_extremes(m).0);
    }
    Err(Error::Convergence("power iteration for spectral norm".into()))
}

pub fn hermitian_eigenvalues(m: &CMat) -> DVector<f64> {
    m.clone().symmetric_eigenvalues()
}

/// Eigenvalues of a general complex matrix via complex Schur form.
pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    if !m.is_square() {
        return Err(Error::Shape("eigenvalues of non-square matrix".into()));
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), 1e-14, 100_000)
        .ok_or_else(|| Error::Convergence("Schur decomposition".into()))?;
    Ok(schur.unpack().1.diagonal().iter().cloned().collect())
}

/// Lanczos steps between checks of the top Ritz value.
pub const CHECK_EVERY: usize = 16;
/// Hard cap on Lanczos steps.
pub const MAX_LANCZOS: usize = 20_000;

/// Number of eigenvalues of the symmetric tridiagonal `(alphas, betas)`
/// strictly below `x` (Sturm count).
fn sturm_below(alphas: &[f64], betas: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for (i, &a) in alphas.iter().enumerate() {
        let off = if i == 0 { 0.0 } else { betas[i - 1] * betas[i - 1] };
        d = a - x - if i == 0 { 0.0 } else { off / d };
        if d == 0.0 {
            d = -f64::EPSILON * (a.abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Largest eigenvalue of a symmetric tridiagonal matrix by bisection.
pub fn tridiagonal_max(alphas: &[f64], betas: &[f64]) -> f64 {
    let k = alphas.len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..k {
        let r = if i > 0 { betas[i - 1].abs() } else { 0.0 } + if i + 1 < k { betas[i].abs() } else { 0.0 };
        lo = lo.min(alphas[i] - r);
        hi = hi.max(alphas[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_below(alphas, betas, mid) == k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Largest eigenvalue of a Hermitian positive semi-definite operator given
/// only through its action.
///
/// Plain three-term Lanczos: loss of orthogonality only produces ghost
/// copies of converged Ritz values, which leaves the maximum intact, and it
/// keeps the cost linear in the step count. Stops when the top Ritz value
/// moves by at most `tol` (relative) between checks.
pub fn lanczos_max<F>(dim: usize, mut op: F, tol: f64) -> Result<f64>
where
    F: FnMut(&CVec) -> Result<CVec>,
{
    if dim == 0 {
        return Ok(0.0);
    }
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut q = start_vector(dim, START_SEED);
    let mut prev: Option<CVec> = None;
    let mut last = f64::NEG_INFINITY;
    for j in 0..MAX_LANCZOS {
        let mut w = op(&q)?;
        let a = q.dotc(&w).re;
        w.axpy(c(-a), &q, c(1.0));
        if let Some(p) = &prev {
            w.axpy(c(-*betas.last().unwrap()), p, c(1.0));
        }
        // one local pass against the last two vectors keeps the recurrence clean
        let proj = q.dotc(&w);
        w.axpy(-proj, &q, c(1.0));
        alphas.push(a + proj.re);
        let beta = w.norm();
        let invariant = beta <= 1e-14 * alphas.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        if invariant || (j + 1) % CHECK_EVERY == 0 || j + 1 == MAX_LANCZOS {
            let theta = tridiagonal_max(&alphas, &betas);
            if invariant || (theta - last).abs() <= tol * theta.abs() {
                return Ok(theta.max(0.0));
            }
            last = theta;
        }
        betas.push(beta);
        prev = Some(std::mem::replace(&mut q, w / c(beta)));
    }
    Err(Error::Convergence("Lanczos did not settle".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_of_identities_is_identity() {
        assert_eq!(kron(&eye(2), &eye(3)), eye(6));
    }

    #[test]
    fn split_matmul_matches_naive() {
        let a = CMat::from_fn(60, 50, |i, j| C64::new((i as f64).sin(), (j as f64 * 0.3).cos()));
        let b = CMat::from_fn(50, 70, |i, j| C64::new((i * j) as f64 * 1e-3, 1.0 / (1.0 + i as f64)));
        let diff = (matmul(&a, &b) - &a * &b).norm();
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0), c(-3.0), c(2.0)]));
        assert!((spectral_norm(&m).unwrap() - 3.0).abs() < 1e-9);
        assert!((spectral_norm(&eye(8)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lanczos_finds_top_eigenvalue() {
        let d: Vec<f64> = (0..40).map(|i| 1.0 + i as f64 * 0.25).collect();
        let top = lanczos_max(40, |v| Ok(CVec::from_fn(40, |i, _| v[i] * c(d[i]))), 1e-12).unwrap();
        assert!((top - d[39]).abs() < 1e-9 * d[39]);
    }

    #[test]
    fn hermitian_detection() {
        let h = CMat::from_row_slice(2, 2, &[c(1.0), C64::new(0.0, 2.0), C64::new(0.0, -2.0), c(3.0)]);
        assert!(is_hermitian(&h));
        let mut n = h.clone();
        n[(0, 1)] = c(5.0);
        assert!(!is_hermitian(&n));
    }
}
