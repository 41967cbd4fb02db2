//! Seeded random matrices. All generators draw from ChaCha8 so a seed
//! reproduces the same matrix bit for bit on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{self, c, CMat, CVec, C64};

pub type SuiteRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SuiteRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut SuiteRng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im)
}

pub fn gaussian_matrix(rng: &mut SuiteRng, r: usize, cols: usize) -> CMat {
    CMat::from_fn(r, cols, |_, _| gaussian(rng))
}

pub fn gaussian_vector(rng: &mut SuiteRng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| gaussian(rng))
}

/// Haar-like unitary: QR of a complex Gaussian with the phases of `R`'s
/// diagonal moved into `Q`.
pub fn random_unitary(rng: &mut SuiteRng, n: usize) -> CMat {
    let qr = gaussian_matrix(rng, n, n).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / c(d.norm()) } else { c(1.0) };
        let mut col = q.column_mut(j);
        col *= ph;
    }
    q
}

/// Hermitian negative semi-definite matrix with spectral norm `norm`.
pub fn random_hermitian_nsd(rng: &mut SuiteRng, n: usize, norm: f64) -> CMat {
    let u = random_unitary(rng, n);
    let mut ev: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let top = ev.iter().cloned().fold(0.0, f64::max).max(1e-300);
    for e in ev.iter_mut() {
        *e = -*e / top * norm;
    }
    let d = CMat::from_diagonal(&CVec::from_iterator(n, ev.into_iter().map(c)));
    let a = &u * d * u.adjoint();
    // exact Hermitian symmetry
    (&a + a.adjoint()) * c(0.5)
}

/// Hermitian matrix with eigenvalues drawn from `[−1, 1]`, rescaled to
/// spectral norm `norm`.
pub fn random_hermitian(rng: &mut SuiteRng, n: usize, norm: f64) -> CMat {
    let u = random_unitary(rng, n);
    let ev: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let top = ev.iter().fold(0.0f64, |m, e| m.max(e.abs())).max(1e-300);
    let d = CMat::from_diagonal(&CVec::from_iterator(n, ev.into_iter().map(|e| c(e / top * norm))));
    let a = &u * d * u.adjoint();
    (&a + a.adjoint()) * c(0.5)
}

/// General complex matrix rescaled to spectral norm `norm`.
pub fn random_with_norm(rng: &mut SuiteRng, n: usize, norm: f64) -> CMat {
    let g = gaussian_matrix(rng, n, n);
    let s = linalg::sigma_extremes(&g).0;
    g * c(norm / s)
}

/// Largest condition number of the similarity transform.
pub const SIMILARITY_COND: f64 = 50.0;

/// `S Λ S⁻¹` with `Re λ ∈ [−2, −0.05]`, `Im λ ∈ [−2, 2]` and
/// `S = U diag(σ) V†`, `σ` spanning `[1, 50]`.
pub fn random_stable_matrix(dim: usize, seed: u64, unit_norm: bool) -> CMat {
    let mut r = rng(seed);
    let lambda: Vec<C64> = (0..dim)
        .map(|_| C64::new(r.random_range(-2.0..-0.05), r.random_range(-2.0..2.0)))
        .collect();
    let u = random_unitary(&mut r, dim);
    let v = random_unitary(&mut r, dim);
    let sv: Vec<f64> = (0..dim)
        .map(|i| match i {
            0 => 1.0,
            _ if i + 1 == dim => SIMILARITY_COND,
            _ => r.random_range(1.0..SIMILARITY_COND),
        })
        .collect();
    let s = &u * CMat::from_diagonal(&CVec::from_iterator(dim, sv.iter().map(|&x| c(x)))) * v.adjoint();
    let s_inv = &v * CMat::from_diagonal(&CVec::from_iterator(dim, sv.iter().map(|&x| c(1.0 / x)))) * u.adjoint();
    let mut a = &s * CMat::from_diagonal(&CVec::from_vec(lambda)) * s_inv;
    if unit_norm {
        let nrm = linalg::sigma_extremes(&a).0;
        a *= c(1.0 / nrm);
    }
    a
}
