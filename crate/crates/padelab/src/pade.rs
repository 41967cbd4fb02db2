//! Diagonal and off-diagonal Padé coefficients of `e^x`, matrix evaluation
//! of the numerator/denominator pair, and a trusted `e^{At}` reference.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64};

pub const MAX_ORDER: usize = 64;

/// Coefficients of `N_pq(x) = Σ n_j x^j` and `D_pq(x) = Σ d_j (−x)^j`.
#[derive(Clone, Debug)]
pub struct PadeCoefficients {
    pub order_p: usize,
    pub order_q: usize,
    pub num_coeffs: Vec<BigRational>,
    pub den_coeffs: Vec<BigRational>,
    /// `alpha[j-1] = α_j = n_j / n_{j-1}`
    pub ratio_alpha: Vec<BigRational>,
    /// `beta[j-1] = β_j = d_j / d_{j-1}`
    pub ratio_beta: Vec<BigRational>,
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

fn ratio_of(num: BigInt, den: BigInt) -> BigRational {
    BigRational::new(num, den)
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

impl PadeCoefficients {
    pub fn num_f64(&self) -> Vec<f64> {
        self.num_coeffs.iter().map(to_f64).collect()
    }

    pub fn den_f64(&self) -> Vec<f64> {
        self.den_coeffs.iter().map(to_f64).collect()
    }

    pub fn alpha_f64(&self) -> Vec<f64> {
        self.ratio_alpha.iter().map(to_f64).collect()
    }

    pub fn beta_f64(&self) -> Vec<f64> {
        self.ratio_beta.iter().map(to_f64).collect()
    }

    /// `β_j`, 1-based.
    pub fn beta(&self, j: usize) -> f64 {
        to_f64(&self.ratio_beta[j - 1])
    }

    pub fn d(&self, j: usize) -> f64 {
        to_f64(&self.den_coeffs[j])
    }
}

/// Exact `(p, q)` Padé coefficients. Order 0 is accepted (`R_00 = 1`).
pub fn pade_coefficients(p: usize, q: usize) -> Result<PadeCoefficients> {
    if p > MAX_ORDER || q > MAX_ORDER {
        return Err(Error::Bounds(format!("pade order ({p},{q}) must lie in 0..={MAX_ORDER}")));
    }
    let fpq = factorial(p + q);
    let (fp, fq) = (factorial(p), factorial(q));
    let coeff = |j: usize, top: usize, ftop: &BigInt| {
        ratio_of(factorial(p + q - j) * ftop, &fpq * factorial(j) * factorial(top - j))
    };
    let num: Vec<BigRational> = (0..=p).map(|j| coeff(j, p, &fp)).collect();
    let den: Vec<BigRational> = (0..=q).map(|j| coeff(j, q, &fq)).collect();
    let alpha = (0..p)
        .map(|j| ratio_of(BigInt::from(p - j), BigInt::from((j + 1) * (p + q - j))))
        .collect();
    let beta = (0..q)
        .map(|j| ratio_of(BigInt::from(q - j), BigInt::from((j + 1) * (p + q - j))))
        .collect();
    Ok(PadeCoefficients {
        order_p: p,
        order_q: q,
        num_coeffs: num,
        den_coeffs: den,
        ratio_alpha: alpha,
        ratio_beta: beta,
    })
}

fn horner(x: &CMat, coeffs: &[f64], sign: f64) -> CMat {
    let n = x.nrows();
    let mut acc = linalg::eye(n) * c(*coeffs.last().unwrap());
    for &cj in coeffs.iter().rev().skip(1) {
        acc = &acc * x * c(sign);
        for i in 0..n {
            acc[(i, i)] += c(cj);
        }
    }
    acc
}

/// `(N_pq(X), D_pq(X))` by Horner recursion.
pub fn eval_pade_parts(x: &CMat, coeffs: &PadeCoefficients) -> Result<(CMat, CMat)> {
    if !x.is_square() {
        return Err(Error::Shape(format!("expected square matrix, got {:?}", x.shape())));
    }
    Ok((horner(x, &coeffs.num_f64(), 1.0), horner(x, &coeffs.den_f64(), -1.0)))
}

/// Scalar `R_kk(x)`.
pub fn pade_scalar(k: usize, x: f64) -> Result<f64> {
    let pc = pade_coefficients(k, k)?;
    let num: f64 = pc.num_f64().iter().rev().fold(0.0, |acc, &n| acc * x + n);
    let den: f64 = pc.den_f64().iter().rev().fold(0.0, |acc, &d| acc * (-x) + d);
    Ok(num / den)
}

/// `R_kk(Ah) = D_kk(Ah)⁻¹ N_kk(Ah)`.
pub fn pade_propagator(a: &CMat, h: f64, k: usize) -> Result<CMat> {
    let x = a * c(h);
    let pc = pade_coefficients(k, k)?;
    let (num, den) = eval_pade_parts(&x, &pc)?;
    let singular = || Error::SingularDenominator { cond: linalg::cond_estimate(&den) };
    let (r, res) = linalg::lu_solve_refined(&den, &num).ok_or_else(singular)?;
    if res > 1e-12 * num.norm() {
        return Err(singular());
    }
    Ok(r)
}

/// `e^{At}`: eigendecomposition for Hermitian input, otherwise scaling and
/// squaring of a degree-30 Taylor polynomial.
pub fn reference_expm(a: &CMat, t: f64) -> Result<CMat> {
    if !a.is_square() {
        return Err(Error::Shape(format!("expected square matrix, got {:?}", a.shape())));
    }
    if !linalg::all_finite(a) || !t.is_finite() {
        return Err(Error::Input("non-finite input to reference_expm".into()));
    }
    let n = a.nrows();
    let x = a * c(t);
    let out = if linalg::is_hermitian(a) {
        let eig = x.clone().symmetric_eigen();
        let v = &eig.eigenvectors;
        let d = CMat::from_diagonal(&eig.eigenvalues.map(|l| c(l.exp())));
        v * d * v.adjoint()
    } else {
        let norm1 = (0..n)
            .map(|j| x.column(j).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let s = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as i32 } else { 0 };
        if s > 1000 {
            return Err(Error::Magnitude(format!("‖At‖₁ = {norm1:e}")));
        }
        let y = &x * c(0.5f64.powi(s));
        let mut term = linalg::eye(n);
        let mut sum = linalg::eye(n);
        for j in 1..=30 {
            term = &term * &y * c(1.0 / j as f64);
            sum += &term;
        }
        for _ in 0..s {
            sum = linalg::matmul(&sum, &sum);
        }
        sum
    };
    if !linalg::all_finite(&out) {
        return Err(Error::Magnitude(format!("e^(At) overflows for t={t}")));
    }
    Ok(out)
}

/// `D_kk(−1) = Σ d_j`.
pub fn den_at_minus_one(k: usize) -> Result<f64> {
    Ok(pade_coefficients(k, k)?.den_f64().iter().sum())
}

pub fn scalar_matrix(v: f64) -> CMat {
    CMat::from_element(1, 1, C64::new(v, 0.0))
}
