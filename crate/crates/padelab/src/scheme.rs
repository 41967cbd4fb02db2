//! Encoding schemes: how one time step of the propagator becomes a block
//! of the linear system. Each scheme is registered by name.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec};
use crate::pade::{pade_coefficients, pade_propagator};

/// One time step of a linear-system encoding.
///
/// Every scheme uses the same layout: `m` steps of `k+1` blocks, then a
/// chain of `p` copies of the terminal iterate. Only block contents differ.
pub trait EncodingScheme: Send + Sync {
    fn name(&self) -> &'static str;

    /// Diagonal block of one step, `n(k+1)` square.
    fn step_block(&self, ah: &CMat, k: usize) -> Result<CMat>;

    /// Block coupling the previous step's unknowns into the current step.
    fn coupling_block(&self, n: usize, k: usize) -> CMat;

    /// Row block (`n × n(k+1)`) that forms `x̂` from the last step, and the
    /// scalar on its diagonal identity.
    fn terminal_row(&self, n: usize, k: usize) -> (CMat, f64);

    /// Right-hand side of one step; `start` is `x(0)` for the first step.
    fn step_rhs(&self, start: Option<&CVec>, b: &CVec, h: f64, k: usize) -> Result<CVec>;

    /// Factor applied to the scaled rows (`1/√(k+1)` or 1).
    fn row_scale(&self, k: usize) -> f64;

    /// `(P, G)` with `x̂_s = P x̂_{s−1} + G b` for the encoded recurrence.
    fn recurrence(&self, a: &CMat, h: f64, k: usize) -> Result<(CMat, CMat)>;

    /// `x̂_s` as a linear map of the step unknowns `z^(s)`.
    fn iterate_map(&self, n: usize, k: usize) -> CMat {
        let (row, diag) = self.terminal_row(n, k);
        row * c(-1.0 / diag)
    }
}

fn put_block(m: &mut CMat, bi: usize, bj: usize, block: &CMat) {
    let n = block.nrows();
    m.view_mut((bi * n, bj * n), (n, block.ncols())).copy_from(block);
}

/// `1̃` in storage order `(z_k, …, z_0)`: entry `i` is `(−1)^{k−i+1}`.
pub fn alternating_ones(k: usize) -> Vec<f64> {
    (0..=k).map(|i| if (k - i + 1) % 2 == 0 { 1.0 } else { -1.0 }).collect()
}

pub struct PadeScheme;

impl EncodingScheme for PadeScheme {
    fn name(&self) -> &'static str {
        "pade"
    }

    fn step_block(&self, ah: &CMat, k: usize) -> Result<CMat> {
        let n = ah.nrows();
        let pc = pade_coefficients(k, k)?;
        let s = self.row_scale(k);
        let mut w = CMat::zeros(n * (k + 1), n * (k + 1));
        let id = linalg::eye(n);
        for j in 0..=k {
            put_block(&mut w, 0, j, &(&id * c(s)));
        }
        for i in 1..=k {
            put_block(&mut w, i, i - 1, &id);
            put_block(&mut w, i, i, &(ah * c(pc.beta(k - i + 1))));
        }
        Ok(w)
    }

    fn coupling_block(&self, n: usize, k: usize) -> CMat {
        let s = self.row_scale(k);
        let mut t = CMat::zeros(n * (k + 1), n * (k + 1));
        for (j, sign) in alternating_ones(k).into_iter().enumerate() {
            put_block(&mut t, 0, j, &(linalg::eye(n) * c(sign * s)));
        }
        t
    }

    fn terminal_row(&self, n: usize, k: usize) -> (CMat, f64) {
        let s = self.row_scale(k);
        let mut r = CMat::zeros(n, n * (k + 1));
        for (j, sign) in alternating_ones(k).into_iter().enumerate() {
            put_block(&mut r, 0, j, &(linalg::eye(n) * c(sign * s)));
        }
        (r, s)
    }

    fn step_rhs(&self, start: Option<&CVec>, b: &CVec, h: f64, k: usize) -> Result<CVec> {
        let n = b.len();
        let d1 = pade_coefficients(k, k)?.d(1);
        let mut y = CVec::zeros(n * (k + 1));
        if let Some(x0) = start {
            y.rows_mut(0, n).copy_from(&(x0 * c(self.row_scale(k))));
        }
        let tail = y.rows(k * n, n) - b * c(d1 * h);
        y.rows_mut(k * n, n).copy_from(&tail);
        Ok(y)
    }

    fn row_scale(&self, k: usize) -> f64 {
        1.0 / ((k + 1) as f64).sqrt()
    }

    fn recurrence(&self, a: &CMat, h: f64, k: usize) -> Result<(CMat, CMat)> {
        // (R − I)A⁻¹ = D⁻¹ (N − D) A⁻¹ and N − D only has odd powers, so no inverse of A
        let r = pade_propagator(a, h, k)?;
        let pc = pade_coefficients(k, k)?;
        let d = pc.den_f64();
        let x = a * c(h);
        let n = a.nrows();
        let mut odd = CMat::zeros(n, n);
        let mut pw = linalg::eye(n);
        for (j, dj) in d.iter().enumerate().skip(1) {
            if j % 2 == 1 {
                odd += &pw * c(2.0 * dj);
            }
            pw = &pw * &x;
        }
        let (_, den) = crate::pade::eval_pade_parts(&x, &pc)?;
        let (g, _) = linalg::lu_solve_refined(&den, &(odd * c(h)))
            .ok_or(Error::SingularDenominator { cond: linalg::cond_estimate(&den) })?;
        Ok((r, g))
    }
}

pub struct TaylorScheme;

impl EncodingScheme for TaylorScheme {
    fn name(&self) -> &'static str {
        "taylor"
    }

    fn step_block(&self, ah: &CMat, k: usize) -> Result<CMat> {
        let n = ah.nrows();
        let mut m = linalg::eye(n * (k + 1));
        for j in 1..=k {
            put_block(&mut m, j, j - 1, &(ah * c(-1.0 / j as f64)));
        }
        Ok(m)
    }

    fn coupling_block(&self, n: usize, k: usize) -> CMat {
        let mut t = CMat::zeros(n * (k + 1), n * (k + 1));
        for j in 0..=k {
            put_block(&mut t, 0, j, &(linalg::eye(n) * c(-1.0)));
        }
        t
    }

    fn terminal_row(&self, n: usize, k: usize) -> (CMat, f64) {
        let mut r = CMat::zeros(n, n * (k + 1));
        for j in 0..=k {
            put_block(&mut r, 0, j, &(linalg::eye(n) * c(-1.0)));
        }
        (r, 1.0)
    }

    fn step_rhs(&self, start: Option<&CVec>, b: &CVec, h: f64, k: usize) -> Result<CVec> {
        let n = b.len();
        let mut y = CVec::zeros(n * (k + 1));
        if let Some(x0) = start {
            y.rows_mut(0, n).copy_from(x0);
        }
        if k >= 1 {
            y.rows_mut(n, n).copy_from(&(b * c(h)));
        }
        Ok(y)
    }

    fn row_scale(&self, _k: usize) -> f64 {
        1.0
    }

    fn recurrence(&self, a: &CMat, h: f64, k: usize) -> Result<(CMat, CMat)> {
        let n = a.nrows();
        let x = a * c(h);
        let mut p = linalg::eye(n);
        let mut g = CMat::zeros(n, n);
        let mut term = linalg::eye(n);
        for j in 1..=k {
            g += &term * c(h / j as f64);
            term = &term * &x * c(1.0 / j as f64);
            p += &term;
        }
        Ok((p, g))
    }
}

/// Name-keyed collection of encoding schemes.
#[derive(Clone)]
pub struct SchemeRegistry {
    schemes: BTreeMap<&'static str, Arc<dyn EncodingScheme>>,
}

impl SchemeRegistry {
    pub fn empty() -> Self {
        Self { schemes: BTreeMap::new() }
    }

    pub fn register(&mut self, scheme: Arc<dyn EncodingScheme>) {
        self.schemes.insert(scheme.name(), scheme);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn EncodingScheme>> {
        self.schemes
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Unknown { kind: "scheme", name: name.to_string() })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.schemes.keys().cloned().collect()
    }
}

impl Default for SchemeRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(PadeScheme));
        r.register(Arc::new(TaylorScheme));
        r
    }
}

pub fn scheme(name: &str) -> Result<Arc<dyn EncodingScheme>> {
    SchemeRegistry::default().get(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lookup() {
        let r = SchemeRegistry::default();
        assert_eq!(r.names(), vec!["pade", "taylor"]);
        assert!(matches!(r.get("euler"), Err(Error::Unknown { .. })));
    }

    #[test]
    fn alternating_signs_end_in_minus_one() {
        assert_eq!(alternating_ones(1), vec![1.0, -1.0]);
        assert_eq!(alternating_ones(2), vec![-1.0, 1.0, -1.0]);
    }

    #[test]
    fn taylor_blocks_for_identity() {
        let m = TaylorScheme.step_block(&linalg::eye(1), 2).unwrap();
        assert_eq!(m[(1, 0)], c(-1.0));
        assert_eq!(m[(2, 1)], c(-0.5));
    }

    #[test]
    fn pade_recurrence_is_affine_solution_map() {
        // scalar: (R − 1)/a · b
        let a = crate::pade::scalar_matrix(-0.7);
        let (p, g) = PadeScheme.recurrence(&a, 0.5, 3).unwrap();
        let r = crate::pade::pade_scalar(3, -0.35).unwrap();
        assert!((p[(0, 0)].re - r).abs() < 1e-15);
        assert!((g[(0, 0)].re - (r - 1.0) / -0.7).abs() < 1e-14);
    }
}
