//! Norms, condition numbers and the inverse-norm bounds of the Padé
//! encoding, each exposed as a checkable inequality.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::bounds::{check_hermitian_nsd, SolverParams};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec};
use crate::pade::{pade_coefficients, pade_propagator, reference_expm};
use crate::problem::OdeProblem;
use crate::scheme::{alternating_ones, EncodingScheme, PadeScheme, TaylorScheme};
use crate::solver::BlockFactorization;
use crate::system::{build_system, BlockSystem};
use crate::trajectory::{classical_reference_trajectory, transient_growth};

pub use crate::linalg::spectral_norm;

/// Above this dimension norms of `L` and `L⁻¹` come from Lanczos on the
/// block structure instead of a dense SVD.
pub const DENSE_NORM_CAP: usize = 512;
pub const STRUCTURED_CAP: usize = 1 << 20;

const E: f64 = std::f64::consts::E;

/// `√((k+1)(4 ln(k+1) + 1))`, the Hermitian NSD bound on `‖W_k⁻¹‖₂`.
pub fn w_inverse_bound(k: usize) -> f64 {
    let k1 = (k + 1) as f64;
    (k1 * (4.0 * k1.ln() + 1.0)).sqrt()
}

/// `2√e/(3−e)`, the prefactor when only `‖Ah‖₂ ≤ 1` is known.
pub fn unit_norm_prefactor() -> f64 {
    2.0 * E.sqrt() / (3.0 - E)
}

pub fn unit_w_inverse_bound(k: usize) -> f64 {
    unit_norm_prefactor() * w_inverse_bound(k)
}

/// `√(5k+1)` on `‖ẼᵀW_k⁻¹‖₂` (Hermitian NSD).
pub fn e_row_bound(k: usize) -> f64 {
    ((5 * k + 1) as f64).sqrt()
}

/// `(√e + 2e/(3−e))√(2k+1)` on `‖ẼᵀW_k⁻¹‖₂` when `‖Ah‖₂ ≤ 1`.
pub fn unit_e_row_bound(k: usize) -> f64 {
    (E.sqrt() + 2.0 * E / (3.0 - E)) * ((2 * k + 1) as f64).sqrt()
}

fn k_log_k(k: usize) -> Option<f64> {
    (k >= 3).then(|| (k as f64 * (k as f64).ln()).sqrt())
}

/// `6(m+p)√(k ln k)`, defined for `k ≥ 3`.
pub fn l_inverse_bound(m: usize, p: usize, k: usize) -> Option<f64> {
    k_log_k(k).map(|s| 6.0 * (m + p) as f64 * s)
}

/// `3(m+p)√(k ln k)(6 + ‖Ah‖₂)`, defined for `k ≥ 3`.
pub fn kappa_bound(m: usize, p: usize, k: usize, norm_ah: f64) -> Option<f64> {
    k_log_k(k).map(|s| 3.0 * (m + p) as f64 * s * (6.0 + norm_ah))
}

/// `β₁‖Ah‖₂ + 3` on `‖L‖₂`.
pub fn norm_l_bound(k: usize, norm_ah: f64) -> Result<f64> {
    Ok(pade_coefficients(k, k)?.beta(1) * norm_ah + 3.0)
}

/// `Ẽᵀ = 1̃ᵀ ⊗ I_n`.
pub fn e_tilde_row(n: usize, k: usize) -> CMat {
    let mut r = CMat::zeros(n, n * (k + 1));
    for (j, s) in alternating_ones(k).into_iter().enumerate() {
        for i in 0..n {
            r[(i, j * n + i)] = c(s);
        }
    }
    r
}

pub fn w_matrix(a: &CMat, h: f64, k: usize) -> Result<CMat> {
    PadeScheme.step_block(&(a * c(h)), k)
}

pub fn inverse_norm(m: &CMat) -> Result<f64> {
    let (_, lo) = linalg::sigma_extremes(m);
    if lo == 0.0 {
        return Err(Error::Singular("matrix has a zero singular value".into()));
    }
    Ok(1.0 / lo)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundCase {
    HermitianNsd,
    UnitNorm,
}

impl std::str::FromStr for BoundCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hermitian_nsd" | "hermitian" => Ok(Self::HermitianNsd),
            "unit_norm" | "unit" => Ok(Self::UnitNorm),
            _ => Err(Error::Unknown { kind: "bound case", name: s.into() }),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InverseNormReport {
    pub case: BoundCase,
    pub norm_ah: f64,
    pub w_inv_measured: f64,
    pub w_inv_bound: f64,
    pub e_row_measured: f64,
    pub e_row_bound: f64,
    pub l_inv_measured: f64,
    pub l_inv_bound: Option<f64>,
    pub kappa_measured: f64,
    pub kappa_bound: Option<f64>,
    pub drift_max: f64,
    pub drift_ok: bool,
}

impl InverseNormReport {
    /// Per-bound verdicts; bounds that do not apply are omitted.
    pub fn satisfied(&self) -> BTreeMap<&'static str, bool> {
        let mut s = BTreeMap::new();
        s.insert("w_inv", self.w_inv_measured <= self.w_inv_bound);
        s.insert("e_row", self.e_row_measured <= self.e_row_bound);
        if self.drift_ok {
            if let Some(b) = self.l_inv_bound {
                s.insert("l_inv", self.l_inv_measured <= b);
            }
            if let Some(b) = self.kappa_bound {
                s.insert("kappa", self.kappa_measured <= b);
            }
        }
        s
    }
}

/// Checks that `a` fits `case` at step `h`.
pub fn classify(a: &CMat, h: f64, case: BoundCase) -> Result<f64> {
    let norm_ah = spectral_norm(a)? * h;
    match case {
        BoundCase::HermitianNsd => check_hermitian_nsd(a)?,
        BoundCase::UnitNorm => {
            if norm_ah > 1.0 + 1e-12 {
                return Err(Error::Classification(format!("‖Ah‖₂ = {norm_ah} exceeds 1")));
            }
        }
    }
    Ok(norm_ah)
}

/// Numeric bounds of the chosen case next to measured norms of `W_k⁻¹`,
/// `ẼᵀW_k⁻¹`, `L⁻¹` and `κ(L)`.
pub fn inverse_norm_bounds(params: &SolverParams, a: &CMat, case: BoundCase) -> Result<InverseNormReport> {
    let (m, k, p, h) = (params.steps, params.order, params.padding, params.step_size);
    let norm_ah = classify(a, h, case)?;
    let w = w_matrix(a, h, k)?;
    let w_inv = w.clone().try_inverse().ok_or_else(|| Error::Singular("W_k(Ah)".into()))?;
    let w_inv_measured = linalg::sigma_extremes(&w_inv).0;
    let e_row_measured = linalg::sigma_extremes(&(e_tilde_row(a.nrows(), k) * &w_inv)).0;
    let n = a.nrows();
    let zeros = CVec::zeros(n);
    let problem = OdeProblem::new(a.clone(), zeros.clone(), zeros, h * m as f64)?;
    let sys = build_system(&PadeScheme, &problem, &SolverParams { scheme: "pade".into(), ..params.clone() })?;
    let (norm_l, l_inv_measured) = system_norms(&sys)?;
    let drift = propagator_drift(a, h, k, m)?;
    let (w_inv_bound, e_row_bound, l_inv_bound, kappa_b) = match case {
        BoundCase::HermitianNsd => {
            (w_inverse_bound(k), e_row_bound(k), l_inverse_bound(m, p, k), kappa_bound(m, p, k, norm_ah))
        }
        BoundCase::UnitNorm => (unit_w_inverse_bound(k), unit_e_row_bound(k), None, None),
    };
    Ok(InverseNormReport {
        case,
        norm_ah,
        w_inv_measured,
        w_inv_bound,
        e_row_measured,
        e_row_bound,
        l_inv_measured,
        l_inv_bound,
        kappa_measured: norm_l * l_inv_measured,
        kappa_bound: kappa_b,
        drift_max: drift.max,
        drift_ok: drift.hypothesis_holds,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TaylorGrowth {
    /// `√(Σ_{j≤k} ‖Ah‖^{2j}/(j!)²)`
    pub lower_bound: f64,
    /// `e^{‖Ah‖}/√(k+1)`, the approximation the lower bound is compared with
    pub exp_estimate: f64,
    pub measured: f64,
}

pub fn taylor_inverse_growth(a: &CMat, h: f64, k: usize) -> Result<TaylorGrowth> {
    let theta = spectral_norm(a)? * h;
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..=k {
        term *= theta / j as f64;
        sum += term * term;
    }
    let m = TaylorScheme.step_block(&(a * c(h)), k)?;
    Ok(TaylorGrowth {
        lower_bound: sum.sqrt(),
        exp_estimate: theta.exp() / ((k + 1) as f64).sqrt(),
        measured: inverse_norm(&m)?,
    })
}

/// `W_k(Ah)⁻¹` from its closed form: `D_kk(Ah)⁻¹` times polynomial blocks
/// in `−Ah`.
pub fn explicit_w_inverse(a: &CMat, h: f64, k: usize) -> Result<CMat> {
    let n = a.nrows();
    let x = a * c(-h);
    let pc = pade_coefficients(k, k)?;
    let d = pc.den_f64();
    let mut pow = vec![linalg::eye(n)];
    for i in 1..=2 * k {
        let next = &pow[i - 1] * &x;
        pow.push(next);
    }
    let den: CMat = (0..=k).fold(CMat::zeros(n, n), |acc, i| acc + &pow[i] * c(d[i]));
    let den_inv = den.clone().try_inverse().ok_or(Error::SingularDenominator { cond: linalg::cond_estimate(&den) })?;
    let sq = ((k + 1) as f64).sqrt();
    let mut out = CMat::zeros(n * (k + 1), n * (k + 1));
    // block row r holds z_j with j = k − r; block column c ≥ 1 is the row with index l = k − c + 1
    for r in 0..=k {
        let j = k - r;
        let first = &pow[j] * c(sq * d[j]);
        out.view_mut((r * n, 0), (n, n)).copy_from(&(&den_inv * first));
        for col in 1..=k {
            let l = k - col + 1;
            let mut acc = CMat::zeros(n, n);
            if l <= j {
                for i in 0..l {
                    acc += &pow[i + j - l] * c(d[i]);
                }
                acc *= c(d[j] / d[l]);
            } else {
                for i in l..=k {
                    acc += &pow[i + j - l] * c(d[i]);
                }
                acc *= c(-d[j] / d[l]);
            }
            out.view_mut((r * n, col * n), (n, n)).copy_from(&(&den_inv * acc));
        }
    }
    Ok(out)
}

/// Factors of `W_k(A)` with an unscaled first block row: an upper factor
/// carrying the first-row polynomials and a lower factor whose first row
/// is `D_kk(A)` in the last column.
pub fn lu_factors(a: &CMat, k: usize) -> Result<(CMat, CMat)> {
    let n = a.nrows();
    let beta: Vec<f64> = pade_coefficients(k, k)?.beta_f64();
    let b = |j: usize| beta[j - 1];
    let neg = a * c(-1.0);
    let mut pow = vec![linalg::eye(n)];
    for i in 1..=k {
        let next = &pow[i - 1] * &neg;
        pow.push(next);
    }
    let mut upper = linalg::eye(n * (k + 1));
    for col in 1..=k {
        // I + Σ_{i=1}^{col−1} β_{k−col+2} ⋯ β_{k−col+1+i} (−A)^i
        let mut u = linalg::eye(n);
        let mut coef = 1.0;
        for i in 1..col {
            coef *= b(k - col + 1 + i);
            u += &pow[i] * c(coef);
        }
        upper.view_mut((0, col * n), (n, n)).copy_from(&u);
    }
    let mut lower = CMat::zeros(n * (k + 1), n * (k + 1));
    let mut dpoly = linalg::eye(n);
    let mut coef = 1.0;
    for j in 1..=k {
        coef *= b(j);
        dpoly += &pow[j] * c(coef);
    }
    lower.view_mut((0, k * n), (n, n)).copy_from(&dpoly);
    for i in 1..=k {
        lower.view_mut((i * n, (i - 1) * n), (n, n)).copy_from(&linalg::eye(n));
        lower.view_mut((i * n, i * n), (n, n)).copy_from(&(a * c(b(k - i + 1))));
    }
    Ok((upper, lower))
}

/// `W_k(A)` with an unscaled first block row.
pub fn unscaled_w(a: &CMat, k: usize) -> Result<CMat> {
    let n = a.nrows();
    let mut w = w_matrix(a, 1.0, k)?;
    let s = ((k + 1) as f64).sqrt();
    for j in 0..n * (k + 1) {
        for i in 0..n {
            w[(i, j)] *= c(s);
        }
    }
    Ok(w)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Drift {
    pub max: f64,
    pub hypothesis_holds: bool,
}

/// `max_{i ≤ m} ‖I − e^{−iAh} R_kk(Ah)^i‖₂`; the hypothesis is that it is ≤ 1.
pub fn propagator_drift(a: &CMat, h: f64, k: usize, m: usize) -> Result<Drift> {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    if linalg::is_hermitian(a) {
        // scalar formula per eigenvalue avoids cancellation in e^{−Ah}R
        let ev = linalg::hermitian_eigenvalues(a);
        for &lam in ev.iter() {
            let g = (-lam * h).exp() * crate::pade::pade_scalar(k, lam * h)?;
            let mut gi = 1.0;
            for _ in 0..m {
                gi *= g;
                worst = worst.max((1.0 - gi).abs());
            }
        }
    } else {
        let g = reference_expm(a, -h)? * pade_propagator(a, h, k)?;
        let mut gi = linalg::eye(n);
        for _ in 0..m {
            gi = &gi * &g;
            worst = worst.max(spectral_norm(&(linalg::eye(n) - &gi))?);
        }
    }
    Ok(Drift { max: worst, hypothesis_holds: worst <= 1.0 })
}

/// Below this `σ_min/σ_max` the dense SVD no longer resolves `σ_min`.
pub const DENSE_RESOLVE: f64 = 1e-10;

/// `(‖L‖₂, ‖L⁻¹‖₂)`: dense SVD for small systems, Lanczos on `L†L` and
/// `L⁻¹L⁻†` (through block solves) otherwise. The block solves also take
/// over `‖L⁻¹‖₂` for small systems too ill-conditioned for the SVD; the
/// block-triangular substitution stays accurate well past `1/ε`.
pub fn system_norms(sys: &BlockSystem) -> Result<(f64, f64)> {
    let dim = sys.dim();
    if dim > STRUCTURED_CAP {
        return Err(Error::Size { dim, cap: STRUCTURED_CAP });
    }
    let top = if dim <= DENSE_NORM_CAP {
        let (hi, lo) = linalg::sigma_extremes(&sys.to_dense());
        if lo > DENSE_RESOLVE * hi {
            return Ok((hi, 1.0 / lo));
        }
        hi
    } else {
        linalg::lanczos_max(dim, |v| Ok(sys.adjoint_matvec(&sys.matvec(v))), 1e-10)?.sqrt()
    };
    let f = BlockFactorization::new(sys)?;
    let inv = linalg::lanczos_max(dim, |v| f.solve(&f.solve_adjoint(v)?), 1e-10)?;
    if !inv.is_finite() {
        return Err(Error::Magnitude("‖L⁻¹‖₂ overflows".into()));
    }
    Ok((top, inv.sqrt()))
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub scheme: String,
    pub norm_l: f64,
    pub norm_l_inv: f64,
    pub kappa: f64,
    pub bound_norm_l: Option<f64>,
    pub bound_l_inv: Option<f64>,
    pub bound_kappa: Option<f64>,
    pub c_of_a: f64,
    pub g_ratio: f64,
    pub drift_max: Option<f64>,
    pub satisfied: BTreeMap<String, bool>,
}

/// Measured `κ(L)` with every bound that applies to the system.
pub fn condition_report(sys: &BlockSystem, problem: &OdeProblem) -> Result<AnalysisReport> {
    let l = &sys.layout;
    let (norm_l, norm_l_inv) = system_norms(sys)?;
    let a = &problem.matrix_a;
    let norm_ah = spectral_norm(a)? * l.h;
    let c_of_a = transient_growth(a, problem.horizon, l.m)?;
    let traj = classical_reference_trajectory(problem, l.m)?;
    let mut satisfied = BTreeMap::new();
    let (mut bnl, mut bli, mut bk, mut drift_max) = (None, None, None, None);
    if sys.scheme == "pade" {
        let b = norm_l_bound(l.k, norm_ah)?;
        satisfied.insert("norm_l".to_string(), norm_l <= b);
        bnl = Some(b);
        let drift = propagator_drift(a, l.h, l.k, l.m)?;
        drift_max = Some(drift.max);
        if drift.hypothesis_holds && check_hermitian_nsd(a).is_ok() {
            bli = l_inverse_bound(l.m, l.p, l.k);
            bk = kappa_bound(l.m, l.p, l.k, norm_ah);
            if let Some(b) = bli {
                satisfied.insert("l_inv".to_string(), norm_l_inv <= b);
            }
            if let Some(b) = bk {
                satisfied.insert("kappa".to_string(), norm_l * norm_l_inv <= b);
            }
        }
    }
    Ok(AnalysisReport {
        scheme: sys.scheme.clone(),
        norm_l,
        norm_l_inv,
        kappa: norm_l * norm_l_inv,
        bound_norm_l: bnl,
        bound_l_inv: bli,
        bound_kappa: bk,
        c_of_a,
        g_ratio: traj.g_ratio(problem),
        drift_max,
        satisfied,
    })
}
