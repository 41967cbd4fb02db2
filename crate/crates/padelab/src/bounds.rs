//! Remainder series of the diagonal Padé approximant, the `f_k` bound,
//! `θ_k` bisection, minimal orders and parameter selection.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::pade::pade_coefficients;
use crate::problem::OdeProblem;
use crate::trajectory::classical_reference_trajectory;

pub const MAX_SERIES_LEN: usize = 512;

/// How many trailing coefficients anchor the tail estimate.
const TAIL_WINDOW: usize = 8;
/// Slack on the asymptotic decay rate `1/radius` of the coefficients.
const TAIL_INFLATION: f64 = 1.2;

/// Series `ρ_k(x) = e^{−x} N_kk(x)/D_kk(x) − 1 = Σ_{j>2k} c_j x^j`, kept in
/// log-magnitude form because the coefficients underflow `f64` for large `j`.
#[derive(Clone, Debug)]
pub struct RemainderModel {
    pub order: usize,
    pub truncation_j: usize,
    /// `ln|c_j|` for `j = 2k+1 ..= J` (−∞ for exact zeros)
    pub log_coeffs: Vec<f64>,
    /// signs of `c_j`, same indexing as `log_coeffs`
    pub signs: Vec<i8>,
    /// smallest modulus of a root of `D_kk`
    pub radius_estimate: f64,
    /// growth rate used for the tail beyond `J`
    pub tail_ratio: f64,
    /// `ln` of the majorant of `|c_J|` the tail starts from
    pub tail_anchor: f64,
}

fn ln_bigint(n: &BigInt) -> f64 {
    let bits = n.bits();
    let shift = bits.saturating_sub(64);
    let top = (n.abs() >> shift).to_f64().unwrap_or(f64::NAN);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

fn ln_abs(r: &BigRational) -> f64 {
    if r.is_zero() {
        f64::NEG_INFINITY
    } else {
        ln_bigint(r.numer()) - ln_bigint(r.denom())
    }
}

/// Exact series coefficients `c_0..=c_J` of `ρ_k`.
fn exact_series(k: usize, max_j: usize) -> Result<Vec<BigRational>> {
    let pc = pade_coefficients(k, k)?;
    let len = max_j + 1;
    // D(x) = Σ d_j (−x)^j as an ordinary power series
    let d: Vec<BigRational> = pc
        .den_coeffs
        .iter()
        .enumerate()
        .map(|(j, v)| if j % 2 == 1 { -v.clone() } else { v.clone() })
        .collect();
    let mut inv = vec![BigRational::zero(); len];
    inv[0] = BigRational::from_integer(1.into());
    for j in 1..len {
        let mut acc = BigRational::zero();
        for i in 1..=j.min(k) {
            acc -= &d[i] * &inv[j - i];
        }
        inv[j] = acc;
    }
    let mut ratio = vec![BigRational::zero(); len];
    for (i, ni) in pc.num_coeffs.iter().enumerate() {
        for j in 0..len - i {
            ratio[i + j] += ni * &inv[j];
        }
    }
    // e^{−x}
    let mut ex = vec![BigRational::zero(); len];
    ex[0] = BigRational::from_integer(1.into());
    for j in 1..len {
        ex[j] = -&ex[j - 1] / BigRational::from_integer(BigInt::from(j));
    }
    let mut out = vec![BigRational::zero(); len];
    for (i, ei) in ex.iter().enumerate() {
        for j in 0..len - i {
            out[i + j] += ei * &ratio[j];
        }
    }
    out[0] -= BigRational::from_integer(1.into());
    Ok(out)
}

/// Smallest root modulus of `D_kk(x)`, from the companion matrix.
fn denominator_radius(k: usize) -> Result<f64> {
    if k == 0 {
        return Ok(f64::INFINITY);
    }
    let d = pade_coefficients(k, k)?.den_f64();
    // monic in x^k: coefficients of Σ d_j (−1)^j x^j divided by the leading one
    let coeff = |j: usize| if j % 2 == 1 { -d[j] } else { d[j] };
    let lead = coeff(k);
    let mut comp = CMat::zeros(k, k);
    for i in 1..k {
        comp[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    for j in 0..k {
        comp[(j, k - 1)] = C64::new(-coeff(j) / lead, 0.0);
    }
    let roots = linalg::eigenvalues(&comp)?;
    Ok(roots.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min))
}

pub fn default_truncation(k: usize) -> usize {
    (4 * k + 20).max(2 * k + 60)
}

pub fn remainder_coeffs(order: usize, max_j: usize) -> Result<RemainderModel> {
    let first = 2 * order + 1;
    if max_j < first || max_j > MAX_SERIES_LEN {
        return Err(Error::Bounds(format!("J={max_j} must lie in {first}..={MAX_SERIES_LEN}")));
    }
    let series = exact_series(order, max_j)?;
    if let Some(j) = (0..first).find(|&j| !series[j].is_zero()) {
        return Err(Error::Layout(format!("remainder coefficient c_{j} should vanish")));
    }
    let log_coeffs: Vec<f64> = series[first..].iter().map(ln_abs).collect();
    let signs = series[first..]
        .iter()
        .map(|v| if v.is_zero() { 0 } else if v.is_positive() { 1 } else { -1 })
        .collect();
    // Coefficients of a function analytic in |x| < radius decay like
    // radius^{-j}; neighbouring ratios are useless as a rate because the
    // signs oscillate and single terms nearly cancel.
    let radius_estimate = denominator_radius(order)?;
    let tail_ratio = TAIL_INFLATION / radius_estimate;
    let n = log_coeffs.len();
    let tail_anchor = log_coeffs[n.saturating_sub(TAIL_WINDOW)..]
        .iter()
        .enumerate()
        .map(|(i, lc)| lc + (TAIL_WINDOW.min(n) - 1 - i) as f64 * tail_ratio.ln())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(RemainderModel { order, truncation_j: max_j, log_coeffs, signs, radius_estimate, tail_ratio, tail_anchor })
}

impl RemainderModel {
    pub fn new(order: usize) -> Result<Self> {
        remainder_coeffs(order, default_truncation(order))
    }

    pub fn first_index(&self) -> usize {
        2 * self.order + 1
    }

    /// `c_j` as `f64` (may underflow to zero for large `j`).
    pub fn coeff(&self, j: usize) -> f64 {
        if j < self.first_index() || j > self.truncation_j {
            return 0.0;
        }
        let i = j - self.first_index();
        self.signs[i] as f64 * self.log_coeffs[i].exp()
    }
}

/// `f_k(θ) = Σ |c_j| θ^j` plus a geometric tail majorant beyond `J`.
pub fn remainder_bound(model: &RemainderModel, theta: f64) -> Result<f64> {
    if !(theta >= 0.0) {
        return Err(Error::Bounds(format!("theta must be nonnegative, got {theta}")));
    }
    if theta == 0.0 {
        return Ok(0.0);
    }
    let diverges = || Error::Divergence { theta, radius: model.radius_estimate };
    if theta >= model.radius_estimate || model.tail_ratio * theta >= 1.0 {
        return Err(diverges());
    }
    let lt = theta.ln();
    let first = model.first_index();
    let mut sum = 0.0;
    for (i, &lc) in model.log_coeffs.iter().enumerate() {
        sum += (lc + (first + i) as f64 * lt).exp();
    }
    let last = model.tail_anchor + model.truncation_j as f64 * lt;
    let q = model.tail_ratio * theta;
    sum += last.exp() * q / (1.0 - q);
    if !sum.is_finite() {
        return Err(diverges());
    }
    Ok(sum)
}

/// Largest `θ` with `f_k(θ)/θ ≤ δ/(e−1)`, by 60 bisection steps on `[0, k+2]`.
pub fn theta_max(order: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Bounds(format!("delta must be positive, got {delta}")));
    }
    let model = RemainderModel::new(order)?;
    theta_max_with(&model, delta)
}

pub fn theta_max_with(model: &RemainderModel, delta: f64) -> Result<f64> {
    let target = delta / (std::f64::consts::E - 1.0);
    let ok = |t: f64| remainder_bound(model, t).map(|f| f / t <= target).unwrap_or(false);
    let (mut lo, mut hi) = (0.0, model.order as f64 + 2.0);
    if ok(hi) {
        return Ok(hi);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo <= 0.0 {
        return Err(Error::Infeasible(format!("no theta satisfies the bound for k={}, delta={delta}", model.order)));
    }
    Ok(lo)
}

/// `k!k! / ((2k)!(2k+1)!)` exactly.
pub fn factorial_ratio(k: usize) -> BigRational {
    let mut r = BigRational::from_integer(1.into());
    for i in 1..=k {
        let i = i as i64;
        r = r * BigRational::new((i * i).into(), ((2 * i - 1) * (2 * i) * (2 * i) * (2 * i + 1)).into());
    }
    r
}

/// Smallest `k ≥ 1` with `k!k!/((2k)!(2k+1)!) ≤ δ/100`.
pub fn min_order(delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Bounds(format!("delta must be positive, got {delta}")));
    }
    let target = BigRational::from_float(delta / 100.0).expect("finite");
    let mut r = BigRational::from_integer(1.into());
    for k in 1..=crate::pade::MAX_ORDER {
        let i = k as i64;
        r = r * BigRational::new((i * i).into(), ((2 * i - 1) * (2 * i) * (2 * i) * (2 * i + 1)).into());
        if r <= target {
            return Ok(k);
        }
    }
    Err(Error::Infeasible(format!("no order up to {} reaches delta={delta}", crate::pade::MAX_ORDER)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverParams {
    pub steps: usize,
    pub order: usize,
    pub padding: usize,
    pub step_size: f64,
    pub scheme: String,
    pub delta: f64,
}

impl SolverParams {
    pub fn new(scheme: &str, steps: usize, order: usize, padding: usize, horizon: f64) -> Result<Self> {
        if steps == 0 || order == 0 || padding == 0 {
            return Err(Error::Input(format!("need m, k, p >= 1 (got {steps}, {order}, {padding})")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Input(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self {
            steps,
            order,
            padding,
            step_size: horizon / steps as f64,
            scheme: scheme.to_string(),
            delta: f64::NAN,
        })
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }
}

/// `p = ⌈6m(1 + h²)⌉`.
pub fn padding_rule(steps: usize, h: f64) -> usize {
    (6.0 * steps as f64 * (1.0 + h * h)).ceil() as usize
}

/// `⌈x⌉` that ignores a trailing rounding error of a few ulps.
fn ceil_tol(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 8.0 * f64::EPSILON * x.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// `m = ⌈‖AT‖⌉`, `k` from `M`
    UnitStep,
    /// given `k`, smallest `m` with `‖Ah‖ ≤ θ_k(δ)`; Hermitian NSD only
    FixedOrder(usize),
}

/// Quantities shared by both strategies.
#[derive(Clone, Debug)]
pub struct ParameterBasis {
    pub norm_a: f64,
    pub norm_b: f64,
    pub terminal_norm: f64,
    /// `M = (401T/ε)(‖A‖ + ‖b‖/‖x(T)‖)`
    pub big_m: f64,
    /// upper end of the admissible `δ` interval, `ε / (4T(‖A‖ + ‖b‖/‖x(T)‖))`
    pub delta: f64,
}

pub fn parameter_basis(problem: &OdeProblem, eps: f64) -> Result<ParameterBasis> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::AssumptionViolation(format!("eps must lie in (0, 1/2), got {eps}")));
    }
    let t = problem.horizon;
    let norm_a = linalg::spectral_norm(&problem.matrix_a)?;
    if norm_a * t < 1.0 {
        return Err(Error::AssumptionViolation(format!("‖AT‖₂ = {} < 1", norm_a * t)));
    }
    let traj = classical_reference_trajectory(problem, 1)?;
    let norm_b = problem.vec_b.norm();
    let scale = norm_a + norm_b / traj.terminal_norm;
    Ok(ParameterBasis {
        norm_a,
        norm_b,
        terminal_norm: traj.terminal_norm,
        big_m: 401.0 * t / eps * scale,
        delta: eps / (4.0 * t * scale),
    })
}

/// `k = ⌈ln M / ln ln M⌉`.
pub fn order_from_m(big_m: f64) -> usize {
    let l = big_m.ln();
    ((l / l.ln()).ceil() as usize).max(1)
}

pub fn select_parameters(problem: &OdeProblem, eps: f64, strategy: Strategy) -> Result<SolverParams> {
    let basis = parameter_basis(problem, eps)?;
    let t = problem.horizon;
    match strategy {
        Strategy::UnitStep => {
            let m = ceil_tol(basis.norm_a * t).max(1);
            // the formula is meant to imply the min-order condition; keep the larger k if it ever does not
            let k = order_from_m(basis.big_m).max(min_order(basis.delta)?);
            let h = t / m as f64;
            Ok(SolverParams::new("pade", m, k, padding_rule(m, h), t)?.with_delta(basis.delta))
        }
        Strategy::FixedOrder(k) => {
            check_hermitian_nsd(&problem.matrix_a).map_err(|e| Error::Strategy(e.to_string()))?;
            let theta = theta_max(k, basis.delta)?;
            let m = ceil_tol(basis.norm_a * t / theta).max(1);
            let h = t / m as f64;
            Ok(SolverParams::new("pade", m, k, padding_rule(m, h), t)?.with_delta(basis.delta))
        }
    }
}

/// Hermitian with no eigenvalue above `1e-12·‖A‖_max`.
pub fn check_hermitian_nsd(a: &CMat) -> Result<()> {
    if !linalg::is_hermitian(a) {
        return Err(Error::Classification("matrix is not Hermitian".into()));
    }
    let top = linalg::hermitian_eigenvalues(a).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top > 1e-12 * linalg::max_abs(a).max(1e-300) {
        return Err(Error::Classification(format!("largest eigenvalue {top:e} is positive")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_coefficients() {
        let m = remainder_coeffs(1, 3).unwrap();
        assert!((m.coeff(3) - 1.0 / 12.0).abs() < 1e-17);
        assert_eq!(m.coeff(1), 0.0);
        let m0 = remainder_coeffs(0, 1).unwrap();
        assert_eq!(m0.coeff(1), -1.0);
        assert!(remainder_coeffs(2, 4).is_err());
        assert!(remainder_coeffs(2, 513).is_err());
    }

    #[test]
    fn leading_index_shifts_by_two() {
        for k in 1..8 {
            let a = exact_series(k, 2 * k + 6).unwrap();
            assert!(a[..=2 * k].iter().all(Zero::is_zero));
            assert!(!a[2 * k + 1].is_zero());
        }
    }

    #[test]
    fn bound_near_origin() {
        let m = RemainderModel::new(1).unwrap();
        assert_eq!(remainder_bound(&m, 0.0).unwrap(), 0.0);
        let f = remainder_bound(&m, 0.1).unwrap();
        assert!((f / 8.333e-5 - 1.0).abs() < 0.01, "{f}");
        assert!(matches!(remainder_bound(&m, 5.0), Err(Error::Divergence { .. })));
    }

    #[test]
    fn tail_survives_cancelling_coefficients() {
        // k = 6 and k = 12 have near-cancelling trailing coefficients
        for (k, want) in [(6, 2.36), (12, 9.11)] {
            let m = RemainderModel::new(k).unwrap();
            assert!(m.tail_ratio * m.radius_estimate < 1.3);
            assert!((theta_max_with(&m, 1e-8).unwrap() - want).abs() < 0.01, "k={k}");
        }
    }

    #[test]
    fn min_order_examples() {
        assert_eq!(min_order(1e-8).unwrap(), 5);
        assert_eq!(min_order(100.0).unwrap(), 1);
        // the exact ratio at k = 7 is 2.23e-16 > 1e-18
        assert_eq!(min_order(1e-16).unwrap(), 8);
    }

    #[test]
    fn order_formula() {
        assert_eq!(order_from_m(1e10), 8);
        assert_eq!(padding_rule(10, 3.0), 600);
    }

    #[test]
    fn unit_step_selection_on_tridiagonal() {
        let p = OdeProblem::tridiagonal(5, 30.0).unwrap();
        let s = select_parameters(&p, 1e-6, Strategy::UnitStep).unwrap();
        assert_eq!(s.steps, 112);
        assert!(s.order >= 1);
        let small = OdeProblem::tridiagonal(5, 0.1).unwrap();
        assert!(matches!(
            select_parameters(&small, 1e-6, Strategy::UnitStep),
            Err(Error::AssumptionViolation(_))
        ));
    }

    #[test]
    fn fixed_order_rejects_non_hermitian() {
        let mut p = OdeProblem::tridiagonal(3, 5.0).unwrap();
        p.matrix_a[(0, 1)] = C64::new(3.0, 0.0);
        assert!(matches!(select_parameters(&p, 1e-6, Strategy::FixedOrder(9)), Err(Error::Strategy(_))));
    }
}
