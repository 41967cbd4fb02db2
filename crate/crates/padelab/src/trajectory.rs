//! Exact classical solution on the step grid.

use crate::error::{Error, Result};
use crate::linalg::{c, CMat, CVec, C64};
use crate::pade::reference_expm;
use crate::problem::OdeProblem;

/// Refinement factor of the fine grid used for `max_t` quantities.
pub const REFINE: usize = 10;

#[derive(Clone, Debug)]
pub struct TrajectoryReference {
    pub times: Vec<f64>,
    /// `x(ih)` for `i = 0..=m`
    pub states: Vec<CVec>,
    pub terminal_norm: f64,
    /// max of `‖x(t)‖₂` over the grid refined `REFINE` times
    pub max_norm: f64,
}

/// `[[A, b], [0, 0]]`; its exponential carries the particular solution in
/// the last column, so `A⁻¹` never appears.
pub fn augmented_generator(problem: &OdeProblem) -> CMat {
    let n = problem.dim;
    let mut g = CMat::zeros(n + 1, n + 1);
    g.view_mut((0, 0), (n, n)).copy_from(&problem.matrix_a);
    g.view_mut((0, n), (n, 1)).copy_from(&problem.vec_b);
    g
}

/// `x(t)` from the augmented exponential.
pub fn state_at(problem: &OdeProblem, aug: &CMat, t: f64) -> Result<CVec> {
    let n = problem.dim;
    let e = reference_expm(aug, t)?;
    let mut v = CVec::zeros(n + 1);
    v.rows_mut(0, n).copy_from(&problem.vec_x0);
    v[n] = C64::new(1.0, 0.0);
    Ok((e * v).rows(0, n).into_owned())
}

pub fn classical_reference_trajectory(problem: &OdeProblem, steps: usize) -> Result<TrajectoryReference> {
    if steps == 0 {
        return Err(Error::Input("trajectory needs at least one step".into()));
    }
    let h = problem.horizon / steps as f64;
    let aug = augmented_generator(problem);
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut max_norm: f64 = 0.0;
    for i in 0..=steps {
        let t = if i == steps { problem.horizon } else { i as f64 * h };
        let x = state_at(problem, &aug, t)?;
        max_norm = max_norm.max(x.norm());
        times.push(t);
        states.push(x);
        if i < steps {
            for r in 1..REFINE {
                let tr = t + h * r as f64 / REFINE as f64;
                max_norm = max_norm.max(state_at(problem, &aug, tr)?.norm());
            }
        }
    }
    let terminal_norm = states[steps].norm();
    if terminal_norm == 0.0 {
        return Err(Error::Degenerate("x(T) = 0, g is undefined".into()));
    }
    Ok(TrajectoryReference { times, states, terminal_norm, max_norm })
}

impl TrajectoryReference {
    pub fn terminal(&self) -> &CVec {
        self.states.last().expect("nonempty trajectory")
    }

    /// `g = max{max_t ‖x(t)‖, ‖b‖} / ‖x(T)‖`.
    pub fn g_ratio(&self, problem: &OdeProblem) -> f64 {
        self.max_norm.max(problem.vec_b.norm()) / self.terminal_norm
    }
}

/// `C(A) = max_t ‖e^{At}‖₂` over the step grid refined `REFINE` times.
pub fn transient_growth(a: &CMat, horizon: f64, steps: usize) -> Result<f64> {
    let pts = steps.max(1) * REFINE;
    let mut best: f64 = 1.0;
    for j in 1..=pts {
        let t = horizon * j as f64 / pts as f64;
        best = best.max(crate::linalg::spectral_norm(&reference_expm(a, t)?)?);
    }
    Ok(best)
}

pub fn step_integral(a: &CMat, h: f64) -> Result<CMat> {
    // top-right block of exp([[A, I], [0, 0]] h) is ∫₀ʰ e^{As} ds
    let n = a.nrows();
    let mut g = CMat::zeros(2 * n, 2 * n);
    g.view_mut((0, 0), (n, n)).copy_from(a);
    for i in 0..n {
        g[(i, n + i)] = c(1.0);
    }
    Ok(reference_expm(&g, h)?.view((0, n), (n, n)).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, b: f64, x0: f64, t: f64) -> OdeProblem {
        OdeProblem::new(
            CMat::from_element(1, 1, c(a)),
            CVec::from_element(1, c(b)),
            CVec::from_element(1, c(x0)),
            t,
        )
        .unwrap()
    }

    #[test]
    fn pure_integration() {
        let tr = classical_reference_trajectory(&scalar(0.0, 1.0, 0.0, 1.0), 4).unwrap();
        assert!((tr.terminal()[0].re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn decay() {
        let tr = classical_reference_trajectory(&scalar(-1.0, 0.0, 1.0, 1.0), 3).unwrap();
        assert!((tr.terminal()[0].re - (-1f64).exp()).abs() < 1e-14);
        assert!((tr.max_norm - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_terminal_is_degenerate() {
        assert!(matches!(
            classical_reference_trajectory(&scalar(0.0, 0.0, 0.0, 1.0), 2),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn one_step_recurrence() {
        let p = OdeProblem::tridiagonal(5, 30.0).unwrap();
        let m = 12;
        let tr = classical_reference_trajectory(&p, m).unwrap();
        let h = 30.0 / m as f64;
        let e = reference_expm(&p.matrix_a, h).unwrap();
        let phi = step_integral(&p.matrix_a, h).unwrap();
        for i in 0..m {
            let next = &e * &tr.states[i] + &phi * &p.vec_b;
            assert!((next - &tr.states[i + 1]).norm() < 1e-10);
        }
    }
}
