//! Exact classical solves of a [`BlockSystem`] and the quantities read off
//! the solution.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{Dyn, LU};

use crate::error::{Error, Result};
use crate::linalg::{c, CMat, CVec, C64};
use crate::system::BlockSystem;

pub const DENSE_CAP: usize = 4096;

/// LU factors of every diagonal super-block, reusable across right-hand sides.
pub struct BlockFactorization<'a> {
    system: &'a BlockSystem,
    offsets: Vec<usize>,
    lu: Vec<LU<C64, Dyn, Dyn>>,
    lu_adj: Vec<LU<C64, Dyn, Dyn>>,
}

fn segment_matrix(system: &BlockSystem, lo: usize, hi: usize) -> Result<CMat> {
    let n = system.block_size();
    let mut d = CMat::zeros((hi - lo) * n, (hi - lo) * n);
    for r in lo..hi {
        for (col, b) in &system.rows[r] {
            if *col >= hi {
                return Err(Error::Layout(format!("block ({r},{col}) lies above the diagonal")));
            }
            if *col >= lo {
                d.view_mut(((r - lo) * n, (col - lo) * n), (n, n)).copy_from(b);
            }
        }
    }
    Ok(d)
}

fn finite(v: &CVec) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

impl<'a> BlockFactorization<'a> {
    pub fn new(system: &'a BlockSystem) -> Result<Self> {
        let offsets = system.segment_offsets();
        let mut lu: Vec<LU<C64, Dyn, Dyn>> = Vec::with_capacity(system.segments.len());
        let mut lu_adj: Vec<LU<C64, Dyn, Dyn>> = Vec::with_capacity(system.segments.len());
        let mut cache: Option<(CMat, usize)> = None;
        for s in 0..system.segments.len() {
            let d = segment_matrix(system, offsets[s], offsets[s + 1])?;
            // steps share one diagonal block; reuse its factors
            if let Some((prev, idx)) = &cache {
                if *prev == d {
                    lu.push(lu[*idx].clone());
                    lu_adj.push(lu_adj[*idx].clone());
                    continue;
                }
            }
            let f = d.clone().lu();
            if !f.is_invertible() {
                return Err(Error::SingularBlock { step: s + 1 });
            }
            lu_adj.push(d.adjoint().lu());
            lu.push(f);
            cache = Some((d, s));
        }
        Ok(Self { system, offsets, lu, lu_adj })
    }

    /// Forward substitution over the diagonal super-blocks.
    pub fn solve(&self, y: &CVec) -> Result<CVec> {
        let n = self.system.block_size();
        let mut x = CVec::zeros(y.len());
        for s in 0..self.lu.len() {
            let (lo, hi) = (self.offsets[s], self.offsets[s + 1]);
            let mut rhs = y.rows(lo * n, (hi - lo) * n).into_owned();
            for r in lo..hi {
                for (col, b) in &self.system.rows[r] {
                    if *col < lo {
                        let upd = b * x.rows(col * n, n);
                        let mut dst = rhs.rows_mut((r - lo) * n, n);
                        dst -= upd;
                    }
                }
            }
            let xs = self.lu[s].solve(&rhs).ok_or(Error::SingularBlock { step: s + 1 })?;
            if !finite(&xs) {
                return Err(Error::SingularBlock { step: s + 1 });
            }
            x.rows_mut(lo * n, (hi - lo) * n).copy_from(&xs);
        }
        Ok(x)
    }

    /// Solves `L† x = y` by backward substitution.
    pub fn solve_adjoint(&self, y: &CVec) -> Result<CVec> {
        let n = self.system.block_size();
        let mut acc = y.clone();
        let mut x = CVec::zeros(y.len());
        for s in (0..self.lu.len()).rev() {
            let (lo, hi) = (self.offsets[s], self.offsets[s + 1]);
            let rhs = acc.rows(lo * n, (hi - lo) * n).into_owned();
            let xs = self.lu_adj[s].solve(&rhs).ok_or(Error::SingularBlock { step: s + 1 })?;
            x.rows_mut(lo * n, (hi - lo) * n).copy_from(&xs);
            // move the strictly lower blocks of these rows to the right-hand side
            for r in lo..hi {
                let xr = xs.rows((r - lo) * n, n);
                for (col, b) in &self.system.rows[r] {
                    if *col < lo {
                        let upd = b.adjoint() * xr;
                        let mut dst = acc.rows_mut(col * n, n);
                        dst -= upd;
                    }
                }
            }
        }
        Ok(x)
    }
}

/// A strategy for solving a block system, selected by name.
pub trait SystemSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, system: &BlockSystem) -> Result<CVec>;
}

pub struct BlockForward;

impl SystemSolver for BlockForward {
    fn name(&self) -> &'static str {
        "block-forward"
    }

    fn solve(&self, system: &BlockSystem) -> Result<CVec> {
        BlockFactorization::new(system)?.solve(&system.rhs)
    }
}

pub struct DenseLu;

impl SystemSolver for DenseLu {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn solve(&self, system: &BlockSystem) -> Result<CVec> {
        solve_dense(system)
    }
}

#[derive(Clone)]
pub struct SolverRegistry {
    solvers: BTreeMap<&'static str, Arc<dyn SystemSolver>>,
}

impl SolverRegistry {
    pub fn empty() -> Self {
        Self { solvers: BTreeMap::new() }
    }

    pub fn register(&mut self, s: Arc<dyn SystemSolver>) {
        self.solvers.insert(s.name(), s);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn SystemSolver>> {
        self.solvers
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Unknown { kind: "solver", name: name.to_string() })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.solvers.keys().cloned().collect()
    }
}

impl Default for SolverRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(BlockForward));
        r.register(Arc::new(DenseLu));
        r
    }
}

/// Partial-pivoted LU on the densified matrix; the ground truth for tests.
pub fn solve_dense(system: &BlockSystem) -> Result<CVec> {
    let dim = system.dim();
    if dim > DENSE_CAP {
        return Err(Error::Size { dim, cap: DENSE_CAP });
    }
    let x = system
        .to_dense()
        .lu()
        .solve(&system.rhs)
        .ok_or_else(|| Error::Singular("dense system matrix".into()))?;
    if !finite(&x) {
        return Err(Error::Singular("dense system matrix".into()));
    }
    Ok(x)
}

#[derive(Clone, Debug)]
pub struct SolutionBundle {
    /// `z_blocks[s][i]`: block `i` (storage order) of step `s`, 0-based
    pub z_blocks: Vec<Vec<CVec>>,
    pub terminal: CVec,
    pub padding_count: usize,
    /// `x̂(sh)` for `s = 1..=m`, read off the step blocks
    pub iterates: Vec<CVec>,
    /// all trailing copies of `x̂`
    pub chain: Vec<CVec>,
    pub norm_c: f64,
    pub p_succ: f64,
    /// `‖Lx − y‖₂ / ‖y‖₂`
    pub residual: f64,
}

impl SolutionBundle {
    pub fn from_solution(system: &BlockSystem, x: &CVec) -> Result<Self> {
        let n = system.block_size();
        let off = system.segment_offsets();
        let mut z_blocks = Vec::with_capacity(system.step_segments);
        let mut iterates = Vec::with_capacity(system.step_segments);
        for s in 0..system.step_segments {
            let (lo, hi) = (off[s], off[s + 1]);
            let seg = x.rows(lo * n, (hi - lo) * n);
            z_blocks.push((lo..hi).map(|b| x.rows(b * n, n).into_owned()).collect());
            iterates.push(&system.iterate_map * seg);
        }
        let chain: Vec<CVec> = (off[system.step_segments]..system.rows.len())
            .map(|b| x.rows(b * n, n).into_owned())
            .collect();
        let terminal = chain.last().cloned().unwrap_or_else(|| iterates.last().cloned().unwrap_or_else(|| CVec::zeros(n)));
        let p = chain.len();
        let zsq: f64 = z_blocks.iter().flatten().map(|v: &CVec| v.norm_squared()).sum();
        let tsq = terminal.norm_squared();
        let csq = zsq + p as f64 * tsq;
        let yn = system.rhs.norm();
        let res = (system.matvec(x) - &system.rhs).norm();
        Ok(Self {
            z_blocks,
            terminal,
            padding_count: p,
            iterates,
            chain,
            norm_c: csq.sqrt(),
            p_succ: if csq > 0.0 { p as f64 * tsq / csq } else { f64::NAN },
            residual: if yn > 0.0 { res / yn } else { res },
        })
    }

    /// Max pairwise deviation among the trailing copies of `x̂`.
    pub fn chain_spread(&self) -> f64 {
        self.chain.iter().map(|v| (v - &self.terminal).norm()).fold(0.0, f64::max)
    }
}

pub fn solve_block_forward(system: &BlockSystem) -> Result<SolutionBundle> {
    let x = BlockForward.solve(system)?;
    SolutionBundle::from_solution(system, &x)
}

pub fn solve_with(name: &str, system: &BlockSystem) -> Result<SolutionBundle> {
    let x = SolverRegistry::default().get(name)?.solve(system)?;
    SolutionBundle::from_solution(system, &x)
}

/// `p‖x̂‖² / (Σ‖z^(i)‖² + p‖x̂‖²)`.
pub fn success_probability(bundle: &SolutionBundle) -> Result<f64> {
    let zsq: f64 = bundle.z_blocks.iter().flatten().map(|v| v.norm_squared()).sum();
    success_probability_from_norms(zsq, bundle.terminal.norm_squared(), bundle.padding_count)
}

pub fn success_probability_from_norms(z_norm_sq: f64, terminal_norm_sq: f64, p: usize) -> Result<f64> {
    let csq = z_norm_sq + p as f64 * terminal_norm_sq;
    if !(csq > 0.0) {
        return Err(Error::Degenerate("zero normalisation C".into()));
    }
    Ok(p as f64 * terminal_norm_sq / csq)
}

/// `‖u/‖u‖ − v/‖v‖‖₂`.
pub fn state_distance(u: &CVec, v: &CVec) -> Result<f64> {
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Degenerate("state distance of a zero vector".into()));
    }
    Ok((u / c(nu) - v / c(nv)).norm())
}

/// Bound `2β/α` on the normalised distance when `‖u‖ ≥ α`, `‖u − v‖ ≤ β`.
pub fn distance_bound(alpha: f64, beta: f64) -> f64 {
    2.0 * beta / alpha
}

/// Amplitude lower bound `α − δ` for a component of norm `α` perturbed by `δ`.
pub fn amplitude_lower_bound(alpha: f64, delta: f64) -> f64 {
    alpha - delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::SolverParams;
    use crate::linalg;
    use crate::problem::OdeProblem;
    use crate::system::{build_pade_system, build_taylor_system};

    fn zero_problem(n: usize, x0: CVec, b: CVec) -> OdeProblem {
        OdeProblem::new(CMat::zeros(n, n), b, x0, 1.0).unwrap()
    }

    #[test]
    fn one_step_pade_at_zero_generator() {
        let mut x0 = CVec::zeros(2);
        x0[0] = c(1.0);
        let p = zero_problem(2, x0.clone(), CVec::zeros(2));
        for k in 1..4 {
            let sys = build_pade_system(&p, &SolverParams::new("pade", 1, k, 2, 1.0).unwrap()).unwrap();
            let b = solve_block_forward(&sys).unwrap();
            assert!((&b.terminal - &x0).norm() < 1e-14);
            // storage order (z_k, …, z_0): z_0 is the last block
            assert!((&b.z_blocks[0][k] - &x0).norm() < 1e-14);
            for j in 0..k {
                assert!(b.z_blocks[0][j].norm() < 1e-14);
            }
        }
    }

    #[test]
    fn one_step_adds_hb() {
        let x0 = CVec::from_vec(vec![c(1.0), c(-2.0)]);
        let bv = CVec::from_vec(vec![c(0.5), c(0.25)]);
        let p = zero_problem(2, x0.clone(), bv.clone());
        for name in ["pade", "taylor"] {
            let sys = crate::system::build_by_name(&p, &SolverParams::new(name, 1, 3, 1, 1.0).unwrap()).unwrap();
            let b = solve_block_forward(&sys).unwrap();
            assert!((&b.terminal - (&x0 + &bv)).norm() < 1e-14, "{name}");
            let d = solve_dense(&sys).unwrap();
            assert!((d.rows(d.len() - 2, 2) - &b.terminal).norm() < 1e-14);
        }
    }

    #[test]
    fn taylor_identity_start() {
        let x0 = CVec::from_vec(vec![c(0.3), c(0.4)]);
        let p = zero_problem(2, x0.clone(), CVec::zeros(2));
        let sys = build_taylor_system(&p, &SolverParams::new("taylor", 3, 4, 2, 1.0).unwrap()).unwrap();
        assert_eq!(solve_block_forward(&sys).unwrap().terminal, x0);
    }

    #[test]
    fn success_probability_edges() {
        assert_eq!(success_probability_from_norms(0.0, 2.0, 3).unwrap(), 1.0);
        assert_eq!(success_probability_from_norms(6.0, 2.0, 3).unwrap(), 0.5);
        assert!(success_probability_from_norms(0.0, 0.0, 3).is_err());
    }

    #[test]
    fn distances() {
        let e1 = CVec::from_vec(vec![c(1.0), c(0.0)]);
        let e2 = CVec::from_vec(vec![c(0.0), c(1.0)]);
        assert_eq!(state_distance(&e1, &e1).unwrap(), 0.0);
        assert!((state_distance(&e1, &e2).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(state_distance(&e1, &CVec::zeros(2)).is_err());
    }

    #[test]
    fn dense_cap() {
        let p = zero_problem(1, CVec::from_element(1, c(1.0)), CVec::zeros(1));
        let sys = build_pade_system(&p, &SolverParams::new("pade", 1, 1, 5000, 1.0).unwrap()).unwrap();
        assert!(matches!(solve_dense(&sys), Err(Error::Size { .. })));
    }

    #[test]
    fn adjoint_solve_inverts_adjoint() {
        let p = OdeProblem::tridiagonal(3, 2.0).unwrap();
        let sys = build_pade_system(&p, &SolverParams::new("pade", 3, 2, 2, 2.0).unwrap()).unwrap();
        let f = BlockFactorization::new(&sys).unwrap();
        let y = linalg::start_vector(sys.dim(), 3);
        let x = f.solve_adjoint(&y).unwrap();
        assert!((sys.adjoint_matvec(&x) - &y).norm() < 1e-12);
    }
}
