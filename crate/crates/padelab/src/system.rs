//! Assembly of the full block-lower-triangular systems and their text
//! export format.

use std::fmt::Write as _;

use crate::bounds::SolverParams;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, C64};
use crate::pade::pade_coefficients;
use crate::problem::OdeProblem;
use crate::scheme::{self, EncodingScheme};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Layout {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub p: usize,
    pub h: f64,
}

impl Layout {
    pub fn block_rows(&self) -> usize {
        self.m * (self.k + 1) + self.p
    }

    pub fn dim(&self) -> usize {
        self.n * self.block_rows()
    }
}

/// Sparse system stored as `n×n` blocks, grouped by block row.
#[derive(Clone, Debug)]
pub struct BlockSystem {
    pub scheme: String,
    pub layout: Layout,
    pub scale_row_factor: f64,
    /// sizes (in blocks) of the diagonal super-blocks, in order
    pub segments: Vec<usize>,
    /// `rows[r]` holds `(block column, block)` pairs, columns ascending
    pub rows: Vec<Vec<(usize, CMat)>>,
    pub rhs: CVec,
    /// `x̂_s = iterate_map · z^(s)` for the step segments
    pub iterate_map: CMat,
    /// number of leading segments that are time steps
    pub step_segments: usize,
}

impl BlockSystem {
    fn empty(scheme: &str, layout: Layout, scale: f64, segments: Vec<usize>, iterate_map: CMat, steps: usize) -> Self {
        let blocks: usize = segments.iter().sum();
        Self {
            scheme: scheme.to_string(),
            layout,
            scale_row_factor: scale,
            segments,
            rows: vec![Vec::new(); blocks],
            rhs: CVec::zeros(blocks * layout.n),
            iterate_map,
            step_segments: steps,
        }
    }

    pub fn block_size(&self) -> usize {
        self.layout.n
    }

    pub fn dim(&self) -> usize {
        self.rows.len() * self.layout.n
    }

    /// Adds `block` at block position `(r, col)`, merging with an existing entry.
    pub fn add_block(&mut self, r: usize, col: usize, block: CMat) {
        if block.iter().all(|z| *z == C64::default()) {
            return;
        }
        let row = &mut self.rows[r];
        match row.binary_search_by_key(&col, |(c, _)| *c) {
            Ok(i) => row[i].1 += block,
            Err(i) => row.insert(i, (col, block)),
        }
    }

    /// Splits a dense `(a·n) × (b·n)` matrix into blocks at offset `(r0, c0)`.
    fn add_dense(&mut self, r0: usize, c0: usize, dense: &CMat) {
        let n = self.layout.n;
        for bi in 0..dense.nrows() / n {
            for bj in 0..dense.ncols() / n {
                let blk = dense.view((bi * n, bj * n), (n, n)).into_owned();
                self.add_block(r0 + bi, c0 + bj, blk);
            }
        }
    }

    pub fn segment_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.segments.len() + 1);
        let mut acc = 0;
        off.push(0);
        for s in &self.segments {
            acc += s;
            off.push(acc);
        }
        off
    }

    /// Stored `n×n` blocks.
    pub fn block_count(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }

    pub fn nnz(&self) -> usize {
        self.rows
            .iter()
            .flat_map(|r| r.iter())
            .map(|(_, b)| b.iter().filter(|z| **z != C64::default()).count())
            .sum()
    }

    pub fn to_dense(&self) -> CMat {
        let n = self.layout.n;
        let mut d = CMat::zeros(self.dim(), self.dim());
        for (r, row) in self.rows.iter().enumerate() {
            for (col, b) in row {
                d.view_mut((r * n, col * n), (n, n)).copy_from(b);
            }
        }
        d
    }

    pub fn matvec(&self, x: &CVec) -> CVec {
        let n = self.layout.n;
        let mut y = CVec::zeros(self.dim());
        for (r, row) in self.rows.iter().enumerate() {
            let mut acc = CVec::zeros(n);
            for (col, b) in row {
                acc += b * x.rows(col * n, n);
            }
            y.rows_mut(r * n, n).copy_from(&acc);
        }
        y
    }

    pub fn adjoint_matvec(&self, x: &CVec) -> CVec {
        let n = self.layout.n;
        let mut y = CVec::zeros(self.dim());
        for (r, row) in self.rows.iter().enumerate() {
            let xr = x.rows(r * n, n);
            for (col, b) in row {
                let upd = b.adjoint() * xr;
                let mut dst = y.rows_mut(col * n, n);
                dst += upd;
            }
        }
        y
    }

    /// Text export: header `dim nnz scheme n m k p h`, one `row col re im`
    /// line per nonzero, then `rhs` followed by one `re im` line per entry.
    pub fn export(&self) -> String {
        let l = &self.layout;
        let n = l.n;
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {} {} {} {} {} {:e}", self.dim(), self.nnz(), self.scheme, n, l.m, l.k, l.p, l.h);
        for (r, row) in self.rows.iter().enumerate() {
            for (col, b) in row {
                for i in 0..n {
                    for j in 0..n {
                        let z = b[(i, j)];
                        if z != C64::default() {
                            let _ = writeln!(s, "{} {} {:e} {:e}", r * n + i, col * n + j, z.re, z.im);
                        }
                    }
                }
            }
        }
        s.push_str("rhs\n");
        for z in self.rhs.iter() {
            let _ = writeln!(s, "{:e} {:e}", z.re, z.im);
        }
        s
    }

    /// Inverse of [`BlockSystem::export`] for the registered schemes.
    pub fn import(text: &str) -> Result<Self> {
        let bad = |what: &str| Error::Input(format!("system file: {what}"));
        let mut lines = text.lines();
        let head: Vec<&str> = lines.next().ok_or_else(|| bad("empty"))?.split_whitespace().collect();
        if head.len() != 8 {
            return Err(bad("header needs 8 fields"));
        }
        let num = |i: usize| head[i].parse::<usize>().map_err(|_| bad("header integer"));
        let (dim, nnz, n, m, k, p) = (num(0)?, num(1)?, num(3)?, num(4)?, num(5)?, num(6)?);
        let h: f64 = head[7].parse().map_err(|_| bad("header step"))?;
        let sch = scheme::scheme(head[2])?;
        let layout = Layout { n, m, k, p, h };
        if layout.dim() != dim {
            return Err(bad("dimension does not match layout"));
        }
        let mut sys = empty_for(sch.as_ref(), layout);
        let mut dense_blocks: std::collections::BTreeMap<(usize, usize), CMat> = Default::default();
        for _ in 0..nnz {
            let f: Vec<&str> = lines.next().ok_or_else(|| bad("truncated entries"))?.split_whitespace().collect();
            if f.len() != 4 {
                return Err(bad("entry needs 4 fields"));
            }
            let r: usize = f[0].parse().map_err(|_| bad("row"))?;
            let col: usize = f[1].parse().map_err(|_| bad("col"))?;
            let re: f64 = f[2].parse().map_err(|_| bad("re"))?;
            let im: f64 = f[3].parse().map_err(|_| bad("im"))?;
            if r >= dim || col >= dim {
                return Err(bad("index out of range"));
            }
            dense_blocks.entry((r / n, col / n)).or_insert_with(|| CMat::zeros(n, n))[(r % n, col % n)] =
                C64::new(re, im);
        }
        for ((r, col), b) in dense_blocks {
            sys.add_block(r, col, b);
        }
        if lines.next().map(str::trim) != Some("rhs") {
            return Err(bad("missing rhs section"));
        }
        for i in 0..dim {
            let f: Vec<&str> = lines.next().ok_or_else(|| bad("truncated rhs"))?.split_whitespace().collect();
            if f.len() != 2 {
                return Err(bad("rhs entry needs 2 fields"));
            }
            sys.rhs[i] = C64::new(f[0].parse().map_err(|_| bad("re"))?, f[1].parse().map_err(|_| bad("im"))?);
        }
        Ok(sys)
    }
}

fn empty_for(sch: &dyn EncodingScheme, layout: Layout) -> BlockSystem {
    let Layout { n, m, k, p, .. } = layout;
    let mut segments = vec![k + 1; m];
    segments.extend(std::iter::repeat(1).take(p));
    BlockSystem::empty(sch.name(), layout, sch.row_scale(k), segments, sch.iterate_map(n, k), m)
}

/// Generic assembly shared by every registered scheme.
pub fn build_system(sch: &dyn EncodingScheme, problem: &OdeProblem, params: &SolverParams) -> Result<BlockSystem> {
    if params.scheme != sch.name() {
        return Err(Error::Input(format!("params ask for scheme '{}', builder is '{}'", params.scheme, sch.name())));
    }
    let n = problem.dim;
    let (m, k, p, h) = (params.steps, params.order, params.padding, params.step_size);
    if m == 0 || k == 0 || p == 0 {
        return Err(Error::Input(format!("need m, k, p >= 1 (got {m}, {k}, {p})")));
    }
    let layout = Layout { n, m, k, p, h };
    let mut sys = empty_for(sch, layout);
    let ah = &problem.matrix_a * c(h);
    let diag = sch.step_block(&ah, k)?;
    let coupling = sch.coupling_block(n, k);
    let w = k + 1;
    for s in 0..m {
        sys.add_dense(s * w, s * w, &diag);
        if s > 0 {
            sys.add_dense(s * w, (s - 1) * w, &coupling);
        }
        let start = if s == 0 { Some(&problem.vec_x0) } else { None };
        let y = sch.step_rhs(start, &problem.vec_b, h, k)?;
        sys.rhs.rows_mut(s * w * n, w * n).copy_from(&y);
    }
    let t0 = m * w;
    let (row, dscale) = sch.terminal_row(n, k);
    sys.add_dense(t0, (m - 1) * w, &row);
    sys.add_block(t0, t0, linalg::eye(n) * c(dscale));
    for r in 1..p {
        sys.add_block(t0 + r, t0 + r - 1, linalg::eye(n) * c(-1.0));
        sys.add_block(t0 + r, t0 + r, linalg::eye(n));
    }
    check_layout(&sys)?;
    Ok(sys)
}

fn check_layout(sys: &BlockSystem) -> Result<()> {
    let l = &sys.layout;
    if sys.dim() != l.dim() || sys.rhs.len() != l.dim() {
        return Err(Error::Layout(format!("dimension {} differs from n(m(k+1)+p) = {}", sys.dim(), l.dim())));
    }
    // k+2 blocks plus the diagonal per block row; scalar nonzeros also
    // scale with the density of A, so the count is taken over blocks
    if sys.block_count() > l.block_rows() * (l.k + 3) {
        return Err(Error::Layout(format!("{} blocks exceed (m(k+1)+p)(k+3)", sys.block_count())));
    }
    Ok(())
}

pub fn build_pade_system(problem: &OdeProblem, params: &SolverParams) -> Result<BlockSystem> {
    build_system(&scheme::PadeScheme, problem, params)
}

pub fn build_taylor_system(problem: &OdeProblem, params: &SolverParams) -> Result<BlockSystem> {
    build_system(&scheme::TaylorScheme, problem, params)
}

pub fn build_by_name(problem: &OdeProblem, params: &SolverParams) -> Result<BlockSystem> {
    let sch = scheme::scheme(&params.scheme)?;
    build_system(sch.as_ref(), problem, params)
}

/// The step system before the parity reduction: per step the unknowns are
/// `(z_k, …, z_0, z̃_1, …, z̃_k, x̂(sh))`, with no terminal chain.
pub fn build_unreduced_pade_system(problem: &OdeProblem, steps: usize, order: usize) -> Result<BlockSystem> {
    let n = problem.dim;
    let (m, k) = (steps, order);
    if m == 0 || k == 0 {
        return Err(Error::Input("need m, k >= 1".into()));
    }
    let h = problem.horizon / m as f64;
    let pc = pade_coefficients(k, k)?;
    let (alpha, beta) = (pc.alpha_f64(), pc.beta_f64());
    let w = 2 * k + 2;
    let mut select = CMat::zeros(n, n * w);
    select.view_mut((0, (w - 1) * n), (n, n)).copy_from(&linalg::eye(n));
    let layout = Layout { n, m, k, p: 0, h };
    let mut sys = BlockSystem::empty("pade-unreduced", layout, 1.0, vec![w; m], select, m);
    let id = linalg::eye(n);
    let ah = &problem.matrix_a * c(h);
    for s in 0..m {
        let o = s * w;
        for j in 0..=k {
            sys.add_block(o, o + j, id.clone());
        }
        if s > 0 {
            sys.add_block(o, o - 1, &id * c(-1.0));
        } else {
            sys.rhs.rows_mut(0, n).copy_from(&problem.vec_x0);
        }
        for i in 1..=k {
            sys.add_block(o + i, o + i - 1, id.clone());
            sys.add_block(o + i, o + i, &ah * c(beta[k - i]));
        }
        let tail = sys.rhs.rows(o * n + k * n, n) - &problem.vec_b * c(pc.d(1) * h);
        sys.rhs.rows_mut((o + k) * n, n).copy_from(&tail);
        // z̃_j rows; z̃_0 is z_0, stored at position k
        for j in 1..=k {
            let r = o + k + j;
            sys.add_block(r, r - 1, &ah * c(-alpha[j - 1]));
            sys.add_block(r, r, id.clone());
        }
        let n1 = crate::pade::to_f64(&pc.num_coeffs[1]);
        sys.rhs.rows_mut((o + k + 1) * n, n).copy_from(&(&problem.vec_b * c(n1 * h)));
        let r = o + w - 1;
        for j in 0..=k {
            sys.add_block(r, o + k + j, &id * c(-1.0));
        }
        sys.add_block(r, r, id.clone());
    }
    Ok(sys)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(n: usize) -> OdeProblem {
        OdeProblem::tridiagonal(n, 1.0).unwrap()
    }

    #[test]
    fn dimension_arithmetic() {
        let p = problem(2);
        let params = SolverParams::new("pade", 2, 3, 8, 1.0).unwrap();
        let sys = build_pade_system(&p, &params).unwrap();
        assert_eq!(sys.dim(), 32);
        let t = build_taylor_system(&problem(1), &SolverParams::new("taylor", 1, 1, 1, 1.0).unwrap()).unwrap();
        assert_eq!(t.dim(), 3);
    }

    #[test]
    fn pade_rhs_last_block_for_k1() {
        let mut p = problem(1);
        p.vec_b[0] = c(3.0);
        let params = SolverParams::new("pade", 2, 1, 1, 1.0).unwrap();
        let sys = build_pade_system(&p, &params).unwrap();
        // h = 1/2, so −(1/2)·h·b = −0.75
        assert!((sys.rhs[1].re + 0.75).abs() < 1e-15);
        assert!((sys.rhs[3].re + 0.75).abs() < 1e-15);
        assert_eq!(sys.rhs[2], c(0.0));
    }

    #[test]
    fn export_round_trip() {
        let p = problem(2);
        let params = SolverParams::new("taylor", 2, 2, 3, 1.0).unwrap();
        let sys = build_taylor_system(&p, &params).unwrap();
        let back = BlockSystem::import(&sys.export()).unwrap();
        assert_eq!(back.to_dense(), sys.to_dense());
        assert_eq!(back.rhs, sys.rhs);
        assert_eq!(back.nnz(), sys.nnz());
    }

    #[test]
    fn scheme_mismatch_rejected() {
        let params = SolverParams::new("taylor", 1, 1, 1, 1.0).unwrap();
        assert!(build_pade_system(&problem(1), &params).is_err());
    }
}
