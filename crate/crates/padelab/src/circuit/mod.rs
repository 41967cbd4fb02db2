//! Gate-level circuits at desk scale. Gates act on a dense `2^q` matrix,
//! qubit 0 is the most significant bit, registers are laid out top to
//! bottom in declaration order.

pub mod encoding;
pub mod l_encoding;

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64};

pub use encoding::{
    adjust, compose, hermitian_dilation, identity_encoding, lcu, product, tensor, unitarity_error,
    unitary_dilation, verify_block_encoding, zero_encoding, BlockEncodingUnitary, Compose, Verification,
};
pub use l_encoding::{
    build_l_encoding, l_encoding_stages, primitive_encodings, sample_a_encoding, LEncodingReport, StageCheck,
};

/// Largest circuit simulated densely.
pub const MAX_QUBITS: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct Register {
    pub name: String,
    pub width: usize,
    pub ancilla: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Control {
    pub qubit: usize,
    /// closed (fires on 1) or open (fires on 0)
    pub on: bool,
}

impl Control {
    pub fn closed(qubit: usize) -> Self {
        Self { qubit, on: true }
    }
    pub fn open(qubit: usize) -> Self {
        Self { qubit, on: false }
    }
}

#[derive(Clone, Debug)]
pub enum GateKind {
    H,
    X,
    Z,
    /// `−Z = diag(−1, 1)`
    NegZ,
    Ry(f64),
    /// `|j⟩ ↦ |j+1 mod 2^w⟩` on the target qubits (first target most significant)
    Add,
    /// rotation on the single target, angle chosen by the value of `select`
    UniformRy { select: Vec<usize>, angles: Vec<f64> },
    Opaque { name: String, matrix: Arc<CMat> },
}

#[derive(Clone, Debug)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    pub controls: Vec<Control>,
}

fn ry_matrix(theta: f64) -> CMat {
    let (s, co) = (theta / 2.0).sin_cos();
    CMat::from_row_slice(2, 2, &[c(co), c(-s), c(s), c(co)])
}

fn add_matrix(w: usize) -> CMat {
    let d = 1 << w;
    let mut p = CMat::zeros(d, d);
    for j in 0..d {
        p[((j + 1) % d, j)] = c(1.0);
    }
    p
}

impl Gate {
    pub fn new(kind: GateKind, targets: Vec<usize>) -> Self {
        Self { kind, targets, controls: Vec::new() }
    }

    pub fn with_controls(mut self, controls: &[Control]) -> Self {
        self.controls.extend_from_slice(controls);
        self
    }

    fn qubits(&self) -> Vec<usize> {
        let mut q = self.targets.clone();
        q.extend(self.controls.iter().map(|c| c.qubit));
        if let GateKind::UniformRy { select, .. } = &self.kind {
            q.extend(select);
        }
        q
    }

    fn remapped(&self, map: &[usize], extra: &[Control]) -> Self {
        let kind = match &self.kind {
            GateKind::UniformRy { select, angles } => {
                GateKind::UniformRy { select: select.iter().map(|&q| map[q]).collect(), angles: angles.clone() }
            }
            k => k.clone(),
        };
        let mut controls: Vec<Control> = self.controls.iter().map(|c| Control { qubit: map[c.qubit], on: c.on }).collect();
        controls.extend_from_slice(extra);
        Self { kind, targets: self.targets.iter().map(|&q| map[q]).collect(), controls }
    }

    /// Local matrices with their extra controls; a multiplexed rotation
    /// expands into one controlled rotation per select value.
    fn expand(&self) -> Vec<(CMat, Vec<Control>)> {
        let single = |m: CMat| vec![(m, self.controls.clone())];
        match &self.kind {
            GateKind::H => single(CMat::from_row_slice(2, 2, &[c(1.0), c(1.0), c(1.0), c(-1.0)]) * c(FRAC_1_SQRT_2)),
            GateKind::X => single(CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])),
            GateKind::Z => single(CMat::from_diagonal(&crate::linalg::CVec::from_vec(vec![c(1.0), c(-1.0)]))),
            GateKind::NegZ => single(CMat::from_diagonal(&crate::linalg::CVec::from_vec(vec![c(-1.0), c(1.0)]))),
            GateKind::Ry(t) => single(ry_matrix(*t)),
            GateKind::Add => single(add_matrix(self.targets.len())),
            GateKind::Opaque { matrix, .. } => single((**matrix).clone()),
            GateKind::UniformRy { select, angles } => {
                let w = select.len();
                angles
                    .iter()
                    .enumerate()
                    .map(|(j, &t)| {
                        let mut ctl = self.controls.clone();
                        for (i, &q) in select.iter().enumerate() {
                            ctl.push(Control { qubit: q, on: (j >> (w - 1 - i)) & 1 == 1 });
                        }
                        (ry_matrix(t), ctl)
                    })
                    .collect()
            }
        }
    }
}

/// Applies a local gate to every column of `state`.
fn apply_local(state: &mut CMat, nq: usize, targets: &[usize], g: &CMat, controls: &[Control]) {
    let bit = |q: usize| 1usize << (nq - 1 - q);
    let t = targets.len();
    let offs: Vec<usize> = (0..1usize << t)
        .map(|l| (0..t).filter(|&i| (l >> (t - 1 - i)) & 1 == 1).map(|i| bit(targets[i])).sum())
        .collect();
    let tmask: usize = targets.iter().map(|&q| bit(q)).sum();
    let (cmask, cval) = controls
        .iter()
        .fold((0usize, 0usize), |(m, v), ct| (m | bit(ct.qubit), if ct.on { v | bit(ct.qubit) } else { v }));
    let dim = 1usize << nq;
    let bases: Vec<usize> = (0..dim).filter(|i| i & tmask == 0 && i & cmask == cval).collect();
    let local = 1usize << t;
    let mut buf = vec![C64::default(); local];
    let cols = state.ncols();
    let data = state.as_mut_slice();
    for col in 0..cols {
        let s = &mut data[col * dim..(col + 1) * dim];
        for &b in &bases {
            for (l, o) in offs.iter().enumerate() {
                buf[l] = s[b + o];
            }
            for (r, o) in offs.iter().enumerate() {
                let mut acc = C64::default();
                for (l, v) in buf.iter().enumerate() {
                    acc += g[(r, l)] * v;
                }
                s[b + o] = acc;
            }
        }
    }
}

/// Registers plus an ordered gate list.
#[derive(Clone, Debug, Default)]
pub struct CircuitSpec {
    pub registers: Vec<Register>,
    pub gates: Vec<Gate>,
}

impl CircuitSpec {
    pub fn new(registers: &[(&str, usize, bool)]) -> Self {
        Self {
            registers: registers
                .iter()
                .map(|&(name, width, ancilla)| Register { name: name.into(), width, ancilla })
                .collect(),
            gates: Vec::new(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.registers.iter().map(|r| r.width).sum()
    }

    pub fn ancilla_qubits(&self) -> usize {
        self.registers.iter().filter(|r| r.ancilla).map(|r| r.width).sum()
    }

    pub fn has(&self, name: &str) -> bool {
        self.registers.iter().any(|r| r.name == name)
    }

    /// Qubit indices of the named registers, concatenated; missing names
    /// are a layout error.
    pub fn qubits(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for name in names {
            let mut start = 0;
            let mut found = false;
            for r in &self.registers {
                if r.name == *name {
                    out.extend(start..start + r.width);
                    found = true;
                    break;
                }
                start += r.width;
            }
            if !found {
                return Err(Error::Layout(format!("no register '{name}'")));
            }
        }
        Ok(out)
    }

    pub fn qubit(&self, name: &str) -> Result<usize> {
        let q = self.qubits(&[name])?;
        match q.as_slice() {
            [x] => Ok(*x),
            _ => Err(Error::Layout(format!("register '{name}' is not a single qubit"))),
        }
    }

    pub fn push(&mut self, gate: Gate) {
        self.gates.push(gate);
    }

    pub fn gate(&mut self, kind: GateKind, targets: Vec<usize>, controls: &[Control]) {
        self.gates.push(Gate::new(kind, targets).with_controls(controls));
    }

    /// Appends `sub` with its qubit `i` placed on `map[i]` and every gate
    /// additionally controlled by `controls`.
    pub fn append(&mut self, sub: &CircuitSpec, map: &[usize], controls: &[Control]) -> Result<()> {
        if map.len() != sub.num_qubits() {
            return Err(Error::Layout(format!("map has {} qubits, sub-circuit {}", map.len(), sub.num_qubits())));
        }
        for g in &sub.gates {
            self.gates.push(g.remapped(map, controls));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let nq = self.num_qubits();
        if nq > MAX_QUBITS {
            return Err(Error::Size { dim: 1 << nq, cap: 1 << MAX_QUBITS });
        }
        for (i, g) in self.gates.iter().enumerate() {
            let qs = g.qubits();
            if let Some(q) = qs.iter().find(|&&q| q >= nq) {
                return Err(Error::Layout(format!("gate {i} touches qubit {q} of {nq}")));
            }
            let mut sorted = qs.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != qs.len() {
                return Err(Error::Layout(format!("gate {i} uses a qubit twice")));
            }
            let want = match &g.kind {
                GateKind::Add => g.targets.len().max(1),
                GateKind::Opaque { matrix, .. } => {
                    if matrix.nrows() != 1 << g.targets.len() {
                        return Err(Error::Layout(format!("gate {i}: opaque matrix does not fit its targets")));
                    }
                    g.targets.len()
                }
                GateKind::UniformRy { select, angles } => {
                    if angles.len() != 1 << select.len() {
                        return Err(Error::Layout(format!(
                            "gate {i}: {} angles for a {}-qubit select register",
                            angles.len(),
                            select.len()
                        )));
                    }
                    1
                }
                _ => 1,
            };
            if g.targets.len() != want {
                return Err(Error::Layout(format!("gate {i} has {} targets", g.targets.len())));
            }
        }
        Ok(())
    }

    /// Dense unitary of the whole gate list.
    pub fn unitary(&self) -> Result<CMat> {
        self.validate()?;
        let nq = self.num_qubits();
        let mut u = linalg::eye(1 << nq);
        for g in &self.gates {
            for (m, ctl) in g.expand() {
                apply_local(&mut u, nq, &g.targets, &m, &ctl);
            }
        }
        Ok(u)
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_wraps_around() {
        for w in 1..=3 {
            let mut cs = CircuitSpec::new(&[("r", w, false)]);
            cs.gate(GateKind::Add, (0..w).collect(), &[]);
            let u = cs.unitary().unwrap();
            let d = 1 << w;
            for j in 0..d {
                assert_eq!(u[((j + 1) % d, j)], c(1.0));
            }
            let mut p = linalg::eye(d);
            for _ in 0..d {
                p = &u * p;
            }
            assert_eq!(p, linalg::eye(d));
        }
    }

    #[test]
    fn msb_first_ordering_and_controls() {
        let mut cs = CircuitSpec::new(&[("a", 1, false), ("b", 1, false)]);
        cs.gate(GateKind::X, vec![1], &[Control::closed(0)]);
        let u = cs.unitary().unwrap();
        // CNOT with control on the top line: |10⟩ ↔ |11⟩
        assert_eq!(u[(3, 2)], c(1.0));
        assert_eq!(u[(0, 0)], c(1.0));
        let mut open = CircuitSpec::new(&[("a", 1, false), ("b", 1, false)]);
        open.gate(GateKind::X, vec![1], &[Control::open(0)]);
        assert_eq!(open.unitary().unwrap()[(1, 0)], c(1.0));
    }

    #[test]
    fn uniform_rotation_multiplexes() {
        let mut cs = CircuitSpec::new(&[("s", 1, false), ("t", 1, false)]);
        cs.gate(GateKind::UniformRy { select: vec![0], angles: vec![0.3, 1.1] }, vec![1], &[]);
        let u = cs.unitary().unwrap();
        assert!((u[(0, 0)].re - 0.15f64.cos()).abs() < 1e-15);
        assert!((u[(2, 2)].re - 0.55f64.cos()).abs() < 1e-15);
        let mut bad = CircuitSpec::new(&[("s", 1, false), ("t", 1, false)]);
        bad.gate(GateKind::UniformRy { select: vec![0], angles: vec![0.3] }, vec![1], &[]);
        assert!(matches!(bad.unitary(), Err(Error::Layout(_))));
    }

    #[test]
    fn out_of_range_target() {
        let mut cs = CircuitSpec::new(&[("a", 1, false)]);
        cs.gate(GateKind::H, vec![1], &[]);
        assert!(matches!(cs.validate(), Err(Error::Layout(_))));
    }
}
