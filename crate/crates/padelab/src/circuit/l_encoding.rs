//! The block-encoding of `L_{m,k,p}(Ah)` with `p = m(k+1)`, assembled from
//! the primitive `M₁ … M₇` circuits and checked stage by stage.
//!
//! Layout, most significant first: `lcu_l, a, b, shared, [scale], d` are
//! ancillas, then the system registers `top, m, k, n`. `top` separates the
//! time steps (0) from the terminal chain (1).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use super::encoding::{
    hermitian_dilation, tensor, unitarity_error, verify_block_encoding, zero_encoding, BlockEncodingUnitary,
};
use super::{CircuitSpec, Control, GateKind, MAX_QUBITS};
use crate::bounds::SolverParams;
use crate::error::{Error, Result};
use crate::linalg::{c, CMat, CVec};
use crate::pade::pade_coefficients;
use crate::problem::OdeProblem;
use crate::scheme::{alternating_ones, EncodingScheme, PadeScheme};
use crate::system::build_pade_system;

pub const STAGE_TOL: f64 = 1e-10;
pub const UNITARY_TOL: f64 = 1e-12;

fn log2_exact(x: usize, what: &str) -> Result<usize> {
    if x == 0 || !x.is_power_of_two() {
        return Err(Error::Layout(format!("{what} = {x} is not a power of two")));
    }
    Ok(x.trailing_zeros() as usize)
}

fn all(qs: &[usize], on: bool) -> Vec<Control> {
    qs.iter().map(|&qubit| Control { qubit, on }).collect()
}

fn q(cs: &CircuitSpec, names: &[&str]) -> Vec<usize> {
    // register names are fixed by the builders below
    cs.qubits(names).expect("register layout")
}

fn one(cs: &CircuitSpec, name: &str) -> usize {
    cs.qubit(name).expect("register layout")
}

/// Step-rescaling when `αh ≠ 1`: shrink the `U_A` branch (`αh < 1`) or
/// every other branch (`αh > 1`) through one extra ancilla.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Scale {
    Unit,
    ABranch(f64),
    Others(f64),
}

impl Scale {
    fn from_alpha_h(ah: f64) -> Self {
        if (ah - 1.0).abs() <= 1e-12 {
            Scale::Unit
        } else if ah < 1.0 {
            Scale::ABranch(2.0 * ah.acos())
        } else {
            Scale::Others(2.0 * (1.0 / ah).acos())
        }
    }

    fn width(&self) -> usize {
        usize::from(*self != Scale::Unit)
    }

    fn factor(&self, ah: f64) -> f64 {
        if let Scale::Others(_) = self {
            ah
        } else {
            1.0
        }
    }
}

fn sys_regs(kq: usize) -> CircuitSpec {
    CircuitSpec::new(&[("shared", 1, true), ("k", kq, false)])
}

fn chain_regs(mq: usize, kq: usize) -> CircuitSpec {
    CircuitSpec::new(&[("shared", 1, true), ("m", mq, false), ("k", kq, false)])
}

/// `M₁`: shift `|j⟩ ↦ |j+1⟩` with the top index flagged out.
fn m1(kq: usize) -> CircuitSpec {
    let mut cs = sys_regs(kq);
    let (s, k) = (one(&cs, "shared"), q(&cs, &["k"]));
    cs.gate(GateKind::X, vec![s], &all(&k, true));
    cs.gate(GateKind::Add, k, &[]);
    cs
}

/// `M₂`: first row of `H^⊗𝔨`.
fn m2(kq: usize) -> CircuitSpec {
    let mut cs = sys_regs(kq);
    let (s, k) = (one(&cs, "shared"), q(&cs, &["k"]));
    for &t in &k {
        cs.gate(GateKind::H, vec![t], &[]);
    }
    cs.gate(GateKind::X, vec![s], &all(&k, false));
    cs.gate(GateKind::X, vec![s], &[]);
    cs
}

/// `M₃ = diag(0, β_k, …, β₁)` through a multiplexed rotation.
fn m3(kq: usize, order: usize) -> Result<CircuitSpec> {
    let pc = pade_coefficients(order, order)?;
    let angles: Vec<f64> =
        (0..=order).map(|j| if j == 0 { PI } else { 2.0 * pc.beta(order + 1 - j).acos() }).collect();
    let mut cs = sys_regs(kq);
    let (s, k) = (one(&cs, "shared"), q(&cs, &["k"]));
    cs.gate(GateKind::UniformRy { select: k, angles }, vec![s], &[]);
    Ok(cs)
}

/// `M₄`: negative shift over the whole `(m, k)` chain.
fn m4(mq: usize, kq: usize) -> CircuitSpec {
    let mut cs = chain_regs(mq, kq);
    let (s, ch) = (one(&cs, "shared"), q(&cs, &["m", "k"]));
    cs.gate(GateKind::X, vec![s], &all(&ch, true));
    cs.gate(GateKind::Add, ch, &[]);
    cs.gate(GateKind::NegZ, vec![s], &[]);
    cs
}

/// `M₅ = diag(1/√(k+1), 1, …, 1)` on the chain.
fn m5(mq: usize, kq: usize, order: usize) -> CircuitSpec {
    let theta0 = 2.0 * (1.0 / ((order + 1) as f64).sqrt()).acos();
    let mut cs = chain_regs(mq, kq);
    let (s, ch) = (one(&cs, "shared"), q(&cs, &["m", "k"]));
    cs.gate(GateKind::Ry(theta0), vec![s], &all(&ch, false));
    cs
}

/// `M₆`: the alternating row `1̃ᵀ/√(k+1)` moved into row 0.
fn m6(kq: usize) -> CircuitSpec {
    let mut cs = sys_regs(kq);
    let (s, k) = (one(&cs, "shared"), q(&cs, &["k"]));
    for &t in &k {
        cs.gate(GateKind::H, vec![t], &[]);
    }
    cs.gate(GateKind::X, vec![*k.last().expect("k register")], &[]);
    cs.gate(GateKind::X, vec![s], &all(&k, false));
    cs.gate(GateKind::X, vec![s], &[]);
    cs
}

/// `M₇ = diag(I_m, O_m)` over `(top, m)`.
fn m7(mq: usize) -> CircuitSpec {
    let mut cs = CircuitSpec::new(&[("a", 1, true), ("top", 1, false), ("m", mq, false)]);
    let (a, top) = (one(&cs, "a"), one(&cs, "top"));
    cs.gate(GateKind::X, vec![a], &[Control::closed(top)]);
    cs
}

fn shift(d: usize, sign: f64) -> CMat {
    let mut s = CMat::zeros(d, d);
    for j in 0..d.saturating_sub(1) {
        s[(j + 1, j)] = c(sign);
    }
    s
}

/// Dense matrices the primitives must encode.
pub fn primitive_targets(order: usize, steps: usize) -> Result<BTreeMap<String, CMat>> {
    let kk = order + 1;
    let mk = steps * kk;
    let pc = pade_coefficients(order, order)?;
    let sq = (kk as f64).sqrt();
    let mut t = BTreeMap::new();
    t.insert("M1".into(), shift(kk, 1.0));
    t.insert("M2".into(), CMat::from_fn(kk, kk, |r, _| c(if r == 0 { 1.0 / sq } else { 0.0 })));
    t.insert(
        "M3".into(),
        CMat::from_diagonal(&CVec::from_iterator(kk, (0..kk).map(|j| c(if j == 0 { 0.0 } else { pc.beta(kk - j) })))),
    );
    t.insert("M4".into(), shift(mk, -1.0));
    t.insert(
        "M5".into(),
        CMat::from_diagonal(&CVec::from_iterator(mk, (0..mk).map(|j| c(if j == 0 { 1.0 / sq } else { 1.0 })))),
    );
    let signs = alternating_ones(order);
    t.insert("M6".into(), CMat::from_fn(kk, kk, |r, col| c(if r == 0 { signs[col] / sq } else { 0.0 })));
    t.insert(
        "M7".into(),
        CMat::from_diagonal(&CVec::from_iterator(2 * steps, (0..2 * steps).map(|j| c(if j < steps { 1.0 } else { 0.0 })))),
    );
    Ok(t)
}

/// `(1,1)`-block-encodings of `M₁ … M₇`, plus `M₃ ⊗ A` through the tensor
/// combinator. `k+1` and `m` must be powers of two.
pub fn primitive_encodings(
    order: usize,
    steps: usize,
    a_encoding: &BlockEncodingUnitary,
    step_h: f64,
) -> Result<BTreeMap<String, BlockEncodingUnitary>> {
    if !(step_h > 0.0) {
        return Err(Error::Input(format!("step size must be positive, got {step_h}")));
    }
    let kq = log2_exact(order + 1, "k+1")?;
    let mq = log2_exact(steps, "m")?;
    let circuits = [
        ("M1", m1(kq)),
        ("M2", m2(kq)),
        ("M3", m3(kq, order)?),
        ("M4", m4(mq, kq)),
        ("M5", m5(mq, kq, order)),
        ("M6", m6(kq)),
        ("M7", m7(mq)),
    ];
    let mut out = BTreeMap::new();
    for (name, cs) in circuits {
        out.insert(name.to_string(), BlockEncodingUnitary::from_circuit(cs, 1.0)?);
    }
    let m3a = tensor(&out["M3"], a_encoding)?;
    out.insert("M3_A".into(), m3a);
    Ok(out)
}

struct Dims {
    mq: usize,
    kq: usize,
    nq: usize,
    dq: usize,
    scale: Scale,
}

impl Dims {
    fn ancillas(&self, with_lcu: bool) -> Vec<(&'static str, usize, bool)> {
        let mut r = Vec::new();
        if with_lcu {
            r.push(("lcu_l", 1, true));
        }
        r.extend([("a", 1, true), ("b", 1, true), ("shared", 1, true), ("scale", self.scale.width(), true), ("d", self.dq, true)]);
        r
    }
}

fn scale_gate(cs: &mut CircuitSpec, theta: f64, controls: &[Control]) {
    let s = one(cs, "scale");
    cs.gate(GateKind::Ry(theta), vec![s], controls);
}

/// `W_k(Ah)/(3·max{αh,1})` over `(k, n)`.
fn w_circuit(d: &Dims, order: usize, ua: &Arc<CMat>) -> Result<CircuitSpec> {
    let mut regs = d.ancillas(false);
    regs.extend([("k", d.kq, false), ("n", d.nq, false)]);
    let mut cs = CircuitSpec::new(&regs);
    let (a, b) = (one(&cs, "a"), one(&cs, "b"));
    let zeta = 2.0 * (2.0f64 / 3.0).sqrt().acos();
    let sk = q(&cs, &["shared", "k"]);
    let prep = |cs: &mut CircuitSpec| {
        cs.gate(GateKind::Z, vec![a], &[]);
        cs.gate(GateKind::Ry(zeta), vec![a], &[]);
        cs.gate(GateKind::H, vec![b], &[]);
    };
    prep(&mut cs);
    cs.append(&m1(d.kq), &sk, &[Control::open(a), Control::open(b)])?;
    cs.append(&m2(d.kq), &sk, &[Control::open(a), Control::closed(b)])?;
    cs.append(&m3(d.kq, order)?, &sk, &[Control::closed(a)])?;
    cs.gate(GateKind::Opaque { name: "U_A".into(), matrix: ua.clone() }, q(&cs, &["d", "n"]), &[Control::closed(a)]);
    match d.scale {
        Scale::ABranch(t) => scale_gate(&mut cs, t, &[Control::closed(a)]),
        Scale::Others(t) => scale_gate(&mut cs, t, &[Control::open(a)]),
        Scale::Unit => {}
    }
    prep(&mut cs);
    Ok(cs)
}

/// `ℬ/(3·max{αh,1})` over `(m, k, n)`, the terminal chain block.
fn b_circuit(d: &Dims, order: usize) -> CircuitSpec {
    let mut regs = d.ancillas(false);
    regs.retain(|r| r.0 != "d");
    regs.extend([("m", d.mq, false), ("k", d.kq, false), ("n", d.nq, false)]);
    let mut cs = CircuitSpec::new(&regs);
    let (a, b) = (one(&cs, "a"), one(&cs, "b"));
    let theta1 = 2.0 * (2.0f64 / 3.0).acos();
    let smk = q(&cs, &["shared", "m", "k"]);
    cs.gate(GateKind::H, vec![b], &[]);
    cs.append(&m5(d.mq, d.kq, order), &smk, &[Control::open(b)]).expect("chain layout");
    cs.append(&m4(d.mq, d.kq), &smk, &[Control::closed(b)]).expect("chain layout");
    cs.gate(GateKind::H, vec![b], &[]);
    cs.gate(GateKind::Ry(theta1), vec![a], &[]);
    if let Scale::Others(t) = d.scale {
        scale_gate(&mut cs, t, &[]);
    }
    cs
}

fn system_regs(d: &Dims, with_lcu: bool) -> Vec<(&'static str, usize, bool)> {
    let mut regs = d.ancillas(with_lcu);
    regs.extend([("top", 1, false), ("m", d.mq, false), ("k", d.kq, false), ("n", d.nq, false)]);
    regs
}

/// Block-diagonal part: `W` on every step, `ℬ` on the chain.
fn l1_circuit(d: &Dims, w: &CircuitSpec, bc: &CircuitSpec) -> Result<CircuitSpec> {
    let mut cs = CircuitSpec::new(&system_regs(d, false));
    let top = one(&cs, "top");
    let wq = q(&cs, &["a", "b", "shared", "scale", "d", "k", "n"]);
    let bq = q(&cs, &["a", "b", "shared", "scale", "m", "k", "n"]);
    cs.append(w, &wq, &[Control::open(top)])?;
    cs.append(bc, &bq, &[Control::closed(top)])?;
    Ok(cs)
}

/// Coupling part: `M₇ ⊗ M₆` first, then the shift on `(top, m)`. The flag
/// on `a` has to be read from `top` before the shift moves it.
fn l2_circuit(d: &Dims) -> Result<CircuitSpec> {
    let mut cs = CircuitSpec::new(&system_regs(d, false));
    cs.append(&m7(d.mq), &q(&cs, &["a", "top", "m"]), &[])?;
    cs.append(&m6(d.kq), &q(&cs, &["shared", "k"]), &[])?;
    cs.gate(GateKind::Add, q(&cs, &["top", "m"]), &[]);
    if let Scale::Others(t) = d.scale {
        scale_gate(&mut cs, t, &[]);
    }
    Ok(cs)
}

/// `(3/4)·L₁/3 + (1/4)·L₂ = L/4` (times `1/max{αh,1}`).
fn l_circuit(d: &Dims, l1: &CircuitSpec, l2: &CircuitSpec) -> Result<CircuitSpec> {
    let mut cs = CircuitSpec::new(&system_regs(d, true));
    let lcu = one(&cs, "lcu_l");
    let rest = q(&cs, &["a", "b", "shared", "scale", "d", "top", "m", "k", "n"]);
    let prep = |cs: &mut CircuitSpec| {
        cs.gate(GateKind::Z, vec![lcu], &[]);
        cs.gate(GateKind::Ry(PI / 3.0), vec![lcu], &[]);
    };
    prep(&mut cs);
    cs.append(l1, &rest, &[Control::open(lcu)])?;
    cs.append(l2, &rest, &[Control::closed(lcu)])?;
    prep(&mut cs);
    Ok(cs)
}

#[derive(Clone, Debug, Serialize)]
pub struct StageCheck {
    pub name: String,
    pub residual: f64,
    pub unitarity: f64,
    pub alpha: f64,
    pub ancillas: usize,
    pub qubits: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LEncodingReport {
    pub stages: Vec<StageCheck>,
    pub alpha: f64,
    pub ancillas: usize,
    pub alpha_h: f64,
    pub passed: bool,
}

fn check(name: &str, enc: &BlockEncodingUnitary, target: &CMat) -> Result<StageCheck> {
    let v = verify_block_encoding(enc, target, STAGE_TOL)?;
    let unitarity = unitarity_error(&enc.unitary)?;
    Ok(StageCheck {
        name: name.into(),
        residual: v.residual,
        unitarity,
        alpha: enc.alpha,
        ancillas: enc.ancillas,
        qubits: enc.unitary.nrows().trailing_zeros() as usize,
        passed: v.passed && unitarity <= UNITARY_TOL,
    })
}

/// Every stage of the construction with its check; the last entry of the
/// returned pair is the encoding of `L`.
pub fn l_encoding_stages(
    a_encoding: &BlockEncodingUnitary,
    step_h: f64,
    steps: usize,
    order: usize,
) -> Result<(BlockEncodingUnitary, LEncodingReport)> {
    let n = a_encoding.target_dim;
    let nq = log2_exact(n, "n")?;
    let kq = log2_exact(order + 1, "k+1")?;
    let mq = log2_exact(steps, "m")?;
    let dq = a_encoding.ancillas;
    if nq + mq + kq + dq + 5 > MAX_QUBITS {
        return Err(Error::Size { dim: 1 << (nq + mq + kq + dq + 5), cap: 1 << MAX_QUBITS });
    }
    if !(step_h > 0.0) {
        return Err(Error::Input(format!("step size must be positive, got {step_h}")));
    }
    let alpha_h = a_encoding.alpha * step_h;
    let scale = Scale::from_alpha_h(alpha_h);
    let big = scale.factor(alpha_h);
    let d = Dims { mq, kq, nq, dq, scale };

    let a = a_encoding.encoded();
    let p = steps * (order + 1);
    let horizon = step_h * steps as f64;
    let zeros = CVec::zeros(n);
    let problem = OdeProblem::new(a.clone(), zeros.clone(), zeros, horizon)?;
    let mut params = SolverParams::new("pade", steps, order, p, horizon)?;
    params.step_size = step_h;
    let l = build_pade_system(&problem, &params)?.to_dense();
    let blk = (order + 1) * n;
    // L₂ holds the couplings into steps 2..m and into the head of the chain;
    // the chain's own shifts stay in ℬ
    let mut l2 = CMat::zeros(l.nrows(), l.ncols());
    for t in 1..=steps {
        l2.view_mut((t * blk, (t - 1) * blk), (blk, blk)).copy_from(&l.view((t * blk, (t - 1) * blk), (blk, blk)));
    }
    let l1 = &l - &l2;
    let chain = steps * blk;
    let b_target = l1.view((chain, chain), (chain, chain)).into_owned();
    let w_target = PadeScheme.step_block(&(&a * c(step_h)), order)?;

    let mut stages = Vec::new();
    let targets = primitive_targets(order, steps)?;
    let prims = primitive_encodings(order, steps, a_encoding, step_h)?;
    for (name, target) in &targets {
        stages.push(check(name, &prims[name], target)?);
    }
    let m3a_target = crate::linalg::kron(&targets["M3"], &a);
    stages.push(check("M3_A", &prims["M3_A"], &m3a_target)?);

    let ua = Arc::new(a_encoding.unitary.clone());
    let w = w_circuit(&d, order, &ua)?;
    let bc = b_circuit(&d, order);
    let l1c = l1_circuit(&d, &w, &bc)?;
    let l2c = l2_circuit(&d)?;
    let lc = l_circuit(&d, &l1c, &l2c)?;
    let staged = [
        ("U_W", w, 3.0 * big, w_target),
        ("U_B", bc, 3.0 * big, b_target),
        ("U_L1", l1c, 3.0 * big, l1),
        ("U_L2", l2c, big, l2),
    ];
    for (name, cs, alpha, target) in staged {
        let enc = BlockEncodingUnitary::from_circuit(cs, alpha)?;
        stages.push(check(name, &enc, &target)?);
    }
    let enc = BlockEncodingUnitary::from_circuit(lc, 4.0 * big)?;
    stages.push(check("U_L", &enc, &l)?);
    let passed = stages.iter().all(|s| s.passed);
    let report = LEncodingReport { stages, alpha: enc.alpha, ancillas: enc.ancillas, alpha_h, passed };
    Ok((enc, report))
}

/// `(4·max{αh,1}, 𝔡+5)`-block-encoding of `L_{m,k,m(k+1)}(Ah)`; at
/// `αh = 1` the rescaling qubit is dropped and `𝔡+4` ancillas remain.
pub fn build_l_encoding(
    a_encoding: &BlockEncodingUnitary,
    step_h: f64,
    steps: usize,
    order: usize,
) -> Result<BlockEncodingUnitary> {
    Ok(l_encoding_stages(a_encoding, step_h, steps, order)?.0)
}

/// Encoding of the `A` used by the circuit checks: `X ⊗ I` for `A = 0`, or
/// the one-ancilla dilation of a seeded random Hermitian `A` with
/// `‖A‖₂ = 1`, so that `α = 1`.
pub fn sample_a_encoding(n: usize, seed: Option<u64>) -> Result<BlockEncodingUnitary> {
    match seed {
        None => Ok(zero_encoding(n)),
        Some(s) => {
            let a = crate::random::random_hermitian(&mut crate::random::rng(s), n, 1.0);
            hermitian_dilation(&a, 1.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::encoding::lcu;
    use crate::linalg;

    #[test]
    fn primitive_examples() {
        let z = zero_encoding(1);
        let p = primitive_encodings(3, 2, &z, 1.0).unwrap();
        let t = primitive_targets(3, 2).unwrap();
        for name in ["M1", "M2", "M3", "M4", "M5", "M6", "M7"] {
            let v = verify_block_encoding(&p[name], &t[name], 1e-13).unwrap();
            assert!(v.passed, "{name}: {}", v.residual);
        }
        assert_eq!(t["M1"][(0, 3)], c(0.0));
        let p1 = primitive_targets(1, 1).unwrap();
        assert_eq!(p1["M3"][(1, 1)], c(0.5));
        let theta0 = 2.0 * 0.5f64.acos();
        assert!((theta0 - 2.0 * PI / 3.0).abs() < 1e-15);
    }

    #[test]
    fn non_power_of_two_rejected() {
        let z = zero_encoding(1);
        assert!(matches!(primitive_encodings(2, 2, &z, 1.0), Err(Error::Layout(_))));
        assert!(matches!(build_l_encoding(&z, 1.0, 3, 1), Err(Error::Layout(_))));
    }

    #[test]
    fn lcu_of_w_parts_has_alpha_three() {
        let z = zero_encoding(1);
        let p = primitive_encodings(3, 1, &z, 1.0).unwrap();
        let s = lcu(&[&p["M1"], &p["M2"], &p["M3"]], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(s.alpha, 3.0);
        let t = primitive_targets(3, 1).unwrap();
        let want = &t["M1"] + &t["M2"] + &t["M3"];
        assert!(linalg::max_abs(&(s.encoded() - want)) < 1e-13);
        let zeta = 2.0 * (6.0f64.sqrt() / 3.0).acos();
        assert!(((zeta / 2.0).cos().powi(2) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_matrix_small_case() {
        let (enc, rep) = l_encoding_stages(&zero_encoding(2), 1.0, 2, 1).unwrap();
        assert!(rep.passed, "{:#?}", rep.stages);
        assert_eq!((enc.alpha, enc.ancillas), (4.0, 5));
    }

    #[test]
    fn step_two_gives_alpha_eight() {
        let (enc, rep) = l_encoding_stages(&zero_encoding(1), 2.0, 1, 1).unwrap();
        assert!(rep.passed, "{:#?}", rep.stages);
        assert_eq!((enc.alpha, enc.ancillas), (8.0, 6));
        let theta1 = 2.0 * (2.0f64 / 3.0).acos();
        assert!(((theta1 / 2.0).cos() - 2.0 / 3.0).abs() < 1e-15);
    }
}
