//! Block-encodings as dense unitaries and the four combinators: linear
//! combination, product, tensor product and normalization adjustment.

use serde::Serialize;

use super::{CircuitSpec, MAX_QUBITS};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec};

/// `unitary` restricted to ancillas `|0⟩` (leading, most significant
/// qubits) equals `A / alpha` for a `target_dim`-square matrix `A`.
#[derive(Clone, Debug)]
pub struct BlockEncodingUnitary {
    pub unitary: CMat,
    pub alpha: f64,
    pub ancillas: usize,
    pub target_dim: usize,
    pub circuit: Option<CircuitSpec>,
}

impl BlockEncodingUnitary {
    pub fn new(unitary: CMat, alpha: f64, ancillas: usize, target_dim: usize) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Composition(format!("normalization must be positive, got {alpha}")));
        }
        if unitary.nrows() != unitary.ncols() || unitary.nrows() != target_dim << ancillas {
            return Err(Error::Shape(format!(
                "{}x{} unitary cannot hold {ancillas} ancillas over dimension {target_dim}",
                unitary.nrows(),
                unitary.ncols()
            )));
        }
        let q = qubits_for(unitary.nrows());
        if q > MAX_QUBITS {
            return Err(Error::Size { dim: unitary.nrows(), cap: 1 << MAX_QUBITS });
        }
        Ok(Self { unitary, alpha, ancillas, target_dim, circuit: None })
    }

    /// Simulates `circuit`; its ancilla registers must come first.
    pub fn from_circuit(circuit: CircuitSpec, alpha: f64) -> Result<Self> {
        let mut seen_system = false;
        for r in &circuit.registers {
            if r.ancilla && seen_system && r.width > 0 {
                return Err(Error::Layout(format!("ancilla register '{}' follows a system register", r.name)));
            }
            seen_system |= !r.ancilla && r.width > 0;
        }
        let anc = circuit.ancilla_qubits();
        let sys = circuit.num_qubits() - anc;
        let u = circuit.unitary()?;
        let mut e = Self::new(u, alpha, anc, 1 << sys)?;
        e.circuit = Some(circuit);
        Ok(e)
    }

    pub fn projection(&self) -> CMat {
        self.unitary.view((0, 0), (self.target_dim, self.target_dim)).into_owned()
    }

    /// `alpha ·` projection, the matrix this unitary encodes.
    pub fn encoded(&self) -> CMat {
        self.projection() * c(self.alpha)
    }

    fn padded(&self, ancillas: usize) -> CMat {
        if ancillas == self.ancillas {
            return self.unitary.clone();
        }
        linalg::kron(&linalg::eye(1 << (ancillas - self.ancillas)), &self.unitary)
    }
}

fn qubits_for(dim: usize) -> usize {
    dim.next_power_of_two().trailing_zeros() as usize
}

fn check_qubits(dim: usize) -> Result<()> {
    if dim > 1 << MAX_QUBITS {
        return Err(Error::Size { dim, cap: 1 << MAX_QUBITS });
    }
    Ok(())
}

/// `‖U†U − I‖₂`: the Frobenius norm when that already certifies 1e-12,
/// the spectral norm otherwise.
pub fn unitarity_error(u: &CMat) -> Result<f64> {
    let e = linalg::adjoint_mul(u, u) - linalg::eye(u.ncols());
    let f = e.norm();
    if f <= 1e-12 {
        return Ok(f);
    }
    linalg::spectral_norm(&e)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Verification {
    pub residual: f64,
    pub passed: bool,
}

/// `‖target − α·⟨0|U|0⟩‖₂` and whether it is within `tol`.
pub fn verify_block_encoding(enc: &BlockEncodingUnitary, target: &CMat, tol: f64) -> Result<Verification> {
    if target.nrows() != enc.target_dim || target.ncols() != enc.target_dim {
        return Err(Error::Shape(format!(
            "target is {}x{}, encoding holds dimension {}",
            target.nrows(),
            target.ncols(),
            enc.target_dim
        )));
    }
    let residual = linalg::sigma_extremes(&(target - enc.encoded())).0;
    Ok(Verification { residual, passed: residual <= tol })
}

pub fn identity_encoding(n: usize) -> BlockEncodingUnitary {
    BlockEncodingUnitary { unitary: linalg::eye(n), alpha: 1.0, ancillas: 0, target_dim: n, circuit: None }
}

fn psd_sqrt(h: &CMat) -> CMat {
    let eig = ((h + h.adjoint()) * c(0.5)).symmetric_eigen();
    let v = &eig.eigenvectors;
    let d = CVec::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| c(l.max(0.0).sqrt())));
    v * CMat::from_diagonal(&d) * v.adjoint()
}

/// One-ancilla dilation `[[B, √(I−BB†)], [√(I−B†B), −B†]]` with `B = A/α`.
pub fn unitary_dilation(a: &CMat, alpha: f64) -> Result<BlockEncodingUnitary> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Shape("dilation needs a square matrix".into()));
    }
    let norm = linalg::spectral_norm(a)?;
    if !(alpha > 0.0) || norm > alpha * (1.0 + 1e-12) {
        return Err(Error::Composition(format!("normalization {alpha} is below ‖A‖₂ = {norm}")));
    }
    let b = a * c(1.0 / alpha);
    let id = linalg::eye(n);
    let mut u = CMat::zeros(2 * n, 2 * n);
    u.view_mut((0, 0), (n, n)).copy_from(&b);
    u.view_mut((0, n), (n, n)).copy_from(&psd_sqrt(&(&id - &b * b.adjoint())));
    u.view_mut((n, 0), (n, n)).copy_from(&psd_sqrt(&(&id - b.adjoint() * &b)));
    u.view_mut((n, n), (n, n)).copy_from(&(b.adjoint() * c(-1.0)));
    BlockEncodingUnitary::new(u, alpha, 1, n)
}

pub fn hermitian_dilation(a: &CMat, alpha: f64) -> Result<BlockEncodingUnitary> {
    if !linalg::is_hermitian(a) {
        return Err(Error::Classification("matrix is not Hermitian".into()));
    }
    unitary_dilation(a, alpha)
}

/// `X ⊗ I_n`: encodes the zero matrix with `α = 1`.
pub fn zero_encoding(n: usize) -> BlockEncodingUnitary {
    let x = CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
    BlockEncodingUnitary { unitary: linalg::kron(&x, &linalg::eye(n)), alpha: 1.0, ancillas: 1, target_dim: n, circuit: None }
}

/// Reorders tensor factors: output factor `i` is input factor `perm[i]`.
fn permute_factors(u: &CMat, dims: &[usize], perm: &[usize]) -> CMat {
    let total: usize = dims.iter().product();
    let out_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let map: Vec<usize> = (0..total)
        .map(|mut o| {
            let mut digits = vec![0; dims.len()];
            for i in (0..dims.len()).rev() {
                digits[perm[i]] = o % out_dims[i];
                o /= out_dims[i];
            }
            digits.iter().zip(dims).fold(0, |acc, (d, n)| acc * n + d)
        })
        .collect();
    CMat::from_fn(total, total, |r, col| u[(map[r], map[col])])
}

/// Householder reflection sending `e_0` to the unit vector `v`.
fn householder_prep(v: &[f64]) -> CMat {
    let d = v.len();
    let mut u = CVec::from_iterator(d, v.iter().map(|&x| c(-x)));
    u[0] += c(1.0);
    let nn = u.norm_squared();
    if nn < 1e-30 {
        return linalg::eye(d);
    }
    linalg::eye(d) - &u * u.adjoint() * c(2.0 / nn)
}

/// Encodes `Σ wᵢ Pᵢ` with `α' = Σ wᵢ`, `Pᵢ` being the projection of part
/// `i` (its matrix over its own `αᵢ`). Ancillas: `⌈log₂ r⌉ + max aᵢ`.
pub fn lcu(parts: &[&BlockEncodingUnitary], weights: &[f64]) -> Result<BlockEncodingUnitary> {
    if parts.is_empty() || parts.len() != weights.len() {
        return Err(Error::Composition(format!("{} parts with {} weights", parts.len(), weights.len())));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0)) {
        return Err(Error::Composition(format!("weights must be positive, got {w}")));
    }
    let n = parts[0].target_dim;
    if parts.iter().any(|p| p.target_dim != n) {
        return Err(Error::Composition("parts encode matrices of different sizes".into()));
    }
    let anc = parts.iter().map(|p| p.ancillas).max().unwrap_or(0);
    let sel = qubits_for(parts.len());
    let slots = 1usize << sel;
    let block = n << anc;
    check_qubits(block * slots)?;
    let total: f64 = weights.iter().sum();
    let mut v: Vec<f64> = weights.iter().map(|w| (w / total).sqrt()).collect();
    v.resize(slots, 0.0);
    let prep = linalg::kron(&householder_prep(&v), &linalg::eye(block));
    let mut select = linalg::eye(block * slots);
    for (i, p) in parts.iter().enumerate() {
        select.view_mut((i * block, i * block), (block, block)).copy_from(&p.padded(anc));
    }
    let u = linalg::matmul(&linalg::matmul(&prep.adjoint(), &select), &prep);
    BlockEncodingUnitary::new(u, total, sel + anc, n)
}

/// Encodes `A·B` with `α' = αβ` and `a + b` ancillas (`A`'s first).
pub fn product(a: &BlockEncodingUnitary, b: &BlockEncodingUnitary) -> Result<BlockEncodingUnitary> {
    if a.target_dim != b.target_dim {
        return Err(Error::Composition(format!("product of dimensions {} and {}", a.target_dim, b.target_dim)));
    }
    let n = a.target_dim;
    let (da, db) = (1usize << a.ancillas, 1usize << b.ancillas);
    check_qubits(da * db * n)?;
    let ua = permute_factors(&linalg::kron(&linalg::eye(db), &a.unitary), &[db, da, n], &[1, 0, 2]);
    let ub = linalg::kron(&linalg::eye(da), &b.unitary);
    BlockEncodingUnitary::new(linalg::matmul(&ua, &ub), a.alpha * b.alpha, a.ancillas + b.ancillas, n)
}

/// Encodes `A₁ ⊗ A₂` with `α' = α₁α₂` and ancillas `[a₁, a₂]` in front.
pub fn tensor(a: &BlockEncodingUnitary, b: &BlockEncodingUnitary) -> Result<BlockEncodingUnitary> {
    let (da, db) = (1usize << a.ancillas, 1usize << b.ancillas);
    check_qubits(da * db * a.target_dim * b.target_dim)?;
    let u = permute_factors(&linalg::kron(&a.unitary, &b.unitary), &[da, a.target_dim, db, b.target_dim], &[0, 2, 1, 3]);
    BlockEncodingUnitary::new(u, a.alpha * b.alpha, a.ancillas + b.ancillas, a.target_dim * b.target_dim)
}

/// Raises the normalization to `beta` with one extra ancilla rotated by
/// `RY(2 arccos(α/β))`.
pub fn adjust(enc: &BlockEncodingUnitary, beta: f64) -> Result<BlockEncodingUnitary> {
    if !(beta > enc.alpha) {
        return Err(Error::Composition(format!("target normalization {beta} must exceed {}", enc.alpha)));
    }
    check_qubits(2 * enc.unitary.nrows())?;
    let t = 2.0 * (enc.alpha / beta).acos();
    let (s, co) = (t / 2.0).sin_cos();
    let ry = CMat::from_row_slice(2, 2, &[c(co), c(-s), c(s), c(co)]);
    BlockEncodingUnitary::new(linalg::kron(&ry, &enc.unitary), beta, enc.ancillas + 1, enc.target_dim)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Compose {
    Lcu,
    Product,
    Tensor,
    Adjust,
}

impl std::str::FromStr for Compose {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lcu" => Ok(Self::Lcu),
            "product" => Ok(Self::Product),
            "tensor" => Ok(Self::Tensor),
            "adjust" => Ok(Self::Adjust),
            _ => Err(Error::Unknown { kind: "composition", name: s.into() }),
        }
    }
}

/// Dispatches to the combinators. `adjust` reads its target
/// normalization from `weights[0]`; product and tensor fold left.
pub fn compose(kind: Compose, parts: &[&BlockEncodingUnitary], weights: Option<&[f64]>) -> Result<BlockEncodingUnitary> {
    let first = parts.first().ok_or_else(|| Error::Composition("no parts".into()))?;
    match kind {
        Compose::Lcu => {
            let ones = vec![1.0; parts.len()];
            lcu(parts, weights.unwrap_or(&ones))
        }
        Compose::Product | Compose::Tensor => {
            let f = if kind == Compose::Product { product } else { tensor };
            parts[1..].iter().try_fold((*first).clone(), |acc, p| f(&acc, p))
        }
        Compose::Adjust => {
            let beta = weights.and_then(|w| w.first().copied()).ok_or_else(|| Error::Composition("adjust needs a target".into()))?;
            if parts.len() != 1 {
                return Err(Error::Composition("adjust takes exactly one part".into()));
            }
            adjust(first, beta)
        }
    }
}
