//! Single-qubit Clifford group as `S·P` products and exact twirls over
//! tensor products of single-qubit pools.
//!
//! `S` runs over six symplectic generators split in two triples:
//! `S1 = {exp(−iν(π/3)(σx+σy+σz)/√3) : ν = 0,1,2}` and
//! `S2 = {exp(−i(π/4)σp) : p = x,y,z}`; `P` runs over `{I, X, Y, Z}`.

use std::f64::consts::{FRAC_PI_3, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pauli::Pauli;
use crate::state::{
    dagger, embed_local, frobenius_norm, identity, DensityMatrix, Mat, QuantumChannel, QubitSet,
    UnitaryMatrix, C64, EXACT_TOL, TOL,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SymplecticSet {
    S1,
    S2,
}

impl SymplecticSet {
    pub fn generators(self) -> [Symplectic; 3] {
        match self {
            SymplecticSet::S1 => [Symplectic::Cyclic(0), Symplectic::Cyclic(1), Symplectic::Cyclic(2)],
            SymplecticSet::S2 => [
                Symplectic::QuarterTurn(Pauli::X),
                Symplectic::QuarterTurn(Pauli::Y),
                Symplectic::QuarterTurn(Pauli::Z),
            ],
        }
    }
}

impl fmt::Display for SymplecticSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SymplecticSet::S1 => "S1",
            SymplecticSet::S2 => "S2",
        })
    }
}

/// One of the six symplectic generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Symplectic {
    /// `exp(−iν(π/3)(σx+σy+σz)/√3)`, ν ∈ {0,1,2}.
    Cyclic(u8),
    /// `exp(−i(π/4)σp)`.
    QuarterTurn(Pauli),
}

/// `cos θ I − i sin θ (n·σ)`.
fn rotation(theta: f64, axis: [f64; 3]) -> Mat {
    let (c, s) = (theta.cos(), theta.sin());
    let mut m = identity(2).mapv(|z| z * c);
    for (p, a) in [Pauli::X, Pauli::Y, Pauli::Z].into_iter().zip(axis) {
        m.scaled_add(C64::new(0.0, -s * a), &p.matrix());
    }
    m
}

impl Symplectic {
    pub fn matrix(self) -> Mat {
        match self {
            Symplectic::Cyclic(nu) => {
                let a = 1.0 / 3f64.sqrt();
                rotation(nu as f64 * FRAC_PI_3, [a, a, a])
            }
            Symplectic::QuarterTurn(p) => {
                let axis = match p {
                    Pauli::X => [1.0, 0.0, 0.0],
                    Pauli::Y => [0.0, 1.0, 0.0],
                    Pauli::Z => [0.0, 0.0, 1.0],
                    Pauli::I => unreachable!("quarter turns are about x, y or z"),
                };
                rotation(FRAC_PI_4, axis)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct CliffordElement {
    symplectic: Symplectic,
    pauli: Pauli,
    matrix: Mat,
}

impl CliffordElement {
    pub fn new(symplectic: Symplectic, pauli: Pauli) -> Self {
        let matrix = symplectic.matrix().dot(&pauli.matrix());
        CliffordElement { symplectic, pauli, matrix }
    }

    pub fn symplectic(&self) -> Symplectic {
        self.symplectic
    }

    pub fn pauli(&self) -> Pauli {
        self.pauli
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn unitary(&self) -> UnitaryMatrix {
        UnitaryMatrix::new(self.matrix.clone()).expect("S·P is unitary")
    }

    /// Image of `σx, σy, σz` under `σ ↦ C σ C†` as signed Paulis, or `None`
    /// if some image is not `±` a Pauli matrix.
    pub fn conjugation_action(&self) -> Option<[(f64, Pauli); 3]> {
        let cd = dagger(&self.matrix);
        let mut out = [(0.0, Pauli::I); 3];
        for (slot, p) in out.iter_mut().zip([Pauli::X, Pauli::Y, Pauli::Z]) {
            let img = self.matrix.dot(&p.matrix()).dot(&cd);
            *slot = [Pauli::X, Pauli::Y, Pauli::Z].into_iter().find_map(|q| {
                let qm = q.matrix();
                [1.0, -1.0]
                    .into_iter()
                    .find(|&sign| frobenius_norm(&(&img - &qm.mapv(|z| z * sign))) < TOL)
                    .map(|sign| (sign, q))
            })?;
        }
        Some(out)
    }
}

/// All 24 single-qubit Cliffords: `S1 × Paulis` then `S2 × Paulis`.
pub fn enumerate_cliffords() -> Vec<CliffordElement> {
    [SymplecticSet::S1, SymplecticSet::S2]
        .into_iter()
        .flat_map(|set| set.generators())
        .flat_map(|s| Pauli::ALL.into_iter().map(move |p| CliffordElement::new(s, p)))
        .collect()
}

/// Parameters of a 6-element pool `{S·P : S ∈ set, P ∈ {p1, p2}}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PoolChoice {
    pub set: SymplecticSet,
    pub p1: Pauli,
    pub p2: Pauli,
}

impl PoolChoice {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.p1, Pauli::I | Pauli::Z) {
            return Err(Error::InvalidArgument(format!("P1 must be I or Z, got {:?}", self.p1)));
        }
        if !matches!(self.p2, Pauli::X | Pauli::Y) {
            return Err(Error::InvalidArgument(format!("P2 must be X or Y, got {:?}", self.p2)));
        }
        Ok(())
    }

    /// The eight valid choices.
    pub fn all() -> Vec<PoolChoice> {
        let mut out = Vec::with_capacity(8);
        for set in [SymplecticSet::S1, SymplecticSet::S2] {
            for p1 in [Pauli::I, Pauli::Z] {
                for p2 in [Pauli::X, Pauli::Y] {
                    out.push(PoolChoice { set, p1, p2 });
                }
            }
        }
        out
    }
}

impl Default for PoolChoice {
    fn default() -> Self {
        PoolChoice { set: SymplecticSet::S1, p1: Pauli::I, p2: Pauli::X }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PoolKind {
    Full24,
    Half12(SymplecticSet),
    Minimal6(PoolChoice),
}

impl Default for PoolKind {
    fn default() -> Self {
        PoolKind::Minimal6(PoolChoice::default())
    }
}

impl fmt::Display for PoolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letter = |p: Pauli| format!("{p:?}");
        match self {
            PoolKind::Full24 => f.write_str("full-24"),
            PoolKind::Half12(SymplecticSet::S1) => f.write_str("half-12"),
            PoolKind::Half12(set) => write!(f, "half-12:{set}"),
            PoolKind::Minimal6(c) => write!(f, "{}:{}:{}", c.set, letter(c.p1), letter(c.p2)),
        }
    }
}

impl FromStr for PoolKind {
    type Err = Error;

    /// Accepts `full-24`, `half-12`, `half-12:S2` or a minimal pool `S1:I:X`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("invalid pool {s:?} (expected full-24, half-12[:S1|S2] or S1:I:X)"));
        let set = |t: &str| match t.trim().to_ascii_uppercase().as_str() {
            "S1" => Ok(SymplecticSet::S1),
            "S2" => Ok(SymplecticSet::S2),
            _ => Err(bad()),
        };
        let pauli = |t: &str| match t.trim().to_ascii_uppercase().as_str() {
            "I" => Ok(Pauli::I),
            "X" => Ok(Pauli::X),
            "Y" => Ok(Pauli::Y),
            "Z" => Ok(Pauli::Z),
            _ => Err(bad()),
        };
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            ["full-24"] => Ok(PoolKind::Full24),
            ["half-12"] => Ok(PoolKind::Half12(SymplecticSet::S1)),
            ["half-12", t] => Ok(PoolKind::Half12(set(t)?)),
            [a, b, c] => {
                let choice = PoolChoice { set: set(a)?, p1: pauli(b)?, p2: pauli(c)? };
                choice.validate()?;
                Ok(PoolKind::Minimal6(choice))
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CliffordPool {
    kind: PoolKind,
    elements: Vec<CliffordElement>,
}

pub fn build_pool(kind: PoolKind) -> Result<CliffordPool> {
    let elements = match kind {
        PoolKind::Full24 => enumerate_cliffords(),
        PoolKind::Half12(set) => set
            .generators()
            .into_iter()
            .flat_map(|s| Pauli::ALL.into_iter().map(move |p| CliffordElement::new(s, p)))
            .collect(),
        PoolKind::Minimal6(choice) => {
            choice.validate()?;
            choice
                .set
                .generators()
                .into_iter()
                .flat_map(|s| [choice.p1, choice.p2].into_iter().map(move |p| CliffordElement::new(s, p)))
                .collect()
        }
    };
    Ok(CliffordPool { kind, elements })
}

impl CliffordPool {
    pub fn kind(&self) -> PoolKind {
        self.kind
    }

    pub fn elements(&self) -> &[CliffordElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Number of `m`-fold assignments, `K^m`.
    pub fn assignment_count(&self, m: usize) -> u128 {
        (self.len() as u128).pow(m as u32)
    }

    /// Assignment number `index` in mixed-radix order (first measured qubit
    /// most significant).
    pub fn assignment(&self, m: usize, mut index: u128) -> TwirlAssignment {
        let k = self.len() as u128;
        let mut picks = vec![0usize; m];
        for slot in picks.iter_mut().rev() {
            *slot = (index % k) as usize;
            index /= k;
        }
        self.assignment_from_indices(&picks)
    }

    pub fn assignment_from_indices(&self, picks: &[usize]) -> TwirlAssignment {
        TwirlAssignment { elements: picks.iter().map(|&i| self.elements[i].matrix.clone()).collect() }
    }
}

/// One Clifford per measured qubit; the register operator is their tensor
/// product with identities on unmeasured qubits.
#[derive(Clone, Debug)]
pub struct TwirlAssignment {
    elements: Vec<Mat>,
}

impl TwirlAssignment {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn inverse(&self) -> TwirlAssignment {
        TwirlAssignment { elements: self.elements.iter().map(dagger).collect() }
    }

    /// Full-register operator `C_k`.
    pub fn operator(&self, n: usize, measured: &QubitSet) -> Result<Mat> {
        if measured.len() != self.elements.len() {
            return Err(Error::DimensionMismatch { expected: measured.len(), found: self.elements.len() });
        }
        let ops: Vec<(usize, &Mat)> = measured.qubits().iter().copied().zip(self.elements.iter()).collect();
        embed_local(n, &ops)
    }
}

/// `C† S(C ρ C†) C` for one register-level Clifford operator `C`.
pub(crate) fn twirl_term(ch: &QuantumChannel, rho: &Mat, c: &Mat) -> Mat {
    let cd = dagger(c);
    let inner = c.dot(rho).dot(&cd);
    cd.dot(&ch.apply_matrix(&inner)).dot(c)
}

pub const MAX_EXACT_ASSIGNMENTS: u128 = 1_000_000;

const REDUCTION_CHUNK: u128 = 64;

/// Exact twirl `(1/K^m) Σ_k C_k† S(C_k ρ0 C_k†) C_k` over all assignments.
///
/// Chunks are summed in a fixed order so the result does not depend on the
/// number of worker threads.
pub fn twirl_exact(
    ch: &QuantumChannel,
    measured: &QubitSet,
    rho0: &DensityMatrix,
    pool: &CliffordPool,
) -> Result<DensityMatrix> {
    let n = ch.n();
    if rho0.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: rho0.n() });
    }
    measured.check_within(n)?;
    if measured.is_empty() {
        return Err(Error::InvalidSubset("twirl needs at least one measured qubit".into()));
    }
    let m = measured.len();
    let total = pool.assignment_count(m);
    if total > MAX_EXACT_ASSIGNMENTS {
        return Err(Error::TwirlTooLarge(total));
    }
    let chunks = total.div_ceil(REDUCTION_CHUNK);
    let partials = (0..chunks as u64)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk as u128 * REDUCTION_CHUNK;
            let end = (start + REDUCTION_CHUNK).min(total);
            let mut acc: Mat = Array2::zeros(rho0.matrix().dim());
            for k in start..end {
                let c = pool.assignment(m, k).operator(n, measured)?;
                acc += &twirl_term(ch, rho0.matrix(), &c);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<Mat>>>()?;
    let mut sum: Mat = Array2::zeros(rho0.matrix().dim());
    for p in &partials {
        sum += p;
    }
    let scale = C64::new(1.0 / total as f64, 0.0);
    Ok(DensityMatrix::from_raw(n, sum.mapv(|z| z * scale)))
}

/// Projection onto `|0…0⟩_M` after twirling with each pool.
#[derive(Clone, Debug)]
pub struct PoolEquivalenceReport {
    pub values: Vec<(PoolKind, f64)>,
    pub max_spread: f64,
    pub passed: bool,
}

impl PoolEquivalenceReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (kind, v) in &self.values {
            s.push_str(&format!("pool.{kind} = {v:.15e}\n"));
        }
        s.push_str(&format!("max_spread = {:.3e}\npassed = {}\n", self.max_spread, self.passed));
        s
    }
}

/// Twirls with full-24, half-12 and all eight minimal-6 pools and compares
/// the measured projection; agreement is required to [`TOL`].
pub fn pool_equivalence_check(
    ch: &QuantumChannel,
    measured: &QubitSet,
    rho0: &DensityMatrix,
) -> Result<PoolEquivalenceReport> {
    if measured.len() > 2 {
        return Err(Error::InvalidSubset("pool equivalence check supports at most 2 measured qubits".into()));
    }
    let kinds = [PoolKind::Full24, PoolKind::Half12(SymplecticSet::S1)]
        .into_iter()
        .chain(PoolChoice::all().into_iter().map(PoolKind::Minimal6));
    let mut values = Vec::new();
    for kind in kinds {
        let rho1 = twirl_exact(ch, measured, rho0, &build_pool(kind)?)?;
        values.push((kind, rho1.projection_probability(measured)?));
    }
    let hi = values.iter().map(|v| v.1).fold(f64::MIN, f64::max);
    let lo = values.iter().map(|v| v.1).fold(f64::MAX, f64::min);
    let max_spread = hi - lo;
    Ok(PoolEquivalenceReport { values, max_spread, passed: max_spread <= TOL })
}

/// Whether two unitaries are equal up to a global phase.
pub fn equal_up_to_phase(a: &Mat, b: &Mat) -> bool {
    let d = a.nrows() as f64;
    let s: C64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    s.norm() / d > 1.0 - EXACT_TOL
}
