//! Dense linear algebra for registers of at most [`MAX_QUBITS`] qubits.
//!
//! Basis index convention: qubit 0 is the leftmost tensor factor, i.e. the
//! most significant bit of a computational-basis index.

use std::fmt;

use ndarray::Array2;
pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type Mat = Array2<C64>;

pub const MAX_QUBITS: usize = 10;

/// Tolerance for validity checks (hermiticity, trace, unitarity, positivity).
pub const TOL: f64 = 1e-9;

/// Tolerance for assertions that are exact up to rounding.
pub const EXACT_TOL: f64 = 1e-12;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };

pub fn identity(dim: usize) -> Mat {
    Array2::from_diag_elem(dim, ONE)
}

pub fn dagger(m: &Mat) -> Mat {
    m.t().mapv(|z| z.conj())
}

pub fn trace(m: &Mat) -> C64 {
    m.diag().iter().sum()
}

pub fn frobenius_norm(m: &Mat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Number of qubits for a square power-of-two matrix.
pub fn qubit_count(m: &Mat) -> Result<usize> {
    let (rows, cols) = m.dim();
    if rows != cols || rows == 0 || !rows.is_power_of_two() {
        return Err(Error::BadShape { rows, cols });
    }
    let n = rows.trailing_zeros() as usize;
    if n > MAX_QUBITS {
        return Err(Error::TooManyQubits(n));
    }
    Ok(n)
}

/// Kronecker product `a ⊗ b`.
pub fn tensor(a: &Mat, b: &Mat) -> Result<Mat> {
    let na = qubit_count(a)?;
    let nb = qubit_count(b)?;
    if na + nb > MAX_QUBITS {
        return Err(Error::TooManyQubits(na + nb));
    }
    let (da, db) = (a.nrows(), b.nrows());
    let mut out = Array2::zeros((da * db, da * db));
    for ((i, j), &x) in a.indexed_iter() {
        if x == ZERO {
            continue;
        }
        for ((k, l), &y) in b.indexed_iter() {
            out[[i * db + k, j * db + l]] = x * y;
        }
    }
    Ok(out)
}

/// Left-to-right Kronecker product of a list of factors.
pub fn tensor_all<'a>(factors: impl IntoIterator<Item = &'a Mat>) -> Result<Mat> {
    let mut acc = identity(1);
    for f in factors {
        acc = tensor(&acc, f)?;
    }
    Ok(acc)
}

/// Embeds single-qubit operators on the given qubits of an `n`-qubit register;
/// every other qubit gets the identity.
pub fn embed_local(n: usize, ops: &[(usize, &Mat)]) -> Result<Mat> {
    if n > MAX_QUBITS {
        return Err(Error::TooManyQubits(n));
    }
    let id2 = identity(2);
    let mut factors: Vec<&Mat> = vec![&id2; n];
    for &(q, op) in ops {
        if q >= n {
            return Err(Error::InvalidSubset(format!("qubit {q} out of range for n={n}")));
        }
        if op.dim() != (2, 2) {
            return Err(Error::DimensionMismatch { expected: 2, found: op.nrows() });
        }
        factors[q] = op;
    }
    tensor_all(factors)
}

/// Bit of qubit `q` in basis index `i` of an `n`-qubit register.
#[inline]
pub fn bit(i: usize, q: usize, n: usize) -> usize {
    (i >> (n - 1 - q)) & 1
}

/// A sorted set of distinct qubit indices.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QubitSet(Vec<usize>);

impl QubitSet {
    /// Builds a set from arbitrary-order indices; duplicates are rejected.
    pub fn new(qubits: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut v: Vec<usize> = qubits.into_iter().collect();
        v.sort_unstable();
        if v.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSubset(format!("duplicate qubit in {v:?}")));
        }
        Ok(QubitSet(v))
    }

    pub fn from_mask(mask: u32) -> Self {
        QubitSet((0..32).filter(|q| mask >> q & 1 == 1).collect())
    }

    /// Parses a 1-based list such as `"1,2"` or `"1-2"`.
    pub fn parse_labels(s: &str) -> Result<Self> {
        let mut qs = Vec::new();
        for tok in s.split([',', '-', ' ']).filter(|t| !t.is_empty()) {
            let label: usize = tok
                .trim()
                .parse()
                .map_err(|_| Error::InvalidSubset(format!("bad qubit label {tok:?} in {s:?}")))?;
            if label == 0 {
                return Err(Error::InvalidSubset(format!("qubit labels start at 1 ({s:?})")));
            }
            qs.push(label - 1);
        }
        Self::new(qs)
    }

    pub fn all(n: usize) -> Self {
        QubitSet((0..n).collect())
    }

    pub fn qubits(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, q: usize) -> bool {
        self.0.binary_search(&q).is_ok()
    }

    pub fn mask(&self) -> u32 {
        self.0.iter().fold(0, |m, &q| m | 1 << q)
    }

    pub fn is_subset_of(&self, other: &QubitSet) -> bool {
        self.0.iter().all(|&q| other.contains(q))
    }

    pub fn check_within(&self, n: usize) -> Result<()> {
        match self.0.last() {
            Some(&q) if q >= n => Err(Error::InvalidSubset(format!(
                "qubit label {} out of range 1..={n}",
                q + 1
            ))),
            _ => Ok(()),
        }
    }

    /// Qubits of an `n`-qubit register not in this set.
    pub fn complement(&self, n: usize) -> QubitSet {
        QubitSet((0..n).filter(|&q| !self.contains(q)).collect())
    }

    /// All nonempty subsets, ordered by size and then lexicographically.
    pub fn nonempty_subsets(&self) -> Vec<QubitSet> {
        let m = self.len();
        let mut out: Vec<QubitSet> = (1u32..1 << m)
            .map(|sel| QubitSet((0..m).filter(|&i| sel >> i & 1 == 1).map(|i| self.0[i]).collect()))
            .collect();
        out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        out
    }

    /// 1-based label joined with `sep`, e.g. `"1,2"`.
    pub fn label(&self, sep: &str) -> String {
        self.0.iter().map(|q| (q + 1).to_string()).collect::<Vec<_>>().join(sep)
    }
}

impl fmt::Display for QubitSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label(","))
    }
}

fn check_keep(keep: &[usize], n: usize) -> Result<()> {
    if keep.is_empty() {
        return Err(Error::InvalidSubset("empty qubit set".into()));
    }
    let mut seen = vec![false; n];
    for &q in keep {
        if q >= n {
            return Err(Error::InvalidSubset(format!("qubit {q} out of range for n={n}")));
        }
        if std::mem::replace(&mut seen[q], true) {
            return Err(Error::InvalidSubset(format!("duplicate qubit {q}")));
        }
    }
    Ok(())
}

/// Positive semidefiniteness up to `tol`: Cholesky of `m + tol·I` must succeed.
fn is_psd(m: &Mat, tol: f64) -> bool {
    let d = m.nrows();
    let mut l: Mat = Array2::zeros((d, d));
    for j in 0..d {
        let mut diag = m[[j, j]].re + tol;
        for k in 0..j {
            diag -= l[[j, k]].norm_sqr();
        }
        if diag < 0.0 {
            return false;
        }
        let ljj = diag.sqrt();
        l[[j, j]] = C64::new(ljj, 0.0);
        for i in j + 1..d {
            let mut s = m[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]].conj();
            }
            l[[i, j]] = if ljj > 0.0 { s / ljj } else { ZERO };
        }
    }
    true
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    data: Mat,
}

impl DensityMatrix {
    /// Validates hermiticity, unit trace and positivity (all to [`TOL`]).
    pub fn new(data: Mat) -> Result<Self> {
        let n = qubit_count(&data)?;
        let herm = frobenius_norm(&(&data - &dagger(&data)));
        if herm > TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = trace(&data);
        if (tr - ONE).norm() > TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        if !is_psd(&data, TOL) {
            return Err(Error::InvalidState("negative eigenvalue below tolerance".into()));
        }
        Ok(DensityMatrix { n, data })
    }

    pub(crate) fn from_raw(n: usize, data: Mat) -> Self {
        debug_assert_eq!(data.nrows(), 1 << n);
        DensityMatrix { n, data }
    }

    /// `|bits⟩⟨bits|`, with `bits[q]` the value of qubit `q`.
    pub fn basis(bits: &[bool]) -> Result<Self> {
        let n = bits.len();
        if n > MAX_QUBITS {
            return Err(Error::TooManyQubits(n));
        }
        let idx = bits.iter().fold(0usize, |acc, &b| acc << 1 | b as usize);
        let mut data = Array2::zeros((1 << n, 1 << n));
        data[[idx, idx]] = ONE;
        Ok(DensityMatrix { n, data })
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(Error::TooManyQubits(n));
        }
        let d = 1 << n;
        Ok(DensityMatrix { n, data: identity(d).mapv(|z| z / d as f64) })
    }

    /// `|ψ⟩⟨ψ|` for a state vector, normalized.
    pub fn from_pure(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let d = psi.len();
        let data = Array2::from_shape_fn((d, d), |(i, j)| psi[i] * psi[j].conj() / (norm * norm));
        let n = qubit_count(&data)?;
        Ok(DensityMatrix { n, data })
    }

    /// The protocol's initial state: `|0⟩` on `measured`, `I/2` elsewhere.
    pub fn protocol_initial(n: usize, measured: &QubitSet) -> Result<Self> {
        measured.check_within(n)?;
        if n > MAX_QUBITS {
            return Err(Error::TooManyQubits(n));
        }
        let d = 1usize << n;
        let free = (n - measured.len()) as i32;
        let w = 0.5f64.powi(free);
        let mut data = Array2::zeros((d, d));
        for i in 0..d {
            if measured.qubits().iter().all(|&q| bit(i, q, n) == 0) {
                data[[i, i]] = C64::new(w, 0.0);
            }
        }
        Ok(DensityMatrix { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &Mat {
        &self.data
    }

    pub fn into_matrix(self) -> Mat {
        self.data
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<Self> {
        let data = tensor(&self.data, &other.data)?;
        Ok(DensityMatrix { n: self.n + other.n, data })
    }

    /// Reduced state on `keep`; the output factor order follows `keep`.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        let n = self.n;
        check_keep(keep, n)?;
        let k = keep.len();
        let rest: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
        let full_index = |kept: usize, traced: usize| -> usize {
            let mut idx = 0usize;
            for (pos, &q) in keep.iter().enumerate() {
                idx |= ((kept >> (k - 1 - pos)) & 1) << (n - 1 - q);
            }
            for (pos, &q) in rest.iter().enumerate() {
                idx |= ((traced >> (rest.len() - 1 - pos)) & 1) << (n - 1 - q);
            }
            idx
        };
        let dk = 1 << k;
        let dr = 1 << rest.len();
        let mut out = Array2::zeros((dk, dk));
        for a in 0..dk {
            for b in 0..dk {
                let mut s = ZERO;
                for c in 0..dr {
                    s += self.data[[full_index(a, c), full_index(b, c)]];
                }
                out[[a, b]] = s;
            }
        }
        Ok(DensityMatrix { n: k, data: out })
    }

    /// `Tr[ρ²]`.
    pub fn purity(&self) -> f64 {
        // Tr[ρρ] = Σ_ij ρ_ij ρ_ji = Σ_ij |ρ_ij|² for Hermitian ρ
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `Tr[ρ (|0…0⟩⟨0…0|_subset ⊗ I_rest)]`, clamped to `[0, 1]`.
    pub fn projection_probability(&self, subset: &QubitSet) -> Result<f64> {
        subset.check_within(self.n)?;
        let n = self.n;
        let p: f64 = (0..self.data.nrows())
            .filter(|&i| subset.qubits().iter().all(|&q| bit(i, q, n) == 0))
            .map(|i| self.data[[i, i]].re)
            .sum();
        Ok(p.clamp(0.0, 1.0))
    }

    /// Computational-basis outcome distribution of the qubits in `subset`.
    /// Outcome `o` has bit `i` set when `subset.qubits()[i]` reads 1.
    pub fn outcome_distribution(&self, subset: &QubitSet) -> Vec<f64> {
        let n = self.n;
        let mut probs = vec![0.0; 1 << subset.len()];
        for i in 0..self.data.nrows() {
            let o = subset
                .qubits()
                .iter()
                .enumerate()
                .fold(0usize, |acc, (pos, &q)| acc | bit(i, q, n) << pos);
            probs[o] += self.data[[i, i]].re.max(0.0);
        }
        probs
    }

    /// Convex combination `Σ w_i ρ_i`; weights must be nonnegative and sum to 1.
    pub fn mix(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?;
        let mut acc: Mat = Array2::zeros(first.1.data.dim());
        for (w, rho) in parts {
            if rho.n != first.1.n {
                return Err(Error::DimensionMismatch { expected: first.1.n, found: rho.n });
            }
            acc.scaled_add(C64::new(*w, 0.0), &rho.data);
        }
        DensityMatrix::new(acc)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix {
    n: usize,
    data: Mat,
}

impl UnitaryMatrix {
    pub fn new(data: Mat) -> Result<Self> {
        let n = qubit_count(&data)?;
        let dev = frobenius_norm(&(dagger(&data).dot(&data) - identity(data.nrows())));
        if dev > TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(UnitaryMatrix { n, data })
    }

    pub(crate) fn from_raw(n: usize, data: Mat) -> Self {
        UnitaryMatrix { n, data }
    }

    pub fn identity(n: usize) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(Error::TooManyQubits(n));
        }
        Ok(UnitaryMatrix { n, data: identity(1 << n) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &Mat {
        &self.data
    }

    pub fn into_matrix(self) -> Mat {
        self.data
    }

    pub fn dagger(&self) -> Self {
        UnitaryMatrix { n: self.n, data: dagger(&self.data) }
    }

    /// Operator product `self · rhs` (rhs acts first).
    pub fn then_after(&self, rhs: &UnitaryMatrix) -> Result<Self> {
        if self.n != rhs.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: rhs.n });
        }
        Ok(UnitaryMatrix { n: self.n, data: self.data.dot(&rhs.data) })
    }

    /// `|Tr[U†V]| / D`: 1 iff equal up to a global phase.
    pub fn phase_overlap(&self, other: &UnitaryMatrix) -> f64 {
        let d = self.data.nrows() as f64;
        let s: C64 = self.data.iter().zip(other.data.iter()).map(|(a, b)| a.conj() * b).sum();
        s.norm() / d
    }

    /// Multiplies by a phase so the first nonzero diagonal entry is real positive.
    pub fn normalize_phase(&self) -> Self {
        let phase = self
            .data
            .diag()
            .iter()
            .find(|z| z.norm() > EXACT_TOL)
            .map(|z| z.conj() / z.norm())
            .unwrap_or(ONE);
        UnitaryMatrix { n: self.n, data: self.data.mapv(|z| z * phase) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelKind {
    UnitaryEnsemble,
    Kraus,
}

/// A completely positive map given as a finite weighted operator sum
/// `ρ ↦ Σ_k w_k A_k ρ A_k†`.
#[derive(Clone, Debug)]
pub struct QuantumChannel {
    n: usize,
    kind: ChannelKind,
    terms: Vec<(f64, Mat)>,
    trace_preserving: bool,
}

impl QuantumChannel {
    pub fn identity(n: usize) -> Result<Self> {
        Ok(Self::unitary(&UnitaryMatrix::identity(n)?))
    }

    pub fn unitary(u: &UnitaryMatrix) -> Self {
        QuantumChannel {
            n: u.n,
            kind: ChannelKind::UnitaryEnsemble,
            terms: vec![(1.0, u.data.clone())],
            trace_preserving: true,
        }
    }

    /// A probability-weighted ensemble of unitaries.
    pub fn unitary_ensemble(terms: Vec<(f64, UnitaryMatrix)>) -> Result<Self> {
        let n = terms
            .first()
            .map(|t| t.1.n)
            .ok_or_else(|| Error::InvalidChannel("empty ensemble".into()))?;
        let mut total = 0.0;
        for (w, u) in &terms {
            if u.n != n {
                return Err(Error::DimensionMismatch { expected: n, found: u.n });
            }
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::InvalidChannel(format!("weight {w} is not a probability")));
            }
            total += w;
        }
        if (total - 1.0).abs() > TOL {
            return Err(Error::InvalidChannel(format!("ensemble weights sum to {total}")));
        }
        Ok(QuantumChannel {
            n,
            kind: ChannelKind::UnitaryEnsemble,
            terms: terms.into_iter().map(|(w, u)| (w, u.data)).collect(),
            trace_preserving: true,
        })
    }

    /// Kraus operators satisfying `Σ A†A = I`.
    pub fn kraus(ops: Vec<Mat>) -> Result<Self> {
        let ch = Self::kraus_unnormalized(ops)?;
        if !ch.trace_preserving {
            return Err(Error::NotTracePreserving(ch.completeness_deviation()));
        }
        Ok(ch)
    }

    /// Kraus operators without the completeness check (e.g. trace-decreasing maps).
    pub fn kraus_unnormalized(ops: Vec<Mat>) -> Result<Self> {
        let first = ops.first().ok_or_else(|| Error::InvalidChannel("no Kraus operators".into()))?;
        let n = qubit_count(first)?;
        for a in &ops {
            let m = qubit_count(a)?;
            if m != n {
                return Err(Error::DimensionMismatch { expected: n, found: m });
            }
        }
        let mut ch = QuantumChannel {
            n,
            kind: ChannelKind::Kraus,
            terms: ops.into_iter().map(|a| (1.0, a)).collect(),
            trace_preserving: false,
        };
        ch.trace_preserving = ch.completeness_deviation() <= TOL;
        Ok(ch)
    }

    /// Convex combination of channels on the same register.
    pub fn mix(parts: &[(f64, &QuantumChannel)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::InvalidChannel("empty mixture".into()))?;
        let n = first.1.n;
        let total: f64 = parts.iter().map(|p| p.0).sum();
        if (total - 1.0).abs() > TOL || parts.iter().any(|p| p.0 < 0.0) {
            return Err(Error::InvalidChannel(format!("mixture weights sum to {total}")));
        }
        let all_unitary = parts.iter().all(|p| p.1.kind == ChannelKind::UnitaryEnsemble);
        let mut terms = Vec::new();
        for (w, ch) in parts {
            if ch.n != n {
                return Err(Error::DimensionMismatch { expected: n, found: ch.n });
            }
            for (v, a) in &ch.terms {
                if all_unitary {
                    terms.push((w * v, a.clone()));
                } else {
                    terms.push((1.0, a.mapv(|z| z * (w * v).sqrt())));
                }
            }
        }
        let kind = if all_unitary { ChannelKind::UnitaryEnsemble } else { ChannelKind::Kraus };
        let trace_preserving = parts.iter().all(|p| p.1.trace_preserving);
        Ok(QuantumChannel { n, kind, terms, trace_preserving })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn terms(&self) -> &[(f64, Mat)] {
        &self.terms
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    /// `‖Σ w A†A − I‖_F`.
    pub fn completeness_deviation(&self) -> f64 {
        let d = 1 << self.n;
        let mut acc = -identity(d);
        for (w, a) in &self.terms {
            acc.scaled_add(C64::new(*w, 0.0), &dagger(a).dot(a));
        }
        frobenius_norm(&acc)
    }

    /// `Σ w A ρ A†` on a raw matrix of matching dimension.
    pub fn apply_matrix(&self, rho: &Mat) -> Mat {
        let mut out: Mat = Array2::zeros(rho.dim());
        for (w, a) in &self.terms {
            let t = a.dot(rho).dot(&dagger(a));
            out.scaled_add(C64::new(*w, 0.0), &t);
        }
        out
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: rho.n });
        }
        Ok(DensityMatrix::from_raw(self.n, self.apply_matrix(&rho.data)))
    }
}

/// Seeded random states, unitaries and channels for tests and benchmarks.
pub mod random {
    use ndarray::Array2;
    use rand::Rng;
    use rand_distr::StandardNormal;

    use super::*;

    fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    }

    /// Matrix with orthonormal columns from Gram–Schmidt on a complex Gaussian
    /// matrix (Haar distributed for square shapes).
    pub fn isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat {
        let mut m: Mat = Array2::from_shape_fn((rows, cols), |_| gaussian(rng));
        for j in 0..cols {
            for k in 0..j {
                let proj: C64 = (0..rows).map(|i| m[[i, k]].conj() * m[[i, j]]).sum();
                for i in 0..rows {
                    let v = m[[i, k]];
                    m[[i, j]] -= proj * v;
                }
            }
            let norm = (0..rows).map(|i| m[[i, j]].norm_sqr()).sum::<f64>().sqrt();
            for i in 0..rows {
                m[[i, j]] /= norm;
            }
        }
        m
    }

    pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> UnitaryMatrix {
        let d = 1 << n;
        UnitaryMatrix::from_raw(n, isometry(d, d, rng))
    }

    /// Ensemble of `k` Haar unitaries with random probability weights.
    pub fn unitary_ensemble<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> QuantumChannel {
        let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
        let total: f64 = raw.iter().sum();
        let terms = raw.iter().map(|w| (w / total, haar_unitary(n, rng))).collect();
        QuantumChannel::unitary_ensemble(terms).expect("valid random ensemble")
    }

    /// Generic (non-unital) channel with `k` Kraus operators, cut from a random
    /// isometry `C^D → C^{kD}`.
    pub fn kraus_channel<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> QuantumChannel {
        let d = 1 << n;
        let v = isometry(k * d, d, rng);
        let ops = (0..k)
            .map(|b| v.slice(ndarray::s![b * d..(b + 1) * d, ..]).to_owned())
            .collect();
        QuantumChannel::kraus(ops).expect("isometry blocks are complete")
    }

    pub fn density_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DensityMatrix {
        let d = 1 << n;
        let g: Mat = Array2::from_shape_fn((d, d), |_| gaussian(rng));
        let m = g.dot(&dagger(&g));
        let tr = trace(&m).re;
        let mut m = m.mapv(|z| z / tr);
        // exact hermiticity
        let h = (&m + &dagger(&m)).mapv(|z| z * 0.5);
        m.assign(&h);
        DensityMatrix::from_raw(n, m)
    }
}
