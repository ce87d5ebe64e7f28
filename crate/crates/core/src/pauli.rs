//! Pauli strings and the exact χ-matrix diagonal of a channel.
//!
//! Strings are enumerated lexicographically over `I < X < Y < Z` with qubit 0
//! as the leftmost (most significant) letter, so the index of a string is its
//! base-4 reading.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::state::{
    bit, qubit_count, tensor_all, Mat, QuantumChannel, QubitSet, UnitaryMatrix, C64, EXACT_TOL,
    MAX_QUBITS, ONE, TOL, ZERO,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> Mat {
        let i = C64::new(0.0, 1.0);
        let v = match self {
            Pauli::I => [ONE, ZERO, ZERO, ONE],
            Pauli::X => [ZERO, ONE, ONE, ZERO],
            Pauli::Y => [ZERO, -i, i, ZERO],
            Pauli::Z => [ONE, ZERO, ZERO, -ONE],
        };
        Array2::from_shape_vec((2, 2), v.to_vec()).unwrap()
    }

    fn flips(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    /// Entry `⟨row| σ |row ⊕ flips⟩`.
    fn entry(self, row: usize) -> C64 {
        match (self, row) {
            (Pauli::I | Pauli::X, _) => ONE,
            (Pauli::Y, 0) => C64::new(0.0, -1.0),
            (Pauli::Y, _) => C64::new(0.0, 1.0),
            (Pauli::Z, 0) => ONE,
            (Pauli::Z, _) => -ONE,
        }
    }

    fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString(Vec<Pauli>);

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Result<Self> {
        if letters.len() > MAX_QUBITS {
            return Err(Error::TooManyQubits(letters.len()));
        }
        Ok(PauliString(letters))
    }

    pub fn identity(n: usize) -> Self {
        PauliString(vec![Pauli::I; n])
    }

    /// The string with lexicographic index `idx` on `n` qubits.
    pub fn from_index(n: usize, idx: usize) -> Self {
        PauliString((0..n).map(|q| Pauli::ALL[(idx >> (2 * (n - 1 - q))) & 3]).collect())
    }

    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, &p| acc << 2 | p as usize)
    }

    /// All `4^n` strings in lexicographic order.
    pub fn all(n: usize) -> impl Iterator<Item = PauliString> {
        (0..1usize << (2 * n)).map(move |i| PauliString::from_index(n, i))
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.0
    }

    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&p| p != Pauli::I).count()
    }

    pub fn support(&self) -> QubitSet {
        QubitSet::new(self.0.iter().enumerate().filter(|(_, &p)| p != Pauli::I).map(|(q, _)| q))
            .expect("positions are distinct")
    }

    pub fn matrix(&self) -> UnitaryMatrix {
        let factors: Vec<Mat> = self.0.iter().map(|p| p.matrix()).collect();
        let m = tensor_all(&factors).expect("length checked at construction");
        UnitaryMatrix::from_raw(self.n(), m)
    }

    /// `Tr[P · A]` using the monomial structure of `P` (O(D) per string).
    pub fn trace_product(&self, a: &Mat) -> C64 {
        let n = self.n();
        let flip = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, p)| p.flips())
            .fold(0usize, |m, (q, _)| m | 1 << (n - 1 - q));
        (0..1usize << n)
            .map(|row| {
                let phase = self
                    .0
                    .iter()
                    .enumerate()
                    .fold(ONE, |acc, (q, p)| acc * p.entry(bit(row, q, n)));
                phase * a[[row ^ flip, row]]
            })
            .sum()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|p| write!(f, "{}", p.letter()))
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .trim()
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::InvalidArgument(format!("invalid Pauli letter {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        PauliString::new(letters)
    }
}

pub fn pauli_weight(s: &PauliString) -> usize {
    s.weight()
}

fn check_nonnegative(label: impl FnOnce() -> String, value: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value > -EXACT_TOL {
        Ok(0.0)
    } else {
        Err(Error::NegativeChi { label: label(), value })
    }
}

/// Diagonal of the χ matrix in the Pauli-string basis: `⟨|η_s|²⟩` for every
/// string, identity included.
#[derive(Clone, Debug, PartialEq)]
pub struct ChiDiagonal {
    n: usize,
    values: Vec<f64>,
    trace_preserving: bool,
}

impl ChiDiagonal {
    /// From explicit entries; absent strings are zero.
    pub fn from_entries(n: usize, entries: impl IntoIterator<Item = (PauliString, f64)>) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(Error::TooManyQubits(n));
        }
        let mut values = vec![0.0; 1 << (2 * n)];
        for (s, v) in entries {
            if s.n() != n {
                return Err(Error::DimensionMismatch { expected: n, found: s.n() });
            }
            values[s.index()] = check_nonnegative(|| s.to_string(), v)?;
        }
        let trace_preserving = (values.iter().sum::<f64>() - 1.0).abs() <= TOL;
        Ok(ChiDiagonal { n, values, trace_preserving })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, s: &PauliString) -> f64 {
        self.values[s.index()]
    }

    pub fn identity_value(&self) -> f64 {
        self.values[0]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (PauliString, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (PauliString::from_index(self.n, i), v))
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Whether the entries sum to 1 (the normalization invariant applies).
    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    /// Weighted sum of χ diagonals, i.e. the χ diagonal of a channel mixture.
    pub fn scaled_sum(parts: &[(f64, &ChiDiagonal)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::InvalidArgument("empty sum".into()))?;
        let n = first.1.n;
        let mut values = vec![0.0; first.1.values.len()];
        for (w, chi) in parts {
            if chi.n != n {
                return Err(Error::DimensionMismatch { expected: n, found: chi.n });
            }
            for (acc, v) in values.iter_mut().zip(&chi.values) {
                *acc += w * v;
            }
        }
        let trace_preserving = (values.iter().sum::<f64>() - 1.0).abs() <= TOL;
        Ok(ChiDiagonal { n, values, trace_preserving })
    }

    /// One `LABEL = value` line per string, values with 13 significant digits.
    pub fn to_text(&self) -> String {
        self.iter().map(|(s, v)| format!("{s} = {v:.12e}\n")).collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut n = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(lineno + 1, "expected LABEL = value"))?;
            let s: PauliString = k.trim().parse().map_err(|e: Error| Error::parse(lineno + 1, e.to_string()))?;
            let v: f64 = v.trim().parse().map_err(|_| Error::parse(lineno + 1, "bad number"))?;
            match n {
                None => n = Some(s.n()),
                Some(m) if m != s.n() => return Err(Error::parse(lineno + 1, "inconsistent string length")),
                _ => {}
            }
            entries.push((s, v));
        }
        let n = n.ok_or_else(|| Error::parse(0, "no entries"))?;
        ChiDiagonal::from_entries(n, entries)
    }
}

/// `⟨|η_s|²⟩ = Σ_k w_k |Tr[P_s A_k]|² / D²` for every Pauli string `s`.
pub fn chi_diagonal(ch: &QuantumChannel) -> Result<ChiDiagonal> {
    let n = ch.n();
    let d2 = (1usize << n) as f64 * (1usize << n) as f64;
    let values = (0..1usize << (2 * n))
        .into_par_iter()
        .map(|i| {
            let s = PauliString::from_index(n, i);
            let v: f64 = ch.terms().iter().map(|(w, a)| w * s.trace_product(a).norm_sqr()).sum::<f64>() / d2;
            check_nonnegative(|| s.to_string(), v)
        })
        .collect::<Result<Vec<f64>>>()?;
    let trace_preserving = ch.is_trace_preserving() && (values.iter().sum::<f64>() - 1.0).abs() <= TOL;
    Ok(ChiDiagonal { n, values, trace_preserving })
}

/// χ diagonal of a raw operator `A` (single-term channel `ρ ↦ AρA†`).
pub fn operator_chi(a: &Mat) -> Result<ChiDiagonal> {
    qubit_count(a)?;
    chi_diagonal(&QuantumChannel::kraus_unnormalized(vec![a.clone()])?)
}

/// χ-diagonal mass coarse-grained by exact support: one value per nonempty
/// qubit subset.
#[derive(Clone, Debug, PartialEq)]
pub struct CollectiveCoefficients {
    n: usize,
    values: BTreeMap<QubitSet, f64>,
}

impl CollectiveCoefficients {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, subset: &QubitSet) -> f64 {
        self.values.get(subset).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&QubitSet, f64)> {
        self.values.iter().map(|(k, &v)| (k, v))
    }

    pub fn total(&self) -> f64 {
        self.values.values().sum()
    }

    /// Sum over every subset containing `subset` (itself included).
    pub fn superset_sum(&self, subset: &QubitSet) -> f64 {
        self.values.iter().filter(|(k, _)| subset.is_subset_of(k)).map(|(_, v)| v).sum()
    }

    /// Sum over strict supersets of `subset`: the higher-weight tail.
    pub fn tail(&self, subset: &QubitSet) -> f64 {
        self.superset_sum(subset) - self.get(subset)
    }

    pub fn max_of_size(&self, sizes: impl Fn(usize) -> bool) -> f64 {
        self.values.iter().filter(|(k, _)| sizes(k.len())).map(|(_, &v)| v).fold(0.0, f64::max)
    }

    /// One `1,2 = value` line per subset (1-based labels).
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{} = {v:.12e}\n", k.label(","))).collect()
    }
}

pub fn collective_coefficients(chi: &ChiDiagonal) -> CollectiveCoefficients {
    let n = chi.n;
    let mut by_mask = vec![0.0; 1 << n];
    for (i, &v) in chi.values.iter().enumerate().skip(1) {
        let s = PauliString::from_index(n, i);
        by_mask[s.support().mask() as usize] += v;
    }
    let values = (1u32..1 << n).map(|m| (QubitSet::from_mask(m), by_mask[m as usize])).collect();
    CollectiveCoefficients { n, values }
}

/// Largest collective coefficient over subsets of more than `above` qubits.
pub fn max_weight_coefficient(chi: &ChiDiagonal, above: usize) -> f64 {
    collective_coefficients(chi).max_of_size(|size| size > above)
}
