//! Liquid-state NMR register model: a commuting Z/ZZ internal Hamiltonian,
//! ideal instantaneous pulses, a delay/pulse sequence compiler, and the gate
//! library used by the experiments.
//!
//! Frequencies are in Hz and times in seconds. The Hamiltonian is
//! `H/ħ = Σ_j π ω_j σz^(j) + Σ_{j<k} (π J_jk / 2) σz^(j) σz^(k)` in rad/s, so
//! a lone coupling evolved for `τ = 1/(4J)` gives `exp(−i(π/8) σz σz)`.
//! Text formats use 1-based qubit labels; the API is 0-based.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::pauli::Pauli;
use crate::state::{bit, embed_local, QubitSet, UnitaryMatrix, C64, MAX_QUBITS};

/// Name of the built-in four-spin crotonic acid parameter set.
pub const CROTONIC_PRESET: &str = "crotonic-400MHz";

/// Total duration of the time-suspension sequence, seconds.
pub const IE_TOTAL_DURATION: f64 = 12.2e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct NmrHamiltonian {
    n: usize,
    shifts: Vec<f64>,
    couplings: BTreeMap<(usize, usize), f64>,
}

impl NmrHamiltonian {
    pub fn new(shifts: Vec<f64>, couplings: impl IntoIterator<Item = ((usize, usize), f64)>) -> Result<Self> {
        let n = shifts.len();
        if n == 0 {
            return Err(Error::InvalidArgument("Hamiltonian needs at least one spin".into()));
        }
        if n > MAX_QUBITS {
            return Err(Error::TooManyQubits(n));
        }
        if let Some(v) = shifts.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("chemical shift {v} is not finite")));
        }
        let mut map = BTreeMap::new();
        for ((j, k), hz) in couplings {
            if j == k || j >= n || k >= n {
                return Err(Error::InvalidArgument(format!("invalid coupling pair ({j}, {k}) for {n} spins")));
            }
            if !hz.is_finite() {
                return Err(Error::InvalidArgument(format!("coupling {hz} is not finite")));
            }
            map.insert((j.min(k), j.max(k)), hz);
        }
        Ok(NmrHamiltonian { n, shifts, couplings: map })
    }

    /// Four-spin crotonic acid at 400 MHz.
    pub fn crotonic() -> Self {
        NmrHamiltonian::new(
            vec![6650.6, 1695.8, 4210.0, -8796.7],
            [
                ((0, 1), 72.6),
                ((1, 2), 69.8),
                ((0, 3), 7.1),
                ((1, 3), 1.6),
                ((0, 2), 1.3),
                ((2, 3), 41.6),
            ],
        )
        .expect("preset parameters are valid")
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            CROTONIC_PRESET => Ok(Self::crotonic()),
            _ => Err(Error::InvalidArgument(format!("unknown Hamiltonian preset '{name}'"))),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn shift(&self, j: usize) -> f64 {
        self.shifts[j]
    }

    pub fn coupling(&self, j: usize, k: usize) -> f64 {
        self.couplings.get(&(j.min(k), j.max(k))).copied().unwrap_or(0.0)
    }

    pub fn max_coupling(&self) -> f64 {
        self.couplings.values().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Parses `shift j hz` and `coupling j k hz` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut shifts: BTreeMap<usize, f64> = BTreeMap::new();
        let mut couplings = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let label = |s: &str| -> Result<usize> {
                match s.parse::<usize>() {
                    Ok(v) if v >= 1 => Ok(v - 1),
                    _ => Err(Error::parse(line_no, format!("bad qubit label '{s}'"))),
                }
            };
            let value = |s: &str| s.parse::<f64>().map_err(|_| Error::parse(line_no, format!("bad number '{s}'")));
            match fields.as_slice() {
                ["shift", j, hz] => {
                    if shifts.insert(label(j)?, value(hz)?).is_some() {
                        return Err(Error::parse(line_no, format!("duplicate shift for qubit {j}")));
                    }
                }
                ["coupling", j, k, hz] => couplings.push(((label(j)?, label(k)?), value(hz)?)),
                _ => return Err(Error::parse(line_no, format!("expected 'shift j hz' or 'coupling j k hz', got '{line}'"))),
            }
        }
        let n = shifts.keys().chain(couplings.iter().flat_map(|((j, k), _)| [j, k])).max().map_or(0, |m| m + 1);
        let shifts = (0..n).map(|j| shifts.get(&j).copied().unwrap_or(0.0)).collect();
        NmrHamiltonian::new(shifts, couplings)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Energy of computational basis state `i` in rad/s (`s_j = +1` for bit 0).
    pub fn energy(&self, i: usize) -> f64 {
        let s = |j: usize| if bit(i, j, self.n) == 0 { 1.0 } else { -1.0 };
        let zeeman: f64 = (0..self.n).map(|j| PI * self.shifts[j] * s(j)).sum();
        let coupling: f64 = self.couplings.iter().map(|(&(j, k), &hz)| PI / 2.0 * hz * s(j) * s(k)).sum();
        zeeman + coupling
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..1 << self.n).map(|i| self.energy(i)).collect()
    }
}

/// The Hamiltonian as a dense (diagonal, real) matrix in rad/s.
pub fn hamiltonian_matrix(h: &NmrHamiltonian) -> Array2<C64> {
    Array2::from_diag(&ndarray::Array1::from_iter(h.diagonal().into_iter().map(|e| C64::new(e, 0.0))))
}

/// `exp(−i H τ)`.
pub fn free_evolution(h: &NmrHamiltonian, tau: f64) -> Result<UnitaryMatrix> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("delay {tau} s must be finite and >= 0")));
    }
    Ok(diagonal_unitary(h.diagonal().into_iter().map(|e| -e * tau)))
}

fn diagonal_unitary(phases: impl Iterator<Item = f64>) -> UnitaryMatrix {
    let d = ndarray::Array1::from_iter(phases.map(|p| C64::from_polar(1.0, p)));
    let n = d.len().trailing_zeros() as usize;
    UnitaryMatrix::from_raw(n, Array2::from_diag(&d))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    PlusX,
    MinusX,
    PlusY,
    MinusY,
}

impl Axis {
    fn generator(self) -> (f64, Pauli) {
        match self {
            Axis::PlusX => (1.0, Pauli::X),
            Axis::MinusX => (-1.0, Pauli::X),
            Axis::PlusY => (1.0, Pauli::Y),
            Axis::MinusY => (-1.0, Pauli::Y),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::PlusX => "+x",
            Axis::MinusX => "-x",
            Axis::PlusY => "+y",
            Axis::MinusY => "-y",
        })
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "+x" | "x" => Ok(Axis::PlusX),
            "-x" => Ok(Axis::MinusX),
            "+y" | "y" => Ok(Axis::PlusY),
            "-y" => Ok(Axis::MinusY),
            _ => Err(Error::InvalidArgument(format!("unknown pulse axis '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    Delay(f64),
    Pulse { qubits: QubitSet, axis: Axis, angle: f64 },
}

/// Time-ordered delays and ideal pulses.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PulseSequence {
    events: Vec<Event>,
}

impl PulseSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn delay(mut self, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("delay {tau} s must be positive")));
        }
        self.events.push(Event::Delay(tau));
        Ok(self)
    }

    pub fn pulse(mut self, qubits: QubitSet, axis: Axis, angle: f64) -> Result<Self> {
        if qubits.is_empty() {
            return Err(Error::InvalidArgument("pulse needs at least one qubit".into()));
        }
        if !angle.is_finite() {
            return Err(Error::InvalidArgument(format!("pulse angle {angle} is not finite")));
        }
        self.events.push(Event::Pulse { qubits, axis, angle });
        Ok(self)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn total_duration(&self) -> f64 {
        self.events.iter().map(|e| if let Event::Delay(t) = e { *t } else { 0.0 }).sum()
    }

    /// Parses `delay seconds` and `pulse qubits axis angle_rad` lines, with
    /// qubits as 1-based labels (`3,4`).
    pub fn parse(text: &str) -> Result<Self> {
        let mut seq = PulseSequence::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let number = |s: &str| s.parse::<f64>().map_err(|_| Error::parse(line_no, format!("bad number '{s}'")));
            let at_line = |e: Error| Error::parse(line_no, e.to_string());
            seq = match fields.as_slice() {
                ["delay", t] => seq.delay(number(t)?).map_err(at_line)?,
                ["pulse", qs, axis, angle] => {
                    let qubits = QubitSet::parse_labels(qs).map_err(at_line)?;
                    let axis = axis.parse().map_err(at_line)?;
                    seq.pulse(qubits, axis, number(angle)?).map_err(at_line)?
                }
                _ => return Err(Error::parse(line_no, format!("expected 'delay s' or 'pulse qubits axis angle', got '{line}'"))),
            };
        }
        Ok(seq)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// `exp(−i(angle/2) Σ_{j∈qubits} σ_axis^(j))`.
pub fn pulse_unitary(n: usize, qubits: &QubitSet, axis: Axis, angle: f64) -> Result<UnitaryMatrix> {
    qubits.check_within(n)?;
    let (sign, p) = axis.generator();
    let half = sign * angle / 2.0;
    let local = crate::state::identity(2).mapv(|v| v * half.cos()) - p.matrix().mapv(|v| v * C64::new(0.0, half.sin()));
    let ops: Vec<(usize, &Array2<C64>)> = qubits.qubits().iter().map(|&q| (q, &local)).collect();
    Ok(UnitaryMatrix::from_raw(n, embed_local(n, &ops)?))
}

/// Propagator of `seq` under `h`, first event acting first, with the global
/// phase normalized.
pub fn compile_sequence(seq: &PulseSequence, h: &NmrHamiltonian) -> Result<UnitaryMatrix> {
    let n = h.n();
    let mut u = UnitaryMatrix::identity(n)?;
    for event in seq.events() {
        let step = match event {
            Event::Delay(tau) => free_evolution(h, *tau)?,
            Event::Pulse { qubits, axis, angle } => pulse_unitary(n, qubits, *axis, *angle)?,
        };
        u = step.then_after(&u)?;
    }
    Ok(u.normalize_phase())
}

/// Eight-segment time-suspension sequence on four spins: each segment is a
/// delay `tau` followed by a π pulse (plus `angle_error`) on
/// {3,4}, {2}, {3,4}, {1,4} about +x, then the same four about −x.
pub fn ie_sequence(tau: f64, angle_error: f64) -> Result<PulseSequence> {
    let sets: [&[usize]; 4] = [&[2, 3], &[1], &[2, 3], &[0, 3]];
    let mut seq = PulseSequence::new();
    for axis in [Axis::PlusX, Axis::MinusX] {
        for qs in sets {
            seq = seq.delay(tau)?.pulse(QubitSet::new(qs.iter().copied())?, axis, PI + angle_error)?;
        }
    }
    Ok(seq)
}

/// [`ie_sequence`] with the default segment length (total duration / 8).
pub fn ie_sequence_default(angle_error: f64) -> Result<PulseSequence> {
    ie_sequence(IE_TOTAL_DURATION / 8.0, angle_error)
}

/// `exp(−iβ σz^(a) σz^(b))` on an `n`-qubit register.
pub fn gate_c12(beta: f64, pair: (usize, usize), n: usize) -> Result<UnitaryMatrix> {
    let (a, b) = pair;
    if a == b || a >= n || b >= n || n > MAX_QUBITS {
        return Err(Error::InvalidArgument(format!("invalid qubit pair ({a}, {b}) for {n} qubits")));
    }
    Ok(diagonal_unitary((0..1usize << n).map(|i| {
        let s = if bit(i, a, n) == bit(i, b, n) { 1.0 } else { -1.0 };
        -beta * s
    })))
}

/// Controlled-NOT on an `n`-qubit register.
pub fn gate_cnot(control: usize, target: usize, n: usize) -> Result<UnitaryMatrix> {
    if control == target || control >= n || target >= n || n > MAX_QUBITS {
        return Err(Error::InvalidArgument(format!("invalid control/target ({control}, {target}) for {n} qubits")));
    }
    let d = 1usize << n;
    let mut m = Array2::zeros((d, d));
    for i in 0..d {
        let j = if bit(i, control, n) == 1 { i ^ (1 << (n - 1 - target)) } else { i };
        m[[j, i]] = C64::new(1.0, 0.0);
    }
    Ok(UnitaryMatrix::from_raw(n, m))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::pauli::{chi_diagonal, collective_coefficients, max_weight_coefficient, PauliString};
    use crate::state::{frobenius_norm, trace, QuantumChannel, DensityMatrix, EXACT_TOL, TOL};

    fn set(qs: &[usize]) -> QubitSet {
        QubitSet::new(qs.iter().copied()).unwrap()
    }

    fn close(a: &UnitaryMatrix, b: &UnitaryMatrix, tol: f64) -> bool {
        frobenius_norm(&(a.matrix() - b.matrix())) < tol
    }

    fn unitarity_error(u: &UnitaryMatrix) -> f64 {
        let p = crate::state::dagger(u.matrix()).dot(u.matrix());
        frobenius_norm(&(p - crate::state::identity(u.matrix().nrows())))
    }

    #[test]
    fn hamiltonian_examples() {
        let zero = NmrHamiltonian::new(vec![0.0; 3], []).unwrap();
        assert!(hamiltonian_matrix(&zero).iter().all(|v| v.norm() == 0.0));
        let one = NmrHamiltonian::new(vec![1.0], []).unwrap();
        assert_eq!(one.diagonal(), vec![PI, -PI]);
        let h = NmrHamiltonian::crotonic();
        let diag = h.diagonal();
        assert!(diag.iter().sum::<f64>().abs() < 1e-6);
        let m = hamiltonian_matrix(&h);
        for ((i, j), v) in m.indexed_iter() {
            assert_eq!(v.im, 0.0);
            if i != j {
                assert_eq!(v.re, 0.0);
            }
        }
    }

    #[test]
    fn crotonic_energies_match_bit_pattern_sum() {
        // independent oracle: read signs straight off the binary string
        let shifts = [6650.6, 1695.8, 4210.0, -8796.7];
        let j = [[0.0, 72.6, 1.3, 7.1], [72.6, 0.0, 69.8, 1.6], [1.3, 69.8, 0.0, 41.6], [7.1, 1.6, 41.6, 0.0]];
        let h = NmrHamiltonian::crotonic();
        for i in 0..16usize {
            let bits: Vec<char> = format!("{i:04b}").chars().collect();
            let s: Vec<f64> = bits.iter().map(|&c| if c == '0' { 1.0 } else { -1.0 }).collect();
            let mut e = 0.0;
            for a in 0..4 {
                e += 2.0 * PI * shifts[a] / 2.0 * s[a];
                for b in a + 1..4 {
                    e += PI * j[a][b] / 2.0 * s[a] * s[b];
                }
            }
            assert!((h.energy(i) - e).abs() < 1e-9 * e.abs().max(1.0), "state {i}");
        }
        let all_up = PI * shifts.iter().sum::<f64>() + PI / 2.0 * (72.6 + 69.8 + 7.1 + 1.6 + 1.3 + 41.6);
        assert!((h.energy(0) - all_up).abs() < 1e-9);
    }

    #[test]
    fn parse_hamiltonian() {
        let text = "# two spins\nshift 1 100.0\nshift 2 -50\ncoupling 1 2 10.5\n";
        let h = NmrHamiltonian::parse(text).unwrap();
        assert_eq!(h.n(), 2);
        assert_eq!(h.shift(1), -50.0);
        assert_eq!(h.coupling(1, 0), 10.5);
        assert!(NmrHamiltonian::parse("shift 0 1").is_err());
        assert!(NmrHamiltonian::parse("coupling 1 1 3").is_err());
        assert!(NmrHamiltonian::parse("shift 1 x").is_err());
        assert!(matches!(NmrHamiltonian::parse("bogus"), Err(Error::Parse { line: 1, .. })));
        assert_eq!(NmrHamiltonian::preset(CROTONIC_PRESET).unwrap(), NmrHamiltonian::crotonic());
    }

    #[test]
    fn free_evolution_examples() {
        let h = NmrHamiltonian::crotonic();
        assert!(close(&free_evolution(&h, 0.0).unwrap(), &UnitaryMatrix::identity(4).unwrap(), EXACT_TOL));
        let u = free_evolution(&h, 1.525e-3).unwrap();
        assert!(unitarity_error(&u) < EXACT_TOL);

        let coupled = NmrHamiltonian::new(vec![0.0, 0.0], [((0, 1), 40.0)]).unwrap();
        let u = free_evolution(&coupled, 1.0 / 160.0).unwrap();
        let expected = gate_c12(PI / 8.0, (0, 1), 2).unwrap();
        assert!(u.phase_overlap(&expected) > 1.0 - EXACT_TOL);
        assert!(close(&u, &expected, 1e-12));
    }

    #[test]
    fn sequence_parse_and_compile() {
        let text = "delay 0.001\npulse 1,2 +x 3.141592653589793\n# comment\ndelay 0.001\n";
        let seq = PulseSequence::parse(text).unwrap();
        assert_eq!(seq.events().len(), 3);
        assert!((seq.total_duration() - 0.002).abs() < 1e-15);
        assert!(PulseSequence::parse("delay -1").is_err());
        assert!(PulseSequence::parse("pulse 1 z 1.0").is_err());
        assert!(matches!(PulseSequence::parse("delay 1\nwait 2"), Err(Error::Parse { line: 2, .. })));

        let h = NmrHamiltonian::crotonic();
        let empty = compile_sequence(&PulseSequence::new(), &h).unwrap();
        assert!(close(&empty, &UnitaryMatrix::identity(4).unwrap(), EXACT_TOL));

        let delays = PulseSequence::new().delay(1e-3).unwrap().delay(2e-4).unwrap();
        let u = compile_sequence(&delays, &h).unwrap();
        for ((i, j), v) in u.matrix().indexed_iter() {
            if i != j {
                assert_eq!(v.norm(), 0.0);
            }
        }
    }

    #[test]
    fn pulses_are_ideal_rotations() {
        let x = pulse_unitary(1, &set(&[0]), Axis::PlusX, PI).unwrap();
        let minus_i_x = Pauli::X.matrix().mapv(|v| v * C64::new(0.0, -1.0));
        assert!(frobenius_norm(&(x.matrix() - &minus_i_x)) < EXACT_TOL);
        let mx = pulse_unitary(1, &set(&[0]), Axis::MinusX, PI).unwrap();
        assert!(close(&x.then_after(&mx).unwrap(), &UnitaryMatrix::identity(1).unwrap(), EXACT_TOL));
        let y = pulse_unitary(3, &set(&[0, 2]), Axis::PlusY, 0.7).unwrap();
        assert!(unitarity_error(&y) < EXACT_TOL);
    }

    /// Sign of σz^(j) in each delay interval, tracked by counting the π
    /// pulses on j that precede it.
    fn toggling_signs(seq: &PulseSequence, n: usize) -> Vec<Vec<i32>> {
        let mut flips = vec![0u32; n];
        let mut rows = Vec::new();
        for e in seq.events() {
            match e {
                Event::Delay(_) => rows.push(flips.iter().map(|f| if f % 2 == 0 { 1 } else { -1 }).collect()),
                Event::Pulse { qubits, .. } => qubits.qubits().iter().for_each(|&q| flips[q] += 1),
            }
        }
        rows
    }

    #[test]
    fn ie_toggling_frame_cancels_every_term() {
        let seq = ie_sequence_default(0.0).unwrap();
        let signs = toggling_signs(&seq, 4);
        assert_eq!(signs.len(), 8);
        for j in 0..4 {
            assert_eq!(signs.iter().map(|r| r[j]).sum::<i32>(), 0, "qubit {j}");
            for k in j + 1..4 {
                assert_eq!(signs.iter().map(|r| r[j] * r[k]).sum::<i32>(), 0, "pair {j},{k}");
            }
        }
        // the pulses themselves compose to the identity
        for q in 0..4 {
            let count: usize = seq
                .events()
                .iter()
                .filter(|e| matches!(e, Event::Pulse { qubits, .. } if qubits.contains(q)))
                .count();
            assert_eq!(count % 2, 0);
        }
    }

    #[test]
    fn ideal_ie_is_identity() {
        let h = NmrHamiltonian::crotonic();
        for tau in [1.525e-3, 1e-4, 3.3e-3] {
            let u = compile_sequence(&ie_sequence(tau, 0.0).unwrap(), &h).unwrap();
            assert!((trace(u.matrix()).norm() / 16.0 - 1.0).abs() < TOL);
            let col = collective_coefficients(&chi_diagonal(&QuantumChannel::unitary(&u)).unwrap());
            assert!(col.iter().all(|(_, v)| v < 1e-10));
        }
    }

    #[test]
    fn pulse_error_breaks_refocusing() {
        let h = NmrHamiltonian::crotonic();
        let mut last = 0.0;
        for eps in [0.01, 0.03, 0.05] {
            let u = compile_sequence(&ie_sequence_default(eps).unwrap(), &h).unwrap();
            let col = collective_coefficients(&chi_diagonal(&QuantumChannel::unitary(&u)).unwrap());
            let low = col.max_of_size(|s| s <= 2);
            assert!(low > last, "eps {eps}: {low} <= {last}");
            last = low;
        }
    }

    #[test]
    fn higher_weight_terms_stay_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let base = NmrHamiltonian::crotonic();
        for _ in 0..8 {
            // perturbed crotonic parameters and per-pulse angle errors
            let shifts = (0..4).map(|j| base.shift(j) * rng.random_range(0.9..1.1)).collect();
            let couplings: Vec<_> = (0..4)
                .flat_map(|j| (j + 1..4).map(move |k| (j, k)))
                .map(|(j, k)| ((j, k), base.coupling(j, k) * rng.random_range(0.9..1.1)))
                .collect();
            let h = NmrHamiltonian::new(shifts, couplings).unwrap();
            let tau = IE_TOTAL_DURATION / 8.0;
            assert!(h.max_coupling() * tau / (PI / 2.0) <= 0.14);
            let mut seq = PulseSequence::new();
            for e in ie_sequence(tau, 0.0).unwrap().events() {
                seq = match e {
                    Event::Delay(t) => seq.delay(*t).unwrap(),
                    Event::Pulse { qubits, axis, angle } => {
                        seq.pulse(qubits.clone(), *axis, angle + rng.random_range(-0.05..0.05)).unwrap()
                    }
                };
            }
            let chi = chi_diagonal(&QuantumChannel::unitary(&compile_sequence(&seq, &h).unwrap())).unwrap();
            let col = collective_coefficients(&chi);
            let low = col.max_of_size(|s| s <= 2);
            assert!(low > 0.0);
            assert!(max_weight_coefficient(&chi, 2) < 0.1 * low);
        }
    }

    #[test]
    fn c12_examples() {
        assert!(close(&gate_c12(0.0, (0, 1), 4).unwrap(), &UnitaryMatrix::identity(4).unwrap(), EXACT_TOL));
        let chi = chi_diagonal(&QuantumChannel::unitary(&gate_c12(0.1, (0, 1), 2).unwrap())).unwrap();
        assert!((chi.get(&"ZZ".parse::<PauliString>().unwrap()) - 0.1f64.sin().powi(2)).abs() < EXACT_TOL);
        assert!((chi.identity_value() - 0.1f64.cos().powi(2)).abs() < EXACT_TOL);
        assert!((collective_coefficients(&chi).get(&set(&[0, 1])) - 0.01).abs() <= 0.005);

        let step = gate_c12(0.1, (0, 1), 4).unwrap();
        let mut four = UnitaryMatrix::identity(4).unwrap();
        for _ in 0..4 {
            four = step.then_after(&four).unwrap();
        }
        assert!(close(&four, &gate_c12(0.4, (0, 1), 4).unwrap(), 1e-14));

        let ch = QuantumChannel::unitary(&gate_c12(0.7, (0, 1), 2).unwrap());
        let rho = DensityMatrix::basis(&[false, false]).unwrap();
        assert!(frobenius_norm(&(ch.apply(&rho).unwrap().matrix() - rho.matrix())) < EXACT_TOL);
        assert!(gate_c12(0.1, (1, 1), 2).is_err());
    }

    #[test]
    fn cnot_examples() {
        let u = gate_cnot(0, 1, 2).unwrap();
        let apply = |i: usize| -> usize { (0..4).find(|&j| u.matrix()[[j, i]].norm() > 0.5).unwrap() };
        assert_eq!(apply(0b00), 0b00);
        assert_eq!(apply(0b10), 0b11);
        assert_eq!(apply(0b11), 0b10);
        let chi = chi_diagonal(&QuantumChannel::unitary(&u)).unwrap();
        for s in ["II", "ZI", "IX", "ZX"] {
            assert!((chi.get(&s.parse().unwrap()) - 0.25).abs() < EXACT_TOL);
        }
        let sq = u.then_after(&u).unwrap();
        assert!(close(&sq, &UnitaryMatrix::identity(2).unwrap(), EXACT_TOL));
        let col = collective_coefficients(&chi_diagonal(&QuantumChannel::unitary(&sq)).unwrap());
        assert!(col.iter().all(|(_, v)| v.abs() < EXACT_TOL));
        assert!(gate_cnot(2, 2, 4).is_err());

        // control on the right-hand factor
        let rev = gate_cnot(3, 0, 4).unwrap();
        assert_eq!((0..16).find(|&j| rev.matrix()[[j, 0b0001]].norm() > 0.5), Some(0b1001));
    }
}
