//! Config-driven experiments: build a gate channel, measure every target
//! subset (exact twirl or sampled campaign), combine the decay rates into
//! collective coefficients and compare them with the χ-diagonal oracle.
//!
//! Configs are flat `key = value` text; see [`ExperimentConfig::set`] for the
//! keys. Qubit labels are 1-based everywhere in configs and reports.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::clifford::{build_pool, CliffordPool, PoolKind};
use crate::error::{Error, Result};
use crate::nmr::{self, NmrHamiltonian, CROTONIC_PRESET, IE_TOTAL_DURATION};
use crate::pauli::{chi_diagonal, collective_coefficients, CollectiveCoefficients};
use crate::protocol::{
    combine_subset, combined_std_error, gamma_error_bound, gamma_exact, gamma_predicted_pure, run_sampled_campaign,
    sample_size, ChannelSampling, CliffordSampling, ErrorBudget, GammaEstimate, SamplePlan, SamplingOptions,
};
use crate::state::{qubit_count, QuantumChannel, QubitSet, UnitaryMatrix, C64, EXACT_TOL, TOL};

/// The channel under test.
#[derive(Clone, Debug, PartialEq)]
pub enum GateSpec {
    Identity,
    /// Compiled time-suspension sequence on the configured Hamiltonian.
    IeSequence,
    C12(f64),
    Cnot,
    /// CNOT applied twice.
    Cnot2,
    /// Unitary read from a matrix file.
    Matrix(PathBuf),
    /// Unitary ensemble or Kraus list read from a channel file.
    Ensemble(PathBuf),
    /// Delay/pulse sequence file compiled on the configured Hamiltonian.
    Sequence(PathBuf),
}

impl fmt::Display for GateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateSpec::Identity => f.write_str("identity"),
            GateSpec::IeSequence => f.write_str("ie-sequence"),
            GateSpec::C12(b) => write!(f, "c12({b})"),
            GateSpec::Cnot => f.write_str("cnot"),
            GateSpec::Cnot2 => f.write_str("cnot2"),
            GateSpec::Matrix(p) => write!(f, "matrix:{}", p.display()),
            GateSpec::Ensemble(p) => write!(f, "ensemble:{}", p.display()),
            GateSpec::Sequence(p) => write!(f, "sequence:{}", p.display()),
        }
    }
}

impl FromStr for GateSpec {
    type Err = Error;

    /// `identity`, `ie-sequence`, `c12:β` or `c12(β)`, `cnot`, `cnot2`,
    /// `matrix:path`, `ensemble:path`, `sequence:path`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let angle = |t: &str| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|b| b.is_finite())
                .ok_or_else(|| Error::InvalidArgument(format!("bad c12 angle {t:?}")))
        };
        match s {
            "identity" => return Ok(GateSpec::Identity),
            "ie-sequence" => return Ok(GateSpec::IeSequence),
            "cnot" => return Ok(GateSpec::Cnot),
            "cnot2" => return Ok(GateSpec::Cnot2),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("c12:") {
            return Ok(GateSpec::C12(angle(rest)?));
        }
        if let Some(rest) = s.strip_prefix("c12(").and_then(|r| r.strip_suffix(')')) {
            return Ok(GateSpec::C12(angle(rest)?));
        }
        if let Some(p) = s.strip_prefix("matrix:").filter(|p| !p.is_empty()) {
            return Ok(GateSpec::Matrix(PathBuf::from(p)));
        }
        if let Some(p) = s.strip_prefix("ensemble:").filter(|p| !p.is_empty()) {
            return Ok(GateSpec::Ensemble(PathBuf::from(p)));
        }
        if let Some(p) = s.strip_prefix("sequence:").filter(|p| !p.is_empty()) {
            return Ok(GateSpec::Sequence(PathBuf::from(p)));
        }
        Err(Error::InvalidArgument(format!(
            "unknown gate {s:?} (expected identity, ie-sequence, c12:β, cnot, cnot2, matrix:path, ensemble:path or sequence:path)"
        )))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    #[default]
    Exact,
    Sampled,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Exact => "exact",
            Mode::Sampled => "sampled",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "exact" => Ok(Mode::Exact),
            "sampled" => Ok(Mode::Sampled),
            _ => Err(Error::InvalidArgument(format!("unknown mode {s:?} (expected exact or sampled)"))),
        }
    }
}

/// Where the Hamiltonian for `ie-sequence` comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum HamiltonianSource {
    Preset(String),
    File(PathBuf),
}

impl fmt::Display for HamiltonianSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HamiltonianSource::Preset(name) => f.write_str(name),
            HamiltonianSource::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub gate: GateSpec,
    /// Register size; inferred from the gate when unset.
    pub n: Option<usize>,
    /// Subsets to characterize; `None` means every pair.
    pub targets: Option<Vec<QubitSet>>,
    pub mode: Mode,
    pub pool: PoolKind,
    pub clifford_sampling: CliffordSampling,
    pub channel_sampling: ChannelSampling,
    pub realizations: Option<u64>,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub budget: ErrorBudget,
    pub out: Option<PathBuf>,
    pub c12_pair: (usize, usize),
    pub cnot: (usize, usize),
    pub hamiltonian: HamiltonianSource,
    /// Delay per segment of the time-suspension sequence, seconds.
    pub ie_tau: f64,
    /// Error added to every π pulse angle, radians.
    pub ie_angle_error: f64,
    /// Directory that relative data-file paths are read from.
    pub base_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            gate: GateSpec::Identity,
            n: None,
            targets: None,
            mode: Mode::Exact,
            pool: PoolKind::default(),
            clifford_sampling: CliffordSampling::Random,
            channel_sampling: ChannelSampling::DensityMatrix,
            realizations: None,
            delta: None,
            epsilon: None,
            seed: None,
            budget: ErrorBudget::default(),
            out: None,
            c12_pair: (0, 1),
            cnot: (0, 1),
            hamiltonian: HamiltonianSource::Preset(CROTONIC_PRESET.into()),
            ie_tau: IE_TOTAL_DURATION / 8.0,
            ie_angle_error: 0.0,
            base_dir: None,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad value {value:?} for {key}")))
}

fn parse_pair(key: &str, value: &str) -> Result<(usize, usize)> {
    let set = QubitSet::parse_labels(value)?;
    match set.qubits() {
        [a, b] => Ok((*a, *b)),
        _ => Err(Error::InvalidArgument(format!("{key} needs two distinct qubits, got {value:?}"))),
    }
}

fn parse_targets(value: &str) -> Result<Vec<QubitSet>> {
    let mut out = Vec::new();
    for tok in value.split(';').map(str::trim).filter(|t| !t.is_empty()) {
        let set = QubitSet::parse_labels(tok)?;
        if set.is_empty() {
            return Err(Error::InvalidSubset(format!("empty target {tok:?}")));
        }
        if out.contains(&set) {
            return Err(Error::InvalidSubset(format!("duplicate target {tok:?}")));
        }
        out.push(set);
    }
    Ok(out)
}

fn finite(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidArgument(format!("{key} must be finite")))
    }
}

impl ExperimentConfig {
    /// Sets one key. Keys: `gate`, `n`, `targets` (`1-2; 2-3`), `mode`,
    /// `pool`, `clifford_sampling` (random|cyclic), `channel_sampling`
    /// (density-matrix|per-shot-ensemble), `n_realizations`, `delta`,
    /// `epsilon`, `seed`, `eps0`, `eps1`, `out`, `c12_pair`, `cnot_control`,
    /// `cnot_target`, `hamiltonian` (preset name or `file:path`), `ie_tau`,
    /// `ie_angle_error`. Dashes in keys are read as underscores.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "gate" => self.gate = value.parse()?,
            "n" => self.n = Some(parse_num(&key, value)?),
            "targets" => self.targets = Some(parse_targets(value)?),
            "mode" => self.mode = value.parse()?,
            "pool" => self.pool = value.parse()?,
            "clifford_sampling" => {
                self.clifford_sampling = match value {
                    "random" => CliffordSampling::Random,
                    "cyclic" => CliffordSampling::Cyclic,
                    _ => return Err(Error::InvalidArgument(format!("bad clifford_sampling {value:?}"))),
                }
            }
            "channel_sampling" => {
                self.channel_sampling = match value {
                    "density-matrix" => ChannelSampling::DensityMatrix,
                    "per-shot-ensemble" => ChannelSampling::PerShotEnsemble,
                    _ => return Err(Error::InvalidArgument(format!("bad channel_sampling {value:?}"))),
                }
            }
            "n_realizations" => self.realizations = Some(parse_num(&key, value)?),
            "delta" => self.delta = Some(finite(&key, parse_num(&key, value)?)?),
            "epsilon" => self.epsilon = Some(finite(&key, parse_num(&key, value)?)?),
            "seed" => self.seed = Some(parse_num(&key, value)?),
            "eps0" => self.budget = ErrorBudget::new(parse_num(&key, value)?, self.budget.eps1)?,
            "eps1" => self.budget = ErrorBudget::new(self.budget.eps0, parse_num(&key, value)?)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "c12_pair" => self.c12_pair = parse_pair(&key, value)?,
            "cnot_control" => self.cnot.0 = QubitSet::parse_labels(value).and_then(single)?,
            "cnot_target" => self.cnot.1 = QubitSet::parse_labels(value).and_then(single)?,
            "hamiltonian" => {
                self.hamiltonian = match value.strip_prefix("file:") {
                    Some(p) => HamiltonianSource::File(PathBuf::from(p)),
                    None => HamiltonianSource::Preset(value.to_string()),
                }
            }
            "ie_tau" => self.ie_tau = finite(&key, parse_num(&key, value)?)?,
            "ie_angle_error" => self.ie_angle_error = finite(&key, parse_num(&key, value)?)?,
            _ => return Err(Error::InvalidArgument(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(idx + 1, format!("expected 'key = value', got {line:?}")))?;
            cfg.set(key, value).map_err(|e| Error::parse(idx + 1, e.to_string()))?;
        }
        Ok(cfg)
    }

    /// Reads a config file; relative data-file paths are resolved against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    fn data_path(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn hamiltonian(&self) -> Result<NmrHamiltonian> {
        match &self.hamiltonian {
            HamiltonianSource::Preset(name) => NmrHamiltonian::preset(name),
            HamiltonianSource::File(p) => NmrHamiltonian::from_file(&self.data_path(p)),
        }
    }

    /// Builds the channel under test and its register size.
    pub fn build_channel(&self) -> Result<QuantumChannel> {
        let need_n = |default: usize| self.n.unwrap_or(default);
        let ch = match &self.gate {
            GateSpec::Identity => QuantumChannel::identity(need_n(4))?,
            GateSpec::IeSequence => {
                let h = self.hamiltonian()?;
                let seq = nmr::ie_sequence(self.ie_tau, self.ie_angle_error)?;
                if h.n() != 4 {
                    return Err(Error::InvalidArgument(format!(
                        "ie-sequence needs a 4-spin Hamiltonian, got {} spins",
                        h.n()
                    )));
                }
                QuantumChannel::unitary(&nmr::compile_sequence(&seq, &h)?)
            }
            GateSpec::C12(beta) => QuantumChannel::unitary(&nmr::gate_c12(*beta, self.c12_pair, need_n(4))?),
            GateSpec::Cnot | GateSpec::Cnot2 => {
                let u = nmr::gate_cnot(self.cnot.0, self.cnot.1, need_n(4))?;
                let u = if self.gate == GateSpec::Cnot2 { u.then_after(&u)? } else { u };
                QuantumChannel::unitary(&u)
            }
            GateSpec::Matrix(p) => QuantumChannel::unitary(&read_unitary(&self.data_path(p))?),
            GateSpec::Ensemble(p) => read_channel(&self.data_path(p))?,
            GateSpec::Sequence(p) => {
                let seq = nmr::PulseSequence::from_file(&self.data_path(p))?;
                QuantumChannel::unitary(&nmr::compile_sequence(&seq, &self.hamiltonian()?)?)
            }
        };
        if let Some(n) = self.n {
            if n != ch.n() {
                return Err(Error::InvalidArgument(format!("config n = {n} but the gate acts on {} qubits", ch.n())));
            }
        }
        Ok(ch)
    }

    /// The sample plan for sampled mode: explicit `n_realizations` (checked
    /// against `⌈δ⁻²⌉` when δ is given) or derived from `delta`/`epsilon`.
    pub fn plan(&self) -> Result<Option<SamplePlan>> {
        if self.mode == Mode::Exact {
            return Ok(None);
        }
        let plan = match (self.realizations, self.delta) {
            (Some(n), Some(delta)) => {
                let min = sample_size(delta, self.epsilon.unwrap_or(0.05))?.bounds.map_or(1, |b| b.clt);
                if n < min {
                    return Err(Error::InvalidArgument(format!(
                        "n_realizations = {n} is below ⌈δ⁻²⌉ = {min} for δ = {delta}"
                    )));
                }
                SamplePlan::fixed(n)?
            }
            (Some(n), None) => SamplePlan::fixed(n)?,
            (None, Some(delta)) => {
                let eps = self
                    .epsilon
                    .ok_or_else(|| Error::InvalidArgument("sampled mode with delta also needs epsilon".into()))?;
                sample_size(delta, eps)?
            }
            (None, None) => {
                return Err(Error::InvalidArgument("sampled mode needs n_realizations or delta/epsilon".into()))
            }
        };
        Ok(Some(plan))
    }

    /// Target subsets for an `n`-qubit register.
    pub fn resolved_targets(&self, n: usize) -> Result<Vec<QubitSet>> {
        let targets = match &self.targets {
            Some(t) => t.clone(),
            None => (0..n)
                .flat_map(|a| (a + 1..n).map(move |b| QubitSet::new([a, b])))
                .collect::<Result<Vec<_>>>()?,
        };
        for t in &targets {
            t.check_within(n)?;
        }
        Ok(targets)
    }
}

fn single(set: QubitSet) -> Result<usize> {
    match set.qubits() {
        [q] => Ok(*q),
        _ => Err(Error::InvalidArgument(format!("expected one qubit label, got {{{set}}}"))),
    }
}

/// Reads matrix rows of whitespace-separated `re im` pairs from `lines`.
fn parse_matrix_rows(rows: &[(usize, &str)]) -> Result<Array2<C64>> {
    let d = rows.len();
    let mut m = Array2::zeros((d, d));
    for (i, (line_no, row)) in rows.iter().enumerate() {
        let nums = row
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| Error::parse(*line_no, format!("bad number {t:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        if nums.len() != 2 * d {
            return Err(Error::parse(*line_no, format!("expected {} numbers (re im pairs), got {}", 2 * d, nums.len())));
        }
        for j in 0..d {
            m[[i, j]] = C64::new(nums[2 * j], nums[2 * j + 1]);
        }
    }
    qubit_count(&m)?;
    Ok(m)
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Parses a unitary written as rows of `re im` pairs.
pub fn parse_unitary(text: &str) -> Result<UnitaryMatrix> {
    let rows: Vec<_> = content_lines(text).collect();
    UnitaryMatrix::new(parse_matrix_rows(&rows)?)
}

fn read_unitary(path: &Path) -> Result<UnitaryMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_unitary(&text)
}

/// Parses a channel file: a `kind unitary-ensemble|kraus` line, then for each
/// term a `term [weight]` line followed by its matrix rows.
pub fn parse_channel(text: &str) -> Result<QuantumChannel> {
    let mut kind = None;
    let mut terms: Vec<(f64, Vec<(usize, &str)>)> = Vec::new();
    for (line_no, line) in content_lines(text) {
        let mut words = line.split_whitespace();
        match words.next() {
            Some("kind") if kind.is_none() => {
                kind = Some(match words.next() {
                    Some("unitary-ensemble") => true,
                    Some("kraus") => false,
                    other => return Err(Error::parse(line_no, format!("unknown channel kind {other:?}"))),
                });
            }
            Some("term") => {
                let w = match words.next() {
                    Some(t) => t.parse::<f64>().map_err(|_| Error::parse(line_no, format!("bad weight {t:?}")))?,
                    None => 1.0,
                };
                terms.push((w, Vec::new()));
            }
            _ => match terms.last_mut() {
                Some((_, rows)) if kind.is_some() => rows.push((line_no, line)),
                _ => return Err(Error::parse(line_no, "expected 'kind ...' then 'term ...' before matrix rows")),
            },
        }
    }
    let unitary = kind.ok_or_else(|| Error::parse(1, "missing 'kind' line"))?;
    if terms.is_empty() {
        return Err(Error::InvalidChannel("channel file has no terms".into()));
    }
    if unitary {
        let terms = terms
            .iter()
            .map(|(w, rows)| Ok((*w, UnitaryMatrix::new(parse_matrix_rows(rows)?)?)))
            .collect::<Result<Vec<_>>>()?;
        QuantumChannel::unitary_ensemble(terms)
    } else {
        if let Some((w, _)) = terms.iter().find(|(w, _)| *w != 1.0) {
            return Err(Error::InvalidChannel(format!("Kraus terms take no weight (got {w})")));
        }
        let ops = terms.iter().map(|(_, rows)| parse_matrix_rows(rows)).collect::<Result<Vec<_>>>()?;
        QuantumChannel::kraus(ops)
    }
}

fn read_channel(path: &Path) -> Result<QuantumChannel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_channel(&text)
}

/// Results for one target subset.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetResult {
    pub subset: QubitSet,
    /// Decay rates for every nonempty sub-subset, by size then label.
    pub gammas: Vec<GammaEstimate>,
    /// χ-diagonal prediction of each entry of `gammas`.
    pub predicted: Vec<f64>,
    /// Systematic bound on each entry of `gammas` from the error budget.
    pub gamma_bounds: Vec<f64>,
    pub eta_col: f64,
    pub eta_stderr: f64,
    pub eta_systematic: f64,
    /// Collective coefficient of exactly this subset.
    pub oracle: f64,
    /// Collective coefficients of strict supersets, which the combination
    /// also picks up.
    pub tail: f64,
    pub discrepancy: f64,
}

impl SubsetResult {
    pub fn gamma(&self) -> &GammaEstimate {
        self.gammas.last().expect("at least one sub-subset")
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub config: ExperimentConfig,
    pub n: usize,
    pub plan: Option<SamplePlan>,
    pub results: Vec<SubsetResult>,
}

/// Per-target seed for sampled campaigns, so targets draw independent streams.
fn target_seed(seed: u64, target: &QubitSet) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(target.mask() as u64 + 1);
    rng.random()
}

fn assemble(
    subset: &QubitSet,
    estimates: &BTreeMap<QubitSet, GammaEstimate>,
    col: &CollectiveCoefficients,
    predicted_all: &BTreeMap<QubitSet, f64>,
    budget: &ErrorBudget,
) -> Result<SubsetResult> {
    let subs = subset.nonempty_subsets();
    let gammas: Vec<GammaEstimate> = subs.iter().map(|s| estimates[s].clone()).collect();
    let values: BTreeMap<QubitSet, f64> = gammas.iter().map(|g| (g.subset.clone(), g.value)).collect();
    let eta_col = combine_subset(&values, subset)?;
    let m = subset.len();
    let gamma_bounds: Vec<f64> = gammas.iter().map(|g| gamma_error_bound(budget, g.value)).collect();
    let oracle = col.get(subset);
    let tail = col.tail(subset);
    Ok(SubsetResult {
        subset: subset.clone(),
        predicted: subs.iter().map(|s| predicted_all[s]).collect(),
        eta_stderr: combined_std_error(gammas.iter().map(|g| g.std_error), m),
        eta_systematic: combined_std_error(gamma_bounds.iter().copied(), m),
        gamma_bounds,
        gammas,
        eta_col,
        oracle,
        tail,
        discrepancy: eta_col - oracle,
    })
}

/// Runs the configured experiment. Exact mode fails with
/// [`Error::Invariant`] if any decay rate disagrees with its χ prediction or
/// any combined coefficient differs from oracle + tail by more than 1e-9.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    let ch = config.build_channel()?;
    let n = ch.n();
    let targets = config.resolved_targets(n)?;
    let plan = config.plan()?;
    let seed = match config.mode {
        Mode::Sampled => Some(config.seed.ok_or_else(|| Error::InvalidArgument("sampled mode needs a seed".into()))?),
        Mode::Exact => None,
    };
    let pool: CliffordPool = build_pool(config.pool)?;
    let chi = chi_diagonal(&ch)?;
    let col = collective_coefficients(&chi);

    let mut needed: Vec<QubitSet> = targets.iter().flat_map(|t| t.nonempty_subsets()).collect();
    needed.sort();
    needed.dedup();
    let predicted_all: BTreeMap<QubitSet, f64> = needed
        .iter()
        .map(|s| Ok((s.clone(), gamma_predicted_pure(&chi, s)?)))
        .collect::<Result<_>>()?;

    let mut results = Vec::with_capacity(targets.len());
    match (config.mode, plan.as_ref()) {
        (Mode::Exact, _) => {
            let exact: BTreeMap<QubitSet, GammaEstimate> = needed
                .par_iter()
                .map(|s| Ok((s.clone(), gamma_exact(&ch, s, &pool)?)))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .collect();
            for (s, g) in &exact {
                if (g.value - predicted_all[s]).abs() >= TOL {
                    return Err(Error::Invariant(format!(
                        "γ^({s}) = {} from the twirl but {} from the χ diagonal",
                        g.value, predicted_all[s]
                    )));
                }
            }
            for t in &targets {
                let r = assemble(t, &exact, &col, &predicted_all, &config.budget)?;
                if (r.discrepancy - r.tail).abs() >= TOL {
                    return Err(Error::Invariant(format!(
                        "combined coefficient for {{{t}}} is {} but oracle + tail is {}",
                        r.eta_col,
                        r.oracle + r.tail
                    )));
                }
                results.push(r);
            }
        }
        (Mode::Sampled, Some(plan)) => {
            let seed = seed.expect("checked above");
            let opts = SamplingOptions { clifford: config.clifford_sampling, channel: config.channel_sampling };
            let campaigns = targets
                .par_iter()
                .map(|t| run_sampled_campaign(&ch, t, plan, &pool, target_seed(seed, t), opts))
                .collect::<Result<Vec<_>>>()?;
            for (t, c) in targets.iter().zip(&campaigns) {
                results.push(assemble(t, &c.estimates, &col, &predicted_all, &config.budget)?);
            }
        }
        (Mode::Sampled, None) => unreachable!("sampled mode always has a plan"),
    }
    Ok(Report { config: config.clone(), n, plan, results })
}

/// Numbers rounded to 12 significant digits, plain notation for moderate
/// magnitudes and exponent notation otherwise. Magnitudes below the
/// exact-arithmetic tolerance (1e-12) print as `0`.
pub fn format_number(v: f64) -> String {
    if v.abs() < EXACT_TOL {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    if (1e-4..1e6).contains(&rounded.abs()) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

impl Report {
    /// Key-value text: a `[metadata]` block, then one `[subset …]` record
    /// per target.
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        let mut s = String::from("# corrtwirl report\n[metadata]\n");
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("gate", c.gate.to_string());
        kv("n", self.n.to_string());
        kv("mode", c.mode.to_string());
        kv("pool", c.pool.to_string());
        kv(
            "targets",
            self.results.iter().map(|r| r.subset.label("-")).collect::<Vec<_>>().join(";"),
        );
        match c.gate {
            GateSpec::C12(_) => kv("c12_pair", format!("{}-{}", c.c12_pair.0 + 1, c.c12_pair.1 + 1)),
            GateSpec::Cnot | GateSpec::Cnot2 => {
                kv("cnot_control", (c.cnot.0 + 1).to_string());
                kv("cnot_target", (c.cnot.1 + 1).to_string());
            }
            GateSpec::Sequence(_) => kv("hamiltonian", c.hamiltonian.to_string()),
            GateSpec::IeSequence => {
                kv("hamiltonian", c.hamiltonian.to_string());
                kv("ie_tau", format_number(c.ie_tau));
                kv("ie_angle_error", format_number(c.ie_angle_error));
            }
            _ => {}
        }
        kv("seed", opt(c.seed.filter(|_| c.mode == Mode::Sampled).map(|v| v.to_string())));
        if let Some(plan) = &self.plan {
            kv("n_realizations", plan.realizations.to_string());
            kv("clifford_sampling", format!("{:?}", c.clifford_sampling).to_lowercase());
            kv(
                "channel_sampling",
                match c.channel_sampling {
                    ChannelSampling::DensityMatrix => "density-matrix",
                    ChannelSampling::PerShotEnsemble => "per-shot-ensemble",
                }
                .into(),
            );
            if let Some(b) = plan.bounds {
                kv("delta", format_number(b.delta));
                kv("epsilon", format_number(b.epsilon));
                kv("chernoff_bound", b.chernoff.to_string());
                kv("clt_bound", b.clt.to_string());
                kv("dominant_bound", b.dominant.to_string());
            }
        }
        kv("eps0", format_number(c.budget.eps0));
        kv("eps1", format_number(c.budget.eps1));
        for r in &self.results {
            writeln!(s, "\n[subset {}]", r.subset.label("-")).unwrap();
            for ((g, p), b) in r.gammas.iter().zip(&r.predicted).zip(&r.gamma_bounds) {
                let l = g.subset.label("-");
                writeln!(s, "gamma.{l} = {}", format_number(g.value)).unwrap();
                writeln!(s, "stderr.{l} = {}", format_number(g.std_error)).unwrap();
                writeln!(s, "predicted.{l} = {}", format_number(*p)).unwrap();
                writeln!(s, "bound.{l} = {}", format_number(*b)).unwrap();
            }
            writeln!(s, "eta_col = {}", format_number(r.eta_col)).unwrap();
            writeln!(s, "eta_stderr = {}", format_number(r.eta_stderr)).unwrap();
            writeln!(s, "eta_systematic = {}", format_number(r.eta_systematic)).unwrap();
            writeln!(s, "oracle = {}", format_number(r.oracle)).unwrap();
            writeln!(s, "tail = {}", format_number(r.tail)).unwrap();
            writeln!(s, "discrepancy = {}", format_number(r.discrepancy)).unwrap();
        }
        s
    }

    /// `gate,subset,gamma,stderr,eta_col,eta_stderr,oracle,discrepancy`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("gate,subset,gamma,stderr,eta_col,eta_stderr,oracle,discrepancy\n");
        let gate = self.config.gate.to_string().replace(',', ";");
        for r in &self.results {
            let g = r.gamma();
            writeln!(
                s,
                "{gate},{},{},{},{},{},{},{}",
                r.subset.label("-"),
                format_number(g.value),
                format_number(g.std_error),
                format_number(r.eta_col),
                format_number(r.eta_stderr),
                format_number(r.oracle),
                format_number(r.discrepancy)
            )
            .unwrap();
        }
        s
    }

    /// Writes `<prefix>.report` and `<prefix>.csv`; returns both paths.
    pub fn write(&self, prefix: &Path) -> Result<(PathBuf, PathBuf)> {
        let with_ext = |ext: &str| {
            let mut p = prefix.as_os_str().to_owned();
            p.push(ext);
            PathBuf::from(p)
        };
        let (report, table) = (with_ext(".report"), with_ext(".csv"));
        std::fs::write(&report, self.to_text()).map_err(|e| Error::io(&report, e))?;
        std::fs::write(&table, self.to_csv()).map_err(|e| Error::io(&table, e))?;
        Ok((report, table))
    }
}
