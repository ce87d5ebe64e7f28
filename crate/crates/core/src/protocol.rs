//! Fidelity-decay measurement and its combination into collective
//! coefficients.
//!
//! For a measured subset `M` prepared in `|0⟩` (other qubits maximally mixed)
//! the decay rate is `γ^(M) = 1 − Tr[(|0…0⟩⟨0…0|_M) ρ1]` with `ρ1` the
//! Clifford-twirled output. The same quantity is predicted from the χ diagonal
//! by `γ^(M) = Σ_l χ_l (Π_{j∈M} P_j − Π_{j∈M} C_j(l))`, where `P_j` is the
//! initial purity of qubit `j` and `C_j(l)` is `(2/3)(1 − P_j/2)` when `l`
//! acts on `j` and `P_j` otherwise.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::clifford::{twirl_exact, twirl_term, CliffordPool};
use crate::error::{Error, Result};
use crate::pauli::ChiDiagonal;
use crate::state::{DensityMatrix, Mat, QuantumChannel, QubitSet, ChannelKind, TOL};

/// A decay-rate estimate for one measured subset. `realizations == 0` marks
/// an exact (twirl-simulated) value.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaEstimate {
    pub subset: QubitSet,
    pub value: f64,
    pub std_error: f64,
    pub realizations: u64,
}

impl GammaEstimate {
    pub fn exact(subset: QubitSet, value: f64) -> Self {
        GammaEstimate { subset, value, std_error: 0.0, realizations: 0 }
    }

    pub fn is_exact(&self) -> bool {
        self.realizations == 0
    }
}

/// Exact decay rate from a full twirl of the protocol's initial state.
pub fn gamma_exact(ch: &QuantumChannel, measured: &QubitSet, pool: &CliffordPool) -> Result<GammaEstimate> {
    let rho0 = DensityMatrix::protocol_initial(ch.n(), measured)?;
    let rho1 = twirl_exact(ch, measured, &rho0, pool)?;
    Ok(GammaEstimate::exact(measured.clone(), 1.0 - rho1.projection_probability(measured)?))
}

/// Decay rate predicted from the χ diagonal; `purity(j)` gives `P_j` for each
/// measured qubit.
pub fn gamma_predicted(chi: &ChiDiagonal, purity: impl Fn(usize) -> f64, measured: &QubitSet) -> Result<f64> {
    measured.check_within(chi.n())?;
    let purities: Vec<f64> = measured.qubits().iter().map(|&q| purity(q)).collect();
    if let Some(p) = purities.iter().find(|p| !(0.5 - TOL..=1.0 + TOL).contains(*p)) {
        return Err(Error::InvalidArgument(format!("purity {p} outside [1/2, 1]")));
    }
    let all_pure: f64 = purities.iter().product();
    let mut gamma = 0.0;
    for (s, v) in chi.iter().skip(1) {
        if v == 0.0 {
            continue;
        }
        let letters = s.letters();
        let overlap: f64 = measured
            .qubits()
            .iter()
            .zip(&purities)
            .map(|(&q, &p)| if letters[q] == crate::pauli::Pauli::I { p } else { 2.0 / 3.0 * (1.0 - p / 2.0) })
            .product();
        gamma += v * (all_pure - overlap);
    }
    Ok(gamma)
}

/// [`gamma_predicted`] with every measured qubit pure.
pub fn gamma_predicted_pure(chi: &ChiDiagonal, measured: &QubitSet) -> Result<f64> {
    gamma_predicted(chi, |_| 1.0, measured)
}

/// `(9/4)(γa + γb − γab)`: the pair coefficient plus its higher-weight tail.
pub fn combine_pair(a: &GammaEstimate, b: &GammaEstimate, ab: &GammaEstimate) -> f64 {
    2.25 * (a.value + b.value - ab.value)
}

/// Inclusion–exclusion over every nonempty `S ⊆ M`:
/// `(3/2)^{|M|} Σ_S (−1)^{|S|+1} γ^(S)`, which equals the sum of collective
/// coefficients over all supersets of `M` (pure preparation).
pub fn combine_subset(gammas: &BTreeMap<QubitSet, f64>, measured: &QubitSet) -> Result<f64> {
    if measured.is_empty() {
        return Err(Error::InvalidSubset("empty subset".into()));
    }
    let mut acc = 0.0;
    for s in measured.nonempty_subsets() {
        let g = gammas
            .get(&s)
            .ok_or_else(|| Error::InvalidArgument(format!("missing decay rate for subset {{{s}}}")))?;
        let sign = if s.len() % 2 == 1 { 1.0 } else { -1.0 };
        acc += sign * g;
    }
    Ok(1.5f64.powi(measured.len() as i32) * acc)
}

/// Standard error of [`combine_subset`] from independent sub-subset errors:
/// `(3/2)^{|M|} √Σ σ_S²` (the pair case is `(9/4)√(σa²+σb²+σab²)`).
pub fn combined_std_error(sigmas: impl IntoIterator<Item = f64>, m: usize) -> f64 {
    1.5f64.powi(m as i32) * sigmas.into_iter().map(|s| s * s).sum::<f64>().sqrt()
}

pub fn eta_error_pair(sigma_a: f64, sigma_b: f64, sigma_ab: f64) -> f64 {
    combined_std_error([sigma_a, sigma_b, sigma_ab], 2)
}

/// Preparation (`eps0`) and Clifford-gate (`eps1`) implementation errors.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorBudget {
    pub eps0: f64,
    pub eps1: f64,
}

impl ErrorBudget {
    pub fn new(eps0: f64, eps1: f64) -> Result<Self> {
        if !(eps0.is_finite() && eps1.is_finite() && eps0 >= 0.0 && eps1 >= 0.0) {
            return Err(Error::InvalidArgument(format!("error budget ({eps0}, {eps1}) must be finite and >= 0")));
        }
        Ok(ErrorBudget { eps0, eps1 })
    }
}

/// `√(ε0²(1 + 4γ) + ε1²)`.
pub fn gamma_error_bound(budget: &ErrorBudget, gamma: f64) -> f64 {
    (budget.eps0 * budget.eps0 * (1.0 + 4.0 * gamma) + budget.eps1 * budget.eps1).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DominantBound {
    Chernoff,
    CentralLimit,
    Tie,
}

impl fmt::Display for DominantBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DominantBound::Chernoff => "chernoff",
            DominantBound::CentralLimit => "clt",
            DominantBound::Tie => "tie",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanBounds {
    pub delta: f64,
    pub epsilon: f64,
    pub chernoff: u64,
    pub clt: u64,
    pub dominant: DominantBound,
}

/// Number of realizations for a sampled campaign, with the precision target
/// it was derived from when there is one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplePlan {
    pub realizations: u64,
    pub bounds: Option<PlanBounds>,
}

impl SamplePlan {
    pub fn fixed(realizations: u64) -> Result<Self> {
        if realizations == 0 {
            return Err(Error::InvalidArgument("number of realizations must be positive".into()));
        }
        Ok(SamplePlan { realizations, bounds: None })
    }
}

fn ceil_count(x: f64) -> u64 {
    // shave rounding noise so exact integers are not bumped up by one
    (x * (1.0 - 1e-12)).ceil() as u64
}

/// `N = max(⌈ln(2/ε)/(2δ²)⌉, ⌈δ⁻²⌉)`.
pub fn sample_size(delta: f64, epsilon: f64) -> Result<SamplePlan> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("precision δ={delta} must lie in (0,1)")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("failure probability ε={epsilon} must lie in (0,1)")));
    }
    let chernoff = ceil_count((2.0 / epsilon).ln() / (2.0 * delta * delta));
    let clt = ceil_count(1.0 / (delta * delta));
    let dominant = match chernoff.cmp(&clt) {
        std::cmp::Ordering::Greater => DominantBound::Chernoff,
        std::cmp::Ordering::Less => DominantBound::CentralLimit,
        std::cmp::Ordering::Equal => DominantBound::Tie,
    };
    Ok(SamplePlan {
        realizations: chernoff.max(clt),
        bounds: Some(PlanBounds { delta, epsilon, chernoff, clt, dominant }),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExperimentCount {
    /// `N · C(n, w)`.
    pub protocol: u128,
    /// `N · 2^{4n}` for full process tomography.
    pub tomography: u128,
}

fn binomial(n: u128, k: u128) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

pub fn experiment_count(n: usize, w: usize, realizations: u64) -> Result<ExperimentCount> {
    if w == 0 || w > n {
        return Err(Error::InvalidArgument(format!("weight cut-off w={w} must satisfy 1 <= w <= n={n}")));
    }
    let overflow = || Error::Overflow(format!("experiment count for n={n}, w={w}, N={realizations}"));
    let protocol = binomial(n as u128, w as u128)
        .and_then(|c| c.checked_mul(realizations as u128))
        .ok_or_else(overflow)?;
    let tomography = 1u128
        .checked_shl(4 * n as u32)
        .filter(|_| 4 * n < 128)
        .and_then(|d| d.checked_mul(realizations as u128))
        .ok_or_else(overflow)?;
    Ok(ExperimentCount { protocol, tomography })
}

/// How Clifford assignments are chosen per realization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CliffordSampling {
    /// Uniform independent draw from `pool^m`.
    #[default]
    Random,
    /// Realization `i` uses assignment `i mod K^m`.
    Cyclic,
}

/// How the channel acts within one realization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ChannelSampling {
    /// Exact density-matrix evolution.
    #[default]
    DensityMatrix,
    /// Draw one unitary of the ensemble per shot (unitary ensembles only).
    PerShotEnsemble,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SamplingOptions {
    pub clifford: CliffordSampling,
    pub channel: ChannelSampling,
}

/// Per-subset estimates from one sampled campaign on `measured`.
#[derive(Clone, Debug)]
pub struct Campaign {
    pub measured: QubitSet,
    pub realizations: u64,
    pub estimates: BTreeMap<QubitSet, GammaEstimate>,
    /// Realizations in which every qubit of the sub-subset read 0.
    pub zero_counts: BTreeMap<QubitSet, u64>,
}

/// Precomputed outcome tables above this many configurations are skipped.
const TABLE_LIMIT: u128 = 1 << 16;

struct Sampler<'a> {
    ch: &'a QuantumChannel,
    measured: &'a QubitSet,
    complement: QubitSet,
    pool: &'a CliffordPool,
    options: SamplingOptions,
    assignments: u128,
    table: Option<Vec<Vec<f64>>>,
    cumulative_weights: Vec<f64>,
}

impl<'a> Sampler<'a> {
    fn term_count(&self) -> usize {
        match self.options.channel {
            ChannelSampling::DensityMatrix => 1,
            ChannelSampling::PerShotEnsemble => self.ch.terms().len(),
        }
    }

    fn configuration_count(&self) -> u128 {
        self.assignments * (1u128 << self.complement.len()) * self.term_count() as u128
    }

    /// Outcome distribution over `measured` for one configuration.
    fn distribution(&self, assignment: u128, flips: u32, term: usize) -> Result<Vec<f64>> {
        let n = self.ch.n();
        let mut bits = vec![false; n];
        for (pos, &q) in self.complement.qubits().iter().enumerate() {
            bits[q] = flips >> pos & 1 == 1;
        }
        let rho0 = DensityMatrix::basis(&bits)?;
        let c = self.pool.assignment(self.measured.len(), assignment).operator(n, self.measured)?;
        let out: Mat = match self.options.channel {
            ChannelSampling::DensityMatrix => twirl_term(self.ch, rho0.matrix(), &c),
            ChannelSampling::PerShotEnsemble => {
                let (_, u) = &self.ch.terms()[term];
                let single = QuantumChannel::kraus_unnormalized(vec![u.clone()])?;
                twirl_term(&single, rho0.matrix(), &c)
            }
        };
        Ok(DensityMatrix::from_raw(n, out).outcome_distribution(self.measured))
    }

    fn table_index(&self, assignment: u128, flips: u32, term: usize) -> usize {
        ((assignment as usize * (1 << self.complement.len()) + flips as usize) * self.term_count()) + term
    }

    fn build_table(&mut self) -> Result<()> {
        let total = self.configuration_count();
        if total > TABLE_LIMIT {
            return Ok(());
        }
        let terms = self.term_count();
        let flips = 1u32 << self.complement.len();
        let this = &*self;
        let table = (0..total as usize)
            .into_par_iter()
            .map(|idx| {
                let term = idx % terms;
                let rest = idx / terms;
                this.distribution((rest / flips as usize) as u128, (rest % flips as usize) as u32, term)
            })
            .collect::<Result<Vec<_>>>()?;
        self.table = Some(table);
        Ok(())
    }

    /// One realization: returns the outcome bit-vector over `measured`
    /// (bit `i` set when `measured[i]` read 1).
    fn realize(&self, seed: u64, index: u64) -> Result<u32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let m = self.measured.len();
        let mut flips = 0u32;
        for pos in 0..self.complement.len() {
            if rng.random::<bool>() {
                flips |= 1 << pos;
            }
        }
        let k = self.pool.len() as u128;
        let assignment = match self.options.clifford {
            CliffordSampling::Random => (0..m).fold(0u128, |acc, _| acc * k + rng.random_range(0..self.pool.len()) as u128),
            CliffordSampling::Cyclic => index as u128 % self.assignments,
        };
        let term = match self.options.channel {
            ChannelSampling::DensityMatrix => 0,
            ChannelSampling::PerShotEnsemble => {
                let u: f64 = rng.random();
                self.cumulative_weights.iter().position(|&c| u < c).unwrap_or(self.cumulative_weights.len() - 1)
            }
        };
        let computed;
        let dist: &[f64] = match &self.table {
            Some(t) => &t[self.table_index(assignment, flips, term)],
            None => {
                computed = self.distribution(assignment, flips, term)?;
                &computed
            }
        };
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (o, p) in dist.iter().enumerate() {
            acc += p;
            if u < acc {
                return Ok(o as u32);
            }
        }
        // rounding left u above the cumulative total: take the last populated outcome
        Ok(dist.iter().rposition(|&p| p > 0.0).unwrap_or(0) as u32)
    }
}

/// Runs `N` independent realizations of prepare → twirl → channel → untwirl →
/// measure on `measured`, and tallies the all-zeros event of every nonempty
/// sub-subset from the same outcome bit-vectors.
///
/// Realization `i` draws from its own ChaCha stream `i` of `seed`, and counts
/// are integer sums, so the result is independent of thread scheduling.
pub fn run_sampled_campaign(
    ch: &QuantumChannel,
    measured: &QubitSet,
    plan: &SamplePlan,
    pool: &CliffordPool,
    seed: u64,
    options: SamplingOptions,
) -> Result<Campaign> {
    let n = ch.n();
    measured.check_within(n)?;
    if measured.is_empty() {
        return Err(Error::InvalidSubset("empty measured subset".into()));
    }
    if plan.realizations == 0 {
        return Err(Error::InvalidArgument("number of realizations must be positive".into()));
    }
    if options.channel == ChannelSampling::PerShotEnsemble && ch.kind() != ChannelKind::UnitaryEnsemble {
        return Err(Error::InvalidArgument("per-shot-ensemble sampling needs a unitary-ensemble channel".into()));
    }
    let m = measured.len();
    let mut cumulative_weights = Vec::with_capacity(ch.terms().len());
    let mut acc = 0.0;
    for (w, _) in ch.terms() {
        acc += w;
        cumulative_weights.push(acc);
    }
    let mut sampler = Sampler {
        ch,
        measured,
        complement: measured.complement(n),
        pool,
        options,
        assignments: pool.assignment_count(m),
        table: None,
        cumulative_weights,
    };
    sampler.build_table()?;

    let masks = 1usize << m;
    let counts = (0..plan.realizations)
        .into_par_iter()
        .map(|i| sampler.realize(seed, i))
        .try_fold(
            || vec![0u64; masks],
            |mut counts, outcome| {
                let o = outcome? as usize;
                for (s, c) in counts.iter_mut().enumerate().skip(1) {
                    if o & s == 0 {
                        *c += 1;
                    }
                }
                Ok::<_, Error>(counts)
            },
        )
        .try_reduce(
            || vec![0u64; masks],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;

    let n_real = plan.realizations;
    let mut estimates = BTreeMap::new();
    let mut zero_counts = BTreeMap::new();
    for (s, &zeros) in counts.iter().enumerate().skip(1) {
        let subset = QubitSet::new((0..m).filter(|pos| s >> pos & 1 == 1).map(|pos| measured.qubits()[pos]))?;
        let p = zeros as f64 / n_real as f64;
        estimates.insert(
            subset.clone(),
            GammaEstimate {
                subset: subset.clone(),
                value: 1.0 - p,
                std_error: (p * (1.0 - p) / n_real as f64).sqrt(),
                realizations: n_real,
            },
        );
        zero_counts.insert(subset, zeros);
    }
    Ok(Campaign { measured: measured.clone(), realizations: n_real, estimates, zero_counts })
}

/// Sampled estimate of `γ^(M)` for the full measured subset.
pub fn run_sampled_protocol(
    ch: &QuantumChannel,
    measured: &QubitSet,
    plan: &SamplePlan,
    pool: &CliffordPool,
    seed: u64,
    options: SamplingOptions,
) -> Result<GammaEstimate> {
    let mut campaign = run_sampled_campaign(ch, measured, plan, pool, seed, options)?;
    Ok(campaign.estimates.remove(measured).expect("full subset is always tallied"))
}
