//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints one PASS/FAIL line; the process fails if any criterion
//! does.

use std::time::{Duration, Instant};

use corrtwirl::clifford::{build_pool, pool_equivalence_check, PoolKind};
use corrtwirl::experiment::{run_experiment, ExperimentConfig};
use corrtwirl::nmr::{compile_sequence, ie_sequence_default, NmrHamiltonian};
use corrtwirl::pauli::{chi_diagonal, collective_coefficients, max_weight_coefficient};
use corrtwirl::protocol::{
    combine_pair, combine_subset, gamma_exact, gamma_predicted_pure, run_sampled_protocol, sample_size,
    GammaEstimate, SamplePlan,
};
use corrtwirl::state::{random, tensor, QubitSet, UnitaryMatrix};
use corrtwirl::{DensityMatrix, QuantumChannel};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn set(qs: &[usize]) -> QubitSet {
    QubitSet::new(qs.iter().copied()).unwrap()
}

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text).unwrap()
}

fn pool() -> corrtwirl::CliffordPool {
    build_pool(PoolKind::default()).unwrap()
}

/// `exp(−iθ Z⊗…⊗Z)` on `qubits` of an `n`-qubit register.
fn z_string_phase(n: usize, qubits: &[usize], theta: f64) -> UnitaryMatrix {
    let d = 1usize << n;
    let mut m = Array2::zeros((d, d));
    for i in 0..d {
        let parity: usize = qubits.iter().map(|&q| (i >> (n - 1 - q)) & 1).sum();
        let phase = if parity.is_multiple_of(2) { -theta } else { theta };
        m[[i, i]] = corrtwirl::C64::from_polar(1.0, phase);
    }
    UnitaryMatrix::new(m).unwrap()
}

fn two_qubit_cnot() -> QuantumChannel {
    QuantumChannel::unitary(&corrtwirl::nmr::gate_cnot(0, 1, 2).unwrap())
}

fn random_channel(n: usize, rng: &mut ChaCha8Rng, kraus: bool) -> QuantumChannel {
    let k = rng.random_range(1..=4);
    if kraus {
        random::kraus_channel(n, k, rng)
    } else {
        random::unitary_ensemble(n, k, rng)
    }
}

fn table_reproduction() -> Check {
    let pairs = "targets = 1-2; 2-3; 1-4";
    let rows: [(&str, f64, f64); 5] = [
        ("c12:0.1", 0.01, 0.1f64.sin().powi(2)),
        ("c12:0.4", 0.15, 0.4f64.sin().powi(2)),
        ("cnot", 0.25, 0.25),
        ("cnot2", 0.0, 0.0),
        ("ie-sequence", 0.0, 0.0),
    ];
    let mut summary = Vec::new();
    for (gate, table, closed) in rows {
        let report = run_experiment(&cfg(&format!("gate = {gate}\n{pairs}\nmode = exact"))).map_err(|e| e.to_string())?;
        for r in &report.results {
            let on_target = r.subset == set(&[0, 1]);
            let (t, c) = if on_target { (table, closed) } else { (0.0, 0.0) };
            ensure((r.eta_col - t).abs() <= 0.005, || format!("{gate} {{{}}}: {} vs table {t}", r.subset, r.eta_col))?;
            ensure((r.eta_col - c).abs() <= 1e-9, || format!("{gate} {{{}}}: {} vs closed form {c}", r.subset, r.eta_col))?;
        }
        summary.push(format!("{gate}={:.4}", report.results[0].eta_col));
    }
    Ok(summary.join(" "))
}

fn oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    let mut spot = 0;
    for i in 0..50 {
        let n = 2 + i % 2;
        let ch = random_channel(n, &mut rng, i % 4 >= 2);
        let chi = chi_diagonal(&ch).map_err(|e| e.to_string())?;
        let mut subsets: Vec<QubitSet> =
            QubitSet::all(n).nonempty_subsets().into_iter().filter(|s| s.len() <= 2).collect();
        if n == 3 && spot < 5 {
            subsets.push(QubitSet::all(3));
            spot += 1;
        }
        for m in subsets {
            let exact = gamma_exact(&ch, &m, &pool()).map_err(|e| e.to_string())?.value;
            let predicted = gamma_predicted_pure(&chi, &m).map_err(|e| e.to_string())?;
            worst = worst.max((exact - predicted).abs());
            checks += 1;
        }
    }
    ensure(spot == 5, || format!("only {spot} three-qubit spot checks"))?;
    ensure(worst < 1e-9, || format!("max |exact − predicted| = {worst:.3e}"))?;
    Ok(format!("{checks} comparisons, max deviation {worst:.2e}"))
}

fn pool_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let n = 2 + i % 2;
        let ch = random_channel(n, &mut rng, i % 2 == 0);
        for m in [set(&[0]), set(&[0, 1])] {
            let rho0 = DensityMatrix::protocol_initial(n, &m).unwrap();
            let rep = pool_equivalence_check(&ch, &m, &rho0).map_err(|e| e.to_string())?;
            ensure(rep.values.len() == 10, || format!("{} pools compared", rep.values.len()))?;
            worst = worst.max(rep.max_spread);
        }
    }
    ensure(worst < 1e-9, || format!("max spread {worst:.3e}"))?;
    Ok(format!("20 channels x 2 subsets x 10 pools, max spread {worst:.2e}"))
}

fn exact_gammas(ch: &QuantumChannel, m: &QubitSet) -> std::collections::BTreeMap<QubitSet, f64> {
    m.nonempty_subsets().into_iter().map(|s| (s.clone(), gamma_exact(ch, &s, &pool()).unwrap().value)).collect()
}

fn combination() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let id1 = corrtwirl::state::identity(2);
    let local = |rng: &mut ChaCha8Rng, pair: (usize, usize)| -> UnitaryMatrix {
        // random two-qubit unitary on `pair` of three qubits
        let u = random::haar_unitary(2, rng);
        let full = match pair {
            (0, 1) => tensor(u.matrix(), &id1).unwrap(),
            (1, 2) => tensor(&id1, u.matrix()).unwrap(),
            _ => {
                let swap12 = corrtwirl::nmr::gate_cnot(1, 2, 3).unwrap();
                let swap = swap12
                    .then_after(&corrtwirl::nmr::gate_cnot(2, 1, 3).unwrap())
                    .unwrap()
                    .then_after(&swap12)
                    .unwrap();
                let on01 = UnitaryMatrix::new(tensor(u.matrix(), &id1).unwrap()).unwrap();
                return swap.then_after(&on01).unwrap().then_after(&swap).unwrap();
            }
        };
        UnitaryMatrix::new(full).unwrap()
    };
    let pairs = [(0usize, 1usize), (1, 2), (0, 2)];

    // 2-local mixtures: the pair combination is exactly the pair coefficient
    let mut worst_pair: f64 = 0.0;
    for _ in 0..5 {
        let terms: Vec<(f64, UnitaryMatrix)> = pairs.iter().map(|&p| (1.0 / 3.0, local(&mut rng, p))).collect();
        let ch = QuantumChannel::unitary_ensemble(terms).unwrap();
        let col = collective_coefficients(&chi_diagonal(&ch).unwrap());
        ensure(col.get(&QubitSet::all(3)).abs() < 1e-12, || "2-local mixture has weight-3 terms".into())?;
        for (a, b) in pairs {
            let g = exact_gammas(&ch, &set(&[a, b]));
            let e = |qs: &[usize]| GammaEstimate::exact(set(qs), g[&set(qs)]);
            let eta = combine_pair(&e(&[a]), &e(&[b]), &e(&[a, b]));
            worst_pair = worst_pair.max((eta - col.get(&set(&[a, b]))).abs());
        }
    }
    ensure(worst_pair <= 1e-9, || format!("pair inversion off by {worst_pair:.3e}"))?;

    let zzz = QuantumChannel::unitary(&z_string_phase(3, &[0, 1, 2], 0.3));
    let eta3 = combine_subset(&exact_gammas(&zzz, &QubitSet::all(3)), &QubitSet::all(3)).unwrap();
    ensure((eta3 - 0.3f64.sin().powi(2)).abs() <= 1e-9, || format!("ZZZ combination {eta3}"))?;

    // inject weight-3 terms: the pair combination picks up the superset tail
    let mut worst_tail: f64 = 0.0;
    for _ in 0..5 {
        let p = rng.random_range(0.1..0.5);
        let ch = QuantumChannel::unitary_ensemble(vec![
            (1.0 - p, local(&mut rng, (0, 1))),
            (p, random::haar_unitary(3, &mut rng)),
        ])
        .unwrap();
        let col = collective_coefficients(&chi_diagonal(&ch).unwrap());
        ensure(col.get(&QubitSet::all(3)) > 1e-3, || "no weight-3 terms injected".into())?;
        for (a, b) in pairs {
            let m = set(&[a, b]);
            let eta = combine_subset(&exact_gammas(&ch, &m), &m).unwrap();
            let tail = col.get(&QubitSet::all(3));
            worst_tail = worst_tail.max((eta - col.get(&m) - tail).abs());
        }
    }
    ensure(worst_tail <= 1e-9, || format!("tail mismatch {worst_tail:.3e}"))?;
    Ok(format!(
        "pair inversion {worst_pair:.1e}, ZZZ {eta3:.4}, tail mismatch {worst_tail:.1e}"
    ))
}

fn sampled_statistics() -> Check {
    let plan = sample_size(0.01, 0.05).map_err(|e| e.to_string())?;
    ensure(plan.realizations == 18445, || format!("sample_size(0.01, 0.05) = {}", plan.realizations))?;
    let n_real = 40_000u64;
    let fixed = SamplePlan::fixed(n_real).unwrap();
    let bound = 3.0 / (n_real as f64).sqrt();
    let ch = two_qubit_cnot();
    let m = set(&[0, 1]);
    let mut inside = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let g = run_sampled_protocol(&ch, &m, &fixed, &pool(), seed, Default::default()).map_err(|e| e.to_string())?;
        let dev = (g.value - 5.0 / 9.0).abs();
        worst = worst.max(dev);
        if dev <= bound {
            inside += 1;
        }
    }
    ensure(inside >= 99, || format!("{inside}/100 runs within 3/√N"))?;
    Ok(format!("{inside}/100 within {bound:.4}, worst {worst:.4}; N(0.01,0.05) = 18445"))
}

fn ie_refocusing() -> Check {
    let h = NmrHamiltonian::crotonic();
    let ideal = compile_sequence(&ie_sequence_default(0.0).unwrap(), &h).unwrap();
    let col = collective_coefficients(&chi_diagonal(&QuantumChannel::unitary(&ideal)).unwrap());
    let ideal_max = col.max_of_size(|_| true);
    ensure(ideal_max < 1e-10, || format!("ideal max coefficient {ideal_max:.3e}"))?;

    let faulty = compile_sequence(&ie_sequence_default(0.05).unwrap(), &h).unwrap();
    let chi = chi_diagonal(&QuantumChannel::unitary(&faulty)).unwrap();
    let col = collective_coefficients(&chi);
    let low = col.max_of_size(|s| s <= 2);
    let high = max_weight_coefficient(&chi, 2);
    ensure(low > 1e-6, || format!("weight-1/2 maximum {low:.3e} with ε = 0.05"))?;
    ensure(high < 0.1 * low, || format!("weight-3/4 maximum {high:.3e} vs weight-1/2 {low:.3e}"))?;
    Ok(format!("ideal max {ideal_max:.1e}; ε=0.05: low-weight max {low:.3e}, high-weight max {high:.3e}"))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let configs = [
        "gate = cnot\ntargets = 1-2; 2-3; 1-4\nmode = sampled\nseed = 42\nn_realizations = 5000\neps0 = 0.01\neps1 = 0.01",
        "gate = c12:0.4\ntargets = 1-2; 1-2-3\nmode = sampled\nseed = 7\ndelta = 0.05\nepsilon = 0.05\nclifford_sampling = cyclic",
        "gate = ie-sequence\nie_angle_error = 0.05\ntargets = 1-2; 2-3; 1-4\nmode = exact",
    ];
    let mut files = 0;
    for (i, text) in configs.iter().enumerate() {
        let config = cfg(text);
        let run = |threads: Option<usize>, tag: &str| -> std::result::Result<(Vec<u8>, Vec<u8>), String> {
            let go = || run_experiment(&config).map_err(|e| e.to_string());
            let report = match threads {
                Some(t) => rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap().install(go)?,
                None => go()?,
            };
            let (a, b) = report.write(&dir.path().join(format!("{i}-{tag}"))).map_err(|e| e.to_string())?;
            Ok((std::fs::read(a).unwrap(), std::fs::read(b).unwrap()))
        };
        let first = run(None, "a")?;
        for (threads, tag) in [(None, "b"), (Some(1), "one"), (Some(4), "four")] {
            ensure(run(threads, tag)? == first, || format!("config {i} differs on run {tag}"))?;
            files += 2;
        }
    }
    Ok(format!("{} configs, {files} file pairs byte-identical across reruns and 1/4 threads", configs.len()))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("table reproduction (exact mode)", Duration::from_secs(10), table_reproduction),
        ("decay rates match the chi-diagonal oracle", Duration::from_secs(60), oracle_equivalence),
        ("all Clifford pools agree on the projection", Duration::from_secs(60), pool_equivalence),
        ("combination inverts decay rates", Duration::from_secs(60), combination),
        ("sampled protocol statistics", Duration::from_secs(300), sampled_statistics),
        ("time-suspension refocusing and hierarchy", Duration::from_secs(60), ie_refocusing),
        ("byte-identical reports", Duration::from_secs(120), determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > *limit => Err(format!("{detail}; took {elapsed:.1?} (limit {limit:?})")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {} {name} [{elapsed:.2?}]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {} {name} [{elapsed:.2?}]: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} acceptance criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} acceptance criteria passed", criteria.len());
}
