//! Acceptance suite: one PASS/FAIL line per criterion, run with
//! `cargo test -p singlet-core --test acceptance`.

use std::io::Write;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use singlet_core::entanglement::{
    block_entropy, cluster_state, default_dictionary, ghz_state, localisable_experiment,
    log2_binomial, persistency_random_certificate, persistency_upper_bound, residual_antisymmetry,
    w_state,
};
use singlet_core::hamiltonian::{ground_state, verify_all_pair_eigenstate, SolverKind};
use singlet_core::hubbard::{compare_effective, fit_power_law, two_site_gap};
use singlet_core::measurement::{
    cascade, haar_unitary, is_subspace_compatible, reck_factorize, theorem2_check, Policy,
};
use singlet_core::network::{make_topology, QuditNetwork, Topology};
use singlet_core::qudit::{
    apply_uniform_unitary, entropy, fidelity_up_to_phase, schmidt, Bipartition, RANK_TOL,
};
use singlet_core::{
    build_full_singlet, run_scenario, Command, ScenarioConfig, StateVector, UnitaryMatrix,
};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn require(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn networks(n: usize, seed: u64) -> Vec<(String, QuditNetwork)> {
    let mut r = rng(seed);
    let kinds = [
        (Topology::Chain, 0),
        (Topology::Ring, 0),
        (Topology::Star, 0),
        (Topology::Complete, 0),
        (Topology::RandomConnected, 101),
        (Topology::RandomConnected, 202),
        (Topology::RandomConnected, 303),
    ];
    kinds
        .iter()
        .map(|&(kind, s)| {
            let net = make_topology(kind, n, 1.0, s)
                .unwrap()
                .with_random_couplings(2.0, &mut r);
            (format!("{kind:?}/{s}"), net)
        })
        .collect()
}

fn ground_state_uniqueness() -> Verdict {
    let start = Instant::now();
    let (mut worst_rel, mut worst_fid) = (0.0f64, 1.0f64);
    for n in 3..=5 {
        let singlet = build_full_singlet(n).unwrap();
        for (label, net) in networks(n, 7 + n as u64) {
            let spec =
                ground_state(&net, n, 3, 1e-10).map_err(|e| format!("n={n} {label}: {e}"))?;
            let total = net.total_coupling();
            let rel = (spec.lowest_energies[0] + total).abs() / total;
            let fid = fidelity_up_to_phase(&spec.ground_state, &singlet).unwrap();
            if spec.degeneracy != 1 {
                return Err(format!("n={n} {label}: degeneracy {}", spec.degeneracy));
            }
            worst_rel = worst_rel.max(rel);
            worst_fid = worst_fid.min(fid);
        }
    }
    require(
        worst_rel <= 1e-8 && worst_fid >= 1.0 - 1e-8,
        format!(
            "N=d in 3..=5: max rel err {worst_rel:.2e}, min fidelity 1-{:.2e}",
            1.0 - worst_fid
        ),
    )?;

    let net = make_topology(Topology::Chain, 6, 1.0, 0)
        .unwrap()
        .with_random_couplings(2.0, &mut rng(6));
    let spec = ground_state(&net, 6, 2, 1e-8).map_err(|e| e.to_string())?;
    let total = net.total_coupling();
    let rel = (spec.lowest_energies[0] + total).abs() / total;
    let fid = fidelity_up_to_phase(&spec.ground_state, &build_full_singlet(6).unwrap()).unwrap();
    let elapsed = start.elapsed();
    require(
        spec.solver == SolverKind::Lanczos
            && spec.degeneracy == 1
            && rel <= 1e-6
            && fid >= 1.0 - 1e-6
            && elapsed < Duration::from_secs(120),
        format!(
            "N=d in 3..=5 max rel err {worst_rel:.2e}, min fid 1-{:.2e}; N=6 chain ({:?}) rel err {rel:.2e}, fid 1-{:.2e}; {:.1?}",
            1.0 - worst_fid,
            spec.solver,
            1.0 - fid,
            elapsed
        ),
    )
}

fn antisymmetry_on_all_pairs() -> Verdict {
    let mut worst = 0.0f64;
    let mut count = 0;
    for n in 3..=5 {
        for (_, net) in networks(n, 50 + n as u64) {
            let spec = ground_state(&net, n, 2, 1e-10).map_err(|e| e.to_string())?;
            worst = worst.max(verify_all_pair_eigenstate(&spec.ground_state, &net).unwrap());
            count += 1;
        }
    }
    let net = make_topology(Topology::Chain, 6, 1.0, 0).unwrap();
    let spec = ground_state(&net, 6, 2, 1e-8).map_err(|e| e.to_string())?;
    worst = worst.max(verify_all_pair_eigenstate(&spec.ground_state, &net).unwrap());
    count += 1;
    require(
        worst < 1e-6,
        format!("{count} ground states, max ‖P_ij ψ + ψ‖ = {worst:.2e} over all pairs"),
    )
}

fn single_measurement() -> Verdict {
    let start = Instant::now();
    let mut worst = 1.0f64;
    let mut r = rng(3);
    for n in 3..=5 {
        for _ in 0..50 {
            let u = haar_unitary(n, &mut r).unwrap();
            for outcome in 0..n {
                worst = worst.min(theorem2_check(n, &u, outcome).map_err(|e| e.to_string())?);
            }
        }
    }
    require(
        worst >= 1.0 - 1e-9 && start.elapsed() < Duration::from_secs(60),
        format!(
            "n in 3..=5, 50 Haar bases, all outcomes: min fidelity 1-{:.2e}",
            1.0 - worst
        ),
    )
}

fn restricted_cascades() -> Verdict {
    let n = 5;
    let mut r = rng(4);
    let mut summary = Vec::new();
    let mut ok = true;
    for m in 1..=3 {
        let sites: Vec<usize> = (0..m).collect();
        let mut worst = 1.0f64;
        let mut entropies = Vec::new();
        for _ in 0..20 {
            let rec =
                cascade(n, &sites, Policy::RestrictedRandom, &mut r).map_err(|e| e.to_string())?;
            worst = worst.min(
                fidelity_up_to_phase(
                    &rec.remaining_state().unwrap(),
                    &rec.expected_singlet().unwrap(),
                )
                .unwrap(),
            );
            let cut = Bipartition::new(n, &[m]).unwrap();
            entropies.push(entropy(
                &schmidt(&rec.final_state, &cut, RANK_TOL)
                    .unwrap()
                    .coefficients,
            ));
        }
        let spread = entropies.iter().cloned().fold(f64::MIN, f64::max)
            - entropies.iter().cloned().fold(f64::MAX, f64::min);
        ok &= worst >= 1.0 - 1e-9 && spread < 1e-8;
        summary.push(format!(
            "M={m}: fid 1-{:.1e}, spread {spread:.1e}",
            1.0 - worst
        ));
    }
    require(ok, summary.join("; "))
}

fn block_entropies() -> Verdict {
    let mut worst = 0.0f64;
    let mut blocks = 0;
    for n in 3..=6 {
        let state = build_full_singlet(n).unwrap();
        for l in 1..n {
            let contiguous: Vec<usize> = (0..l).collect();
            let scattered: Vec<usize> = (0..n)
                .rev()
                .step_by(2)
                .chain((0..n).rev().skip(1).step_by(2))
                .take(l)
                .collect();
            for block in [contiguous, scattered] {
                worst =
                    worst.max((block_entropy(&state, &block).unwrap() - log2_binomial(n, l)).abs());
                blocks += 1;
            }
        }
    }
    let s4 = block_entropy(&build_full_singlet(4).unwrap(), &[0, 1]).unwrap();
    let s5 = block_entropy(&build_full_singlet(5).unwrap(), &[0, 1]).unwrap();
    require(
        worst <= 1e-8 && (s4 - 2.584_962_5).abs() < 1e-7 && (s5 - 10f64.log2()).abs() < 1e-9,
        format!("{blocks} blocks, n in 3..=6: max |S - log2 C(n,L)| = {worst:.2e}; S(4,2) = {s4:.7}, S(5,2) = {s5:.7}"),
    )
}

fn localisable_entanglement() -> Verdict {
    let rows = localisable_experiment(
        6,
        &[0, 1],
        &[2, 3],
        20,
        Policy::RestrictedRandom,
        RANK_TOL,
        &mut rng(6),
    )
    .map_err(|e| e.to_string())?;
    let worst = rows
        .iter()
        .map(|t| (t.entropy_bits - 6f64.log2()).abs())
        .fold(0.0, f64::max);
    let ranks_ok = rows.iter().all(|t| t.schmidt_rank == 6);
    require(
        rows.len() == 20 && ranks_ok && worst <= 1e-8,
        format!("20 trials: all ranks 6 = {ranks_ok}, max |S - log2 6| = {worst:.2e}"),
    )
}

fn persistency() -> Verdict {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    let cases: [(&str, StateVector, usize); 5] = [
        ("singlet-3", build_full_singlet(3).unwrap(), 2),
        ("singlet-4", build_full_singlet(4).unwrap(), 3),
        ("GHZ-3", ghz_state(3).unwrap(), 1),
        ("W-3", w_state(3).unwrap(), 2),
        ("cluster-4", cluster_state(4).unwrap(), 2),
    ];
    for (name, state, want) in cases {
        let dict = default_dictionary(state.num_sites(), state.local_dim(), 8, 0).unwrap();
        let got = persistency_upper_bound(&state, &dict, 1_000_000)
            .map_err(|e| format!("{name}: {e}"))?;
        ok &= got == want;
        lines.push(format!("{name} {got}"));
    }
    let mut r = rng(7);
    for n in [3, 4] {
        for m in 1..n - 1 {
            let rank =
                persistency_random_certificate(n, m, 50, &mut r).map_err(|e| e.to_string())?;
            ok &= rank >= 2;
            lines.push(format!("singlet-{n} after {m}: rank {rank}"));
        }
    }
    ok &= start.elapsed() < Duration::from_secs(180);
    require(ok, lines.join(", "))
}

fn arbitrary_antisymmetry() -> Verdict {
    let mut r = rng(8);
    let mut worst = 0.0f64;
    for m in 1..=2 {
        let sites: Vec<usize> = (0..m).collect();
        for _ in 0..50 {
            let rec =
                cascade(4, &sites, Policy::ArbitraryRandom, &mut r).map_err(|e| e.to_string())?;
            worst =
                worst.max(residual_antisymmetry(&rec.final_state, &rec.remaining_sites()).unwrap());
        }
    }
    require(
        worst < 1e-9,
        format!("n=4, M in {{1,2}}, 50 trials each: max deviation {worst:.2e}"),
    )
}

/// Two-party singlet on levels `a < b` of a `d`-level system, built by hand.
fn embedded_pair(d: usize, a: usize, b: usize) -> StateVector {
    let mut s = StateVector::zeros(2, d).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    s.amplitudes_mut()[a * d + b] = Complex64::new(h, 0.0);
    s.amplitudes_mut()[b * d + a] = Complex64::new(-h, 0.0);
    s
}

fn reck_and_compatibility() -> Verdict {
    let mut r = rng(9);
    let (mut worst_err, mut ok) = (0.0f64, true);
    for d in 2..=5 {
        for _ in 0..100 {
            let u = haar_unitary(d, &mut r).unwrap();
            let dec = reck_factorize(u.matrix()).map_err(|e| e.to_string())?;
            ok &= dec.factors.len() <= d * (d - 1) / 2;
            let err = (dec.reconstruct() - u.matrix())
                .iter()
                .fold(0.0f64, |acc, z| acc.max(z.norm()));
            worst_err = worst_err.max(err);
        }
    }
    // Block-diagonal unitaries that never mix the singlet's two levels with the rest.
    let mut worst_fid = 1.0f64;
    let mut compatible = 0;
    for d in 3..=5 {
        for _ in 0..20 {
            let inner = haar_unitary(2, &mut r).unwrap();
            let outer = haar_unitary(d - 2, &mut r).unwrap();
            let mut m = UnitaryMatrix::identity(d).matrix().clone();
            m.view_mut((0, 0), (2, 2)).copy_from(inner.matrix());
            m.view_mut((2, 2), (d - 2, d - 2)).copy_from(outer.matrix());
            let u = UnitaryMatrix::new(m).unwrap();
            let factors = reck_factorize(u.matrix()).unwrap().factors;
            if !is_subspace_compatible(&factors, &[0, 1]) {
                return Err(format!(
                    "block-diagonal d={d} unitary factored across the singlet subspace"
                ));
            }
            compatible += 1;
            let pair = embedded_pair(d, 0, 1);
            let rotated = apply_uniform_unitary(&pair, &u).unwrap();
            worst_fid = worst_fid.min(fidelity_up_to_phase(&rotated, &pair).unwrap());
        }
    }
    require(
        ok && worst_err < 1e-9 && worst_fid >= 1.0 - 1e-9,
        format!("400 unitaries: factor counts ok = {ok}, max entry error {worst_err:.2e}; {compatible} compatible bases, min fidelity 1-{:.1e}", 1.0 - worst_fid),
    )
}

fn hubbard_reduction() -> Verdict {
    let start = Instant::now();
    let (t, u) = (0.1, 10.0);
    let gap = two_site_gap(t, u).map_err(|e| e.to_string())?;
    let closed = ((u * u + 16.0 * t * t).sqrt() - u) / 2.0;
    let j = 4.0 * t * t / u;
    let rel = (gap - j).abs() / j;
    let cmp = compare_effective(3, 3, 0.005, 1.0).map_err(|e| e.to_string())?;
    let bound = 16.0 * 0.005f64.powi(2);
    let ts = [0.01, 0.02, 0.04];
    let gaps: Vec<f64> = ts.iter().map(|&t| two_site_gap(t, 1.0).unwrap()).collect();
    let (slope, prefactor) = fit_power_law(&ts, &gaps);
    require(
        (gap - closed).abs() < 1e-12
            && (gap - 0.003_998_4).abs() < 1e-8
            && rel <= 4.1e-4
            && cmp.max_relative_gap_error <= bound
            && (slope - 2.0).abs() <= 0.02
            && (prefactor - 4.0).abs() / 4.0 <= 0.02
            && start.elapsed() < Duration::from_secs(60),
        format!(
            "d=2 gap {gap:.10} (rel err vs J {rel:.2e}); d=3 spacing mismatch {:.2e} <= {bound:.1e}; fit t^{slope:.4} x {prefactor:.4}",
            cmp.max_relative_gap_error
        ),
    )
}

fn verify_all_quick() -> Verdict {
    let mut cfg = ScenarioConfig::new(Command::VerifyAll);
    cfg.level = Some("quick".into());
    let start = Instant::now();
    let a = run_scenario(&cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let b = run_scenario(&cfg).map_err(|e| e.to_string())?;
    let strip = |mut r: singlet_core::RunReport| {
        r.wall_time_ms = 0;
        r.to_json()
    };
    let identical = strip(a.clone()) == strip(b);
    require(
        a.pass && identical && elapsed < Duration::from_secs(60),
        format!(
            "pass = {}, identical reports = {identical}, {:.1?}",
            a.pass, elapsed
        ),
    )
}

/// Written straight to stderr so the verdicts show without `--nocapture`.
fn report(line: &str) {
    let _ = writeln!(std::io::stderr(), "{line}");
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 11] = [
        (
            "singlet is the unique ground state",
            ground_state_uniqueness,
        ),
        (
            "ground states antisymmetric on every pair",
            antisymmetry_on_all_pairs,
        ),
        (
            "one measurement leaves a reduced singlet",
            single_measurement,
        ),
        (
            "restricted cascades leave reduced singlets",
            restricted_cascades,
        ),
        ("block entropy equals log2 C(n, L)", block_entropies),
        (
            "two-block localisable entanglement",
            localisable_entanglement,
        ),
        ("persistency bounds and oracles", persistency),
        (
            "arbitrary-basis residual antisymmetry",
            arbitrary_antisymmetry,
        ),
        (
            "two-level factorisation and compatible bases",
            reck_and_compatibility,
        ),
        ("Hubbard reduction to exchange", hubbard_reduction),
        (
            "verify-all quick is fast and deterministic",
            verify_all_quick,
        ),
    ];
    let mut failures = Vec::new();
    for (k, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => report(&format!("PASS [{:>2}] {name}: {detail}", k + 1)),
            Err(detail) => {
                report(&format!("FAIL [{:>2}] {name}: {detail}", k + 1));
                failures.push(k + 1);
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
