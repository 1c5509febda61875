//! The built-in self-check behind `verify-all`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::entanglement::{
    block_entropy, default_dictionary, localisable_experiment, log2_binomial,
    persistency_random_certificate, persistency_upper_bound, residual_antisymmetry, ReferenceState,
};
use crate::error::{Error, Result};
use crate::hamiltonian::{ground_state, verify_all_pair_eigenstate, SolverKind};
use crate::harness::Assertions;
use crate::hubbard::{compare_effective, fit_power_law, two_site_gap};
use crate::measurement::{
    cascade, haar_unitary, is_subspace_compatible, reck_factorize, theorem2_check, Policy,
    TwoLevelFactor,
};
use crate::network::{make_topology, Topology};
use crate::qudit::{
    entropy, fidelity_up_to_phase, schmidt, Bipartition, StateVector, UnitaryMatrix, RANK_TOL,
};
use crate::singlet::{build_full_singlet, build_singlet, SingletSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    /// Caps system sizes at four qudits.
    Quick,
    /// Runs every size, up to six qudits.
    Full,
}

impl Level {
    pub fn name(self) -> &'static str {
        match self {
            Level::Quick => "quick",
            Level::Full => "full",
        }
    }

    fn max_n(self) -> usize {
        match self {
            Level::Quick => 4,
            Level::Full => 6,
        }
    }
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Level::Quick),
            "full" => Ok(Level::Full),
            other => Err(Error::Validation(format!("unknown level {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub details: Value,
}

type Check = fn(u64, Level) -> Result<Assertions>;

/// Run every check. A check that errors is reported as failed with the error text.
pub fn verify_all(seed: u64, level: Level) -> Vec<CheckOutcome> {
    let checks: [(u32, &str, Check); 10] = [
        (1, "singlet is the unique ground state", check_ground_states),
        (
            2,
            "ground state is antisymmetric on every pair",
            check_all_pairs,
        ),
        (
            3,
            "single measurement leaves a reduced singlet",
            check_single_measurement,
        ),
        (
            4,
            "restricted cascades leave reduced singlets",
            check_restricted_cascades,
        ),
        (
            5,
            "block entropy is log2 of a binomial",
            check_block_entropy,
        ),
        (
            6,
            "entanglement localises between blocks",
            check_localisation,
        ),
        (7, "persistency of reference states", check_persistency),
        (
            8,
            "arbitrary cascades keep antisymmetry",
            check_arbitrary_cascades,
        ),
        (
            9,
            "two-level factorisation and compatible bases",
            check_reck,
        ),
        (10, "Hubbard low-energy manifold", check_hubbard),
    ];
    checks
        .iter()
        .map(|&(id, name, f)| match f(seed, level) {
            Ok(a) => CheckOutcome {
                id,
                name: name.to_string(),
                pass: a.all_pass(),
                details: a.into_value(),
            },
            Err(e) => CheckOutcome {
                id,
                name: name.to_string(),
                pass: false,
                details: json!({ "error": e.to_string() }),
            },
        })
        .collect()
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn topologies() -> Vec<(Topology, u64)> {
    vec![
        (Topology::Chain, 0),
        (Topology::Ring, 0),
        (Topology::Star, 0),
        (Topology::Complete, 0),
        (Topology::RandomConnected, 1),
        (Topology::RandomConnected, 2),
        (Topology::RandomConnected, 3),
    ]
}

fn check_ground_states(seed: u64, level: Level) -> Result<Assertions> {
    let mut a = Assertions::default();
    let mut r = rng(seed, 1);
    for n in 3..=level.max_n().min(5) {
        let singlet = build_full_singlet(n)?;
        for (kind, offset) in topologies() {
            let net = make_topology(kind, n, 1.0, seed.wrapping_add(offset))?
                .with_random_couplings(2.0, &mut r);
            let total = net.total_coupling();
            let spec = ground_state(&net, n, 2, 1e-10)?;
            let rel = (spec.lowest_energies[0] + total).abs() / total;
            let fid = fidelity_up_to_phase(&spec.ground_state, &singlet)?;
            let label = format!("n{n}_{kind:?}_{offset}");
            a.check(
                &format!("{label}_energy"),
                rel <= 1e-8,
                json!(rel),
                json!(1e-8),
            );
            a.check(
                &format!("{label}_degeneracy"),
                spec.degeneracy == 1,
                json!(spec.degeneracy),
                json!(1),
            );
            a.check(
                &format!("{label}_fidelity"),
                fid >= 1.0 - 1e-8,
                json!(fid),
                json!(1.0 - 1e-8),
            );
        }
    }
    if level == Level::Full {
        let net = make_topology(Topology::Chain, 6, 1.0, seed)?;
        let spec = ground_state(&net, 6, 2, 1e-8)?;
        let rel = (spec.lowest_energies[0] + net.total_coupling()).abs() / net.total_coupling();
        let fid = fidelity_up_to_phase(&spec.ground_state, &build_full_singlet(6)?)?;
        a.check(
            "n6_chain_lanczos_solver",
            spec.solver == SolverKind::Lanczos,
            json!(format!("{:?}", spec.solver)),
            json!("Lanczos"),
        );
        a.check("n6_chain_energy", rel <= 1e-6, json!(rel), json!(1e-6));
        a.check(
            "n6_chain_fidelity",
            fid >= 1.0 - 1e-6,
            json!(fid),
            json!(1.0 - 1e-6),
        );
    }
    Ok(a)
}

fn check_all_pairs(seed: u64, level: Level) -> Result<Assertions> {
    let mut a = Assertions::default();
    for n in 3..=level.max_n().min(5) {
        for (kind, offset) in topologies() {
            let net = make_topology(kind, n, 1.0, seed.wrapping_add(offset))?;
            let spec = ground_state(&net, n, 2, 1e-10)?;
            let dev = verify_all_pair_eigenstate(&spec.ground_state, &net)?;
            a.check(
                &format!("n{n}_{kind:?}_{offset}"),
                dev < 1e-6,
                json!(dev),
                json!(1e-6),
            );
        }
    }
    Ok(a)
}

fn check_single_measurement(seed: u64, level: Level) -> Result<Assertions> {
    let mut a = Assertions::default();
    let mut r = rng(seed, 3);
    for n in 3..=level.max_n().min(5) {
        let mut worst = 1.0f64;
        for _ in 0..50 {
            let u = haar_unitary(n, &mut r)?;
            for outcome in 0..n {
                worst = worst.min(theorem2_check(n, &u, outcome)?);
            }
        }
        a.check(
            &format!("n{n}_min_fidelity"),
            worst >= 1.0 - 1e-9,
            json!(worst),
            json!(1.0 - 1e-9),
        );
    }
    Ok(a)
}

fn check_restricted_cascades(seed: u64, level: Level) -> Result<Assertions> {
    let mut a = Assertions::default();
    let mut r = rng(seed, 4);
    let n = level.max_n().min(5);
    for m in 1..=n - 2 {
        let sites: Vec<usize> = (0..m).collect();
        let mut worst = 1.0f64;
        let mut entropies = Vec::new();
        for _ in 0..20 {
            let rec = cascade(n, &sites, Policy::RestrictedRandom, &mut r)?;
            worst = worst.min(fidelity_up_to_phase(
                &rec.remaining_state()?,
                &rec.expected_singlet()?,
            )?);
            let cut = Bipartition::new(n, &[m])?;
            entropies.push(entropy(
                &schmidt(&rec.final_state, &cut, RANK_TOL)?.coefficients,
            ));
        }
        let spread = entropies.iter().cloned().fold(f64::MIN, f64::max)
            - entropies.iter().cloned().fold(f64::MAX, f64::min);
        a.check(
            &format!("n{n}_m{m}_fidelity"),
            worst >= 1.0 - 1e-9,
            json!(worst),
            json!(1.0 - 1e-9),
        );
        a.check(
            &format!("n{n}_m{m}_entropy_spread"),
            spread < 1e-8,
            json!(spread),
            json!(1e-8),
        );
    }
    Ok(a)
}

fn check_block_entropy(_seed: u64, level: Level) -> Result<Assertions> {
    let mut a = Assertions::default();
    for n in 3..=level.max_n() {
        let state = build_full_singlet(n)?;
        for l in 1..n {
            let contiguous: Vec<usize> = (0..l).collect();
            let spread: Vec<usize> = (0..n).step_by(2).chain((1..n).step_by(2)).take(l).collect();
            for (tag, block) in [("contiguous", contiguous), ("interleaved", spread)] {
                let err = (block_entropy(&state, &block)? - log2_binomial(n, l)).abs();
                a.check(
                    &format!("n{n}_l{l}_{tag}"),
                    err <= 1e-8,
                    json!(err),
                    json!(1e-8),
                );
            }
        }
    }
    Ok(a)
}

fn check_localisation(seed: u64, level: Level) -> Result<Assertions> {
    let mut a = Assertions::default();
    let mut r = rng(seed, 6);
    let (n, block_a, block_b): (usize, &[usize], &[usize]) = match level {
        Level::Quick => (4, &[0], &[1]),
        Level::Full => (6, &[0, 1], &[2, 3]),
    };
    let pairs = block_a.len() + block_b.len();
    let want_rank = crate::entanglement::binomial(pairs, block_a.len()) as usize;
    let want_bits = log2_binomial(pairs, block_a.len());
    let rows = localisable_experiment(
        n,
        block_a,
        block_b,
        20,
        Policy::RestrictedRandom,
        RANK_TOL,
        &mut r,
    )?;
    let worst = rows
        .iter()
        .map(|t| (t.entropy_bits - want_bits).abs())
        .fold(0.0, f64::max);
    let ranks: Vec<usize> = rows.iter().map(|t| t.schmidt_rank).collect();
    a.check(
        &format!("n{n}_entropy"),
        worst <= 1e-8,
        json!(worst),
        json!(1e-8),
    );
    a.check(
        &format!("n{n}_rank"),
        ranks.iter().all(|&k| k == want_rank),
        json!(ranks),
        json!(want_rank),
    );
    Ok(a)
}

fn check_persistency(seed: u64, _level: Level) -> Result<Assertions> {
    let mut a = Assertions::default();
    let mut r = rng(seed, 7);
    let cases = [
        (ReferenceState::Singlet, 3),
        (ReferenceState::Singlet, 4),
        (ReferenceState::Ghz, 3),
        (ReferenceState::W, 3),
        (ReferenceState::Cluster, 4),
    ];
    for (kind, n) in cases {
        let state = kind.build(n)?;
        let dictionary = default_dictionary(n, state.local_dim(), 8, seed)?;
        let bound = persistency_upper_bound(&state, &dictionary, 1_000_000)?;
        let want = kind.known_persistency(n);
        a.check(
            &format!("{kind:?}_{n}_upper_bound"),
            bound == want,
            json!(bound),
            json!(want),
        );
    }
    for n in [3, 4] {
        for m in 1..n - 1 {
            let rank = persistency_random_certificate(n, m, 50, &mut r)?;
            a.check(
                &format!("singlet_{n}_after_{m}_entangled"),
                rank >= 2,
                json!(rank),
                json!(2),
            );
        }
    }
    Ok(a)
}

fn check_arbitrary_cascades(seed: u64, _level: Level) -> Result<Assertions> {
    let mut a = Assertions::default();
    let mut r = rng(seed, 8);
    let n = 4;
    for m in 1..=2 {
        let sites: Vec<usize> = (0..m).collect();
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let rec = cascade(n, &sites, Policy::ArbitraryRandom, &mut r)?;
            worst = worst.max(residual_antisymmetry(
                &rec.final_state,
                &rec.remaining_sites(),
            )?);
        }
        a.check(
            &format!("n{n}_m{m}"),
            worst < 1e-9,
            json!(worst),
            json!(1e-9),
        );
    }
    Ok(a)
}

/// A 2-singlet on `levels` of a d-level system, each site rotated by `u`.
fn rotated_pair_singlet(d: usize, levels: [usize; 2], u: &UnitaryMatrix) -> Result<StateVector> {
    let excluded: Vec<usize> = (0..d).filter(|l| !levels.contains(l)).collect();
    let spec = SingletSpec::new(2, u.clone(), &excluded)?;
    build_singlet(&spec)
}

fn check_reck(seed: u64, _level: Level) -> Result<Assertions> {
    let mut a = Assertions::default();
    let mut r = rng(seed, 9);
    for d in 2..=5 {
        let (mut worst_err, mut worst_count) = (0.0f64, 0usize);
        for _ in 0..100 {
            let u = haar_unitary(d, &mut r)?;
            let dec = reck_factorize(u.matrix())?;
            worst_count = worst_count.max(dec.factors.len());
            worst_err = worst_err.max((dec.reconstruct() - u.matrix()).norm());
        }
        a.check(
            &format!("d{d}_reconstruction"),
            worst_err < 1e-9,
            json!(worst_err),
            json!(1e-9),
        );
        a.check(
            &format!("d{d}_factor_count"),
            worst_count <= d * (d - 1) / 2,
            json!(worst_count),
            json!(d * (d - 1) / 2),
        );
    }
    // A rotation confined to levels {0, 1} is compatible with the singlet on those
    // levels and must leave it unchanged up to phase.
    let d = 3;
    let mut worst = 1.0f64;
    for _ in 0..20 {
        let block = haar_unitary(2, &mut r)?;
        let mut m = UnitaryMatrix::identity(d).matrix().clone();
        m.view_mut((0, 0), (2, 2)).copy_from(block.matrix());
        let u = UnitaryMatrix::new(m)?;
        let factors = reck_factorize(u.matrix())?.factors;
        let factors: Vec<TwoLevelFactor> = factors;
        if !is_subspace_compatible(&factors, &[0, 1]) {
            worst = 0.0;
            continue;
        }
        let rotated = rotated_pair_singlet(d, [0, 1], &u)?;
        let plain = rotated_pair_singlet(d, [0, 1], &UnitaryMatrix::identity(d))?;
        worst = worst.min(fidelity_up_to_phase(&rotated, &plain)?);
    }
    a.check(
        "compatible_basis_preserves_singlet",
        worst >= 1.0 - 1e-9,
        json!(worst),
        json!(1.0 - 1e-9),
    );
    Ok(a)
}

fn check_hubbard(_seed: u64, _level: Level) -> Result<Assertions> {
    let mut a = Assertions::default();
    let (t, u) = (0.1, 10.0);
    let gap = two_site_gap(t, u)?;
    let j = 4.0 * t * t / u;
    let closed = ((u * u + 16.0 * t * t).sqrt() - u) / 2.0;
    a.check(
        "d2_gap_closed_form",
        (gap - closed).abs() < 1e-12,
        json!(gap),
        json!(closed),
    );
    a.check(
        "d2_gap_vs_j",
        (gap - j).abs() / j <= 4.1e-4,
        json!((gap - j).abs() / j),
        json!(4.1e-4),
    );

    let (t3, u3) = (0.005, 1.0);
    let cmp = compare_effective(3, 3, t3, u3)?;
    let bound = 16.0 * (t3 / u3).powi(2);
    a.check(
        "d3_spacings",
        cmp.max_relative_gap_error <= bound,
        json!(cmp.max_relative_gap_error),
        json!(bound),
    );

    let ts = [0.01, 0.02, 0.04];
    let gaps = ts
        .iter()
        .map(|&t| two_site_gap(t, 1.0))
        .collect::<Result<Vec<_>>>()?;
    let (slope, prefactor) = fit_power_law(&ts, &gaps);
    a.check(
        "gap_exponent",
        (slope - 2.0).abs() <= 0.02,
        json!(slope),
        json!(2.0),
    );
    a.check(
        "gap_prefactor",
        (prefactor - 4.0).abs() / 4.0 <= 0.02,
        json!(prefactor),
        json!(4.0),
    );
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_level_passes() {
        let checks = verify_all(0, Level::Quick);
        assert_eq!(checks.len(), 10);
        for c in &checks {
            assert!(c.pass, "{} failed: {}", c.name, c.details);
        }
    }
}
