//! Block entropy, two-block localisable entanglement and persistency of
//! entanglement.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::measurement::{
    cascade, cascade_on, haar_unitary, measure_site_forced, outcome_probabilities, Policy,
    MIN_PROBABILITY,
};
use crate::qudit::{
    entropy, schmidt, swap_antisymmetry_deviation, Bipartition, StateVector, UnitaryMatrix,
    RANK_TOL,
};
use crate::singlet::build_full_singlet;

/// `log₂ C(n, k)`.
pub fn log2_binomial(n: usize, k: usize) -> f64 {
    (binomial(n, k) as f64).log2()
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// Entropy in bits of `block` against the rest of the sites.
pub fn block_entropy(state: &StateVector, block: &[usize]) -> Result<f64> {
    let cut = Bipartition::new(state.num_sites(), block)?;
    Ok(entropy(&schmidt(state, &cut, RANK_TOL)?.coefficients))
}

/// Smallest Schmidt rank over every bipartition of `sites` (the other sites
/// are assumed to be in a product state with them).
pub fn min_schmidt_rank(state: &StateVector, sites: &[usize], rank_tol: f64) -> Result<usize> {
    if sites.len() < 2 {
        return Ok(1);
    }
    let first = sites[0];
    let others = &sites[1..];
    let mut best = usize::MAX;
    // subsets of `others` joined with `first`, excluding the one that takes everything
    for mask in 0..(1u64 << others.len()) - 1 {
        let mut block = vec![first];
        block.extend(
            others
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &s)| s),
        );
        let cut = Bipartition::new(state.num_sites(), &block)?;
        best = best.min(schmidt(state, &cut, rank_tol)?.rank);
        if best == 1 {
            break;
        }
    }
    Ok(best)
}

/// A pure state is fully product iff every single site is unentangled from
/// the rest.
pub fn is_fully_product(state: &StateVector, rank_tol: f64) -> Result<bool> {
    for site in 0..state.num_sites() {
        let cut = Bipartition::new(state.num_sites(), &[site])?;
        if schmidt(state, &cut, rank_tol)?.rank > 1 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalisableTrial {
    pub outcomes: Vec<usize>,
    pub entropy_bits: f64,
    pub schmidt_rank: usize,
}

/// Measure every site outside `block_a ∪ block_b` of the `n`-singlet, then
/// record the entanglement between the two blocks.
pub fn localisable_experiment<R: Rng + ?Sized>(
    n: usize,
    block_a: &[usize],
    block_b: &[usize],
    trials: usize,
    policy: Policy,
    rank_tol: f64,
    rng: &mut R,
) -> Result<Vec<LocalisableTrial>> {
    if block_a.is_empty() || block_b.is_empty() {
        return domain("both blocks must be non-empty");
    }
    if block_a.iter().any(|s| block_b.contains(s)) {
        return domain("blocks overlap");
    }
    if block_a.iter().chain(block_b).any(|&s| s >= n) {
        return domain("block site out of range");
    }
    let measured: Vec<usize> = (0..n)
        .filter(|s| !block_a.contains(s) && !block_b.contains(s))
        .collect();
    (0..trials)
        .map(|_| {
            let (state, outcomes) = if measured.is_empty() {
                (build_full_singlet(n)?, Vec::new())
            } else {
                let rec = cascade(n, &measured, policy, rng)?;
                let outcomes = rec.outcomes();
                (rec.final_state, outcomes)
            };
            let cut = Bipartition::new(n, block_a)?;
            let sd = schmidt(&state, &cut, rank_tol)?;
            Ok(LocalisableTrial {
                outcomes,
                entropy_bits: entropy(&sd.coefficients),
                schmidt_rank: sd.rank,
            })
        })
        .collect()
}

/// `max_{i<j ∈ sites} ‖P_ij|ψ⟩ + |ψ⟩‖`.
pub fn residual_antisymmetry(state: &StateVector, remaining_sites: &[usize]) -> Result<f64> {
    let mut worst = 0.0f64;
    for (a, &i) in remaining_sites.iter().enumerate() {
        for &j in &remaining_sites[a + 1..] {
            worst = worst.max(swap_antisymmetry_deviation(state, i, j)?);
        }
    }
    Ok(worst)
}

/// Computational, Fourier and `haar_per_site` Haar bases for each site.
pub fn default_dictionary(
    num_sites: usize,
    d: usize,
    haar_per_site: usize,
    seed: u64,
) -> Result<Vec<Vec<UnitaryMatrix>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..num_sites)
        .map(|_| {
            let mut bases = vec![UnitaryMatrix::identity(d), UnitaryMatrix::fourier(d)];
            for _ in 0..haar_per_site {
                bases.push(haar_unitary(d, &mut rng)?);
            }
            Ok(bases)
        })
        .collect()
}

struct Search<'a> {
    dictionary: &'a [Vec<UnitaryMatrix>],
    budget: usize,
    nodes: usize,
}

impl Search<'_> {
    /// Can `state` be made fully product with at most `depth` further
    /// measurements, choosing each site and basis after seeing earlier outcomes?
    fn disentangles(
        &mut self,
        state: &StateVector,
        measured: &mut Vec<usize>,
        depth: usize,
    ) -> Result<bool> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::Budget {
                budget: self.budget,
                proven_lower: 0,
                best_known: None,
            });
        }
        if is_fully_product(state, RANK_TOL)? {
            return Ok(true);
        }
        if depth == 0 {
            return Ok(false);
        }
        for site in 0..state.num_sites() {
            if measured.contains(&site) {
                continue;
            }
            measured.push(site);
            let mut found = false;
            for basis in &self.dictionary[site] {
                let probs = outcome_probabilities(state, site, basis)?;
                let mut all = true;
                for (k, &p) in probs.iter().enumerate() {
                    if p < MIN_PROBABILITY {
                        continue;
                    }
                    let child = measure_site_forced(state, site, basis, k)?.collapsed;
                    if !self.disentangles(&child, measured, depth - 1)? {
                        all = false;
                        break;
                    }
                }
                if all {
                    found = true;
                    break;
                }
            }
            measured.pop();
            if found {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Fewest dictionary-basis measurements that leave every outcome branch fully
/// product, searching adaptive strategies exhaustively by increasing depth.
/// Because the dictionary is finite this bounds the persistency from above.
pub fn persistency_upper_bound(
    state: &StateVector,
    dictionary: &[Vec<UnitaryMatrix>],
    budget: usize,
) -> Result<usize> {
    if dictionary.len() != state.num_sites() || dictionary.iter().any(Vec::is_empty) {
        return domain("dictionary needs a non-empty list of bases for every site");
    }
    if dictionary
        .iter()
        .flatten()
        .any(|b| b.dim() != state.local_dim())
    {
        return domain("dictionary basis dimension does not match the state");
    }
    let mut search = Search {
        dictionary,
        budget,
        nodes: 0,
    };
    let n = state.num_sites();
    // n − 1 measurements always leave a single unmeasured site.
    let ceiling = n.saturating_sub(1);
    for depth in 0..ceiling {
        match search.disentangles(state, &mut Vec::new(), depth) {
            Ok(true) => return Ok(depth),
            Ok(false) => {}
            Err(Error::Budget { budget, .. }) => {
                return Err(Error::Budget {
                    budget,
                    proven_lower: depth,
                    best_known: Some(ceiling),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ceiling)
}

/// Minimum Schmidt rank, over `trials` random-basis cascades of `m`
/// measurements on the `n`-singlet, over every outcome branch of the sampled
/// bases and every bipartition of the unmeasured sites.
pub fn persistency_random_certificate<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    trials: usize,
    rng: &mut R,
) -> Result<usize> {
    if m + 1 >= n {
        return domain(format!("need M < n − 1, got M = {m}, n = {n}"));
    }
    let singlet = build_full_singlet(n)?;
    let sites: Vec<usize> = (0..m).collect();
    let remaining: Vec<usize> = (m..n).collect();
    let mut best = usize::MAX;
    for _ in 0..trials {
        let bases: Vec<UnitaryMatrix> = (0..m)
            .map(|_| haar_unitary(n, rng))
            .collect::<Result<_>>()?;
        let mut branches = vec![singlet.clone()];
        for (&site, basis) in sites.iter().zip(&bases) {
            let mut next = Vec::new();
            for state in &branches {
                let probs = outcome_probabilities(state, site, basis)?;
                for (k, &p) in probs.iter().enumerate() {
                    if p >= MIN_PROBABILITY {
                        next.push(measure_site_forced(state, site, basis, k)?.collapsed);
                    }
                }
            }
            branches = next;
        }
        for state in &branches {
            best = best.min(min_schmidt_rank(state, &remaining, RANK_TOL)?);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceState {
    Singlet,
    Ghz,
    W,
    Cluster,
}

impl std::str::FromStr for ReferenceState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "singlet" => Ok(Self::Singlet),
            "ghz" => Ok(Self::Ghz),
            "w" => Ok(Self::W),
            "cluster" => Ok(Self::Cluster),
            other => Err(Error::Validation(format!("unknown state {other:?}"))),
        }
    }
}

impl ReferenceState {
    pub fn build(self, n: usize) -> Result<StateVector> {
        match self {
            Self::Singlet => build_full_singlet(n),
            Self::Ghz => ghz_state(n),
            Self::W => w_state(n),
            Self::Cluster => cluster_state(n),
        }
    }

    /// Textbook persistency of the state on `n` parties.
    pub fn known_persistency(self, n: usize) -> usize {
        match self {
            Self::Singlet | Self::W => n - 1,
            Self::Ghz => 1,
            Self::Cluster => n / 2,
        }
    }
}

/// `(|0…0⟩ + |1…1⟩)/√2`.
pub fn ghz_state(n: usize) -> Result<StateVector> {
    if n < 2 {
        return domain("GHZ needs at least two qubits");
    }
    let mut s = StateVector::zeros(n, 2)?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let last = s.dim() - 1;
    s.amplitudes_mut()[0] = Complex64::new(h, 0.0);
    s.amplitudes_mut()[last] = Complex64::new(h, 0.0);
    Ok(s)
}

/// Equal superposition of the single-excitation states.
pub fn w_state(n: usize) -> Result<StateVector> {
    if n < 2 {
        return domain("W needs at least two qubits");
    }
    let mut s = StateVector::zeros(n, 2)?;
    let a = 1.0 / (n as f64).sqrt();
    for k in 0..n {
        s.amplitudes_mut()[1 << k] = Complex64::new(a, 0.0);
    }
    Ok(s)
}

/// Linear cluster state `∏ CZ_{k,k+1} |+⟩^{⊗n}`.
pub fn cluster_state(n: usize) -> Result<StateVector> {
    if n < 2 {
        return domain("cluster needs at least two qubits");
    }
    let mut s = StateVector::zeros(n, 2)?;
    let a = 1.0 / (s.dim() as f64).sqrt();
    for idx in 0..s.dim() {
        let bonds = (0..n - 1)
            .filter(|&k| (idx >> k) & 1 == 1 && (idx >> (k + 1)) & 1 == 1)
            .count();
        let sign = if bonds % 2 == 0 { 1.0 } else { -1.0 };
        s.amplitudes_mut()[idx] = Complex64::new(sign * a, 0.0);
    }
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct PersistencyTrial {
    pub measurements: usize,
    /// FNV-1a digest of the sampled bases.
    pub bases_digest: String,
    pub min_rank: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PersistencyReport {
    pub upper_bound: usize,
    /// Smallest number of measurements at which any sampled sequence (random
    /// cascade or dictionary strategy) disentangled the state.
    pub certified_floor: usize,
    pub trials: usize,
    pub details: Vec<PersistencyTrial>,
}

fn digest_bases(bases: &[UnitaryMatrix]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bases {
        for z in b.matrix().iter() {
            for bits in [z.re.to_bits(), z.im.to_bits()] {
                for byte in bits.to_le_bytes() {
                    h ^= byte as u64;
                    h = h.wrapping_mul(0x0000_0100_0000_01b3);
                }
            }
        }
    }
    format!("{h:016x}")
}

/// Dictionary upper bound plus random arbitrary-basis cascades for every
/// number of measurements below it.
pub fn persistency_report<R: Rng + ?Sized>(
    state: &StateVector,
    dictionary: &[Vec<UnitaryMatrix>],
    budget: usize,
    trials: usize,
    rng: &mut R,
) -> Result<PersistencyReport> {
    let upper_bound = persistency_upper_bound(state, dictionary, budget)?;
    let n = state.num_sites();
    let mut details = Vec::new();
    let mut certified_floor = upper_bound;
    let all: Vec<usize> = (0..n).collect();
    for m in 0..upper_bound {
        let mut disentangled = false;
        for _ in 0..trials {
            let (final_state, bases) = if m == 0 {
                (state.clone(), Vec::new())
            } else {
                let rec = cascade_on(
                    state,
                    &(0..m).collect::<Vec<_>>(),
                    Policy::ArbitraryRandom,
                    rng,
                )?;
                let bases: Vec<UnitaryMatrix> = rec.steps.iter().map(|s| s.basis.clone()).collect();
                (rec.final_state, bases)
            };
            let min_rank = min_schmidt_rank(&final_state, &all, RANK_TOL)?;
            disentangled |= min_rank == 1 && is_fully_product(&final_state, RANK_TOL)?;
            details.push(PersistencyTrial {
                measurements: m,
                bases_digest: digest_bases(&bases),
                min_rank,
            });
        }
        if disentangled {
            certified_floor = certified_floor.min(m);
        }
    }
    Ok(PersistencyReport {
        upper_bound,
        certified_floor,
        trials,
        details,
    })
}
