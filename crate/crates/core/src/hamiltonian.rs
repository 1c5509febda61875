//! The permutation Hamiltonian `H = Σ_{(i,j)∈E} J_ij P_ij` and its low spectrum.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::lanczos::{lowest_eigenpairs, LanczosOptions};
use crate::network::QuditNetwork;
use crate::qudit::{
    checked_dim, swap_antisymmetry_deviation, swapped_index, StateVector, MAX_DENSE_DIM,
};

/// Hilbert-space dimension up to which the spectrum is obtained by dense
/// diagonalization (of each level-occupation block); above it Lanczos runs on
/// the implicit operator.
pub const DENSE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Dense,
    Lanczos,
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// Ascending, with multiplicity.
    pub lowest_energies: Vec<f64>,
    pub ground_state: StateVector,
    pub degeneracy: usize,
    /// `E_degeneracy − E_0`; zero when every returned level is degenerate with E_0.
    pub gap: f64,
    pub solver: SolverKind,
}

/// Flat-index strides and couplings of each edge.
struct EdgeKernel {
    d: usize,
    terms: Vec<(usize, usize, f64)>,
}

impl EdgeKernel {
    fn new(net: &QuditNetwork, d: usize) -> Self {
        let n = net.num_vertices();
        let stride = |s: usize| d.pow((n - 1 - s) as u32);
        let terms = net
            .edges()
            .iter()
            .map(|e| (stride(e.i), stride(e.j), e.coupling))
            .collect();
        Self { d, terms }
    }

    fn apply_real(&self, x: &[f64], y: &mut [f64]) {
        for (idx, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(si, sj, coupling) in &self.terms {
                acc += coupling * x[swapped_index(idx, si, sj, self.d)];
            }
            *out = acc;
        }
    }
}

fn check_shape(net: &QuditNetwork, d: usize, state: &StateVector) -> Result<()> {
    if state.num_sites() != net.num_vertices() || state.local_dim() != d {
        return domain(format!(
            "state has {} sites of dimension {}, network needs {} of dimension {d}",
            state.num_sites(),
            state.local_dim(),
            net.num_vertices()
        ));
    }
    Ok(())
}

/// `H|ψ⟩` without materializing `H`.
pub fn hamiltonian_matvec(
    net: &QuditNetwork,
    d: usize,
    state: &StateVector,
) -> Result<StateVector> {
    check_shape(net, d, state)?;
    let kernel = EdgeKernel::new(net, d);
    let amps = state.amplitudes();
    let mut out = StateVector::zeros(state.num_sites(), d)?;
    for (idx, slot) in out.amplitudes_mut().iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(si, sj, coupling) in &kernel.terms {
            acc += amps[swapped_index(idx, si, sj, d)] * coupling;
        }
        *slot = acc;
    }
    Ok(out)
}

/// `⟨ψ|H|ψ⟩` for a normalized state.
pub fn energy(net: &QuditNetwork, d: usize, state: &StateVector) -> Result<f64> {
    let h = hamiltonian_matvec(net, d, state)?;
    Ok(state.inner(&h)?.re)
}

/// Low spectrum of the permutation Hamiltonian on a connected network.
///
/// `k` levels are returned. `tol` is relative to `Σ J`. Levels within
/// `max(10·tol, 1e-8·Σ J)` of the lowest are counted as degenerate with it.
pub fn ground_state(net: &QuditNetwork, d: usize, k: usize, tol: f64) -> Result<SpectrumResult> {
    if !net.is_connected() {
        return Err(Error::Precondition(
            "network is disconnected; the ground state is not unique".into(),
        ));
    }
    if d < 2 || k < 2 {
        return domain("need d >= 2 and k >= 2");
    }
    if tol.is_nan() || tol <= 0.0 {
        return domain("tolerance must be positive");
    }
    let n = net.num_vertices();
    let dim = checked_dim(d, n)?;
    if dim > MAX_DENSE_DIM {
        return domain(format!("{d}^{n} = {dim} exceeds the dense state limit"));
    }
    let scale = net
        .edges()
        .iter()
        .map(|e| e.coupling.abs())
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let k = k.min(dim);

    let (levels, ground, solver) = if dim <= DENSE_LIMIT {
        let (levels, ground) = dense_blocks(net, d, k)?;
        (levels, ground, SolverKind::Dense)
    } else {
        let kernel = EdgeKernel::new(net, d);
        let opts = LanczosOptions {
            tol: tol * scale,
            ..LanczosOptions::default()
        };
        let pairs = lowest_eigenpairs(dim, k, |x, y| kernel.apply_real(x, y), &opts)?;
        let levels = pairs.iter().map(|p| p.value).collect();
        let ground = pairs[0]
            .vector
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect();
        (levels, ground, SolverKind::Lanczos)
    };

    let mut ground_state = StateVector::from_amplitudes(n, d, ground)?;
    ground_state.normalize()?;
    let threshold = (10.0 * tol).max(1e-8 * scale);
    let e0 = levels[0];
    let degeneracy = levels.iter().take_while(|&&e| e - e0 <= threshold).count();
    let gap = levels.get(degeneracy).map_or(0.0, |e| e - e0);
    Ok(SpectrumResult {
        lowest_energies: levels,
        ground_state,
        degeneracy,
        gap,
        solver,
    })
}

/// `P_ij` conserves how many sites occupy each level, so `H` is block
/// diagonal in those occupation sectors. Each block is diagonalized densely.
fn dense_blocks(net: &QuditNetwork, d: usize, k: usize) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let n = net.num_vertices();
    let dim = checked_dim(d, n)?;
    let kernel = EdgeKernel::new(net, d);

    let mut sectors: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
    for idx in 0..dim {
        let mut counts = vec![0u8; d];
        let mut rest = idx;
        for _ in 0..n {
            counts[rest % d] += 1;
            rest /= d;
        }
        sectors.entry(counts).or_default().push(idx);
    }

    // (energy, sector ordinal, column) for every eigenpair
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    let mut vectors: Vec<(Vec<usize>, DMatrix<f64>)> = Vec::with_capacity(sectors.len());
    for (ordinal, indices) in sectors.into_values().enumerate() {
        let size = indices.len();
        let mut block = DMatrix::<f64>::zeros(size, size);
        for (col, &idx) in indices.iter().enumerate() {
            for &(si, sj, coupling) in &kernel.terms {
                let target = swapped_index(idx, si, sj, d);
                let row = indices
                    .binary_search(&target)
                    .expect("swap stays in its sector");
                block[(row, col)] += coupling;
            }
        }
        let eig = SymmetricEigen::new(block);
        candidates.extend(
            eig.eigenvalues
                .iter()
                .enumerate()
                .map(|(c, &e)| (e, ordinal, c)),
        );
        vectors.push((indices, eig.eigenvectors));
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let levels: Vec<f64> = candidates.iter().take(k).map(|c| c.0).collect();
    let (_, ordinal, col) = candidates[0];
    let (indices, vecs) = &vectors[ordinal];
    let mut ground = vec![Complex64::new(0.0, 0.0); dim];
    for (row, &idx) in indices.iter().enumerate() {
        ground[idx] = Complex64::new(vecs[(row, col)], 0.0);
    }
    Ok((levels, ground))
}

/// `max_{i<j} ‖P_ij|ψ⟩ + |ψ⟩‖` over all pairs of sites, edges or not.
pub fn verify_all_pair_eigenstate(state: &StateVector, net: &QuditNetwork) -> Result<f64> {
    if state.num_sites() != net.num_vertices() {
        return domain("state and network disagree on the number of sites");
    }
    let n = state.num_sites();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max(swap_antisymmetry_deviation(state, i, j)?);
        }
    }
    Ok(worst)
}

/// `⟨ψ|P_ij|ψ⟩` for each edge of the network.
pub fn edge_swap_expectations(state: &StateVector, net: &QuditNetwork) -> Result<Vec<f64>> {
    net.edges()
        .iter()
        .map(|e| {
            let swapped = crate::qudit::apply_swap(state, e.i, e.j)?;
            Ok(state.inner(&swapped)?.re)
        })
        .collect()
}
