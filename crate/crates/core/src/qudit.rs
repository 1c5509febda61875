//! State algebra on tensor products of `d`-level systems.
//!
//! Amplitudes are stored densely, indexed by base-`d` digit strings with site 0
//! as the most significant digit. Sites are 0-based throughout the library;
//! command-line and JSON surfaces translate from 1-based labels.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};

/// Coefficients at or below this value do not count toward a Schmidt rank.
pub const RANK_TOL: f64 = 1e-10;

/// Largest dense state we are willing to allocate.
pub const MAX_DENSE_DIM: usize = 1 << 20;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Flat index of a digit string, site 0 most significant.
pub fn encode_index(digits: &[usize], d: usize) -> Result<usize> {
    if digits.is_empty() {
        return domain("digit list must be non-empty");
    }
    if d == 0 {
        return domain("local dimension must be positive");
    }
    let mut idx = 0usize;
    for (k, &digit) in digits.iter().enumerate() {
        if digit >= d {
            return domain(format!(
                "digit {digit} at position {k} out of range for d = {d}"
            ));
        }
        idx = idx * d + digit;
    }
    Ok(idx)
}

/// Inverse of [`encode_index`] for a string of `n` digits.
pub fn decode_index(mut index: usize, d: usize, n: usize) -> Result<Vec<usize>> {
    if n == 0 || d == 0 {
        return domain("need n >= 1 and d >= 1");
    }
    let total = checked_dim(d, n)?;
    if index >= total {
        return domain(format!(
            "index {index} out of range for {n} sites of dimension {d}"
        ));
    }
    let mut digits = vec![0; n];
    for slot in digits.iter_mut().rev() {
        *slot = index % d;
        index /= d;
    }
    Ok(digits)
}

pub(crate) fn checked_dim(d: usize, n: usize) -> Result<usize> {
    let mut total = 1usize;
    for _ in 0..n {
        total = total
            .checked_mul(d)
            .ok_or_else(|| Error::Domain(format!("{d}^{n} overflows")))?;
    }
    Ok(total)
}

/// Dense pure state of `num_sites` qudits of dimension `local_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_sites: usize,
    local_dim: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn zeros(num_sites: usize, local_dim: usize) -> Result<Self> {
        if num_sites == 0 || local_dim == 0 {
            return domain("need at least one site and a positive local dimension");
        }
        let dim = checked_dim(local_dim, num_sites)?;
        if dim > MAX_DENSE_DIM {
            return domain(format!(
                "{local_dim}^{num_sites} = {dim} exceeds the dense limit {MAX_DENSE_DIM}"
            ));
        }
        Ok(Self {
            num_sites,
            local_dim,
            amplitudes: vec![ZERO; dim],
        })
    }

    pub fn from_amplitudes(
        num_sites: usize,
        local_dim: usize,
        amplitudes: Vec<Complex64>,
    ) -> Result<Self> {
        let mut s = Self::zeros(num_sites, local_dim)?;
        if amplitudes.len() != s.amplitudes.len() {
            return domain(format!(
                "expected {} amplitudes, got {}",
                s.amplitudes.len(),
                amplitudes.len()
            ));
        }
        s.amplitudes = amplitudes;
        Ok(s)
    }

    /// Computational basis state `|digits⟩`.
    pub fn basis_state(digits: &[usize], local_dim: usize) -> Result<Self> {
        let mut s = Self::zeros(digits.len(), local_dim)?;
        let idx = encode_index(digits, local_dim)?;
        s.amplitudes[idx] = ONE;
        Ok(s)
    }

    /// Tensor product of single-site vectors, site 0 first.
    pub fn product(factors: &[Vec<Complex64>]) -> Result<Self> {
        let d = factors.first().map(Vec::len).unwrap_or(0);
        if factors.iter().any(|f| f.len() != d) {
            return domain("all product factors must share one local dimension");
        }
        let mut s = Self::zeros(factors.len(), d)?;
        for (idx, amp) in s.amplitudes.iter_mut().enumerate() {
            let mut rest = idx;
            let mut value = ONE;
            for f in factors.iter().rev() {
                value *= f[rest % d];
                rest /= d;
            }
            *amp = value;
        }
        Ok(s)
    }

    /// Normalized state with i.i.d. complex Gaussian amplitudes.
    pub fn random<R: Rng + ?Sized>(
        num_sites: usize,
        local_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut s = Self::zeros(num_sites, local_dim)?;
        for a in s.amplitudes.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *a = Complex64::new(re, im);
        }
        s.normalize()?;
        Ok(s)
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    /// Place value of `site` in the flat index.
    pub fn stride(&self, site: usize) -> usize {
        self.local_dim.pow((self.num_sites - 1 - site) as u32)
    }

    /// Level held by `site` in basis state `index`.
    #[inline]
    pub fn digit(&self, index: usize, site: usize) -> usize {
        (index / self.stride(site)) % self.local_dim
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn normalize(&mut self) -> Result<f64> {
        let n = self.norm();
        if !n.is_finite() || n <= 0.0 {
            return Err(Error::Numerical(format!(
                "cannot normalize state of norm {n}"
            )));
        }
        let inv = 1.0 / n;
        for a in self.amplitudes.iter_mut() {
            *a *= inv;
        }
        Ok(n)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        self.check_same_shape(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn scaled(&self, factor: Complex64) -> StateVector {
        let mut out = self.clone();
        for a in out.amplitudes.iter_mut() {
            *a *= factor;
        }
        out
    }

    /// Euclidean distance `‖self − other‖`.
    pub fn distance(&self, other: &StateVector) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// `min_θ ‖self − e^{iθ} other‖`, evaluated by aligning the phase of the
    /// overlap and subtracting directly (no cancellation in `2 − 2|⟨a|b⟩|`).
    pub fn distance_up_to_phase(&self, other: &StateVector) -> Result<f64> {
        let overlap = other.inner(self)?;
        let phase = if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            ONE
        };
        self.distance(&other.scaled(phase))
    }

    pub(crate) fn check_same_shape(&self, other: &StateVector) -> Result<()> {
        if self.num_sites != other.num_sites || self.local_dim != other.local_dim {
            return domain(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.num_sites, self.local_dim, other.num_sites, other.local_dim
            ));
        }
        Ok(())
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.num_sites {
            return domain(format!(
                "site {site} out of range for {} sites",
                self.num_sites
            ));
        }
        Ok(())
    }

    /// Contract `site` with `⟨vector|`, returning the (unnormalized) state of the
    /// other sites in their original order. Requires at least two sites.
    pub fn contract_site(&self, site: usize, vector: &[Complex64]) -> Result<StateVector> {
        self.check_site(site)?;
        if vector.len() != self.local_dim {
            return domain("contraction vector has the wrong dimension");
        }
        if self.num_sites < 2 {
            return domain("cannot contract the only site of a state");
        }
        let d = self.local_dim;
        let stride = self.stride(site);
        let outer = self.dim() / (stride * d);
        let mut out = StateVector::zeros(self.num_sites - 1, d)?;
        for hi in 0..outer {
            for lo in 0..stride {
                let base = hi * stride * d + lo;
                let mut acc = ZERO;
                for (level, v) in vector.iter().enumerate() {
                    acc += v.conj() * self.amplitudes[base + level * stride];
                }
                out.amplitudes[hi * stride + lo] = acc;
            }
        }
        Ok(out)
    }
}

/// Square unitary matrix; column `i` is the basis vector `U|i⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix(DMatrix<Complex64>);

impl UnitaryMatrix {
    pub const TOLERANCE: f64 = 1e-10;

    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.nrows() != matrix.ncols() {
            return Err(Error::Validation(format!(
                "unitary must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let dev = unitarity_deviation(&matrix);
        if dev.is_nan() || dev > Self::TOLERANCE {
            return Err(Error::Validation(format!(
                "matrix is not unitary (max |U†U − 1| = {dev:e})"
            )));
        }
        Ok(Self(matrix))
    }

    pub(crate) fn new_unchecked(matrix: DMatrix<Complex64>) -> Self {
        Self(matrix)
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    /// Discrete Fourier transform `F_{jk} = ω^{jk}/√d`.
    pub fn fourier(dim: usize) -> Self {
        let scale = 1.0 / (dim as f64).sqrt();
        let m = DMatrix::from_fn(dim, dim, |j, k| {
            let angle = 2.0 * std::f64::consts::PI * ((j * k) % dim) as f64 / dim as f64;
            Complex64::from_polar(scale, angle)
        });
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn column(&self, i: usize) -> Vec<Complex64> {
        self.0.column(i).iter().copied().collect()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn compose(&self, right: &UnitaryMatrix) -> Result<Self> {
        if self.dim() != right.dim() {
            return domain("cannot compose unitaries of different dimension");
        }
        Ok(Self(&self.0 * &right.0))
    }

    pub fn deviation(&self) -> f64 {
        unitarity_deviation(&self.0)
    }
}

/// `max_{ij} |(U†U − 1)_{ij}|`.
pub fn unitarity_deviation(m: &DMatrix<Complex64>) -> f64 {
    let g = m.adjoint() * m;
    let mut dev = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { ONE } else { ZERO };
            dev = dev.max((g[(i, j)] - target).norm());
        }
    }
    dev
}

/// Reduced state of a subset of sites.
#[derive(Debug, Clone)]
pub struct DensityMatrix(DMatrix<Complex64>);

impl DensityMatrix {
    pub const TOLERANCE: f64 = 1e-10;

    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        let rho = Self(matrix);
        rho.validate()?;
        Ok(rho)
    }

    fn validate(&self) -> Result<()> {
        let m = &self.0;
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Validation("density matrix must be square".into()));
        }
        let herm = (m - m.adjoint())
            .iter()
            .fold(0.0f64, |acc, z| acc.max(z.norm()));
        if herm > Self::TOLERANCE {
            return Err(Error::Validation(format!(
                "not Hermitian (deviation {herm:e})"
            )));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > Self::TOLERANCE {
            return Err(Error::Validation(format!("trace {tr} differs from 1")));
        }
        if let Some(&min) = self.eigenvalues().last() {
            if min < -Self::TOLERANCE {
                return Err(Error::Validation(format!("negative eigenvalue {min:e}")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn purity(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Eigenvalues in non-increasing order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = SymmetricEigen::new(self.0.clone());
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| b.total_cmp(a));
        vals
    }

    /// `⟨v|ρ|v⟩`.
    pub fn expectation(&self, v: &[Complex64]) -> f64 {
        let mut acc = ZERO;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += v[i].conj() * self.0[(i, j)] * v[j];
            }
        }
        acc.re
    }
}

/// A split of the sites into two non-empty blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bipartition {
    block_a: Vec<usize>,
    block_b: Vec<usize>,
}

impl Bipartition {
    pub fn new(num_sites: usize, block_a: &[usize]) -> Result<Self> {
        let mut a: Vec<usize> = block_a.to_vec();
        a.sort_unstable();
        a.dedup();
        if a.len() != block_a.len() {
            return domain("block contains repeated sites");
        }
        if let Some(&s) = a.iter().find(|&&s| s >= num_sites) {
            return domain(format!("site {s} out of range for {num_sites} sites"));
        }
        if a.is_empty() || a.len() == num_sites {
            return domain("both blocks of a bipartition must be non-empty");
        }
        let b = (0..num_sites).filter(|s| !a.contains(s)).collect();
        Ok(Self {
            block_a: a,
            block_b: b,
        })
    }

    pub fn block_a(&self) -> &[usize] {
        &self.block_a
    }

    pub fn block_b(&self) -> &[usize] {
        &self.block_b
    }

    pub fn swapped(&self) -> Self {
        Self {
            block_a: self.block_b.clone(),
            block_b: self.block_a.clone(),
        }
    }

    pub fn num_sites(&self) -> usize {
        self.block_a.len() + self.block_b.len()
    }
}

/// Apply `u` to one site.
pub fn apply_local_unitary(
    state: &StateVector,
    site: usize,
    u: &UnitaryMatrix,
) -> Result<StateVector> {
    state.check_site(site)?;
    let d = state.local_dim;
    if u.dim() != d {
        return domain(format!(
            "unitary of dimension {} on qudits of dimension {d}",
            u.dim()
        ));
    }
    let stride = state.stride(site);
    let outer = state.dim() / (stride * d);
    let m = u.matrix();
    let mut out = state.clone();
    let mut column = vec![ZERO; d];
    for hi in 0..outer {
        for lo in 0..stride {
            let base = hi * stride * d + lo;
            for (b, slot) in column.iter_mut().enumerate() {
                *slot = state.amplitudes[base + b * stride];
            }
            for a in 0..d {
                let mut acc = ZERO;
                for (b, c) in column.iter().enumerate() {
                    acc += m[(a, b)] * c;
                }
                out.amplitudes[base + a * stride] = acc;
            }
        }
    }
    Ok(out)
}

/// `U^{⊗n}` applied site by site.
pub fn apply_uniform_unitary(state: &StateVector, u: &UnitaryMatrix) -> Result<StateVector> {
    let mut out = state.clone();
    for site in 0..state.num_sites {
        out = apply_local_unitary(&out, site, u)?;
    }
    Ok(out)
}

/// Index reached from `idx` by exchanging the levels of the two sites.
#[inline]
pub(crate) fn swapped_index(idx: usize, stride_i: usize, stride_j: usize, d: usize) -> usize {
    let di = (idx / stride_i) % d;
    let dj = (idx / stride_j) % d;
    idx + dj * stride_i + di * stride_j - di * stride_i - dj * stride_j
}

/// The transposition `P_ij` exchanging the states of sites `i` and `j`.
pub fn apply_swap(state: &StateVector, i: usize, j: usize) -> Result<StateVector> {
    state.check_site(i)?;
    state.check_site(j)?;
    if i == j {
        return domain("swap needs two distinct sites");
    }
    let (si, sj, d) = (state.stride(i), state.stride(j), state.local_dim);
    let mut out = state.clone();
    for (idx, slot) in out.amplitudes.iter_mut().enumerate() {
        *slot = state.amplitudes[swapped_index(idx, si, sj, d)];
    }
    Ok(out)
}

/// `‖P_ij|ψ⟩ + |ψ⟩‖`, zero exactly when `ψ` is antisymmetric under the swap.
pub fn swap_antisymmetry_deviation(state: &StateVector, i: usize, j: usize) -> Result<f64> {
    state.check_site(i)?;
    state.check_site(j)?;
    if i == j {
        return domain("swap needs two distinct sites");
    }
    let (si, sj, d) = (state.stride(i), state.stride(j), state.local_dim);
    let sum: f64 = (0..state.dim())
        .map(|idx| {
            (state.amplitudes[idx] + state.amplitudes[swapped_index(idx, si, sj, d)]).norm_sqr()
        })
        .sum();
    Ok(sum.sqrt())
}

/// Amplitudes arranged as a `d^|A| × d^|B|` matrix for the cut.
fn reshape_for_cut(state: &StateVector, cut: &Bipartition) -> Result<DMatrix<Complex64>> {
    if cut.num_sites() != state.num_sites {
        return domain("bipartition does not match the number of sites");
    }
    let d = state.local_dim;
    let rows = checked_dim(d, cut.block_a.len())?;
    let cols = checked_dim(d, cut.block_b.len())?;
    let strides: Vec<usize> = (0..state.num_sites).map(|s| state.stride(s)).collect();
    let mut m = DMatrix::zeros(rows, cols);
    for (idx, amp) in state.amplitudes.iter().enumerate() {
        if *amp == ZERO {
            continue;
        }
        let r = cut
            .block_a
            .iter()
            .fold(0, |acc, &s| acc * d + (idx / strides[s]) % d);
        let c = cut
            .block_b
            .iter()
            .fold(0, |acc, &s| acc * d + (idx / strides[s]) % d);
        m[(r, c)] = *amp;
    }
    Ok(m)
}

/// Reduced density matrix of the `keep` sites (ordered by ascending site).
pub fn partial_trace(state: &StateVector, keep: &[usize]) -> Result<DensityMatrix> {
    let cut = Bipartition::new(state.num_sites, keep)?;
    let m = reshape_for_cut(state, &cut)?;
    DensityMatrix::new(&m * m.adjoint())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtDecomposition {
    /// Non-increasing, non-negative.
    pub coefficients: Vec<f64>,
    pub rank: usize,
}

/// Schmidt coefficients across `cut` via an SVD of the reshaped amplitudes.
pub fn schmidt(
    state: &StateVector,
    cut: &Bipartition,
    rank_tol: f64,
) -> Result<SchmidtDecomposition> {
    let m = reshape_for_cut(state, cut)?;
    let mut coefficients: Vec<f64> = m.singular_values().iter().copied().collect();
    coefficients.sort_by(|a, b| b.total_cmp(a));
    let rank = coefficients.iter().filter(|&&c| c > rank_tol).count();
    Ok(SchmidtDecomposition { coefficients, rank })
}

/// Von Neumann entropy in bits, `−Σ c² log₂ c²`.
pub fn entropy(coefficients: &[f64]) -> f64 {
    let s: f64 = coefficients
        .iter()
        .map(|c| c * c)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum();
    s.max(0.0)
}

/// `|⟨a|b⟩|`, insensitive to a global phase.
pub fn fidelity_up_to_phase(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm())
}
