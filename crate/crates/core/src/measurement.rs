//! Projective measurements in rotated local bases.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::qudit::{unitarity_deviation, StateVector, UnitaryMatrix};
use crate::singlet::{build_full_singlet, build_singlet, SingletSpec};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Outcomes whose probability falls below this are treated as impossible.
pub const MIN_PROBABILITY: f64 = 1e-14;

/// Householder QR of a square complex matrix: `a = q r` with `q` unitary and
/// `r` upper triangular.
pub fn householder_qr(a: &DMatrix<Complex64>) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let n = a.nrows();
    let mut r = a.clone();
    let mut q = DMatrix::<Complex64>::identity(n, n);
    for k in 0..n.saturating_sub(1) {
        let xnorm = (k..n).map(|i| r[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let x0 = r[(k, k)];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { ONE };
        let alpha = -phase * xnorm;
        let mut v: Vec<Complex64> = (k..n).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|z| *z /= vnorm);
        // r ← (1 − 2vv†) r on rows k..n
        for col in k..n {
            let s: Complex64 = v
                .iter()
                .enumerate()
                .map(|(t, vt)| vt.conj() * r[(k + t, col)])
                .sum();
            for (t, vt) in v.iter().enumerate() {
                r[(k + t, col)] -= vt * s * 2.0;
            }
        }
        // q ← q (1 − 2vv†) on columns k..n
        for row in 0..n {
            let s: Complex64 = v
                .iter()
                .enumerate()
                .map(|(t, vt)| q[(row, k + t)] * vt)
                .sum();
            for (t, vt) in v.iter().enumerate() {
                q[(row, k + t)] -= s * vt.conj() * 2.0;
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            r[(i, j)] = ZERO;
        }
    }
    (q, r)
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<UnitaryMatrix> {
    if dim == 0 {
        return domain("unitary dimension must be positive");
    }
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    });
    let (mut q, r) = householder_qr(&g);
    for j in 0..dim {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            ONE
        };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    Ok(UnitaryMatrix::new_unchecked(q))
}

#[derive(Debug, Clone)]
pub struct Measurement {
    pub outcome: usize,
    pub probability: f64,
    pub collapsed: StateVector,
}

fn check_basis(state: &StateVector, site: usize, basis: &UnitaryMatrix) -> Result<()> {
    if basis.dim() != state.local_dim() {
        return domain(format!(
            "basis of dimension {} on qudits of dimension {}",
            basis.dim(),
            state.local_dim()
        ));
    }
    if site >= state.num_sites() {
        return domain(format!("site {site} out of range"));
    }
    Ok(())
}

/// Coefficients `⟨β_k|_site ψ⟩` for every `k`, each a state of the other
/// sites laid out in the original index order with the site's digit fixed to 0.
fn project_all(state: &StateVector, site: usize, basis: &UnitaryMatrix) -> Vec<Vec<Complex64>> {
    let d = state.local_dim();
    let stride = state.stride(site);
    let outer = state.dim() / (stride * d);
    let m = basis.matrix();
    let amps = state.amplitudes();
    let mut out = vec![vec![ZERO; outer * stride]; d];
    for hi in 0..outer {
        for lo in 0..stride {
            let base = hi * stride * d + lo;
            for (k, slot) in out.iter_mut().enumerate() {
                let mut acc = ZERO;
                for a in 0..d {
                    acc += m[(a, k)].conj() * amps[base + a * stride];
                }
                slot[hi * stride + lo] = acc;
            }
        }
    }
    out
}

/// Born probabilities of each outcome when `site` is measured in `basis`.
pub fn outcome_probabilities(
    state: &StateVector,
    site: usize,
    basis: &UnitaryMatrix,
) -> Result<Vec<f64>> {
    check_basis(state, site, basis)?;
    Ok(project_all(state, site, basis)
        .iter()
        .map(|c| c.iter().map(|z| z.norm_sqr()).sum())
        .collect())
}

/// Inverse-CDF sampling for `r ∈ [0, 1)`: the first outcome whose cumulative
/// probability exceeds `r`. Rounding leftovers fall to the last outcome with
/// non-negligible probability.
pub fn sample_outcome(probabilities: &[f64], r: f64) -> Option<usize> {
    let mut cumulative = 0.0;
    let mut last = None;
    for (k, &p) in probabilities.iter().enumerate() {
        if p < MIN_PROBABILITY {
            continue;
        }
        cumulative += p;
        last = Some(k);
        if r < cumulative {
            return Some(k);
        }
    }
    last
}

fn collapse(
    state: &StateVector,
    site: usize,
    basis: &UnitaryMatrix,
    outcome: usize,
    coeffs: &[Complex64],
    probability: f64,
) -> Result<StateVector> {
    let d = state.local_dim();
    let stride = state.stride(site);
    let outer = state.dim() / (stride * d);
    let scale = 1.0 / probability.sqrt();
    let mut collapsed = StateVector::zeros(state.num_sites(), d)?;
    let amps = collapsed.amplitudes_mut();
    for hi in 0..outer {
        for lo in 0..stride {
            let c = coeffs[hi * stride + lo] * scale;
            let base = hi * stride * d + lo;
            for a in 0..d {
                amps[base + a * stride] = basis.matrix()[(a, outcome)] * c;
            }
        }
    }
    Ok(collapsed)
}

/// Von Neumann measurement of `site` in the basis given by the columns of
/// `basis`, with the outcome drawn from `rng`.
pub fn measure_site<R: Rng + ?Sized>(
    state: &StateVector,
    site: usize,
    basis: &UnitaryMatrix,
    rng: &mut R,
) -> Result<Measurement> {
    check_basis(state, site, basis)?;
    let coeffs = project_all(state, site, basis);
    let probs: Vec<f64> = coeffs
        .iter()
        .map(|c| c.iter().map(|z| z.norm_sqr()).sum())
        .collect();
    let r: f64 = rng.random();
    let outcome = sample_outcome(&probs, r)
        .ok_or_else(|| Error::Numerical("every outcome has vanishing probability".into()))?;
    let probability = probs[outcome];
    let collapsed = collapse(state, site, basis, outcome, &coeffs[outcome], probability)?;
    Ok(Measurement {
        outcome,
        probability,
        collapsed,
    })
}

/// Post-select `outcome` instead of sampling it.
pub fn measure_site_forced(
    state: &StateVector,
    site: usize,
    basis: &UnitaryMatrix,
    outcome: usize,
) -> Result<Measurement> {
    check_basis(state, site, basis)?;
    if outcome >= basis.dim() {
        return domain(format!("outcome {outcome} out of range"));
    }
    let coeffs = project_all(state, site, basis);
    let probability: f64 = coeffs[outcome].iter().map(|z| z.norm_sqr()).sum();
    if probability < MIN_PROBABILITY {
        return Err(Error::Numerical(format!(
            "outcome {outcome} has probability {probability:e}"
        )));
    }
    let collapsed = collapse(state, site, basis, outcome, &coeffs[outcome], probability)?;
    Ok(Measurement {
        outcome,
        probability,
        collapsed,
    })
}

/// Measure site 0 of the `n`-singlet in basis `u`, keep `outcome`, and return
/// the fidelity of the other `n − 1` qudits with the `(n − 1)`-singlet written
/// in the same basis with level `outcome` left out.
pub fn theorem2_check(n: usize, u: &UnitaryMatrix, outcome: usize) -> Result<f64> {
    if u.dim() != n {
        return domain("basis dimension must equal n");
    }
    let singlet = build_full_singlet(n)?;
    let m = measure_site_forced(&singlet, 0, u, outcome)?;
    let mut rest = m.collapsed.contract_site(0, &u.column(outcome))?;
    rest.normalize()?;
    let expected = build_singlet(&SingletSpec::new(n - 1, u.clone(), &[outcome])?)?;
    crate::qudit::fidelity_up_to_phase(&rest, &expected)
}

/// `previous · W`, where `W` acts as `v` on the levels not in
/// `measured_levels` (in ascending order) and as the identity on the rest.
pub fn restricted_basis(
    previous: &UnitaryMatrix,
    measured_levels: &[usize],
    v: &UnitaryMatrix,
) -> Result<UnitaryMatrix> {
    let d = previous.dim();
    if measured_levels.iter().any(|&l| l >= d) {
        return domain("measured level out of range");
    }
    let free: Vec<usize> = (0..d).filter(|l| !measured_levels.contains(l)).collect();
    if v.dim() != free.len() {
        return domain(format!(
            "restricted unitary must have dimension {}, got {}",
            free.len(),
            v.dim()
        ));
    }
    let mut w = DMatrix::<Complex64>::identity(d, d);
    for (a, &la) in free.iter().enumerate() {
        for (b, &lb) in free.iter().enumerate() {
            w[(la, lb)] = v.matrix()[(a, b)];
        }
    }
    Ok(UnitaryMatrix::new_unchecked(previous.matrix() * w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Each basis differs from the previous one only on the levels not yet observed.
    RestrictedRandom,
    /// Computational basis at every step.
    Fixed,
    /// Independent Haar basis at every step.
    ArbitraryRandom,
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "restricted" | "restricted_random" => Ok(Policy::RestrictedRandom),
            "fixed" => Ok(Policy::Fixed),
            "arbitrary" | "arbitrary_random" => Ok(Policy::ArbitraryRandom),
            other => Err(Error::Validation(format!("unknown policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MeasurementStep {
    pub site: usize,
    pub basis: UnitaryMatrix,
    pub outcome: usize,
    pub probability: f64,
}

#[derive(Debug, Clone)]
pub struct MeasurementRecord {
    pub steps: Vec<MeasurementStep>,
    pub final_state: StateVector,
}

impl MeasurementRecord {
    pub fn measured_sites(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.site).collect()
    }

    pub fn remaining_sites(&self) -> Vec<usize> {
        let measured = self.measured_sites();
        (0..self.final_state.num_sites())
            .filter(|s| !measured.contains(s))
            .collect()
    }

    pub fn outcomes(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.outcome).collect()
    }

    /// State of the unmeasured qudits, obtained by contracting each measured
    /// site with its observed basis vector.
    pub fn remaining_state(&self) -> Result<StateVector> {
        let mut steps: Vec<&MeasurementStep> = self.steps.iter().collect();
        steps.sort_by_key(|s| std::cmp::Reverse(s.site));
        let mut state = self.final_state.clone();
        for step in steps {
            state = state.contract_site(step.site, &step.basis.column(step.outcome))?;
        }
        state.normalize()?;
        Ok(state)
    }

    /// The singlet the unmeasured qudits should share after a restricted
    /// cascade: written in the last basis, with every observed level left out.
    /// With no measurements this is the full singlet.
    pub fn expected_singlet(&self) -> Result<StateVector> {
        let Some(last) = self.steps.last() else {
            return build_full_singlet(self.final_state.num_sites());
        };
        let remaining = self.final_state.num_sites() - self.steps.len();
        build_singlet(&SingletSpec::new(
            remaining,
            last.basis.clone(),
            &self.outcomes(),
        )?)
    }
}

/// Measure the given sites of `state` one after another.
pub fn cascade_on<R: Rng + ?Sized>(
    state: &StateVector,
    sites: &[usize],
    policy: Policy,
    rng: &mut R,
) -> Result<MeasurementRecord> {
    let n = state.num_sites();
    let d = state.local_dim();
    if sites.len() >= n {
        return domain(format!("at most {} of {n} sites may be measured", n - 1));
    }
    for (k, &s) in sites.iter().enumerate() {
        if s >= n {
            return domain(format!("site {s} out of range"));
        }
        if sites[..k].contains(&s) {
            return domain(format!("site {s} measured twice"));
        }
    }
    let mut current = state.clone();
    let mut basis = UnitaryMatrix::identity(d);
    let mut observed: Vec<usize> = Vec::new();
    let mut steps = Vec::with_capacity(sites.len());
    for &site in sites {
        basis = match policy {
            Policy::Fixed => UnitaryMatrix::identity(d),
            Policy::ArbitraryRandom => haar_unitary(d, rng)?,
            Policy::RestrictedRandom => {
                let v = haar_unitary(d - observed.len(), rng)?;
                restricted_basis(&basis, &observed, &v)?
            }
        };
        let m = measure_site(&current, site, &basis, rng)?;
        observed.push(m.outcome);
        steps.push(MeasurementStep {
            site,
            basis: basis.clone(),
            outcome: m.outcome,
            probability: m.probability,
        });
        current = m.collapsed;
    }
    Ok(MeasurementRecord {
        steps,
        final_state: current,
    })
}

/// Cascade on the `n`-singlet.
pub fn cascade<R: Rng + ?Sized>(
    n: usize,
    sites: &[usize],
    policy: Policy,
    rng: &mut R,
) -> Result<MeasurementRecord> {
    if sites.len() >= n {
        return domain(format!("M = {} must be below n = {n}", sites.len()));
    }
    cascade_on(&build_full_singlet(n)?, sites, policy, rng)
}

/// A unitary acting on two levels `p < q` only.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLevelFactor {
    pub levels: (usize, usize),
    pub block: Matrix2<Complex64>,
}

impl TwoLevelFactor {
    pub fn embed(&self, dim: usize) -> DMatrix<Complex64> {
        let (p, q) = self.levels;
        let mut m = DMatrix::identity(dim, dim);
        m[(p, p)] = self.block[(0, 0)];
        m[(p, q)] = self.block[(0, 1)];
        m[(q, p)] = self.block[(1, 0)];
        m[(q, q)] = self.block[(1, 1)];
        m
    }
}

/// `U = F_1 F_2 ⋯ F_k · diag(phases)`.
#[derive(Debug, Clone)]
pub struct ReckDecomposition {
    pub factors: Vec<TwoLevelFactor>,
    pub phases: Vec<Complex64>,
}

impl ReckDecomposition {
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let d = self.phases.len();
        let mut m = DMatrix::<Complex64>::identity(d, d);
        for f in &self.factors {
            m *= f.embed(d);
        }
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.phases));
        m * diag
    }
}

/// Entries smaller than this are already eliminated.
const RECK_SKIP: f64 = 1e-14;

/// Two-level factorization: column by column, the entries below the diagonal
/// are rotated into the diagonal with Givens rotations on levels `(c, r)`.
/// Rotations whose target entry already vanishes are skipped, so at most
/// `d(d−1)/2` factors are produced.
pub fn reck_factorize(u: &DMatrix<Complex64>) -> Result<ReckDecomposition> {
    let d = u.nrows();
    if d == 0 || d != u.ncols() {
        return Err(Error::Validation(
            "reck_factorize needs a square matrix".into(),
        ));
    }
    let dev = unitarity_deviation(u);
    if dev.is_nan() || dev > UnitaryMatrix::TOLERANCE {
        return Err(Error::Validation(format!(
            "matrix is not unitary (deviation {dev:e})"
        )));
    }
    let mut w = u.clone();
    let mut factors = Vec::new();
    for c in 0..d {
        for r in c + 1..d {
            let b = w[(r, c)];
            if b.norm() <= RECK_SKIP {
                continue;
            }
            let a = w[(c, c)];
            let rho = (a.norm_sqr() + b.norm_sqr()).sqrt();
            let g = Matrix2::new(a.conj() / rho, b.conj() / rho, -b / rho, a / rho);
            for col in 0..d {
                let (xc, xr) = (w[(c, col)], w[(r, col)]);
                w[(c, col)] = g[(0, 0)] * xc + g[(0, 1)] * xr;
                w[(r, col)] = g[(1, 0)] * xc + g[(1, 1)] * xr;
            }
            factors.push(TwoLevelFactor {
                levels: (c, r),
                block: g.adjoint(),
            });
        }
    }
    let phases = (0..d).map(|i| w[(i, i)]).collect();
    Ok(ReckDecomposition { factors, phases })
}

/// Whether every factor acts entirely inside `singlet_levels` or entirely
/// outside it.
pub fn is_subspace_compatible(factors: &[TwoLevelFactor], singlet_levels: &[usize]) -> bool {
    factors.iter().all(|f| {
        let (p, q) = f.levels;
        singlet_levels.contains(&p) == singlet_levels.contains(&q)
    })
}
