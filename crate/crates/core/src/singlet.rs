//! Totally antisymmetric states of `n` qudits.
//!
//! A singlet is specified by the local dimension `d ≥ n`, a basis of `C^d`
//! (the columns of a unitary) and the `d − n` basis levels it leaves out. The
//! state is the normalized antisymmetrization of the `n` remaining basis
//! vectors, `(1/√n!) Σ_π sgn(π) |β_{ℓ_π(1)} … β_{ℓ_π(n)}⟩`, with sign `+1` for
//! the occupied levels assigned to sites in ascending order.

use itertools::Itertools;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{domain, Result};
use crate::qudit::{
    apply_local_unitary, apply_uniform_unitary, encode_index, fidelity_up_to_phase, StateVector,
    UnitaryMatrix,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SingletSpec {
    n_parties: usize,
    basis: UnitaryMatrix,
    excluded_levels: Vec<usize>,
}

impl SingletSpec {
    pub fn new(n_parties: usize, basis: UnitaryMatrix, excluded_levels: &[usize]) -> Result<Self> {
        let d = basis.dim();
        if n_parties == 0 {
            return domain("a singlet needs at least one party");
        }
        if n_parties > d {
            return domain(format!(
                "{n_parties} parties cannot be antisymmetrized in dimension {d}"
            ));
        }
        let mut excluded = excluded_levels.to_vec();
        excluded.sort_unstable();
        excluded.dedup();
        if excluded.len() != excluded_levels.len() {
            return domain("excluded levels repeat");
        }
        if let Some(&l) = excluded.iter().find(|&&l| l >= d) {
            return domain(format!("excluded level {l} out of range for d = {d}"));
        }
        if excluded.len() != d - n_parties {
            return domain(format!(
                "need exactly d − n = {} excluded levels, got {}",
                d - n_parties,
                excluded.len()
            ));
        }
        Ok(Self {
            n_parties,
            basis,
            excluded_levels: excluded,
        })
    }

    /// The `n`-singlet of `n` qudits in the computational basis.
    pub fn full(n: usize) -> Result<Self> {
        Self::new(n, UnitaryMatrix::identity(n), &[])
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    pub fn local_dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn basis(&self) -> &UnitaryMatrix {
        &self.basis
    }

    pub fn excluded_levels(&self) -> &[usize] {
        &self.excluded_levels
    }

    /// Levels carried by the singlet, ascending.
    pub fn occupied_levels(&self) -> Vec<usize> {
        (0..self.local_dim())
            .filter(|l| !self.excluded_levels.contains(l))
            .collect()
    }
}

/// Sign of a permutation from its inversion count.
pub fn permutation_sign(perm: &[usize]) -> i32 {
    let inversions = (0..perm.len())
        .flat_map(|i| (i + 1..perm.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| perm[i] > perm[j])
        .count();
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

pub fn build_singlet(spec: &SingletSpec) -> Result<StateVector> {
    let n = spec.n_parties;
    let d = spec.local_dim();
    let levels = spec.occupied_levels();
    let basis = spec.basis.matrix();
    let mut state = StateVector::zeros(n, d)?;

    if *basis == DMatrix::identity(d, d) {
        let amp = 1.0 / factorial(n).sqrt();
        for perm in (0..n).permutations(n) {
            let digits: Vec<usize> = perm.iter().map(|&p| levels[p]).collect();
            let idx = encode_index(&digits, d)?;
            state.amplitudes_mut()[idx] = Complex64::new(amp * permutation_sign(&perm) as f64, 0.0);
        }
        return Ok(state);
    }

    // Slater determinant: ψ(a_1…a_n) = det[β_{ℓ_j}(a_k)]_{k,j} / √n!
    let norm = 1.0 / factorial(n).sqrt();
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for idx in 0..state.dim() {
        let mut rest = idx;
        for k in (0..n).rev() {
            let a = rest % d;
            rest /= d;
            for (j, &l) in levels.iter().enumerate() {
                m[(k, j)] = basis[(a, l)];
            }
        }
        state.amplitudes_mut()[idx] = m.determinant() * norm;
    }
    Ok(state)
}

/// `build_singlet(SingletSpec::full(n))`.
pub fn build_full_singlet(n: usize) -> Result<StateVector> {
    build_singlet(&SingletSpec::full(n)?)
}

/// `1 − |⟨ψ|U^{⊗n}|ψ⟩|`.
pub fn check_rotation_invariance(state: &StateVector, u: &UnitaryMatrix) -> Result<f64> {
    let rotated = apply_uniform_unitary(state, u)?;
    Ok(1.0 - fidelity_up_to_phase(&rotated, state)?)
}

fn prepend_site(first: &[Complex64], rest: &StateVector) -> Result<StateVector> {
    let d = rest.local_dim();
    let mut out = StateVector::zeros(rest.num_sites() + 1, d)?;
    let block = rest.dim();
    for (a, f) in first.iter().enumerate() {
        for (r, amp) in rest.amplitudes().iter().enumerate() {
            out.amplitudes_mut()[a * block + r] = f * amp;
        }
    }
    Ok(out)
}

/// Norm of the difference between the `n`-singlet and its expansion
/// `(1/√n) Σ_i (−1)^i |i⟩ ⊗ |S_{n−1}(levels ≠ i)⟩` (0-based `i`).
pub fn one_site_expansion(n: usize) -> Result<f64> {
    if !(2..=6).contains(&n) {
        return domain("expansion check supports 2 <= n <= 6");
    }
    let direct = build_full_singlet(n)?;
    let mut sum = StateVector::zeros(n, n)?;
    let scale = 1.0 / (n as f64).sqrt();
    for i in 0..n {
        let rest = build_singlet(&SingletSpec::new(n - 1, UnitaryMatrix::identity(n), &[i])?)?;
        let mut ket = vec![Complex64::new(0.0, 0.0); n];
        ket[i] = Complex64::new(1.0, 0.0);
        let term = prepend_site(&ket, &rest)?;
        let sign = if i % 2 == 0 { scale } else { -scale };
        for (acc, t) in sum.amplitudes_mut().iter_mut().zip(term.amplitudes()) {
            *acc += t * sign;
        }
    }
    direct.distance(&sum)
}

/// Phase-aligned distance between `(U ⊗ 1)|S_n⟩` and `(1 ⊗ U†^{⊗n−1})|S_n⟩`.
///
/// The two sides differ by the global phase `det U`, which is divided out.
pub fn agrawal_property_check(n: usize, u: &UnitaryMatrix) -> Result<f64> {
    if u.dim() != n {
        return domain("unitary dimension must equal the number of parties");
    }
    let s = build_full_singlet(n)?;
    let lhs = apply_local_unitary(&s, 0, u)?;
    let dagger = u.adjoint();
    let mut rhs = s;
    for site in 1..n {
        rhs = apply_local_unitary(&rhs, site, &dagger)?;
    }
    lhs.distance_up_to_phase(&rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::verify_all_pair_eigenstate;
    use crate::measurement::haar_unitary;
    use crate::network::{make_topology, Topology};
    use crate::qudit::{partial_trace, swap_antisymmetry_deviation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn qubit_singlet() {
        let s = build_full_singlet(2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for (got, want) in s.amplitudes().iter().zip([c(0.0), c(h), c(-h), c(0.0)]) {
            assert!((got - want).norm() < 1e-15);
        }
    }

    #[test]
    fn three_singlet_levi_civita() {
        let s = build_full_singlet(3).unwrap();
        let a = 1.0 / 6f64.sqrt();
        // ε_{012} = +1, odd permutations negative
        let expected = [
            ([0, 1, 2], 1.0),
            ([1, 2, 0], 1.0),
            ([2, 0, 1], 1.0),
            ([0, 2, 1], -1.0),
            ([2, 1, 0], -1.0),
            ([1, 0, 2], -1.0),
        ];
        for (digits, sign) in expected {
            let idx = encode_index(&digits, 3).unwrap();
            assert!((s.amplitudes()[idx] - c(sign * a)).norm() < 1e-15);
        }
        assert_eq!(s.amplitudes().iter().filter(|z| z.norm() > 0.0).count(), 6);
    }

    #[test]
    fn reduced_qutrit_singlet() {
        let spec = SingletSpec::new(2, UnitaryMatrix::identity(3), &[0]).unwrap();
        let s = build_singlet(&spec).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut expected = StateVector::zeros(2, 3).unwrap();
        expected.amplitudes_mut()[encode_index(&[1, 2], 3).unwrap()] = c(h);
        expected.amplitudes_mut()[encode_index(&[2, 1], 3).unwrap()] = c(-h);
        assert!(s.distance(&expected).unwrap() < 1e-15);
        assert!(SingletSpec::new(2, UnitaryMatrix::identity(3), &[]).is_err());
        assert!(SingletSpec::new(2, UnitaryMatrix::identity(3), &[3]).is_err());
    }

    #[test]
    fn nonzero_count_is_factorial() {
        for n in 1..=6 {
            let s = build_full_singlet(n).unwrap();
            let count = s.amplitudes().iter().filter(|z| z.norm() > 0.0).count();
            assert_eq!(count, (1..=n).product::<usize>());
        }
    }

    #[test]
    fn excluded_levels_carry_no_weight() {
        let u = haar_unitary(5, &mut rng(4)).unwrap();
        let spec = SingletSpec::new(3, u.clone(), &[1, 3]).unwrap();
        let s = build_singlet(&spec).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-12);
        for site in 0..3 {
            let rho = partial_trace(&s, &[site]).unwrap();
            for &l in spec.excluded_levels() {
                assert!(rho.expectation(&u.column(l)).abs() < 1e-12);
            }
        }
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            assert!(swap_antisymmetry_deviation(&s, i, j).unwrap() < 1e-12);
        }
    }

    #[test]
    fn antisymmetric_under_every_pair() {
        for n in 2..=6 {
            let s = build_full_singlet(n).unwrap();
            let net = make_topology(Topology::Chain, n, 1.0, 0).unwrap();
            assert!(verify_all_pair_eigenstate(&s, &net).unwrap() < 1e-12);
        }
    }

    #[test]
    fn rotated_build_matches_rotating_the_build() {
        for n in 2..=5 {
            let u = haar_unitary(n, &mut rng(n as u64)).unwrap();
            let rotated = build_singlet(&SingletSpec::new(n, u.clone(), &[]).unwrap()).unwrap();
            let applied = apply_uniform_unitary(&build_full_singlet(n).unwrap(), &u).unwrap();
            assert!(rotated.distance(&applied).unwrap() < 1e-11);
        }
        let u = haar_unitary(4, &mut rng(77)).unwrap();
        let rotated = build_singlet(&SingletSpec::new(2, u.clone(), &[0, 3]).unwrap()).unwrap();
        let plain =
            build_singlet(&SingletSpec::new(2, UnitaryMatrix::identity(4), &[0, 3]).unwrap())
                .unwrap();
        let applied = apply_uniform_unitary(&plain, &u).unwrap();
        assert!(rotated.distance(&applied).unwrap() < 1e-11);
    }

    #[test]
    fn single_site_reduced_state_is_maximally_mixed() {
        for n in 2..=6 {
            let s = build_full_singlet(n).unwrap();
            let rho = partial_trace(&s, &[n / 2]).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 / n as f64 } else { 0.0 };
                    assert!((rho.matrix()[(i, j)] - c(want)).norm() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn rotation_invariance() {
        let s3 = build_full_singlet(3).unwrap();
        let u = haar_unitary(3, &mut rng(10)).unwrap();
        assert!(check_rotation_invariance(&s3, &u).unwrap() < 1e-10);

        let reduced =
            build_singlet(&SingletSpec::new(2, UnitaryMatrix::identity(3), &[0]).unwrap()).unwrap();
        let v = haar_unitary(2, &mut rng(11)).unwrap();
        let mut block = DMatrix::<Complex64>::identity(3, 3);
        block.view_mut((1, 1), (2, 2)).copy_from(v.matrix());
        let block = UnitaryMatrix::new(block).unwrap();
        assert!(check_rotation_invariance(&reduced, &block).unwrap() < 1e-10);

        let generic = haar_unitary(3, &mut rng(12)).unwrap();
        let moved = apply_uniform_unitary(&reduced, &generic).unwrap();
        assert!(check_rotation_invariance(&reduced, &generic).unwrap() > 0.01);
        assert!(swap_antisymmetry_deviation(&moved, 0, 1).unwrap() < 1e-12);
    }

    #[test]
    fn expansion_identity() {
        for n in 2..=6 {
            assert!(one_site_expansion(n).unwrap() < 1e-12, "n = {n}");
        }
        assert!(one_site_expansion(7).is_err());
    }

    #[test]
    fn agrawal_property() {
        assert_eq!(
            agrawal_property_check(3, &UnitaryMatrix::identity(3)).unwrap(),
            0.0
        );
        for seed in 0..10 {
            let u = haar_unitary(3, &mut rng(seed)).unwrap();
            assert!(agrawal_property_check(3, &u).unwrap() < 1e-11);
        }
        let phases = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(4, |i, _| {
            Complex64::from_polar(1.0, 0.3 + i as f64)
        }));
        let diag = UnitaryMatrix::new(phases).unwrap();
        assert!(agrawal_property_check(4, &diag).unwrap() < 1e-11);
    }

    #[test]
    fn sign_of_permutations() {
        assert_eq!(permutation_sign(&[0, 1, 2]), 1);
        assert_eq!(permutation_sign(&[1, 0, 2]), -1);
        assert_eq!(permutation_sign(&[1, 2, 0]), 1);
    }
}
