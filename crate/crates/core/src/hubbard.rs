//! Exact diagonalization of the `d`-species fermionic Hubbard model with one
//! particle per species, and comparison of its low-energy manifold with the
//! permutation model.
//!
//! Second-order perturbation theory in `t/U` gives, on the singly-occupied
//! manifold, `H' = Σ_{⟨ij⟩} (J_ij/2) (P_ij − 1)` with `J_ij = 4 t_ij² / U`:
//! the exchange splitting of a bond (singlet–triplet gap for `d = 2`) is `J`,
//! and `P_ij` enters with coefficient `J/2`.

use itertools::Itertools;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::network::{make_topology, QuditNetwork, Topology};

/// Largest supported number of species (and sites).
pub const MAX_SPECIES: usize = 4;

/// Largest `t/U` for which [`compare_effective`] trusts second-order theory.
pub const MAX_T_OVER_U: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeOrder {
    /// Mode index `site · d + species`; basis kets are created in ascending mode order.
    SiteMajorSpeciesMinor,
}

/// Fock basis with exactly one fermion of each species. `configs[k][σ]` is
/// the site occupied by species `σ` in basis state `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockSector {
    pub num_sites: usize,
    pub num_species: usize,
    pub configs: Vec<Vec<usize>>,
    pub mode_order: ModeOrder,
}

impl FockSector {
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    /// Position of a configuration (species 0 most significant).
    pub fn index_of(&self, config: &[usize]) -> usize {
        config.iter().fold(0, |acc, &s| acc * self.num_sites + s)
    }

    fn mode(&self, site: usize, species: usize) -> usize {
        site * self.num_species + species
    }

    /// Configurations with no doubly occupied site.
    pub fn is_singly_occupied(&self, k: usize) -> bool {
        self.configs[k].iter().all_unique()
    }
}

pub fn enumerate_sector(num_sites: usize, d: usize) -> Result<FockSector> {
    if num_sites != d || !(2..=MAX_SPECIES).contains(&d) {
        return domain(format!(
            "sector needs num_sites = d in 2..={MAX_SPECIES}, got {num_sites} sites, {d} species"
        ));
    }
    let configs = (0..d)
        .map(|_| 0..num_sites)
        .multi_cartesian_product()
        .collect();
    Ok(FockSector {
        num_sites,
        num_species: d,
        configs,
        mode_order: ModeOrder::SiteMajorSpeciesMinor,
    })
}

/// Hubbard Hamiltonian on the sector. Hopping amplitudes are
/// `t_scale · J_ij` for each edge of `net`; each pair of fermions sharing a
/// site costs `u`.
pub fn build_hubbard(
    net: &QuditNetwork,
    t_scale: f64,
    u: f64,
    sector: &FockSector,
) -> Result<DMatrix<f64>> {
    if net.num_vertices() != sector.num_sites {
        return domain("network and sector disagree on the number of sites");
    }
    if t_scale.is_nan() || u.is_nan() || t_scale < 0.0 || u < 0.0 {
        return domain("need t >= 0 and U >= 0");
    }
    let dim = sector.len();
    let d = sector.num_species;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for (k, config) in sector.configs.iter().enumerate() {
        let mut occupancy = vec![0usize; sector.num_sites];
        for &s in config {
            occupancy[s] += 1;
        }
        h[(k, k)] += u * occupancy
            .iter()
            .map(|&o| (o * o.saturating_sub(1) / 2) as f64)
            .sum::<f64>();

        let modes: Vec<usize> = config
            .iter()
            .enumerate()
            .map(|(sp, &s)| sector.mode(s, sp))
            .collect();
        for edge in net.edges() {
            let t = t_scale * edge.coupling;
            for species in 0..d {
                for (from, to) in [(edge.i, edge.j), (edge.j, edge.i)] {
                    if config[species] != from {
                        continue;
                    }
                    let (a, b) = (sector.mode(from, species), sector.mode(to, species));
                    let (lo, hi) = (a.min(b), a.max(b));
                    let crossed = modes.iter().filter(|&&m| lo < m && m < hi).count();
                    let sign = if crossed % 2 == 0 { 1.0 } else { -1.0 };
                    let mut target = config.clone();
                    target[species] = to;
                    h[(sector.index_of(&target), k)] += -t * sign;
                }
            }
        }
    }
    Ok(h)
}

fn ascending_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Spectrum of `Σ c_ij P_ij` restricted to states where every level appears
/// exactly once (the image of the singly-occupied Hubbard manifold).
pub fn permutation_sector_levels(net: &QuditNetwork, scale: f64) -> Vec<f64> {
    let n = net.num_vertices();
    let perms: Vec<Vec<usize>> = (0..n).permutations(n).collect();
    let position = |p: &[usize]| {
        perms
            .binary_search_by(|q| q.as_slice().cmp(p))
            .expect("permutation listed")
    };
    let mut h = DMatrix::<f64>::zeros(perms.len(), perms.len());
    for (col, p) in perms.iter().enumerate() {
        for e in net.edges() {
            let mut q = p.clone();
            q.swap(e.i, e.j);
            h[(position(&q), col)] += scale * e.coupling;
        }
    }
    ascending_eigenvalues(h)
}

#[derive(Debug, Clone, Serialize)]
pub struct EffectiveComparison {
    pub t: f64,
    pub u: f64,
    pub j_expected: f64,
    /// Lowest `d!` Hubbard levels, shifted so the lowest is zero.
    pub hubbard_low_levels: Vec<f64>,
    /// Permutation-model levels (coefficient `J/2`), shifted likewise.
    pub perm_levels: Vec<f64>,
    /// Energy distance from the top of the manifold to the next Hubbard level.
    pub charge_gap: f64,
    pub max_relative_gap_error: f64,
}

/// Compare the Hubbard low manifold on a `d`-site chain with the
/// permutation model at `J = 4t²/U`, level spacing by level spacing.
pub fn compare_effective(
    num_sites: usize,
    d: usize,
    t: f64,
    u: f64,
) -> Result<EffectiveComparison> {
    if t.is_nan() || u.is_nan() || t <= 0.0 || u <= 0.0 {
        return domain("need t > 0 and U > 0");
    }
    if t / u > MAX_T_OVER_U {
        return Err(Error::Regime(format!(
            "t/U = {} exceeds {MAX_T_OVER_U}; second-order exchange is not controlled",
            t / u
        )));
    }
    let sector = enumerate_sector(num_sites, d)?;
    let chain = make_topology(Topology::Chain, num_sites, 1.0, 0)?;
    let levels = ascending_eigenvalues(build_hubbard(&chain, t, u, &sector)?);
    let manifold = (1..=d).product::<usize>();
    let charge_gap = levels[manifold] - levels[manifold - 1];
    if charge_gap < u / 2.0 {
        return Err(Error::Regime(format!(
            "low manifold separated from charge excitations by {charge_gap}, less than U/2"
        )));
    }
    let j = 4.0 * t * t / u;
    let hubbard: Vec<f64> = levels[..manifold].iter().map(|e| e - levels[0]).collect();
    let perm_raw = permutation_sector_levels(&chain, j / 2.0);
    let perm: Vec<f64> = perm_raw.iter().map(|e| e - perm_raw[0]).collect();
    let widest = perm.last().copied().unwrap_or(0.0);
    let max_relative_gap_error = hubbard
        .iter()
        .zip(&perm)
        .skip(1)
        .map(|(h, p)| {
            let reference = if *p > 1e-12 * widest { *p } else { widest };
            (h - p).abs() / reference
        })
        .fold(0.0, f64::max);
    Ok(EffectiveComparison {
        t,
        u,
        j_expected: j,
        hubbard_low_levels: hubbard,
        perm_levels: perm,
        charge_gap,
        max_relative_gap_error,
    })
}

/// Lowest level of the two-site, two-species problem, `(U − √(U² + 16t²))/2`.
pub fn two_site_ground_energy(t: f64, u: f64) -> f64 {
    (u - (u * u + 16.0 * t * t).sqrt()) / 2.0
}

/// Exchange gap of the two-site, two-species model from exact diagonalization.
pub fn two_site_gap(t: f64, u: f64) -> Result<f64> {
    let sector = enumerate_sector(2, 2)?;
    let net = make_topology(Topology::Chain, 2, 1.0, 0)?;
    let levels = ascending_eigenvalues(build_hubbard(&net, t, u, &sector)?);
    Ok(levels[1] - levels[0])
}

/// Least-squares fit of `log gap = log c + a log t`; returns `(a, c)`.
pub fn fit_power_law(ts: &[f64], gaps: &[f64]) -> (f64, f64) {
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, (my - slope * mx).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sector_sizes() {
        assert_eq!(enumerate_sector(2, 2).unwrap().len(), 4);
        let s3 = enumerate_sector(3, 3).unwrap();
        assert_eq!(s3.len(), 27);
        assert_eq!(
            s3.configs.iter().filter(|c| c.iter().all_unique()).count(),
            6
        );
        for (k, c) in s3.configs.iter().enumerate() {
            assert_eq!(s3.index_of(c), k);
        }
        assert!(enumerate_sector(3, 2).is_err());
        assert!(enumerate_sector(5, 5).is_err());
    }

    #[test]
    fn sector_serializes() {
        let s = enumerate_sector(3, 3).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: FockSector = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn hopping_free_limit() {
        let s = enumerate_sector(3, 3).unwrap();
        let net = make_topology(Topology::Chain, 3, 1.0, 0).unwrap();
        let h = build_hubbard(&net, 0.0, 2.0, &s).unwrap();
        for i in 0..s.len() {
            for j in 0..s.len() {
                if i != j {
                    assert_eq!(h[(i, j)], 0.0);
                }
            }
            if s.is_singly_occupied(i) {
                assert_eq!(h[(i, i)], 0.0);
            }
        }
        let s2 = enumerate_sector(2, 2).unwrap();
        let net2 = make_topology(Topology::Chain, 2, 1.0, 0).unwrap();
        let h2 = build_hubbard(&net2, 0.0, 3.0, &s2).unwrap();
        for (k, c) in s2.configs.iter().enumerate() {
            let expected = if c[0] == c[1] { 3.0 } else { 0.0 };
            assert_eq!(h2[(k, k)], expected);
        }
    }

    #[test]
    fn hermitian() {
        let s = enumerate_sector(3, 3).unwrap();
        let net = make_topology(Topology::Chain, 3, 1.0, 0).unwrap();
        let h = build_hubbard(&net, 0.3, 2.0, &s).unwrap();
        assert!((&h - h.transpose()).amax() < 1e-12);
    }

    #[test]
    fn two_site_closed_form() {
        let s = enumerate_sector(2, 2).unwrap();
        let net = make_topology(Topology::Chain, 2, 1.0, 0).unwrap();
        for (t, u) in [
            (0.1, 10.0),
            (0.05, 5.0),
            (0.3, 1.0),
            (1.0, 1.0),
            (0.01, 2.0),
            (0.2, 0.5),
            (2.0, 3.0),
            (0.7, 7.0),
            (0.123, 4.56),
            (1.5, 0.1),
        ] {
            let levels = ascending_eigenvalues(build_hubbard(&net, t, u, &s).unwrap());
            assert!(
                (levels[0] - two_site_ground_energy(t, u)).abs() < 1e-12,
                "t={t} U={u}"
            );
        }
        assert!((two_site_ground_energy(0.1, 10.0) + 0.003_998_4).abs() < 1e-8);
    }

    #[test]
    fn effective_examples() {
        for (t, u, want_gap) in [(0.1, 10.0, 0.003_998_4), (0.05, 5.0, 0.001_999_2)] {
            let c = compare_effective(2, 2, t, u).unwrap();
            let gap = c.hubbard_low_levels[1];
            assert!((gap - want_gap).abs() < 1e-8, "{gap}");
            let rel = (gap - c.j_expected).abs() / c.j_expected;
            assert!((rel - 4.0 * (t / u).powi(2)).abs() < 1e-5, "{rel}");
            assert!(c.max_relative_gap_error <= 16.0 * (t / u).powi(2));
        }
        let c = compare_effective(3, 3, 0.02, 4.0).unwrap();
        assert_eq!(c.hubbard_low_levels.len(), 6);
        assert!(c.max_relative_gap_error <= 16.0 * (0.02f64 / 4.0).powi(2));
    }

    #[test]
    fn regime_guard() {
        assert!(matches!(
            compare_effective(2, 2, 0.5, 1.0),
            Err(Error::Regime(_))
        ));
    }

    #[test]
    fn power_law_fit_recovers_exponent() {
        let ts = [0.01, 0.02, 0.04];
        let gaps: Vec<f64> = ts.iter().map(|t| 3.0 * t * t).collect();
        let (a, c) = fit_power_law(&ts, &gaps);
        assert!((a - 2.0).abs() < 1e-12 && (c - 3.0).abs() < 1e-10);
    }
}
