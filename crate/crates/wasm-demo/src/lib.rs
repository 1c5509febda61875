//! Browser bindings for three interactive views: the block-entropy curve of
//! the n-singlet, a measurement cascade explorer and the Hubbard exchange gap.
//!
//! Every export returns a JSON string; the plain functions in this file do the
//! work and are what the native tests exercise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use singlet_core::entanglement::{block_entropy, log2_binomial, residual_antisymmetry};
use singlet_core::hubbard::{fit_power_law, two_site_gap};
use singlet_core::measurement::{cascade, Policy};
use singlet_core::qudit::{entropy, fidelity_up_to_phase, schmidt, Bipartition, RANK_TOL};
use singlet_core::{build_full_singlet, Error};
use wasm_bindgen::prelude::*;

const MAX_PARTIES: usize = 6;

fn check_parties(n: usize) -> Result<(), Error> {
    if !(2..=MAX_PARTIES).contains(&n) {
        return Err(Error::Validation(format!(
            "n must be in 2..={MAX_PARTIES} in the browser, got {n}"
        )));
    }
    Ok(())
}

pub fn entropy_curve_json(n: usize) -> Result<String, Error> {
    check_parties(n)?;
    let state = build_full_singlet(n)?;
    let mut entropies = vec![0.0];
    for l in 1..n {
        entropies.push(block_entropy(&state, &(0..l).collect::<Vec<_>>())?);
    }
    entropies.push(0.0);
    let expected: Vec<f64> = (0..=n).map(|l| log2_binomial(n, l)).collect();
    Ok(json!({ "n": n, "l": (0..=n).collect::<Vec<_>>(), "entropy": entropies, "expected": expected }).to_string())
}

pub fn cascade_json(n: usize, m: usize, policy: &str, seed: u64) -> Result<String, Error> {
    check_parties(n)?;
    if m >= n {
        return Err(Error::Validation(format!("measure fewer than {n} sites")));
    }
    let policy: Policy = policy.parse()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sites: Vec<usize> = (0..m).collect();
    let rec = cascade(n, &sites, policy, &mut rng)?;
    let steps: Vec<_> = rec
        .steps
        .iter()
        .map(|s| json!({ "site": s.site + 1, "outcome": s.outcome, "probability": s.probability }))
        .collect();
    let remaining = rec.remaining_sites();
    let profile: Vec<f64> = (1..remaining.len())
        .map(|k| {
            let cut = Bipartition::new(n, &remaining[..k])?;
            Ok(entropy(
                &schmidt(&rec.final_state, &cut, RANK_TOL)?.coefficients,
            ))
        })
        .collect::<Result<_, Error>>()?;
    let fidelity = match policy {
        Policy::ArbitraryRandom => None,
        _ => Some(fidelity_up_to_phase(
            &rec.remaining_state()?,
            &rec.expected_singlet()?,
        )?),
    };
    Ok(json!({
        "n": n,
        "steps": steps,
        "remaining_sites": remaining.iter().map(|s| s + 1).collect::<Vec<_>>(),
        "entropy_profile": profile,
        "expected_profile": (1..remaining.len()).map(|k| log2_binomial(remaining.len(), k)).collect::<Vec<_>>(),
        "reduced_singlet_fidelity": fidelity,
        "residual_antisymmetry": residual_antisymmetry(&rec.final_state, &remaining)?,
    })
    .to_string())
}

pub fn hubbard_gap_json(u: f64, t_min: f64, t_max: f64, points: usize) -> Result<String, Error> {
    if !(u > 0.0 && t_min > 0.0 && t_max > t_min && points >= 2) {
        return Err(Error::Validation(
            "need U > 0, 0 < t_min < t_max and at least 2 points".into(),
        ));
    }
    let ratio = (t_max / t_min).powf(1.0 / (points - 1) as f64);
    let ts: Vec<f64> = (0..points).map(|k| t_min * ratio.powi(k as i32)).collect();
    let gaps = ts
        .iter()
        .map(|&t| two_site_gap(t, u))
        .collect::<Result<Vec<_>, _>>()?;
    let js: Vec<f64> = ts.iter().map(|t| 4.0 * t * t / u).collect();
    let (slope, prefactor) = fit_power_law(&ts, &gaps);
    Ok(
        json!({ "u": u, "t": ts, "gap": gaps, "j": js, "slope": slope, "prefactor": prefactor })
            .to_string(),
    )
}

fn to_js(r: Result<String, Error>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
}

/// Entanglement entropy of the first `l` sites of the n-singlet for every `l`.
#[wasm_bindgen]
pub fn entropy_curve(n: usize) -> Result<String, JsValue> {
    to_js(entropy_curve_json(n))
}

/// Measure sites 1..=m of the n-singlet with the given basis policy.
#[wasm_bindgen]
pub fn run_cascade(n: usize, m: usize, policy: &str, seed: u32) -> Result<String, JsValue> {
    to_js(cascade_json(n, m, policy, seed as u64))
}

/// Exchange gap of the two-site Hubbard model on a log-spaced grid of hoppings.
#[wasm_bindgen]
pub fn hubbard_gap_curve(u: f64, t_min: f64, t_max: f64, points: usize) -> Result<String, JsValue> {
    to_js(hubbard_gap_json(u, t_min, t_max, points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: String) -> Value {
        serde_json::from_str(&s).unwrap()
    }

    #[test]
    fn entropy_curve_matches_binomials() {
        let v = parse(entropy_curve_json(5).unwrap());
        let got = v["entropy"].as_array().unwrap();
        let want = v["expected"].as_array().unwrap();
        assert_eq!(got.len(), 6);
        for (g, w) in got.iter().zip(want) {
            assert!((g.as_f64().unwrap() - w.as_f64().unwrap()).abs() < 1e-9);
        }
        assert!(entropy_curve_json(9).is_err());
    }

    #[test]
    fn cascade_is_reproducible() {
        let a = cascade_json(5, 2, "restricted", 3).unwrap();
        assert_eq!(a, cascade_json(5, 2, "restricted", 3).unwrap());
        let v = parse(a);
        assert!(v["reduced_singlet_fidelity"].as_f64().unwrap() > 1.0 - 1e-9);
        assert_eq!(v["steps"].as_array().unwrap().len(), 2);
        assert_eq!(v["remaining_sites"], json!([3, 4, 5]));
        let arb = parse(cascade_json(4, 2, "arbitrary", 1).unwrap());
        assert!(arb["reduced_singlet_fidelity"].is_null());
        assert!(arb["residual_antisymmetry"].as_f64().unwrap() < 1e-9);
        assert!(cascade_json(4, 4, "fixed", 0).is_err());
        let none = parse(cascade_json(4, 0, "fixed", 0).unwrap());
        assert!(none["reduced_singlet_fidelity"].as_f64().unwrap() > 1.0 - 1e-12);
        assert_eq!(none["entropy_profile"].as_array().unwrap().len(), 3);
        assert!(cascade_json(4, 1, "diagonal", 0).is_err());
    }

    #[test]
    fn gap_curve_scales_quadratically() {
        let v = parse(hubbard_gap_json(1.0, 0.01, 0.04, 3).unwrap());
        assert!((v["slope"].as_f64().unwrap() - 2.0).abs() < 0.02);
        assert!(hubbard_gap_json(1.0, 0.04, 0.01, 3).is_err());
    }
}
