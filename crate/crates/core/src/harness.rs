//! Scenario configs, run reports and the per-command runners behind the CLI.

use std::io;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::entanglement::{
    binomial, block_entropy, default_dictionary, localisable_experiment, log2_binomial,
    persistency_random_certificate, persistency_report, residual_antisymmetry, ReferenceState,
};
use crate::error::{Error, Result};
use crate::hamiltonian::{ground_state, verify_all_pair_eigenstate, SolverKind};
use crate::hubbard::{compare_effective, two_site_gap};
use crate::measurement::{cascade, Policy};
use crate::network::{make_topology, QuditNetwork, Topology};
use crate::qudit::{entropy, fidelity_up_to_phase, schmidt, Bipartition, RANK_TOL};
use crate::singlet::build_full_singlet;
use crate::verify::{verify_all, Level};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    GroundState,
    MeasureCascade,
    BlockEntropy,
    Localize,
    Persistency,
    HubbardCheck,
    VerifyAll,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GroundState => "ground-state",
            Command::MeasureCascade => "measure-cascade",
            Command::BlockEntropy => "block-entropy",
            Command::Localize => "localize",
            Command::Persistency => "persistency",
            Command::HubbardCheck => "hubbard-check",
            Command::VerifyAll => "verify-all",
        }
    }
}

/// One scenario. Site labels (`block_a`, `block_b`, `sites`) are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<String>,
    /// Path of a network JSON file, used with `topology = "file"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_couplings: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_a: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_b: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<String>,
}

impl ScenarioConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            seed: 0,
            n: None,
            d: None,
            topology: None,
            network: None,
            coupling: None,
            random_couplings: None,
            k: None,
            m: None,
            sites: None,
            policy: None,
            trials: None,
            l: None,
            block_a: None,
            block_b: None,
            state: None,
            budget: None,
            t: None,
            u: None,
            tol: None,
            rank_tol: None,
            level: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Validation(format!("config: {e}")))
    }

    /// Overlay every field that is set in `flags` (a partial config).
    pub fn merged_with(mut self, flags: &ScenarioConfig, seed_given: bool) -> Self {
        macro_rules! overlay {
            ($($field:ident),*) => { $( if flags.$field.is_some() { self.$field = flags.$field.clone(); } )* };
        }
        overlay!(
            n,
            d,
            topology,
            network,
            coupling,
            random_couplings,
            k,
            m,
            sites,
            policy,
            trials,
            l,
            block_a,
            block_b,
            state,
            budget,
            t,
            u,
            tol,
            rank_tol,
            level
        );
        if seed_given {
            self.seed = flags.seed;
        }
        self.command = flags.command;
        self
    }

    fn check_positive(&self) -> Result<()> {
        for (name, v) in [
            ("tol", self.tol),
            ("rank_tol", self.rank_tol),
            ("t", self.t),
            ("u", self.u),
            ("coupling", self.coupling),
        ] {
            if let Some(x) = v {
                if !x.is_finite() || x <= 0.0 {
                    return Err(Error::Validation(format!(
                        "{name} must be positive, got {x}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub params: Value,
    pub results: Value,
    pub pass: bool,
    pub wall_time_ms: u64,
    pub artifact_version: String,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        to_json_string(self)
    }

    /// Per-trial rows of sweep commands as CSV, if the results carry any.
    pub fn trials(&self) -> Option<&Vec<Value>> {
        self.results.get("trials").and_then(Value::as_array)
    }
}

/// Writes every float with 17 significant digits (`{:.16e}`); non-finite
/// values become `null`.
struct SignificantDigits;

impl serde_json::ser::Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SignificantDigits);
    value.serialize(&mut ser).expect("reports serialize");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

/// Named boolean checks accumulated while a scenario runs.
#[derive(Default)]
pub(crate) struct Assertions(Vec<Value>);

impl Assertions {
    pub(crate) fn check(&mut self, name: &str, pass: bool, value: Value, threshold: Value) {
        self.0
            .push(json!({ "name": name, "pass": pass, "value": value, "threshold": threshold }));
    }

    pub(crate) fn all_pass(&self) -> bool {
        self.0.iter().all(|a| a["pass"] == Value::Bool(true))
    }

    pub(crate) fn into_value(self) -> Value {
        Value::Array(self.0)
    }
}

fn zero_based(sites: &[usize], n: usize) -> Result<Vec<usize>> {
    sites
        .iter()
        .map(|&s| {
            if s == 0 || s > n {
                Err(Error::Validation(format!("site label {s} outside 1..={n}")))
            } else {
                Ok(s - 1)
            }
        })
        .collect()
}

/// Run one scenario. Deterministic given the config (including its seed),
/// apart from `wall_time_ms`.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunReport> {
    config.check_positive()?;
    let start = Instant::now();
    let (params, results, pass) = match config.command {
        Command::GroundState => run_ground_state(config)?,
        Command::MeasureCascade => run_measure_cascade(config)?,
        Command::BlockEntropy => run_block_entropy(config)?,
        Command::Localize => run_localize(config)?,
        Command::Persistency => run_persistency(config)?,
        Command::HubbardCheck => run_hubbard_check(config)?,
        Command::VerifyAll => {
            let level: Level = config.level.as_deref().unwrap_or("quick").parse()?;
            let checks = verify_all(config.seed, level);
            let pass = checks.iter().all(|c| c.pass);
            (
                json!({ "level": level.name(), "seed": config.seed }),
                json!({ "checks": checks }),
                pass,
            )
        }
    };
    Ok(RunReport {
        command: config.command.name().to_string(),
        params,
        results,
        pass,
        wall_time_ms: start.elapsed().as_millis() as u64,
        artifact_version: ARTIFACT_VERSION.to_string(),
    })
}

type Outcome = (Value, Value, bool);

fn run_ground_state(cfg: &ScenarioConfig) -> Result<Outcome> {
    let topology = cfg.topology.clone().unwrap_or_else(|| "chain".into());
    let coupling = cfg.coupling.unwrap_or(1.0);
    let mut net = if topology == "file" {
        let path = cfg
            .network
            .as_deref()
            .ok_or_else(|| Error::Validation("topology \"file\" needs a network path".into()))?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Validation(format!("reading {path}: {e}")))?;
        QuditNetwork::parse_json(&text)?
    } else {
        let kind: Topology = topology.parse()?;
        make_topology(kind, cfg.n.unwrap_or(3), coupling, cfg.seed)?
    };
    let random_couplings = cfg.random_couplings.unwrap_or(false);
    if random_couplings {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
        net = net.with_random_couplings(2.0, &mut rng);
    }
    let n = net.num_vertices();
    let d = cfg.d.unwrap_or(n);
    let k = cfg.k.unwrap_or(4);
    let tol = cfg.tol.unwrap_or(1e-10);
    let params = json!({
        "topology": topology, "n": n, "d": d, "k": k, "tol": tol, "seed": cfg.seed,
        "coupling": coupling, "random_couplings": random_couplings, "network": cfg.network,
    });

    let spec = ground_state(&net, d, k, tol)?;
    let total = net.total_coupling();
    let e0 = spec.lowest_energies[0];
    let pair_dev = verify_all_pair_eigenstate(&spec.ground_state, &net)?;
    let mut results = json!({
        "edges": net.edges().iter().map(|e| json!([e.i + 1, e.j + 1, e.coupling])).collect::<Vec<_>>(),
        "total_coupling": total,
        "energy": e0,
        "expected_energy": -total,
        "lowest_energies": spec.lowest_energies,
        "degeneracy": spec.degeneracy,
        "gap": spec.gap,
        "solver": match spec.solver { SolverKind::Dense => "dense", SolverKind::Lanczos => "lanczos" },
        "all_pair_deviation": pair_dev,
    });
    let mut asserts = Assertions::default();
    if d == n {
        let fidelity = fidelity_up_to_phase(&spec.ground_state, &build_full_singlet(n)?)?;
        results["singlet_fidelity"] = json!(fidelity);
        let fid_tol = if spec.solver == SolverKind::Lanczos {
            1e-6
        } else {
            1e-8
        };
        let rel = (e0 + total).abs() / total;
        asserts.check(
            "energy_equals_minus_total_coupling",
            rel <= 1e-8,
            json!(rel),
            json!(1e-8),
        );
        asserts.check(
            "unique_ground_state",
            spec.degeneracy == 1,
            json!(spec.degeneracy),
            json!(1),
        );
        asserts.check(
            "singlet_fidelity",
            fidelity >= 1.0 - fid_tol,
            json!(fidelity),
            json!(1.0 - fid_tol),
        );
        asserts.check(
            "antisymmetric_on_all_pairs",
            pair_dev < 1e-6,
            json!(pair_dev),
            json!(1e-6),
        );
    }
    let pass = asserts.all_pass();
    results["assertions"] = asserts.into_value();
    Ok((params, results, pass))
}

fn run_measure_cascade(cfg: &ScenarioConfig) -> Result<Outcome> {
    let n = cfg.n.unwrap_or(4);
    let policy_name = cfg.policy.clone().unwrap_or_else(|| "restricted".into());
    let policy: Policy = policy_name.parse()?;
    let sites = match &cfg.sites {
        Some(s) => zero_based(s, n)?,
        None => (0..cfg.m.unwrap_or(2)).collect(),
    };
    let trials = cfg.trials.unwrap_or(1);
    let params = json!({
        "n": n, "m": sites.len(), "sites": sites.iter().map(|s| s + 1).collect::<Vec<_>>(),
        "policy": policy, "trials": trials, "seed": cfg.seed,
    });
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(trials);
    let (mut worst_fid, mut worst_anti, mut worst_prob) = (1.0f64, 0.0f64, 0.0f64);
    let mut entropies = Vec::new();
    for trial in 0..trials {
        let rec = cascade(n, &sites, policy, &mut rng)?;
        let remaining = rec.remaining_sites();
        let anti = residual_antisymmetry(&rec.final_state, &remaining)?;
        worst_anti = worst_anti.max(anti);
        for (step, s) in rec.steps.iter().enumerate() {
            worst_prob = worst_prob.max((s.probability - 1.0 / (n - step) as f64).abs());
        }
        let mut row = json!({
            "trial": trial,
            "outcomes": rec.outcomes(),
            "probabilities": rec.steps.iter().map(|s| s.probability).collect::<Vec<_>>(),
            "residual_antisymmetry": anti,
        });
        if policy != Policy::ArbitraryRandom {
            let fid = fidelity_up_to_phase(&rec.remaining_state()?, &rec.expected_singlet()?)?;
            worst_fid = worst_fid.min(fid);
            row["remaining_fidelity"] = json!(fid);
        }
        if remaining.len() >= 2 {
            let cut = Bipartition::new(n, &remaining[..1])?;
            let s = entropy(
                &schmidt(&rec.final_state, &cut, cfg.rank_tol.unwrap_or(RANK_TOL))?.coefficients,
            );
            entropies.push(s);
            row["remaining_entropy_bits"] = json!(s);
        }
        rows.push(row);
    }
    let mut asserts = Assertions::default();
    asserts.check(
        "outcome_probabilities_uniform",
        worst_prob < 1e-10,
        json!(worst_prob),
        json!(1e-10),
    );
    asserts.check(
        "residual_antisymmetry",
        worst_anti < 1e-9,
        json!(worst_anti),
        json!(1e-9),
    );
    if policy != Policy::ArbitraryRandom {
        asserts.check(
            "remaining_singlet_fidelity",
            worst_fid >= 1.0 - 1e-9,
            json!(worst_fid),
            json!(1.0 - 1e-9),
        );
    }
    if !entropies.is_empty() {
        let spread = entropies.iter().cloned().fold(f64::MIN, f64::max)
            - entropies.iter().cloned().fold(f64::MAX, f64::min);
        asserts.check("entropy_spread", spread < 1e-8, json!(spread), json!(1e-8));
    }
    let pass = asserts.all_pass();
    Ok((
        params,
        json!({ "trials": rows, "assertions": asserts.into_value() }),
        pass,
    ))
}

fn run_block_entropy(cfg: &ScenarioConfig) -> Result<Outcome> {
    let n = cfg.n.unwrap_or(4);
    let l = cfg.l.unwrap_or(n / 2);
    if l == 0 || l >= n {
        return Err(Error::Validation(format!(
            "block size must be in 1..{n}, got {l}"
        )));
    }
    let state = build_full_singlet(n)?;
    let block: Vec<usize> = (0..l).collect();
    let s = block_entropy(&state, &block)?;
    let expected = log2_binomial(n, l);
    let mut asserts = Assertions::default();
    asserts.check(
        "entropy_equals_log2_binomial",
        (s - expected).abs() <= 1e-8,
        json!((s - expected).abs()),
        json!(1e-8),
    );
    let pass = asserts.all_pass();
    Ok((
        json!({ "n": n, "l": l, "seed": cfg.seed }),
        json!({ "entropy_bits": s, "expected_bits": expected, "assertions": asserts.into_value() }),
        pass,
    ))
}

fn run_localize(cfg: &ScenarioConfig) -> Result<Outcome> {
    let n = cfg.n.unwrap_or(4);
    let a = zero_based(cfg.block_a.as_deref().unwrap_or(&[1]), n)?;
    let b = zero_based(cfg.block_b.as_deref().unwrap_or(&[2]), n)?;
    let trials = cfg.trials.unwrap_or(20);
    let policy: Policy = cfg.policy.as_deref().unwrap_or("restricted").parse()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rows = localisable_experiment(
        n,
        &a,
        &b,
        trials,
        policy,
        cfg.rank_tol.unwrap_or(RANK_TOL),
        &mut rng,
    )?;
    let expected_rank = binomial(a.len() + b.len(), a.len()) as usize;
    let expected_bits = log2_binomial(a.len() + b.len(), a.len());
    let worst = rows
        .iter()
        .map(|r| (r.entropy_bits - expected_bits).abs())
        .fold(0.0, f64::max);
    let ranks_ok = rows.iter().all(|r| r.schmidt_rank == expected_rank);
    let mut asserts = Assertions::default();
    asserts.check(
        "entropy_equals_log2_binomial",
        worst <= 1e-8,
        json!(worst),
        json!(1e-8),
    );
    asserts.check(
        "schmidt_rank_equals_binomial",
        ranks_ok,
        json!(ranks_ok),
        json!(expected_rank),
    );
    let pass = asserts.all_pass();
    Ok((
        json!({
            "n": n, "block_a": a.iter().map(|s| s + 1).collect::<Vec<_>>(),
            "block_b": b.iter().map(|s| s + 1).collect::<Vec<_>>(), "trials": trials, "policy": policy, "seed": cfg.seed,
        }),
        json!({
            "expected_rank": expected_rank, "expected_bits": expected_bits,
            "trials": rows, "assertions": asserts.into_value(),
        }),
        pass,
    ))
}

fn run_persistency(cfg: &ScenarioConfig) -> Result<Outcome> {
    let state_name = cfg.state.clone().unwrap_or_else(|| "singlet".into());
    let kind: ReferenceState = state_name.parse()?;
    let n = cfg.n.unwrap_or(if kind == ReferenceState::Cluster {
        4
    } else {
        3
    });
    let budget = cfg.budget.unwrap_or(1_000_000);
    let trials = cfg.trials.unwrap_or(50);
    let state = kind.build(n)?;
    let dictionary = default_dictionary(n, state.local_dim(), 8, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let report = persistency_report(&state, &dictionary, budget, trials, &mut rng)?;
    let expected = kind.known_persistency(n);
    let mut asserts = Assertions::default();
    asserts.check(
        "upper_bound_matches_known",
        report.upper_bound == expected,
        json!(report.upper_bound),
        json!(expected),
    );
    let mut results = json!({
        "upper_bound": report.upper_bound,
        "certified_floor": report.certified_floor,
        "expected_persistency": expected,
        "trials": report.trials,
        "details": report.details,
    });
    if kind == ReferenceState::Singlet {
        let mut certificates = Vec::new();
        for m in 0..n.saturating_sub(1) {
            let rank = if m == 0 {
                crate::entanglement::min_schmidt_rank(
                    &state,
                    &(0..n).collect::<Vec<_>>(),
                    RANK_TOL,
                )?
            } else {
                persistency_random_certificate(n, m, trials, &mut rng)?
            };
            asserts.check(
                &format!("entangled_after_{m}_measurements"),
                rank >= 2,
                json!(rank),
                json!(2),
            );
            certificates.push(json!({ "m": m, "min_rank": rank }));
        }
        results["certificates"] = Value::Array(certificates);
    }
    let pass = asserts.all_pass();
    results["assertions"] = asserts.into_value();
    Ok((
        json!({ "state": kind, "n": n, "budget": budget, "trials": trials, "seed": cfg.seed }),
        results,
        pass,
    ))
}

fn run_hubbard_check(cfg: &ScenarioConfig) -> Result<Outcome> {
    let d = cfg.d.unwrap_or(2);
    let t = cfg.t.unwrap_or(0.1);
    let u = cfg.u.unwrap_or(10.0);
    let cmp = compare_effective(d, d, t, u)?;
    let bound = 16.0 * (t / u).powi(2);
    let mut asserts = Assertions::default();
    asserts.check(
        "spacing_error_within_16_t2_over_u2",
        cmp.max_relative_gap_error <= bound,
        json!(cmp.max_relative_gap_error),
        json!(bound),
    );
    let mut results = json!({ "comparison": cmp });
    if d == 2 {
        let gap = two_site_gap(t, u)?;
        let closed = ((u * u + 16.0 * t * t).sqrt() - u) / 2.0;
        let rel = (gap - cmp.j_expected).abs() / cmp.j_expected;
        results["gap"] = json!(gap);
        results["closed_form_gap"] = json!(closed);
        results["relative_error_vs_j"] = json!(rel);
        asserts.check(
            "gap_matches_closed_form",
            (gap - closed).abs() < 1e-12,
            json!((gap - closed).abs()),
            json!(1e-12),
        );
    }
    let pass = asserts.all_pass();
    results["assertions"] = asserts.into_value();
    Ok((
        json!({ "d": d, "t": t, "u": u, "seed": cfg.seed }),
        results,
        pass,
    ))
}
