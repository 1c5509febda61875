use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use singlet_core::harness::to_json_string;
use singlet_core::{run_scenario, Command, Error, RunReport, ScenarioConfig};

#[derive(Parser)]
#[command(name = "singlet", version, about = "Multi-qudit singlet experiments")]
struct Cli {
    /// JSON scenario file; flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Singular values below this count as zero when ranking Schmidt decompositions.
    #[arg(long, global = true)]
    rank_tol: Option<f64>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Sub {
    /// Ground state of the permutation Hamiltonian on a network.
    GroundState(GroundStateArgs),
    /// Sequential single-site measurements on the n-singlet.
    MeasureCascade(CascadeArgs),
    /// Entanglement entropy of the first l sites of the n-singlet.
    BlockEntropy(BlockEntropyArgs),
    /// Measure all sites outside two blocks and record their entanglement.
    Localize(LocalizeArgs),
    /// Upper bound and random certificates for the persistency of entanglement.
    Persistency(PersistencyArgs),
    /// Compare the strong-coupling Hubbard spectrum with the permutation model.
    HubbardCheck(HubbardArgs),
    /// Run the built-in self-check.
    VerifyAll(VerifyArgs),
    /// Run the scenario described by --config.
    Run,
}

#[derive(Args)]
struct GroundStateArgs {
    /// chain, ring, star, complete, random or file
    #[arg(long)]
    topology: Option<String>,
    /// Network JSON file (implies --topology file).
    #[arg(long)]
    network: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    /// Number of lowest eigenvalues to report.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    coupling: Option<f64>,
    /// Draw each coupling uniformly from (0, 2].
    #[arg(long)]
    random_couplings: bool,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CascadeArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// 1-based sites to measure, in order (defaults to 1..=m).
    #[arg(long, value_delimiter = ',')]
    sites: Option<Vec<usize>>,
    /// restricted, fixed or arbitrary
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BlockEntropyArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
}

#[derive(Args)]
struct LocalizeArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    block_a: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    block_b: Option<Vec<usize>>,
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PersistencyArgs {
    /// singlet, ghz, w or cluster
    #[arg(long)]
    state: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Node budget of the exhaustive search.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct HubbardArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    u: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// quick or full
    #[arg(long)]
    level: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

/// The flags as a partial config, plus whether a seed was given.
fn flags_config(sub: &Sub) -> Option<(ScenarioConfig, Option<u64>)> {
    let (mut c, seed) = match sub {
        Sub::GroundState(a) => {
            let mut c = ScenarioConfig::new(Command::GroundState);
            c.topology = a
                .topology
                .clone()
                .or_else(|| a.network.as_ref().map(|_| "file".to_string()));
            c.network = a.network.clone();
            c.n = a.n;
            c.d = a.d;
            c.k = a.k;
            c.coupling = a.coupling;
            c.random_couplings = a.random_couplings.then_some(true);
            c.tol = a.tol;
            (c, a.seed)
        }
        Sub::MeasureCascade(a) => {
            let mut c = ScenarioConfig::new(Command::MeasureCascade);
            c.n = a.n;
            c.m = a.m;
            c.sites = a.sites.clone();
            c.policy = a.policy.clone();
            c.trials = a.trials;
            (c, a.seed)
        }
        Sub::BlockEntropy(a) => {
            let mut c = ScenarioConfig::new(Command::BlockEntropy);
            c.n = a.n;
            c.l = a.l;
            (c, None)
        }
        Sub::Localize(a) => {
            let mut c = ScenarioConfig::new(Command::Localize);
            c.n = a.n;
            c.block_a = a.block_a.clone();
            c.block_b = a.block_b.clone();
            c.policy = a.policy.clone();
            c.trials = a.trials;
            (c, a.seed)
        }
        Sub::Persistency(a) => {
            let mut c = ScenarioConfig::new(Command::Persistency);
            c.state = a.state.clone();
            c.n = a.n;
            c.budget = a.budget;
            c.trials = a.trials;
            (c, a.seed)
        }
        Sub::HubbardCheck(a) => {
            let mut c = ScenarioConfig::new(Command::HubbardCheck);
            c.d = a.d;
            c.t = a.t;
            c.u = a.u;
            (c, None)
        }
        Sub::VerifyAll(a) => {
            let mut c = ScenarioConfig::new(Command::VerifyAll);
            c.level = a.level.clone();
            (c, a.seed)
        }
        Sub::Run => return None,
    };
    c.seed = seed.unwrap_or(0);
    Some((c, seed))
}

fn resolve(cli: &Cli) -> Result<ScenarioConfig, Error> {
    let file = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Validation(format!("reading {}: {e}", path.display())))?;
            Some(ScenarioConfig::from_json(&text)?)
        }
        None => None,
    };
    let mut config = match (flags_config(&cli.command), file) {
        (Some((flags, seed)), Some(file)) => file.merged_with(&flags, seed.is_some()),
        (Some((flags, _)), None) => flags,
        (None, Some(file)) => file,
        (None, None) => return Err(Error::Validation("`run` needs --config".into())),
    };
    if cli.rank_tol.is_some() {
        config.rank_tol = cli.rank_tol;
    }
    Ok(config)
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::Validation(_) => "validation",
        Error::Precondition(_) => "precondition",
        Error::Convergence { .. } => "convergence",
        Error::Numerical(_) => "numerical",
        Error::Budget { .. } => "budget",
        Error::Regime(_) => "regime",
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) | Error::Validation(_) | Error::Precondition(_) => 2,
        _ => 3,
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(cell).collect::<Vec<_>>().join(";"),
        Value::Number(x) => match x.as_f64() {
            Some(f) if !x.is_i64() && !x.is_u64() => format!("{f:.16e}"),
            _ => x.to_string(),
        },
        other => other.to_string(),
    }
}

fn to_csv(report: &RunReport) -> Result<String, Error> {
    let rows: Vec<Value> = match report.trials() {
        Some(rows) => rows.clone(),
        None => {
            let mut row = serde_json::Map::new();
            if let Value::Object(results) = &report.results {
                for (k, v) in results {
                    if !v.is_object()
                        && !(v.is_array()
                            && v.as_array().is_some_and(|a| a.iter().any(Value::is_object)))
                    {
                        row.insert(k.clone(), v.clone());
                    }
                }
            }
            vec![Value::Object(row)]
        }
    };
    let mut header: Vec<String> = Vec::new();
    for row in &rows {
        if let Value::Object(m) = row {
            for k in m.keys() {
                if !header.contains(k) {
                    header.push(k.clone());
                }
            }
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| Error::Numerical(format!("csv: {e}"));
    w.write_record(&header).map_err(io_err)?;
    for row in &rows {
        w.write_record(
            header
                .iter()
                .map(|k| cell(row.get(k).unwrap_or(&Value::Null))),
        )
        .map_err(io_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Numerical(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV is UTF-8"))
}

fn emit(cli: &Cli, text: &str) -> io::Result<()> {
    match &cli.out {
        Some(path) => fs::write(path, text),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.trim_end().as_bytes())?;
            out.write_all(b"\n")
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = resolve(&cli)
        .and_then(|c| run_scenario(&c))
        .and_then(|report| {
            let text = match cli.format {
                Format::Json => report.to_json(),
                Format::Csv => to_csv(&report)?,
            };
            Ok((report.pass, text))
        });
    match outcome {
        Ok((pass, text)) => {
            if let Err(e) = emit(&cli, &text) {
                eprintln!("singlet: {e}");
                return ExitCode::from(2);
            }
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            let body = json!({ "error": { "kind": error_kind(&e), "message": e.to_string() } });
            println!("{}", to_json_string(&body));
            ExitCode::from(exit_code(&e))
        }
    }
}
