use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use clgnet::cdinsert::{InsertMode, DEFAULT_DIM_CAP};
use clgnet::cliquetree::{build_clique_tree, TreeMode};
use clgnet::experiments::{Experiment, NAMES};
use clgnet::lw::{likelihood_weighting, Estimate, LwConfig, DEFAULT_BATCH};
use clgnet::model::io::{load_network, to_json};
use clgnet::pipeline::{run_infer, QueryRequest};
use clgnet::quadrature::Backend;
use clgnet::{networks, Error, Evidence, Network, Result};

#[derive(Parser)]
#[command(name = "clgnet", version, about = "Inference in hybrid networks with discrete children of continuous parents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Posterior over the query variables by clique-tree propagation.
    Infer(InferArgs),
    /// Likelihood-weighting estimate of the same posterior.
    Sample(SampleArgs),
    /// Run a named experiment and write its CSV.
    Experiment(ExperimentArgs),
    /// Print the clique tree built for a network.
    DumpTree(DumpArgs),
    /// Print a bundled network as JSON.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct QueryArgs {
    /// Network JSON file.
    network: PathBuf,
    /// Observation, `Var=state` or `Var=1.5`. Repeatable.
    #[arg(short, long = "evidence")]
    evidence: Vec<String>,
    /// Query variable. Repeatable.
    #[arg(short, long = "query", required = true)]
    query: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Joint,
    Sequential,
}

#[derive(Clone, Copy, ValueEnum)]
enum TreeArg {
    Exact,
    Approximate,
}

impl From<TreeArg> for TreeMode {
    fn from(t: TreeArg) -> Self {
        match t {
            TreeArg::Exact => TreeMode::Exact,
            TreeArg::Approximate => TreeMode::Approximate,
        }
    }
}

#[derive(Args)]
struct InferArgs {
    #[command(flatten)]
    q: QueryArgs,
    /// Gauss-Hermite points per integration dimension.
    #[arg(long, default_value_t = 3)]
    points: usize,
    /// Use Monte Carlo integration with this many samples instead of quadrature.
    #[arg(long)]
    mc_samples: Option<usize>,
    /// Seed for the Monte Carlo backend.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Joint)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = TreeArg::Exact)]
    tree: TreeArg,
    /// Integrate over the parents rather than the reduced feature space.
    #[arg(long)]
    no_reduction: bool,
    /// Largest integration dimension allowed for quadrature.
    #[arg(long, default_value_t = DEFAULT_DIM_CAP)]
    dim_cap: usize,
    /// Emit JSON instead of text.
    #[arg(long)]
    json: bool,
    /// Leave timing out of the JSON report.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    q: QueryArgs,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Samples drawn per RNG stream.
    #[arg(long, default_value_t = DEFAULT_BATCH)]
    batch: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    /// One of chain-dim, joint-vs-sequential, crop-convergence.
    name: String,
    /// Smaller sweep for a fast look.
    #[arg(long)]
    quick: bool,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DumpArgs {
    network: PathBuf,
    #[arg(long, value_enum, default_value_t = TreeArg::Exact)]
    tree: TreeArg,
}

#[derive(Args)]
struct GenerateArgs {
    /// extended-crop, xa-toy, axyb, chain or emission.
    name: String,
    /// Chain length for `chain`.
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// corr(X, Y) for `axyb`.
    #[arg(long, default_value_t = 0.5)]
    corr: f64,
    /// Sigmoid slope for `axyb`.
    #[arg(long, default_value_t = networks::SHARP_SLOPE)]
    slope: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": "usage", "message": e.to_string().trim() }));
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Command) -> Result<String> {
    match cmd {
        Command::Infer(a) => infer(a),
        Command::Sample(a) => sample(a),
        Command::Experiment(a) => {
            let csv = Experiment::named(&a.name)
                .map_err(|_| Error::Config(format!("unknown experiment '{}' (expected one of {})", a.name, NAMES.join(", "))))
                .and_then(|x| if a.quick { x.quick() } else { x }.run())?;
            write_or_return(a.out, csv)
        }
        Command::DumpTree(a) => {
            let net = load_network(&a.network)?;
            Ok(build_clique_tree(&net, a.tree.into())?.dump(&net))
        }
        Command::Generate(a) => {
            let net = match a.name.as_str() {
                "extended-crop" => networks::extended_crop(),
                "xa-toy" => networks::xa_toy(),
                "axyb" => networks::axyb(a.corr, a.slope),
                "chain" if a.n >= 1 => networks::chain(a.n),
                "chain" => return Err(Error::Config("--n must be at least 1".into())),
                "emission" => networks::emission_sensors(),
                other => return Err(Error::Config(format!("unknown network '{other}'"))),
            };
            write_or_return(a.out, to_json(&net))
        }
    }
}

fn write_or_return(out: Option<PathBuf>, text: String) -> Result<String> {
    match out {
        Some(path) => {
            fs::write(&path, text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn infer(a: InferArgs) -> Result<String> {
    let net = load_network(&a.q.network)?;
    let mut req = QueryRequest::parse(&net, &a.q.evidence, &a.q.query)?;
    req.insert.backend = match a.mc_samples {
        Some(samples) => Backend::MonteCarlo { samples, seed: a.seed },
        None => Backend::Quadrature { points: a.points },
    };
    req.insert.mode = match a.mode {
        ModeArg::Joint => InsertMode::Joint,
        ModeArg::Sequential => InsertMode::Sequential,
    };
    req.insert.feature_reduction = !a.no_reduction;
    req.insert.dim_cap = a.dim_cap;
    req.tree_mode = a.tree.into();
    let report = run_infer(&net, &req)?;
    Ok(match (a.json, a.no_timing) {
        (true, true) => report.to_json_without_timing() + "\n",
        (true, false) => report.to_json() + "\n",
        _ => report.to_text(),
    })
}

fn sample(a: SampleArgs) -> Result<String> {
    let net = load_network(&a.q.network)?;
    let e = Evidence::parse(&net, &a.q.evidence)?;
    let query = a.q.query.iter().map(|q| net.id(q)).collect::<Result<Vec<_>>>()?;
    let cfg = LwConfig {
        samples: a.samples,
        seed: a.seed,
        batch: a.batch,
    };
    let r = likelihood_weighting(&net, &e, &query, &cfg)?;
    if a.json {
        return Ok(sample_json(&net, &r).to_string() + "\n");
    }
    let mut s = format!(
        "samples {} (seed {}), effective {:.1}, zero-weight {}\nP(e) = {}\n",
        r.samples,
        r.seed,
        r.effective_samples,
        r.zero_weight,
        fmt(r.evidence_probability)
    );
    for (v, m) in &r.marginals {
        for (state, p) in net.variable(*v).states().iter().zip(m) {
            s += &format!("P({}={}) = {}\n", net.name(*v), state, fmt(*p));
        }
    }
    for m in &r.moments {
        s += &format!("E[{}] = {}, Var = {}\n", net.name(m.var), fmt(m.mean), fmt(m.variance));
    }
    Ok(s)
}

fn fmt(e: Estimate) -> String {
    format!("{:.6} +- {:.6}", e.value, e.se)
}

fn est(e: Estimate) -> serde_json::Value {
    json!({ "value": e.value, "se": e.se })
}

fn sample_json(net: &Network, r: &clgnet::lw::EstimateReport) -> serde_json::Value {
    let marginals: Vec<_> = r
        .marginals
        .iter()
        .map(|(v, m)| {
            json!({
                "variable": net.name(*v),
                "states": net.variable(*v).states(),
                "probabilities": m.iter().map(|&e| est(e)).collect::<Vec<_>>(),
            })
        })
        .collect();
    let moments: Vec<_> = r
        .moments
        .iter()
        .map(|m| json!({ "variable": net.name(m.var), "mean": est(m.mean), "variance": est(m.variance) }))
        .collect();
    let assignments: Vec<_> = r
        .assignments
        .iter()
        .map(|a| {
            let states: Vec<&str> = r
                .discrete
                .iter()
                .zip(&a.states)
                .map(|(&v, &s)| net.variable(v).states()[s].as_str())
                .collect();
            let continuous: Vec<_> = a
                .continuous
                .iter()
                .map(|m| json!({ "variable": net.name(m.var), "mean": est(m.mean), "variance": est(m.variance) }))
                .collect();
            json!({ "states": states, "probability": est(a.probability), "continuous": continuous })
        })
        .collect();
    json!({
        "samples": r.samples,
        "seed": r.seed,
        "effective_samples": r.effective_samples,
        "zero_weight": r.zero_weight,
        "log_evidence": r.log_evidence,
        "evidence_probability": est(r.evidence_probability),
        "marginals": marginals,
        "moments": moments,
        "assignments": assignments,
    })
}
