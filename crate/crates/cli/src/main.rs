//! `annealmatch`: exact fixed-point probabilities, sampling checks, graph
//! matching by simulated annealing, and the two replication tables.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on invalid arguments.
//! The default seed can be overridden with `ANNEALMATCH_SEED`.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use annealmatch_core::anneal::{
    write_trace_csv, DEFAULT_CALIBRATION_SAMPLES, DEFAULT_COOLING_FACTOR,
};
use annealmatch_core::exact;
use annealmatch_core::experiments::{
    self, compare_exact_empirical, run_table1_with, run_table2_with, ExperimentReport, ReportRow,
    Table2Settings, DEFAULT_EDGE_PROBABILITY, DEFAULT_MASTER_SEED, DEFAULT_THRESHOLD,
    TABLE1_N_VALUES, TABLE1_SAMPLES, TABLE2_N_VALUES,
};
use annealmatch_core::permutation::{exhaustive_fixed_point_census, precision, MAX_CENSUS_N};
use annealmatch_core::{
    anneal_seeded, generate_pair, AnnealConfig, Error, GraphPair, InitialTemperature, Objective,
    Operator, RelabelMode,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(
    name = "annealmatch",
    version,
    about = "Fixed points of random permutations and annealing-based graph matching"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact probability that a random permutation has m fixed points.
    Exact(ExactArgs),
    /// Sampled fixed-point histogram against the exact distribution.
    Sample(SampleArgs),
    /// Anneal one random graph pair and report the matching.
    Sa(SaArgs),
    /// Random-permutation census: fraction with more than `threshold` fixed points.
    Table1(Table1Args),
    /// Annealing success rate over graph sizes.
    Table2(Table2Args),
    /// Exhaustive fixed-point counts of all permutations of 1..n.
    Census(CensusArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    /// Exactly m fixed points.
    Point,
    /// At most m fixed points.
    Cumulative,
    /// More than m fixed points.
    Tail,
    /// Limit of the point probability as n grows, e^-1 / m!.
    Limit,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum TextFormat {
    Text,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum TableFormat {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct Common {
    /// Master seed.
    #[arg(long, env = "ANNEALMATCH_SEED", default_value_t = DEFAULT_MASTER_SEED)]
    seed: u64,
    /// Worker threads (defaults to available cores). Output does not depend on it.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExactArgs {
    /// Permutation size (not needed for --kind limit).
    #[arg(long)]
    n: Option<u64>,
    /// Number of fixed points.
    #[arg(long, default_value_t = 0)]
    m: u64,
    /// Which probability to compute.
    #[arg(long, value_enum, default_value_t = Kind::Point)]
    kind: Kind,
    /// Output format.
    #[arg(long, value_enum, default_value_t = TextFormat::Text)]
    format: TextFormat,
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// Permutation size, at most 10000.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Permutations to draw, at least 1000.
    #[arg(long, default_value_t = TABLE1_SAMPLES)]
    samples: u64,
    /// Output format.
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    format: TableFormat,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
struct AnnealFlags {
    /// Proposals per run [default: 100 n].
    #[arg(long)]
    steps: Option<u64>,
    /// Proposals per temperature level [default: steps / 100, which is n at the default step count].
    #[arg(long)]
    epoch: Option<u64>,
    /// Geometric cooling factor in (0, 1).
    #[arg(long, default_value_t = DEFAULT_COOLING_FACTOR)]
    cooling: f64,
    /// Initial temperature: a number, `auto` (80 % uphill acceptance) or `auto:<target>`.
    #[arg(long, default_value = "auto")]
    t0: String,
    /// Neighbourhood move.
    #[arg(long, default_value = "swap", value_parser = ["swap", "insertion", "inversion", "scramble"])]
    operator: String,
    /// Objective minimized: mismatched vertex pairs, or misplaced vertices
    /// (needs the ground truth).
    #[arg(long, default_value = "structural", value_parser = ["structural", "oracle"])]
    objective: String,
    /// Edge probability of the random graphs.
    #[arg(long, default_value_t = DEFAULT_EDGE_PROBABILITY)]
    edge_prob: f64,
    /// Labelling of the second graph.
    #[arg(long, default_value = "identity", value_parser = ["identity", "random"])]
    relabel: String,
    /// Random draws used to calibrate an automatic initial temperature.
    #[arg(long, default_value_t = DEFAULT_CALIBRATION_SAMPLES)]
    calibration_samples: u32,
}

#[derive(Args, Debug)]
struct SaArgs {
    /// Vertices per graph.
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[command(flatten)]
    anneal: AnnealFlags,
    /// Extra chains from fresh random starts; the best result is kept.
    #[arg(long, default_value_t = 0)]
    restarts: u32,
    /// Read the graph pair from this file instead of generating one.
    #[arg(long)]
    pair_in: Option<PathBuf>,
    /// Save the graph pair to this file.
    #[arg(long)]
    pair_out: Option<PathBuf>,
    /// Write a `step,temperature,current,best` trace to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Steps between trace samples [default: epoch length].
    #[arg(long)]
    trace_interval: Option<u64>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = TextFormat::Text)]
    format: TextFormat,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Table1Args {
    /// Comma-separated permutation sizes.
    #[arg(long, value_delimiter = ',', default_values_t = TABLE1_N_VALUES)]
    n_list: Vec<usize>,
    /// Permutations per size.
    #[arg(long, default_value_t = TABLE1_SAMPLES, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    /// Count permutations with more than this many fixed points.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: usize,
    /// Output format.
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    format: TableFormat,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Table2Args {
    /// Comma-separated graph sizes.
    #[arg(long, value_delimiter = ',', default_values_t = TABLE2_N_VALUES)]
    n_list: Vec<usize>,
    /// Runs per size [default: 1000 for n <= 100, 200 for n <= 1000, 50 beyond].
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    runs: Option<u64>,
    /// A run succeeds when its matching has more than this many correct pairs.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: usize,
    #[command(flatten)]
    anneal: AnnealFlags,
    /// Output format.
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    format: TableFormat,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct CensusArgs {
    /// Permutation size, 1 to 10.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=MAX_CENSUS_N as u64))]
    n: u64,
    /// Output format.
    #[arg(long, value_enum, default_value_t = TextFormat::Text)]
    format: TextFormat,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_) => Failure::Runtime(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Exact(a) => cmd_exact(&a),
        Command::Sample(a) => cmd_sample(&a),
        Command::Sa(a) => cmd_sa(&a),
        Command::Table1(a) => cmd_table1(&a),
        Command::Table2(a) => cmd_table2(&a),
        Command::Census(a) => cmd_census(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn run_on_workers<T: Send>(workers: Option<u64>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(w) => experiments::with_workers(w as usize, f),
        None => f(),
    }
}

fn render_report<R: ReportRow>(report: &ExperimentReport<R>, format: TableFormat) -> String {
    match format {
        TableFormat::Csv => report.to_csv(),
        TableFormat::Json => report.to_json(false),
    }
}

fn cmd_exact(a: &ExactArgs) -> CliResult<()> {
    let m = a.m;
    if a.kind == Kind::Limit {
        let limit = exact::fixed_point_prob_limit(m);
        let text = match a.format {
            TextFormat::Text => format!("{limit}\n"),
            TextFormat::Json => {
                format!("{}\n", json!({ "kind": "limit", "m": m, "decimal": limit }))
            }
        };
        return emit(None, &text);
    }
    let n = a.n.ok_or_else(|| {
        Failure::Usage(format!("--n is required for --kind {:?}", a.kind).to_lowercase())
    })?;
    let (prob, limit) = match a.kind {
        Kind::Point => (
            exact::fixed_point_prob(n, m)?,
            Some(exact::fixed_point_prob_limit(m)),
        ),
        Kind::Cumulative => (exact::cumulative_prob(n, m)?, None),
        Kind::Tail => (exact::tail_prob(n, m)?, Some(exact::tail_prob_limit(m))),
        Kind::Limit => unreachable!(),
    };
    let kind = format!("{:?}", a.kind).to_lowercase();
    let decimal = prob.to_f64();
    let text = match a.format {
        TextFormat::Text => {
            let mut s = format!("{} = {decimal}\n", prob.rational_string());
            if let Some(l) = limit {
                s.push_str(&format!("limit as n grows = {l}\n"));
            }
            s
        }
        TextFormat::Json => format!(
            "{}\n",
            json!({
                "kind": kind,
                "n": n,
                "m": m,
                "rational": prob.rational_string(),
                "decimal": decimal,
                "limit": limit,
            })
        ),
    };
    emit(None, &text)
}

fn cmd_sample(a: &SampleArgs) -> CliResult<()> {
    let report = run_on_workers(a.common.workers, || {
        compare_exact_empirical(a.n, a.samples, a.common.seed)
    })?;
    emit(a.common.out.as_deref(), &render_report(&report, a.format))
}

fn parse_flag<T: std::str::FromStr<Err = Error>>(s: &str) -> CliResult<T> {
    s.parse().map_err(|e: Error| Failure::Usage(e.to_string()))
}

fn table2_settings(f: &AnnealFlags, runs: Option<u64>) -> CliResult<Table2Settings> {
    Ok(Table2Settings {
        runs,
        steps: f.steps,
        epoch_length: f.epoch,
        cooling_factor: f.cooling,
        initial_temperature: parse_flag::<InitialTemperature>(&f.t0)?,
        operator: parse_flag::<Operator>(&f.operator)?,
        objective: parse_flag::<Objective>(&f.objective)?,
        edge_probability: f.edge_prob,
        relabel: parse_flag::<RelabelMode>(&f.relabel)?,
        calibration_samples: f.calibration_samples,
    })
}

fn load_pair(path: &Path) -> CliResult<GraphPair> {
    let file =
        File::open(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    GraphPair::read_text(BufReader::new(file))
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn cmd_sa(a: &SaArgs) -> CliResult<()> {
    let settings = table2_settings(&a.anneal, None)?;
    let seed = a.common.seed;
    let pair = match &a.pair_in {
        Some(path) => load_pair(path)?,
        None => generate_pair(
            a.n,
            settings.edge_probability,
            settings.relabel,
            experiments::derive_seed(seed, experiments::stream::TABLE2_GRAPH, a.n as u64, 0),
        )?,
    };
    if let Some(path) = &a.pair_out {
        let mut w = BufWriter::new(File::create(path)?);
        pair.write_text(&mut w)?;
        w.flush()?;
    }
    let n = pair.n();
    let base = settings.config_for(
        n,
        experiments::derive_seed(seed, experiments::stream::TABLE2_ANNEAL, n as u64, 0),
    );
    let config = AnnealConfig {
        restarts: a.restarts,
        trace_interval: a
            .trace
            .as_ref()
            .map(|_| a.trace_interval.unwrap_or(base.epoch_length)),
        ..base
    };
    let result = run_on_workers(a.common.workers, || anneal_seeded(&pair, &config))?;
    if let (Some(path), Some(trace)) = (&a.trace, &result.trace) {
        let mut w = BufWriter::new(File::create(path)?);
        write_trace_csv(trace, &mut w)?;
        w.flush()?;
    }
    let precision = precision(&result.best_permutation, pair.ground_truth())?;
    let text = match a.format {
        TextFormat::Text => format!(
            "n = {n}\nobjective = {} ({})\ncorrect matches = {} of {n}\nprecision = {precision}\n\
             initial temperature = {}\naccepted moves = {} of {}\n",
            result.best_objective,
            config.objective,
            result.final_fixed_points,
            result.initial_temperature,
            result.accepted_count,
            config.steps * (u64::from(config.restarts) + 1),
        ),
        TextFormat::Json => {
            let mut s = serde_json::to_string_pretty(&json!({
                "n": n,
                "master_seed": seed,
                "config": config,
                "best_objective": result.best_objective,
                "correct_matches": result.final_fixed_points,
                "precision": precision.to_string(),
                "initial_temperature": result.initial_temperature,
                "accepted_count": result.accepted_count,
                "improved_count": result.improved_count,
                "best_permutation": result.best_permutation,
            }))
            .expect("result serializes");
            s.push('\n');
            s
        }
    };
    emit(a.common.out.as_deref(), &text)
}

fn cmd_table1(a: &Table1Args) -> CliResult<()> {
    let report = run_on_workers(a.common.workers, || {
        run_table1_with(
            &a.n_list,
            a.samples,
            a.threshold,
            a.common.seed,
            &mut |row| {
                eprintln!(
                    "table1: n={} count={} fraction={}",
                    row.n,
                    row.count,
                    experiments::format_sig6(row.fraction)
                );
            },
        )
    })?;
    emit(a.common.out.as_deref(), &render_report(&report, a.format))
}

fn cmd_table2(a: &Table2Args) -> CliResult<()> {
    let settings = table2_settings(&a.anneal, a.runs)?;
    let report = run_on_workers(a.common.workers, || {
        run_table2_with(
            &a.n_list,
            &settings,
            a.threshold,
            a.common.seed,
            &mut |row| {
                eprintln!(
                    "table2: n={} success={}/{}",
                    row.n, row.success_count, row.runs
                );
            },
        )
    })?;
    emit(a.common.out.as_deref(), &render_report(&report, a.format))
}

fn cmd_census(a: &CensusArgs) -> CliResult<()> {
    let n = a.n as usize;
    let counts = exhaustive_fixed_point_census(n)?;
    let expected = (0..=a.n)
        .map(|m| exact::rencontres(a.n, m).map(|g| g.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    let mismatches: Vec<usize> = (0..=n)
        .filter(|&m| counts[m].to_string() != expected[m])
        .collect();
    let text = match a.format {
        TextFormat::Text => {
            let mut s = String::from("m,count,rencontres,match\n");
            for m in 0..=n {
                let ok = if mismatches.contains(&m) { "no" } else { "yes" };
                s.push_str(&format!("{m},{},{},{ok}\n", counts[m], expected[m]));
            }
            s
        }
        TextFormat::Json => {
            let rows: Vec<_> = (0..=n)
                .map(|m| {
                    json!({
                        "m": m,
                        "count": counts[m],
                        "rencontres": expected[m],
                        "match": !mismatches.contains(&m),
                    })
                })
                .collect();
            format!(
                "{}\n",
                serde_json::to_string_pretty(&json!({ "n": n, "rows": rows }))
                    .expect("census serializes")
            )
        }
    };
    emit(None, &text)?;
    if mismatches.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!(
            "census disagrees with rencontres at m = {mismatches:?}"
        )))
    }
}
