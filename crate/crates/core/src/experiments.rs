//! Seeded replication harnesses: the random-permutation census, the
//! annealing success-rate table, and a per-bin comparison of sampled
//! fixed-point counts against the exact distribution.
//!
//! Work is split into independent units (sample chunks, annealing runs),
//! each with its own ChaCha8 stream keyed by `(master seed, experiment, n,
//! unit index)`. Results are gathered by unit index, so reports are
//! byte-identical for any number of rayon workers.

use std::time::Instant;

use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::anneal::{
    anneal_seeded, AnnealConfig, InitialTemperature, Objective, DEFAULT_CALIBRATION_SAMPLES,
    DEFAULT_COOLING_FACTOR, DEFAULT_TARGET_ACCEPTANCE,
};
use crate::error::{Error, Result};
use crate::exact::{self, ExactProbability};
use crate::graph::{generate_pair, RelabelMode};
use crate::permutation::{random_permutation, Operator};

pub const GENERATOR_ID: &str =
    "chacha8 (rand_chacha 0.3) keyed by splitmix64(master, experiment, n, index)";

/// Permutations drawn per independent stream in the sampling experiments.
pub const SAMPLE_CHUNK: u64 = 1000;

pub const TABLE1_N_VALUES: [usize; 7] = [20, 50, 100, 300, 500, 1000, 10_000];
pub const TABLE1_SAMPLES: u64 = 100_000;
pub const TABLE2_N_VALUES: [usize; 6] = [20, 50, 100, 300, 500, 1000];
pub const DEFAULT_THRESHOLD: usize = 3;
pub const DEFAULT_MASTER_SEED: u64 = 20_240_101;
pub const DEFAULT_EDGE_PROBABILITY: f64 = 0.5;

/// Stream identifiers mixed into every derived seed.
pub mod stream {
    pub const TABLE1: u64 = 1;
    pub const TABLE2_GRAPH: u64 = 2;
    pub const TABLE2_ANNEAL: u64 = 3;
    pub const COMPARISON: u64 = 4;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one work unit: a chained splitmix64 avalanche over
/// `(master, experiment, n, index)`.
pub fn derive_seed(master: u64, experiment: u64, n: u64, index: u64) -> u64 {
    [experiment, n, index]
        .into_iter()
        .fold(splitmix64(master), |h, x| splitmix64(h ^ x))
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool")
        .install(f)
}

/// `%.6g`-style rendering: six significant digits, trailing zeros trimmed.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One value of a report row, typed so CSV and JSON render it identically.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_sig6(*v),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Float(v) => json!(format_sig6(*v).parse::<f64>().expect("finite float")),
            Cell::Text(s) => json!(s),
        }
    }
}

pub trait ReportRow {
    const COLUMNS: &'static [&'static str];

    /// Values in `COLUMNS` order.
    fn cells(&self, master_seed: u64) -> Vec<Cell>;

    /// JSON-only exact renderings, keyed by field name.
    fn exact_fields(&self) -> Vec<(&'static str, String)>;
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metadata {
    pub master_seed: u64,
    pub generator: String,
    pub config: Value,
    pub duration_seconds: f64,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport<R> {
    pub rows: Vec<R>,
    pub metadata: Metadata,
}

impl<R: ReportRow> ExperimentReport<R> {
    pub fn to_csv(&self) -> String {
        let mut out = R::COLUMNS.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .cells(self.metadata.master_seed)
                .iter()
                .map(Cell::csv)
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Same fields as the CSV plus exact `num/den` strings and metadata.
    /// Wall-clock duration is left out unless `include_timing`, so that
    /// repeated runs stay byte-identical.
    pub fn to_json(&self, include_timing: bool) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                for (name, cell) in R::COLUMNS.iter().zip(row.cells(self.metadata.master_seed)) {
                    obj.insert((*name).to_string(), cell.json());
                }
                for (name, exact) in row.exact_fields() {
                    obj.insert(name.to_string(), json!(exact));
                }
                Value::Object(obj)
            })
            .collect();
        let mut meta = serde_json::to_value(&self.metadata).expect("metadata serializes");
        if !include_timing {
            meta.as_object_mut()
                .expect("object")
                .remove("duration_seconds");
        }
        let doc = json!({ "metadata": meta, "rows": rows });
        let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
        s.push('\n');
        s
    }
}

fn metadata(master_seed: u64, config: Value, started: Instant) -> Metadata {
    Metadata {
        master_seed,
        generator: GENERATOR_ID.to_string(),
        config,
        duration_seconds: started.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

/// `(fraction - p) / sqrt(p (1 - p) / samples)`; zero when `p` is 0 or 1.
pub fn z_score(fraction: f64, p: f64, samples: u64) -> f64 {
    let sigma = (p * (1.0 - p) / samples as f64).sqrt();
    if sigma == 0.0 {
        0.0
    } else {
        (fraction - p) / sigma
    }
}

/// Number of adjacent pairs in which the sequence increases.
pub fn adjacent_increases(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] > w[0]).count()
}

fn check_rows(n_values: &[usize], threshold: usize, min_n: usize) -> Result<Vec<usize>> {
    if n_values.is_empty() {
        return Err(Error::InvalidExperiment("no n values given".into()));
    }
    for &n in n_values {
        if n < min_n {
            return Err(Error::InvalidExperiment(format!(
                "row n={n}: n must be at least {min_n}"
            )));
        }
        if threshold >= n {
            return Err(Error::InvalidExperiment(format!(
                "row n={n}: threshold {threshold} must be below n"
            )));
        }
    }
    let mut sorted = n_values.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    Ok(sorted)
}

/// Splits `samples` into fixed-size chunks and applies `f(chunk_index,
/// chunk_len)` in parallel, returning results in chunk order.
fn chunked<T: Send>(samples: u64, f: impl Fn(u64, u64) -> T + Sync) -> Vec<T> {
    let chunks = samples.div_ceil(SAMPLE_CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = SAMPLE_CHUNK.min(samples - c * SAMPLE_CHUNK);
            f(c, len)
        })
        .collect()
}

fn identity_fixed_points(map: &[u32]) -> usize {
    map.iter()
        .enumerate()
        .filter(|&(i, &v)| i as u32 == v)
        .count()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table1Row {
    pub n: usize,
    pub samples: u64,
    pub threshold: usize,
    /// Permutations with more than `threshold` fixed points.
    pub count: u64,
    pub fraction: f64,
    pub exact_tail: ExactProbability,
    pub z_score: f64,
}

impl ReportRow for Table1Row {
    const COLUMNS: &'static [&'static str] = &[
        "n",
        "samples",
        "threshold",
        "count",
        "fraction",
        "exact_tail",
        "z_score",
        "master_seed",
    ];

    fn cells(&self, master_seed: u64) -> Vec<Cell> {
        vec![
            Cell::Int(self.n as u64),
            Cell::Int(self.samples),
            Cell::Int(self.threshold as u64),
            Cell::Int(self.count),
            Cell::Float(self.fraction),
            Cell::Float(self.exact_tail.to_f64()),
            Cell::Float(self.z_score),
            Cell::Int(master_seed),
        ]
    }

    fn exact_fields(&self) -> Vec<(&'static str, String)> {
        vec![
            (
                "fraction_rational",
                Ratio::new(self.count, self.samples).to_string(),
            ),
            ("exact_tail_rational", self.exact_tail.rational_string()),
        ]
    }
}

/// One census row: `samples` uniform permutations of size `n`, counting
/// those with more than `threshold` fixed points.
pub fn table1_row(n: usize, samples: u64, threshold: usize, master_seed: u64) -> Result<Table1Row> {
    check_rows(&[n], threshold, 1)?;
    if samples == 0 {
        return Err(Error::InvalidExperiment(
            "samples must be at least 1".into(),
        ));
    }
    let count: u64 = chunked(samples, |chunk, len| {
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(master_seed, stream::TABLE1, n as u64, chunk));
        (0..len)
            .filter(|_| {
                identity_fixed_points(random_permutation(n, &mut rng).as_zero_based()) > threshold
            })
            .count() as u64
    })
    .into_iter()
    .sum();
    let exact_tail = exact::tail_prob(n as u64, threshold as u64)?;
    let fraction = count as f64 / samples as f64;
    let z = z_score(fraction, exact_tail.to_f64(), samples);
    Ok(Table1Row {
        n,
        samples,
        threshold,
        count,
        fraction,
        exact_tail,
        z_score: z,
    })
}

/// Random-permutation census over several sizes. Rows come out sorted by
/// `n`; `on_row` sees each as it completes.
pub fn run_table1_with(
    n_values: &[usize],
    samples: u64,
    threshold: usize,
    master_seed: u64,
    on_row: &mut dyn FnMut(&Table1Row),
) -> Result<ExperimentReport<Table1Row>> {
    let started = Instant::now();
    let ns = check_rows(n_values, threshold, 1)?;
    if samples == 0 {
        return Err(Error::InvalidExperiment(
            "samples must be at least 1".into(),
        ));
    }
    let mut rows = Vec::with_capacity(ns.len());
    for n in &ns {
        let row = table1_row(*n, samples, threshold, master_seed)?;
        on_row(&row);
        rows.push(row);
    }
    let config = json!({ "n_values": ns, "samples": samples, "threshold": threshold });
    Ok(ExperimentReport {
        rows,
        metadata: metadata(master_seed, config, started),
    })
}

pub fn run_table1(
    n_values: &[usize],
    samples: u64,
    threshold: usize,
    master_seed: u64,
) -> Result<ExperimentReport<Table1Row>> {
    run_table1_with(n_values, samples, threshold, master_seed, &mut |_| {})
}

/// Temperature levels in a default schedule: the epoch length defaults to
/// `steps / 100`, which is `n` at the default budget of `100 n` steps.
pub const TEMPERATURE_LEVELS: u64 = 100;

/// Annealing settings for the success-rate table. `None` fields scale with
/// `n` as in [`AnnealConfig::for_size`] and [`default_runs`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table2Settings {
    pub runs: Option<u64>,
    pub steps: Option<u64>,
    pub epoch_length: Option<u64>,
    pub cooling_factor: f64,
    pub initial_temperature: InitialTemperature,
    pub operator: Operator,
    pub objective: Objective,
    pub edge_probability: f64,
    pub relabel: RelabelMode,
    pub calibration_samples: u32,
}

impl Default for Table2Settings {
    fn default() -> Self {
        Self {
            runs: None,
            steps: None,
            epoch_length: None,
            cooling_factor: DEFAULT_COOLING_FACTOR,
            initial_temperature: InitialTemperature::Auto {
                target_acceptance: DEFAULT_TARGET_ACCEPTANCE,
            },
            operator: Operator::Swap,
            objective: Objective::Structural,
            edge_probability: DEFAULT_EDGE_PROBABILITY,
            relabel: RelabelMode::Identity,
            calibration_samples: DEFAULT_CALIBRATION_SAMPLES,
        }
    }
}

/// Independent annealing runs per row when not overridden: 1000 up to
/// `n = 100`, 200 up to `n = 1000`, 50 beyond.
pub fn default_runs(n: usize) -> u64 {
    match n {
        0..=100 => 1000,
        101..=1000 => 200,
        _ => 50,
    }
}

impl Table2Settings {
    pub fn runs_for(&self, n: usize) -> u64 {
        self.runs.unwrap_or_else(|| default_runs(n))
    }

    pub fn config_for(&self, n: usize, seed: u64) -> AnnealConfig {
        let base = AnnealConfig::for_size(n);
        let steps = self.steps.unwrap_or(base.steps);
        AnnealConfig {
            steps,
            epoch_length: self
                .epoch_length
                .unwrap_or((steps / TEMPERATURE_LEVELS).max(1)),
            cooling_factor: self.cooling_factor,
            initial_temperature: self.initial_temperature,
            operator: self.operator,
            objective: self.objective,
            calibration_samples: self.calibration_samples,
            seed,
            ..base
        }
    }

    fn validate(&self) -> Result<()> {
        if self.runs == Some(0) {
            return Err(Error::InvalidExperiment("runs must be at least 1".into()));
        }
        if !(self.edge_probability > 0.0 && self.edge_probability < 1.0) {
            return Err(Error::EdgeProbability(self.edge_probability));
        }
        self.config_for(2, 0).validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table2Row {
    pub n: usize,
    pub runs: u64,
    pub threshold: usize,
    /// Runs whose best matching has more than `threshold` correct matches.
    pub success_count: u64,
    pub success_fraction: f64,
    pub objective: Objective,
    pub operator: Operator,
    pub steps: u64,
    pub epoch_length: u64,
    pub cooling_factor: f64,
    pub t0_mode: String,
    pub edge_probability: f64,
}

impl ReportRow for Table2Row {
    const COLUMNS: &'static [&'static str] = &[
        "n",
        "runs",
        "threshold",
        "success_count",
        "success_fraction",
        "objective",
        "operator",
        "steps",
        "epoch_length",
        "cooling_factor",
        "t0_mode",
        "edge_prob",
        "master_seed",
    ];

    fn cells(&self, master_seed: u64) -> Vec<Cell> {
        vec![
            Cell::Int(self.n as u64),
            Cell::Int(self.runs),
            Cell::Int(self.threshold as u64),
            Cell::Int(self.success_count),
            Cell::Float(self.success_fraction),
            Cell::Text(self.objective.to_string()),
            Cell::Text(self.operator.to_string()),
            Cell::Int(self.steps),
            Cell::Int(self.epoch_length),
            Cell::Float(self.cooling_factor),
            Cell::Text(self.t0_mode.clone()),
            Cell::Float(self.edge_probability),
            Cell::Int(master_seed),
        ]
    }

    fn exact_fields(&self) -> Vec<(&'static str, String)> {
        vec![(
            "success_fraction_rational",
            Ratio::new(self.success_count, self.runs).to_string(),
        )]
    }
}

/// Outcome of a single annealing run inside the success-rate table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOutcome {
    pub fixed_points: usize,
    pub best_objective: f64,
}

/// Runs `settings.runs_for(n)` independent anneals on fresh graph pairs and
/// returns their outcomes in run order.
pub fn table2_runs(
    n: usize,
    settings: &Table2Settings,
    master_seed: u64,
) -> Result<Vec<RunOutcome>> {
    settings.validate()?;
    if n < 2 {
        return Err(Error::SizeTooSmall { n, min: 2 });
    }
    (0..settings.runs_for(n))
        .into_par_iter()
        .map(|run| {
            let graph_seed = derive_seed(master_seed, stream::TABLE2_GRAPH, n as u64, run);
            let pair = generate_pair(n, settings.edge_probability, settings.relabel, graph_seed)?;
            let anneal_seed = derive_seed(master_seed, stream::TABLE2_ANNEAL, n as u64, run);
            let result = anneal_seeded(&pair, &settings.config_for(n, anneal_seed))?;
            Ok(RunOutcome {
                fixed_points: result.final_fixed_points,
                best_objective: result.best_objective,
            })
        })
        .collect()
}

pub fn table2_row(
    n: usize,
    settings: &Table2Settings,
    threshold: usize,
    master_seed: u64,
) -> Result<Table2Row> {
    check_rows(&[n], threshold, 2)?;
    let outcomes = table2_runs(n, settings, master_seed)?;
    let runs = outcomes.len() as u64;
    let success_count = outcomes
        .iter()
        .filter(|o| o.fixed_points > threshold)
        .count() as u64;
    let config = settings.config_for(n, 0);
    Ok(Table2Row {
        n,
        runs,
        threshold,
        success_count,
        success_fraction: success_count as f64 / runs as f64,
        objective: config.objective,
        operator: config.operator,
        steps: config.steps,
        epoch_length: config.epoch_length,
        cooling_factor: config.cooling_factor,
        t0_mode: config.initial_temperature.label(),
        edge_probability: settings.edge_probability,
    })
}

/// Annealing success rate over several graph sizes.
pub fn run_table2_with(
    n_values: &[usize],
    settings: &Table2Settings,
    threshold: usize,
    master_seed: u64,
    on_row: &mut dyn FnMut(&Table2Row),
) -> Result<ExperimentReport<Table2Row>> {
    let started = Instant::now();
    let ns = check_rows(n_values, threshold, 2)?;
    settings.validate()?;
    let mut rows = Vec::with_capacity(ns.len());
    for &n in &ns {
        let row = table2_row(n, settings, threshold, master_seed)?;
        on_row(&row);
        rows.push(row);
    }
    let config = json!({ "n_values": ns, "threshold": threshold, "settings": settings });
    Ok(ExperimentReport {
        rows,
        metadata: metadata(master_seed, config, started),
    })
}

pub fn run_table2(
    n_values: &[usize],
    settings: &Table2Settings,
    threshold: usize,
    master_seed: u64,
) -> Result<ExperimentReport<Table2Row>> {
    run_table2_with(n_values, settings, threshold, master_seed, &mut |_| {})
}

pub const COMPARISON_MAX_M: usize = 10;
pub const COMPARISON_MAX_N: usize = 10_000;
pub const COMPARISON_MIN_SAMPLES: u64 = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct BinComparison {
    pub m: usize,
    pub count: u64,
    pub fraction: f64,
    pub exact: ExactProbability,
    pub z_score: f64,
}

impl ReportRow for BinComparison {
    const COLUMNS: &'static [&'static str] =
        &["m", "count", "fraction", "exact", "z_score", "master_seed"];

    fn cells(&self, master_seed: u64) -> Vec<Cell> {
        vec![
            Cell::Int(self.m as u64),
            Cell::Int(self.count),
            Cell::Float(self.fraction),
            Cell::Float(self.exact.to_f64()),
            Cell::Float(self.z_score),
            Cell::Int(master_seed),
        ]
    }

    fn exact_fields(&self) -> Vec<(&'static str, String)> {
        vec![("exact_rational", self.exact.rational_string())]
    }
}

/// Empirical fixed-point histogram of `samples` uniform permutations of
/// size `n` against the exact distribution, for `m = 0..=min(n, 10)`.
/// Permutations with more fixed points than the last bin are not binned.
pub fn compare_exact_empirical(
    n: usize,
    samples: u64,
    master_seed: u64,
) -> Result<ExperimentReport<BinComparison>> {
    let started = Instant::now();
    if n == 0 || n > COMPARISON_MAX_N {
        return Err(Error::InvalidExperiment(format!(
            "n must lie in 1..={COMPARISON_MAX_N}, got {n}"
        )));
    }
    if samples < COMPARISON_MIN_SAMPLES {
        return Err(Error::InvalidExperiment(format!(
            "samples must be at least {COMPARISON_MIN_SAMPLES}, got {samples}"
        )));
    }
    let top = n.min(COMPARISON_MAX_M);
    let hist = chunked(samples, |chunk, len| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            master_seed,
            stream::COMPARISON,
            n as u64,
            chunk,
        ));
        let mut h = vec![0u64; top + 1];
        for _ in 0..len {
            let k = identity_fixed_points(random_permutation(n, &mut rng).as_zero_based());
            if k <= top {
                h[k] += 1;
            }
        }
        h
    })
    .into_iter()
    .fold(vec![0u64; top + 1], |mut acc, h| {
        acc.iter_mut().zip(h).for_each(|(a, b)| *a += b);
        acc
    });
    let rows = hist
        .into_iter()
        .enumerate()
        .map(|(m, count)| {
            let exact = exact::fixed_point_prob(n as u64, m as u64)?;
            let fraction = count as f64 / samples as f64;
            Ok(BinComparison {
                m,
                count,
                fraction,
                z_score: z_score(fraction, exact.to_f64(), samples),
                exact,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let config = json!({ "n": n, "samples": samples });
    Ok(ExperimentReport {
        rows,
        metadata: metadata(master_seed, config, started),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(0.0187), "0.0187");
        assert_eq!(format_sig6(0.018988156876), "0.0189882");
        assert_eq!(format_sig6(1.0), "1");
        assert_eq!(format_sig6(0.95), "0.95");
        assert_eq!(format_sig6(-2.345678), "-2.34568");
        assert_eq!(format_sig6(123456.7), "123457");
        assert_eq!(format_sig6(1234567.0), "1.23457e6");
        assert_eq!(format_sig6(9.9999996), "10");
        assert_eq!(format_sig6(1.0e-7), "1e-7");
        assert_eq!(format_sig6(2.5e-5), "2.5e-5");
        assert_eq!(format_sig6(0.00012345678), "0.000123457");
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = derive_seed(1, stream::TABLE1, 20, 0);
        assert_eq!(a, derive_seed(1, stream::TABLE1, 20, 0));
        assert_ne!(a, derive_seed(1, stream::TABLE1, 20, 1));
        assert_ne!(a, derive_seed(1, stream::TABLE1, 21, 0));
        assert_ne!(a, derive_seed(1, stream::TABLE2_GRAPH, 20, 0));
        assert_ne!(a, derive_seed(2, stream::TABLE1, 20, 0));
    }

    #[test]
    fn inversion_counting() {
        assert_eq!(adjacent_increases(&[0.4, 0.2, 0.2, 0.1]), 0);
        assert_eq!(adjacent_increases(&[0.4, 0.2, 0.3, 0.1]), 1);
        assert_eq!(adjacent_increases(&[]), 0);
    }

    #[test]
    fn z_score_degenerate() {
        assert_eq!(z_score(1.0, 1.0, 10), 0.0);
        assert!((z_score(0.6, 0.5, 100) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn table1_threshold_at_n_minus_one() {
        let row = table1_row(5, 2000, 4, 9).unwrap();
        // Only the identity has more than 4 fixed points.
        assert_eq!(row.exact_tail.to_string(), "1/120");
        assert!(row.count <= 40, "{}", row.count);
    }

    #[test]
    fn table1_rejects_bad_input() {
        assert!(run_table1(&[20], 0, 3, 1).is_err());
        assert!(run_table1(&[3], 10, 3, 1).is_err());
        assert!(run_table1(&[], 10, 3, 1).is_err());
    }

    #[test]
    fn table1_rows_sorted_and_csv_shape() {
        let report = run_table1(&[50, 20], 3000, 3, 4).unwrap();
        assert_eq!(
            report.rows.iter().map(|r| r.n).collect::<Vec<_>>(),
            vec![20, 50]
        );
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "n,samples,threshold,count,fraction,exact_tail,z_score,master_seed"
        );
        assert!(lines.next().unwrap().starts_with("20,3000,3,"));
        assert!(lines.next().unwrap().ends_with(",4"));
        assert!(lines.next().is_none());
    }

    #[test]
    fn table2_single_run_fraction_is_binary() {
        let settings = Table2Settings {
            runs: Some(1),
            ..Default::default()
        };
        let row = table2_row(20, &settings, 3, 11).unwrap();
        assert_eq!(row.runs, 1);
        assert!(row.success_fraction == 0.0 || row.success_fraction == 1.0);
        assert_eq!(row.steps, 2000);
        assert_eq!(row.epoch_length, 20);
        let longer = Table2Settings {
            steps: Some(50_000),
            ..Default::default()
        };
        assert_eq!(longer.config_for(20, 0).epoch_length, 500);
        assert_eq!(row.t0_mode, "auto:0.8");
    }

    #[test]
    fn table2_rejects_bad_settings() {
        let zero_runs = Table2Settings {
            runs: Some(0),
            ..Default::default()
        };
        assert!(run_table2(&[20], &zero_runs, 3, 1).is_err());
        let hot = Table2Settings {
            cooling_factor: 1.5,
            ..Default::default()
        };
        assert!(matches!(
            run_table2(&[20], &hot, 3, 1),
            Err(Error::InvalidConfig(_))
        ));
        let dense = Table2Settings {
            edge_probability: 1.0,
            ..Default::default()
        };
        assert!(run_table2(&[20], &dense, 3, 1).is_err());
        assert!(run_table2(&[3], &Table2Settings::default(), 3, 1).is_err());
    }

    #[test]
    fn default_run_counts() {
        assert_eq!(default_runs(20), 1000);
        assert_eq!(default_runs(100), 1000);
        assert_eq!(default_runs(300), 200);
        assert_eq!(default_runs(1000), 200);
        assert_eq!(default_runs(10_000), 50);
    }

    #[test]
    fn comparison_bounds() {
        assert!(compare_exact_empirical(8, 999, 1).is_err());
        assert!(compare_exact_empirical(10_001, 1000, 1).is_err());
        assert!(compare_exact_empirical(0, 1000, 1).is_err());
        let report = compare_exact_empirical(5, 2000, 1).unwrap();
        assert_eq!(report.rows.len(), 6);
        // Exactly n - 1 fixed points never happens.
        assert_eq!(report.rows[4].count, 0);
        assert_eq!(report.rows.iter().map(|r| r.count).sum::<u64>(), 2000);
    }

    #[test]
    fn json_mirrors_csv() {
        let report = run_table1(&[20], 2000, 3, 5).unwrap();
        let v: Value = serde_json::from_str(&report.to_json(false)).unwrap();
        assert!(v["metadata"].get("duration_seconds").is_none());
        let timed: Value = serde_json::from_str(&report.to_json(true)).unwrap();
        assert!(timed["metadata"]["duration_seconds"].is_number());
        let row = &v["rows"][0];
        let csv = report.to_csv();
        let fields: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row["count"].as_u64().unwrap().to_string(), fields[3]);
        assert_eq!(
            row["fraction"].as_f64().unwrap(),
            fields[4].parse::<f64>().unwrap()
        );
        assert_eq!(row["master_seed"], 5);
        assert!(row["exact_tail_rational"].as_str().unwrap().contains('/'));
    }
}
