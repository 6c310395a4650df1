//! Metropolis simulated annealing over permutations with a geometric
//! cooling schedule.
//!
//! Objective values are raw integer counts: mismatched vertex pairs for
//! [`Objective::Structural`], misplaced elements for [`Objective::Oracle`].
//! Temperatures are in the same units.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, GraphPair, PermutedView};
use crate::permutation::{self, count_fixed_points, distinct_pair, Operator, Permutation};

/// Returned by [`calibrate_initial_temperature`] when no uphill move is
/// found.
pub const FALLBACK_TEMPERATURE: f64 = 1.0;

pub const DEFAULT_COOLING_FACTOR: f64 = 0.95;
pub const DEFAULT_TARGET_ACCEPTANCE: f64 = 0.8;
pub const DEFAULT_CALIBRATION_SAMPLES: u32 = 500;
pub const DEFAULT_STEPS_PER_VERTEX: u64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Edge/non-edge disagreements between the matched graphs.
    Structural,
    /// Misplaced elements against the ground truth.
    Oracle,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::Structural => "structural",
            Objective::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "structural" => Ok(Objective::Structural),
            "oracle" => Ok(Objective::Oracle),
            other => Err(Error::Parse(format!("unknown objective {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialTemperature {
    /// Calibrated so that this fraction of random uphill moves is accepted.
    Auto {
        target_acceptance: f64,
    },
    Fixed(f64),
}

impl InitialTemperature {
    /// `auto` or `auto:<target>` or a number.
    pub fn label(&self) -> String {
        match self {
            InitialTemperature::Auto { target_acceptance } => format!("auto:{target_acceptance}"),
            InitialTemperature::Fixed(t) => format!("{t}"),
        }
    }
}

impl FromStr for InitialTemperature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(InitialTemperature::Auto {
                target_acceptance: DEFAULT_TARGET_ACCEPTANCE,
            });
        }
        if let Some(t) = s.strip_prefix("auto:") {
            let target_acceptance = t
                .parse()
                .map_err(|e| Error::Parse(format!("bad acceptance target {t:?}: {e}")))?;
            return Ok(InitialTemperature::Auto { target_acceptance });
        }
        s.parse()
            .map(InitialTemperature::Fixed)
            .map_err(|e| Error::Parse(format!("bad temperature {s:?}: {e}")))
    }
}

/// How energy changes are evaluated. Both paths make identical decisions;
/// full recomputation exists to check the incremental one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Evaluation {
    #[default]
    Incremental,
    FullRecompute,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    /// Proposals per chain.
    pub steps: u64,
    pub initial_temperature: InitialTemperature,
    /// Temperature multiplier applied after every epoch.
    pub cooling_factor: f64,
    /// Proposals per temperature level.
    pub epoch_length: u64,
    pub operator: Operator,
    pub objective: Objective,
    pub seed: u64,
    /// Random draws used by automatic temperature calibration.
    pub calibration_samples: u32,
    /// Extra independent chains from fresh random starts. Off (0) for
    /// replication runs.
    pub restarts: u32,
    pub evaluation: Evaluation,
    /// Record a trace sample every this many steps.
    pub trace_interval: Option<u64>,
}

impl AnnealConfig {
    /// Replication defaults for graphs with `n` vertices: `100 n` swap
    /// proposals, epochs of `n`, cooling 0.95, auto temperature at 80 %
    /// uphill acceptance, structural objective.
    pub fn for_size(n: usize) -> Self {
        let n = n.max(1) as u64;
        Self {
            steps: DEFAULT_STEPS_PER_VERTEX * n,
            initial_temperature: InitialTemperature::Auto {
                target_acceptance: DEFAULT_TARGET_ACCEPTANCE,
            },
            cooling_factor: DEFAULT_COOLING_FACTOR,
            epoch_length: n,
            operator: Operator::Swap,
            objective: Objective::Structural,
            seed: 0,
            calibration_samples: DEFAULT_CALIBRATION_SAMPLES,
            restarts: 0,
            evaluation: Evaluation::Incremental,
            trace_interval: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.steps == 0 {
            return bad("steps must be at least 1".into());
        }
        if self.epoch_length == 0 {
            return bad("epoch length must be at least 1".into());
        }
        if !(self.cooling_factor > 0.0 && self.cooling_factor < 1.0) {
            return bad(format!(
                "cooling factor must lie in (0, 1), got {}",
                self.cooling_factor
            ));
        }
        match self.initial_temperature {
            InitialTemperature::Fixed(t) if !(t.is_finite() && t >= 0.0) => {
                return bad(format!(
                    "initial temperature must be finite and >= 0, got {t}"
                ));
            }
            InitialTemperature::Auto {
                target_acceptance: a,
            } if !(a > 0.0 && a < 1.0) => {
                return bad(format!("target acceptance must lie in (0, 1), got {a}"));
            }
            _ => {}
        }
        if matches!(self.initial_temperature, InitialTemperature::Auto { .. })
            && self.calibration_samples == 0
        {
            return bad("calibration needs at least one sample".into());
        }
        if self.trace_interval == Some(0) {
            return bad("trace interval must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub step: u64,
    pub temperature: f64,
    pub current: f64,
    pub best: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnnealResult {
    pub best_permutation: Permutation,
    pub best_objective: f64,
    /// Correct matches of `best_permutation` against the ground truth.
    pub final_fixed_points: usize,
    pub accepted_count: u64,
    /// Accepted moves that strictly lowered the objective.
    pub improved_count: u64,
    pub initial_temperature: f64,
    pub trace: Option<Vec<TraceSample>>,
}

/// Writes a trace as CSV with columns `step,temperature,current,best`.
pub fn write_trace_csv<W: Write>(trace: &[TraceSample], mut w: W) -> io::Result<()> {
    writeln!(w, "step,temperature,current,best")?;
    for s in trace {
        writeln!(w, "{},{},{},{}", s.step, s.temperature, s.current, s.best)?;
    }
    Ok(())
}

/// One Markov chain's mutable state.
struct Chain<'a> {
    pair: &'a GraphPair,
    objective: Objective,
    evaluation: Evaluation,
    current: Vec<u32>,
    scratch: Vec<u32>,
    view: Option<PermutedView>,
    value: i64,
}

impl<'a> Chain<'a> {
    fn new(
        pair: &'a GraphPair,
        objective: Objective,
        operator: Operator,
        evaluation: Evaluation,
        start: Vec<u32>,
    ) -> Self {
        let value = full_value(pair, objective, &start);
        let view = (evaluation == Evaluation::Incremental
            && objective == Objective::Structural
            && operator == Operator::Swap)
            .then(|| PermutedView::new(pair, &start));
        Self {
            pair,
            objective,
            evaluation,
            scratch: start.clone(),
            current: start,
            view,
            value,
        }
    }

    /// A chain used only to evaluate proposals from `state`; never committed.
    fn probe(pair: &'a GraphPair, objective: Objective, state: Vec<u32>) -> Self {
        Self {
            pair,
            objective,
            evaluation: Evaluation::Incremental,
            scratch: state.clone(),
            current: state,
            view: None,
            value: 0,
        }
    }

    /// Proposes a move into `scratch` and returns its energy change. The
    /// candidate is committed with [`Chain::commit`].
    fn propose<R: Rng + ?Sized>(&mut self, op: Operator, rng: &mut R) -> (i64, usize, usize) {
        let n = self.current.len();
        let (a, b) = distinct_pair(n, rng);
        if op == Operator::Swap {
            // Swaps never touch `scratch`; it is rebuilt on commit.
            if let Some(view) = &self.view {
                return (view.delta_swap(self.pair, a, b), a, b);
            }
        }
        self.scratch.copy_from_slice(&self.current);
        let (lo, hi) = permutation::apply_move(op, &mut self.scratch, a, b, rng);
        let delta = match self.evaluation {
            Evaluation::FullRecompute => {
                full_value(self.pair, self.objective, &self.scratch) - self.value
            }
            Evaluation::Incremental => match self.objective {
                Objective::Structural => {
                    graph::delta_general_raw(self.pair, &self.current, &self.scratch, lo, hi)
                }
                Objective::Oracle => {
                    let gt = self.pair.ground_truth().as_zero_based();
                    let fixed = |p: &[u32]| (lo..=hi).filter(|&i| p[i] == gt[i]).count() as i64;
                    fixed(&self.current) - fixed(&self.scratch)
                }
            },
        };
        (delta, a, b)
    }

    fn commit(&mut self, op: Operator, delta: i64, a: usize, b: usize) {
        if let (Operator::Swap, Some(view)) = (op, &mut self.view) {
            view.apply_swap(a, b);
            self.current.swap(a, b);
        } else {
            std::mem::swap(&mut self.current, &mut self.scratch);
        }
        self.value += delta;
    }
}

fn full_value(pair: &GraphPair, objective: Objective, p: &[u32]) -> i64 {
    match objective {
        Objective::Structural => graph::structural_energy_raw(pair, p) as i64,
        Objective::Oracle => {
            let gt = pair.ground_truth().as_zero_based();
            p.iter().zip(gt).filter(|(a, b)| a != b).count() as i64
        }
    }
}

/// Metropolis acceptance: downhill and sideways moves always, uphill moves
/// with probability `exp(-delta / t)`. Draws a uniform only for uphill
/// moves at positive temperature.
#[inline]
fn accept<R: Rng + ?Sized>(delta: i64, temperature: f64, rng: &mut R) -> bool {
    if delta <= 0 {
        return true;
    }
    if temperature <= 0.0 {
        return false;
    }
    rng.gen::<f64>() < (-(delta as f64) / temperature).exp()
}

/// Runs the annealer with a ChaCha8 stream seeded from `config.seed`.
pub fn anneal_seeded(pair: &GraphPair, config: &AnnealConfig) -> Result<AnnealResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    anneal(pair, config, &mut rng)
}

/// Anneals from a uniform random start and returns the best state seen.
/// Deterministic for a given `(pair, config, rng state)`.
pub fn anneal<R: Rng + ?Sized>(
    pair: &GraphPair,
    config: &AnnealConfig,
    rng: &mut R,
) -> Result<AnnealResult> {
    config.validate()?;
    let n = pair.n();
    if n < 2 {
        return Err(Error::SizeTooSmall { n, min: 2 });
    }
    let t0 = match config.initial_temperature {
        InitialTemperature::Fixed(t) => t,
        InitialTemperature::Auto { target_acceptance } => calibrate_initial_temperature(
            pair,
            config.operator,
            config.objective,
            target_acceptance,
            config.calibration_samples,
            rng,
        )?,
    };

    let op = config.operator;
    let mut best: Option<(i64, Vec<u32>)> = None;
    let mut accepted = 0u64;
    let mut improved = 0u64;
    let mut trace = config.trace_interval.map(|_| Vec::new());
    let mut global_step = 0u64;

    for _ in 0..=config.restarts {
        let start = permutation::random_permutation(n, rng);
        let mut chain = Chain::new(
            pair,
            config.objective,
            op,
            config.evaluation,
            start.as_zero_based().to_vec(),
        );
        let mut chain_best = chain.value;
        let mut chain_best_state = chain.current.clone();
        let mut temperature = t0;
        let record = |trace: &mut Option<Vec<TraceSample>>, step, t, cur: i64, b: i64| {
            if let Some(tr) = trace {
                tr.push(TraceSample {
                    step,
                    temperature: t,
                    current: cur as f64,
                    best: b as f64,
                });
            }
        };
        record(
            &mut trace,
            global_step,
            temperature,
            chain.value,
            chain_best,
        );

        for step in 0..config.steps {
            if step > 0 && step % config.epoch_length == 0 {
                temperature *= config.cooling_factor;
            }
            let (delta, a, b) = chain.propose(op, rng);
            if accept(delta, temperature, rng) {
                chain.commit(op, delta, a, b);
                accepted += 1;
                if delta < 0 {
                    improved += 1;
                }
                if chain.value < chain_best {
                    chain_best = chain.value;
                    chain_best_state.copy_from_slice(&chain.current);
                }
            }
            global_step += 1;
            if let Some(every) = config.trace_interval {
                if (step + 1) % every == 0 || step + 1 == config.steps {
                    record(
                        &mut trace,
                        global_step,
                        temperature,
                        chain.value,
                        chain_best,
                    );
                }
            }
        }
        if best.as_ref().is_none_or(|(v, _)| chain_best < *v) {
            best = Some((chain_best, chain_best_state));
        }
    }

    let (best_value, best_state) = best.expect("at least one chain runs");
    let best_permutation = Permutation::from_zero_based_unchecked(best_state);
    let final_fixed_points = count_fixed_points(&best_permutation, pair.ground_truth())?;
    Ok(AnnealResult {
        best_permutation,
        best_objective: best_value as f64,
        final_fixed_points,
        accepted_count: accepted,
        improved_count: improved,
        initial_temperature: t0,
        trace,
    })
}

/// Picks a starting temperature at which a random uphill proposal from a
/// random state is accepted with mean probability `target_acceptance`.
///
/// Uphill deltas are collected from `samples` random (state, move) draws,
/// then `T` is bisected to a relative tolerance of 1e-3. Returns
/// [`FALLBACK_TEMPERATURE`] when no draw is uphill.
pub fn calibrate_initial_temperature<R: Rng + ?Sized>(
    pair: &GraphPair,
    operator: Operator,
    objective: Objective,
    target_acceptance: f64,
    samples: u32,
    rng: &mut R,
) -> Result<f64> {
    if !(target_acceptance > 0.0 && target_acceptance < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "target acceptance must lie in (0, 1), got {target_acceptance}"
        )));
    }
    let n = pair.n();
    if n < 2 {
        return Err(Error::SizeTooSmall { n, min: 2 });
    }
    let uphill = sample_uphill_deltas(pair, operator, objective, samples, rng);
    if uphill.is_empty() {
        return Ok(FALLBACK_TEMPERATURE);
    }
    Ok(solve_temperature(&uphill, target_acceptance))
}

pub(crate) fn sample_uphill_deltas<R: Rng + ?Sized>(
    pair: &GraphPair,
    operator: Operator,
    objective: Objective,
    samples: u32,
    rng: &mut R,
) -> Vec<f64> {
    let n = pair.n();
    let mut uphill = Vec::new();
    for _ in 0..samples {
        let state = permutation::random_permutation(n, rng)
            .as_zero_based()
            .to_vec();
        let delta = if operator == Operator::Swap && objective == Objective::Structural {
            let (a, b) = distinct_pair(n, rng);
            graph::delta_swap_raw(pair, &state, a, b)
        } else {
            Chain::probe(pair, objective, state)
                .propose(operator, rng)
                .0
        };
        if delta > 0 {
            uphill.push(delta as f64);
        }
    }
    uphill
}

fn mean_acceptance(uphill: &[f64], t: f64) -> f64 {
    uphill.iter().map(|d| (-d / t).exp()).sum::<f64>() / uphill.len() as f64
}

fn solve_temperature(uphill: &[f64], target: f64) -> f64 {
    let mut hi = uphill.iter().cloned().fold(0.0, f64::max);
    while mean_acceptance(uphill, hi) < target {
        hi *= 2.0;
    }
    let mut lo = hi;
    while mean_acceptance(uphill, lo) >= target {
        lo /= 2.0;
    }
    while (hi - lo) > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        if mean_acceptance(uphill, mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
