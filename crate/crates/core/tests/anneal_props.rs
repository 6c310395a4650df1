use annealmatch_core::anneal::{calibrate_initial_temperature, Evaluation};
use annealmatch_core::graph::{oracle_energy, structural_energy};
use annealmatch_core::permutation::count_fixed_points;
use annealmatch_core::{
    anneal, anneal_seeded, generate_pair, AnnealConfig, InitialTemperature, Objective, Operator,
    RelabelMode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixed(t: f64) -> InitialTemperature {
    InitialTemperature::Fixed(t)
}

#[test]
fn small_graphs_are_solved() {
    let mut solved = 0;
    for run in 0..100u64 {
        let pair = generate_pair(8, 0.5, RelabelMode::Random, 1000 + run).unwrap();
        let config = AnnealConfig {
            steps: 100_000,
            // 100 temperature levels, as with the default budget.
            epoch_length: 1000,
            seed: run,
            ..AnnealConfig::for_size(8)
        };
        let result = anneal_seeded(&pair, &config).unwrap();
        assert_eq!(
            structural_energy(&pair, &result.best_permutation).unwrap() as f64,
            result.best_objective
        );
        solved += (result.best_objective == 0.0) as u32;
    }
    assert!(solved >= 90, "{solved} of 100 reached zero energy");
}

#[test]
fn zero_temperature_never_goes_uphill() {
    for run in 0..100u64 {
        let pair = generate_pair(30, 0.5, RelabelMode::Random, run).unwrap();
        let op = Operator::ALL[run as usize % 4];
        let config = AnnealConfig {
            steps: 3000,
            initial_temperature: fixed(0.0),
            operator: op,
            seed: run,
            trace_interval: Some(1),
            ..AnnealConfig::for_size(30)
        };
        let result = anneal_seeded(&pair, &config).unwrap();
        let trace = result.trace.unwrap();
        assert_eq!(trace.len(), 3001);
        for w in trace.windows(2) {
            assert!(w[1].best <= w[0].best, "{op} run {run}");
            assert!(w[1].current <= w[0].current, "{op} run {run}");
        }
        assert_eq!(result.best_objective, trace.last().unwrap().best);
    }
}

#[test]
fn hot_chains_accept_nearly_everything() {
    let pair = generate_pair(50, 0.5, RelabelMode::Random, 5).unwrap();
    let config = AnnealConfig {
        steps: 20_000,
        initial_temperature: fixed(1.0e6),
        cooling_factor: 0.999_999,
        seed: 5,
        ..AnnealConfig::for_size(50)
    };
    let result = anneal_seeded(&pair, &config).unwrap();
    let rate = result.accepted_count as f64 / config.steps as f64;
    assert!(rate > 0.99, "{rate}");
}

#[test]
fn incremental_and_full_evaluation_agree() {
    for (k, op) in Operator::ALL.into_iter().enumerate() {
        for objective in [Objective::Structural, Objective::Oracle] {
            let pair = generate_pair(40, 0.4, RelabelMode::Random, k as u64).unwrap();
            let base = AnnealConfig {
                steps: 4000,
                operator: op,
                objective,
                seed: 17 + k as u64,
                trace_interval: Some(7),
                ..AnnealConfig::for_size(40)
            };
            let full = AnnealConfig {
                evaluation: Evaluation::FullRecompute,
                ..base.clone()
            };
            assert_eq!(
                anneal_seeded(&pair, &base).unwrap(),
                anneal_seeded(&pair, &full).unwrap(),
                "{op} {objective}"
            );
        }
    }
}

#[test]
fn best_is_minimum_of_visited_states() {
    for (k, op) in Operator::ALL.into_iter().enumerate() {
        let pair = generate_pair(25, 0.5, RelabelMode::Random, 40 + k as u64).unwrap();
        let config = AnnealConfig {
            steps: 2500,
            operator: op,
            seed: k as u64,
            trace_interval: Some(1),
            ..AnnealConfig::for_size(25)
        };
        let result = anneal_seeded(&pair, &config).unwrap();
        let trace = result.trace.unwrap();
        let visited_min = trace
            .iter()
            .map(|s| s.current)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(result.best_objective, visited_min, "{op}");
        assert_eq!(
            result.final_fixed_points,
            count_fixed_points(&result.best_permutation, pair.ground_truth()).unwrap()
        );
    }
}

#[test]
fn oracle_objective_counts_misplaced() {
    let pair = generate_pair(30, 0.5, RelabelMode::Random, 8).unwrap();
    let config = AnnealConfig {
        objective: Objective::Oracle,
        seed: 8,
        ..AnnealConfig::for_size(30)
    };
    let result = anneal_seeded(&pair, &config).unwrap();
    let misplaced = oracle_energy(&pair, &result.best_permutation).unwrap() * 30;
    assert_eq!(result.best_objective, *misplaced.numer() as f64);
    assert_eq!(
        result.best_objective,
        (30 - result.final_fixed_points) as f64
    );
}

/// Fraction of uphill moves from random states accepted at temperature `t`.
fn uphill_acceptance(n: usize, t: f64, seed: u64) -> f64 {
    let pair = generate_pair(n, 0.5, RelabelMode::Random, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut uphill, mut accepted) = (0u32, 0u32);
    while uphill < 4000 {
        let p = annealmatch_core::permutation::random_permutation(n, &mut rng);
        let q = Operator::Swap.perturb(&p, &mut rng).unwrap();
        let delta = structural_energy(&pair, &q).unwrap() as f64
            - structural_energy(&pair, &p).unwrap() as f64;
        if delta > 0.0 {
            uphill += 1;
            accepted += (rng.gen::<f64>() < (-delta / t).exp()) as u32;
        }
    }
    accepted as f64 / uphill as f64
}

#[test]
fn calibrated_temperature_hits_target() {
    let pair = generate_pair(100, 0.5, RelabelMode::Random, 21).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let t0 = calibrate_initial_temperature(
        &pair,
        Operator::Swap,
        Objective::Structural,
        0.8,
        500,
        &mut rng,
    )
    .unwrap();
    let rate = uphill_acceptance(100, t0, 21);
    assert!((0.7..=0.9).contains(&rate), "t0={t0} rate={rate}");

    let mut last = 0.0;
    for target in [0.2, 0.4, 0.6, 0.8, 0.95] {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let t = calibrate_initial_temperature(
            &pair,
            Operator::Swap,
            Objective::Structural,
            target,
            500,
            &mut rng,
        )
        .unwrap();
        assert!(t > last, "target {target}: {t} <= {last}");
        last = t;
    }
}

#[test]
fn seeded_runs_repeat_and_generic_rng_matches() {
    let pair = generate_pair(60, 0.5, RelabelMode::Random, 3).unwrap();
    let config = AnnealConfig {
        seed: 99,
        trace_interval: Some(60),
        restarts: 2,
        ..AnnealConfig::for_size(60)
    };
    let a = anneal_seeded(&pair, &config).unwrap();
    assert_eq!(a, anneal_seeded(&pair, &config).unwrap());
    let b = anneal(&pair, &config, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
    assert_eq!(a, b);
    let other = AnnealConfig {
        seed: 100,
        ..config
    };
    assert_ne!(a.trace, anneal_seeded(&pair, &other).unwrap().trace);
}

#[test]
fn invalid_configs_rejected() {
    let pair = generate_pair(10, 0.5, RelabelMode::Random, 1).unwrap();
    let base = AnnealConfig::for_size(10);
    for bad in [
        AnnealConfig {
            steps: 0,
            ..base.clone()
        },
        AnnealConfig {
            epoch_length: 0,
            ..base.clone()
        },
        AnnealConfig {
            cooling_factor: 1.0,
            ..base.clone()
        },
        AnnealConfig {
            initial_temperature: fixed(-1.0),
            ..base.clone()
        },
        AnnealConfig {
            initial_temperature: fixed(f64::NAN),
            ..base.clone()
        },
        AnnealConfig {
            initial_temperature: InitialTemperature::Auto {
                target_acceptance: 1.0,
            },
            ..base.clone()
        },
    ] {
        assert!(anneal_seeded(&pair, &bad).is_err(), "{bad:?}");
    }
}
