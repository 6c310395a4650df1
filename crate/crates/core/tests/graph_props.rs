use annealmatch_core::graph::{
    generate_pair, generate_pair_with_rng, oracle_energy, structural_energy,
    structural_energy_delta_swap, GraphPair, RelabelMode,
};
use annealmatch_core::permutation::{random_permutation, swap_at};
use annealmatch_core::Permutation;
use num_rational::Ratio;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Mismatched pairs computed straight from the definition, reading both
/// graphs through `get`.
fn naive_energy(pair: &GraphPair, p: &Permutation) -> u64 {
    let n = pair.n();
    let mut total = 0;
    for i in 1..=n {
        for j in i + 1..=n {
            let (pi, pj) = (p.get(i).unwrap() - 1, p.get(j).unwrap() - 1);
            total +=
                (pair.adjacency_1().get(i - 1, j - 1) != pair.adjacency_2().get(pi, pj)) as u64;
        }
    }
    total
}

fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in all_permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n);
            out.push(p);
        }
    }
    out
}

#[test]
fn swap_deltas_match_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for n in [10, 50, 200] {
        let pair = generate_pair(n, 0.5, RelabelMode::Random, rng.gen()).unwrap();
        let mut p = random_permutation(n, &mut rng);
        let mut e = structural_energy(&pair, &p).unwrap();
        for _ in 0..10_000 {
            let i = rng.gen_range(1..=n);
            let j = loop {
                let j = rng.gen_range(1..=n);
                if j != i {
                    break j;
                }
            };
            let delta = structural_energy_delta_swap(&pair, &p, i, j).unwrap();
            let q = swap_at(&p, i, j).unwrap();
            let recomputed = structural_energy(&pair, &q).unwrap();
            assert_eq!(e as i64 + delta, recomputed as i64, "n={n}");
            // Walk along so deltas are taken from varied states.
            if rng.gen_bool(0.5) {
                p = q;
                e = recomputed;
            }
        }
    }
}

#[test]
fn energy_matches_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [2, 3, 17, 64, 65, 130] {
        for mode in [RelabelMode::Identity, RelabelMode::Random] {
            let pair = generate_pair(n, 0.3, mode, rng.gen()).unwrap();
            for _ in 0..5 {
                let p = random_permutation(n, &mut rng);
                assert_eq!(
                    structural_energy(&pair, &p).unwrap(),
                    naive_energy(&pair, &p)
                );
            }
            assert_eq!(structural_energy(&pair, pair.ground_truth()).unwrap(), 0);
        }
    }
}

#[test]
fn relabelling_only_moves_the_optimum() {
    // Same seed gives the same first graph; the relabelled pair's energy at
    // truth∘r equals the unrelabelled pair's energy at r, for every r.
    for n in 2..=6 {
        for seed in 0..5u64 {
            let plain = generate_pair(n, 0.5, RelabelMode::Identity, seed).unwrap();
            let relabelled = generate_pair(n, 0.5, RelabelMode::Random, seed).unwrap();
            assert_eq!(plain.adjacency_1(), relabelled.adjacency_1());
            let truth = relabelled.ground_truth();
            let mut minimum = u64::MAX;
            for r in all_permutations(n) {
                let r = Permutation::from_one_based(&r).unwrap();
                let composed: Vec<usize> = r
                    .to_one_based()
                    .iter()
                    .map(|&v| truth.get(v).unwrap())
                    .collect();
                let composed = Permutation::from_one_based(&composed).unwrap();
                let e = structural_energy(&plain, &r).unwrap();
                assert_eq!(structural_energy(&relabelled, &composed).unwrap(), e);
                minimum = minimum.min(e);
            }
            assert_eq!(minimum, 0);
        }
    }
}

#[test]
fn oracle_energy_counts_misplaced_vertices() {
    let pair = generate_pair(5, 0.5, RelabelMode::Identity, 3).unwrap();
    let p = Permutation::from_one_based(&[3, 2, 1, 4, 5]).unwrap();
    assert_eq!(oracle_energy(&pair, &p).unwrap(), Ratio::new(2, 5));
}

#[test]
fn generation_is_seeded() {
    let a = generate_pair(40, 0.5, RelabelMode::Random, 99).unwrap();
    let b = generate_pair(40, 0.5, RelabelMode::Random, 99).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_text(), b.to_text());
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let c = generate_pair_with_rng(40, 0.5, RelabelMode::Random, &mut rng).unwrap();
    assert_eq!(c.adjacency_1(), a.adjacency_1());
    assert_ne!(generate_pair(40, 0.5, RelabelMode::Random, 100).unwrap(), a);
}

proptest! {
    #[test]
    fn text_round_trip(n in 2usize..40, p in 0.05f64..0.95, seed in any::<u64>(), random in any::<bool>()) {
        let mode = if random { RelabelMode::Random } else { RelabelMode::Identity };
        let pair = generate_pair(n, p, mode, seed).unwrap();
        let back = GraphPair::read_text(pair.to_text().as_bytes()).unwrap();
        prop_assert_eq!(back, pair);
    }

    #[test]
    fn adjacency_symmetric_and_consistent(n in 2usize..80, p in 0.01f64..0.99, seed in any::<u64>()) {
        let pair = generate_pair(n, p, RelabelMode::Random, seed).unwrap();
        prop_assert!(pair.adjacency_1().is_symmetric_loopless());
        prop_assert!(pair.adjacency_2().is_symmetric_loopless());
        prop_assert!(pair.is_consistent());
        prop_assert_eq!(pair.adjacency_1().count_ones(), pair.adjacency_2().count_ones());
    }
}
