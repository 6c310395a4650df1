//! Permutations of `{1, ..., n}`: the feasible solutions of the matching
//! problem, their quality metrics, and the neighbourhood operators used to
//! move between them.
//!
//! Positions and values are 1-based on every public surface. Storage is
//! 0-based `u32`.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Permutation {
    map: Vec<u32>,
}

impl Permutation {
    /// Panics if `n` is zero.
    pub fn identity(n: usize) -> Self {
        assert!(n >= 1, "permutation size must be positive");
        Self {
            map: (0..n as u32).collect(),
        }
    }

    /// Validates a 1-based image sequence.
    pub fn from_one_based(values: &[usize]) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::SizeTooSmall { n: 0, min: 1 });
        }
        let mut seen = vec![false; n];
        let mut map = Vec::with_capacity(n);
        for &v in values {
            if v == 0 || v > n {
                return Err(Error::NotAPermutation {
                    n,
                    reason: format!("value {v} out of range"),
                });
            }
            if std::mem::replace(&mut seen[v - 1], true) {
                return Err(Error::NotAPermutation {
                    n,
                    reason: format!("value {v} repeated"),
                });
            }
            map.push((v - 1) as u32);
        }
        Ok(Self { map })
    }

    /// Wraps 0-based storage; the caller guarantees the bijection.
    pub(crate) fn from_zero_based_unchecked(map: Vec<u32>) -> Self {
        debug_assert!(is_bijection(&map));
        Self { map }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Image of 1-based position `i`, 1-based.
    pub fn get(&self, i: usize) -> Option<usize> {
        i.checked_sub(1)
            .and_then(|k| self.map.get(k))
            .map(|&v| v as usize + 1)
    }

    pub fn as_zero_based(&self) -> &[u32] {
        &self.map
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.map.iter().map(|&v| v as usize + 1).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &v)| i as u32 == v)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0u32; self.map.len()];
        for (i, &v) in self.map.iter().enumerate() {
            inv[v as usize] = i as u32;
        }
        Self { map: inv }
    }

    /// Re-checks the bijection invariant. Always true for values built
    /// through this module; exposed for property tests.
    pub fn is_valid(&self) -> bool {
        !self.map.is_empty() && is_bijection(&self.map)
    }
}

pub(crate) fn is_bijection(map: &[u32]) -> bool {
    let mut seen = vec![false; map.len()];
    map.iter()
        .all(|&v| (v as usize) < seen.len() && !std::mem::replace(&mut seen[v as usize], true))
}

/// Comma-separated 1-based values, e.g. `3,2,1,4,5`.
impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, &v) in self.map.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", v + 1)?;
        }
        Ok(())
    }
}

impl FromStr for Permutation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let values = s
            .trim()
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("bad permutation entry {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_one_based(&values)
    }
}

impl Serialize for Permutation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Uniform random permutation of size `n` by Fisher-Yates shuffle with
/// unbiased bounded integer draws.
pub fn random_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Permutation {
    let mut p = Permutation::identity(n);
    p.map.shuffle(rng);
    p
}

fn same_size(p: &Permutation, truth: &Permutation) -> Result<()> {
    if p.len() != truth.len() {
        return Err(Error::SizeMismatch {
            left: p.len(),
            right: truth.len(),
        });
    }
    Ok(())
}

/// Number of positions where `p` agrees with `truth` (correct matches).
pub fn count_fixed_points(p: &Permutation, truth: &Permutation) -> Result<usize> {
    same_size(p, truth)?;
    Ok(p.map.iter().zip(&truth.map).filter(|(a, b)| a == b).count())
}

/// Fraction of misplaced elements, `(n - fixed) / n`.
pub fn energy(p: &Permutation, truth: &Permutation) -> Result<Ratio<u64>> {
    let fixed = count_fixed_points(p, truth)? as u64;
    let n = p.len() as u64;
    Ok(Ratio::new(n - fixed, n))
}

/// `1 - energy`.
pub fn precision(p: &Permutation, truth: &Permutation) -> Result<Ratio<u64>> {
    Ok(Ratio::from_integer(1) - energy(p, truth)?)
}

/// The four neighbourhood moves on permutations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operator {
    Swap,
    Insertion,
    Inversion,
    Scramble,
}

impl Operator {
    pub const ALL: [Operator; 4] = [
        Operator::Swap,
        Operator::Insertion,
        Operator::Inversion,
        Operator::Scramble,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Operator::Swap => "swap",
            Operator::Insertion => "insertion",
            Operator::Inversion => "inversion",
            Operator::Scramble => "scramble",
        }
    }

    /// Applies this operator to `p` at uniformly chosen positions.
    pub fn perturb<R: Rng + ?Sized>(self, p: &Permutation, rng: &mut R) -> Result<Permutation> {
        check_perturbable(p)?;
        let mut map = p.map.clone();
        let (a, b) = distinct_pair(map.len(), rng);
        apply_move(self, &mut map, a, b, rng);
        Ok(Permutation::from_zero_based_unchecked(map))
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Operator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Operator::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown operator {s:?}")))
    }
}

fn check_perturbable(p: &Permutation) -> Result<()> {
    if p.len() < 2 {
        return Err(Error::SizeTooSmall { n: p.len(), min: 2 });
    }
    Ok(())
}

/// Two distinct uniform 0-based positions in `0..n`, `n >= 2`.
pub(crate) fn distinct_pair<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (usize, usize) {
    let a = rng.gen_range(0..n);
    let mut b = rng.gen_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    (a, b)
}

/// In-place move at 0-based positions `a != b`. Returns the inclusive range
/// of positions that may have changed.
pub(crate) fn apply_move<R: Rng + ?Sized>(
    op: Operator,
    map: &mut [u32],
    a: usize,
    b: usize,
    rng: &mut R,
) -> (usize, usize) {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    match op {
        Operator::Swap => map.swap(a, b),
        Operator::Insertion => reinsert(map, a, b),
        Operator::Inversion => map[lo..=hi].reverse(),
        Operator::Scramble => map[lo..=hi].shuffle(rng),
    }
    (lo, hi)
}

fn reinsert(map: &mut [u32], from: usize, to: usize) {
    if from < to {
        map[from..=to].rotate_left(1);
    } else {
        map[to..=from].rotate_right(1);
    }
}

fn zero_based_pair(p: &Permutation, i: usize, j: usize) -> Result<(usize, usize)> {
    check_perturbable(p)?;
    let n = p.len();
    for pos in [i, j] {
        if pos == 0 || pos > n {
            return Err(Error::PositionOutOfRange { pos, n });
        }
    }
    if i == j {
        return Err(Error::SamePosition(i));
    }
    Ok((i - 1, j - 1))
}

pub fn perturb_swap<R: Rng + ?Sized>(p: &Permutation, rng: &mut R) -> Result<Permutation> {
    Operator::Swap.perturb(p, rng)
}

pub fn perturb_insertion<R: Rng + ?Sized>(p: &Permutation, rng: &mut R) -> Result<Permutation> {
    Operator::Insertion.perturb(p, rng)
}

pub fn perturb_inversion<R: Rng + ?Sized>(p: &Permutation, rng: &mut R) -> Result<Permutation> {
    Operator::Inversion.perturb(p, rng)
}

pub fn perturb_scramble<R: Rng + ?Sized>(p: &Permutation, rng: &mut R) -> Result<Permutation> {
    Operator::Scramble.perturb(p, rng)
}

/// Exchanges 1-based positions `i` and `j`.
pub fn swap_at(p: &Permutation, i: usize, j: usize) -> Result<Permutation> {
    let (a, b) = zero_based_pair(p, i, j)?;
    let mut map = p.map.clone();
    map.swap(a, b);
    Ok(Permutation::from_zero_based_unchecked(map))
}

/// Removes the element at 1-based position `from` and reinserts it so that
/// it ends up at position `to`.
pub fn insert_at(p: &Permutation, from: usize, to: usize) -> Result<Permutation> {
    let (a, b) = zero_based_pair(p, from, to)?;
    let mut map = p.map.clone();
    reinsert(&mut map, a, b);
    Ok(Permutation::from_zero_based_unchecked(map))
}

/// Reverses the inclusive 1-based segment between `i` and `j`.
pub fn invert_at(p: &Permutation, i: usize, j: usize) -> Result<Permutation> {
    let (a, b) = zero_based_pair(p, i, j)?;
    let mut map = p.map.clone();
    let (lo, hi) = (a.min(b), a.max(b));
    map[lo..=hi].reverse();
    Ok(Permutation::from_zero_based_unchecked(map))
}

/// Uniformly reshuffles the inclusive 1-based segment between `i` and `j`.
pub fn scramble_at<R: Rng + ?Sized>(
    p: &Permutation,
    i: usize,
    j: usize,
    rng: &mut R,
) -> Result<Permutation> {
    let (a, b) = zero_based_pair(p, i, j)?;
    let mut map = p.map.clone();
    apply_move(Operator::Scramble, &mut map, a, b, rng);
    Ok(Permutation::from_zero_based_unchecked(map))
}

pub const MAX_CENSUS_N: usize = 10;

/// Counts, for every `m`, the permutations of `n` elements with exactly `m`
/// fixed points by enumerating all of `S_n` (Heap's algorithm).
pub fn exhaustive_fixed_point_census(n: usize) -> Result<Vec<u64>> {
    if n == 0 {
        return Err(Error::SizeTooSmall { n, min: 1 });
    }
    if n > MAX_CENSUS_N {
        return Err(Error::CensusTooLarge {
            n,
            max: MAX_CENSUS_N,
        });
    }
    let mut counts = vec![0u64; n + 1];
    let mut a: Vec<usize> = (0..n).collect();
    let mut fixed = n;
    counts[fixed] += 1;
    let mut c = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if c[i] < i {
            let j = if i % 2 == 0 { 0 } else { c[i] };
            fixed -= (a[j] == j) as usize + (a[i] == i) as usize;
            a.swap(j, i);
            fixed += (a[j] == j) as usize + (a[i] == i) as usize;
            counts[fixed] += 1;
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn perm(v: &[usize]) -> Permutation {
        Permutation::from_one_based(v).unwrap()
    }

    #[test]
    fn three_fixed_points_of_five() {
        let p = perm(&[3, 2, 1, 4, 5]);
        let id = Permutation::identity(5);
        assert_eq!(count_fixed_points(&p, &id).unwrap(), 3);
        assert_eq!(energy(&p, &id).unwrap(), Ratio::new(2, 5));
        assert_eq!(precision(&p, &id).unwrap(), Ratio::new(3, 5));
        assert_eq!(energy(&id, &id).unwrap(), Ratio::from_integer(0));
        assert_eq!(precision(&id, &id).unwrap(), Ratio::from_integer(1));
        assert_eq!(count_fixed_points(&id, &id).unwrap(), 5);
    }

    #[test]
    fn derangement_metrics() {
        let d = perm(&[2, 3, 1]);
        let id = Permutation::identity(3);
        assert_eq!(count_fixed_points(&d, &id).unwrap(), 0);
        assert_eq!(precision(&d, &id).unwrap(), Ratio::from_integer(0));
    }

    #[test]
    fn size_mismatch_rejected() {
        let a = Permutation::identity(3);
        let b = Permutation::identity(4);
        assert_eq!(
            count_fixed_points(&a, &b),
            Err(Error::SizeMismatch { left: 3, right: 4 })
        );
        assert!(energy(&a, &b).is_err());
        assert!(precision(&a, &b).is_err());
    }

    #[test]
    fn validation() {
        assert!(Permutation::from_one_based(&[1, 1]).is_err());
        assert!(Permutation::from_one_based(&[0, 1]).is_err());
        assert!(Permutation::from_one_based(&[1, 3]).is_err());
        assert!(Permutation::from_one_based(&[]).is_err());
        assert_eq!("3, 2,1".parse::<Permutation>().unwrap(), perm(&[3, 2, 1]));
        assert!("1,x".parse::<Permutation>().is_err());
        assert_eq!(perm(&[3, 2, 1, 4, 5]).to_string(), "3,2,1,4,5");
        assert_eq!(perm(&[2, 3, 1]).get(1), Some(2));
        assert_eq!(perm(&[2, 3, 1]).get(0), None);
        assert_eq!(perm(&[2, 3, 1]).inverse(), perm(&[3, 1, 2]));
    }

    #[test]
    fn deterministic_operators() {
        let id = Permutation::identity(5);
        assert_eq!(swap_at(&id, 1, 3).unwrap(), perm(&[3, 2, 1, 4, 5]));
        assert_eq!(invert_at(&id, 2, 4).unwrap(), perm(&[1, 4, 3, 2, 5]));
        assert_eq!(invert_at(&id, 4, 2).unwrap(), perm(&[1, 4, 3, 2, 5]));
        assert_eq!(insert_at(&id, 2, 5).unwrap(), perm(&[1, 3, 4, 5, 2]));
        assert_eq!(insert_at(&id, 5, 2).unwrap(), perm(&[1, 5, 2, 3, 4]));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = scramble_at(&id, 2, 4, &mut rng).unwrap();
        assert_eq!((s.get(1), s.get(5)), (Some(1), Some(5)));
        assert!(s.is_valid());
    }

    #[test]
    fn operator_domain_errors() {
        let one = Permutation::identity(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for op in Operator::ALL {
            assert_eq!(
                op.perturb(&one, &mut rng),
                Err(Error::SizeTooSmall { n: 1, min: 2 })
            );
        }
        let id = Permutation::identity(4);
        assert_eq!(swap_at(&id, 2, 2), Err(Error::SamePosition(2)));
        assert_eq!(
            invert_at(&id, 0, 2),
            Err(Error::PositionOutOfRange { pos: 0, n: 4 })
        );
        assert_eq!(
            insert_at(&id, 1, 5),
            Err(Error::PositionOutOfRange { pos: 5, n: 4 })
        );
    }

    #[test]
    fn perturb_leaves_input_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_permutation(30, &mut rng);
        let before = p.clone();
        for op in Operator::ALL {
            let q = op.perturb(&p, &mut rng).unwrap();
            assert!(q.is_valid());
        }
        assert_eq!(p, before);
        assert_ne!(perturb_swap(&p, &mut rng).unwrap(), p);
    }

    #[test]
    fn operator_names_round_trip() {
        for op in Operator::ALL {
            assert_eq!(op.name().parse::<Operator>().unwrap(), op);
        }
        assert!("2opt".parse::<Operator>().is_err());
    }

    #[test]
    fn random_permutation_is_deterministic() {
        let a = random_permutation(100, &mut ChaCha8Rng::seed_from_u64(9));
        let b = random_permutation(100, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert_eq!(
            random_permutation(1, &mut ChaCha8Rng::seed_from_u64(9)),
            Permutation::identity(1)
        );
    }

    #[test]
    fn census_small() {
        assert_eq!(exhaustive_fixed_point_census(1).unwrap(), vec![0, 1]);
        assert_eq!(exhaustive_fixed_point_census(3).unwrap(), vec![2, 3, 0, 1]);
        assert_eq!(
            exhaustive_fixed_point_census(4).unwrap(),
            vec![9, 8, 6, 0, 1]
        );
        assert_eq!(
            exhaustive_fixed_point_census(11),
            Err(Error::CensusTooLarge { n: 11, max: 10 })
        );
        assert!(exhaustive_fixed_point_census(0).is_err());
        let ten = exhaustive_fixed_point_census(10).unwrap();
        assert_eq!(ten.iter().sum::<u64>(), 3_628_800);
    }
}
