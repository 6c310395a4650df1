//! Exact counts and probabilities for the number of fixed points of a
//! uniformly random permutation.
//!
//! Every quantity is computed over arbitrary-precision integers; only the
//! `*_limit` functions, which describe the `n -> infinity` behaviour, work in
//! floating point.

use std::cmp::Ordering;
use std::fmt;
use std::sync::{LazyLock, RwLock};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// A probability held as an exact fraction in lowest terms.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExactProbability {
    numer: BigUint,
    denom: BigUint,
}

impl ExactProbability {
    /// Builds `numer / denom` in lowest terms. Returns `None` when the
    /// denominator is zero or the fraction exceeds one.
    pub fn new(numer: BigUint, denom: BigUint) -> Option<Self> {
        if denom.is_zero() || numer > denom {
            return None;
        }
        Some(Self::reduced(numer, denom))
    }

    pub fn zero() -> Self {
        Self {
            numer: BigUint::zero(),
            denom: BigUint::one(),
        }
    }

    pub fn one() -> Self {
        Self {
            numer: BigUint::one(),
            denom: BigUint::one(),
        }
    }

    fn reduced(numer: BigUint, denom: BigUint) -> Self {
        if numer.is_zero() {
            return Self::zero();
        }
        let g = numer.gcd(&denom);
        if g.is_one() {
            Self { numer, denom }
        } else {
            Self {
                numer: numer / &g,
                denom: denom / &g,
            }
        }
    }

    /// Lowest terms for a denominator whose prime factors are all at most
    /// `bound`, with the exponent of each such prime supplied by
    /// `denom_valuation`. Trial division by those primes replaces a general
    /// gcd, which is slow for factorial-sized operands.
    fn reduced_smooth(
        numer: BigUint,
        denom: BigUint,
        bound: u64,
        denom_valuation: impl Fn(u64) -> u64,
    ) -> Self {
        if numer.is_zero() {
            return Self::zero();
        }
        let mut g = BigUint::one();
        for p in primes_up_to(bound) {
            let cap = denom_valuation(p);
            let pb = BigUint::from(p);
            if cap == 0 || !(&numer % &pb).is_zero() {
                continue;
            }
            let mut rest = &numer / &pb;
            let mut e = 1;
            while e < cap {
                let (q, r) = rest.div_rem(&pb);
                if !r.is_zero() {
                    break;
                }
                rest = q;
                e += 1;
            }
            g *= pb.pow(e as u32);
        }
        if g.is_one() {
            Self { numer, denom }
        } else {
            Self {
                numer: numer / &g,
                denom: denom / &g,
            }
        }
    }

    pub fn numer(&self) -> &BigUint {
        &self.numer
    }

    pub fn denom(&self) -> &BigUint {
        &self.denom
    }

    /// `1 - self`.
    pub fn complement(&self) -> Self {
        // Already in lowest terms: gcd(d - n, d) = gcd(n, d) = 1.
        if self.numer.is_zero() {
            return Self::one();
        }
        Self {
            numer: &self.denom - &self.numer,
            denom: self.denom.clone(),
        }
    }

    /// Sum of two probabilities. Returns `None` if the result exceeds one.
    pub fn checked_add(&self, other: &Self) -> Option<Self> {
        let numer = &self.numer * &other.denom + &other.numer * &self.denom;
        let denom = &self.denom * &other.denom;
        Self::new(numer, denom)
    }

    /// Correctly rounded (round-half-to-even) conversion to `f64`.
    ///
    /// The quotient is formed from the leading bits of numerator and
    /// denominator, so neither is ever materialized as a float. Values too
    /// small for the subnormal range round to zero.
    pub fn to_f64(&self) -> f64 {
        ratio_to_f64(&self.numer, &self.denom)
    }

    /// The `"num/den"` rendering used by the JSON reports.
    pub fn rational_string(&self) -> String {
        format!("{}/{}", self.numer, self.denom)
    }
}

impl fmt::Display for ExactProbability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer, self.denom)
    }
}

impl PartialOrd for ExactProbability {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExactProbability {
    fn cmp(&self, other: &Self) -> Ordering {
        (&self.numer * &other.denom).cmp(&(&other.numer * &self.denom))
    }
}

impl Serialize for ExactProbability {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("ExactProbability", 2)?;
        s.serialize_field("rational", &self.rational_string())?;
        s.serialize_field("value", &self.to_f64())?;
        s.end()
    }
}

/// Weight of the least significant bit of an `f64` with unbiased exponent
/// `exp`, clamped to the subnormal floor.
fn pow2(exp: i64) -> f64 {
    debug_assert!((-1074..=1023).contains(&exp));
    if exp >= -1022 {
        f64::from_bits(((exp + 1023) as u64) << 52)
    } else {
        f64::from_bits(1u64 << (exp + 1074))
    }
}

pub(crate) fn ratio_to_f64(numer: &BigUint, denom: &BigUint) -> f64 {
    assert!(!denom.is_zero(), "zero denominator");
    if numer.is_zero() {
        return 0.0;
    }
    let nb = numer.bits() as i64;
    let db = denom.bits() as i64;
    // Scale so the integer quotient carries at least 55 significant bits.
    let shift = 55 - (nb - db);
    let (q, r) = if shift >= 0 {
        (numer << shift as usize).div_rem(denom)
    } else {
        numer.div_rem(&(denom << (-shift) as usize))
    };
    let sticky_rem = !r.is_zero();
    // value = (q + frac) * 2^-shift with frac in [0, 1) and q >= 2^54.
    let qbits = q.bits() as i64;
    let top_exp = qbits - 1 - shift;
    if top_exp > 1023 {
        return f64::INFINITY;
    }
    // Exponent of the least significant kept bit.
    let lsb_exp = (top_exp - 52).max(-1074);
    let drop = lsb_exp + shift;
    if drop > qbits {
        return 0.0;
    }
    let drop = drop as u64;
    let kept = (&q >> drop).to_u64().expect("at most 53 bits kept");
    let round_bit = drop > 0 && q.bit(drop - 1);
    let sticky = sticky_rem || (drop > 1 && q.trailing_zeros().is_some_and(|tz| tz < drop - 1));
    let mut mantissa = kept;
    if round_bit && (sticky || mantissa & 1 == 1) {
        mantissa += 1;
    }
    mantissa as f64 * pow2(lsb_exp)
}

fn primes_up_to(bound: u64) -> Vec<u64> {
    let bound = bound as usize;
    if bound < 2 {
        return Vec::new();
    }
    let mut composite = vec![false; bound + 1];
    let mut primes = Vec::new();
    for i in 2..=bound {
        if !composite[i] {
            primes.push(i as u64);
            for j in (i * i..=bound).step_by(i) {
                composite[j] = true;
            }
        }
    }
    primes
}

/// Exponent of prime `p` in `k!` (Legendre).
fn factorial_valuation(k: u64, p: u64) -> u64 {
    let mut v = 0;
    let mut q = k;
    while q >= p {
        q /= p;
        v += q;
    }
    v
}

const MEMO_LIMIT: usize = 2048;

/// Process-wide prefix tables of `k!` and `D(k)`, grown on demand up to
/// `MEMO_LIMIT`. Larger arguments continue from the last entry without
/// being stored.
struct Tables {
    factorial: Vec<BigUint>,
    derangement: Vec<BigUint>,
}

static TABLES: LazyLock<RwLock<Tables>> = LazyLock::new(|| {
    RwLock::new(Tables {
        factorial: vec![BigUint::one(), BigUint::one()],
        derangement: vec![BigUint::one(), BigUint::zero()],
    })
});

fn ensure_tables(upto: usize) {
    let upto = upto.min(MEMO_LIMIT);
    if TABLES.read().expect("memo lock poisoned").factorial.len() > upto {
        return;
    }
    let mut t = TABLES.write().expect("memo lock poisoned");
    while t.factorial.len() <= upto {
        let k = t.factorial.len();
        let f = &t.factorial[k - 1] * BigUint::from(k);
        t.factorial.push(f);
        let d = (&t.derangement[k - 1] + &t.derangement[k - 2]) * BigUint::from(k - 1);
        t.derangement.push(d);
    }
}

/// `n!`.
pub fn factorial(n: u64) -> BigUint {
    let n = n as usize;
    ensure_tables(n);
    let t = TABLES.read().expect("memo lock poisoned");
    if n < t.factorial.len() {
        return t.factorial[n].clone();
    }
    let mut f = t.factorial[MEMO_LIMIT].clone();
    drop(t);
    for k in MEMO_LIMIT + 1..=n {
        f *= BigUint::from(k);
    }
    f
}

/// Binomial coefficient `C(n, k)`; zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut c = BigUint::one();
    for i in 0..k {
        c *= BigUint::from(n - i);
        c /= BigUint::from(i + 1);
    }
    c
}

/// Streams `D(j)` for `j = 0, 1, 2, ...` via the recurrence, starting from
/// the memo table when possible.
struct DerangementStream {
    next: u64,
    prev: BigUint,
    cur: BigUint,
}

impl DerangementStream {
    /// Positions the stream so the first value yielded is `D(start)`.
    fn starting_at(start: u64) -> Self {
        let anchor = (start as usize).clamp(1, MEMO_LIMIT);
        ensure_tables(anchor);
        let t = TABLES.read().expect("memo lock poisoned");
        let mut s = Self {
            next: anchor as u64 - 1,
            prev: t.derangement[anchor - 1].clone(),
            cur: t.derangement[anchor].clone(),
        };
        drop(t);
        // `prev` holds D(next), `cur` holds D(next + 1).
        while s.next < start {
            s.advance();
        }
        s
    }

    fn advance(&mut self) {
        let k = self.next + 2;
        let d = (&self.cur + &self.prev) * BigUint::from(k - 1);
        self.prev = std::mem::replace(&mut self.cur, d);
        self.next += 1;
    }
}

impl Iterator for DerangementStream {
    type Item = BigUint;

    fn next(&mut self) -> Option<BigUint> {
        let out = self.prev.clone();
        self.advance();
        Some(out)
    }
}

/// Number of derangements of `n` elements from
/// `D(n) = (n - 1)(D(n - 1) + D(n - 2))`, `D(0) = 1`, `D(1) = 0`.
pub fn derangement_recurrence(n: u64) -> BigUint {
    if (n as usize) <= MEMO_LIMIT {
        ensure_tables(n as usize);
        return TABLES.read().expect("memo lock poisoned").derangement[n as usize].clone();
    }
    DerangementStream::starting_at(n)
        .next()
        .expect("stream is infinite")
}

/// Number of derangements of `n` elements from the alternating sum
/// `sum_{k=0}^{n} (-1)^k n!/k!`. Independent of the recurrence and of the
/// memo tables.
pub fn derangement_sum(n: u64) -> BigUint {
    // Walk k downward so n!/k! is a running product.
    let mut term = BigUint::one();
    let mut acc = BigInt::zero();
    let mut k = n;
    loop {
        let signed = BigInt::from(term.clone());
        if k.is_multiple_of(2) {
            acc += signed;
        } else {
            acc -= signed;
        }
        if k == 0 {
            break;
        }
        term *= BigUint::from(k);
        k -= 1;
    }
    debug_assert!(!acc.is_negative());
    acc.to_biguint().expect("derangement count is non-negative")
}

fn check_domain(n: u64, m: u64) -> Result<()> {
    if m > n {
        Err(Error::FixedPointsExceedSize { n, m })
    } else {
        Ok(())
    }
}

/// Number of permutations of `n` elements with exactly `m` fixed points,
/// `C(n, m) * D(n - m)`. Defined for `m = n` (one permutation: the identity).
pub fn rencontres(n: u64, m: u64) -> Result<BigUint> {
    check_domain(n, m)?;
    Ok(binomial(n, m) * derangement_recurrence(n - m))
}

/// Probability that a uniform permutation of `n` elements has exactly `m`
/// fixed points: `D(n - m) / (m! (n - m)!)`.
pub fn fixed_point_prob(n: u64, m: u64) -> Result<ExactProbability> {
    check_domain(n, m)?;
    let numer = derangement_recurrence(n - m);
    let denom = factorial(m) * factorial(n - m);
    Ok(ExactProbability::reduced_smooth(
        numer,
        denom,
        m.max(n - m),
        |p| factorial_valuation(m, p) + factorial_valuation(n - m, p),
    ))
}

/// `C(n, j) * D(j)` summed over `j` in `lo..hi`, i.e. the number of
/// permutations with between `n - hi + 1` and `n - lo` fixed points.
fn rencontres_sum_by_deranged(n: u64, lo: u64, hi: u64) -> BigUint {
    let mut total = BigUint::zero();
    if lo >= hi {
        return total;
    }
    let mut binom = binomial(n, lo);
    for (j, d) in (lo..hi).zip(DerangementStream::starting_at(lo)) {
        total += &binom * d;
        binom *= BigUint::from(n - j);
        binom /= BigUint::from(j + 1);
    }
    total
}

/// Number of permutations of `n` elements with more than `m` fixed points.
fn count_more_than(n: u64, m: u64) -> BigUint {
    // More than m fixed points <=> fewer than n - m deranged positions.
    let tail_terms = n - m;
    let head_terms = m + 1;
    if tail_terms <= head_terms {
        rencontres_sum_by_deranged(n, 0, n - m)
    } else {
        factorial(n) - rencontres_sum_by_deranged(n, n - m, n + 1)
    }
}

/// Probability of at most `m` fixed points, `sum_{k=0}^{m} P(exactly k)`,
/// exact at finite `n`.
pub fn cumulative_prob(n: u64, m: u64) -> Result<ExactProbability> {
    check_domain(n, m)?;
    let total = factorial(n);
    let at_most = &total - count_more_than(n, m);
    Ok(ExactProbability::reduced_smooth(at_most, total, n, |p| {
        factorial_valuation(n, p)
    }))
}

/// Probability of strictly more than `m` fixed points, `1 - cumulative_prob`.
pub fn tail_prob(n: u64, m: u64) -> Result<ExactProbability> {
    check_domain(n, m)?;
    Ok(ExactProbability::reduced_smooth(
        count_more_than(n, m),
        factorial(n),
        n,
        |p| factorial_valuation(n, p),
    ))
}

/// `e^-1 / m!`, the large-`n` limit of [`fixed_point_prob`].
pub fn fixed_point_prob_limit(m: u64) -> f64 {
    let mut v = (-1.0f64).exp();
    for k in 1..=m {
        v /= k as f64;
        if v == 0.0 {
            break;
        }
    }
    v
}

/// `1 - e^-1 sum_{k=0}^{m} 1/k!`, the large-`n` limit of [`tail_prob`].
///
/// Evaluated as the remainder series `e^-1 sum_{k>m} 1/k!` to avoid
/// cancellation for large `m`.
pub fn tail_prob_limit(m: u64) -> f64 {
    let mut term = fixed_point_prob_limit(m);
    let mut sum = 0.0;
    let mut k = m + 1;
    loop {
        term /= k as f64;
        if term == 0.0 || sum + term == sum {
            break;
        }
        sum += term;
        k += 1;
    }
    sum
}
