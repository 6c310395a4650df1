//! Random isomorphic graph pairs and the objectives an annealer can minimise
//! over them.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::permutation::{self, random_permutation, Permutation};

/// Square boolean matrix stored as packed 64-bit rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitMatrix {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl BitMatrix {
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64);
        Self {
            n,
            words,
            bits: vec![0; n * words],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        (self.bits[i * self.words + j / 64] >> (j % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        let w = &mut self.bits[i * self.words + j / 64];
        let mask = 1u64 << (j % 64);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn is_symmetric_loopless(&self) -> bool {
        (0..self.n).all(|i| !self.get(i, i) && (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// `out[i][j] = self[p(i)][p(j)]` for 0-based `p`.
    pub(crate) fn permuted(&self, p: &[u32]) -> BitMatrix {
        let mut out = BitMatrix::new(self.n);
        for (i, &src) in p.iter().enumerate() {
            for (j, &dst) in p.iter().enumerate() {
                if self.get(src as usize, dst as usize) {
                    out.set(i, j, true);
                }
            }
        }
        out
    }
}

/// How the second graph of a pair is labelled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelabelMode {
    /// Ground truth is the identity.
    Identity,
    /// Ground truth is a uniform random permutation.
    Random,
}

impl fmt::Display for RelabelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelabelMode::Identity => "identity",
            RelabelMode::Random => "random",
        })
    }
}

impl FromStr for RelabelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(RelabelMode::Identity),
            "random" => Ok(RelabelMode::Random),
            other => Err(Error::Parse(format!("unknown relabel mode {other:?}"))),
        }
    }
}

/// Two isomorphic graphs and the correspondence between them:
/// `adjacency_2[gt(i)][gt(j)] == adjacency_1[i][j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphPair {
    adjacency_1: BitMatrix,
    adjacency_2: BitMatrix,
    ground_truth: Permutation,
    edge_probability: f64,
    seed: Option<u64>,
    mode: RelabelMode,
}

impl GraphPair {
    pub fn n(&self) -> usize {
        self.adjacency_1.size()
    }

    pub fn adjacency_1(&self) -> &BitMatrix {
        &self.adjacency_1
    }

    pub fn adjacency_2(&self) -> &BitMatrix {
        &self.adjacency_2
    }

    pub fn ground_truth(&self) -> &Permutation {
        &self.ground_truth
    }

    pub fn edge_probability(&self) -> f64 {
        self.edge_probability
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn mode(&self) -> RelabelMode {
        self.mode
    }

    pub fn edge_count(&self) -> u64 {
        self.adjacency_1.count_ones() / 2
    }

    /// Checks symmetry, empty diagonals and the isomorphism under the
    /// ground truth.
    pub fn is_consistent(&self) -> bool {
        let n = self.n();
        let gt = self.ground_truth.as_zero_based();
        self.adjacency_2.size() == n
            && gt.len() == n
            && self.adjacency_1.is_symmetric_loopless()
            && self.adjacency_2.is_symmetric_loopless()
            && (0..n).all(|i| {
                (0..n).all(|j| {
                    self.adjacency_2.get(gt[i] as usize, gt[j] as usize)
                        == self.adjacency_1.get(i, j)
                })
            })
    }

    /// Writes the text format: a `n p seed mode` header, `n` rows of `0`/`1`
    /// for each matrix, then the ground truth as a comma-separated list.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        let seed = self
            .seed
            .map_or_else(|| "none".to_string(), |s| s.to_string());
        writeln!(
            w,
            "{} {} {} {}",
            self.n(),
            self.edge_probability,
            seed,
            self.mode
        )?;
        for m in [&self.adjacency_1, &self.adjacency_2] {
            let mut line = String::with_capacity(m.size() + 1);
            for i in 0..m.size() {
                line.clear();
                line.extend((0..m.size()).map(|j| if m.get(i, j) { '1' } else { '0' }));
                writeln!(w, "{line}")?;
            }
        }
        writeln!(w, "{}", self.ground_truth)
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next_line = |what: &str| -> Result<String> {
            match lines.next() {
                Some(Ok(l)) => Ok(l),
                Some(Err(e)) => Err(Error::Parse(format!("reading {what}: {e}"))),
                None => Err(Error::Parse(format!(
                    "unexpected end of input before {what}"
                ))),
            }
        };
        let header = next_line("header")?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!(
                "header needs 4 fields, got {header:?}"
            )));
        }
        let n: usize = fields[0]
            .parse()
            .map_err(|e| Error::Parse(format!("bad n {:?}: {e}", fields[0])))?;
        let edge_probability: f64 = fields[1]
            .parse()
            .map_err(|e| Error::Parse(format!("bad p {:?}: {e}", fields[1])))?;
        let seed = match fields[2] {
            "none" => None,
            s => Some(
                s.parse()
                    .map_err(|e| Error::Parse(format!("bad seed {s:?}: {e}")))?,
            ),
        };
        let mode: RelabelMode = fields[3].parse()?;
        if n < 2 {
            return Err(Error::SizeTooSmall { n, min: 2 });
        }
        let mut mats = [BitMatrix::new(n), BitMatrix::new(n)];
        for (which, m) in mats.iter_mut().enumerate() {
            for i in 0..n {
                let line = next_line("matrix row")?;
                let row = line.trim_end();
                if row.len() != n {
                    return Err(Error::Parse(format!(
                        "matrix {} row {} has {} entries, expected {n}",
                        which + 1,
                        i + 1,
                        row.len()
                    )));
                }
                for (j, c) in row.bytes().enumerate() {
                    match c {
                        b'0' => {}
                        b'1' => m.set(i, j, true),
                        _ => return Err(Error::Parse(format!("bad matrix entry {:?}", c as char))),
                    }
                }
            }
        }
        let ground_truth: Permutation = next_line("ground truth")?.parse()?;
        let [adjacency_1, adjacency_2] = mats;
        let pair = GraphPair {
            adjacency_1,
            adjacency_2,
            ground_truth,
            edge_probability,
            seed,
            mode,
        };
        if !pair.is_consistent() {
            return Err(Error::Parse(
                "graphs are not symmetric, loopless and isomorphic under the ground truth".into(),
            ));
        }
        Ok(pair)
    }
}

/// Draws `G(n, edge_probability)` and an exact relabelled copy, seeding a
/// ChaCha8 stream from `seed`.
pub fn generate_pair(
    n: usize,
    edge_probability: f64,
    mode: RelabelMode,
    seed: u64,
) -> Result<GraphPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pair = generate_pair_with_rng(n, edge_probability, mode, &mut rng)?;
    pair.seed = Some(seed);
    Ok(pair)
}

/// As [`generate_pair`] with a caller-owned random stream. The first graph
/// is drawn before the relabelling, so both modes share it for equal
/// streams.
pub fn generate_pair_with_rng<R: Rng + ?Sized>(
    n: usize,
    edge_probability: f64,
    mode: RelabelMode,
    rng: &mut R,
) -> Result<GraphPair> {
    if n < 2 {
        return Err(Error::SizeTooSmall { n, min: 2 });
    }
    if !(edge_probability > 0.0 && edge_probability < 1.0) {
        return Err(Error::EdgeProbability(edge_probability));
    }
    let mut a1 = BitMatrix::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(edge_probability) {
                a1.set(i, j, true);
                a1.set(j, i, true);
            }
        }
    }
    let ground_truth = match mode {
        RelabelMode::Identity => Permutation::identity(n),
        RelabelMode::Random => random_permutation(n, rng),
    };
    let gt = ground_truth.as_zero_based();
    let mut a2 = BitMatrix::new(n);
    for i in 0..n {
        for j in 0..n {
            if a1.get(i, j) {
                a2.set(gt[i] as usize, gt[j] as usize, true);
            }
        }
    }
    Ok(GraphPair {
        adjacency_1: a1,
        adjacency_2: a2,
        ground_truth,
        edge_probability,
        seed: None,
        mode,
    })
}

fn check_size(pair: &GraphPair, p: &Permutation) -> Result<()> {
    if pair.n() != p.len() {
        return Err(Error::SizeMismatch {
            left: pair.n(),
            right: p.len(),
        });
    }
    Ok(())
}

/// Number of vertex pairs `i < j` whose adjacency in the first graph differs
/// from the adjacency of their images `p(i), p(j)` in the second.
pub fn structural_energy(pair: &GraphPair, p: &Permutation) -> Result<u64> {
    check_size(pair, p)?;
    Ok(structural_energy_raw(pair, p.as_zero_based()))
}

pub(crate) fn structural_energy_raw(pair: &GraphPair, p: &[u32]) -> u64 {
    let (a1, a2) = (&pair.adjacency_1, &pair.adjacency_2);
    let mut total = 0;
    for (i, &pi) in p.iter().enumerate() {
        for (j, &pj) in p.iter().enumerate().skip(i + 1) {
            total += (a1.get(i, j) != a2.get(pi as usize, pj as usize)) as u64;
        }
    }
    total
}

/// Change in [`structural_energy`] from exchanging 1-based positions `i` and
/// `j` of `p`. Touches only the two affected rows, O(n).
pub fn structural_energy_delta_swap(
    pair: &GraphPair,
    p: &Permutation,
    i: usize,
    j: usize,
) -> Result<i64> {
    check_size(pair, p)?;
    let n = p.len();
    for pos in [i, j] {
        if pos == 0 || pos > n {
            return Err(Error::PositionOutOfRange { pos, n });
        }
    }
    if i == j {
        return Err(Error::SamePosition(i));
    }
    Ok(delta_swap_raw(pair, p.as_zero_based(), i - 1, j - 1))
}

pub(crate) fn delta_swap_raw(pair: &GraphPair, p: &[u32], a: usize, b: usize) -> i64 {
    let (a1, a2) = (&pair.adjacency_1, &pair.adjacency_2);
    let (pa, pb) = (p[a] as usize, p[b] as usize);
    let mut delta = 0i64;
    for (k, &pk) in p.iter().enumerate() {
        if k == a || k == b {
            continue;
        }
        let pk = pk as usize;
        let (ea, eb) = (a1.get(a, k), a1.get(b, k));
        let (fa, fb) = (a2.get(pa, pk), a2.get(pb, pk));
        delta += (ea != fb) as i64 - (ea != fa) as i64 + (eb != fa) as i64 - (eb != fb) as i64;
    }
    delta
}

/// Change in structural energy when `old` becomes `new` and the two differ
/// only inside `lo..=hi`. Cost O((hi - lo + 1) n).
pub(crate) fn delta_general_raw(
    pair: &GraphPair,
    old: &[u32],
    new: &[u32],
    lo: usize,
    hi: usize,
) -> i64 {
    let (a1, a2) = (&pair.adjacency_1, &pair.adjacency_2);
    let mut done = vec![false; old.len()];
    let mut delta = 0i64;
    for i in (lo..=hi).filter(|&i| old[i] != new[i]) {
        let (oi, ni) = (old[i] as usize, new[i] as usize);
        for k in 0..old.len() {
            // Pairs inside the changed set would otherwise be counted twice.
            if k == i || done[k] {
                continue;
            }
            let e = a1.get(i, k);
            delta += (e != a2.get(ni, new[k] as usize)) as i64
                - (e != a2.get(oi, old[k] as usize)) as i64;
        }
        done[i] = true;
    }
    delta
}

/// The second graph seen through a candidate matching, kept in step with
/// swap moves so their energy change is four XOR-popcount passes.
#[derive(Clone, Debug)]
pub(crate) struct PermutedView {
    view: BitMatrix,
    diff: Vec<u64>,
}

impl PermutedView {
    pub(crate) fn new(pair: &GraphPair, p: &[u32]) -> Self {
        let view = pair.adjacency_2.permuted(p);
        let diff = vec![0; view.words];
        Self { view, diff }
    }

    /// Same value as [`delta_swap_raw`] for the matching the view tracks.
    #[inline]
    pub(crate) fn delta_swap(&self, pair: &GraphPair, a: usize, b: usize) -> i64 {
        let a1 = &pair.adjacency_1;
        let (ra, rb) = (a1.row(a), a1.row(b));
        let (ca, cb) = (self.view.row(a), self.view.row(b));
        let mut after = 0i64;
        let mut before = 0i64;
        for w in 0..ra.len() {
            after += ((ra[w] ^ cb[w]).count_ones() + (rb[w] ^ ca[w]).count_ones()) as i64;
            before += ((ra[w] ^ ca[w]).count_ones() + (rb[w] ^ cb[w]).count_ones()) as i64;
        }
        // Columns a and b are not part of the change; remove them.
        for col in [a, b] {
            let (ea, eb) = (a1.get(a, col), a1.get(b, col));
            let (fa, fb) = (self.view.get(a, col), self.view.get(b, col));
            after -= ((ea != fb) as i64) + ((eb != fa) as i64);
            before -= ((ea != fa) as i64) + ((eb != fb) as i64);
        }
        after - before
    }

    /// Relabels the view for a swap of positions `a` and `b`. The view is
    /// symmetric, so only rows whose entries at columns `a` and `b` differ
    /// (the set bits of row `a` XOR row `b`) need their columns exchanged,
    /// after which rows `a` and `b` trade places.
    pub(crate) fn apply_swap(&mut self, a: usize, b: usize) {
        let m = &mut self.view;
        let w = m.words;
        for (k, d) in self.diff.iter_mut().enumerate() {
            *d = m.bits[a * w + k] ^ m.bits[b * w + k];
        }
        let (wa, ma) = (a / 64, 1u64 << (a % 64));
        let (wb, mb) = (b / 64, 1u64 << (b % 64));
        for (k, &d) in self.diff.iter().enumerate() {
            let mut bits = d;
            while bits != 0 {
                let r = k * 64 + bits.trailing_zeros() as usize;
                bits &= bits - 1;
                m.bits[r * w + wa] ^= ma;
                m.bits[r * w + wb] ^= mb;
            }
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let (head, tail) = m.bits.split_at_mut(hi * w);
        head[lo * w..(lo + 1) * w].swap_with_slice(&mut tail[..w]);
    }
}

/// The normalised count of misplaced elements against the pair's ground
/// truth.
pub fn oracle_energy(pair: &GraphPair, p: &Permutation) -> Result<Ratio<u64>> {
    permutation::energy(p, &pair.ground_truth)
}
