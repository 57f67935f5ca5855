//! Markov measures, empirical measures, the truncated weak* metric, typical
//! word sampling and measure paths.
//!
//! A [`MarkovMeasure`] has memory `q`: its states are admissible `q`-blocks
//! and a transition `u -> v` is only possible when `v` extends the last
//! `q - 1` symbols of `u`. Order 1 is the ordinary Markov chain on symbols;
//! higher orders carry equilibrium states of deeper potentials and the
//! periodic-orbit measures.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng;
use crate::shift::{self, SftSpace, Word};

const ROW_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;

/// Default weak* tolerance for calling a word typical.
pub const TYPICAL_TOLERANCE: f64 = 0.05;
/// Depth at which typicality is checked.
pub const TYPICAL_DEPTH: usize = 2;

/// Anything that assigns probabilities to cylinders `[w]`.
pub trait CylinderMeasure {
    fn alphabet_size(&self) -> usize;

    /// Largest cylinder length this measure can answer for.
    fn max_depth(&self) -> Option<usize> {
        None
    }

    fn cylinder_prob(&self, w: &[u8]) -> f64;

    /// Probabilities of all `m^len` words of length `len`, lexicographic.
    fn cylinder_vector(&self, len: usize) -> Vec<f64> {
        let m = self.alphabet_size();
        let total = m.pow(len as u32);
        let mut w = vec![0u8; len];
        (0..total)
            .map(|idx| {
                decode_index(idx, m, &mut w);
                self.cylinder_prob(&w)
            })
            .collect()
    }
}

fn decode_index(mut idx: usize, m: usize, out: &mut [u8]) {
    for slot in out.iter_mut().rev() {
        *slot = (idx % m) as u8;
        idx /= m;
    }
}

fn encode(w: &[u8], m: usize) -> usize {
    w.iter().fold(0, |acc, s| acc * m + *s as usize)
}

#[derive(Serialize, Deserialize)]
struct RawMarkov {
    stochastic: Matrix,
    stationary: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    states: Option<Vec<Word>>,
}

/// Shift-invariant Markov measure of memory `q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMarkov", into = "RawMarkov")]
pub struct MarkovMeasure {
    m: usize,
    states: Vec<Vec<u8>>,
    stochastic: Matrix,
    stationary: Vec<f64>,
    #[serde(skip)]
    index: HashMap<Vec<u8>, usize>,
}

impl From<MarkovMeasure> for RawMarkov {
    fn from(mu: MarkovMeasure) -> Self {
        let trivial = mu.order() == 1
            && mu.states.iter().enumerate().all(|(i, s)| s[0] as usize == i);
        RawMarkov {
            states: (!trivial).then(|| mu.states.into_iter().map(Word).collect()),
            stochastic: mu.stochastic,
            stationary: mu.stationary,
        }
    }
}

impl TryFrom<RawMarkov> for MarkovMeasure {
    type Error = Error;

    fn try_from(raw: RawMarkov) -> Result<Self> {
        let states: Vec<Vec<u8>> = match raw.states {
            Some(s) => s.into_iter().map(|w| w.0).collect(),
            None => (0..raw.stochastic.len() as u8).map(|s| vec![s]).collect(),
        };
        let m = states
            .iter()
            .flat_map(|s| s.iter())
            .map(|s| *s as usize + 1)
            .max()
            .unwrap_or(0);
        MarkovMeasure::assemble(m, states, raw.stochastic, raw.stationary)
    }
}

impl MarkovMeasure {
    fn assemble(
        m: usize,
        states: Vec<Vec<u8>>,
        stochastic: Matrix,
        stationary: Vec<f64>,
    ) -> Result<Self> {
        let k = states.len();
        if k == 0 {
            return Err(Error::InvalidMeasure("no states".into()));
        }
        let q = states[0].len();
        if q == 0 || states.iter().any(|s| s.len() != q) {
            return Err(Error::InvalidMeasure("states must share a positive length".into()));
        }
        if stochastic.len() != k || stochastic.iter().any(|r| r.len() != k) || stationary.len() != k
        {
            return Err(Error::InvalidMeasure("dimension mismatch".into()));
        }
        let mut index = HashMap::with_capacity(k);
        for (i, s) in states.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(Error::InvalidMeasure(format!("duplicate state {}", Word(s.clone()))));
            }
        }
        for (i, row) in stochastic.iter().enumerate() {
            if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return Err(Error::InvalidMeasure(format!("row {i} has a negative entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOL * k as f64 {
                return Err(Error::InvalidMeasure(format!("row {i} sums to {sum}")));
            }
            for (j, p) in row.iter().enumerate() {
                if *p > 0.0 && states[i][1..] != states[j][..q - 1] {
                    return Err(Error::InvalidMeasure(format!(
                        "transition {} -> {} does not overlap",
                        Word(states[i].clone()),
                        Word(states[j].clone())
                    )));
                }
            }
        }
        if stationary.iter().any(|p| !(*p >= -1e-15)) {
            return Err(Error::InvalidMeasure("stationary vector has a negative entry".into()));
        }
        let total: f64 = stationary.iter().sum();
        if (total - 1.0).abs() > ROW_TOL * k as f64 {
            return Err(Error::InvalidMeasure(format!("stationary vector sums to {total}")));
        }
        let moved = linalg::vec_mat(&stationary, &stochastic);
        let resid = moved
            .iter()
            .zip(&stationary)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
        if resid > STATIONARY_TOL {
            return Err(Error::InvalidMeasure(format!("stationarity residual {resid:e}")));
        }
        Ok(MarkovMeasure {
            m,
            states,
            stochastic,
            stationary,
            index,
        })
    }

    /// Block-state measure with the stationary vector computed.
    pub fn from_blocks(space: &SftSpace, states: Vec<Vec<u8>>, stochastic: Matrix) -> Result<Self> {
        let pi = linalg::stationary(&stochastic)?;
        let mu = MarkovMeasure::assemble(space.alphabet_size(), states, stochastic, pi)?;
        mu.check_support(space)?;
        Ok(mu)
    }

    /// Block-state measure with a caller-supplied stationary vector.
    pub fn from_parts(
        space: &SftSpace,
        states: Vec<Vec<u8>>,
        stochastic: Matrix,
        stationary: Vec<f64>,
    ) -> Result<Self> {
        let mu = MarkovMeasure::assemble(space.alphabet_size(), states, stochastic, stationary)?;
        mu.check_support(space)?;
        Ok(mu)
    }

    /// Order-1 chain on the symbols of `space`.
    pub fn from_stochastic(space: &SftSpace, stochastic: Matrix) -> Result<Self> {
        let states = (0..space.alphabet_size() as u8).map(|s| vec![s]).collect();
        MarkovMeasure::from_blocks(space, states, stochastic)
    }

    /// Product measure on the full shift with symbol weights `probs`.
    pub fn bernoulli(probs: &[f64]) -> Result<Self> {
        let m = probs.len();
        let stochastic = vec![probs.to_vec(); m];
        let states = (0..m as u8).map(|s| vec![s]).collect();
        MarkovMeasure::assemble(m, states, stochastic, probs.to_vec())
    }

    /// Bernoulli(1-p, p) on the full 2-shift; `p` is the weight of symbol 1.
    pub fn bernoulli2(p: f64) -> Result<Self> {
        MarkovMeasure::bernoulli(&[1.0 - p, p])
    }

    /// Invariant measure on the periodic orbit of `cycle`.
    pub fn periodic(space: &SftSpace, cycle: &Word) -> Result<Self> {
        if !space.is_cyclically_admissible(&cycle.0) {
            return Err(Error::InvalidMeasure(format!("{cycle} is not an admissible cycle")));
        }
        let root = primitive_root(&cycle.0);
        let p = root.len();
        let states: Vec<Vec<u8>> = (0..p)
            .map(|i| root.iter().cycle().skip(i).take(p).copied().collect())
            .collect();
        let stochastic = (0..p)
            .map(|i| {
                let mut row = vec![0.0; p];
                row[(i + 1) % p] = 1.0;
                row
            })
            .collect();
        MarkovMeasure::assemble(space.alphabet_size(), states, stochastic, vec![1.0 / p as f64; p])
    }

    /// Measure of maximal entropy of a primitive SFT.
    pub fn parry(space: &SftSpace) -> Result<Self> {
        let a = space.adjacency();
        let pf = linalg::perron(&a)?;
        let m = space.alphabet_size();
        let stochastic: Matrix = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| a[i][j] * pf.right[j] / (pf.rho * pf.right[i]))
                    .collect()
            })
            .collect();
        let stochastic = renormalize_rows(stochastic);
        MarkovMeasure::from_stochastic(space, stochastic)
    }

    pub fn order(&self) -> usize {
        self.states[0].len()
    }

    pub fn states(&self) -> &[Vec<u8>] {
        &self.states
    }

    pub fn stochastic(&self) -> &Matrix {
        &self.stochastic
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn state_index(&self, block: &[u8]) -> Option<usize> {
        self.index.get(block).copied()
    }

    /// Checks that every charged cylinder is admissible in `space`.
    pub fn check_support(&self, space: &SftSpace) -> Result<()> {
        if self.m > space.alphabet_size() {
            return Err(Error::InvalidMeasure("alphabet larger than the space".into()));
        }
        let q = self.order();
        for (i, s) in self.states.iter().enumerate() {
            let charged = self.stationary[i] > 0.0 || self.stochastic[i].iter().any(|p| *p > 0.0);
            if charged && !space.is_admissible(s) {
                return Err(Error::InvalidMeasure(format!("state {} not admissible", Word(s.clone()))));
            }
            for (j, p) in self.stochastic[i].iter().enumerate() {
                if *p > 0.0 && !space.allowed(s[q - 1], self.states[j][q - 1]) {
                    return Err(Error::InvalidMeasure(format!(
                        "transition {} -> {} outside the transition matrix",
                        Word(s.clone()),
                        Word(self.states[j].clone())
                    )));
                }
            }
        }
        Ok(())
    }

    /// Kolmogorov-Sinai entropy (natural log).
    pub fn entropy(&self) -> f64 {
        ks_entropy(self)
    }

    /// Integral of a function of the first `r` symbols, `r <= order + 1`.
    pub fn integrate(&self, r: usize, f: impl Fn(&[u8]) -> f64) -> f64 {
        let m = self.alphabet_size();
        let mut w = vec![0u8; r];
        (0..m.pow(r as u32))
            .map(|idx| {
                decode_index(idx, m, &mut w);
                let p = self.cylinder_prob(&w);
                if p > 0.0 {
                    p * f(&w)
                } else {
                    0.0
                }
            })
            .sum()
    }
}

fn renormalize_rows(mut p: Matrix) -> Matrix {
    for row in &mut p {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|x| *x /= s);
        }
    }
    p
}

/// Shortest word whose repetition is `w` repeated.
pub fn primitive_root(w: &[u8]) -> Vec<u8> {
    let n = w.len();
    (1..=n)
        .find(|p| n.is_multiple_of(*p) && (0..n).all(|i| w[i] == w[i % p]))
        .map(|p| w[..p].to_vec())
        .unwrap_or_default()
}

impl MarkovMeasure {
    /// `log mu([w])`, accurate for long words; `-inf` off the support.
    pub fn log_cylinder_prob(&self, w: &[u8]) -> f64 {
        let q = self.order();
        if w.len() < q {
            return self.cylinder_prob(w).ln();
        }
        let Some(mut cur) = self.state_index(&w[..q]) else {
            return f64::NEG_INFINITY;
        };
        let mut lp = self.stationary[cur].ln();
        for end in q + 1..=w.len() {
            let Some(next) = self.state_index(&w[end - q..end]) else {
                return f64::NEG_INFINITY;
            };
            lp += self.stochastic[cur][next].ln();
            if lp == f64::NEG_INFINITY {
                return lp;
            }
            cur = next;
        }
        lp
    }
}

impl CylinderMeasure for MarkovMeasure {
    fn alphabet_size(&self) -> usize {
        self.m
    }

    fn cylinder_prob(&self, w: &[u8]) -> f64 {
        let q = self.order();
        if w.is_empty() {
            return 1.0;
        }
        if w.len() < q {
            return self
                .states
                .iter()
                .zip(&self.stationary)
                .filter(|(s, _)| s.starts_with(w))
                .map(|(_, p)| p)
                .sum();
        }
        let Some(mut cur) = self.state_index(&w[..q]) else {
            return 0.0;
        };
        let mut p = self.stationary[cur];
        for end in q + 1..=w.len() {
            if p == 0.0 {
                return 0.0;
            }
            let Some(next) = self.state_index(&w[end - q..end]) else {
                return 0.0;
            };
            p *= self.stochastic[cur][next];
            cur = next;
        }
        p
    }
}

/// `-sum_i pi_i sum_j P_ij log P_ij`, natural log, `0 log 0 = 0`.
pub fn ks_entropy(mu: &MarkovMeasure) -> f64 {
    let h: f64 = mu
        .stationary
        .iter()
        .zip(&mu.stochastic)
        .map(|(pi, row)| {
            pi * row
                .iter()
                .filter(|p| **p > 0.0)
                .map(|p| -p * p.ln())
                .sum::<f64>()
        })
        .sum();
    h.max(0.0)
}

/// Sliding-window frequencies of `L`-words along an orbit segment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmpiricalMeasure {
    m: usize,
    depth: usize,
    counts: Vec<u64>,
    total: u64,
}

impl EmpiricalMeasure {
    pub fn new(m: usize, depth: usize) -> Self {
        EmpiricalMeasure {
            m,
            depth,
            counts: vec![0; m.pow(depth as u32)],
            total: 0,
        }
    }

    /// Windows `x[j..j+L]` for `0 <= j < n`.
    pub fn from_word(x: &[u8], n: usize, depth: usize, m: usize) -> Result<Self> {
        let needed = n + depth.saturating_sub(1);
        if x.len() < needed {
            return Err(Error::WordsTooShort {
                needed,
                got: x.len(),
            });
        }
        let mut e = EmpiricalMeasure::new(m, depth);
        for j in 0..n {
            e.push(&x[j..j + depth]);
        }
        Ok(e)
    }

    pub fn push(&mut self, window: &[u8]) {
        self.counts[encode(window, self.m)] += 1;
        self.total += 1;
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, w: &[u8]) -> u64 {
        if w.len() != self.depth {
            return 0;
        }
        self.counts[encode(w, self.m)]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Nonzero counts keyed by word.
    pub fn freq(&self) -> BTreeMap<Word, u64> {
        let mut w = vec![0u8; self.depth];
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(idx, c)| {
                decode_index(idx, self.m, &mut w);
                (Word(w.clone()), *c)
            })
            .collect()
    }

    /// Adds another segment's counts (same alphabet and depth).
    pub fn merge(&mut self, other: &EmpiricalMeasure) {
        debug_assert_eq!((self.m, self.depth), (other.m, other.depth));
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
    }
}

impl CylinderMeasure for EmpiricalMeasure {
    fn alphabet_size(&self) -> usize {
        self.m
    }

    fn max_depth(&self) -> Option<usize> {
        Some(self.depth)
    }

    fn cylinder_prob(&self, w: &[u8]) -> f64 {
        if self.total == 0 || w.len() > self.depth {
            return 0.0;
        }
        let span = self.m.pow((self.depth - w.len()) as u32);
        let start = encode(w, self.m) * span;
        let c: u64 = self.counts[start..start + span].iter().sum();
        c as f64 / self.total as f64
    }

    fn cylinder_vector(&self, len: usize) -> Vec<f64> {
        if len > self.depth {
            return vec![0.0; self.m.pow(len as u32)];
        }
        let span = self.m.pow((self.depth - len) as u32);
        let total = self.total.max(1) as f64;
        self.counts
            .chunks(span)
            .map(|c| c.iter().sum::<u64>() as f64 / total)
            .collect()
    }
}

/// Empirical counts divided by `norm` instead of their own total.
#[derive(Clone, Copy, Debug)]
pub struct Scaled<'a> {
    pub counts: &'a EmpiricalMeasure,
    pub norm: f64,
}

impl CylinderMeasure for Scaled<'_> {
    fn alphabet_size(&self) -> usize {
        self.counts.m
    }

    fn max_depth(&self) -> Option<usize> {
        Some(self.counts.depth)
    }

    fn cylinder_prob(&self, w: &[u8]) -> f64 {
        self.counts.cylinder_prob(w) * self.counts.total as f64 / self.norm
    }

    fn cylinder_vector(&self, len: usize) -> Vec<f64> {
        let f = self.counts.total as f64 / self.norm;
        self.counts.cylinder_vector(len).into_iter().map(|p| p * f).collect()
    }
}

/// Largest weak* weight carried by a cylinder of length `len` over `m` symbols.
pub fn max_cylinder_weight(m: usize, len: usize) -> f64 {
    let before: u64 = (1..len).map(|i| (m as u64).saturating_pow(i as u32)).sum();
    cylinder_weight(before + 1)
}

/// Weight of the `j`-th cylinder (1-based) in the weak* series.
fn cylinder_weight(j: u64) -> f64 {
    0.5f64.powi((j + 1).min(1100) as i32)
}

/// Truncated weak* distance: cylinders of length `1..=depth`, enumerated by
/// length then lexicographically, the `j`-th weighted by `2^-(j+1)`.
pub fn weak_star_dist<A, B>(a: &A, b: &B, depth: usize) -> Result<f64>
where
    A: CylinderMeasure + ?Sized,
    B: CylinderMeasure + ?Sized,
{
    for have in [a.max_depth(), b.max_depth()].into_iter().flatten() {
        if have < depth {
            return Err(Error::DepthExceedsEmpirical { have, want: depth });
        }
    }
    let m = a.alphabet_size().max(b.alphabet_size());
    let mut j = 0u64;
    let mut total = 0.0;
    for len in 1..=depth {
        let va = padded_vector(a, len, m);
        let vb = padded_vector(b, len, m);
        for (pa, pb) in va.iter().zip(&vb) {
            j += 1;
            total += cylinder_weight(j) * (pa - pb).abs();
        }
    }
    Ok(total)
}

/// Cylinder vector re-indexed over a possibly larger alphabet.
fn padded_vector<A: CylinderMeasure + ?Sized>(a: &A, len: usize, m: usize) -> Vec<f64> {
    let own = a.alphabet_size();
    let v = a.cylinder_vector(len);
    if own == m {
        return v;
    }
    let mut out = vec![0.0; m.pow(len as u32)];
    let mut w = vec![0u8; len];
    for (idx, p) in v.iter().enumerate() {
        decode_index(idx, own, &mut w);
        out[encode(&w, m)] = *p;
    }
    out
}

/// Draws words from a Markov measure.
#[derive(Clone, Debug)]
pub struct Sampler<'a> {
    mu: &'a MarkovMeasure,
    initial: Option<WeightedIndex<f64>>,
    rows: Vec<Option<WeightedIndex<f64>>>,
}

impl<'a> Sampler<'a> {
    pub fn new(mu: &'a MarkovMeasure) -> Self {
        Sampler {
            mu,
            initial: WeightedIndex::new(&mu.stationary).ok(),
            rows: mu
                .stochastic
                .iter()
                .map(|r| WeightedIndex::new(r).ok())
                .collect(),
        }
    }

    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Word {
        let q = self.mu.order();
        let mut state = self.initial.as_ref().map_or(0, |d| d.sample(rng));
        let mut out: Vec<u8> = self.mu.states[state].iter().take(n).copied().collect();
        while out.len() < n {
            state = match &self.rows[state] {
                Some(d) => d.sample(rng),
                None => break,
            };
            out.push(self.mu.states[state][q - 1]);
        }
        Word(out)
    }
}

/// A length-`n` word drawn from `mu`, deterministic in `seed`.
pub fn sample_word(mu: &MarkovMeasure, n: usize, seed: u64) -> Word {
    Sampler::new(mu).sample(n, &mut rng::rng(seed))
}

/// Weak* distance between a word's own empirical measure and `mu`.
pub fn word_deviation(mu: &MarkovMeasure, w: &[u8], depth: usize) -> f64 {
    let depth = depth.min(w.len()).max(1);
    let n = w.len() + 1 - depth;
    match EmpiricalMeasure::from_word(w, n, depth, mu.alphabet_size()) {
        Ok(e) => weak_star_dist(&e, mu, depth).unwrap_or(f64::INFINITY),
        Err(_) => f64::INFINITY,
    }
}

/// Settings for [`typical_separated_family_with`].
#[derive(Clone, Debug)]
pub struct FamilyOptions {
    pub tolerance: f64,
    pub depth: usize,
    /// Consecutive rejected draws tolerated before giving up.
    pub patience: usize,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        FamilyOptions {
            tolerance: TYPICAL_TOLERANCE,
            depth: TYPICAL_DEPTH,
            patience: 20_000,
        }
    }
}

/// Target cardinality `ceil(e^{n(h - eta)})`, at least 1.
pub fn family_target(h: f64, n: usize, eta: f64) -> usize {
    let e = (n as f64 * (h - eta)).exp().ceil();
    if e.is_finite() && e >= 1.0 {
        e.min(usize::MAX as f64) as usize
    } else {
        1
    }
}

pub fn typical_separated_family(
    mu: &MarkovMeasure,
    n: usize,
    delta: f64,
    eta: f64,
    seed: u64,
) -> Result<Vec<Word>> {
    typical_separated_family_with(mu, n, delta, eta, seed, &FamilyOptions::default())
}

/// Greedy family of pairwise `(delta, n, 1/2)`-separated `mu`-typical words.
pub fn typical_separated_family_with(
    mu: &MarkovMeasure,
    n: usize,
    delta: f64,
    eta: f64,
    seed: u64,
    opts: &FamilyOptions,
) -> Result<Vec<Word>> {
    let h = ks_entropy(mu);
    let target = family_target(h, n, eta);
    let sampler = Sampler::new(mu);
    let mut rng = rng::derived_rng(seed, &[n as u64, 0x7e57]);
    if target <= 1 {
        return Ok(vec![sampler.sample(n, &mut rng)]);
    }
    let m = mu.alphabet_size();
    let lhs = delta * ((m * (m - 1)) as f64).ln();
    if lhs >= eta {
        return Err(Error::InfeasibleMargin { lhs, eta });
    }
    let c = shift::separation_threshold(n, delta);
    let mut family: Vec<Word> = Vec::with_capacity(target.min(1 << 20));
    let mut members: HashSet<Vec<u8>> = HashSet::with_capacity(target.min(1 << 20));
    let mut stalled = 0usize;
    while family.len() < target {
        let w = sampler.sample(n, &mut rng);
        let ok = word_deviation(mu, &w.0, opts.depth) <= opts.tolerance
            && far_from_all(&w.0, c, m, &family, &members);
        if ok {
            members.insert(w.0.clone());
            family.push(w);
            stalled = 0;
        } else {
            stalled += 1;
            if stalled > opts.patience.max(target.saturating_mul(4)) {
                return Err(Error::ShortFamily {
                    achieved: family.len(),
                    target,
                });
            }
        }
    }
    Ok(family)
}

fn ball_size(n: usize, radius: usize, m: usize) -> f64 {
    let mut total = 0.0;
    let mut binom = 1.0;
    for i in 0..=radius.min(n) {
        if i > 0 {
            binom = binom * (n - i + 1) as f64 / i as f64;
        }
        total += binom * ((m - 1) as f64).powi(i as i32);
    }
    total
}

/// Whether `w` has Hamming distance at least `c` from every accepted word.
fn far_from_all(w: &[u8], c: usize, m: usize, family: &[Word], members: &HashSet<Vec<u8>>) -> bool {
    if c == 0 {
        return true;
    }
    if c == 1 {
        return !members.contains(w);
    }
    let radius = c - 1;
    if ball_size(w.len(), radius, m) < family.len() as f64 {
        let mut probe = w.to_vec();
        !ball_hits(&mut probe, 0, radius, m, members)
    } else {
        family
            .iter()
            .all(|f| shift::hamming(&f.0, w, w.len()) >= c)
    }
}

fn ball_hits(
    probe: &mut Vec<u8>,
    from: usize,
    budget: usize,
    m: usize,
    members: &HashSet<Vec<u8>>,
) -> bool {
    if members.contains(probe.as_slice()) {
        return true;
    }
    if budget == 0 {
        return false;
    }
    for i in from..probe.len() {
        let orig = probe[i];
        for s in 0..m as u8 {
            if s == orig {
                continue;
            }
            probe[i] = s;
            if ball_hits(probe, i + 1, budget - 1, m, members) {
                probe[i] = orig;
                return true;
            }
        }
        probe[i] = orig;
    }
    false
}

/// Convex combination `(1-t) a + t b` of the stochastic matrices, stationary
/// vector recomputed. Both measures must share their state list.
pub fn interpolate(a: &MarkovMeasure, b: &MarkovMeasure, t: f64) -> Result<MarkovMeasure> {
    if a.states != b.states {
        return Err(Error::InvalidMeasure("interpolated measures must share states".into()));
    }
    let stochastic: Matrix = a
        .stochastic
        .iter()
        .zip(&b.stochastic)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (1.0 - t) * x + t * y).collect())
        .collect();
    let stochastic = renormalize_rows(stochastic);
    let pi = linalg::stationary(&stochastic)?;
    MarkovMeasure::assemble(a.m.max(b.m), a.states.clone(), stochastic, pi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Convex,
}

/// Piecewise-convex path through a list of checkpoint measures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurePath {
    pub checkpoints: Vec<MarkovMeasure>,
    #[serde(default)]
    pub interpolation: Interpolation,
}

impl MeasurePath {
    pub fn new(checkpoints: Vec<MarkovMeasure>) -> Result<Self> {
        let path = MeasurePath {
            checkpoints,
            interpolation: Interpolation::Convex,
        };
        path.validate()?;
        Ok(path)
    }

    pub fn single(mu: MarkovMeasure) -> Self {
        MeasurePath {
            checkpoints: vec![mu],
            interpolation: Interpolation::Convex,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .checkpoints
            .first()
            .ok_or_else(|| Error::InvalidMeasure("empty measure path".into()))?;
        if self.checkpoints.iter().any(|c| c.states != first.states) {
            return Err(Error::InvalidMeasure("checkpoints must share states".into()));
        }
        Ok(())
    }

    /// Point at parameter `t` of segment `seg`.
    pub fn point(&self, seg: usize, t: f64) -> Result<MarkovMeasure> {
        interpolate(&self.checkpoints[seg], &self.checkpoints[seg + 1], t)
    }
}

/// The path sampled at mesh `1/stage` per segment, forward then back.
pub fn refine_path(path: &MeasurePath, stage: usize) -> Result<Vec<MarkovMeasure>> {
    path.validate()?;
    let stage = stage.max(1);
    let segs = path.checkpoints.len() - 1;
    let mut forward = vec![path.checkpoints[0].clone()];
    for seg in 0..segs {
        for i in 1..=stage {
            if i == stage {
                forward.push(path.checkpoints[seg + 1].clone());
            } else {
                forward.push(path.point(seg, i as f64 / stage as f64)?);
            }
        }
    }
    let mut out = forward.clone();
    out.extend(forward.into_iter().rev().skip(1));
    Ok(out)
}

/// Largest weak* gap between consecutive refined measures.
pub fn max_consecutive_gap(list: &[MarkovMeasure], depth: usize) -> f64 {
    list.windows(2)
        .map(|w| weak_star_dist(&w[0], &w[1], depth).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max)
}
