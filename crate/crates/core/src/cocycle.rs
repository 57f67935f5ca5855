//! Locally constant matrix cocycles over the shift.
//!
//! Products are taken in dynamical order, `A(x, n) = F(T^{n-1}x) ... F(x)`,
//! and norms are operator 2-norms.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::{sample_word, MarkovMeasure};
use crate::par;
use crate::rng;
use crate::shift::{SftSpace, Word};

pub use crate::analysis::recurrence_ratios as recurrence_diagnostic;

/// Renormalization cadence used when none is given.
pub const DEFAULT_CADENCE: usize = 16;

const MAX_CONDITION: f64 = 1e12;

#[derive(Serialize, Deserialize)]
struct RawCocycle {
    d: usize,
    generators: BTreeMap<String, Vec<Vec<f64>>>,
}

/// `F : X -> GL(d, R)` depending on the first `r` symbols.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCocycle", into = "RawCocycle")]
pub struct MatrixCocycle {
    d: usize,
    r: usize,
    generators: BTreeMap<Word, DMatrix<f64>>,
}

impl From<MatrixCocycle> for RawCocycle {
    fn from(c: MatrixCocycle) -> Self {
        RawCocycle {
            d: c.d,
            generators: c
                .generators
                .iter()
                .map(|(w, a)| {
                    let rows = (0..a.nrows())
                        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
                        .collect();
                    (w.to_string(), rows)
                })
                .collect(),
        }
    }
}

impl TryFrom<RawCocycle> for MatrixCocycle {
    type Error = Error;

    fn try_from(raw: RawCocycle) -> Result<Self> {
        let mut gens = BTreeMap::new();
        for (k, rows) in raw.generators {
            let w: Word = k
                .parse()
                .map_err(|_| Error::InvalidCocycle(format!("bad key {k:?}")))?;
            if rows.len() != raw.d || rows.iter().any(|r| r.len() != raw.d) {
                return Err(Error::InvalidCocycle(format!("generator {k} is not {0}x{0}", raw.d)));
            }
            gens.insert(w, DMatrix::from_fn(raw.d, raw.d, |i, j| rows[i][j]));
        }
        MatrixCocycle::new(gens)
    }
}

impl MatrixCocycle {
    pub fn new(generators: BTreeMap<Word, DMatrix<f64>>) -> Result<Self> {
        let (first_w, first) = generators
            .iter()
            .next()
            .ok_or_else(|| Error::InvalidCocycle("no generators".into()))?;
        let d = first.nrows();
        let r = first_w.len();
        if d == 0 || r == 0 {
            return Err(Error::InvalidCocycle("empty generator".into()));
        }
        for (w, a) in &generators {
            if w.len() != r || a.nrows() != d || a.ncols() != d {
                return Err(Error::InvalidCocycle(format!("generator {w} has the wrong shape")));
            }
            let cond = linalg::condition_number(a);
            if !cond.is_finite() || cond > MAX_CONDITION {
                return Err(Error::InvalidCocycle(format!("generator {w} is not invertible")));
            }
        }
        Ok(MatrixCocycle { d, r, generators })
    }

    /// Depth-1 cocycle with one generator per symbol.
    pub fn per_symbol(gens: Vec<DMatrix<f64>>) -> Result<Self> {
        MatrixCocycle::new(
            gens.into_iter()
                .enumerate()
                .map(|(s, a)| (Word(vec![s as u8]), a))
                .collect(),
        )
    }

    pub fn constant(space: &SftSpace, a: DMatrix<f64>) -> Result<Self> {
        MatrixCocycle::per_symbol(vec![a; space.alphabet_size()])
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn depth(&self) -> usize {
        self.r
    }

    pub fn generator(&self, w: &[u8]) -> Result<&DMatrix<f64>> {
        self.generators
            .get(&Word(w.to_vec()))
            .ok_or_else(|| Error::InvalidCocycle(format!("no generator for {}", Word(w.to_vec()))))
    }

    /// Checks that every admissible `r`-word has a generator.
    pub fn check(&self, space: &SftSpace) -> Result<()> {
        for w in space.admissible_words(self.r) {
            self.generator(&w.0)?;
        }
        Ok(())
    }

    /// `max over generators of max(log |F|, log |F^-1|, 0)`.
    pub fn log_distortion(&self) -> f64 {
        self.generators
            .values()
            .map(|a| {
                let sv = a.singular_values();
                sv.max().ln().max(-sv.min().ln()).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    fn word_needed(&self, n: usize) -> usize {
        n + self.r - 1
    }
}

/// Running product with its log-scale carried separately.
struct Accumulator {
    product: DMatrix<f64>,
    log_scale: f64,
    steps: usize,
    cadence: usize,
}

impl Accumulator {
    fn new(d: usize, cadence: usize) -> Self {
        Accumulator {
            product: DMatrix::identity(d, d),
            log_scale: 0.0,
            steps: 0,
            cadence: cadence.max(1),
        }
    }

    fn push(&mut self, a: &DMatrix<f64>) {
        self.product = a * &self.product;
        self.steps += 1;
        if self.steps.is_multiple_of(self.cadence) {
            self.renormalize();
        }
    }

    fn renormalize(&mut self) {
        let s = self.product.amax();
        if s > 0.0 && s.is_finite() {
            self.product /= s;
            self.log_scale += s.ln();
        }
    }

    fn log_norm(&self) -> f64 {
        linalg::op_norm(&self.product).ln() + self.log_scale
    }
}

/// `(1/n) log |A(x, n)|`.
pub fn exponent_along(c: &MatrixCocycle, x: &Word, n: usize) -> Result<f64> {
    exponent_along_with_cadence(c, x, n, DEFAULT_CADENCE)
}

pub fn exponent_along_with_cadence(
    c: &MatrixCocycle,
    x: &Word,
    n: usize,
    cadence: usize,
) -> Result<f64> {
    Ok(log_norm_along(c, &x.0, n, cadence)? / n as f64)
}

fn log_norm_along(c: &MatrixCocycle, x: &[u8], n: usize, cadence: usize) -> Result<f64> {
    let needed = c.word_needed(n);
    if n == 0 || x.len() < needed {
        return Err(Error::WordsTooShort {
            needed: needed.max(1),
            got: x.len(),
        });
    }
    let mut acc = Accumulator::new(c.d, cadence);
    for i in 0..n {
        acc.push(c.generator(&x[i..i + c.r])?);
    }
    Ok(acc.log_norm())
}

/// Ordered product over one period of `cycle` (windows wrap around).
fn cycle_product(c: &MatrixCocycle, cycle: &[u8]) -> Result<DMatrix<f64>> {
    let p = cycle.len();
    let mut prod = DMatrix::identity(c.d, c.d);
    let mut window = Vec::with_capacity(c.r);
    for i in 0..p {
        window.clear();
        window.extend((0..c.r).map(|j| cycle[(i + j) % p]));
        prod = c.generator(&window)? * prod;
    }
    Ok(prod)
}

/// `(1/p) log rho(A(cycle, p))`.
pub fn periodic_exponent(c: &MatrixCocycle, cycle: &Word) -> Result<f64> {
    if cycle.is_empty() {
        return Err(Error::InvalidCocycle("empty cycle".into()));
    }
    let rho = linalg::spectral_radius(&cycle_product(c, &cycle.0)?);
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::SingularProduct);
    }
    Ok(rho.ln() / cycle.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
    pub best_cycle: Word,
}

/// Lower bound from periodic orbits of period at most `max_period`, upper
/// bound from the largest norm over admissible `n`-words.
pub fn exponent_bracket(
    c: &MatrixCocycle,
    space: &SftSpace,
    n: usize,
    max_period: usize,
) -> Result<Bracket> {
    if !space.is_primitive() {
        return Err(Error::NotPrimitive);
    }
    c.check(space)?;
    let mut lower = f64::NEG_INFINITY;
    let mut best_cycle = Word::empty();
    for p in 1..=max_period {
        for w in space.admissible_words(p) {
            if !space.is_cyclically_admissible(&w.0) {
                continue;
            }
            let e = periodic_exponent(c, &w)?;
            if e > lower {
                lower = e;
                best_cycle = w;
            }
        }
    }
    let upper = max_log_norm(c, space, n)? / n as f64;
    Ok(Bracket {
        lower,
        upper,
        best_cycle,
    })
}

/// `max log |A(w)|` over admissible words `w` of length `n + r - 1`, by
/// depth-first search sharing prefix products.
fn max_log_norm(c: &MatrixCocycle, space: &SftSpace, n: usize) -> Result<f64> {
    let len = c.word_needed(n);
    let starts = space.admissible_words(c.r);
    let results = par::try_map(&starts, |start| {
        let mut best = f64::NEG_INFINITY;
        let mut word = start.0.clone();
        let first = c.generator(&word)?.clone();
        dfs(c, space, &mut word, len, first, 0.0, &mut best)?;
        Ok::<f64, Error>(best)
    })?;
    Ok(results.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

fn dfs(
    c: &MatrixCocycle,
    space: &SftSpace,
    word: &mut Vec<u8>,
    len: usize,
    prod: DMatrix<f64>,
    log_scale: f64,
    best: &mut f64,
) -> Result<()> {
    if word.len() == len {
        *best = best.max(linalg::op_norm(&prod).ln() + log_scale);
        return Ok(());
    }
    let (prod, log_scale) = {
        let s = prod.amax();
        (prod / s, log_scale + s.ln())
    };
    let last = *word.last().unwrap();
    for s in 0..space.alphabet_size() as u8 {
        if !space.allowed(last, s) {
            continue;
        }
        word.push(s);
        let next = c.generator(&word[word.len() - c.r..])? * &prod;
        dfs(c, space, word, len, next, log_scale, best)?;
        word.pop();
    }
    Ok(())
}

/// Per-member exponents of a Lyapunov family.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MemberExponent {
    /// `(1/n) log |A(x, n)|` over the whole member.
    pub full: f64,
    /// `(1/n) log |A(T^P x, n - P)|`, the tail window with the same normalization.
    pub tail: f64,
    /// `(1/(n-P)) log |A(T^P x, n - P)|`.
    pub tail_exponent: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub family_size: usize,
    pub target: usize,
    /// Length `P` of the member-specific prefix.
    pub prefix_len: usize,
    pub separation_window: usize,
    pub horizon: usize,
    /// Exponent of the shared `mu`-generic reference tail.
    pub reference_exponent: f64,
    /// `(P/n) max(log |F|, log |F^-1|, 0)`.
    pub deviation_bound: f64,
    pub max_deviation: f64,
    pub members: Vec<MemberExponent>,
}

#[derive(Clone, Debug)]
pub struct LyapunovFamily {
    pub words: Vec<Word>,
    pub report: LyapunovReport,
}

/// Anchor, an admissible `N`-word, then a shared `mu`-generic tail, for every
/// admissible `N`-word.
#[allow(clippy::too_many_arguments)]
pub fn emit_lyapunov_family(
    c: &MatrixCocycle,
    space: &SftSpace,
    mu: &MarkovMeasure,
    anchor: &Word,
    big_n: usize,
    eta: f64,
    tail_len: usize,
    seed: u64,
) -> Result<LyapunovFamily> {
    c.check(space)?;
    mu.check_support(space)?;
    let gap = space.gap()?;
    if !space.is_admissible(&anchor.0) || anchor.is_empty() {
        return Err(Error::NotAdmissible { position: 0 });
    }
    let tail = sample_word(mu, tail_len.max(c.r), rng::derive_seed(seed, &[0x7a11]));
    let family = space.admissible_words(big_n);
    let htop = space.topological_entropy()?;
    let target = crate::measures::family_target(htop, big_n, eta);
    let words: Vec<Word> = par::try_map(&family, |w| {
        let c1 = space.connector(*anchor.0.last().unwrap(), w.0[0], gap)?;
        let c2 = space.connector(*w.0.last().unwrap(), tail.0[0], gap)?;
        Ok::<Word, Error>(Word::concat(&[anchor, &c1, w, &c2, &tail]))
    })?;
    let prefix_len = anchor.len() + 2 * (gap - 1) + big_n;
    let horizon = prefix_len + tail.len();
    let n = horizon + 1 - c.r;
    let tail_n = n - prefix_len;
    let reference = log_norm_along(c, &tail.0, tail_n, DEFAULT_CADENCE)?;
    let bound = prefix_len as f64 / n as f64 * c.log_distortion();
    let members = par::try_map(&words, |x| {
        let full = log_norm_along(c, &x.0, n, DEFAULT_CADENCE)?;
        let tail_log = log_norm_along(c, &x.0[prefix_len..], tail_n, DEFAULT_CADENCE)?;
        Ok::<MemberExponent, Error>(MemberExponent {
            full: full / n as f64,
            tail: tail_log / n as f64,
            tail_exponent: tail_log / tail_n as f64,
            deviation: (full - tail_log).abs() / n as f64,
        })
    })?;
    let max_deviation = members.iter().map(|m| m.deviation).fold(0.0, f64::max);
    Ok(LyapunovFamily {
        report: LyapunovReport {
            family_size: words.len(),
            target,
            prefix_len,
            separation_window: anchor.len() + (gap - 1) + big_n,
            horizon,
            reference_exponent: reference / tail_n as f64,
            deviation_bound: bound,
            max_deviation,
            members,
        },
        words,
    })
}

/// Recurrence ratios of a family member to its own anchor cylinder.
pub fn member_recurrence(x: &Word, cylinder: &Word) -> Result<Vec<analysis::Recurrence>> {
    analysis::recurrence_ratios(x, cylinder)
}
