//! Subshifts of finite type, words, the shift metric and separation counts.
//!
//! Metric convention: `d(x, y) = 2^-t` where `t` is the first index at which
//! `x` and `y` disagree. Under it `d_n(x, y) > 2^-k` holds exactly when the
//! first disagreement falls before index `n + k - 1`, so separated sets are
//! counted by distinct prefixes.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// A finite word over the alphabet `{0, .., m-1}`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(pub Vec<u8>);

impl Word {
    pub fn new(symbols: Vec<u8>) -> Self {
        Word(symbols)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word(self.0[..n.min(self.0.len())].to_vec())
    }

    /// `self` repeated until it has length `n` (cyclic extension).
    pub fn cycle_to(&self, n: usize) -> Word {
        if self.0.is_empty() {
            return Word::empty();
        }
        Word(self.0.iter().copied().cycle().take(n).collect())
    }

    pub fn concat(parts: &[&Word]) -> Word {
        Word(parts.iter().flat_map(|w| w.0.iter().copied()).collect())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.iter().all(|s| *s < 10) {
            for s in &self.0 {
                write!(f, "{s}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.0.iter().map(u8::to_string).collect();
            write!(f, "{}", parts.join(","))
        }
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word(\"{self}\")")
    }
}

impl FromStr for Word {
    type Err = Error;

    /// Digits (`"0110"`) for alphabets up to 10, comma-separated otherwise.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Word::empty());
        }
        let bad = || Error::Config(format!("cannot parse word {s:?}"));
        if s.contains(',') {
            s.split(',')
                .map(|p| p.trim().parse::<u8>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()
                .map(Word)
        } else {
            s.chars()
                .map(|c| c.to_digit(10).map(|d| d as u8).ok_or_else(bad))
                .collect::<Result<Vec<_>>>()
                .map(Word)
        }
    }
}

impl From<&str> for Word {
    fn from(s: &str) -> Self {
        s.parse().expect("invalid word literal")
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    m: usize,
    transition: Vec<Vec<u8>>,
}

/// One-sided subshift of finite type given by a 0/1 transition matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct SftSpace {
    m: usize,
    transition: Vec<Vec<bool>>,
    primitivity_index: Option<usize>,
}

impl From<SftSpace> for RawSpace {
    fn from(s: SftSpace) -> Self {
        RawSpace {
            m: s.m,
            transition: s
                .transition
                .iter()
                .map(|r| r.iter().map(|b| u8::from(*b)).collect())
                .collect(),
        }
    }
}

impl TryFrom<RawSpace> for SftSpace {
    type Error = Error;

    fn try_from(raw: RawSpace) -> Result<Self> {
        if raw.transition.len() != raw.m {
            return Err(Error::InvalidSpace(format!(
                "expected {} rows, got {}",
                raw.m,
                raw.transition.len()
            )));
        }
        let mut rows = Vec::with_capacity(raw.m);
        for row in &raw.transition {
            if row.len() != raw.m {
                return Err(Error::InvalidSpace("transition matrix is not square".into()));
            }
            let mut r = Vec::with_capacity(raw.m);
            for v in row {
                match v {
                    0 => r.push(false),
                    1 => r.push(true),
                    _ => return Err(Error::InvalidSpace("entries must be 0 or 1".into())),
                }
            }
            rows.push(r);
        }
        SftSpace::new(rows)
    }
}

impl SftSpace {
    pub fn new(transition: Vec<Vec<bool>>) -> Result<Self> {
        let m = transition.len();
        if m == 0 || m > usize::from(u8::MAX) {
            return Err(Error::InvalidSpace(format!("alphabet size {m} unsupported")));
        }
        if transition.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidSpace("transition matrix is not square".into()));
        }
        for i in 0..m {
            if !transition[i].iter().any(|b| *b) {
                return Err(Error::InvalidSpace(format!("symbol {i} has no successor")));
            }
            if !(0..m).any(|j| transition[j][i]) {
                return Err(Error::InvalidSpace(format!("symbol {i} has no predecessor")));
            }
        }
        let primitivity_index = primitivity_index(&transition);
        Ok(SftSpace {
            m,
            transition,
            primitivity_index,
        })
    }

    pub fn from_matrix(rows: &[&[u8]]) -> Result<Self> {
        SftSpace::new(
            rows.iter()
                .map(|r| r.iter().map(|v| *v != 0).collect())
                .collect(),
        )
    }

    pub fn full(m: usize) -> Self {
        SftSpace::new(vec![vec![true; m]; m]).expect("full shift is valid")
    }

    /// Golden-mean shift: no two consecutive 1s.
    pub fn golden_mean() -> Self {
        SftSpace::from_matrix(&[&[1, 1], &[1, 0]]).expect("golden mean is valid")
    }

    pub fn alphabet_size(&self) -> usize {
        self.m
    }

    pub fn allowed(&self, a: u8, b: u8) -> bool {
        self.transition[a as usize][b as usize]
    }

    pub fn transition(&self) -> &[Vec<bool>] {
        &self.transition
    }

    pub fn primitivity_index(&self) -> Option<usize> {
        self.primitivity_index
    }

    pub fn is_primitive(&self) -> bool {
        self.primitivity_index.is_some()
    }

    pub fn is_full(&self) -> bool {
        self.transition.iter().all(|r| r.iter().all(|b| *b))
    }

    /// Connector gap used by the gluing engine.
    pub fn gap(&self) -> Result<usize> {
        self.primitivity_index.ok_or(Error::NotPrimitive)
    }

    pub fn check_symbols(&self, symbols: &[u8]) -> Result<()> {
        match symbols.iter().find(|s| **s as usize >= self.m) {
            Some(s) => Err(Error::SymbolOutOfRange {
                symbol: *s,
                alphabet: self.m,
            }),
            None => Ok(()),
        }
    }

    pub fn first_violation(&self, symbols: &[u8]) -> Option<usize> {
        symbols
            .windows(2)
            .position(|w| !self.allowed(w[0], w[1]))
    }

    pub fn is_admissible(&self, symbols: &[u8]) -> bool {
        symbols.iter().all(|s| (*s as usize) < self.m) && self.first_violation(symbols).is_none()
    }

    /// Checked construction of an admissible word.
    pub fn word(&self, symbols: Vec<u8>) -> Result<Word> {
        self.check_symbols(&symbols)?;
        match self.first_violation(&symbols) {
            Some(position) => Err(Error::NotAdmissible { position }),
            None => Ok(Word(symbols)),
        }
    }

    /// Whether the bi-infinite repetition of `cycle` is admissible.
    pub fn is_cyclically_admissible(&self, cycle: &[u8]) -> bool {
        !cycle.is_empty()
            && self.is_admissible(cycle)
            && self.allowed(*cycle.last().unwrap(), cycle[0])
    }

    /// All admissible words of length `n`, in lexicographic order.
    pub fn admissible_words(&self, n: usize) -> Vec<Word> {
        if n == 0 {
            return vec![Word::empty()];
        }
        let mut out: Vec<Vec<u8>> = (0..self.m as u8).map(|s| vec![s]).collect();
        for _ in 1..n {
            let mut next = Vec::with_capacity(out.len() * self.m);
            for w in &out {
                let last = *w.last().unwrap();
                for s in 0..self.m as u8 {
                    if self.allowed(last, s) {
                        let mut e = w.clone();
                        e.push(s);
                        next.push(e);
                    }
                }
            }
            out = next;
        }
        out.into_iter().map(Word).collect()
    }

    pub fn adjacency(&self) -> linalg::Matrix {
        self.transition
            .iter()
            .map(|r| r.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect())
            .collect()
    }

    /// Topological entropy `log rho(A)`.
    pub fn topological_entropy(&self) -> Result<f64> {
        Ok(linalg::perron(&self.adjacency())?.rho.ln())
    }

    /// Bridging word `w` of length `gap - 1` with `a w b` admissible,
    /// lexicographically smallest among all such words.
    pub fn connector(&self, a: u8, b: u8, gap: usize) -> Result<Word> {
        let index = self.primitivity_index.ok_or(Error::NotPrimitive)?;
        if gap < index {
            return Err(Error::GapTooSmall { gap, index });
        }
        self.check_symbols(&[a, b])?;
        // reach[k][s]: some path with k edges leads from s to b
        let mut reach = vec![vec![false; self.m]; gap + 1];
        reach[0][b as usize] = true;
        for k in 1..=gap {
            for s in 0..self.m {
                reach[k][s] = (0..self.m).any(|t| self.transition[s][t] && reach[k - 1][t]);
            }
        }
        debug_assert!(reach[gap][a as usize]);
        let mut cur = a;
        let mut out = Vec::with_capacity(gap.saturating_sub(1));
        for pos in 0..gap.saturating_sub(1) {
            let remaining = gap - 1 - pos;
            let next = (0..self.m as u8)
                .find(|s| self.allowed(cur, *s) && reach[remaining][*s as usize])
                .ok_or(Error::NotPrimitive)?;
            out.push(next);
            cur = next;
        }
        Ok(Word(out))
    }

    /// Connector that may be placed between two words, given the last symbol
    /// of what precedes it (`None` at the very start of a stream).
    pub fn bridge(&self, last: Option<u8>, first: u8, gap: usize) -> Result<Word> {
        match last {
            None => Ok(Word::empty()),
            Some(a) => self.connector(a, first, gap),
        }
    }
}

fn bool_mul(a: &[Vec<bool>], b: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let m = a.len();
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| (0..m).any(|k| a[i][k] && b[k][j]))
                .collect()
        })
        .collect()
}

fn primitivity_index(t: &[Vec<bool>]) -> Option<usize> {
    let m = t.len();
    // Wielandt bound
    let bound = (m - 1) * (m - 1) + 1;
    let mut power = t.to_vec();
    for k in 1..=bound {
        if power.iter().all(|r| r.iter().all(|b| *b)) {
            return Some(k);
        }
        power = bool_mul(&power, t);
    }
    None
}

/// Shift-metric distance between two finite words.
pub fn dist(x: &[u8], y: &[u8]) -> f64 {
    let common = x.len().min(y.len());
    match x[..common].iter().zip(&y[..common]).position(|(a, b)| a != b) {
        Some(t) => 0.5f64.powi(t as i32),
        None if x.len() == y.len() => 0.0,
        None => 0.5f64.powi(common as i32),
    }
}

/// Prefix length that decides `(n, 2^-k)`-separation.
pub fn separation_prefix(n: usize, k: usize) -> usize {
    (n + k).saturating_sub(1).max(1)
}

/// Maximal cardinality of an `(n, 2^-k)`-separated subset of `points`.
pub fn separated_count(points: &[Word], n: usize, k: usize) -> Result<usize> {
    let len = separation_prefix(n, k);
    let mut seen: HashSet<&[u8]> = HashSet::with_capacity(points.len());
    for p in points {
        if p.len() < len {
            return Err(Error::WordsTooShort {
                needed: len,
                got: p.len(),
            });
        }
        seen.insert(&p.0[..len]);
    }
    Ok(seen.len())
}

pub fn hamming(x: &[u8], y: &[u8], n: usize) -> usize {
    x[..n].iter().zip(&y[..n]).filter(|(a, b)| a != b).count()
}

/// `(delta, n, 1/2)`-separation: normalized Hamming distance at least `delta`.
pub fn delta_separated(x: &Word, y: &Word, n: usize, delta: f64) -> Result<bool> {
    let got = x.len().min(y.len());
    if got < n {
        return Err(Error::WordsTooShort { needed: n, got });
    }
    Ok(hamming(&x.0, &y.0, n) as f64 >= delta * n as f64)
}

/// Minimum mismatch count realizing `delta`-separation on `n` coordinates.
pub fn separation_threshold(n: usize, delta: f64) -> usize {
    let raw = delta * n as f64;
    let c = raw.ceil();
    // guard against 0.1*10 = 1.0000000000000002 style rounding
    if (c - 1.0 - raw).abs() < 1e-9 {
        (c - 1.0).max(0.0) as usize
    } else {
        c.max(0.0) as usize
    }
}

/// Produces the consecutive segments of a symbol stream.
pub trait SegmentSource: Send + Sync {
    /// Segment `index`, given the last symbol emitted before it.
    fn segment(&self, index: usize, last: Option<u8>) -> Result<Vec<u8>>;
}

/// Deterministic, resumable infinite symbol sequence.
#[derive(Clone)]
pub struct SymbolStream {
    source: Arc<dyn SegmentSource>,
    buffer: Vec<u8>,
    next_segment: usize,
}

impl fmt::Debug for SymbolStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymbolStream")
            .field("materialized", &self.buffer.len())
            .field("next_segment", &self.next_segment)
            .finish()
    }
}

impl SymbolStream {
    pub fn new(source: Arc<dyn SegmentSource>) -> Self {
        SymbolStream {
            source,
            buffer: Vec::new(),
            next_segment: 0,
        }
    }

    pub fn materialized_len(&self) -> usize {
        self.buffer.len()
    }

    /// First `horizon` symbols. Earlier calls are always prefixes of later ones.
    pub fn materialize(&mut self, horizon: usize) -> Result<Word> {
        while self.buffer.len() < horizon {
            let seg = self
                .source
                .segment(self.next_segment, self.buffer.last().copied())?;
            self.next_segment += 1;
            self.buffer.extend_from_slice(&seg);
        }
        Ok(Word(self.buffer[..horizon].to_vec()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn primitivity_indices() {
        assert_eq!(SftSpace::full(3).primitivity_index(), Some(1));
        assert_eq!(SftSpace::golden_mean().primitivity_index(), Some(2));
        let swap = SftSpace::from_matrix(&[&[0, 1], &[1, 0]]).unwrap();
        assert_eq!(swap.primitivity_index(), None);
    }

    #[test]
    fn rejects_stranded_symbol() {
        assert!(SftSpace::from_matrix(&[&[1, 0], &[1, 0]]).is_err());
        assert!(SftSpace::from_matrix(&[&[1, 1], &[0, 0]]).is_err());
    }

    #[test]
    fn connector_examples() {
        let full = SftSpace::full(2);
        assert_eq!(full.connector(0, 1, 1).unwrap(), Word::empty());
        let gm = SftSpace::golden_mean();
        assert_eq!(gm.connector(1, 1, 2).unwrap(), Word::from("0"));
        assert_eq!(gm.connector(0, 0, 2).unwrap(), Word::from("0"));
        assert_eq!(
            gm.connector(0, 1, 1),
            Err(Error::GapTooSmall { gap: 1, index: 2 })
        );
        let swap = SftSpace::from_matrix(&[&[0, 1], &[1, 0]]).unwrap();
        assert_eq!(swap.connector(0, 1, 3), Err(Error::NotPrimitive));
    }

    #[test]
    fn connector_matches_brute_force_minimum() {
        let gm = SftSpace::golden_mean();
        for a in 0..2u8 {
            for b in 0..2u8 {
                for gap in 2..6 {
                    let best = gm
                        .admissible_words(gap - 1)
                        .into_iter()
                        .filter(|w| {
                            let mut s = vec![a];
                            s.extend(&w.0);
                            s.push(b);
                            gm.is_admissible(&s)
                        })
                        .min()
                        .unwrap();
                    assert_eq!(gm.connector(a, b, gap).unwrap(), best);
                }
            }
        }
    }

    #[test]
    fn dist_examples() {
        assert_eq!(dist(&[0, 1, 1], &[0, 1, 1]), 0.0);
        assert_eq!(dist(&[0, 0, 0, 0], &[0, 0, 0, 1]), 0.125);
        assert_eq!(dist(&[1, 0], &[0, 0]), 1.0);
    }

    #[test]
    fn separated_count_examples() {
        let pts = vec![Word::from("0000"), Word::from("0001")];
        assert_eq!(separated_count(&pts, 2, 1).unwrap(), 1);
        let all = SftSpace::full(2).admissible_words(5);
        assert_eq!(separated_count(&all, 5, 0).unwrap(), 16);
        assert_eq!(separated_count(&[Word::from("0101")], 3, 1).unwrap(), 1);
        assert!(matches!(
            separated_count(&[Word::from("01")], 3, 1),
            Err(Error::WordsTooShort { .. })
        ));
    }

    #[test]
    fn delta_separated_examples() {
        let (a, b) = (Word::from("0101"), Word::from("1010"));
        assert!(delta_separated(&a, &b, 4, 1.0).unwrap());
        assert!(!delta_separated(&a, &a, 4, 0.1).unwrap());
        assert!(delta_separated(&Word::from("0011"), &Word::from("0000"), 4, 0.5).unwrap());
    }

    #[test]
    fn separation_threshold_rounding() {
        assert_eq!(separation_threshold(10, 0.1), 1);
        assert_eq!(separation_threshold(20, 0.05), 1);
        assert_eq!(separation_threshold(12, 0.05), 1);
        assert_eq!(separation_threshold(40, 0.05), 2);
        assert_eq!(separation_threshold(4, 0.5), 2);
    }

    #[test]
    fn golden_mean_entropy() {
        let h = SftSpace::golden_mean().topological_entropy().unwrap();
        assert!((h - ((1.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn space_json_roundtrip() {
        let gm = SftSpace::golden_mean();
        let js = serde_json::to_string(&gm).unwrap();
        assert_eq!(js, r#"{"m":2,"transition":[[1,1],[1,0]]}"#);
        let back: SftSpace = serde_json::from_str(&js).unwrap();
        assert_eq!(back, gm);
        assert!(serde_json::from_str::<SftSpace>(r#"{"m":2,"transition":[[1,2],[1,0]]}"#).is_err());
    }

    fn word_strategy(len: usize) -> impl Strategy<Value = Vec<u8>> {
        proptest::collection::vec(0u8..3, len)
    }

    proptest! {
        #[test]
        fn dist_is_an_ultrametric(x in word_strategy(8), y in word_strategy(8), z in word_strategy(8)) {
            prop_assert_eq!(dist(&x, &y), dist(&y, &x));
            prop_assert_eq!(dist(&x, &x), 0.0);
            prop_assert!(dist(&x, &z) <= dist(&x, &y).max(dist(&y, &z)));
        }

        #[test]
        fn connector_splices_stay_admissible(
            left in 1usize..6, right in 1usize..6, seed in 0u64..1000
        ) {
            let gm = SftSpace::golden_mean();
            let words_l = gm.admissible_words(left);
            let words_r = gm.admissible_words(right);
            let u = &words_l[seed as usize % words_l.len()];
            let v = &words_r[(seed as usize / 7) % words_r.len()];
            for gap in 2..5 {
                let c = gm.connector(*u.0.last().unwrap(), v.0[0], gap).unwrap();
                prop_assert_eq!(c.len(), gap - 1);
                let spliced = Word::concat(&[u, &c, v]);
                prop_assert!(gm.is_admissible(&spliced.0));
            }
        }
    }
}
