//! Ergodic optimization and pressure for locally constant potentials.
//!
//! A depth-`r` potential lives on the edges of the block graph whose nodes
//! are admissible `q`-blocks, `q = max(r - 1, 1)`, and whose edges are the
//! admissible `(q + 1)`-blocks. Invariant measures are (limits of) cycle
//! averages on this graph, so `beta(f)` is a maximum mean cycle and the
//! pressure is the log Perron root of the weighted adjacency matrix.

use std::collections::{BTreeMap, HashMap};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::measures::MarkovMeasure;
use crate::shift::{SftSpace, Word};

#[derive(Serialize, Deserialize)]
struct RawPotential {
    r: usize,
    table: BTreeMap<String, f64>,
}

/// Locally constant potential of depth `r`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawPotential", into = "RawPotential")]
pub struct Potential {
    r: usize,
    m: usize,
    /// Indexed by the base-`m` value of the word; NaN off the table.
    values: Vec<f64>,
}

impl PartialEq for Potential {
    fn eq(&self, other: &Self) -> bool {
        self.r == other.r && self.m == other.m && self.table() == other.table()
    }
}

impl From<Potential> for RawPotential {
    fn from(f: Potential) -> Self {
        RawPotential {
            r: f.r,
            table: f
                .table()
                .into_iter()
                .map(|(w, v)| (w.to_string(), v))
                .collect(),
        }
    }
}

impl TryFrom<RawPotential> for Potential {
    type Error = Error;

    fn try_from(raw: RawPotential) -> Result<Self> {
        let mut words = Vec::with_capacity(raw.table.len());
        for (k, v) in raw.table {
            let w: Word = k.parse().map_err(|_| Error::InvalidPotential(format!("bad key {k:?}")))?;
            if w.len() != raw.r {
                return Err(Error::InvalidPotential(format!("key {k:?} has length != {}", raw.r)));
            }
            words.push((w, v));
        }
        let m = words
            .iter()
            .flat_map(|(w, _)| w.0.iter())
            .map(|s| *s as usize + 1)
            .max()
            .unwrap_or(1);
        let mut f = Potential::blank(raw.r, m)?;
        for (w, v) in words {
            if !v.is_finite() {
                return Err(Error::InvalidPotential(format!("non-finite value at {w}")));
            }
            let i = f.slot(&w.0);
            f.values[i] = v;
        }
        Ok(f)
    }
}

fn encode(w: &[u8], m: usize) -> usize {
    w.iter().fold(0, |acc, s| acc * m + *s as usize)
}

impl Potential {
    fn blank(r: usize, m: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidPotential("depth must be positive".into()));
        }
        let size = (m as u64).checked_pow(r as u32).filter(|s| *s <= 1 << 24);
        let size = size.ok_or_else(|| Error::InvalidPotential("table too large".into()))?;
        Ok(Potential {
            r,
            m,
            values: vec![f64::NAN; size as usize],
        })
    }

    fn slot(&self, w: &[u8]) -> usize {
        encode(w, self.m)
    }

    /// Tabulates `f` on every admissible `r`-word.
    pub fn from_fn(space: &SftSpace, r: usize, f: impl Fn(&[u8]) -> f64) -> Result<Self> {
        let mut p = Potential::blank(r, space.alphabet_size())?;
        for w in space.admissible_words(r) {
            let v = f(&w.0);
            if !v.is_finite() {
                return Err(Error::InvalidPotential(format!("non-finite value at {w}")));
            }
            let i = p.slot(&w.0);
            p.values[i] = v;
        }
        Ok(p)
    }

    pub fn new(space: &SftSpace, r: usize, table: &BTreeMap<Word, f64>) -> Result<Self> {
        let p = Potential::from_fn(space, r, |w| {
            table.get(&Word(w.to_vec())).copied().unwrap_or(f64::NAN)
        })
        .map_err(|_| Error::InvalidPotential("table must cover every admissible word".into()))?;
        if table.len() != space.admissible_words(r).len() {
            return Err(Error::InvalidPotential("table has entries off the admissible words".into()));
        }
        Ok(p)
    }

    /// Indicator of the symbol `s` at coordinate 0.
    pub fn symbol_indicator(space: &SftSpace, s: u8) -> Result<Self> {
        Potential::from_fn(space, 1, |w| f64::from(u8::from(w[0] == s)))
    }

    pub fn depth(&self) -> usize {
        self.r
    }

    pub fn value(&self, w: &[u8]) -> Result<f64> {
        if w.len() != self.r || w.iter().any(|s| *s as usize >= self.m) {
            return Err(Error::InvalidPotential(format!("no value for {}", Word(w.to_vec()))));
        }
        let v = self.values[self.slot(w)];
        if v.is_nan() {
            Err(Error::InvalidPotential(format!("no value for {}", Word(w.to_vec()))))
        } else {
            Ok(v)
        }
    }

    pub fn table(&self) -> BTreeMap<Word, f64> {
        let mut w = vec![0u8; self.r];
        let mut out = BTreeMap::new();
        for (idx, v) in self.values.iter().enumerate() {
            if v.is_nan() {
                continue;
            }
            let mut x = idx;
            for slot in w.iter_mut().rev() {
                *slot = (x % self.m) as u8;
                x /= self.m;
            }
            out.insert(Word(w.clone()), *v);
        }
        out
    }

    /// Checks that the table covers exactly the admissible `r`-words.
    pub fn check(&self, space: &SftSpace) -> Result<()> {
        if self.m != space.alphabet_size() {
            return Err(Error::InvalidPotential("alphabet mismatch".into()));
        }
        let words = space.admissible_words(self.r);
        let defined = self.values.iter().filter(|v| !v.is_nan()).count();
        if defined != words.len() || words.iter().any(|w| self.value(&w.0).is_err()) {
            return Err(Error::InvalidPotential("table must match the admissible words".into()));
        }
        Ok(())
    }

    fn map(&self, g: impl Fn(f64) -> f64) -> Potential {
        Potential {
            r: self.r,
            m: self.m,
            values: self.values.iter().map(|v| if v.is_nan() { *v } else { g(*v) }).collect(),
        }
    }

    pub fn scaled(&self, q: f64) -> Potential {
        self.map(|v| q * v)
    }

    pub fn shifted(&self, c: f64) -> Potential {
        self.map(|v| v + c)
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .filter(|v| !v.is_nan())
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// `integral f dmu`.
    pub fn integrate(&self, mu: &MarkovMeasure) -> f64 {
        mu.integrate(self.r, |w| self.value(w).unwrap_or(0.0))
    }
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

/// Weighted block graph of a potential.
#[derive(Clone, Debug)]
pub struct BlockGraph {
    pub nodes: Vec<Vec<u8>>,
    pub edges: Vec<Edge>,
}

impl BlockGraph {
    pub fn new(space: &SftSpace, f: &Potential) -> Result<Self> {
        f.check(space)?;
        let r = f.depth();
        let q = r.saturating_sub(1).max(1);
        let nodes: Vec<Vec<u8>> = space.admissible_words(q).into_iter().map(|w| w.0).collect();
        let index: HashMap<&[u8], usize> =
            nodes.iter().enumerate().map(|(i, n)| (n.as_slice(), i)).collect();
        let mut edges = Vec::new();
        for (from, u) in nodes.iter().enumerate() {
            for s in 0..space.alphabet_size() as u8 {
                if !space.allowed(*u.last().unwrap(), s) {
                    continue;
                }
                let mut word = u.clone();
                word.push(s);
                let to = index[&word[1..]];
                edges.push(Edge {
                    from,
                    to,
                    weight: f.value(&word[..r])?,
                });
            }
        }
        Ok(BlockGraph { nodes, edges })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Periodic word traced by a cycle given as edge indices.
    pub fn cycle_word(&self, cycle: &[usize]) -> Word {
        Word(cycle.iter().map(|e| self.nodes[self.edges[*e].from][0]).collect())
    }

    pub fn cycle_mean(&self, cycle: &[usize]) -> f64 {
        cycle.iter().map(|e| self.edges[*e].weight).sum::<f64>() / cycle.len() as f64
    }

    fn tolerance(&self) -> f64 {
        let scale = self.edges.iter().fold(0.0_f64, |a, e| a.max(e.weight.abs()));
        1e-9 * (1.0 + scale)
    }
}

struct KarpTable {
    /// `d[k][v]`: best weight of a `k`-edge walk ending at `v`.
    d: Vec<Vec<f64>>,
    pred: Vec<Vec<usize>>,
}

fn karp_table(g: &BlockGraph, enabled: &[bool]) -> KarpTable {
    let n = g.len();
    let mut d = vec![vec![0.0; n]];
    let mut pred = vec![vec![usize::MAX; n]];
    for k in 1..=n {
        let mut row = vec![f64::NEG_INFINITY; n];
        let mut prow = vec![usize::MAX; n];
        for (i, e) in g.edges.iter().enumerate() {
            if !enabled[i] {
                continue;
            }
            let cand = d[k - 1][e.from] + e.weight;
            if cand > row[e.to] {
                row[e.to] = cand;
                prow[e.to] = i;
            }
        }
        d.push(row);
        pred.push(prow);
    }
    KarpTable { d, pred }
}

fn karp_value(g: &BlockGraph, t: &KarpTable) -> Option<(f64, usize)> {
    let n = g.len();
    let mut best: Option<(f64, usize)> = None;
    for v in 0..n {
        let dn = t.d[n][v];
        if dn == f64::NEG_INFINITY {
            continue;
        }
        let worst = (0..n)
            .filter(|k| t.d[*k][v] > f64::NEG_INFINITY)
            .map(|k| (dn - t.d[k][v]) / (n - k) as f64)
            .fold(f64::INFINITY, f64::min);
        if best.is_none_or(|(b, _)| worst > b) {
            best = Some((worst, v));
        }
    }
    best
}

/// Maximum mean cycle by Karp's recurrence; `None` if the enabled edges are
/// acyclic.
fn max_mean_cycle(g: &BlockGraph, enabled: &[bool]) -> Option<(f64, Vec<usize>)> {
    let t = karp_table(g, enabled);
    let (lambda, v) = karp_value(g, &t)?;
    let n = g.len();
    // The optimal n-edge walk into v contains an optimal cycle.
    let mut walk = Vec::with_capacity(n);
    let mut cur = v;
    for k in (1..=n).rev() {
        let e = t.pred[k][cur];
        walk.push(e);
        cur = g.edges[e].from;
    }
    walk.reverse();
    let tol = g.tolerance();
    let best = walk_cycles(g, &walk)
        .into_iter()
        .max_by(|a, b| g.cycle_mean(a).total_cmp(&g.cycle_mean(b)));
    match best {
        Some(c) if g.cycle_mean(&c) >= lambda - tol => Some((lambda, c)),
        _ => {
            let crit = critical_edges(g, enabled, lambda);
            let c = simple_cycles(g, &crit, 1).0.into_iter().next()?;
            Some((lambda, c))
        }
    }
}

/// Splits a walk (edge list) into the simple cycles it closes.
fn walk_cycles(g: &BlockGraph, walk: &[usize]) -> Vec<Vec<usize>> {
    let mut cycles = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut pos: HashMap<usize, usize> = HashMap::new();
    if let Some(first) = walk.first() {
        pos.insert(g.edges[*first].from, 0);
    }
    for e in walk {
        stack.push(*e);
        let to = g.edges[*e].to;
        if let Some(&p) = pos.get(&to) {
            let cycle: Vec<usize> = stack.drain(p..).collect();
            for c in &cycle {
                pos.remove(&g.edges[*c].to);
            }
            pos.insert(to, p);
            cycles.push(cycle);
        } else {
            pos.insert(to, stack.len());
        }
    }
    cycles
}

/// Edges lying on some cycle of mean `lambda`.
fn critical_edges(g: &BlockGraph, enabled: &[bool], lambda: f64) -> Vec<bool> {
    let n = g.len();
    let tol = g.tolerance();
    // longest-path potentials for the weights w - lambda, which have no
    // positive cycle
    let mut h = vec![0.0; n];
    for _ in 0..=n {
        let mut changed = false;
        for (i, e) in g.edges.iter().enumerate() {
            if enabled[i] && h[e.from] + e.weight - lambda > h[e.to] + tol * 1e-3 {
                h[e.to] = h[e.from] + e.weight - lambda;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let tight: Vec<bool> = g
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| enabled[i] && h[e.from] + e.weight - lambda >= h[e.to] - tol)
        .collect();
    let mut dg = DiGraph::<(), usize>::new();
    let ids: Vec<_> = (0..n).map(|_| dg.add_node(())).collect();
    for (i, e) in g.edges.iter().enumerate() {
        if tight[i] {
            dg.add_edge(ids[e.from], ids[e.to], i);
        }
    }
    let mut comp = vec![usize::MAX; n];
    for (c, scc) in tarjan_scc(&dg).iter().enumerate() {
        for v in scc {
            comp[v.index()] = c;
        }
    }
    g.edges
        .iter()
        .enumerate()
        .map(|(i, e)| tight[i] && comp[e.from] == comp[e.to])
        .collect()
}

/// Simple cycles through the enabled edges, at most `cap` of them; the flag
/// reports truncation.
fn simple_cycles(g: &BlockGraph, enabled: &[bool], cap: usize) -> (Vec<Vec<usize>>, bool) {
    let n = g.len();
    let mut out_edges = vec![Vec::new(); n];
    for (i, e) in g.edges.iter().enumerate() {
        if enabled[i] {
            out_edges[e.from].push(i);
        }
    }
    let mut found = Vec::new();
    let mut path: Vec<usize> = Vec::new();
    let mut on_path = vec![false; n];
    for start in 0..n {
        // only cycles whose smallest node is `start`
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        on_path[start] = true;
        while let Some((v, next)) = stack.last_mut() {
            let v = *v;
            if *next < out_edges[v].len() {
                let e = out_edges[v][*next];
                *next += 1;
                let to = g.edges[e].to;
                if to == start {
                    let mut c = path.clone();
                    c.push(e);
                    found.push(c);
                    if found.len() >= cap {
                        return (found, true);
                    }
                } else if to > start && !on_path[to] {
                    on_path[to] = true;
                    path.push(e);
                    stack.push((to, 0));
                }
            } else {
                on_path[v] = false;
                stack.pop();
                if !stack.is_empty() {
                    path.pop();
                }
            }
        }
    }
    (found, false)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Beta {
    pub value: f64,
    /// Periodic word of an attaining simple cycle.
    pub cycle: Word,
}

/// `beta(f)`: the maximum ergodic average, attained on a periodic orbit.
pub fn beta(space: &SftSpace, f: &Potential) -> Result<Beta> {
    if !space.is_primitive() {
        return Err(Error::NotPrimitive);
    }
    let g = BlockGraph::new(space, f)?;
    let all = vec![true; g.edges.len()];
    let (value, cycle) = max_mean_cycle(&g, &all).ok_or(Error::NotPrimitive)?;
    Ok(Beta {
        value,
        cycle: g.cycle_word(&cycle),
    })
}

/// Maximum of the mean of `f` over periodic orbits of period at most
/// `max_period`, from traces of max-plus matrix powers.
pub fn brute_force_beta(space: &SftSpace, f: &Potential, max_period: usize) -> Result<f64> {
    let g = BlockGraph::new(space, f)?;
    let n = g.len();
    let mut w = vec![vec![f64::NEG_INFINITY; n]; n];
    for e in &g.edges {
        w[e.from][e.to] = w[e.from][e.to].max(e.weight);
    }
    let mut power = w.clone();
    let mut best = f64::NEG_INFINITY;
    for p in 1..=max_period {
        let trace = (0..n).map(|i| power[i][i]).fold(f64::NEG_INFINITY, f64::max);
        if trace > f64::NEG_INFINITY {
            best = best.max(trace / p as f64);
        }
        if p < max_period {
            power = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            (0..n)
                                .map(|k| power[i][k] + w[k][j])
                                .fold(f64::NEG_INFINITY, f64::max)
                        })
                        .collect()
                })
                .collect();
        }
    }
    Ok(best)
}

/// Best mean over explicitly enumerated simple cycles.
pub fn simple_cycle_beta(space: &SftSpace, f: &Potential) -> Result<f64> {
    let g = BlockGraph::new(space, f)?;
    let all = vec![true; g.edges.len()];
    let (cycles, _) = simple_cycles(&g, &all, usize::MAX);
    Ok(cycles
        .iter()
        .map(|c| g.cycle_mean(c))
        .fold(f64::NEG_INFINITY, f64::max))
}

fn transfer_matrix(g: &BlockGraph) -> (Matrix, f64) {
    let n = g.len();
    let shift = g.edges.iter().fold(f64::NEG_INFINITY, |a, e| a.max(e.weight));
    let mut t = vec![vec![0.0; n]; n];
    for e in &g.edges {
        t[e.from][e.to] += (e.weight - shift).exp();
    }
    (t, shift)
}

/// Topological pressure `log rho(L_f)`.
pub fn pressure(space: &SftSpace, f: &Potential) -> Result<f64> {
    if !space.is_primitive() {
        return Err(Error::NotPrimitive);
    }
    let g = BlockGraph::new(space, f)?;
    let (t, shift) = transfer_matrix(&g);
    Ok(linalg::perron(&t)?.rho.ln() + shift)
}

/// The unique equilibrium state, as a Markov measure on the block states.
pub fn equilibrium_state(space: &SftSpace, f: &Potential) -> Result<MarkovMeasure> {
    if !space.is_primitive() {
        return Err(Error::NotPrimitive);
    }
    let g = BlockGraph::new(space, f)?;
    let (t, _) = transfer_matrix(&g);
    let pf = linalg::perron(&t)?;
    let n = g.len();
    let stochastic: Matrix = (0..n)
        .map(|u| {
            let row: Vec<f64> = (0..n)
                .map(|v| t[u][v] * pf.right[v] / (pf.rho * pf.right[u]))
                .collect();
            let s: f64 = row.iter().sum();
            row.into_iter().map(|x| x / s).collect()
        })
        .collect();
    let mut pi: Vec<f64> = pf.left.iter().zip(&pf.right).map(|(l, r)| l * r).collect();
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= s);
    MarkovMeasure::from_parts(space, g.nodes.clone(), stochastic, pi)
}

/// The interval `L_f` of attainable averages.
pub fn level_range(space: &SftSpace, f: &Potential) -> Result<(f64, f64)> {
    let hi = beta(space, f)?.value;
    let lo = -beta(space, &f.scaled(-1.0))?.value;
    Ok((lo, hi))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelEntropy {
    pub a: f64,
    pub t: f64,
    /// Minimizer of `P(q f) - q a`; infinite at the ends of `L_f`.
    pub q: f64,
}

/// Entropy of the maximizing set: log spectral radius of the critical graph.
fn critical_entropy(space: &SftSpace, f: &Potential) -> Result<f64> {
    let g = BlockGraph::new(space, f)?;
    let all = vec![true; g.edges.len()];
    let (lambda, _) = max_mean_cycle(&g, &all).ok_or(Error::NotPrimitive)?;
    let crit = critical_edges(&g, &all, lambda);
    let n = g.len();
    let mut a = vec![vec![0.0; n]; n];
    for (i, e) in g.edges.iter().enumerate() {
        if crit[i] {
            a[e.from][e.to] += 1.0;
        }
    }
    let rho = linalg::spectral_radius(&linalg::to_dmatrix(&a));
    // adjacency spectra of graphs are algebraic integers; a cycle gives 1
    Ok(if (rho - 1.0).abs() < 1e-9 { 0.0 } else { rho.ln().max(0.0) })
}

/// `t_a = inf_q P(q f) - q a`.
pub fn level_entropy(space: &SftSpace, f: &Potential, a: f64) -> Result<LevelEntropy> {
    let (lo, hi) = level_range(space, f)?;
    let tol = 1e-9 * (1.0 + f.max_abs());
    if a < lo - tol || a > hi + tol {
        return Err(Error::OutsideLf { a, lo, hi });
    }
    if (a - hi).abs() <= tol {
        return Ok(LevelEntropy {
            a,
            t: critical_entropy(space, f)?,
            q: f64::INFINITY,
        });
    }
    if (a - lo).abs() <= tol {
        return Ok(LevelEntropy {
            a,
            t: critical_entropy(space, &f.scaled(-1.0))?,
            q: f64::NEG_INFINITY,
        });
    }
    let g = |q: f64| pressure(space, &f.scaled(q)).map(|p| p - q * a);
    let slope = |q: f64| -> Result<f64> {
        let mu = equilibrium_state(space, &f.scaled(q))?;
        Ok(f.integrate(&mu) - a)
    };
    let mut big = 1.0;
    while big < 4096.0 {
        match (slope(big), slope(-big)) {
            (Ok(up), Ok(down)) if up > 0.0 && down < 0.0 => break,
            (Ok(_), Ok(_)) => big *= 2.0,
            _ => break,
        }
    }
    let (q, t) = golden_section(-big, big, 1e-11, g)?;
    Ok(LevelEntropy { a, t: t.max(0.0), q })
}

/// Minimizes a convex function on `[lo, hi]`.
fn golden_section(
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    f: impl Fn(f64) -> Result<f64>,
) -> Result<(f64, f64)> {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol * (1.0 + lo.abs().max(hi.abs())) {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2)?;
        }
    }
    let x = 0.5 * (lo + hi);
    let fx = f(x)?;
    Ok(if fx <= f1.min(f2) {
        (x, fx)
    } else if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    })
}

/// Structure of the set of maximizing measures.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmrClass {
    /// Unique maximizing measure, supported on this periodic orbit; `gap`
    /// is how far the best cycle avoiding one of its edges falls short.
    Periodic { cycle: Word, gap: f64 },
    /// Several optimal cycles.
    Ties { cycles: Vec<Word>, truncated: bool },
}

const TIE_CAP: usize = 32;

pub fn classify_smr(space: &SftSpace, f: &Potential) -> Result<SmrClass> {
    let g = BlockGraph::new(space, f)?;
    let all = vec![true; g.edges.len()];
    let (lambda, _) = max_mean_cycle(&g, &all).ok_or(Error::NotPrimitive)?;
    let crit = critical_edges(&g, &all, lambda);
    let (cycles, truncated) = simple_cycles(&g, &crit, TIE_CAP);
    if cycles.len() == 1 && !truncated {
        let cycle = &cycles[0];
        let mut runner_up = f64::NEG_INFINITY;
        for e in cycle {
            let mut without = all.clone();
            without[*e] = false;
            if let Some((v, _)) = max_mean_cycle(&g, &without) {
                runner_up = runner_up.max(v);
            }
        }
        return Ok(SmrClass::Periodic {
            cycle: g.cycle_word(cycle),
            gap: lambda - runner_up,
        });
    }
    Ok(SmrClass::Ties {
        cycles: cycles.iter().map(|c| g.cycle_word(c)).collect(),
        truncated,
    })
}

/// `f + g o sigma - g` for a depth-`r-1` function `g` (`r >= 2`).
pub fn add_coboundary(space: &SftSpace, f: &Potential, g: impl Fn(&[u8]) -> f64) -> Result<Potential> {
    let r = f.depth();
    if r < 2 {
        return Err(Error::InvalidPotential("coboundary needs depth at least 2".into()));
    }
    Potential::from_fn(space, r, |w| {
        f.value(w).unwrap_or(f64::NAN) + g(&w[1..]) - g(&w[..r - 1])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{ks_entropy, MarkovMeasure};
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_space<R: Rng>(rng: &mut R, m: usize) -> SftSpace {
        loop {
            let rows: Vec<Vec<bool>> = (0..m)
                .map(|_| (0..m).map(|_| rng.gen_bool(0.6)).collect())
                .collect();
            if let Ok(s) = SftSpace::new(rows) {
                if s.is_primitive() {
                    return s;
                }
            }
        }
    }

    fn random_potential<R: Rng>(rng: &mut R, space: &SftSpace, r: usize) -> Potential {
        let table: Vec<f64> = (0..space.alphabet_size().pow(r as u32))
            .map(|_| rng.gen_range(-9i32..=9) as f64)
            .collect();
        Potential::from_fn(space, r, |w| table[encode(w, space.alphabet_size())]).unwrap()
    }

    fn real_potential<R: Rng>(rng: &mut R, space: &SftSpace, r: usize, lo: f64, hi: f64) -> Potential {
        let m = space.alphabet_size();
        let table: Vec<f64> = (0..m.pow(r as u32)).map(|_| rng.gen_range(lo..hi)).collect();
        Potential::from_fn(space, r, |w| table[encode(w, m)]).unwrap()
    }

    #[test]
    fn beta_examples() {
        let full = SftSpace::full(2);
        let ind = Potential::symbol_indicator(&full, 1).unwrap();
        let b = beta(&full, &ind).unwrap();
        assert_eq!(b.value, 1.0);
        assert_eq!(b.cycle, Word::from("1"));
        let c = Potential::from_fn(&full, 2, |_| 0.75).unwrap();
        assert_eq!(beta(&full, &c).unwrap().value, 0.75);
        assert_eq!(brute_force_beta(&full, &ind, 1).unwrap(), 1.0);
    }

    #[test]
    fn beta_matches_both_oracles_on_golden_mean() {
        let gm = SftSpace::golden_mean();
        let mut rng = rng::rng(42);
        for _ in 0..50 {
            let f = random_potential(&mut rng, &gm, 3);
            let karp = beta(&gm, &f).unwrap().value;
            assert_eq!(karp, simple_cycle_beta(&gm, &f).unwrap());
            assert_eq!(karp, brute_force_beta(&gm, &f, 3).unwrap());
        }
    }

    #[test]
    fn beta_matches_oracle_on_random_spaces() {
        let mut rng = rng::rng(7);
        for _ in 0..40 {
            let m = rng.gen_range(2..=4);
            let space = random_space(&mut rng, m);
            let r = rng.gen_range(1..=2);
            let f = random_potential(&mut rng, &space, r);
            let g = BlockGraph::new(&space, &f).unwrap();
            let b = beta(&space, &f).unwrap();
            assert_eq!(b.value, brute_force_beta(&space, &f, g.len()).unwrap());
            assert_eq!(b.value, simple_cycle_beta(&space, &f).unwrap());
            // the reported cycle really attains the value
            let p = MarkovMeasure::periodic(&space, &b.cycle).unwrap();
            assert!((f.integrate(&p) - b.value).abs() < 1e-12);
        }
    }

    #[test]
    fn pressure_examples() {
        for m in 2..5 {
            let full = SftSpace::full(m);
            let zero = Potential::from_fn(&full, 1, |_| 0.0).unwrap();
            assert!((pressure(&full, &zero).unwrap() - (m as f64).ln()).abs() < 1e-12);
        }
        let gm = SftSpace::golden_mean();
        let c = Potential::from_fn(&gm, 2, |_| 1.5).unwrap();
        let htop = gm.topological_entropy().unwrap();
        assert!((pressure(&gm, &c).unwrap() - htop - 1.5).abs() < 1e-12);
        let full = SftSpace::full(2);
        for a in [-2.0, 0.3, 4.0] {
            let f = Potential::symbol_indicator(&full, 1).unwrap().scaled(a);
            let exact = (1.0 + a.exp()).ln();
            assert!((pressure(&full, &f).unwrap() - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn equilibrium_examples() {
        let full = SftSpace::full(2);
        let zero = Potential::from_fn(&full, 1, |_| 0.0).unwrap();
        let mu = equilibrium_state(&full, &zero).unwrap();
        assert!((mu.stochastic()[0][1] - 0.5).abs() < 1e-12);
        let gm = SftSpace::golden_mean();
        let zero = Potential::from_fn(&gm, 1, |_| 0.0).unwrap();
        let mu = equilibrium_state(&gm, &zero).unwrap();
        let parry = MarkovMeasure::parry(&gm).unwrap();
        for (a, b) in mu.stationary().iter().zip(parry.stationary()) {
            assert!((a - b).abs() < 1e-12);
        }
        // closed form: pi_0 = phi^2 / (1 + phi^2)
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((mu.stationary()[0] - phi * phi / (1.0 + phi * phi)).abs() < 1e-12);
    }

    #[test]
    fn variational_identity_random() {
        let mut rng = rng::rng(3);
        for _ in 0..30 {
            let m = rng.gen_range(2..=4);
            let space = random_space(&mut rng, m);
            let r = rng.gen_range(1..=3);
            let table: Vec<f64> = (0..m.pow(r as u32)).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let f = Potential::from_fn(&space, r, |w| table[encode(w, m)]).unwrap();
            let mu = equilibrium_state(&space, &f).unwrap();
            let lhs = ks_entropy(&mu) + f.integrate(&mu);
            assert!((lhs - pressure(&space, &f).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn level_entropy_examples() {
        let full = SftSpace::full(2);
        let f = Potential::symbol_indicator(&full, 1).unwrap();
        for a in [0.2, 0.5, 0.7] {
            let t = level_entropy(&full, &f, a).unwrap().t;
            let exact = -a * a.ln() - (1.0 - a) * (1.0 - a).ln();
            assert!((t - exact).abs() < 1e-8, "a={a} t={t}");
        }
        assert_eq!(level_entropy(&full, &f, 1.0).unwrap().t, 0.0);
        assert_eq!(level_entropy(&full, &f, 0.0).unwrap().t, 0.0);
        assert!(matches!(level_entropy(&full, &f, 1.2), Err(Error::OutsideLf { .. })));
    }

    #[test]
    fn level_entropy_at_boundary_with_ties() {
        let full = SftSpace::full(2);
        let zero = Potential::from_fn(&full, 1, |_| 0.0).unwrap();
        let t = level_entropy(&full, &zero, 0.0).unwrap().t;
        assert!((t - 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn smr_examples() {
        let full = SftSpace::full(2);
        let zero = Potential::from_fn(&full, 1, |_| 0.0).unwrap();
        assert!(matches!(classify_smr(&full, &zero).unwrap(), SmrClass::Ties { .. }));
        let two = Potential::from_fn(&full, 2, |w| if w[0] != w[1] { 1.0 } else { 0.0 }).unwrap();
        match classify_smr(&full, &two).unwrap() {
            SmrClass::Periodic { cycle, gap } => {
                assert_eq!(cycle, Word::from("01"));
                assert!(gap > 0.0);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(brute_force_beta(&full, &two, 4).unwrap(), 1.0);
        let mut rng = rng::rng(5);
        let f = real_potential(&mut rng, &full, 3, -1.0, 1.0);
        assert!(matches!(classify_smr(&full, &f).unwrap(), SmrClass::Periodic { .. }));
    }

    #[test]
    fn potential_json() {
        let gm = SftSpace::golden_mean();
        let f = Potential::from_fn(&gm, 2, |w| f64::from(w[0]) - 0.5).unwrap();
        let js = serde_json::to_string(&f).unwrap();
        assert_eq!(js, r#"{"r":2,"table":{"00":-0.5,"01":-0.5,"10":0.5}}"#);
        let back: Potential = serde_json::from_str(&js).unwrap();
        assert_eq!(back, f);
        back.check(&gm).unwrap();
        assert!(back.check(&SftSpace::full(2)).is_err());
    }

    proptest! {
        #[test]
        fn beta_shift_and_coboundary(seed in 0u64..500, c in -3i32..3) {
            let mut rng = rng::rng(seed);
            let full = SftSpace::full(3);
            let f = random_potential(&mut rng, &full, 2);
            let b = beta(&full, &f).unwrap();
            let shifted = beta(&full, &f.shifted(c as f64)).unwrap();
            prop_assert!((shifted.value - b.value - c as f64).abs() < 1e-12);
            let g: Vec<f64> = (0..3).map(|_| rng.gen_range(-4i32..4) as f64).collect();
            let f2 = add_coboundary(&full, &f, |w| g[w[0] as usize]).unwrap();
            let b2 = beta(&full, &f2).unwrap();
            prop_assert!((b2.value - b.value).abs() < 1e-12);
            let p = MarkovMeasure::periodic(&full, &b2.cycle).unwrap();
            prop_assert!((f.integrate(&p) - b.value).abs() < 1e-12);
        }

        #[test]
        fn pressure_is_convex(seed in 0u64..200) {
            let mut rng = rng::rng(seed);
            let gm = SftSpace::golden_mean();
            let f = real_potential(&mut rng, &gm, 2, -1.0, 1.0);
            let p = |q: f64| pressure(&gm, &f.scaled(q)).unwrap();
            let h = 0.25;
            for i in -8..8 {
                let q = i as f64 * 0.5;
                prop_assert!(p(q + h) - 2.0 * p(q) + p(q - h) >= -1e-9);
            }
        }

        #[test]
        fn level_entropy_below_htop(seed in 0u64..100, a in 0.05f64..0.95) {
            let mut rng = rng::rng(seed);
            let full = SftSpace::full(2);
            let f = real_potential(&mut rng, &full, 2, 0.0, 1.0);
            let (lo, hi) = level_range(&full, &f).unwrap();
            let level = lo + a * (hi - lo);
            let t = level_entropy(&full, &f, level).unwrap().t;
            prop_assert!(t <= 2f64.ln() + 1e-9);
        }
    }
}
