//! Distributional-chaos statistics over pairs of finite orbits.
//!
//! `d(T^i x, T^i y) = 2^-(j-i)` where `j >= i` is the next disagreement;
//! with no disagreement before the end of the words it is taken as 0.
//! Verdicts are finite-horizon and only ever "consistent-with".

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ergopt::{classify_smr, Potential, SmrClass};
use crate::error::{Error, Result};
use crate::par;
use crate::shift::{SftSpace, Word};

/// `next[i]`: first index `>= i` where the words disagree, `usize::MAX` if none.
pub fn next_disagreement(x: &[u8], y: &[u8]) -> Vec<usize> {
    let n = x.len().min(y.len());
    let mut next = vec![usize::MAX; n + 1];
    for i in (0..n).rev() {
        next[i] = if x[i] != y[i] { i } else { next[i + 1] };
    }
    next
}

/// `d(T^i x, T^i y)` from a next-disagreement table.
pub fn distance_at(next: &[usize], i: usize) -> f64 {
    match next[i] {
        usize::MAX => 0.0,
        j => 0.5f64.powi((j - i).min(1100) as i32),
    }
}

fn check_len(x: &Word, y: &Word, n: usize) -> Result<()> {
    let got = x.len().min(y.len());
    if got < n || n == 0 {
        return Err(Error::WordsTooShort { needed: n.max(1), got });
    }
    Ok(())
}

/// `(1/n) #{0 <= i < n : d(T^i x, T^i y) < t}`.
pub fn phi_n(x: &Word, y: &Word, t: f64, n: usize) -> Result<f64> {
    check_len(x, y, n)?;
    let next = next_disagreement(&x.0, &y.0);
    let close = (0..n).filter(|i| distance_at(&next, *i) < t).count();
    Ok(close as f64 / n as f64)
}

/// `phi_n` at every checkpoint for one `t`, in a single pass.
fn phi_at(next: &[usize], t: f64, checkpoints: &[usize]) -> Vec<f64> {
    let horizon = checkpoints.iter().copied().max().unwrap_or(0);
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut prefix = vec![0usize; horizon + 1];
    for i in 0..horizon {
        prefix[i + 1] = prefix[i] + usize::from(distance_at(next, i) < t);
    }
    for &c in checkpoints {
        out.push(if c == 0 { 1.0 } else { prefix[c] as f64 / c as f64 });
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ChaosOptions {
    pub t0: f64,
    pub t_grid: Vec<f64>,
    pub tau_low: f64,
    pub tau_high: f64,
    /// Window minimum counting as proximal.
    pub proximal: f64,
    /// Window maximum counting as separated.
    pub separated: f64,
    /// Windows of each kind needed for a Li-Yorke verdict.
    pub min_windows: usize,
}

impl Default for ChaosOptions {
    fn default() -> Self {
        ChaosOptions {
            t0: 0.5,
            t_grid: (1..=10).map(|k| 0.5f64.powi(k)).collect(),
            tau_low: 0.05,
            tau_high: 0.05,
            proximal: 0.5f64.powi(10),
            separated: 0.5f64.powi(4),
            min_windows: 2,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PhiTrajectory {
    pub t: f64,
    pub phi: Vec<f64>,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Dc1Report {
    pub checkpoints: Vec<usize>,
    pub t0: PhiTrajectory,
    pub grid: Vec<PhiTrajectory>,
    pub consistent: bool,
    pub verdict: String,
}

fn trajectory(next: &[usize], t: f64, checkpoints: &[usize]) -> PhiTrajectory {
    let phi = phi_at(next, t, checkpoints);
    let min = phi.iter().copied().fold(f64::INFINITY, f64::min);
    let max = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    PhiTrajectory { t, phi, min, max }
}

fn usable(x: &Word, y: &Word, checkpoints: &[usize]) -> Vec<usize> {
    let n = x.len().min(y.len());
    checkpoints.iter().copied().filter(|c| *c > 0 && *c <= n).collect()
}

/// `min_c phi_c(t0) <= tau_low` and `max_c phi_c(t) >= 1 - tau_high` for
/// every grid `t`. Checkpoints beyond the words are dropped.
pub fn dc1_report(x: &Word, y: &Word, checkpoints: &[usize], opts: &ChaosOptions) -> Dc1Report {
    let cps = usable(x, y, checkpoints);
    let next = next_disagreement(&x.0, &y.0);
    let t0 = trajectory(&next, opts.t0, &cps);
    let grid: Vec<PhiTrajectory> = opts.t_grid.iter().map(|t| trajectory(&next, *t, &cps)).collect();
    let consistent =
        !cps.is_empty() && t0.min <= opts.tau_low && grid.iter().all(|g| g.max >= 1.0 - opts.tau_high);
    Dc1Report {
        checkpoints: cps,
        t0,
        grid,
        consistent,
        verdict: verdict(consistent, "DC1"),
    }
}

fn verdict(ok: bool, what: &str) -> String {
    if ok {
        format!("consistent-with {what}")
    } else {
        format!("not {what}")
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Window {
    pub start: usize,
    pub end: usize,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LiYorkeReport {
    pub windows: Vec<Window>,
    pub running_min: Vec<f64>,
    pub running_max: Vec<f64>,
    pub proximal_windows: usize,
    pub separated_windows: usize,
    /// A separated window comes after the first proximal one.
    pub alternates: bool,
    /// Every window after the first stays above the proximal threshold.
    pub distal: bool,
    pub consistent: bool,
    pub verdict: String,
}

/// Min and max of `d(T^i x, T^i y)` over the windows cut by `checkpoints`
/// (from 0, with a final window up to the word length).
pub fn li_yorke_report(x: &Word, y: &Word, checkpoints: &[usize], opts: &ChaosOptions) -> LiYorkeReport {
    let n = x.len().min(y.len());
    let next = next_disagreement(&x.0, &y.0);
    let mut cuts: Vec<usize> = usable(x, y, checkpoints);
    cuts.sort_unstable();
    cuts.dedup();
    if cuts.last() != Some(&n) && n > 0 {
        cuts.push(n);
    }
    let mut windows = Vec::new();
    let mut start = 0;
    for &end in &cuts {
        if end <= start {
            continue;
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in start..end {
            let d = distance_at(&next, i);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        windows.push(Window { start, end, min: lo, max: hi });
        start = end;
    }
    let mut running_min = Vec::with_capacity(windows.len());
    let mut running_max = Vec::with_capacity(windows.len());
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for w in &windows {
        lo = lo.min(w.min);
        hi = hi.max(w.max);
        running_min.push(lo);
        running_max.push(hi);
    }
    let proximal_windows = windows.iter().filter(|w| w.min <= opts.proximal).count();
    let separated_windows = windows.iter().filter(|w| w.max >= opts.separated).count();
    let alternates = windows
        .iter()
        .position(|w| w.min <= opts.proximal)
        .is_some_and(|first| windows[first + 1..].iter().any(|w| w.max >= opts.separated));
    let distal = windows.len() > 1 && windows[1..].iter().all(|w| w.min > opts.proximal);
    let consistent = proximal_windows >= opts.min_windows && separated_windows >= opts.min_windows && alternates;
    LiYorkeReport {
        windows,
        running_min,
        running_max,
        proximal_windows,
        separated_windows,
        alternates,
        distal,
        consistent,
        verdict: verdict(consistent, "Li-Yorke"),
    }
}

/// Two preimages `a u c^inf`, `b v c^inf` of the unique maximizing cycle
/// `c` of `f`, with `a != b` and `|u| = |v|`, truncated to `horizon`.
pub fn smr_preimage_pair(space: &SftSpace, f: &Potential, horizon: usize) -> Result<(Word, Word)> {
    let cycle = match classify_smr(space, f)? {
        SmrClass::Periodic { cycle, .. } => cycle,
        SmrClass::Ties { .. } => {
            return Err(Error::InfeasibleParams("maximizing measure is not a unique periodic orbit".into()))
        }
    };
    let gap = space.gap()?;
    let head = cycle.0[0];
    let m = space.alphabet_size() as u8;
    let lead = |a: u8| -> Result<Vec<u8>> {
        let mut w = vec![a];
        w.extend(space.connector(a, head, gap)?.0);
        Ok(w)
    };
    let build = |mut w: Vec<u8>| {
        let mut i = 0;
        while w.len() < horizon {
            w.push(cycle.0[i % cycle.len()]);
            i += 1;
        }
        w.truncate(horizon);
        Word(w)
    };
    if m < 2 {
        return Err(Error::InvalidSpace("need at least two symbols".into()));
    }
    Ok((build(lead(0)?), build(lead(1)?)))
}

#[derive(Clone, Debug, Serialize)]
pub struct PairReport {
    pub i: usize,
    pub j: usize,
    pub dc1: Dc1Report,
    pub li_yorke: LiYorkeReport,
}

/// Reports for every pair `i < j`, in parallel over pairs.
pub fn pair_reports(words: &[Word], checkpoints: &[usize], opts: &ChaosOptions) -> Vec<PairReport> {
    let pairs: Vec<(usize, usize)> = (0..words.len())
        .flat_map(|i| (i + 1..words.len()).map(move |j| (i, j)))
        .collect();
    par::map(&pairs, |&(i, j)| PairReport {
        i,
        j,
        dc1: dc1_report(&words[i], &words[j], checkpoints, opts),
        li_yorke: li_yorke_report(&words[i], &words[j], checkpoints, opts),
    })
}

/// Trajectories as CSV with columns `n,t,phi`.
pub fn write_phi_csv<W: Write>(out: W, report: &Dc1Report) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Config(e.to_string());
    w.write_record(["n", "t", "phi"]).map_err(io)?;
    for tr in std::iter::once(&report.t0).chain(&report.grid) {
        for (n, p) in report.checkpoints.iter().zip(&tr.phi) {
            w.write_record([n.to_string(), format!("{:.12}", tr.t), format!("{:.12}", p)])
                .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::Config(e.to_string()))
}
