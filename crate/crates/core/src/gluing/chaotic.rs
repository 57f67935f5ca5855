//! Families `z_xi` indexed by `xi in {1,2}^N` whose pairs are scrambled.
//!
//! Stage `k` of `z_xi` is `N_k` blocks tracking `mu0`, then for `q = 1..=k` a
//! block of length `n~_k` following the periodic orbit `lambda_{xi_q}`, then
//! a tour. Two members first differing at `xi_u` sit on disjoint orbits
//! during the `u`-th such block of every stage `k >= u`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::chaos::{distance_at, next_disagreement};
use crate::error::{Error, Result};
use crate::measures::{primitive_root, sample_word, MarkovMeasure};
use crate::rng;
use crate::shift::{self, SftSpace, Word};
use crate::tour;

use super::{Check, ValidationReport};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChaosMode {
    /// All members share their `mu0` blocks.
    #[default]
    Shared,
    /// `mu0` is periodic; at odd stages `2j - 1` each member runs it in the
    /// phase selected by `xi_j`, at even stages all members are in phase.
    Phased,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ChaoticOptions {
    pub mode: ChaosMode,
    pub zeta_first: f64,
    pub zeta_ratio: f64,
    pub min_block: usize,
    /// Lower bound on the orbit-block length `n~_k`.
    pub min_orbit_block: usize,
}

impl Default for ChaoticOptions {
    fn default() -> Self {
        ChaoticOptions {
            mode: ChaosMode::Shared,
            zeta_first: 0.5,
            zeta_ratio: 0.5,
            min_block: 1,
            min_orbit_block: 5,
        }
    }
}

impl ChaoticOptions {
    /// Phased mode with `zeta_k = 16^-k`.
    pub fn phased() -> Self {
        ChaoticOptions {
            mode: ChaosMode::Phased,
            zeta_first: 1.0 / 16.0,
            zeta_ratio: 1.0 / 16.0,
            ..ChaoticOptions::default()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChaosStage {
    pub mu_len: usize,
    pub reps: usize,
    pub orbit_len: usize,
    pub tour: Word,
    pub zeta: f64,
    /// `[start, end)` of the stage.
    pub start: usize,
    pub end: usize,
    /// End of the stage's `mu0` blocks.
    pub mu_end: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChaoticFamily {
    pub words: BTreeMap<Vec<u8>, Word>,
    pub horizon: usize,
    pub epsilon_star: f64,
    pub stages: Vec<ChaosStage>,
    /// Ends of the individual `mu0` blocks inside the horizon.
    pub checkpoints: Vec<usize>,
    pub report: ValidationReport,
}

impl ChaoticFamily {
    /// Stages lying entirely inside the horizon.
    pub fn complete_stages(&self) -> usize {
        self.stages.iter().take_while(|s| s.end <= self.horizon).count()
    }

    /// Last `mu0`-block end inside the horizon.
    pub fn final_checkpoint(&self) -> Option<usize> {
        self.checkpoints.last().copied()
    }
}

/// `min d(T^i p, T^j q)` over the two periodic orbits.
pub fn orbit_distance(lambda1: &Word, lambda2: &Word) -> Result<f64> {
    let a = primitive_root(&lambda1.0);
    let b = primitive_root(&lambda2.0);
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidSpace("empty periodic word".into()));
    }
    let len = a.len() * b.len();
    let mut eps = 1.0f64;
    for i in 0..a.len() {
        for j in 0..b.len() {
            let t = (0..len).find(|t| a[(i + t) % a.len()] != b[(j + t) % b.len()]);
            match t {
                None => return Err(Error::OrbitsNotDisjoint),
                Some(t) => eps = eps.min(0.5f64.powi(t as i32)),
            }
        }
    }
    Ok(eps)
}

fn periodic_block(cycle: &[u8], phase: usize, len: usize) -> Vec<u8> {
    (0..len).map(|i| cycle[(phase + i) % cycle.len()]).collect()
}

fn push(space: &SftSpace, gap: usize, out: &mut Vec<u8>, piece: &[u8]) -> Result<()> {
    if let (Some(a), Some(b)) = (out.last(), piece.first()) {
        out.extend(space.connector(*a, *b, gap)?.0);
    }
    out.extend_from_slice(piece);
    Ok(())
}

/// Emits `z_xi` up to `horizon` for every `xi` in `xis` (entries 1 or 2,
/// padded with 1), with default options.
pub fn emit_chaotic_family(
    space: &SftSpace,
    mu0: &MarkovMeasure,
    lambda1: &Word,
    lambda2: &Word,
    xis: &[Vec<u8>],
    horizon: usize,
    seed: u64,
) -> Result<ChaoticFamily> {
    emit_chaotic_family_with(space, mu0, lambda1, lambda2, xis, horizon, seed, &ChaoticOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn emit_chaotic_family_with(
    space: &SftSpace,
    mu0: &MarkovMeasure,
    lambda1: &Word,
    lambda2: &Word,
    xis: &[Vec<u8>],
    horizon: usize,
    seed: u64,
    opts: &ChaoticOptions,
) -> Result<ChaoticFamily> {
    if !space.is_primitive() {
        return Err(Error::NotPrimitive);
    }
    for l in [lambda1, lambda2] {
        if l.is_empty() || !space.is_cyclically_admissible(&l.0) {
            return Err(Error::InvalidMeasure(format!("{l} is not an admissible cycle")));
        }
    }
    if xis.iter().flatten().any(|s| *s != 1 && *s != 2) {
        return Err(Error::InfeasibleParams("xi entries must be 1 or 2".into()));
    }
    if !(opts.zeta_first > 0.0 && opts.zeta_first < 1.0 && opts.zeta_ratio > 0.0 && opts.zeta_ratio <= 1.0) {
        return Err(Error::InfeasibleParams("zeta must lie in (0, 1)".into()));
    }
    mu0.check_support(space)?;
    let eps = orbit_distance(lambda1, lambda2)?;
    let gap = space.gap()?;
    let c = gap - 1;
    let cycle0: Option<Vec<u8>> = (mu0.order() >= 1 && is_periodic(mu0)).then(|| mu0.states()[0].clone());
    let mu_period = match (opts.mode, &cycle0) {
        (ChaosMode::Phased, Some(cy)) if cy.len() >= 2 => cy.len(),
        (ChaosMode::Phased, _) => {
            return Err(Error::InfeasibleParams("phased mode needs a periodic mu0 of period >= 2".into()))
        }
        (ChaosMode::Shared, _) => 1,
    };
    let p1 = primitive_root(&lambda1.0).len();
    let p2 = primitive_root(&lambda2.0).len();
    let lookahead = (-eps.log2()).ceil() as usize + 1;
    let orbit_len = opts.min_orbit_block.max(p1).max(p2).max(lookahead).max(1);

    // plan stages
    let mut stages: Vec<ChaosStage> = Vec::new();
    let mut checks = Vec::new();
    let mut pos = 0usize;
    let mut k = 0usize;
    while pos < horizon {
        k += 1;
        let zeta = opts.zeta_first * opts.zeta_ratio.powi(k as i32 - 1);
        let tour = tour::tour(space, k + 1)?;
        let mut mu_len = ((tour.len() as f64 / zeta).ceil() as usize).max(opts.min_block).max(1);
        mu_len = mu_len.div_ceil(mu_period) * mu_period;
        let lead = if pos > 0 { c } else { 0 };
        let other = k * (c + orbit_len) + c + tour.len();
        let through = |reps: usize| pos + lead + mu_len + (reps - 1) * (c + mu_len) + other;
        let ok = |reps: usize| (pos + other) as f64 <= zeta * through(reps) as f64;
        let need = (pos + other) as f64 / zeta;
        let mut reps = ((need - through(1) as f64) / (c + mu_len) as f64).ceil().max(0.0) as usize + 1;
        while !ok(reps) {
            reps += 1;
        }
        while reps > 1 && ok(reps - 1) {
            reps -= 1;
        }
        let end = through(reps);
        checks.push(Check::le("de", k, (pos + other) as f64, zeta * end as f64));
        checks.push(Check::le("dl", k, lookahead.max(p1).max(p2) as f64, orbit_len as f64));
        checks.push(Check::le("dm", k, tour.len() as f64, zeta * mu_len as f64));
        stages.push(ChaosStage {
            mu_len,
            reps,
            orbit_len,
            tour,
            zeta,
            start: pos,
            end,
            mu_end: end - other,
        });
        pos = end;
    }

    let depth = stages.len();
    let padded: Vec<Vec<u8>> = xis
        .iter()
        .map(|xi| {
            let mut v = xi.clone();
            v.resize(v.len().max(depth), 1);
            v
        })
        .collect();
    let lambda = [primitive_root(&lambda1.0), primitive_root(&lambda2.0)];
    // shared mu0 blocks, one per (stage, rep)
    let shared: Vec<Vec<Vec<u8>>> = stages
        .iter()
        .enumerate()
        .map(|(i, st)| {
            (0..st.reps)
                .map(|r| match opts.mode {
                    ChaosMode::Shared => sample_word(mu0, st.mu_len, rng::derive_seed(seed, &[i as u64, r as u64])).0,
                    ChaosMode::Phased => Vec::new(),
                })
                .collect()
        })
        .collect();
    let mut words = BTreeMap::new();
    for (xi, full) in xis.iter().zip(&padded) {
        let mut out: Vec<u8> = Vec::with_capacity(pos);
        for (i, st) in stages.iter().enumerate() {
            let k = i + 1;
            for sampled in &shared[i] {
                let block = match (opts.mode, &cycle0) {
                    (ChaosMode::Phased, Some(cy)) => {
                        let phase = if k % 2 == 1 { (full[(k - 1) / 2] - 1) as usize } else { 0 };
                        periodic_block(cy, phase, st.mu_len)
                    }
                    _ => sampled.clone(),
                };
                push(space, gap, &mut out, &block)?;
                if out.len() >= horizon {
                    break;
                }
            }
            for q in 0..k {
                let cy = &lambda[(full[q] - 1) as usize];
                push(space, gap, &mut out, &periodic_block(cy, 0, st.orbit_len))?;
            }
            push(space, gap, &mut out, &st.tour.0)?;
            if out.len() >= horizon {
                break;
            }
        }
        out.truncate(horizon);
        debug_assert!(space.is_admissible(&out));
        words.insert(xi.clone(), Word(out));
    }

    let mut checkpoints = Vec::new();
    for st in &stages {
        let mut p = st.start;
        for _ in 0..st.reps {
            p += if p > 0 { c } else { 0 } + st.mu_len;
            if p <= horizon {
                checkpoints.push(p);
            }
        }
    }
    Ok(ChaoticFamily {
        words,
        horizon,
        epsilon_star: eps,
        stages,
        checkpoints,
        report: ValidationReport::new(checks),
    })
}

fn is_periodic(mu: &MarkovMeasure) -> bool {
    mu.stochastic()
        .iter()
        .all(|row| row.iter().filter(|p| **p > 0.0).count() == 1)
        && mu.stationary().iter().all(|p| *p > 0.0)
        && {
            let cy = &mu.states()[0];
            let p = cy.len();
            mu.states().len() == p
        }
}

/// Largest `d(T^i x, T^i y)` over each stage of the family, for stages
/// inside the horizon.
pub fn stage_max_distances(family: &ChaoticFamily, x: &Word, y: &Word) -> Vec<f64> {
    let next = next_disagreement(&x.0, &y.0);
    family
        .stages
        .iter()
        .filter(|s| s.end <= family.horizon)
        .map(|s| (s.start..s.end).map(|i| distance_at(&next, i)).fold(0.0, f64::max))
        .collect()
}

/// First index where two `xi` sequences differ (1-based), after padding.
pub fn first_difference(a: &[u8], b: &[u8]) -> Option<usize> {
    let n = a.len().max(b.len());
    (0..n)
        .find(|i| a.get(*i).copied().unwrap_or(1) != b.get(*i).copied().unwrap_or(1))
        .map(|i| i + 1)
}

/// The two-sided check that the words really are distinct points.
pub fn distinct_members(family: &ChaoticFamily) -> Result<usize> {
    let words: Vec<Word> = family.words.values().cloned().collect();
    shift::separated_count(&words, family.horizon, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xis3() -> Vec<Vec<u8>> {
        (0..8u8)
            .map(|b| (0..3).map(|i| 1 + ((b >> (2 - i)) & 1)).collect())
            .collect()
    }

    #[test]
    fn orbit_distances() {
        assert_eq!(orbit_distance(&Word::from("0"), &Word::from("1")).unwrap(), 1.0);
        assert_eq!(orbit_distance(&Word::from("01"), &Word::from("0")).unwrap(), 0.5);
        assert_eq!(orbit_distance(&Word::from("01"), &Word::from("10")).unwrap_err(), Error::OrbitsNotDisjoint);
        assert_eq!(orbit_distance(&Word::from("001"), &Word::from("011")).unwrap(), 0.25);
    }

    #[test]
    fn shared_mode_family() {
        let full = SftSpace::full(2);
        let mu0 = MarkovMeasure::periodic(&full, &Word::from("0")).unwrap();
        let fam = emit_chaotic_family_with(
            &full,
            &mu0,
            &Word::from("0"),
            &Word::from("1"),
            &xis3(),
            100_000,
            1,
            &ChaoticOptions::default(),
        )
        .unwrap();
        assert!(fam.report.pass, "{:?}", fam.report);
        assert_eq!(fam.words.len(), 8);
        assert_eq!(distinct_members(&fam).unwrap(), 8);
        assert!(fam.complete_stages() >= 4);
        for w in fam.words.values() {
            assert_eq!(w.len(), 100_000);
            assert!(full.is_admissible(&w.0));
        }
        let keys: Vec<&Vec<u8>> = fam.words.keys().collect();
        for i in 0..8 {
            for j in i + 1..8 {
                let u = first_difference(keys[i], keys[j]).unwrap();
                let d = stage_max_distances(&fam, &fam.words[keys[i]], &fam.words[keys[j]]);
                for (k, m) in d.iter().enumerate() {
                    if k + 1 >= u {
                        assert!(*m >= fam.epsilon_star / 2.0);
                    }
                }
            }
        }
    }

    #[test]
    fn identical_xi_identical_words() {
        let full = SftSpace::full(2);
        let mu0 = MarkovMeasure::bernoulli2(0.5).unwrap();
        let xis = vec![vec![1, 2], vec![1, 2, 1]];
        let fam = emit_chaotic_family_with(&full, &mu0, &Word::from("0"), &Word::from("1"), &xis, 5000, 3, &ChaoticOptions::default())
            .unwrap();
        assert_eq!(fam.words[&xis[0]], fam.words[&xis[1]]);
    }

    #[test]
    fn phased_mode_needs_periodic() {
        let full = SftSpace::full(2);
        let mu0 = MarkovMeasure::bernoulli2(0.5).unwrap();
        let err = emit_chaotic_family_with(&full, &mu0, &Word::from("0"), &Word::from("1"), &xis3(), 1000, 0, &ChaoticOptions::phased());
        assert!(matches!(err, Err(Error::InfeasibleParams(_))));
    }

    #[test]
    fn phased_mode_family() {
        let full = SftSpace::full(2);
        let mu0 = MarkovMeasure::periodic(&full, &Word::from("01")).unwrap();
        let xis = vec![vec![1, 1], vec![2, 1]];
        let fam = emit_chaotic_family_with(&full, &mu0, &Word::from("0"), &Word::from("1"), &xis, 100_000, 0, &ChaoticOptions::phased())
            .unwrap();
        assert!(fam.report.pass);
        let (a, b) = (&fam.words[&xis[0]], &fam.words[&xis[1]]);
        let first = fam.stages[0].mu_end;
        assert!(a.0[..first].iter().zip(&b.0[..first]).all(|(x, y)| x != y));
        let second = &fam.stages[1];
        assert_eq!(&a.0[second.start..second.mu_end], &b.0[second.start..second.mu_end]);
    }

    #[test]
    fn golden_mean_family() {
        let gm = SftSpace::golden_mean();
        let mu0 = MarkovMeasure::periodic(&gm, &Word::from("0")).unwrap();
        let xis = vec![vec![1, 2], vec![2, 1], vec![2, 2]];
        let fam = emit_chaotic_family_with(&gm, &mu0, &Word::from("0"), &Word::from("01"), &xis, 20_000, 0, &ChaoticOptions::default())
            .unwrap();
        assert!(fam.report.pass);
        for w in fam.words.values() {
            assert!(gm.is_admissible(&w.0));
        }
    }
}
