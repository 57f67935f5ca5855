//! Branching trees with counting measures.
//!
//! Stage `i` of a tree is `N_i` branching blocks followed by a tour. A block
//! picks one word from each component family `Gamma_{c,i}` and concatenates
//! them, so stage `i` branches `#Gamma'_i = prod_c #Gamma_{c,i}` ways per block.
//! The counting measure at depth `L` puts mass `1 / prod #Gamma'^N` on every
//! leaf.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{ks_entropy, typical_separated_family_with, FamilyOptions, MarkovMeasure, MeasurePath};
use crate::rng;
use crate::shift::{SftSpace, Word};
use crate::tour;

use super::{Check, ValidationReport};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeOptions {
    /// Length of each component word.
    pub word_len: usize,
    pub delta: f64,
    pub zeta_first: f64,
    pub zeta_ratio: f64,
    /// Bowen balls are taken at scale `2^-k`.
    pub scale: usize,
    pub tolerance: f64,
    pub family_depth: usize,
    pub patience: usize,
}

impl Default for TreeOptions {
    fn default() -> Self {
        TreeOptions {
            word_len: 12,
            delta: 0.05,
            zeta_first: 0.5,
            zeta_ratio: 0.5,
            scale: 1,
            tolerance: FamilyOptions::default().tolerance,
            family_depth: FamilyOptions::default().depth,
            patience: FamilyOptions::default().patience,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TreeStage {
    /// `Gamma_{c,i}` per component.
    pub families: Vec<Vec<Word>>,
    pub reps: usize,
    pub tour: Word,
    pub zeta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchTree {
    pub space: SftSpace,
    pub gap: usize,
    pub components: Vec<MarkovMeasure>,
    pub h_star: f64,
    pub eta: f64,
    pub scale: usize,
    pub stages: Vec<TreeStage>,
}

/// Bowen-ball mass at one branching stage, exact.
#[derive(Clone, Debug, Serialize)]
pub struct MassCheck {
    pub stage: usize,
    pub prefix_len: usize,
    /// `max_x mu(B_{M_s}(x, eps))` under the leaf counting measure.
    #[serde(serialize_with = "display")]
    pub max_mass: BigRational,
    /// `1 / prod #Gamma'` over all blocks through stage `s`.
    #[serde(serialize_with = "display")]
    pub bound: BigRational,
    /// `exp(-M_s (H* - 2 eta - zeta_s))`.
    pub exp_bound: f64,
    pub pass: bool,
}

impl BranchTree {
    pub fn depth(&self) -> usize {
        self.stages.len()
    }

    fn block_len(&self, stage: &TreeStage) -> usize {
        let c = self.gap - 1;
        stage.families.iter().map(|f| f[0].len()).sum::<usize>() + c * (stage.families.len() - 1)
    }

    /// `#Gamma'_i`.
    pub fn branching(&self, stage: usize) -> BigUint {
        self.stages[stage]
            .families
            .iter()
            .fold(BigUint::one(), |acc, f| acc * BigUint::from(f.len()))
    }

    /// Leaves through `depth` stages.
    pub fn leaf_count(&self, depth: usize) -> BigUint {
        (0..depth).fold(BigUint::one(), |acc, i| acc * self.branching(i).pow(self.stages[i].reps as u32))
    }

    /// Weight of each leaf at `depth`.
    pub fn leaf_weight(&self, depth: usize) -> BigRational {
        BigRational::new(BigUint::one().into(), self.leaf_count(depth).into())
    }

    /// `M_s` for `s = 1..=depth`.
    pub fn stage_ends(&self) -> Vec<usize> {
        let c = self.gap - 1;
        let mut pos = 0usize;
        let mut out = Vec::new();
        for st in &self.stages {
            for _ in 0..st.reps {
                pos += if pos > 0 { c } else { 0 } + self.block_len(st);
            }
            pos += c + st.tour.len();
            out.push(pos);
        }
        out
    }

    /// Per-stage (ac) inequality `(H* - 2eta - zeta_i) M_i <= (H* - 2eta) S_i`,
    /// `S_i` being the total length of branching blocks through stage `i`.
    pub fn validate(&self) -> ValidationReport {
        let ends = self.stage_ends();
        let h = self.h_star - 2.0 * self.eta;
        let mut branching = 0usize;
        let mut checks = Vec::new();
        for (i, st) in self.stages.iter().enumerate() {
            branching += st.reps * self.block_len(st);
            checks.push(Check::le("ac", i + 1, (h - st.zeta) * ends[i] as f64, h * branching as f64));
        }
        ValidationReport::new(checks)
    }

    /// Renders the word of block choice `choice` at `stage` (mixed radix over
    /// components), without surrounding connectors.
    fn block(&self, stage: usize, mut choice: usize) -> Result<Vec<u8>> {
        let st = &self.stages[stage];
        let mut out: Vec<u8> = Vec::new();
        let mut picks = Vec::with_capacity(st.families.len());
        for f in st.families.iter().rev() {
            picks.push(&f[choice % f.len()]);
            choice /= f.len();
        }
        picks.reverse();
        for w in picks {
            self.push(&mut out, &w.0)?;
        }
        Ok(out)
    }

    fn push(&self, out: &mut Vec<u8>, piece: &[u8]) -> Result<()> {
        if let (Some(a), Some(b)) = (out.last(), piece.first()) {
            let conn = self.space.connector(*a, *b, self.gap)?;
            out.extend(conn.0);
        }
        out.extend_from_slice(piece);
        Ok(())
    }

    /// The leaf for block choices `choices[i][j]` (stage `i`, block `j`).
    pub fn leaf(&self, choices: &[Vec<usize>]) -> Result<Word> {
        let mut out = Vec::new();
        for (i, st) in self.stages.iter().enumerate().take(choices.len()) {
            if choices[i].len() != st.reps {
                return Err(Error::InfeasibleParams(format!("stage {} needs {} choices", i + 1, st.reps)));
            }
            for c in &choices[i] {
                let b = self.block(i, *c)?;
                self.push(&mut out, &b)?;
            }
            self.push(&mut out, &st.tour.0)?;
        }
        Ok(Word(out))
    }

    /// All leaves at `depth`, refusing trees with more than `limit` leaves.
    pub fn enumerate_leaves(&self, depth: usize, limit: usize) -> Result<Vec<Word>> {
        let count = self.leaf_count(depth);
        if count > BigUint::from(limit) {
            return Err(Error::TreeTooLarge(count.to_string()));
        }
        let radices: Vec<(usize, usize)> = (0..depth)
            .flat_map(|i| {
                let b = self.branching(i).to_usize().unwrap_or(usize::MAX);
                std::iter::repeat_n((i, b), self.stages[i].reps)
            })
            .collect();
        let total = count.to_usize().unwrap_or(0);
        let mut leaves = Vec::with_capacity(total);
        for mut idx in 0..total {
            let mut choices: Vec<Vec<usize>> = vec![Vec::new(); depth];
            for (stage, radix) in radices.iter().rev() {
                choices[*stage].push(idx % radix);
                idx /= radix;
            }
            for c in &mut choices {
                c.reverse();
            }
            leaves.push(self.leaf(&choices)?);
        }
        Ok(leaves)
    }

    /// Largest number of choices rendering the same block word at `stage`.
    pub fn max_multiplicity(&self, stage: usize) -> Result<usize> {
        let b = self.branching(stage).to_usize().ok_or_else(|| Error::TreeTooLarge("block".into()))?;
        let mut seen: HashMap<Vec<u8>, usize> = HashMap::with_capacity(b);
        for c in 0..b {
            *seen.entry(self.block(stage, c)?).or_default() += 1;
        }
        Ok(seen.values().copied().max().unwrap_or(0))
    }

    /// Exact Bowen-ball masses of the depth-`depth` counting measure at every
    /// branching stage `s <= depth`.
    ///
    /// Blocks sit at fixed positions and are chosen independently, so the
    /// leaves sharing a prefix through stage `s` are counted block by block.
    pub fn mass_checks(&self, depth: usize) -> Result<Vec<MassCheck>> {
        let ends = self.stage_ends();
        let h = self.h_star - 2.0 * self.eta;
        let mut max_mass = BigRational::one();
        let mut bound = BigRational::one();
        let mut out = Vec::new();
        for s in 0..depth {
            let st = &self.stages[s];
            let b: BigRational = BigRational::from_integer(self.branching(s).into());
            let mult = BigRational::from_integer(self.max_multiplicity(s)?.into());
            for _ in 0..st.reps {
                max_mass = max_mass * &mult / &b;
                bound /= &b;
            }
            let exp_bound = (-(ends[s] as f64) * (h - st.zeta)).exp();
            let log_mass = log_rational(&max_mass);
            out.push(MassCheck {
                stage: s + 1,
                prefix_len: ends[s] + self.scale - 1,
                pass: max_mass <= bound && log_mass <= -(ends[s] as f64) * (h - st.zeta) + 1e-9,
                max_mass: max_mass.clone(),
                bound: bound.clone(),
                exp_bound,
            });
        }
        Ok(out)
    }
}

fn display<S: serde::Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(r)
}

fn log_rational(r: &BigRational) -> f64 {
    log_big(r.numer().magnitude()) - log_big(r.denom().magnitude())
}

fn log_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    let shift = bits.saturating_sub(60);
    let top = (x >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Brute-force masses from enumerated leaves: for every stage, the largest
/// share of leaves with a common `(M_s + scale - 1)`-prefix, and the sum of
/// all leaf weights.
pub fn brute_force_masses(tree: &BranchTree, depth: usize, limit: usize) -> Result<(Vec<BigRational>, BigRational)> {
    let leaves = tree.enumerate_leaves(depth, limit)?;
    let w = tree.leaf_weight(depth);
    let total = leaves.iter().fold(BigRational::zero(), |acc, _| acc + &w);
    let ends = tree.stage_ends();
    let mut masses = Vec::new();
    for s in 0..depth {
        let len = ends[s] + tree.scale - 1;
        let mut counts: HashMap<&[u8], usize> = HashMap::new();
        for l in &leaves {
            *counts.entry(&l.0[..len.min(l.len())]).or_default() += 1;
        }
        let max = counts.values().copied().max().unwrap_or(0);
        masses.push(&w * BigRational::from_integer(max.into()));
    }
    Ok((masses, total))
}

/// Components of maximal entropy among the checkpoints of `k`.
fn top_components(k: &MeasurePath) -> Vec<MarkovMeasure> {
    let h: Vec<f64> = k.checkpoints.iter().map(ks_entropy).collect();
    let best = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    k.checkpoints
        .iter()
        .zip(&h)
        .filter(|(_, e)| **e >= best - 1e-9)
        .map(|(m, _)| m.clone())
        .collect()
}

/// Branching tree for the convex hull of the checkpoints of `k`, targeting
/// the equal-weight mixture of its maximal-entropy checkpoints.
pub fn build_branch_tree(
    space: &SftSpace,
    k: &MeasurePath,
    eta: f64,
    depth: usize,
    seed: u64,
) -> Result<BranchTree> {
    build_branch_tree_with(space, k, eta, depth, seed, &TreeOptions::default())
}

pub fn build_branch_tree_with(
    space: &SftSpace,
    k: &MeasurePath,
    eta: f64,
    depth: usize,
    seed: u64,
    opts: &TreeOptions,
) -> Result<BranchTree> {
    if !space.is_primitive() {
        return Err(Error::NotPrimitive);
    }
    if !(eta > 0.0) || depth == 0 || opts.word_len == 0 {
        return Err(Error::InfeasibleParams("need eta > 0, depth >= 1 and word_len >= 1".into()));
    }
    k.validate()?;
    let components = top_components(k);
    for c in &components {
        c.check_support(space)?;
    }
    let h_star = ks_entropy(&components[0]) - eta;
    let gap = space.gap()?;
    let c = gap - 1;
    let fam_opts = FamilyOptions {
        tolerance: opts.tolerance,
        depth: opts.family_depth,
        patience: opts.patience,
    };
    let mut stages: Vec<TreeStage> = Vec::new();
    let mut pos = 0usize;
    let mut branching = 0usize;
    let h = h_star - 2.0 * eta;
    for i in 1..=depth {
        let families = components
            .iter()
            .enumerate()
            .map(|(ci, mu)| {
                typical_separated_family_with(
                    mu,
                    opts.word_len,
                    opts.delta,
                    eta,
                    rng::derive_seed(seed, &[i as u64, ci as u64]),
                    &fam_opts,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let tour = tour::tour(space, i + 1)?;
        let zeta = opts.zeta_first * opts.zeta_ratio.powi(i as i32 - 1);
        let blk = families.iter().map(|f| f[0].len()).sum::<usize>() + c * (families.len() - 1);
        let through = |reps: usize| -> (usize, usize) {
            let lead = if pos > 0 { c } else { 0 };
            (pos + lead + blk + (reps - 1) * (c + blk) + c + tour.len(), branching + reps * blk)
        };
        let ok = |reps: usize| {
            let (m, b) = through(reps);
            (h - zeta) * m as f64 <= h * b as f64
        };
        let mut reps = 1;
        while !ok(reps) {
            reps += 1;
            if reps > 1 << 20 {
                return Err(Error::InfeasibleParams(format!("no N_{i} satisfies (ac)")));
            }
        }
        let (m, b) = through(reps);
        pos = m;
        branching = b;
        stages.push(TreeStage {
            families,
            reps,
            tour,
            zeta,
        });
    }
    Ok(BranchTree {
        space: space.clone(),
        gap,
        components,
        h_star,
        eta,
        scale: opts.scale.max(1),
        stages,
    })
}
