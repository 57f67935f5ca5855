//! The specification gluing engine.
//!
//! A schedule is a list of blocks: an optional anchor word, an optional family
//! slot, then stages. Stage `k` is `N_k` bodies of length `n_k` drawn from a
//! target measure `alpha_k`, followed by a tour of depth `k`. Consecutive
//! pieces are joined by connectors of length `gap - 1`. Past the last stage
//! the stream keeps repeating bodies of the last stage.

pub mod chaotic;
pub mod tree;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{
    max_cylinder_weight, refine_path, weak_star_dist, EmpiricalMeasure, MarkovMeasure,
    MeasurePath, Sampler, Scaled,
};
use crate::par;
use crate::rng;
use crate::shift::{SegmentSource, SftSpace, SymbolStream, Word};
use crate::tour;

pub use chaotic::{emit_chaotic_family, emit_chaotic_family_with, ChaosMode, ChaoticFamily, ChaoticOptions};
pub use tree::{build_branch_tree, BranchTree, TreeOptions};

/// Rejected body draws tolerated before a stage is declared stalled.
pub const SAMPLER_ATTEMPTS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Block {
    Anchor { word: Word },
    Family { len: usize },
    Measure {
        measure: MarkovMeasure,
        len: usize,
        reps: usize,
    },
    Tour { depth: usize, word: Word },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    /// `zeta_k` per stage.
    pub zeta: Vec<f64>,
    /// `eps_k` per stage.
    pub epsilon: Vec<f64>,
    /// Cylinder depth at which tracking is measured.
    pub depth: usize,
    /// Separation rate of the family slot, when there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GluingSchedule {
    pub space: SftSpace,
    pub gap: usize,
    pub blocks: Vec<Block>,
    pub params: ScheduleParams,
}

/// Knobs of the default parameter generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleOptions {
    pub zeta_first: f64,
    pub zeta_ratio: f64,
    pub min_block: usize,
    pub depth: usize,
    /// `n_k >= c0 / zeta_k^2` keeps body rejection sampling cheap.
    pub c0: f64,
}

impl Default for ScheduleOptions {
    fn default() -> Self {
        ScheduleOptions {
            zeta_first: 0.5,
            zeta_ratio: 0.5,
            min_block: 1,
            depth: 2,
            c0: 1.0,
        }
    }
}

/// One stage as read off the block list.
#[derive(Clone, Debug)]
pub struct StageView {
    pub measure: MarkovMeasure,
    pub len: usize,
    pub reps: usize,
    pub tour_len: usize,
    pub zeta: f64,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub stage: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl Check {
    pub fn le(name: &str, stage: usize, lhs: f64, rhs: f64) -> Self {
        Check {
            name: name.into(),
            stage,
            lhs,
            rhs,
            pass: lhs <= rhs,
        }
    }

    pub fn lt(name: &str, stage: usize, lhs: f64, rhs: f64) -> Self {
        Check {
            pass: lhs < rhs,
            ..Check::le(name, stage, lhs, rhs)
        }
    }

    /// `rhs - lhs`.
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn new(checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        ValidationReport { checks, pass }
    }

    pub fn family(&self, name: &str) -> impl Iterator<Item = &Check> {
        let name = name.to_string();
        self.checks.iter().filter(move |c| c.name == name)
    }
}

impl GluingSchedule {
    pub fn new(space: SftSpace, blocks: Vec<Block>, params: ScheduleParams) -> Result<Self> {
        let gap = space.gap()?;
        Ok(GluingSchedule {
            space,
            gap,
            blocks,
            params,
        })
    }

    pub fn stages(&self) -> Vec<StageView> {
        let mut out: Vec<StageView> = Vec::new();
        for b in &self.blocks {
            match b {
                Block::Measure { measure, len, reps } => {
                    let k = out.len();
                    out.push(StageView {
                        measure: measure.clone(),
                        len: *len,
                        reps: *reps,
                        tour_len: 0,
                        zeta: self.params.zeta.get(k).copied().unwrap_or(1.0),
                        epsilon: self.params.epsilon.get(k).copied().unwrap_or(1.0),
                    });
                }
                Block::Tour { word, .. } => {
                    if let Some(s) = out.last_mut() {
                        s.tour_len += word.len();
                    }
                }
                _ => {}
            }
        }
        out
    }

    pub fn anchor(&self) -> Option<&Word> {
        self.blocks.iter().find_map(|b| match b {
            Block::Anchor { word } => Some(word),
            _ => None,
        })
    }

    pub fn family_len(&self) -> Option<usize> {
        self.blocks.iter().find_map(|b| match b {
            Block::Family { len } => Some(*len),
            _ => None,
        })
    }

    fn layout(&self) -> Layout {
        Layout::new(self)
    }

    /// `M_k` for `k = 0..=stages`: total length through stage `k`, `M_0`
    /// being the prefix before the first body.
    pub fn stage_ends(&self) -> Vec<usize> {
        let layout = self.layout();
        let mut ends = vec![layout.prefix_end()];
        for k in 0..layout.stages.len() {
            ends.push(layout.stage_end(k));
        }
        ends
    }

    /// Stage-end checkpoints `M_1, .., M_K`.
    pub fn checkpoints(&self) -> Vec<usize> {
        self.stage_ends()[1..].to_vec()
    }

    /// Fills the family slot with a fixed word.
    pub fn with_family_word(&self, w: &Word) -> Result<GluingSchedule> {
        let mut out = self.clone();
        let mut filled = false;
        for b in &mut out.blocks {
            if let Block::Family { len } = b {
                if w.len() != *len {
                    return Err(Error::WordsTooShort {
                        needed: *len,
                        got: w.len(),
                    });
                }
                *b = Block::Anchor { word: w.clone() };
                filled = true;
                break;
            }
        }
        if !filled {
            return Err(Error::InfeasibleParams("schedule has no family slot".into()));
        }
        out.params.delta = None;
        Ok(out)
    }
}

fn zeta(opts: &ScheduleOptions, k: usize) -> f64 {
    opts.zeta_first * opts.zeta_ratio.powi(k as i32 - 1)
}

fn epsilon(k: usize) -> f64 {
    0.5f64.powi(k as i32)
}

/// Largest weak* mass of the `depth - 1` windows that leave a body.
pub fn straddle_weight(m: usize, depth: usize) -> f64 {
    depth.saturating_sub(1) as f64 * (1..=depth).map(|l| max_cylinder_weight(m, l)).sum::<f64>()
}

/// Body length for stage `k` given its tour length.
pub fn block_len(opts: &ScheduleOptions, m: usize, k: usize, tour_len: usize) -> usize {
    let z = zeta(opts, k);
    let straddle = straddle_weight(m, opts.depth);
    [
        opts.min_block as f64,
        (tour_len as f64 / z).ceil(),
        (straddle / epsilon(k)).ceil(),
        (opts.c0 / (z * z)).ceil(),
    ]
    .into_iter()
    .fold(1.0, f64::max) as usize
}

/// `alpha_k`: the `k`-th element of `refine_path(K, 1), refine_path(K, 2), ..`
pub fn alpha_sequence(path: &MeasurePath, count: usize) -> Result<Vec<MarkovMeasure>> {
    let mut out = Vec::with_capacity(count);
    let mut stage = 1;
    while out.len() < count {
        out.extend(refine_path(path, stage)?);
        stage += 1;
    }
    out.truncate(count);
    Ok(out)
}

pub fn build_gk_schedule(
    space: &SftSpace,
    k: &MeasurePath,
    anchor: Option<&Word>,
    stages: usize,
) -> Result<GluingSchedule> {
    build_schedule(space, k, anchor, None, stages, &ScheduleOptions::default())
}

/// Schedule with a family slot of length `family_len` after the anchor.
pub fn build_family_schedule(
    space: &SftSpace,
    k: &MeasurePath,
    anchor: Option<&Word>,
    family_len: usize,
    delta: f64,
    stages: usize,
    opts: &ScheduleOptions,
) -> Result<GluingSchedule> {
    let mut s = build_schedule(space, k, anchor, Some(family_len), stages, opts)?;
    s.params.delta = Some(delta);
    Ok(s)
}

pub fn build_schedule(
    space: &SftSpace,
    k: &MeasurePath,
    anchor: Option<&Word>,
    family_len: Option<usize>,
    stages: usize,
    opts: &ScheduleOptions,
) -> Result<GluingSchedule> {
    if !space.is_primitive() {
        return Err(Error::NotPrimitive);
    }
    if stages == 0 {
        return Err(Error::InfeasibleParams("at least one stage is required".into()));
    }
    if !(opts.zeta_first > 0.0 && opts.zeta_first < 1.0 && opts.zeta_ratio > 0.0 && opts.zeta_ratio <= 1.0)
    {
        return Err(Error::InfeasibleParams("zeta must lie in (0, 1)".into()));
    }
    if opts.depth == 0 {
        return Err(Error::InfeasibleParams("tracking depth must be positive".into()));
    }
    let gap = space.gap()?;
    let c = gap - 1;
    let m = space.alphabet_size();
    let alphas = alpha_sequence(k, stages)?;
    for a in &alphas {
        a.check_support(space)?;
    }
    let mut blocks = Vec::new();
    let mut prefix = 0usize;
    if let Some(w) = anchor {
        if w.is_empty() || !space.is_admissible(&w.0) {
            return Err(Error::NotAdmissible {
                position: space.first_violation(&w.0).unwrap_or(0),
            });
        }
        prefix += w.len();
        blocks.push(Block::Anchor { word: w.clone() });
    }
    if let Some(len) = family_len {
        if len == 0 {
            return Err(Error::InfeasibleParams("empty family slot".into()));
        }
        prefix += if prefix > 0 { c } else { 0 } + len;
        blocks.push(Block::Family { len });
    }
    // stage j tours (j+1)-blocks, hence every j-block
    let tours: Vec<Word> = (1..=stages).map(|j| tour::tour(space, j + 1)).collect::<Result<_>>()?;
    let lens: Vec<usize> = (1..=stages).map(|j| block_len(opts, m, j, tours[j - 1].len())).collect();
    let mut total = prefix;
    for j in 1..=stages {
        let z = zeta(opts, j);
        let n = lens[j - 1];
        let t = tours[j - 1].len();
        let through = |reps: usize| -> usize {
            let lead = if total > 0 { c } else { 0 };
            total + lead + n + (reps - 1) * (c + n) + c + t
        };
        let ok = |reps: usize| -> bool {
            let mk = through(reps) as f64;
            let ad = total as f64 <= z * mk;
            let nk = j == stages || (lens[j] + tours[j].len()) as f64 <= z * mk;
            ad && nk
        };
        let need = (total as f64).max(if j < stages { (lens[j] + tours[j].len()) as f64 } else { 0.0 }) / z;
        let mut reps = ((need - through(1) as f64) / (c + n) as f64).ceil().max(0.0) as usize + 1;
        while !ok(reps) {
            reps += 1;
            if reps > 1 << 40 {
                return Err(Error::InfeasibleParams(format!("no N_{j} satisfies (nk) and (AD)")));
            }
        }
        while reps > 1 && ok(reps - 1) {
            reps -= 1;
        }
        total = through(reps);
        blocks.push(Block::Measure {
            measure: alphas[j - 1].clone(),
            len: n,
            reps,
        });
        blocks.push(Block::Tour {
            depth: j + 1,
            word: tours[j - 1].clone(),
        });
    }
    Ok(GluingSchedule {
        space: space.clone(),
        gap,
        blocks,
        params: ScheduleParams {
            zeta: (1..=stages).map(|j| zeta(opts, j)).collect(),
            epsilon: (1..=stages).map(epsilon).collect(),
            depth: opts.depth,
            delta: None,
        },
    })
}

/// Evaluates the schedule inequalities (n), (nk), (AD) and, for family
/// schedules, (gn).
pub fn validate_schedule(s: &GluingSchedule) -> ValidationReport {
    let stages = s.stages();
    let ends = s.stage_ends();
    let mut checks = Vec::new();
    for (i, st) in stages.iter().enumerate() {
        let k = i + 1;
        checks.push(Check::le("n", k, st.tour_len as f64 / st.len.max(1) as f64, st.zeta));
        if let Some(next) = stages.get(i + 1) {
            checks.push(Check::le(
                "nk",
                k,
                (next.len + next.tour_len) as f64,
                st.zeta * ends[k] as f64,
            ));
        }
        checks.push(Check::le("AD", k, ends[k - 1] as f64, st.zeta * ends[k] as f64));
        // windows straddling a body's right end
        checks.push(Check::le(
            "eps",
            k,
            straddle_weight(s.space.alphabet_size(), s.params.depth) / st.len.max(1) as f64,
            st.epsilon,
        ));
    }
    if let Some(delta) = s.params.delta {
        // blowup g vanishes on shifts: g(N)/N = 0
        checks.push(Check::lt("gn", 0, 0.0, delta / 3.0));
    }
    ValidationReport::new(checks)
}

#[derive(Clone, Debug)]
enum Piece {
    Fixed(Word),
    Slot(usize),
    Body(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SegmentKind {
    Fixed,
    Family,
    Body,
    Connector,
}

/// A segment of the stream with its position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SegmentInfo {
    pub kind: SegmentKind,
    pub start: usize,
    pub len: usize,
    /// Stage index (0-based) of the piece, or of the piece a connector leads into.
    pub stage: Option<usize>,
}

#[derive(Clone, Debug)]
struct Layout {
    space: SftSpace,
    c: usize,
    depth: usize,
    pieces: Vec<(Piece, Option<usize>)>,
    starts: Vec<usize>,
    stages: Vec<StageView>,
}

impl Layout {
    fn new(s: &GluingSchedule) -> Self {
        let stages = s.stages();
        let mut pieces = Vec::new();
        let mut k: Option<usize> = None;
        for b in &s.blocks {
            match b {
                Block::Anchor { word } => pieces.push((Piece::Fixed(word.clone()), k)),
                Block::Family { len } => pieces.push((Piece::Slot(*len), k)),
                Block::Measure { reps, .. } => {
                    let stage = k.map_or(0, |x| x + 1);
                    k = Some(stage);
                    for _ in 0..*reps {
                        pieces.push((Piece::Body(stage), k));
                    }
                }
                Block::Tour { word, .. } => pieces.push((Piece::Fixed(word.clone()), k)),
            }
        }
        let c = s.gap - 1;
        let mut starts = Vec::with_capacity(pieces.len() + 1);
        let mut pos = 0;
        for (i, (p, _)) in pieces.iter().enumerate() {
            if i > 0 {
                pos += c;
            }
            starts.push(pos);
            pos += piece_len(p, &stages);
        }
        starts.push(pos + if pieces.is_empty() { 0 } else { c });
        Layout {
            space: s.space.clone(),
            c,
            depth: s.params.depth.max(1),
            pieces,
            starts,
            stages,
        }
    }

    fn piece(&self, i: usize) -> Option<(Piece, Option<usize>)> {
        match self.pieces.get(i) {
            Some(p) => Some(p.clone()),
            None => {
                let last = self.stages.len().checked_sub(1)?;
                Some((Piece::Body(last), Some(last)))
            }
        }
    }

    fn len_of(&self, p: &Piece) -> usize {
        piece_len(p, &self.stages)
    }

    /// Start position of piece `i`.
    fn start(&self, i: usize) -> Option<usize> {
        let p = self.pieces.len();
        if i < p {
            return Some(self.starts[i]);
        }
        let last = self.stages.last()?;
        Some(self.starts[p] + (i - p) * (self.c + last.len))
    }

    fn prefix_end(&self) -> usize {
        let first_body = self
            .pieces
            .iter()
            .position(|(p, _)| matches!(p, Piece::Body(_)))
            .unwrap_or(self.pieces.len());
        match first_body.checked_sub(1) {
            Some(i) => self.starts[i] + self.len_of(&self.pieces[i].0),
            None => 0,
        }
    }

    fn stage_end(&self, k: usize) -> usize {
        let last = self
            .pieces
            .iter()
            .rposition(|(_, s)| *s == Some(k))
            .expect("stage has pieces");
        self.starts[last] + self.len_of(&self.pieces[last].0)
    }

    /// Pieces and connectors overlapping `[0, n)`.
    fn segments_until(&self, n: usize) -> Vec<SegmentInfo> {
        let mut out = Vec::new();
        let mut i = 0;
        while let (Some(start), Some((piece, stage))) = (self.start(i), self.piece(i)) {
            if i > 0 && self.c > 0 {
                let cs = start - self.c;
                if cs >= n {
                    break;
                }
                out.push(SegmentInfo {
                    kind: SegmentKind::Connector,
                    start: cs,
                    len: self.c,
                    stage,
                });
            }
            if start >= n {
                break;
            }
            let kind = match piece {
                Piece::Fixed(_) => SegmentKind::Fixed,
                Piece::Slot(_) => SegmentKind::Family,
                Piece::Body(_) => SegmentKind::Body,
            };
            out.push(SegmentInfo {
                kind,
                start,
                len: self.len_of(&piece),
                stage,
            });
            i += 1;
        }
        out
    }

    fn sample_body(&self, stage: usize, index: usize, seed: u64) -> Result<Vec<u8>> {
        let st = &self.stages[stage];
        let sampler = Sampler::new(&st.measure);
        let mut rng = rng::derived_rng(seed, &[index as u64]);
        let m = self.space.alphabet_size();
        let d = self.depth.min(st.len);
        for _ in 0..SAMPLER_ATTEMPTS {
            let w = sampler.sample(st.len, &mut rng);
            let inner = EmpiricalMeasure::from_word(&w.0, st.len + 1 - d, d, m)?;
            let scaled = Scaled {
                counts: &inner,
                norm: st.len as f64,
            };
            if weak_star_dist(&scaled, &st.measure, d)? <= st.zeta {
                return Ok(w.0);
            }
        }
        Err(Error::SamplerStalled {
            stage: stage + 1,
            attempts: SAMPLER_ATTEMPTS,
        })
    }
}

fn piece_len(p: &Piece, stages: &[StageView]) -> usize {
    match p {
        Piece::Fixed(w) => w.len(),
        Piece::Slot(len) => *len,
        Piece::Body(k) => stages[*k].len,
    }
}

/// Emits pieces `first, first+1, ..` of a layout with connectors between them.
struct PointSource {
    layout: Arc<Layout>,
    seed: u64,
    first: usize,
    cache: Mutex<HashMap<usize, Arc<Vec<u8>>>>,
}

impl PointSource {
    fn new(layout: Arc<Layout>, seed: u64, first: usize) -> Self {
        PointSource {
            layout,
            seed,
            first,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn content(&self, i: usize) -> Result<Arc<Vec<u8>>> {
        if let Some(v) = self.cache.lock().unwrap().get(&i) {
            return Ok(v.clone());
        }
        let (piece, _) = self
            .layout
            .piece(i)
            .ok_or_else(|| Error::InfeasibleParams("schedule has no stages to extend".into()))?;
        let v = Arc::new(match piece {
            Piece::Fixed(w) => w.0,
            Piece::Slot(_) => return Err(Error::UnfilledFamily),
            Piece::Body(k) => self.layout.sample_body(k, i, self.seed)?,
        });
        let mut cache = self.cache.lock().unwrap();
        // only the piece a connector peeks at is ever needed again
        cache.retain(|k, _| *k + 1 >= i);
        cache.insert(i, v.clone());
        Ok(v)
    }
}

impl SegmentSource for PointSource {
    fn segment(&self, index: usize, last: Option<u8>) -> Result<Vec<u8>> {
        let piece = self.first + index.div_ceil(2);
        if index.is_multiple_of(2) {
            return Ok(self.content(piece)?.to_vec());
        }
        let next = self.content(piece)?;
        match (last, next.first()) {
            (Some(a), Some(b)) => Ok(self.layout.space.connector(a, *b, self.layout.c + 1)?.0),
            _ => Ok(Vec::new()),
        }
    }
}

/// The glued point of a schedule without a family slot.
pub fn emit_point(s: &GluingSchedule, seed: u64) -> Result<SymbolStream> {
    let layout = s.layout();
    if layout.pieces.iter().any(|(p, _)| matches!(p, Piece::Slot(_))) {
        return Err(Error::UnfilledFamily);
    }
    Ok(SymbolStream::new(Arc::new(PointSource::new(Arc::new(layout), seed, 0))))
}

/// Lemma-ds right-hand side at time `n` against the stretched target.
pub fn tracking_bound(s: &GluingSchedule, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::WordsTooShort { needed: 1, got: 0 });
    }
    let layout = s.layout();
    let segs = layout.segments_until(n);
    let target = stretched_target(&layout, &segs, n)?;
    let depth = layout.depth;
    let mut gaps: HashMap<usize, f64> = HashMap::new();
    let mut bound = 0.0;
    for seg in &segs {
        let end = seg.start + seg.len;
        let overlap = end.min(n) - seg.start.min(n);
        if seg.kind == SegmentKind::Body && end <= n {
            let k = seg.stage.expect("bodies belong to stages");
            let st = &layout.stages[k];
            let d = match gaps.get(&k) {
                Some(d) => *d,
                None => {
                    let d = weak_star_dist(&st.measure, &layout.stages[target].measure, depth)?;
                    gaps.insert(k, d);
                    d
                }
            };
            bound += seg.len as f64 / n as f64 * (st.zeta + st.epsilon + d);
        } else {
            bound += overlap as f64 / n as f64;
        }
    }
    Ok(bound)
}

/// Stage whose `alpha` is the stretched target at time `n`.
fn stretched_target(layout: &Layout, segs: &[SegmentInfo], n: usize) -> Result<usize> {
    if layout.stages.is_empty() {
        return Err(Error::InfeasibleParams("schedule has no stages".into()));
    }
    Ok(segs
        .iter()
        .rev()
        .find(|s| s.start < n)
        .and_then(|s| s.stage)
        .unwrap_or(0))
}

/// The target measure `alpha'_n`.
pub fn stretched_alpha(s: &GluingSchedule, n: usize) -> Result<MarkovMeasure> {
    let layout = s.layout();
    let segs = layout.segments_until(n.max(1));
    Ok(layout.stages[stretched_target(&layout, &segs, n.max(1))?].measure.clone())
}

/// `d(P_n(x), alpha'_n)` at the schedule's tracking depth.
pub fn observed_tracking(s: &GluingSchedule, x: &Word, n: usize) -> Result<f64> {
    let alpha = stretched_alpha(s, n)?;
    let depth = s.params.depth.max(1);
    let e = EmpiricalMeasure::from_word(&x.0, n, depth, s.space.alphabet_size())?;
    weak_star_dist(&e, &alpha, depth)
}

/// Segments overlapping `[0, n)`.
pub fn segments(s: &GluingSchedule, n: usize) -> Vec<SegmentInfo> {
    s.layout().segments_until(n)
}

/// A family of glued points sharing everything after the family slot.
///
/// Member `i` is `heads[i]` followed by `tail`; every head has the same length.
#[derive(Clone, Debug)]
pub struct FamilyEmission {
    pub heads: Vec<Word>,
    pub tail: Word,
}

impl FamilyEmission {
    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn head_len(&self) -> usize {
        self.heads.first().map_or(0, |h| h.len())
    }

    pub fn horizon(&self) -> usize {
        self.head_len() + self.tail.len()
    }

    pub fn member(&self, i: usize) -> Word {
        Word::concat(&[&self.heads[i], &self.tail])
    }

    pub fn members(&self) -> Vec<Word> {
        (0..self.len()).map(|i| self.member(i)).collect()
    }

    /// `d(P_n(member_i), alpha)` for every member, sharing the tail counts.
    pub fn tracking(&self, m: usize, n: usize, depth: usize, alpha: &MarkovMeasure) -> Result<Vec<f64>> {
        let h = self.head_len();
        if n + depth - 1 > self.horizon() || n < h {
            return Err(Error::WordsTooShort {
                needed: n + depth - 1,
                got: self.horizon(),
            });
        }
        let tail = EmpiricalMeasure::from_word(&self.tail.0, n - h, depth, m)?;
        let joint = self.tail.0[..(depth - 1).min(self.tail.len())].to_vec();
        par::try_map(&self.heads, |head| {
            let mut x = head.0.clone();
            x.extend_from_slice(&joint);
            let mut e = EmpiricalMeasure::from_word(&x, h, depth, m)?;
            e.merge(&tail);
            weak_star_dist(&e, alpha, depth)
        })
    }
}

/// Glues each family word into the slot of `s`. Bodies are seeded by their
/// position, so all members share one tail.
pub fn emit_separated_family(
    s: &GluingSchedule,
    family: &[Word],
    horizon: usize,
    seed: u64,
) -> Result<FamilyEmission> {
    let layout = Arc::new(s.layout());
    let slot = layout
        .pieces
        .iter()
        .position(|(p, _)| matches!(p, Piece::Slot(_)))
        .ok_or_else(|| Error::InfeasibleParams("schedule has no family slot".into()))?;
    if layout.pieces[slot + 1..].iter().any(|(p, _)| matches!(p, Piece::Slot(_))) {
        return Err(Error::InfeasibleParams("more than one family slot".into()));
    }
    let len = layout.len_of(&layout.pieces[slot].0);
    let mut seen: HashMap<&[u8], usize> = HashMap::with_capacity(family.len());
    for (i, w) in family.iter().enumerate() {
        if w.len() != len {
            return Err(Error::WordsTooShort {
                needed: len,
                got: w.len(),
            });
        }
        if let Some(p) = s.space.first_violation(&w.0) {
            return Err(Error::NotAdmissible { position: p });
        }
        if let Some(j) = seen.insert(&w.0, i) {
            return Err(Error::FamilyNotSeparated(j, i));
        }
    }
    let head_len = layout.starts[slot] + len + layout.c;
    if horizon < head_len {
        return Err(Error::WordsTooShort {
            needed: head_len,
            got: horizon,
        });
    }
    let mut tail_stream = SymbolStream::new(Arc::new(PointSource::new(layout.clone(), seed, slot + 1)));
    let tail = tail_stream.materialize(horizon - head_len)?;
    let before = PointSource::new(layout.clone(), seed, 0);
    let next_first = before.content(slot + 1)?[0];
    let mut prefix: Vec<u8> = Vec::with_capacity(layout.starts[slot]);
    for idx in 0..(2 * slot).saturating_sub(1) {
        let seg = before.segment(idx, prefix.last().copied())?;
        prefix.extend(seg);
    }
    let gap = s.gap;
    let space = &s.space;
    let heads = par::try_map(family, |w| {
        let mut h = prefix.clone();
        if let Some(a) = h.last().copied() {
            h.extend(space.connector(a, w.0[0], gap)?.0);
        }
        h.extend_from_slice(&w.0);
        h.extend(space.connector(*w.0.last().unwrap(), next_first, gap)?.0);
        Ok::<Word, Error>(Word(h))
    })?;
    Ok(FamilyEmission { heads, tail })
}

#[cfg(test)]
mod tests;
