//! Built-in experiments. Each takes JSON parameters and a seed and returns
//! named checks, a JSON summary and CSV tables. Nothing here depends on wall
//! time, so reruns with the same seed give identical output.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis;
use crate::chaos::{self, ChaosOptions};
use crate::cocycle::{self, MatrixCocycle};
use crate::ergopt::{self, BlockGraph, Potential, SmrClass};
use crate::error::{Error, Result};
use crate::gluing::{self, chaotic, tree, ChaoticOptions, ScheduleOptions};
use crate::linalg;
use crate::measures::{self, ks_entropy, sample_word, MarkovMeasure, MeasurePath};
use crate::par;
use crate::rng;
use crate::shift::{self, SftSpace, Word};

/// `(kind, what it checks)`.
pub const CATALOG: &[(&str, &str)] = &[
    ("thm1_1_capacity", "upper capacity entropy of G_K reaches h_top: separated-family growth with exact tracking"),
    ("thm1_2_packing_tree", "packing entropy tree: exact Bowen-ball masses at every branching stage"),
    ("prop3_1_family", "typical (delta, n)-separated families of size exp(n(h - eta))"),
    ("lemma_ds_tracking", "tracking bound dominates the weak* error of glued points"),
    ("thm1_3_cocycle_family", "Lyapunov exponents: diagonal identity, constant matrices, separated families"),
    ("thm1_4_levels_and_smr", "level-set entropy and the structure of maximizing measures"),
    ("thm1_5_chaos", "scrambled xi-families: separation per stage, density statistics, Li-Yorke"),
    ("thm1_6_equilibrium", "variational identity for equilibrium states"),
    ("karp_oracle", "maximum mean cycle against the max-plus oracle"),
    ("pressure_identities", "pressure of constants, coboundaries and convex combinations"),
];

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub experiments: Vec<ExperimentSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: String,
    #[serde(default)]
    pub params: Value,
}

impl Config {
    /// Parses and checks kinds, names and parameters without running anything.
    pub fn parse(text: &str) -> Result<Config> {
        let cfg: Config = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {} column {}: {e}", e.line(), e.column())))?;
        let mut names = std::collections::HashSet::new();
        for e in &cfg.experiments {
            if !names.insert(e.name.as_str()) {
                return Err(Error::Config(format!("duplicate experiment name {:?}", e.name)));
            }
            if e.name.is_empty() || e.name.contains(['/', '\\']) || e.name.starts_with('.') {
                return Err(Error::Config(format!("experiment name {:?} is not a plain file name", e.name)));
            }
            check_params(&e.kind, &e.params).map_err(|err| Error::Config(format!("{}: {err}", e.name)))?;
        }
        Ok(cfg)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub name: String,
    pub kind: String,
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<CheckLine>,
    pub summary: Value,
    /// File name to CSV body.
    #[serde(skip)]
    pub csvs: BTreeMap<String, String>,
}

struct Out {
    checks: Vec<CheckLine>,
    summary: Value,
    csvs: BTreeMap<String, String>,
}

impl Out {
    fn new() -> Self {
        Out {
            checks: Vec::new(),
            summary: json!({}),
            csvs: BTreeMap::new(),
        }
    }

    fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(CheckLine {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
    }

    fn put(&mut self, key: &str, v: impl Serialize) {
        self.summary[key] = serde_json::to_value(v).unwrap_or(Value::Null);
    }

    fn csv(&mut self, file: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Config(e.to_string());
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        self.csvs.insert(file.into(), String::from_utf8(bytes).expect("csv is utf-8"));
        Ok(())
    }
}

fn f(x: f64) -> String {
    format!("{x:.12}")
}

fn params<P: DeserializeOwned + Default>(v: &Value) -> Result<P> {
    if v.is_null() {
        return Ok(P::default());
    }
    serde_json::from_value(v.clone()).map_err(|e| Error::Config(e.to_string()))
}

fn check_params(kind: &str, v: &Value) -> Result<()> {
    match kind {
        "thm1_1_capacity" => params::<CapacityParams>(v).map(drop),
        "thm1_2_packing_tree" => params::<TreeParams>(v).map(drop),
        "prop3_1_family" => params::<FamilyParams>(v).map(drop),
        "lemma_ds_tracking" => params::<TrackingParams>(v).map(drop),
        "thm1_3_cocycle_family" => params::<CocycleParams>(v).map(drop),
        "thm1_4_levels_and_smr" => params::<LevelParams>(v).map(drop),
        "thm1_5_chaos" => params::<ChaosParams>(v).map(drop),
        "thm1_6_equilibrium" => params::<EquilibriumParams>(v).map(drop),
        "karp_oracle" => params::<KarpParams>(v).map(drop),
        "pressure_identities" => params::<PressureParams>(v).map(drop),
        other => Err(Error::Config(format!("unknown experiment kind {other:?}"))),
    }
}

/// Seed for one experiment: the run seed mixed with the experiment name.
pub fn experiment_seed(run_seed: u64, name: &str) -> u64 {
    let tags: Vec<u64> = name.bytes().map(u64::from).collect();
    rng::derive_seed(run_seed, &tags)
}

pub fn run_experiment(spec: &ExperimentSpec, run_seed: u64) -> Result<Outcome> {
    let seed = experiment_seed(run_seed, &spec.name);
    let p = &spec.params;
    let out = match spec.kind.as_str() {
        "thm1_1_capacity" => capacity(&params(p)?, seed),
        "thm1_2_packing_tree" => packing_tree(&params(p)?, seed),
        "prop3_1_family" => separated_family(&params(p)?, seed),
        "lemma_ds_tracking" => ds_tracking(&params(p)?, seed),
        "thm1_3_cocycle_family" => cocycle_family(&params(p)?, seed),
        "thm1_4_levels_and_smr" => levels_and_smr(&params(p)?),
        "thm1_5_chaos" => chaos_family(&params(p)?, seed),
        "thm1_6_equilibrium" => equilibrium(&params(p)?, seed),
        "karp_oracle" => karp(&params(p)?, seed),
        "pressure_identities" => pressure_identities(&params(p)?, seed),
        other => Err(Error::Config(format!("unknown experiment kind {other:?}"))),
    }?;
    Ok(Outcome {
        name: spec.name.clone(),
        kind: spec.kind.clone(),
        seed,
        pass: out.checks.iter().all(|c| c.pass),
        checks: out.checks,
        summary: out.summary,
        csvs: out.csvs,
    })
}

/// Random primitive SFT on `m` symbols.
pub fn random_space<R: Rng>(rng: &mut R, m: usize) -> SftSpace {
    loop {
        let rows: Vec<Vec<bool>> = (0..m).map(|_| (0..m).map(|_| rng.gen_bool(0.6)).collect()).collect();
        if let Ok(s) = SftSpace::new(rows) {
            if s.is_primitive() {
                return s;
            }
        }
    }
}

fn encode(w: &[u8], m: usize) -> usize {
    w.iter().fold(0, |acc, s| acc * m + *s as usize)
}

/// Depth-`r` potential with independent integer values in `[lo, hi]`.
pub fn random_integer_potential<R: Rng>(rng: &mut R, space: &SftSpace, r: usize, lo: i32, hi: i32) -> Result<Potential> {
    let m = space.alphabet_size();
    let table: Vec<f64> = (0..m.pow(r as u32)).map(|_| rng.gen_range(lo..=hi) as f64).collect();
    Potential::from_fn(space, r, |w| table[encode(w, m)])
}

/// Depth-`r` potential with independent uniform values in `[lo, hi)`.
pub fn random_real_potential<R: Rng>(rng: &mut R, space: &SftSpace, r: usize, lo: f64, hi: f64) -> Result<Potential> {
    let m = space.alphabet_size();
    let table: Vec<f64> = (0..m.pow(r as u32)).map(|_| rng.gen_range(lo..hi)).collect();
    Potential::from_fn(space, r, |w| table[encode(w, m)])
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacityParams {
    pub n_values: Vec<usize>,
    pub anchor: String,
    /// `K = {Bernoulli(p)}`.
    pub p: f64,
    pub eta: f64,
    pub delta: f64,
    pub stages: usize,
    /// Pass if the slope is at least `log 2 - slope_margin`.
    pub slope_margin: f64,
}

impl Default for CapacityParams {
    fn default() -> Self {
        CapacityParams {
            n_values: vec![12, 16, 20],
            anchor: "01".into(),
            p: 0.9,
            eta: 0.1,
            delta: 0.05,
            stages: 3,
            slope_margin: 0.15,
        }
    }
}

struct CapacityRow {
    n: usize,
    window: usize,
    count: usize,
    target: usize,
    tracking: Vec<(usize, f64, f64)>,
    schedule_pass: bool,
}

fn capacity(p: &CapacityParams, seed: u64) -> Result<Out> {
    let full = SftSpace::full(2);
    let k = MeasurePath::single(MarkovMeasure::bernoulli2(p.p)?);
    let top = MarkovMeasure::parry(&full)?;
    let anchor = Word::from(p.anchor.as_str());
    let rows: Vec<CapacityRow> = par::try_map(&p.n_values, |&n| -> Result<CapacityRow> {
        let family = measures::typical_separated_family(&top, n, p.delta, p.eta, rng::derive_seed(seed, &[n as u64]))?;
        let s = gluing::build_family_schedule(&full, &k, Some(&anchor), n, p.delta, p.stages, &ScheduleOptions::default())?;
        let report = gluing::validate_schedule(&s);
        let depth = s.params.depth;
        let cps = s.checkpoints();
        let horizon = cps.last().copied().unwrap_or(0) + depth;
        let fam = gluing::emit_separated_family(&s, &family, horizon, rng::derive_seed(seed, &[n as u64, 1]))?;
        let window = fam.head_len();
        let count = shift::separated_count(&fam.heads, window, 1)?;
        let mut tracking = Vec::new();
        for &c in &cps {
            let alpha = gluing::stretched_alpha(&s, c)?;
            let worst = fam.tracking(2, c, depth, &alpha)?.into_iter().fold(0.0, f64::max);
            tracking.push((c, worst, gluing::tracking_bound(&s, c)?));
        }
        Ok(CapacityRow {
            n,
            window,
            count,
            target: measures::family_target(ks_entropy(&top), n, p.eta),
            tracking,
            schedule_pass: report.pass,
        })
    })?;
    let mut out = Out::new();
    let counts: Vec<(usize, usize)> = rows.iter().map(|r| (r.window, r.count)).collect();
    let g = analysis::growth_rate(&counts)?;
    let log2 = 2f64.ln();
    out.put("slope", g.slope);
    out.put("slope_gap", (g.slope - log2).abs());
    out.put("band", g.band);
    out.put("k_entropy", ks_entropy(&MarkovMeasure::bernoulli2(p.p)?));
    out.put("counts", &counts);
    out.check(
        "slope",
        g.slope >= log2 - p.slope_margin,
        format!("slope {:.6} vs log 2 - {} = {:.6}", g.slope, p.slope_margin, log2 - p.slope_margin),
    );
    let tracked = rows.iter().all(|r| r.tracking.iter().all(|(_, d, b)| d <= b));
    out.check("tracking", tracked, "every member within tracking_bound at every stage end");
    out.check(
        "families",
        rows.iter().all(|r| r.count >= r.target),
        "separated count reaches exp(n(h - eta)) for each n",
    );
    out.check("schedules", rows.iter().all(|r| r.schedule_pass), "validate_schedule");
    let mut buf = Vec::new();
    analysis::write_counts_csv(&mut buf, &counts)?;
    out.csvs.insert("counts.csv".into(), String::from_utf8(buf).expect("utf-8"));
    let trows = rows
        .iter()
        .flat_map(|r| {
            r.tracking
                .iter()
                .map(move |(c, d, b)| vec![r.n.to_string(), c.to_string(), f(*d), f(*b)])
        })
        .collect();
    out.csv("tracking.csv", &["family_n", "checkpoint", "max_observed", "bound"], trows)?;
    Ok(out)
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub p_lo: f64,
    pub p_hi: f64,
    pub eta: f64,
    pub depth: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            p_lo: 0.3,
            p_hi: 0.7,
            eta: 0.1,
            depth: 3,
        }
    }
}

fn packing_tree(p: &TreeParams, seed: u64) -> Result<Out> {
    let full = SftSpace::full(2);
    let k = MeasurePath::new(vec![MarkovMeasure::bernoulli2(p.p_lo)?, MarkovMeasure::bernoulli2(p.p_hi)?])?;
    let t = tree::build_branch_tree(&full, &k, p.eta, p.depth, seed)?;
    let mut out = Out::new();
    let report = t.validate();
    out.check("schedule", report.pass, "(ac) at every stage");
    let masses = t.mass_checks(p.depth)?;
    out.check(
        "bowen_mass",
        masses.iter().all(|m| m.pass),
        format!("{} stages, exact rational comparison", masses.len()),
    );
    let total = t.leaf_weight(p.depth) * num_rational::BigRational::from_integer(t.leaf_count(p.depth).into());
    out.check("weights", num_traits::One::is_one(&total), format!("sum of leaf weights = {total}"));
    out.put("h_star", t.h_star);
    out.put("stage_ends", t.stage_ends());
    out.put("leaf_count", t.leaf_count(p.depth).to_string());
    let rows = masses
        .iter()
        .map(|m| {
            vec![
                m.stage.to_string(),
                m.prefix_len.to_string(),
                m.max_mass.to_string(),
                m.bound.to_string(),
                f(m.exp_bound),
                m.pass.to_string(),
            ]
        })
        .collect();
    out.csv("masses.csv", &["stage", "prefix_len", "max_mass", "bound", "exp_bound", "pass"], rows)?;
    Ok(out)
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyParams {
    pub p: f64,
    pub n_values: Vec<usize>,
    pub delta: f64,
    pub eta: f64,
}

impl Default for FamilyParams {
    fn default() -> Self {
        FamilyParams {
            p: 0.5,
            n_values: vec![10, 12, 14, 16],
            delta: 0.1,
            eta: 0.2,
        }
    }
}

fn separated_family(p: &FamilyParams, seed: u64) -> Result<Out> {
    let mu = MarkovMeasure::bernoulli2(p.p)?;
    let h = ks_entropy(&mu);
    let mut out = Out::new();
    let mut rows = Vec::new();
    let mut ok = true;
    for &n in &p.n_values {
        let fam = measures::typical_separated_family(&mu, n, p.delta, p.eta, rng::derive_seed(seed, &[n as u64]))?;
        let target = measures::family_target(h, n, p.eta);
        let c = shift::separation_threshold(n, p.delta);
        let min_ham = par::map_range(fam.len(), |i| {
            (i + 1..fam.len())
                .map(|j| shift::hamming(&fam[i].0, &fam[j].0, n))
                .min()
                .unwrap_or(n)
        })
        .into_iter()
        .min()
        .unwrap_or(n);
        ok &= fam.len() >= target && min_ham >= c;
        rows.push(vec![
            n.to_string(),
            target.to_string(),
            fam.len().to_string(),
            f((fam.len() as f64).ln() / n as f64),
            min_ham.to_string(),
            c.to_string(),
        ]);
    }
    out.check("families", ok, "size >= target and pairwise Hamming >= ceil(delta n)");
    out.put("entropy", h);
    out.csv("families.csv", &["n", "target", "size", "log_size_over_n", "min_hamming", "threshold"], rows)?;
    Ok(out)
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingParams {
    pub p_lo: f64,
    pub p_hi: f64,
    pub stages: usize,
    pub points: usize,
}

impl Default for TrackingParams {
    fn default() -> Self {
        TrackingParams {
            p_lo: 0.2,
            p_hi: 0.8,
            stages: 3,
            points: 4,
        }
    }
}

fn ds_tracking(p: &TrackingParams, seed: u64) -> Result<Out> {
    let full = SftSpace::full(2);
    let k = MeasurePath::new(vec![MarkovMeasure::bernoulli2(p.p_lo)?, MarkovMeasure::bernoulli2(p.p_hi)?])?;
    let s = gluing::build_gk_schedule(&full, &k, None, p.stages)?;
    let report = gluing::validate_schedule(&s);
    let mut out = Out::new();
    out.check("schedule", report.pass, format!("{} checks", report.checks.len()));
    let cps = s.checkpoints();
    let horizon = cps.last().copied().unwrap_or(0) + s.params.depth;
    let rows = par::try_map_range(p.points, |i| -> Result<Vec<Vec<String>>> {
        let x = gluing::emit_point(&s, rng::derive_seed(seed, &[i as u64]))?.materialize(horizon)?;
        cps.iter()
            .map(|&n| {
                let d = gluing::observed_tracking(&s, &x, n)?;
                let b = gluing::tracking_bound(&s, n)?;
                Ok(vec![i.to_string(), n.to_string(), f(d), f(b)])
            })
            .collect()
    })?;
    let rows: Vec<Vec<String>> = rows.into_iter().flatten().collect();
    let ok = rows.iter().all(|r| r[2].parse::<f64>().unwrap() <= r[3].parse::<f64>().unwrap());
    out.check("tracking", ok, "observed weak* error <= tracking_bound at every stage end");
    out.put("stage_ends", s.stage_ends());
    out.csv("tracking.csv", &["point", "checkpoint", "observed", "bound"], rows)?;
    Ok(out)
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CocycleParams {
    pub diagonal_len: usize,
    pub constant_len: usize,
    pub family_n: usize,
    pub eta: f64,
    pub tail_len: usize,
}

impl Default for CocycleParams {
    fn default() -> Self {
        CocycleParams {
            diagonal_len: 100_000,
            constant_len: 10_000,
            family_n: 8,
            eta: 0.1,
            tail_len: 4000,
        }
    }
}

/// Two invertible 2x2 generators with entries in `[-2, 2]`.
pub fn random_cocycle(seed: u64) -> Result<MatrixCocycle> {
    let mut r = rng::rng(seed);
    let mut gens = Vec::new();
    while gens.len() < 2 {
        let m = DMatrix::<f64>::from_fn(2, 2, |_, _| r.gen_range(-2.0..2.0));
        if m.determinant().abs() > 0.25 {
            gens.push(m);
        }
    }
    MatrixCocycle::per_symbol(gens)
}

fn cocycle_family(p: &CocycleParams, seed: u64) -> Result<Out> {
    let full = SftSpace::full(2);
    let mut out = Out::new();

    let (a, b, q) = (3.0f64, 1.5f64, 0.3f64);
    let diag = |s: f64| DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![s, 1.0 / s]));
    let c = MatrixCocycle::per_symbol(vec![diag(b), diag(a)])?;
    let x = sample_word(&MarkovMeasure::bernoulli2(q)?, p.diagonal_len, rng::derive_seed(seed, &[1]));
    let chi = cocycle::exponent_along(&c, &x, p.diagonal_len)?;
    let pot = Potential::from_fn(&full, 1, |w| if w[0] == 1 { a.ln() } else { b.ln() })?;
    let avg = analysis::birkhoff_avg(&x, &pot, p.diagonal_len)?;
    out.check("diagonal", (chi - avg).abs() <= 1e-10, format!("|chi - birkhoff| = {:.3e}", (chi - avg).abs()));

    let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 0.5]);
    let cc = MatrixCocycle::constant(&full, m.clone())?;
    let zeros = Word(vec![0; p.constant_len]);
    let chi = cocycle::exponent_along(&cc, &zeros, p.constant_len)?;
    let rho = linalg::spectral_radius(&m);
    let slack = (2.0 * linalg::condition_number(&m)).ln() / p.constant_len as f64;
    out.check(
        "constant",
        (chi - rho.ln()).abs() <= slack,
        format!("|chi - log rho| = {:.3e} <= {:.3e}", (chi - rho.ln()).abs(), slack),
    );

    let rc = random_cocycle(rng::derive_seed(seed, &[2]))?;
    let mu = MarkovMeasure::bernoulli2(0.5)?;
    let fam = cocycle::emit_lyapunov_family(
        &rc,
        &full,
        &mu,
        &Word::from("01"),
        p.family_n,
        p.eta,
        p.tail_len,
        rng::derive_seed(seed, &[3]),
    )?;
    let r = &fam.report;
    out.check(
        "family",
        r.members.iter().all(|m| m.deviation <= r.deviation_bound) && r.family_size >= r.target,
        format!("{} members, max deviation {:.3e} <= {:.3e}", r.family_size, r.max_deviation, r.deviation_bound),
    );
    out.put("members", r.family_size);
    out.put("reference_exponent", r.reference_exponent);
    out.put("deviation_bound", r.deviation_bound);
    let rows = r
        .members
        .iter()
        .enumerate()
        .map(|(i, m)| vec![i.to_string(), f(m.full), f(m.tail), f(m.tail_exponent), f(m.deviation)])
        .collect();
    out.csv("members.csv", &["member", "full", "tail", "tail_exponent", "deviation"], rows)?;
    Ok(out)
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LevelParams {
    pub grid: Vec<f64>,
}

impl Default for LevelParams {
    fn default() -> Self {
        LevelParams {
            grid: (1..=9).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

fn levels_and_smr(p: &LevelParams) -> Result<Out> {
    let full = SftSpace::full(2);
    let ind = Potential::symbol_indicator(&full, 1)?;
    let mut out = Out::new();
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for &a in &p.grid {
        let t = ergopt::level_entropy(&full, &ind, a)?.t;
        let exact = -a * a.ln() - (1.0 - a) * (1.0 - a).ln();
        worst = worst.max((t - exact).abs());
        rows.push(vec![f(a), f(t), f(exact), f((t - exact).abs())]);
    }
    out.check("closed_form", worst <= 1e-6, format!("max error {worst:.3e}"));
    let mmax = MarkovMeasure::parry(&full)?;
    let at_max = ergopt::level_entropy(&full, &ind, ind.integrate(&mmax))?.t;
    let log2 = 2f64.ln();
    out.check("top", (at_max - log2).abs() <= 1e-8, format!("t = {at_max:.12}"));
    let t09 = ergopt::level_entropy(&full, &ind, 0.9)?.t;
    out.check("strict", t09 < log2 - 0.1, format!("t_0.9 = {t09:.6}"));
    let alt = Potential::from_fn(&full, 2, |w| if w[0] != w[1] { 1.0 } else { 0.0 })?;
    let smr = ergopt::classify_smr(&full, &alt)?;
    out.check(
        "smr",
        matches!(&smr, SmrClass::Periodic { cycle, .. } if primitive_eq(cycle, "01")),
        format!("{smr:?}"),
    );
    out.put("smr", &smr);
    out.csv("levels.csv", &["a", "t", "closed_form", "abs_err"], rows)?;
    Ok(out)
}

fn primitive_eq(cycle: &Word, s: &str) -> bool {
    let w = Word::from(s);
    cycle.len() == w.len() && (0..w.len()).any(|r| (0..w.len()).all(|i| cycle.0[(i + r) % w.len()] == w.0[i]))
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChaosParams {
    pub horizon: usize,
    /// Members are all `xi` in `{1,2}^prefix_len`.
    pub prefix_len: usize,
    pub phi_t: f64,
    pub phi_min: f64,
}

impl Default for ChaosParams {
    fn default() -> Self {
        ChaosParams {
            horizon: 100_000,
            prefix_len: 3,
            phi_t: 0.125,
            phi_min: 0.9,
        }
    }
}

/// All sequences in `{1,2}^len`, in lexicographic order.
pub fn xi_prefixes(len: usize) -> Vec<Vec<u8>> {
    (0..1usize << len)
        .map(|b| (0..len).map(|i| 1 + ((b >> (len - 1 - i)) & 1) as u8).collect())
        .collect()
}

fn chaos_family(p: &ChaosParams, seed: u64) -> Result<Out> {
    let full = SftSpace::full(2);
    let mu0 = MarkovMeasure::periodic(&full, &Word::from("0"))?;
    let (l1, l2) = (Word::from("0"), Word::from("1"));
    let xis = xi_prefixes(p.prefix_len);
    let fam = gluing::emit_chaotic_family(&full, &mu0, &l1, &l2, &xis, p.horizon, seed)?;
    let mut out = Out::new();
    out.check("schedule", fam.report.pass, "(de), (dl), (dm) at every stage");
    let last = fam.final_checkpoint().ok_or(Error::Degenerate("no checkpoint inside the horizon".into()))?;
    let words: Vec<Word> = xis.iter().map(|x| fam.words[x].clone()).collect();
    let opts = ChaosOptions::default();
    let reports = chaos::pair_reports(&words, &fam.checkpoints, &opts);
    let mut rows = Vec::new();
    let (mut stage_ok, mut phi_ok, mut ly_ok) = (true, true, true);
    for r in &reports {
        let (x, y) = (&words[r.i], &words[r.j]);
        let u = chaotic::first_difference(&xis[r.i], &xis[r.j]).unwrap_or(usize::MAX);
        let maxes = chaotic::stage_max_distances(&fam, x, y);
        let past: Vec<f64> = maxes.iter().enumerate().filter(|(k, _)| k + 1 >= u).map(|(_, d)| *d).collect();
        let min_max = past.iter().copied().fold(f64::INFINITY, f64::min);
        let phi = chaos::phi_n(x, y, p.phi_t, last)?;
        stage_ok &= !past.is_empty() && min_max >= fam.epsilon_star / 2.0;
        phi_ok &= phi >= p.phi_min;
        ly_ok &= r.li_yorke.consistent;
        rows.push(vec![
            r.i.to_string(),
            r.j.to_string(),
            Word(xis[r.i].iter().map(|s| s - 1).collect()).to_string(),
            Word(xis[r.j].iter().map(|s| s - 1).collect()).to_string(),
            u.to_string(),
            past.len().to_string(),
            f(min_max),
            f(phi),
            r.li_yorke.verdict.clone(),
        ]);
    }
    out.check(
        "stage_separation",
        stage_ok,
        format!("{} pairs, max distance >= {} in every stage from the first disagreement", reports.len(), fam.epsilon_star / 2.0),
    );
    out.check("density", phi_ok, format!("phi(t = {}) >= {} at n = {last}", p.phi_t, p.phi_min));
    out.check("li_yorke", ly_ok, "every pair consistent-with Li-Yorke");

    let ind = Potential::from_fn(&full, 2, |w| if w[0] != w[1] { 1.0 } else { 0.0 })?;
    let (sx, sy) = chaos::smr_preimage_pair(&full, &ind, p.horizon)?;
    let smr = chaos::li_yorke_report(&sx, &sy, &fam.checkpoints, &opts);
    out.check("smr_pair", !smr.alternates && !smr.consistent, smr.verdict.clone());

    let mu_p = MarkovMeasure::periodic(&full, &Word::from("01"))?;
    let pair = vec![vec![1u8], vec![2u8]];
    let phased = gluing::emit_chaotic_family_with(&full, &mu_p, &l1, &l2, &pair, p.horizon, seed, &ChaoticOptions::phased())?;
    let dc1 = chaos::dc1_report(&phased.words[&pair[0]], &phased.words[&pair[1]], &phased.checkpoints, &opts);
    out.check("dc1_periodic", dc1.consistent, dc1.verdict.clone());

    out.put("epsilon_star", fam.epsilon_star);
    out.put("complete_stages", fam.complete_stages());
    out.put("final_checkpoint", last);
    out.put("pairs", reports.len());
    out.csv(
        "pairs.csv",
        &["i", "j", "xi_i", "xi_j", "first_difference", "stages_checked", "min_stage_max", "phi_final", "li_yorke"],
        rows,
    )?;
    let mut buf = Vec::new();
    chaos::write_phi_csv(&mut buf, &dc1)?;
    out.csvs.insert("phi_periodic.csv".into(), String::from_utf8(buf).expect("utf-8"));
    Ok(out)
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriumParams {
    pub instances: usize,
    pub max_m: usize,
    pub max_r: usize,
    pub tolerance: f64,
}

impl Default for EquilibriumParams {
    fn default() -> Self {
        EquilibriumParams {
            instances: 50,
            max_m: 4,
            max_r: 2,
            tolerance: 1e-9,
        }
    }
}

fn equilibrium(p: &EquilibriumParams, seed: u64) -> Result<Out> {
    if p.max_m < 2 || p.max_r < 1 {
        return Err(Error::Config("need max_m >= 2 and max_r >= 1".into()));
    }
    let rows = par::try_map_range(p.instances, |i| -> Result<Vec<String>> {
        let mut r = rng::derived_rng(seed, &[i as u64]);
        let m = r.gen_range(2..=p.max_m);
        let space = random_space(&mut r, m);
        let depth = r.gen_range(1..=p.max_r);
        let pot = random_real_potential(&mut r, &space, depth, -2.0, 2.0)?;
        let mu = ergopt::equilibrium_state(&space, &pot)?;
        let h = ks_entropy(&mu);
        let integral = pot.integrate(&mu);
        let pr = ergopt::pressure(&space, &pot)?;
        Ok(vec![i.to_string(), m.to_string(), depth.to_string(), f(h), f(integral), f(pr), format!("{:.3e}", (h + integral - pr).abs())])
    })?;
    let worst = rows.iter().map(|r| r[6].parse::<f64>().unwrap()).fold(0.0, f64::max);
    let mut out = Out::new();
    out.check("variational", worst <= p.tolerance, format!("{} instances, max error {worst:.3e}", rows.len()));
    out.put("max_error", worst);
    out.csv("instances.csv", &["instance", "m", "r", "entropy", "integral", "pressure", "abs_err"], rows)?;
    Ok(out)
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KarpParams {
    pub instances: usize,
    pub max_m: usize,
    pub max_r: usize,
}

impl Default for KarpParams {
    fn default() -> Self {
        KarpParams {
            instances: 100,
            max_m: 6,
            max_r: 3,
        }
    }
}

fn karp(p: &KarpParams, seed: u64) -> Result<Out> {
    if p.max_m < 2 || p.max_r < 1 {
        return Err(Error::Config("need max_m >= 2 and max_r >= 1".into()));
    }
    let rows = par::try_map_range(p.instances, |i| -> Result<(bool, Vec<String>)> {
        let mut r = rng::derived_rng(seed, &[i as u64]);
        let m = r.gen_range(2..=p.max_m);
        let space = random_space(&mut r, m);
        let depth = r.gen_range(1..=p.max_r);
        let pot = random_integer_potential(&mut r, &space, depth, -9, 9)?;
        let nodes = BlockGraph::new(&space, &pot)?.len();
        let b = ergopt::beta(&space, &pot)?;
        let oracle = ergopt::brute_force_beta(&space, &pot, nodes)?;
        let eq = b.value == oracle;
        Ok((
            eq,
            vec![i.to_string(), m.to_string(), depth.to_string(), f(b.value), f(oracle), b.cycle.to_string(), eq.to_string()],
        ))
    })?;
    let equal = rows.iter().filter(|(e, _)| *e).count();
    let mut out = Out::new();
    out.check("equal", equal == rows.len(), format!("{equal}/{} equal", rows.len()));
    out.put("equal", equal);
    out.put("instances", rows.len());
    out.csv(
        "instances.csv",
        &["instance", "m", "r", "beta", "oracle", "cycle", "equal"],
        rows.into_iter().map(|(_, r)| r).collect(),
    )?;
    Ok(out)
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PressureParams {
    pub instances: usize,
    pub tolerance: f64,
}

impl Default for PressureParams {
    fn default() -> Self {
        PressureParams {
            instances: 20,
            tolerance: 1e-9,
        }
    }
}

fn pressure_identities(p: &PressureParams, seed: u64) -> Result<Out> {
    let rows = par::try_map_range(p.instances, |i| -> Result<Vec<f64>> {
        let mut r = rng::derived_rng(seed, &[i as u64]);
        let m = r.gen_range(2..=4);
        let space = random_space(&mut r, m);
        let f1 = random_real_potential(&mut r, &space, 2, -2.0, 2.0)?;
        let f2 = random_real_potential(&mut r, &space, 2, -2.0, 2.0)?;
        let g: Vec<f64> = (0..m).map(|_| r.gen_range(-1.0..1.0)).collect();
        let c = r.gen_range(-3.0..3.0);
        let pr = |q: &Potential| ergopt::pressure(&space, q);
        let zero = Potential::from_fn(&space, 1, |_| 0.0)?;
        let htop = space.topological_entropy()?;
        let e_zero = (pr(&zero)? - htop).abs();
        let e_const = (pr(&f1.shifted(c))? - pr(&f1)? - c).abs();
        let cob = ergopt::add_coboundary(&space, &f1, |w| g[w[0] as usize])?;
        let e_cob = (pr(&cob)? - pr(&f1)?).abs();
        let mid = Potential::from_fn(&space, 2, |w| 0.5 * (f1.value(w).unwrap_or(0.0) + f2.value(w).unwrap_or(0.0)))?;
        let convex = pr(&mid)? - 0.5 * (pr(&f1)? + pr(&f2)?);
        let beta = ergopt::beta(&space, &f1)?.value;
        let sandwich = (beta - pr(&f1)?).max(pr(&f1)? - htop - beta);
        Ok(vec![i as f64, e_zero, e_const, e_cob, convex, sandwich])
    })?;
    let tol = p.tolerance;
    let mut out = Out::new();
    let all = |k: usize| rows.iter().all(|r| r[k] <= tol);
    out.check("zero", all(1), "P(0) = h_top");
    out.check("constant", all(2), "P(f + c) = P(f) + c");
    out.check("coboundary", all(3), "P(f + g o T - g) = P(f)");
    out.check("convex", all(4), "P((f1 + f2)/2) <= (P(f1) + P(f2))/2");
    out.check("sandwich", all(5), "beta(f) <= P(f) <= h_top + beta(f)");
    let rows = rows
        .into_iter()
        .map(|r| {
            let mut v = vec![(r[0] as usize).to_string()];
            v.extend(r[1..].iter().map(|x| format!("{x:.3e}")));
            v
        })
        .collect();
    out.csv("instances.csv", &["instance", "zero_err", "const_err", "coboundary_err", "convexity_gap", "sandwich_gap"], rows)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_names() {
        let names: Vec<&str> = CATALOG.iter().map(|(n, _)| *n).collect();
        for n in ["thm1_1_capacity", "thm1_2_packing_tree", "thm1_5_chaos"] {
            assert!(names.contains(&n));
        }
        assert_eq!(names.len(), 10);
        for n in names {
            check_params(n, &Value::Null).unwrap();
        }
    }

    #[test]
    fn config_errors() {
        let err = Config::parse("{\n  \"seed\": 1,\n  \"experiments\": [\n    {\"name\": \"a\", \"kind\": \"nope\"}\n  ]\n}").unwrap_err();
        assert!(err.to_string().contains("unknown experiment kind"), "{err}");
        let err = Config::parse("{\n  \"seed\": 1,\n  \"experiments\": [ }").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = Config::parse(r#"{"experiments":[{"name":"a","kind":"karp_oracle","params":{"bogus":1}}]}"#).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let err = Config::parse(r#"{"experiments":[{"name":"../x","kind":"karp_oracle"}]}"#).unwrap_err();
        assert!(err.to_string().contains("plain file name"));
        assert!(Config::parse(r#"{"seed": 3}"#).unwrap().experiments.is_empty());
    }

    #[test]
    fn xi_prefix_order() {
        assert_eq!(xi_prefixes(2), vec![vec![1, 1], vec![1, 2], vec![2, 1], vec![2, 2]]);
    }

    #[test]
    fn small_experiments_pass() {
        for (kind, params) in [
            ("karp_oracle", json!({"instances": 10})),
            ("thm1_6_equilibrium", json!({"instances": 5})),
            ("pressure_identities", json!({"instances": 5})),
            ("thm1_4_levels_and_smr", json!({"grid": [0.25, 0.5]})),
            ("prop3_1_family", json!({"n_values": [10, 12]})),
            ("lemma_ds_tracking", json!({"stages": 2, "points": 2})),
        ] {
            let spec = ExperimentSpec {
                name: kind.into(),
                kind: kind.into(),
                params,
            };
            let o = run_experiment(&spec, 5).unwrap();
            assert!(o.pass, "{kind}: {:?}", o.checks);
            assert!(!o.csvs.is_empty());
            let again = run_experiment(&spec, 5).unwrap();
            assert_eq!(o.csvs, again.csvs);
        }
    }
}
