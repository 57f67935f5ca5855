use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use sftlab::experiments::{self, Config, ExperimentSpec};

#[derive(Parser)]
#[command(name = "sftlab", version, about = "Batch experiments on subshifts of finite type")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment in a config file.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "sftlab-run")]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the built-in experiments.
    List,
    /// Parse and check a config file without running it.
    Validate { config: PathBuf },
}

fn load(path: &Path) -> Result<Config> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Config::parse(&text).with_context(|| format!("invalid config {}", path.display()))
}

struct Finished {
    record: Value,
    pass: bool,
    seconds: f64,
    csvs: Vec<(String, String)>,
}

fn run_one(spec: &ExperimentSpec, seed: u64) -> Finished {
    let t = Instant::now();
    let result = experiments::run_experiment(spec, seed);
    let seconds = t.elapsed().as_secs_f64();
    match result {
        Ok(o) => Finished {
            record: serde_json::to_value(&o).expect("outcome serializes"),
            pass: o.pass,
            seconds,
            csvs: o.csvs.into_iter().collect(),
        },
        Err(e) => Finished {
            record: json!({
                "name": spec.name,
                "kind": spec.kind,
                "seed": experiments::experiment_seed(seed, &spec.name),
                "pass": false,
                "error": e.to_string(),
            }),
            pass: false,
            seconds,
            csvs: Vec::new(),
        },
    }
}

#[cfg(feature = "parallel")]
fn run_all(specs: &[ExperimentSpec], seed: u64, jobs: Option<usize>) -> Result<Vec<Finished>> {
    use rayon::prelude::*;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build()?;
    Ok(pool.install(|| specs.par_iter().map(|s| run_one(s, seed)).collect()))
}

#[cfg(not(feature = "parallel"))]
fn run_all(specs: &[ExperimentSpec], seed: u64, _jobs: Option<usize>) -> Result<Vec<Finished>> {
    Ok(specs.iter().map(|s| run_one(s, seed)).collect())
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(config: &Path, out: &Path, jobs: Option<usize>, seed: Option<u64>) -> Result<bool> {
    let mut cfg = load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let done = run_all(&cfg.experiments, cfg.seed, jobs)?;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_json(&out.join("config.json"), &serde_json::to_value(&cfg)?)?;
    for (spec, f) in cfg.experiments.iter().zip(&done) {
        if f.csvs.is_empty() {
            continue;
        }
        let dir = out.join(&spec.name);
        fs::create_dir_all(&dir)?;
        for (file, body) in &f.csvs {
            fs::write(dir.join(file), body).with_context(|| format!("writing {}/{file}", dir.display()))?;
        }
    }
    let pass = done.iter().all(|f| f.pass);
    let summary = json!({
        "seed": cfg.seed,
        "pass": pass,
        "experiments": done.iter().map(|f| &f.record).collect::<Vec<_>>(),
    });
    write_json(&out.join("summary.json"), &summary)?;
    let meta = json!({
        "sftlab_version": env!("CARGO_PKG_VERSION"),
        "parallel": cfg!(feature = "parallel"),
        "jobs": jobs,
        "started_unix": started,
        "wall_seconds": clock.elapsed().as_secs_f64(),
        "experiments": cfg.experiments.iter().zip(&done)
            .map(|(s, f)| json!({"name": s.name, "seconds": f.seconds}))
            .collect::<Vec<_>>(),
    });
    write_json(&out.join("meta.json"), &meta)?;

    for (spec, f) in cfg.experiments.iter().zip(&done) {
        println!("{} {} ({})", if f.pass { "PASS" } else { "FAIL" }, spec.name, spec.kind);
        if let Some(err) = f.record.get("error") {
            println!("  error: {}", err.as_str().unwrap_or_default());
        }
        for c in f.record["checks"].as_array().into_iter().flatten() {
            let ok = c["pass"].as_bool().unwrap_or(false);
            println!("  {} {}: {}", if ok { "ok  " } else { "FAIL" }, c["name"].as_str().unwrap_or(""), c["detail"].as_str().unwrap_or(""));
        }
    }
    println!("wrote {}", out.display());
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::List => {
            for (name, what) in experiments::CATALOG {
                println!("{name}\t{what}");
            }
            Ok(true)
        }
        Command::Validate { config } => load(&config).map(|cfg| {
            println!("ok: {} experiment(s), seed {}", cfg.experiments.len(), cfg.seed);
            true
        }),
        Command::Run { config, out, jobs, seed } => run(&config, &out, jobs, seed),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
