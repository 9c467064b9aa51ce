//! Monte-Carlo quantization harness with provenance.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, ValueEnum};
use ldgmq::bounds::shaping_loss_db;
use ldgmq::bp::{quantize, source_block, Decimator, QuantizerConfig, Trajectory};
use ldgmq::codes::{sample_code, DegreeDistribution, LdgmCode};
use ldgmq::pacing::PaceSchedule;
use ldgmq::rng::block_seed;
use serde::{Deserialize, Serialize};

use crate::util::{sha256_hex, write_out, CliError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PaceKind {
    Approx,
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DecimatorArg {
    Greedy,
    Typical,
}

/// One experiment; the whole document is embedded in every report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub code: Option<PathBuf>,
    pub dist: Option<PathBuf>,
    /// Block length when the code is sampled from `dist`.
    pub n: Option<usize>,
    #[serde(default = "one")]
    pub code_seed: u64,
    #[serde(rename = "L0")]
    pub l0: usize,
    /// A number, or `auto` for `t0(K I_c^thr)` from `dist`.
    pub t: String,
    pub decimator: Decimator,
    pub pace: PaceKind,
    #[serde(default)]
    pub throttle: bool,
    #[serde(default)]
    pub recovery: bool,
    pub seed: u64,
    pub blocks: usize,
}

fn one() -> u64 {
    1
}

#[derive(Args)]
pub struct QuantizeArgs {
    /// Experiment JSON; replaces the options below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    code: Option<PathBuf>,
    /// Distribution (for `--t auto`, or to sample the code with `--n`).
    #[arg(long)]
    dist: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1)]
    code_seed: u64,
    #[arg(long = "L0", default_value_t = 100)]
    l0: usize,
    #[arg(long, default_value = "auto")]
    t: String,
    #[arg(long, value_enum, default_value = "greedy")]
    decimator: DecimatorArg,
    #[arg(long, value_enum, default_value = "approx")]
    pace: PaceKind,
    #[arg(long)]
    throttle: bool,
    #[arg(long)]
    recovery: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    blocks: usize,
    /// Trajectory of block 0, as JSON.
    #[arg(long)]
    traj: Option<PathBuf>,
    /// Per-block CSV (stdout when absent).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON report (stderr summary only when absent).
    #[arg(long)]
    json: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockRow {
    pub block: usize,
    pub mse: f64,
    #[serde(rename = "loss_dB")]
    pub loss_db: f64,
    pub iters: usize,
    pub capped: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub code_sha256: String,
    pub dist_sha256: Option<String>,
    pub seed: u64,
    pub code_seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub provenance: Provenance,
    pub config: RunConfig,
    pub t: f64,
    #[serde(rename = "K")]
    pub k: u32,
    #[serde(rename = "R")]
    pub rate: f64,
    pub n: usize,
    pub blocks: Vec<BlockRow>,
    pub mean_mse: Option<f64>,
    #[serde(rename = "loss_dB")]
    pub loss_db: Option<f64>,
    pub mean_iters: Option<f64>,
}

impl Report {
    pub fn csv(&self) -> String {
        let mut s = String::from("block,mse,loss_dB,iters\n");
        for b in &self.blocks {
            s += &format!("{},{},{},{}\n", b.block, b.mse, b.loss_db, b.iters);
        }
        s
    }
}

/// A block's row and, for block 0, its trajectory.
type Row = (BlockRow, Option<Trajectory>);

struct Loaded {
    code: LdgmCode,
    code_sha: String,
    dist: Option<DegreeDistribution>,
    dist_sha: Option<String>,
}

fn load(cfg: &RunConfig) -> Result<Loaded, CliError> {
    let (dist, dist_sha) = match &cfg.dist {
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            let d = DegreeDistribution::from_json(&String::from_utf8_lossy(&bytes))?;
            (Some(d), Some(sha256_hex(&bytes)))
        }
        None => (None, None),
    };
    let (code, code_sha) = match (&cfg.code, &dist, cfg.n) {
        (Some(p), _, _) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            let code = LdgmCode::from_text(&text)?;
            if let Some(n) = cfg.n {
                if n != code.n {
                    return Err(CliError::Input(format!("--n {n} does not match the code's n = {}", code.n)));
                }
            }
            (code, sha256_hex(text.as_bytes()))
        }
        (None, Some(d), Some(n)) => {
            let code = sample_code(d, n, cfg.code_seed)?;
            let sha = sha256_hex(code.to_text().as_bytes());
            (code, sha)
        }
        _ => return Err(CliError::Usage("give --code, or --dist with --n".into())),
    };
    Ok(Loaded { code, code_sha, dist, dist_sha })
}

/// Draws `blocks` uniform sources with per-block seeds, quantizes each and
/// aggregates the shaping loss.
pub fn run_benchmark(cfg: &RunConfig, threads: usize) -> Result<(Report, Option<Trajectory>), CliError> {
    let loaded = load(cfg)?;
    let code = &loaded.code;
    let t = if cfg.t == "auto" {
        let d = loaded.dist.as_ref().ok_or_else(|| CliError::Usage("--t auto needs --dist".into()))?;
        let thr = d.threshold.ok_or_else(|| CliError::Input("distribution has no stored threshold".into()))?;
        ldgmq::de::t_for_ic(d.k, thr)?
    } else {
        cfg.t.parse().map_err(|_| CliError::Usage(format!("bad --t `{}`", cfg.t)))?
    };
    let rate = code.n_b as f64 / code.n as f64;
    let pace = match cfg.pace {
        PaceKind::Approx => PaceSchedule::approx(code.d_b, cfg.l0),
        PaceKind::Uniform => PaceSchedule::uniform(cfg.l0),
    };
    let base = QuantizerConfig {
        t,
        l0: cfg.l0,
        pace,
        decimator: cfg.decimator,
        throttle: cfg.throttle,
        recovery: cfg.recovery,
        seed: cfg.seed,
    };
    let workers = threads.clamp(1, cfg.blocks.max(1));
    let mut rows: Vec<Row> = Vec::with_capacity(cfg.blocks);
    let results: Vec<Result<Vec<Row>, ldgmq::Error>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let base = &base;
                s.spawn(move || {
                    let mut out = Vec::new();
                    for b in (w..cfg.blocks).step_by(workers) {
                        let y = source_block(code.n, code.k, cfg.seed, b as u64);
                        let mut qc = base.clone();
                        qc.seed = block_seed(cfg.seed, b as u64);
                        let r = quantize(&y, code, &qc)?;
                        let row = BlockRow {
                            block: b,
                            mse: r.mse,
                            loss_db: shaping_loss_db(r.mse, rate, code.k),
                            iters: r.iterations,
                            capped: r.capped,
                        };
                        out.push((row, (b == 0).then_some(r.trajectory)));
                    }
                    Ok(out)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    for r in results {
        rows.extend(r?);
    }
    rows.sort_by_key(|r| r.0.block);
    let traj = rows.first_mut().and_then(|r| r.1.take());
    let blocks: Vec<BlockRow> = rows.into_iter().map(|r| r.0).collect();
    let nb = blocks.len() as f64;
    let mean_mse = (!blocks.is_empty()).then(|| blocks.iter().map(|b| b.mse).sum::<f64>() / nb);
    let mean_iters = (!blocks.is_empty()).then(|| blocks.iter().map(|b| b.iters as f64).sum::<f64>() / nb);
    let report = Report {
        provenance: Provenance {
            tool: "ldgmq".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            code_sha256: loaded.code_sha,
            dist_sha256: loaded.dist_sha,
            seed: cfg.seed,
            code_seed: cfg.code_seed,
        },
        config: cfg.clone(),
        t,
        k: code.k,
        rate,
        n: code.n,
        loss_db: mean_mse.map(|m| shaping_loss_db(m, rate, code.k)),
        mean_mse,
        mean_iters,
        blocks,
    };
    Ok((report, traj))
}

pub fn quantize_cmd(a: QuantizeArgs) -> Result<ExitCode, CliError> {
    let cfg: RunConfig = match &a.config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => RunConfig {
            code: a.code,
            dist: a.dist,
            n: a.n,
            code_seed: a.code_seed,
            l0: a.l0,
            t: a.t,
            decimator: match a.decimator {
                DecimatorArg::Greedy => Decimator::Greedy,
                DecimatorArg::Typical => Decimator::Typical,
            },
            pace: a.pace,
            throttle: a.throttle,
            recovery: a.recovery,
            seed: a.seed,
            blocks: a.blocks,
        },
    };
    let threads = a.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let (report, traj) = run_benchmark(&cfg, threads)?;
    write_out(a.csv.as_deref(), &report.csv())?;
    if let Some(p) = a.json {
        std::fs::write(p, serde_json::to_string_pretty(&report)?)?;
    }
    if let (Some(p), Some(t)) = (a.traj, traj) {
        std::fs::write(p, serde_json::to_string(&t)?)?;
    }
    match (report.loss_db, report.mean_iters) {
        (Some(l), Some(it)) => eprintln!(
            "t = {:.4}, blocks = {}, mean iterations = {it:.1}, loss = {l:.4} dB",
            report.t,
            report.blocks.len()
        ),
        _ => eprintln!("no blocks"),
    }
    Ok(ExitCode::SUCCESS)
}
