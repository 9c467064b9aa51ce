mod bench;
mod reproduce;
mod util;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ldgmq::bounds::random_coding_report;
use ldgmq::codes::{degree_set, sample_code, DegreeDistribution, LdgmCode};
use ldgmq::de::{self, DeConfig, Direction, FghCurves};
use ldgmq::exit_ea::{optimize_binary_ea, optimize_mary_ea};
use ldgmq::pacing::{self, PaceSchedule};
use ldgmq::{beq, tcq};
use serde_json::json;

use crate::util::{write_out, CliError};

#[derive(Parser)]
#[command(name = "ldgmq", version, about = "LDGM quantization codes: design, quantization and baselines")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepDir {
    Up,
    Down,
}

#[derive(Clone, Copy, ValueEnum)]
enum PaceMethod {
    Dp,
    Continuous,
    Approx,
    Uniform,
}

#[derive(Subcommand)]
enum Cmd {
    /// Random-coding quantities at one rate.
    Bounds {
        #[arg(long = "K", default_value_t = 1)]
        k: u32,
        #[arg(long)]
        rate: f64,
    },
    /// Samples a code from a degree distribution.
    GenCode {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Degree distribution under the erasure approximation.
    OptEa {
        #[arg(long = "K", default_value_t = 1)]
        k: u32,
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        db: usize,
        /// Pacing-aware design for this iteration count.
        #[arg(long)]
        pace: Option<f64>,
        #[arg(long, default_value_t = 300)]
        dmax: usize,
        #[arg(long, default_value_t = 1.1)]
        beta: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// One density-evolution sweep, optionally with extracted curves.
    De {
        #[arg(long)]
        dist: PathBuf,
        /// Temperature, or `auto` for t0(K I_c^thr).
        #[arg(long, default_value = "auto")]
        t: String,
        #[arg(long, value_enum, default_value = "up")]
        sweep: SweepDir,
        #[arg(long, default_value_t = 512)]
        steps: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Writes the f, g, h curves (up sweeps only).
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Refines a distribution with density evolution.
    OptDe {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long, default_value_t = 3)]
        rounds: usize,
        #[arg(long)]
        pace: Option<f64>,
        #[arg(long, default_value_t = 512)]
        steps: usize,
        #[arg(long, default_value_t = 300)]
        dmax: usize,
        #[arg(long, default_value_t = 1.1)]
        beta: f64,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Decimation pace from curves.
    Pace {
        #[arg(long)]
        curves: PathBuf,
        /// Operating point; defaults to the curves' monotonicity threshold.
        #[arg(long = "Ic")]
        ic: Option<f64>,
        #[arg(long = "L")]
        l: usize,
        #[arg(long, value_enum, default_value = "approx")]
        method: PaceMethod,
        /// b-node degree, needed by the approx method.
        #[arg(long)]
        db: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Monte-Carlo quantization of uniform sources.
    Quantize(bench::QuantizeArgs),
    /// Binary erasure quantization runs.
    Beq {
        #[arg(long)]
        code: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long = "L0", default_value_t = 100)]
        l0: usize,
        #[arg(long, default_value_t = 1)]
        runs: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Trellis-coded quantization baseline.
    Tcq {
        #[arg(long)]
        nu: u32,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        blocks: usize,
        /// Random polynomial search with this many candidates.
        #[arg(long)]
        search: Option<usize>,
        /// Block length used to score search candidates.
        #[arg(long, default_value_t = 30_000)]
        n_eval: usize,
        /// Polynomial file (`nu g1 g2`, octal) to use instead of searching.
        #[arg(long)]
        poly: Option<PathBuf>,
        /// Writes the polynomials used.
        #[arg(long)]
        poly_out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Re-runs a table subset and compares with stored reference values.
    Reproduce {
        #[arg(value_enum)]
        table: reproduce::Table,
        /// Fewer blocks and search trials.
        #[arg(long)]
        fast: bool,
        #[arg(long, default_value = "data")]
        data: PathBuf,
    },
}

fn load_dist(path: &std::path::Path) -> Result<DegreeDistribution, CliError> {
    DegreeDistribution::load(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// `t` from a number or `auto` (needs a stored threshold).
fn resolve_t(arg: &str, dist: &DegreeDistribution) -> Result<f64, CliError> {
    if arg == "auto" {
        let thr = dist
            .threshold
            .ok_or_else(|| CliError::Input("--t auto needs a distribution with a stored threshold".into()))?;
        return Ok(de::t_for_ic(dist.k, thr)?);
    }
    arg.parse().map_err(|_| CliError::Usage(format!("--t expects a number or `auto`, got `{arg}`")))
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.cmd {
        Cmd::Bounds { k, rate } => {
            let r = random_coding_report(rate, k).map_err(|e| CliError::Usage(e.to_string()))?;
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
        Cmd::GenCode { dist, n, seed, output } => {
            let d = load_dist(&dist)?;
            let code = sample_code(&d, n, seed)?;
            code.save(&output)?;
            eprintln!("n_b = {}, edges = {}, removed pairs = {}", code.n_b, code.num_edges(), code.removed_pairs);
        }
        Cmd::OptEa { k, rate, db, pace, dmax, beta, output } => {
            let degs = degree_set(beta, dmax);
            let dist = if k == 1 && pace.is_none() {
                optimize_binary_ea(rate, db, &degs, None)?.0
            } else {
                optimize_mary_ea(rate, db, k, &degs, pace)?.dist
            };
            write_out(output.as_deref(), &dist.to_json()?)?;
        }
        Cmd::De { dist, t, sweep, steps, output, curves } => {
            let d = load_dist(&dist)?;
            let t = resolve_t(&t, &d)?;
            let mut cfg = DeConfig::extraction();
            cfg.steps = steps;
            let dir = match sweep {
                SweepDir::Up => Direction::Up,
                SweepDir::Down => Direction::Down,
            };
            let s = de::de_sweep(&d, t, dir, &cfg)?;
            if let Some(p) = curves {
                if !matches!(sweep, SweepDir::Up) {
                    return Err(CliError::Usage("--curves needs an up sweep".into()));
                }
                let c = de::extract_fgh(&s, de::gamma_at(d.k, t)?)?;
                std::fs::write(p, serde_json::to_string(&c)?)?;
            }
            write_out(output.as_deref(), &serde_json::to_string(&s)?)?;
        }
        Cmd::OptDe { dist, rounds, pace, steps, dmax, beta, output, curves } => {
            let d = load_dist(&dist)?;
            let mut cfg = DeConfig::extraction();
            cfg.steps = steps;
            let r = de::optimize_de(&d, &degree_set(beta, dmax), rounds, pace, &cfg)?;
            for (i, round) in r.rounds.iter().enumerate() {
                eprintln!(
                    "round {i}: t = {:.4}, base threshold = {:.4}, predicted = {:.4}",
                    round.base_t, round.base_thr, round.predicted_thr
                );
            }
            eprintln!("final DE threshold = {:.4}", r.threshold.ic_thr);
            std::fs::write(&output, r.dist.to_json()?)?;
            if let Some(p) = curves {
                std::fs::write(p, serde_json::to_string(&r.curves)?)?;
            }
        }
        Cmd::Pace { curves, ic, l, method, db, output } => {
            let c: FghCurves = serde_json::from_str(&std::fs::read_to_string(&curves)?)?;
            let ic = match ic {
                Some(v) => v,
                None => de::mono_threshold_de(&c)?.ic_thr,
            };
            let (schedule, lai) = match method {
                PaceMethod::Dp => {
                    let p = pacing::dp_optimal_pace(&c, ic, l);
                    (p.schedule, None)
                }
                PaceMethod::Continuous => {
                    (pacing::continuous_optimal_pace(&c, ic, l), Some(pacing::lai_continuous(&c, ic)))
                }
                PaceMethod::Approx => {
                    let d_b = db.ok_or_else(|| CliError::Usage("--method approx needs --db".into()))?;
                    (PaceSchedule::approx(d_b, l), Some(pacing::lai_approx(&c, ic, d_b)))
                }
                PaceMethod::Uniform => (PaceSchedule::uniform(l), Some(pacing::lai_uniform(&c, ic))),
            };
            let a_ne = pacing::ebp_area_model(&c, ic);
            let a_i = a_ne - pacing::schedule_area(&c, ic, &schedule);
            let doc = json!({
                "Ic": ic,
                "L": l,
                "A_ne": a_ne,
                "A_i": a_i,
                "L_times_A_i": l as f64 * a_i,
                "L_times_A_i_asymptotic": lai,
                "x": schedule.x,
            });
            write_out(output.as_deref(), &serde_json::to_string_pretty(&doc)?)?;
        }
        Cmd::Quantize(args) => return bench::quantize_cmd(args),
        Cmd::Beq { code, epsilon, l0, runs, seed, output } => {
            let code = LdgmCode::load(&code)?;
            let mut csv = String::from("run,n_ne,n_g,n_i,unsat\n");
            for run in 0..runs {
                let s = ldgmq::rng::block_seed(seed, run);
                let inst = beq::BeqInstance::random(code.n_c(), epsilon, s)?;
                let r = beq::beq_quantize(&inst, &code, &beq::BeqConfig { l0, seed: s })?;
                csv += &format!("{run},{},{},{},{}\n", r.n_ne, r.n_g, r.n_i, r.unsat);
            }
            write_out(output.as_deref(), &csv)?;
        }
        Cmd::Tcq { nu, n, blocks, search, n_eval, poly, poly_out, seed, output } => {
            let trellis = match (poly, search) {
                (Some(p), _) => {
                    let text = std::fs::read_to_string(&p)?;
                    let line = text
                        .lines()
                        .find(|l| l.split_whitespace().next() == Some(&nu.to_string()))
                        .ok_or_else(|| CliError::Input(format!("no polynomials for nu = {nu} in {}", p.display())))?;
                    tcq::Trellis::from_line(line)?
                }
                (None, trials) => tcq::poly_search(nu, trials.unwrap_or(200), n_eval, seed)?.trellis,
            };
            if let Some(p) = poly_out {
                std::fs::write(p, trellis.to_line() + "\n")?;
            }
            let mut csv = String::from("nu,g1,g2,n,block,mse,loss_dB\n");
            for (b, y) in tcq::tcq_blocks(n, blocks, ldgmq::rng::block_seed(seed, 1)).iter().enumerate() {
                let r = tcq::viterbi_quantize(y, &trellis);
                csv += &format!(
                    "{nu},{:o},{:o},{n},{b},{},{}\n",
                    trellis.g1,
                    trellis.g2,
                    r.mse,
                    tcq::tcq_loss_db(r.mse, nu, n)
                );
            }
            write_out(output.as_deref(), &csv)?;
        }
        Cmd::Reproduce { table, fast, data } => return reproduce::run(table, fast, &data),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
