//! Acceptance harness: one PASS/FAIL line per criterion, tolerances pinned
//! below. Runs the full pipelines at n = 1e5 and takes several minutes on
//! one core.
//!
//! Criteria listed in `KNOWN_FAILING` are reported but do not fail the
//! process; everything else does.

mod common;

use std::time::Instant;

use common::{beq_code, check_accounting, exhaustive_marginals, load_dist, tree_code};
use ldgmq::beq::{beq_quantize, gf2_solve, BeqConfig, BeqInstance};
use ldgmq::bounds::{power_pt, random_coding_loss, random_coding_minimum, shaping_loss_db, SourceModel};
use ldgmq::bp::{decimate_greedy, quantize, source_block, BpState, QuantizerConfig, Recovery};
use ldgmq::codes::{degree_set, encode, sample_code, DegreeDistribution};
use ldgmq::de::{curves_for, mono_threshold_de, t_for_ic, DeConfig, DeEngine};
use ldgmq::exit_ea::{ea_threshold, optimize_binary_ea};
use ldgmq::messages::{boxplus, cn_combine, vn_combine, Binning, Message, QuantizedDensity};
use ldgmq::pacing::{lai_approx, lai_continuous, lai_ea_close_fit, lai_uniform, CloseFitEa, PaceSchedule};
use ldgmq::tcq;
use rand::{Rng, SeedableRng};

/// Finite-length offset in the trajectory area; see the project notes.
const KNOWN_FAILING: &[u32] = &[9];

/// Binary code used for criteria 4, 5 and 9.
const K1_CODE: &str = "k1_r4461_db12_de.json";
const N: usize = 100_000;

struct Line {
    id: u32,
    pass: bool,
    detail: String,
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

/// Mean MSE over `blocks` source blocks, converted to a shaping loss.
fn run_loss(dist: &DegreeDistribution, l0: usize, throttle: bool, blocks: u64) -> (f64, f64) {
    let code = sample_code(dist, N, 1).unwrap();
    let t = t_for_ic(dist.k, dist.threshold.unwrap()).unwrap();
    let mut cfg = QuantizerConfig::new(t, l0, 5);
    cfg.pace = PaceSchedule::approx(dist.d_b, l0);
    cfg.throttle = throttle;
    let (mut mse, mut iters) = (0.0, 0.0);
    for b in 0..blocks {
        let r = quantize(&source_block(N, dist.k, 5, b), &code, &cfg).unwrap();
        mse += r.mse;
        iters += r.iterations as f64;
    }
    let nb = blocks as f64;
    (shaping_loss_db(mse / nb, dist.rate, dist.k), iters / nb)
}

fn c1_beq_thresholds() -> Line {
    const ROWS: [(usize, f64, usize); 6] =
        [(6, 0.4110, 6), (7, 0.4294, 10), (8, 0.4376, 19), (9, 0.4416, 37), (10, 0.4437, 70), (11, 0.4448, 127)];
    const TOL: f64 = 0.002;
    let start = Instant::now();
    let degs = degree_set(1.1, 300);
    let class = |d: usize| degs.iter().position(|&x| x >= d).unwrap_or(degs.len()) as i64;
    let mut pass = true;
    let mut parts = Vec::new();
    for (d_b, target, dmax) in ROWS {
        let (dist, thr) = optimize_binary_ea(0.4461, d_b, &degs, None).unwrap();
        let off = class(dist.max_degree()) - class(dmax);
        pass &= within(thr, target, TOL) && off.abs() <= 1;
        parts.push(format!("{d_b}:{thr:.4}/{}", dist.max_degree()));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    Line { id: 1, pass, detail: format!("I_c^thr/d_c^max {} (+/-{TOL}, +/-1 class), {secs:.1} s", parts.join(" ")) }
}

fn c2_random_coding() -> Line {
    const TOL: f64 = 5e-4;
    let (r1, l1) = random_coding_minimum(1, 0.2, 0.7, 1e-5).unwrap();
    let (r2, l2) = random_coding_minimum(2, 0.7, 1.3, 1e-5).unwrap();
    let l3 = random_coding_loss(0.4461, 1).unwrap();
    let pass = within(l1, 0.0945, TOL)
        && within(l2, 0.0010, TOL)
        && within(l3, 0.0976, TOL)
        && within(r1, 0.4130, 0.02)
        && within(r2, 0.9531, 0.05);
    Line {
        id: 2,
        pass,
        detail: format!("min K=1 {l1:.4} at R={r1:.4}, min K=2 {l2:.4} at R={r2:.4}, R=0.4461 {l3:.4} (+/-{TOL} dB)"),
    }
}

fn c3_regular() -> Line {
    let a = ea_threshold(&DegreeDistribution::regular(4, 2));
    let b = ea_threshold(&DegreeDistribution::regular(5, 3));
    Line {
        id: 3,
        pass: within(a, 1.0 / 3.0, 1e-4) && within(b, 0.4375, 1e-4),
        detail: format!("(4,2) {a:.6}, (5,3) {b:.6} (+/-1e-4)"),
    }
}

/// One DE sweep at the code's operating temperature, evaluated at its
/// monotonicity threshold.
fn c4_pacing(dist: &DegreeDistribution) -> Line {
    const TOL: f64 = 0.05;
    let t = t_for_ic(1, dist.threshold.unwrap()).unwrap();
    let curves = &curves_for(dist, t, &DeConfig::extraction()).unwrap();
    let ic = mono_threshold_de(curves).unwrap().ic_thr;
    let cont = lai_continuous(curves, ic);
    let unif = lai_uniform(curves, ic);
    let appr = lai_approx(curves, ic, 12);
    let fit_err = [4usize, 8, 12, 20]
        .iter()
        .map(|&d| (CloseFitEa { d_b: d }.lai() - 4.0 * (d as f64 - 1.0) / d as f64).abs())
        .chain([(lai_ea_close_fit(12) - 44.0 / 12.0).abs()])
        .fold(0.0, f64::max);
    Line {
        id: 4,
        pass: within(cont, 3.365, TOL) && within(unif, 4.701, TOL) && within(appr, 3.443, TOL) && fit_err < 1e-3,
        detail: format!(
            "L*A_i continuous {cont:.3}, uniform {unif:.3}, approx {appr:.3} (+/-{TOL}); close-fit error {fit_err:.1e}"
        ),
    }
}

fn c5_binary(dist: &DegreeDistribution) -> Line {
    let (l100, i100) = run_loss(dist, 100, false, 2);
    let (l1k, i1k) = run_loss(dist, 1000, false, 2);
    Line {
        id: 5,
        pass: within(l100, 0.3241, 0.04) && within(l1k, 0.1537, 0.02),
        detail: format!(
            "L={i100:.0}: {l100:.4} dB (0.3241 +/- 0.04); L={i1k:.0}: {l1k:.4} dB (0.1537 +/- 0.02); 2 blocks each"
        ),
    }
}

fn c6_mary() -> Line {
    let (la, ia) = run_loss(&load_dist("k2_r9531_db11_de.json"), 100, false, 2);
    let (lb, ib) = run_loss(&load_dist("k2_r6285_db17_depo1000.json"), 1000, true, 2);
    Line {
        id: 6,
        pass: within(la, 0.49, 0.06) && within(lb, 0.074, 0.012),
        detail: format!(
            "R=0.9531 L={ia:.0}: {la:.4} dB (0.49 +/- 0.06); R=0.6285 DE-PO L0=1000' ({ib:.0} iters): {lb:.4} dB (0.074 +/- 0.012)"
        ),
    }
}

fn c7_tcq() -> Line {
    #[allow(clippy::approx_constant)]
    const TABLE: [(u32, f64); 7] =
        [(2, 0.5371), (3, 0.4464), (4, 0.3781), (5, 0.3183), (6, 0.2664), (7, 0.2321), (8, 0.1921)];
    const SC: [(usize, f64); 6] =
        [(100_000, 0.0005), (30_000, 0.0014), (10_000, 0.0036), (3_000, 0.0104), (1_000, 0.0263), (300, 0.0703)];
    let blocks = tcq::tcq_blocks(10_000, 10, 2);
    let mut pass = true;
    let mut parts = Vec::new();
    for (nu, target) in TABLE {
        let t = tcq::poly_search(nu, 300, 30_000, 1).unwrap().trellis;
        let loss = tcq::tcq_loss_db(tcq::evaluate(&t, &blocks), nu, 10_000);
        pass &= within(loss, target, 0.02);
        parts.push(format!("{nu}:{loss:.4}"));
    }
    let sc_err = SC.iter().map(|&(n, v)| (tcq::sc_bound(n).unwrap() - v).abs()).fold(0.0, f64::max);
    pass &= sc_err <= 2e-4;
    Line { id: 7, pass, detail: format!("nu:loss {} (+/-0.02 dB); SC max error {sc_err:.1e} (2e-4)", parts.join(" ")) }
}

/// Deterministic sweeps over the same properties as the proptest suites.
fn c8_properties() -> Line {
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    let mut failures: Vec<String> = Vec::new();

    // Message algebra.
    let msg = |r: &mut rand_chacha::ChaCha8Rng| match r.gen_range(0..8) {
        0 => Message::ZERO,
        1 => Message::ONE,
        2 => Message::STAR,
        _ => {
            let p = r.gen::<f64>();
            Message::new(p, 1.0 - p)
        }
    };
    let close = |a: Message, b: Message| (a.p0 - b.p0).abs() < 1e-12 && (a.p1 - b.p1).abs() < 1e-12;
    let mut algebra_ok = true;
    for _ in 0..5000 {
        let (a, b, c) = (msg(&mut r), msg(&mut r), msg(&mut r));
        algebra_ok &= close(cn_combine(a, b), cn_combine(b, a));
        algebra_ok &= close(cn_combine(cn_combine(a, b), c), cn_combine(a, cn_combine(b, c)));
        algebra_ok &= close(vn_combine(a, Message::STAR).unwrap(), a);
        if let (Ok(x), Ok(y)) = (vn_combine(a, b), vn_combine(b, a)) {
            algebra_ok &= close(x, y);
        }
        let (la, lb) = (r.gen_range(-12.0..12.0), r.gen_range(-12.0..12.0));
        algebra_ok &= (boxplus(la, lb) - cn_combine(Message::from_l(la), Message::from_l(lb)).l_value()).abs() < 1e-8;
    }
    if !algebra_ok {
        failures.push("message algebra".into());
    }

    // Tree BP is exact.
    let mut tree_err: f64 = 0.0;
    for seed in 0..40u64 {
        let n_b = 2 + (seed as usize % 11);
        let n_c = n_b + (seed as usize % 7);
        let code = tree_code(n_b, n_c, seed);
        let l_c: Vec<f64> = (0..n_c).map(|_| r.gen_range(-3.0..3.0)).collect();
        let mut st = BpState::with_c_priors(&code, l_c.clone()).unwrap();
        for _ in 0..2 * (n_b + n_c) {
            st.iterate();
        }
        for (a, b) in st.l_ext.iter().zip(exhaustive_marginals(&code, &l_c)) {
            tree_err = tree_err.max((a - b).abs());
        }
    }
    if tree_err >= 1e-8 {
        failures.push(format!("tree BP error {tree_err:.1e}"));
    }

    // BEQ accounting on every run, n_i/2 statistics over 100 runs.
    let code = sample_code(&load_dist(K1_CODE), 10_000, 5).unwrap();
    let (mut unsat, mut ni) = (0.0, 0.0);
    for run in 0..100u64 {
        let inst = BeqInstance::random(code.n_c(), 0.6, 1000 + run).unwrap();
        let res = beq_quantize(&inst, &code, &BeqConfig { l0: 50, seed: run }).unwrap();
        if let Err(e) = check_accounting(&inst, &code, &res) {
            failures.push(format!("BEQ run {run}: {e}"));
            break;
        }
        unsat += res.unsat as f64;
        ni += res.n_i as f64;
    }
    if (unsat - ni / 2.0).abs() > 4.0 * (ni / 4.0).sqrt() {
        failures.push(format!("BEQ unsat {unsat} vs n_i/2 {}", ni / 2.0));
    }

    // GF(2) oracle against brute force.
    for seed in 0..60u64 {
        let n = 8 + (seed as usize % 25);
        let code = beq_code(n, seed);
        let inst = BeqInstance::random(n, 0.3 + 0.01 * seed as f64, seed).unwrap();
        let sol = gf2_solve(&inst, &code).unwrap();
        let brute = (0u32..1 << code.n_b).any(|w| {
            let b: Vec<u8> = (0..code.n_b).map(|i| (w >> i & 1) as u8).collect();
            let (c, _) = encode(&code, &b).unwrap();
            inst.y.iter().zip(&c).all(|(y, c)| y.map_or(true, |v| v == *c))
        });
        let res = beq_quantize(&inst, &code, &BeqConfig { l0: 10, seed }).unwrap();
        if sol.solvable != brute || (res.unsat == 0 && !sol.solvable) {
            failures.push(format!("GF(2) oracle n={n} seed={seed}"));
        }
    }

    // DE degenerates to EA for erasure priors.
    let dist = DegreeDistribution::new(
        1,
        1.0 / (6.0 * (0.4 / 2.0 + 0.35 / 4.0 + 0.25 / 9.0)),
        6,
        vec![(2, 0.4), (4, 0.35), (9, 0.25)],
    )
    .unwrap();
    let bin = Binning { n_half: 128, l_max: 25.0 };
    let mut ea_err: f64 = 0.0;
    for _ in 0..50 {
        let (ic, x, ib) = (r.gen_range(0.05..0.95), r.gen::<f64>(), r.gen::<f64>());
        let eng = DeEngine::with_prior(&dist, QuantizedDensity::erasure(bin, ic));
        let cb = eng.c_step(&QuantizedDensity::erasure(bin, x));
        let (bc, _, _) = eng.b_step(&cb, ib);
        let y = 1.0 - ic * dist.poly(x);
        ea_err = ea_err.max((cb.mi() - ic * dist.poly(x)).abs());
        ea_err = ea_err.max((bc.mi() - (1.0 - (1.0 - ib) * y.powi(5))).abs());
    }
    if ea_err >= 1e-4 {
        failures.push(format!("DE/EA error {ea_err:.1e}"));
    }

    // Greedy choice is invariant under monotone certainty rescaling.
    let code = sample_code(&DegreeDistribution::regular(4, 2), 32, 1).unwrap();
    for _ in 0..200 {
        let mut st = BpState::with_c_priors(&code, vec![0.0; 32]).unwrap();
        st.l_ext = (0..code.n_b).map(|i| r.gen_range(-20.0..20.0) + i as f64 * 1e-3).collect();
        let before = decimate_greedy(&st).unwrap();
        let (s, p) = (r.gen_range(0.1..10.0), r.gen_range(0.3..3.0));
        st.l_ext = st.l_ext.iter().map(|&l: &f64| l.signum() * s * l.abs().powf(p)).collect();
        if decimate_greedy(&st).unwrap() != before {
            failures.push("greedy rescaling".into());
            break;
        }
    }

    // Recovery with the true distribution leaves the source unchanged.
    let mut rec_err: f64 = 0.0;
    for t in [2.0, 4.0, 6.0] {
        let rec = Recovery::new(t).unwrap();
        let table = rec.table(&rec.true_g());
        for qi in 0..=10 {
            for i in 0..50 {
                let y = -0.98 + 1.96 * i as f64 / 49.0;
                rec_err = rec_err.max((Recovery::apply(&table, y, qi as f64 / 10.0) - y).abs());
            }
        }
    }
    if rec_err >= 2e-3 {
        failures.push(format!("recovery fixed point {rec_err:.1e}"));
    }

    let pass = failures.is_empty();
    let detail = if pass {
        format!("algebra, tree BP ({tree_err:.0e}), BEQ accounting and unsat {unsat}/n_i {ni}, GF(2) oracle, DE/EA ({ea_err:.0e}), greedy, recovery ({rec_err:.0e})")
    } else {
        failures.join("; ")
    };
    Line { id: 8, pass, detail }
}

/// `A_i = I_c/R - A_d` from the decimation trajectory, times the actual
/// iteration count. The MSE-implied `A_i` (inverting the empirical
/// MSE/delta-area relation) is reported alongside.
fn c9_inverse_law(dist: &DegreeDistribution) -> Line {
    const TOL: f64 = 0.10;
    let ic = dist.threshold.unwrap();
    let t = t_for_ic(1, ic).unwrap();
    let a_ne = ic / dist.rate;
    let pt = power_pt(&SourceModel { k: 1, t });
    let code = sample_code(dist, N, 1).unwrap();
    let mut traj = Vec::new();
    let mut implied = Vec::new();
    for l0 in [300usize, 1000, 3000] {
        let mut cfg = QuantizerConfig::new(t, l0, 5);
        cfg.pace = PaceSchedule::approx(dist.d_b, l0);
        let (mut a_d, mut mse, mut iters) = (0.0, 0.0, 0.0);
        for b in 0..2 {
            let r = quantize(&source_block(N, 1, 5, b), &code, &cfg).unwrap();
            a_d += r.trajectory.a_d / 2.0;
            mse += r.mse / 2.0;
            iters += r.iterations as f64 / 2.0;
        }
        traj.push((iters, iters * (a_ne - a_d)));
        implied.push(iters * (mse - pt) / (1.0 / 3.0 - pt) * a_ne);
    }
    let spread = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x / mean - 1.0).abs()).fold(0.0, f64::max)
    };
    let lai: Vec<f64> = traj.iter().map(|p| p.1).collect();
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(", ");
    Line {
        id: 9,
        pass: spread(&lai) <= TOL,
        detail: format!(
            "L = {} iters: trajectory L*A_i {} (spread {:.0}%, gate {:.0}%); MSE-implied L*A_i {} (spread {:.0}%)",
            traj.iter().map(|p| format!("{:.0}", p.0)).collect::<Vec<_>>().join("/"),
            fmt(&lai),
            100.0 * spread(&lai),
            100.0 * TOL,
            fmt(&implied),
            100.0 * spread(&implied)
        ),
    }
}

fn main() {
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let want = |id: u32| only.map_or(true, |o| o == id);
    let k1 = load_dist(K1_CODE);
    let mut lines = Vec::new();
    let mut timed = |f: &mut dyn FnMut() -> Line| {
        let start = Instant::now();
        let line = f();
        let tag = match (line.pass, KNOWN_FAILING.contains(&line.id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("criterion {}: {tag} [{:.0} s] {}", line.id, start.elapsed().as_secs_f64(), line.detail);
        lines.push(line);
    };
    if want(1) {
        timed(&mut c1_beq_thresholds);
    }
    if want(2) {
        timed(&mut c2_random_coding);
    }
    if want(3) {
        timed(&mut c3_regular);
    }
    if want(4) {
        timed(&mut || c4_pacing(&k1));
    }
    if want(5) {
        timed(&mut || c5_binary(&k1));
    }
    if want(6) {
        timed(&mut c6_mary);
    }
    if want(7) {
        timed(&mut c7_tcq);
    }
    if want(8) {
        timed(&mut c8_properties);
    }
    if want(9) {
        timed(&mut || c9_inverse_law(&k1));
    }
    let hard = lines.iter().filter(|l| !l.pass && !KNOWN_FAILING.contains(&l.id)).count();
    if hard > 0 {
        println!("{hard} criterion(s) failed");
        std::process::exit(1);
    }
}
