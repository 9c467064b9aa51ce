//! BP quantization with decimation.
//!
//! b-to-c messages are kept as `tanh(L/2)` in c-node order so the c-node
//! update reads them contiguously; c-to-b messages are L-values in b-node
//! order. Soft L-values are clipped at `±L_CLIP`; decimated bits send exactly
//! sure messages (`tanh = ±1`).

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::bounds::{wrap_interval, SourceModel};
use crate::codes::{encode, GrayMap, LdgmCode};
use crate::error::{Error, Result};
use crate::numeric::{h_of_l, isotonic_increasing};
use crate::pacing::PaceSchedule;
use crate::rng::{self, streams};

/// Clipping magnitude for soft L-values.
pub const L_CLIP: f64 = 25.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decimator {
    Greedy,
    Typical,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuantizerConfig {
    pub t: f64,
    pub l0: usize,
    pub pace: PaceSchedule,
    pub decimator: Decimator,
    pub throttle: bool,
    /// Prior adjustment from c-node extrinsics; binary codes only.
    pub recovery: bool,
    pub seed: u64,
}

impl QuantizerConfig {
    /// Uniform pace, greedy, unthrottled.
    pub fn new(t: f64, l0: usize, seed: u64) -> Self {
        Self {
            t,
            l0,
            pace: PaceSchedule::uniform(l0),
            decimator: Decimator::Greedy,
            throttle: false,
            recovery: false,
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct TrajectoryPoint {
    pub iter: usize,
    /// Fraction of decimated bits after this iteration.
    pub ib: f64,
    /// Mean `1 - H` of the extrinsics of bits decimated in this iteration.
    pub ibext: f64,
    /// Estimated `I_bc` after this iteration's decimations.
    pub ibc: f64,
    pub decimated: usize,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    /// Area below the actual curve, `(1/n_b) sum (1 - H)` over decimations.
    pub a_d: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuantResult {
    pub b: Vec<u8>,
    pub c: Vec<u8>,
    pub u: Vec<u32>,
    pub z: Vec<f64>,
    pub mse: f64,
    pub iterations: usize,
    /// True when the iteration cap forced the remaining bits in one sweep.
    pub capped: bool,
    pub trajectory: Trajectory,
}

/// Message state of one quantization run.
#[derive(Clone)]
pub struct BpState<'a> {
    pub code: &'a LdgmCode,
    /// Slot of b-ordered edge `e` in the c-ordered arrays.
    pos_c: Vec<u32>,
    /// b-ordered edge id of each c-ordered slot.
    slot_edge: Vec<u32>,
    /// `tanh(L_bc/2)`, c order.
    d_bc: Vec<f64>,
    /// `L_cb`, b order.
    l_cb: Vec<f64>,
    /// Prior L-value seen by each c-node (source prior, or u-to-c message).
    l_c: Vec<f64>,
    /// Decimated value: 0 undecided, +1 for bit 0, -1 for bit 1.
    prior_b: Vec<i8>,
    /// Extrinsic L-value of each b-node.
    pub l_ext: Vec<f64>,
    /// Sum of `H(mu_bc)` over each b-node's edges.
    h_b: Vec<f64>,
    /// m-ary symbol priors in label order (`n * m`), empty for K = 1.
    prior_lab: Vec<f64>,
    /// `tanh(L_cu/2)` per c-node.
    d_cu: Vec<f64>,
}

impl<'a> BpState<'a> {
    /// Binary state with given c-node prior L-values.
    pub fn with_c_priors(code: &'a LdgmCode, l_c: Vec<f64>) -> Result<Self> {
        if l_c.len() != code.n_c() {
            return Err(Error::LengthMismatch { expected: code.n_c(), got: l_c.len() });
        }
        let ne = code.num_edges();
        let mut pos_c = vec![0u32; ne];
        let mut slot_edge = vec![0u32; ne];
        for (slot, &e) in code.c_edges.iter().enumerate() {
            pos_c[e as usize] = slot as u32;
            slot_edge[slot] = e;
        }
        let h_b = (0..code.n_b).map(|i| code.b_degree(i) as f64).collect();
        Ok(Self {
            code,
            pos_c,
            slot_edge,
            d_bc: vec![0.0; ne],
            l_cb: vec![0.0; ne],
            l_c,
            prior_b: vec![0; code.n_b],
            l_ext: vec![0.0; code.n_b],
            h_b,
            prior_lab: Vec::new(),
            d_cu: vec![0.0; code.n_c()],
        })
    }

    /// State for source `y` (`y_j` in `[0, m)`) at temperature `t`.
    pub fn for_source(code: &'a LdgmCode, y: &[f64], t: f64) -> Result<Self> {
        if y.len() != code.n {
            return Err(Error::LengthMismatch { expected: code.n, got: y.len() });
        }
        let model = SourceModel::new(code.k, t)?;
        if code.k == 1 {
            let l_c = y.iter().map(|&v| binary_prior_l(v, t)).collect();
            return Self::with_c_priors(code, l_c);
        }
        let m = model.m();
        let gray = GrayMap::new(code.k);
        let mut st = Self::with_c_priors(code, vec![0.0; code.n_c()])?;
        let mut prior_lab = vec![0.0; code.n * m];
        let mut buf = vec![0.0; m];
        for (j, &yj) in y.iter().enumerate() {
            crate::bounds::prior_into(yj, &model, &mut buf);
            for lab in 0..m {
                prior_lab[j * m + lab] = buf[gray.phi(lab as u32) as usize];
            }
        }
        st.prior_lab = prior_lab;
        Ok(st)
    }

    pub fn is_decimated(&self, i: usize) -> bool {
        self.prior_b[i] != 0
    }

    /// Replaces the binary c-node priors (used by recovery).
    pub fn set_c_priors(&mut self, l_c: &[f64]) {
        self.l_c.copy_from_slice(l_c);
    }

    /// u-node update: u-to-c messages from symbol priors and c-to-u messages.
    fn unode_update(&mut self) {
        let k = self.code.k as usize;
        let m = 1usize << k;
        let mut p = [[0.0f64; 2]; 8];
        for j in 0..self.code.n {
            for (kk, pk) in p.iter_mut().enumerate().take(k) {
                let d = self.d_cu[j * k + kk];
                *pk = [0.5 * (1.0 + d), 0.5 * (1.0 - d)];
            }
            let w = &self.prior_lab[j * m..(j + 1) * m];
            for kk in 0..k {
                let mut acc = [0.0f64; 2];
                for (lab, &wl) in w.iter().enumerate() {
                    let mut prod = wl;
                    for (k2, pk) in p.iter().enumerate().take(k) {
                        if k2 != kk {
                            prod *= pk[(lab >> k2) & 1];
                        }
                    }
                    acc[(lab >> kk) & 1] += prod;
                }
                self.l_c[j * k + kk] = clip_l((acc[0] / acc[1]).ln());
            }
        }
    }

    /// One flooding iteration; returns the `I_bc` estimate.
    pub fn iterate(&mut self) -> f64 {
        if self.code.k > 1 {
            self.unode_update();
        }
        let code = self.code;
        let mut pre: Vec<f64> = Vec::with_capacity(64);
        // c-nodes
        for c in 0..code.n_c() {
            let (s0, s1) = (code.c_ptr[c], code.c_ptr[c + 1]);
            let deg = s1 - s0;
            let prior = (0.5 * self.l_c[c]).tanh();
            pre.clear();
            let mut acc = 1.0;
            for s in s0..s1 {
                pre.push(acc);
                acc *= self.d_bc[s];
            }
            self.d_cu[c] = acc;
            let mut suf = prior;
            for idx in (0..deg).rev() {
                let s = s0 + idx;
                let v = pre[idx] * suf;
                self.l_cb[self.slot_edge[s] as usize] = clip_l(2.0 * v.atanh());
                suf *= self.d_bc[s];
            }
        }
        // b-nodes
        let mut h_total = 0.0;
        for i in 0..code.n_b {
            let (e0, e1) = (code.b_ptr[i], code.b_ptr[i + 1]);
            let sum: f64 = self.l_cb[e0..e1].iter().sum();
            self.l_ext[i] = sum;
            match self.prior_b[i] {
                0 => {
                    let mut h = 0.0;
                    for e in e0..e1 {
                        let l = clip_l(sum - self.l_cb[e]);
                        self.d_bc[self.pos_c[e] as usize] = (0.5 * l).tanh();
                        h += h_of_l(l);
                    }
                    self.h_b[i] = h;
                    h_total += h;
                }
                s => {
                    let d = s as f64;
                    for e in e0..e1 {
                        self.d_bc[self.pos_c[e] as usize] = d;
                    }
                    self.h_b[i] = 0.0;
                }
            }
        }
        1.0 - h_total / code.num_edges() as f64
    }

    /// Fixes `b_i = bit`; returns the `I_bc` add-back `(1/E) sum H(mu_bc(i, .))`.
    pub fn decimate(&mut self, i: usize, bit: u8) -> f64 {
        let s: i8 = if bit == 0 { 1 } else { -1 };
        self.prior_b[i] = s;
        for e in self.code.b_ptr[i]..self.code.b_ptr[i + 1] {
            self.d_bc[self.pos_c[e] as usize] = s as f64;
        }
        let add = self.h_b[i] / self.code.num_edges() as f64;
        self.h_b[i] = 0.0;
        add
    }

    /// Current `I_bc` estimate from the stored messages.
    pub fn estimate_ibc(&self) -> f64 {
        1.0 - self.h_b.iter().sum::<f64>() / self.code.num_edges() as f64
    }

    /// `P(c_j = 1)` from the b-to-c messages alone.
    pub fn c_extrinsic_q(&self) -> Vec<f64> {
        let code = self.code;
        (0..code.n_c())
            .map(|c| {
                let d: f64 = self.d_bc[code.c_ptr[c]..code.c_ptr[c + 1]].iter().product();
                0.5 * (1.0 - d)
            })
            .collect()
    }

    /// Hard decisions of decimated bits (undecided bits read as 0).
    pub fn bits(&self) -> Vec<u8> {
        self.prior_b.iter().map(|&s| u8::from(s < 0)).collect()
    }
}

#[inline]
fn clip_l(l: f64) -> f64 {
    if l.is_nan() {
        0.0
    } else {
        l.clamp(-L_CLIP, L_CLIP)
    }
}

/// `ln(p_z(y) / p_z(y - 1))` for the binary source at temperature `t`.
#[inline]
pub fn binary_prior_l(y: f64, t: f64) -> f64 {
    let z0 = wrap_interval(y, 2.0);
    let z1 = wrap_interval(y - 1.0, 2.0);
    clip_l(-t * (z0 * z0 - z1 * z1))
}

/// `1 - H` of a bit with extrinsic L-value `l`.
#[inline]
fn certainty_info(l: f64) -> f64 {
    1.0 - h_of_l(l)
}

/// Greedy choice: most certain undecided bit (lowest index on ties) and its
/// likely value.
pub fn decimate_greedy(state: &BpState) -> Result<(usize, u8)> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..state.code.n_b {
        if state.is_decimated(i) {
            continue;
        }
        let a = state.l_ext[i].abs();
        if best.map_or(true, |(_, b)| a > b) {
            best = Some((i, a));
        }
    }
    let (i, _) = best.ok_or_else(|| Error::InvalidArgument("no undecided bits".into()))?;
    Ok((i, u8::from(state.l_ext[i] < 0.0)))
}

/// Typical choice: a uniform undecided index, and bit 0 iff `tau_i < P(b_i = 0)`.
pub fn decimate_typical(state: &BpState, rng: &mut rng::Rng, tau: &[f64]) -> Result<(usize, u8)> {
    let open: Vec<usize> = (0..state.code.n_b).filter(|&i| !state.is_decimated(i)).collect();
    if open.is_empty() {
        return Err(Error::InvalidArgument("no undecided bits".into()));
    }
    let i = open[rng.gen_range(0..open.len())];
    Ok((i, typical_bit(state.l_ext[i], tau[i])))
}

#[inline]
fn typical_bit(l: f64, tau: f64) -> u8 {
    let p0 = 1.0 / (1.0 + (-l).exp());
    u8::from(tau >= p0)
}

/// Per-iteration decimation control.
#[derive(Clone, Debug)]
pub struct PaceController {
    pub pace: PaceSchedule,
    pub throttle: bool,
    pub delta_max: f64,
    pub ibc: f64,
}

impl PaceController {
    pub fn new(pace: PaceSchedule, throttle: bool) -> Self {
        Self { pace, throttle, delta_max: 0.0, ibc: 0.0 }
    }

    /// Target `I_bc` for this iteration.
    pub fn target(&self) -> f64 {
        self.ibc + self.pace.delta_plus(self.ibc)
    }

    /// Whether to stop decimating in this iteration.
    pub fn done(&self, ibc_next: f64, delta: f64) -> bool {
        ibc_next >= self.target() || (self.throttle && delta > self.delta_max)
    }

    /// End-of-iteration update of `delta_max` and `I_bc`.
    pub fn finish(&mut self, ibc_next: f64, delta: f64) {
        self.delta_max = (0.8 * self.delta_max).max(1.25 * delta);
        self.ibc = ibc_next;
    }
}

/// Number of y grid points in the recovery transform.
pub const RECOVERY_NY: usize = 65;
/// Number of q grid points in the recovery transform.
pub const RECOVERY_NQ: usize = 33;
const CDF_GRID: usize = 4097;

/// Prior adjustment for binary codes from the CDF of `y` conditioned on
/// the c-node extrinsics `q`.
///
/// `F_q(y) = (1-q) F^0(y) + q F^1(y)` where `F^0`, `F^1` are the CDFs on
/// `[-1, 1)` of `p_z(y)` and `p_z((y-1)_I)`.
pub struct Recovery {
    t: f64,
    f0: Vec<f64>,
    f1: Vec<f64>,
}

impl Recovery {
    pub fn new(t: f64) -> Result<Self> {
        let model = SourceModel::new(1, t)?;
        let h = 2.0 / (CDF_GRID - 1) as f64;
        let ys: Vec<f64> = (0..CDF_GRID).map(|i| -1.0 + i as f64 * h).collect();
        let cum = |pdf: &dyn Fn(f64) -> f64| {
            let mut out = vec![0.0; CDF_GRID];
            for i in 1..CDF_GRID {
                // Simpson on each cell.
                let (a, b) = (ys[i - 1], ys[i]);
                out[i] = out[i - 1] + h / 6.0 * (pdf(a) + 4.0 * pdf(0.5 * (a + b)) + pdf(b));
            }
            let tot = out[CDF_GRID - 1];
            out.iter_mut().for_each(|v| *v /= tot);
            out
        };
        let f0 = cum(&|y| model.pdf(wrap_interval(y, 2.0)));
        let f1 = cum(&|y| model.pdf(wrap_interval(y - 1.0, 2.0)));
        Ok(Self { t, f0, f1 })
    }

    fn grid_y(k: usize) -> f64 {
        -1.0 + 2.0 * k as f64 / (RECOVERY_NY - 1) as f64
    }

    fn grid_q(l: usize) -> f64 {
        l as f64 / (RECOVERY_NQ - 1) as f64
    }

    /// True CDF `F_q(y)`.
    pub fn cdf(&self, q: f64, y: f64) -> f64 {
        let p = ((y + 1.0) / 2.0 * (CDF_GRID - 1) as f64).clamp(0.0, (CDF_GRID - 1) as f64);
        let i = (p as usize).min(CDF_GRID - 2);
        let w = p - i as f64;
        let a = self.f0[i] + w * (self.f0[i + 1] - self.f0[i]);
        let b = self.f1[i] + w * (self.f1[i + 1] - self.f1[i]);
        (1.0 - q) * a + q * b
    }

    /// True `G(y) = F_1(y) - F_0(y)` on the recovery y grid.
    pub fn true_g(&self) -> Vec<f64> {
        (0..RECOVERY_NY)
            .map(|k| {
                let y = Self::grid_y(k);
                self.cdf(1.0, y) - self.cdf(0.0, y)
            })
            .collect()
    }

    /// Inverse of `F_q` by bisection on the tabulated CDF.
    pub fn cdf_inv(&self, q: f64, p: f64) -> f64 {
        let fq = |i: usize| (1.0 - q) * self.f0[i] + q * self.f1[i];
        if p <= 0.0 {
            return -1.0;
        }
        if p >= 1.0 {
            return 1.0;
        }
        let (mut lo, mut hi) = (0usize, CDF_GRID - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if fq(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (a, b) = (fq(lo), fq(hi));
        let w = if b > a { (p - a) / (b - a) } else { 0.5 };
        -1.0 + 2.0 * (lo as f64 + w) / (CDF_GRID - 1) as f64
    }

    /// Estimates `G^(y)` on the y grid; `None` if `sum (q - 1/2)^2 < 1e-9`.
    /// `y` values must lie in `[-1, 1)`.
    pub fn estimate_g(y: &[f64], q: &[f64]) -> Option<Vec<f64>> {
        let den: f64 = q.iter().map(|&v| (v - 0.5) * (v - 0.5)).sum();
        if den < 1e-9 {
            return None;
        }
        // Sum of (q - 1/2) per y cell, then prefix sums give sum over y_j <= y_k.
        let nk = RECOVERY_NY;
        let mut cell = vec![0.0; nk];
        let mut total = 0.0;
        for (&yj, &qj) in y.iter().zip(q) {
            let w = qj - 0.5;
            total += w;
            // Smallest grid k with y_j <= y_k.
            let pos = ((yj + 1.0) / 2.0 * (nk - 1) as f64).ceil();
            let k = (pos.max(0.0) as usize).min(nk - 1);
            cell[k] += w;
        }
        let mut g = vec![0.0; nk];
        let mut run = 0.0;
        for k in 0..nk {
            run += cell[k];
            let f0 = (Self::grid_y(k) + 1.0) / 2.0;
            g[k] = (run - total * f0) / den;
        }
        Some(g)
    }

    /// Transform table `T(y_k, q_l) = F_q^{-1}(F^_q(y))` for estimate `g_hat`.
    ///
    /// The estimated `q = 1` and `q = 0` CDFs `F0 +/- G^/2` are projected onto
    /// non-decreasing sequences in `[0, 1]` first.
    pub fn table(&self, g_hat: &[f64]) -> Vec<f64> {
        let nk = RECOVERY_NY;
        let f0: Vec<f64> = (0..nk).map(|k| (Self::grid_y(k) + 1.0) / 2.0).collect();
        let ones = vec![1.0; nk];
        let mut a: Vec<f64> = (0..nk).map(|k| (f0[k] + 0.5 * g_hat[k]).clamp(0.0, 1.0)).collect();
        let mut b: Vec<f64> = (0..nk).map(|k| (f0[k] - 0.5 * g_hat[k]).clamp(0.0, 1.0)).collect();
        a = isotonic_increasing(&a, &ones);
        b = isotonic_increasing(&b, &ones);
        a[0] = 0.0;
        b[0] = 0.0;
        a[nk - 1] = 1.0;
        b[nk - 1] = 1.0;
        let mut t = vec![0.0; nk * RECOVERY_NQ];
        for l in 0..RECOVERY_NQ {
            let q = Self::grid_q(l);
            for k in 0..nk {
                let fhat = (1.0 - q) * b[k] + q * a[k];
                t[k * RECOVERY_NQ + l] = self.cdf_inv(q, fhat);
            }
        }
        t
    }

    /// Bilinear lookup of `T` at `(y, q)`.
    pub fn apply(table: &[f64], y: f64, q: f64) -> f64 {
        let py = ((y + 1.0) / 2.0 * (RECOVERY_NY - 1) as f64).clamp(0.0, (RECOVERY_NY - 1) as f64);
        let pq = (q * (RECOVERY_NQ - 1) as f64).clamp(0.0, (RECOVERY_NQ - 1) as f64);
        let k = (py as usize).min(RECOVERY_NY - 2);
        let l = (pq as usize).min(RECOVERY_NQ - 2);
        let (wy, wq) = (py - k as f64, pq - l as f64);
        let at = |k: usize, l: usize| table[k * RECOVERY_NQ + l];
        (1.0 - wy) * ((1.0 - wq) * at(k, l) + wq * at(k, l + 1))
            + wy * ((1.0 - wq) * at(k + 1, l) + wq * at(k + 1, l + 1))
    }

    /// Adjusted priors from `y` (in `[-1, 1)`) and `q`; `None` when skipped.
    pub fn adjusted_priors(&self, y: &[f64], q: &[f64]) -> Option<Vec<f64>> {
        let g = Self::estimate_g(y, q)?;
        let table = self.table(&g);
        Some(y.iter().zip(q).map(|(&yj, &qj)| binary_prior_l(Self::apply(&table, yj, qj), self.t)).collect())
    }
}

/// Runs the full quantizer on `y` (each `y_j` in `[0, m)`).
pub fn quantize(y: &[f64], code: &LdgmCode, cfg: &QuantizerConfig) -> Result<QuantResult> {
    if cfg.recovery && code.k != 1 {
        return Err(Error::Unsupported("recovery is implemented for binary codes only".into()));
    }
    if cfg.l0 == 0 || !(cfg.t > 0.0) {
        return Err(Error::InvalidArgument("L0 must be >= 1 and t > 0".into()));
    }
    let mut st = BpState::for_source(code, y, cfg.t)?;
    let n_b = code.n_b;
    let mut ctl = PaceController::new(cfg.pace.clone(), cfg.throttle);
    let mut dec_rng = rng::stream(cfg.seed, streams::DECIMATE);
    let tau: Vec<f64> = {
        let mut r = rng::stream(cfg.seed, streams::TAU);
        (0..n_b).map(|_| r.gen::<f64>()).collect()
    };
    let recovery = if cfg.recovery { Some(Recovery::new(cfg.t)?) } else { None };
    let y_wrapped: Vec<f64> = y.iter().map(|&v| wrap_interval(v, 2.0)).collect();
    let cap = 4 * cfg.l0;
    let mut open: Vec<u32> = (0..n_b as u32).collect();
    let mut traj = Trajectory::default();
    let mut iters = 0usize;
    let mut capped = false;
    let mut n_dec = 0usize;
    let mut order: Vec<u32> = Vec::with_capacity(n_b);
    while !open.is_empty() {
        iters += 1;
        if let Some(rec) = &recovery {
            let q = st.c_extrinsic_q();
            if let Some(l_c) = rec.adjusted_priors(&y_wrapped, &q) {
                st.set_c_priors(&l_c);
            }
        }
        let mut ibc_next = st.iterate();
        let mut delta = 0.0;
        let mut ext_sum = 0.0;
        let mut count = 0usize;
        let force_all = iters >= cap;
        if force_all || ibc_next < ctl.target() {
            order.clear();
            order.extend_from_slice(&open);
            match cfg.decimator {
                Decimator::Greedy => {
                    let l = &st.l_ext;
                    order
                        .sort_unstable_by(|&a, &b| l[b as usize].abs().total_cmp(&l[a as usize].abs()).then(a.cmp(&b)));
                }
                Decimator::Typical => order.shuffle(&mut dec_rng),
            }
            for &iu in &order {
                let i = iu as usize;
                let l = st.l_ext[i];
                let bit = match cfg.decimator {
                    Decimator::Greedy => u8::from(l < 0.0),
                    Decimator::Typical => typical_bit(l, tau[i]),
                };
                // -ln P(b_i = bit) with signed L toward the chosen value.
                let ls = if bit == 0 { l } else { -l };
                delta += (-ls).exp().ln_1p();
                ext_sum += certainty_info(l);
                ibc_next += st.decimate(i, bit);
                count += 1;
                if !force_all && ctl.done(ibc_next, delta) {
                    break;
                }
            }
            capped |= force_all;
            if count > 0 {
                let done: std::collections::HashSet<u32> = order[..count].iter().copied().collect();
                open.retain(|i| !done.contains(i));
            }
        }
        ctl.finish(ibc_next, delta);
        n_dec += count;
        traj.a_d += ext_sum / n_b as f64;
        traj.points.push(TrajectoryPoint {
            iter: iters,
            ib: n_dec as f64 / n_b as f64,
            ibext: if count > 0 { ext_sum / count as f64 } else { 0.0 },
            ibc: ibc_next,
            decimated: count,
        });
    }
    let b = st.bits();
    finish(code, y, b, iters, capped, traj)
}

/// Encodes `b` and measures the error against the original `y`.
pub fn finish(
    code: &LdgmCode,
    y: &[f64],
    b: Vec<u8>,
    iterations: usize,
    capped: bool,
    trajectory: Trajectory,
) -> Result<QuantResult> {
    let (c, u) = encode(code, &b)?;
    let m = (1u64 << code.k) as f64;
    let z: Vec<f64> = y.iter().zip(&u).map(|(&yj, &uj)| wrap_interval(yj - uj as f64, m)).collect();
    let mse = z.iter().map(|v| v * v).sum::<f64>() / z.len() as f64;
    Ok(QuantResult { b, c, u, z, mse, iterations, capped, trajectory })
}

/// Uniform source block over `[0, m)^n` for block `index` of a run.
pub fn source_block(n: usize, k: u32, seed: u64, index: u64) -> Vec<f64> {
    let mut r = rng::stream(rng::block_seed(seed, index), streams::SOURCE);
    let m = (1u64 << k) as f64;
    (0..n).map(|_| r.gen::<f64>() * m).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{sample_code, DegreeDistribution};

    #[test]
    fn uniform_priors_stay_erased() {
        let code = sample_code(&DegreeDistribution::regular(4, 2), 64, 3).unwrap();
        let mut st = BpState::with_c_priors(&code, vec![0.0; 64]).unwrap();
        let ibc = st.iterate();
        assert_eq!(ibc, 0.0);
        assert!(st.l_ext.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn greedy_picks_most_certain() {
        let code = sample_code(&DegreeDistribution::regular(4, 2), 16, 1).unwrap();
        let mut st = BpState::with_c_priors(&code, vec![0.0; 16]).unwrap();
        st.l_ext = vec![0.0; code.n_b];
        st.l_ext[2] = 0.4;
        st.l_ext[5] = -2.0;
        assert_eq!(decimate_greedy(&st).unwrap(), (5, 1));
        st.l_ext[3] = 2.0;
        assert_eq!(decimate_greedy(&st).unwrap(), (3, 0));
    }

    #[test]
    fn pace_controller_throttle_first_iteration() {
        let mut c = PaceController::new(PaceSchedule::uniform(10), true);
        assert!(c.done(0.0, 1e-9));
        c.finish(0.0, 0.5);
        assert!((c.delta_max - 0.625).abs() < 1e-15);
    }

    #[test]
    fn recovery_fixed_point() {
        let rec = Recovery::new(4.0).unwrap();
        let table = rec.table(&rec.true_g());
        for &q in &[0.0, 0.2, 0.5, 0.9] {
            for i in 0..40 {
                let y = -0.99 + 1.98 * i as f64 / 39.0;
                assert!((Recovery::apply(&table, y, q) - y).abs() < 2e-3, "{y} {q}");
            }
        }
    }
}
