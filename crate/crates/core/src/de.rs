//! Quantized density evolution, EXIT curve extraction and DE-refined design.
//!
//! The reference codeword is all-zero, so `z = y` is distributed as `p_z` and
//! every density describes L-values of correct-bit-0 messages. Binary densities
//! are symmetric and use the magnitude-domain `⊕`; the 4-ary case uses the
//! general one.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bounds::{solve_t0, SourceModel};
use crate::codes::{DegreeDistribution, GrayMap};
use crate::error::{Error, Result};
use crate::exit_ea::{self, mary_channel, Design, LP_GRID};
use crate::messages::{
    density_cn_combine_symmetric, density_cn_combine_with, density_vn_power, Binning, BoxplusTable, QuantizedDensity,
};
use crate::numeric::{bisect, interp, interp_uniform, isotonic_increasing, Pchip};
use crate::pacing::ExitModel;

/// Masses below this are dropped after each `⊕` so sparse densities stay sparse.
const PRUNE: f64 = 1e-17;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DeConfig {
    /// Number of `I_b` steps between 0 and 1.
    pub steps: usize,
    /// Fixed point reached when the `I_bc` change drops below this.
    pub tol: f64,
    /// Iteration cap per `I_b` step.
    pub max_iter: usize,
    pub binning: Binning,
    /// y bins over `[0, m)` for the 4-ary u-node table.
    pub y_bins: usize,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self { steps: 512, tol: 1e-7, max_iter: 2000, binning: Binning::DEFAULT, y_bins: 256 }
    }
}

impl DeConfig {
    /// A slow ramp for curve extraction: densities stay near fixed points
    /// without iterating each step to convergence.
    pub fn extraction() -> Self {
        Self { steps: 512, tol: 1e-6, max_iter: 2, ..Self::default() }
    }
}

/// MIs seen in one DE iteration.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DeSample {
    pub ib: f64,
    /// `I_bc` fed to the c-nodes.
    pub x: f64,
    pub icb: f64,
    /// `1 - MI` of the sum of `d_b - 1` c-to-b messages.
    pub g: f64,
    /// `1 - MI` of the sum of `d_b` c-to-b messages.
    pub h: f64,
    /// `I_bc` produced by the b-nodes.
    pub ibc_next: f64,
}

/// State at the end of one `I_b` step.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DePoint {
    pub ib: f64,
    pub ibc: f64,
    pub icb: f64,
    pub ibext: f64,
    pub iters: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeSweep {
    pub k: u32,
    pub t: f64,
    /// Per-bit `I_c` measured from the prior densities.
    pub ic: f64,
    pub direction: Direction,
    pub config: DeConfig,
    pub points: Vec<DePoint>,
    pub samples: Vec<DeSample>,
}

impl DeSweep {
    pub fn unconverged(&self) -> usize {
        self.points.iter().filter(|p| !p.converged).count()
    }
}

/// The 4-ary u-node: output L-value of bit `k` for each quantized `y` and
/// incoming L-value of the other bit.
pub struct UnodeTable {
    pub binning: Binning,
    /// Probability of each y bin under the reference.
    pub weight: Vec<f64>,
    /// `[bit][y][j]`, `j` over finite bins then `+inf`, `-inf`.
    out: Vec<Vec<Vec<f64>>>,
}

impl UnodeTable {
    pub fn new(t: f64, binning: Binning, y_bins: usize) -> Result<Self> {
        let model = SourceModel::new(2, t)?;
        let gray = GrayMap::new(2);
        let m = 4.0;
        let dy = m / y_bins as f64;
        let nl = binning.bins();
        let mut weight = Vec::with_capacity(y_bins);
        let mut out = vec![vec![vec![0.0; nl + 2]; y_bins]; 2];
        let sub = 8;
        for iy in 0..y_bins {
            let yc = (iy as f64 + 0.5) * dy;
            let w: f64 = (0..sub)
                .map(|s| model.pdf(model.wrap(iy as f64 * dy + (s as f64 + 0.5) * dy / sub as f64)))
                .sum::<f64>()
                * dy
                / sub as f64;
            weight.push(w);
            // p[a][b]: label probability with bit k = a and other bit = b.
            let mut lab = [0.0; 4];
            crate::bounds::prior_into(yc, &model, &mut lab);
            for (k, table) in out.iter_mut().enumerate() {
                let mut p = [[0.0f64; 2]; 2];
                for (u, &pu) in lab.iter().enumerate() {
                    let bits = gray.inv(u as u32) as usize;
                    p[(bits >> k) & 1][(bits >> (1 - k)) & 1] += pu;
                }
                let row = &mut table[iy];
                for (j, slot) in row.iter_mut().enumerate() {
                    let (m0, m1) = if j < nl {
                        let l = binning.l_of(j);
                        let m0 = 1.0 / (1.0 + (-l).exp());
                        (m0, 1.0 - m0)
                    } else if j == nl {
                        (1.0, 0.0)
                    } else {
                        (0.0, 1.0)
                    };
                    let num = p[0][0] * m0 + p[0][1] * m1;
                    let den = p[1][0] * m0 + p[1][1] * m1;
                    *slot = if num <= 0.0 {
                        f64::NEG_INFINITY
                    } else if den <= 0.0 {
                        f64::INFINITY
                    } else {
                        (num / den).ln()
                    };
                }
            }
        }
        let tot: f64 = weight.iter().sum();
        weight.iter_mut().for_each(|w| *w /= tot);
        Ok(Self { binning, weight, out })
    }
}

/// u-to-c density for bit `bit` given the density of the other bit's c-to-u
/// message.
pub fn de_unode_combine(table: &UnodeTable, bit: usize, incoming: &QuantizedDensity) -> Result<QuantizedDensity> {
    if bit > 1 {
        return Err(Error::Unsupported("the u-node table covers K = 2 only".into()));
    }
    let nl = table.binning.bins();
    let mut mass: Vec<(usize, f64)> =
        incoming.mass.iter().enumerate().filter(|p| *p.1 > 0.0).map(|(j, &m)| (j, m)).collect();
    if incoming.sat_pos > 0.0 {
        mass.push((nl, incoming.sat_pos));
    }
    if incoming.sat_neg > 0.0 {
        mass.push((nl + 1, incoming.sat_neg));
    }
    let mut out = QuantizedDensity::zeros(table.binning);
    for (iy, &w) in table.weight.iter().enumerate() {
        let row = &table.out[bit][iy];
        for &(j, m) in &mass {
            out.add_point(row[j], w * m);
        }
    }
    Ok(out)
}

enum Prior {
    Binary(QuantizedDensity),
    Quaternary(UnodeTable),
}

/// Density-evolution engine for one `(dist, t)`.
pub struct DeEngine {
    pub dist: DegreeDistribution,
    pub t: f64,
    binning: Binning,
    table: Arc<BoxplusTable>,
    prior: Prior,
}

fn prune(d: &mut QuantizedDensity) {
    for m in d.mass.iter_mut() {
        if *m < PRUNE {
            *m = 0.0;
        }
    }
}

/// Density of the binary c-node prior L-value `t(1 - 2|z|)`, `z ~ p_z`.
pub fn binary_prior_density(t: f64, binning: Binning) -> Result<QuantizedDensity> {
    let model = SourceModel::new(1, t)?;
    let n = 1 << 17;
    let dz = 2.0 / n as f64;
    let mut d = QuantizedDensity::zeros(binning);
    for i in 0..n {
        let z = -1.0 + (i as f64 + 0.5) * dz;
        d.add_point(t * (1.0 - 2.0 * z.abs()), model.pdf(z) * dz);
    }
    d.normalize();
    Ok(d)
}

impl DeEngine {
    pub fn new(dist: &DegreeDistribution, t: f64, config: &DeConfig) -> Result<Self> {
        let binning = config.binning;
        let prior = match dist.k {
            1 => Prior::Binary(binary_prior_density(t, binning)?),
            2 => Prior::Quaternary(UnodeTable::new(t, binning, config.y_bins)?),
            k => return Err(Error::Unsupported(format!("density evolution needs K <= 2, got {k}"))),
        };
        Ok(Self { dist: dist.clone(), t, binning, table: BoxplusTable::shared(binning), prior })
    }

    /// Engine with an arbitrary binary prior density (used for EA checks).
    pub fn with_prior(dist: &DegreeDistribution, prior: QuantizedDensity) -> Self {
        let binning = prior.binning;
        Self {
            dist: dist.clone(),
            t: f64::NAN,
            binning,
            table: BoxplusTable::shared(binning),
            prior: Prior::Binary(prior),
        }
    }

    fn cn(&self, a: &QuantizedDensity, b: &QuantizedDensity) -> QuantizedDensity {
        let mut d = match self.prior {
            Prior::Binary(_) => density_cn_combine_symmetric(&self.table, a, b),
            Prior::Quaternary(_) => density_cn_combine_with(&self.table, a, b),
        }
        .expect("same binning");
        prune(&mut d);
        d
    }

    /// Per-bit `I_c` of the prior.
    pub fn ic(&self) -> f64 {
        match &self.prior {
            Prior::Binary(p) => p.mi(),
            Prior::Quaternary(tab) => {
                let star = QuantizedDensity::star(self.binning);
                let sure = QuantizedDensity::erasure(self.binning, 1.0);
                let a: f64 = (0..2).map(|k| de_unode_combine(tab, k, &star).unwrap().mi()).sum();
                let b: f64 = (0..2).map(|k| de_unode_combine(tab, k, &sure).unwrap().mi()).sum();
                (a + b) / 4.0
            }
        }
    }

    /// c-to-b density from the b-to-c density.
    ///
    /// The `⊕`-powers of the b-to-c density needed by the degree classes are
    /// reached through binary powers, so the cost grows with the number of
    /// classes rather than the largest degree.
    pub fn c_step(&self, bc: &QuantizedDensity) -> QuantizedDensity {
        let quaternary = matches!(self.prior, Prior::Quaternary(_));
        let mut binpow: Vec<QuantizedDensity> = vec![bc.clone()];
        let mut pow = QuantizedDensity::erasure(self.binning, 1.0);
        let mut have = 0usize;
        let mut parts: Vec<(f64, QuantizedDensity)> = Vec::new();
        for &(d, v) in &self.dist.v {
            // pow = ⊕ of d-1 b-to-c messages.
            let mut gap = d - 1 - have;
            let mut bit = 0;
            while gap > 0 {
                if bit == binpow.len() {
                    let sq = self.cn(&binpow[bit - 1], &binpow[bit - 1]);
                    binpow.push(sq);
                }
                if gap & 1 == 1 {
                    pow = self.cn(&pow, &binpow[bit]);
                }
                gap >>= 1;
                bit += 1;
            }
            have = d - 1;
            match &self.prior {
                Prior::Binary(p) => parts.push((v, self.cn(p, &pow))),
                Prior::Quaternary(tab) => {
                    let full = self.cn(&pow, bc);
                    for k in 0..2 {
                        let pk = de_unode_combine(tab, k, &full).expect("K = 2");
                        parts.push((0.5 * v, self.cn(&pk, &pow)));
                    }
                }
            }
        }
        debug_assert!(quaternary || parts.len() == self.dist.v.len());
        let refs: Vec<(f64, &QuantizedDensity)> = parts.iter().map(|(w, d)| (*w, d)).collect();
        let mut out = QuantizedDensity::mixture(&refs);
        out.normalize();
        out
    }

    /// b-to-c density, `g` and `h` from the c-to-b density at prior MI `ib`.
    pub fn b_step(&self, cb: &QuantizedDensity, ib: f64) -> (QuantizedDensity, f64, f64) {
        let db = self.dist.d_b;
        let ext = density_vn_power(cb, db - 1);
        let full = density_vn_power(cb, db);
        let g = 1.0 - ext.mi();
        let h = 1.0 - full.mi();
        let sure = QuantizedDensity::erasure(self.binning, 1.0);
        let mut bc = QuantizedDensity::mixture(&[(ib, &sure), (1.0 - ib, &ext)]);
        bc.normalize();
        (bc, g, h)
    }

    /// Up or down sweep over `I_b`.
    pub fn sweep(&self, direction: Direction, config: &DeConfig) -> DeSweep {
        let steps = config.steps.max(1);
        let mut bc = match direction {
            Direction::Up => QuantizedDensity::star(self.binning),
            Direction::Down => QuantizedDensity::erasure(self.binning, 1.0),
        };
        let mut points = Vec::with_capacity(steps + 1);
        let mut samples = Vec::new();
        for s in 0..=steps {
            let frac = s as f64 / steps as f64;
            let ib = match direction {
                Direction::Up => frac,
                Direction::Down => 1.0 - frac,
            };
            let mut x = bc.mi();
            let mut iters = 0;
            let mut converged = false;
            let mut last = (0.0, 0.0);
            while iters < config.max_iter {
                iters += 1;
                let cb = self.c_step(&bc);
                let icb = cb.mi();
                let (next, g, h) = self.b_step(&cb, ib);
                let xn = next.mi();
                samples.push(DeSample { ib, x, icb, g, h, ibc_next: xn });
                last = (icb, 1.0 - h);
                bc = next;
                let change = (xn - x).abs();
                x = xn;
                if change < config.tol {
                    converged = true;
                    break;
                }
            }
            points.push(DePoint { ib, ibc: x, icb: last.0, ibext: last.1, iters, converged });
        }
        DeSweep { k: self.dist.k, t: self.t, ic: self.ic(), direction, config: *config, points, samples }
    }
}

/// Runs one sweep of `dist` at temperature `t`.
pub fn de_sweep(dist: &DegreeDistribution, t: f64, direction: Direction, config: &DeConfig) -> Result<DeSweep> {
    Ok(DeEngine::new(dist, t, config)?.sweep(direction, config))
}

/// Largest `|I_bc^up - I_bc^down|` over shared `I_b` points.
pub fn hysteresis_gap(up: &DeSweep, down: &DeSweep) -> f64 {
    let mut gap: f64 = 0.0;
    for p in &up.points {
        if let Some(q) = down.points.iter().find(|q| (q.ib - p.ib).abs() < 1e-12) {
            gap = gap.max((p.ibc - q.ibc).abs());
        }
    }
    gap
}

/// Number of grid points in the extracted tables.
pub const FGH_GRID: usize = 1001;
/// Fewest samples accepted by [`extract_fgh`].
pub const MIN_SAMPLES: usize = 64;

/// `f`, `g`, `h` from DE data, on uniform grids with central-difference
/// derivatives. `f` is on `[0, 1]`, `g` and `h` on `[y_min, 1]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FghCurves {
    pub k: u32,
    pub t: f64,
    pub ic: f64,
    /// Component weights of the base channel (`[1]` for K = 1).
    pub gamma: Vec<f64>,
    pub f: Vec<f64>,
    pub f_prime: Vec<f64>,
    pub y_min: f64,
    pub g: Vec<f64>,
    pub g_prime: Vec<f64>,
    pub h: Vec<f64>,
    pub h_prime: Vec<f64>,
}

/// Isotonic fit of scattered `(key, value)` data, merged at equal keys, then
/// a monotone cubic through it tabulated on `[lo, hi]`. Returns the value and
/// derivative tables and the largest isotonic correction.
fn monotone_table(mut pts: Vec<(f64, f64)>, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>, f64) {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let fit = isotonic_increasing(&ys, &vec![1.0; ys.len()]);
    let worst = ys.iter().zip(&fit).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut xs: Vec<f64> = Vec::new();
    let mut vs: Vec<f64> = Vec::new();
    let mut cnt: Vec<f64> = Vec::new();
    for (p, &v) in pts.iter().zip(&fit) {
        match xs.last() {
            Some(&x) if p.0 - x < 1e-9 => {
                let k = vs.len() - 1;
                vs[k] += v;
                cnt[k] += 1.0;
            }
            _ => {
                xs.push(p.0);
                vs.push(v);
                cnt.push(1.0);
            }
        }
    }
    for (v, c) in vs.iter_mut().zip(&cnt) {
        *v /= c;
    }
    if xs.len() < 2 {
        xs = vec![lo, hi];
        vs = vec![vs[0], vs[0]];
    }
    let pc = Pchip::new(xs, vs);
    let (val, der): (Vec<f64>, Vec<f64>) =
        (0..FGH_GRID).map(|i| pc.eval(lo + (hi - lo) * i as f64 / (FGH_GRID - 1) as f64)).unzip();
    (val, der, worst)
}

/// Builds [`FghCurves`] from the per-iteration samples of a sweep.
///
/// Monotonicity violations of `f` or `h` larger than 1e-3 reject the data.
pub fn extract_fgh(sweep: &DeSweep, gamma: Vec<f64>) -> Result<FghCurves> {
    if sweep.samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!("{} DE samples", sweep.samples.len())));
    }
    let ic = sweep.ic;
    let mut fpts: Vec<(f64, f64)> = sweep.samples.iter().map(|s| (s.x, s.icb / ic)).collect();
    fpts.push((0.0, fpts.iter().filter(|p| p.0 < 1e-12).map(|p| p.1).next().unwrap_or(0.0)));
    let (f, f_prime, fw) = monotone_table(fpts, 0.0, 1.0);
    let y_min = sweep.samples.iter().map(|s| 1.0 - s.icb).fold(1.0, f64::min);
    let gpts: Vec<(f64, f64)> = sweep.samples.iter().map(|s| (1.0 - s.icb, s.g)).collect();
    let hpts: Vec<(f64, f64)> = sweep.samples.iter().map(|s| (1.0 - s.icb, s.h)).collect();
    let (g, g_prime, _) = monotone_table(gpts, y_min, 1.0);
    let (h, h_prime, hw) = monotone_table(hpts, y_min, 1.0);
    if fw > 1e-3 || hw > 1e-3 {
        return Err(Error::InvalidArgument(format!("non-monotone DE curves (f {fw:.2e}, h {hw:.2e})")));
    }
    Ok(FghCurves { k: sweep.k, t: sweep.t, ic, gamma, f, f_prime, y_min, g, g_prime, h, h_prime })
}

impl FghCurves {
    fn dy(&self) -> f64 {
        (1.0 - self.y_min) / (FGH_GRID - 1) as f64
    }

    fn fx(&self, tab: &[f64], x: f64) -> f64 {
        interp_uniform(0.0, 1.0 / (FGH_GRID - 1) as f64, tab, x)
    }

    fn fy(&self, tab: &[f64], y: f64) -> f64 {
        interp_uniform(self.y_min, self.dy(), tab, y)
    }

    /// `g^{-1}` on the tabulated range.
    pub fn g_inv(&self, v: f64) -> f64 {
        let ys: Vec<f64> = (0..FGH_GRID).map(|i| self.y_min + i as f64 * self.dy()).collect();
        interp(&self.g, &ys, v)
    }

    /// Largest `I_c` meeting `g/g' >= I_c (1-x) f'(x)` at `x`; `None` when the
    /// answer leaves the tabulated `y` range. Also returns the root count.
    pub fn ic_at(&self, x: f64) -> (Option<f64>, usize) {
        let f = self.f(x);
        let fp = self.f_prime(x);
        let i_max = if f > 0.0 { ((1.0 - self.y_min) / f).min(1.0) } else { 1.0 };
        let phi = |i: f64| {
            let y = 1.0 - i * f;
            let gp = self.g_prime(y);
            let lhs = if gp > 0.0 { self.g(y) / gp } else { f64::INFINITY };
            lhs - i * (1.0 - x) * fp
        };
        let n = 400;
        let mut roots = Vec::new();
        let mut prev = (0.0, phi(0.0));
        for j in 1..=n {
            let i = i_max * j as f64 / n as f64;
            let v = phi(i);
            if prev.1 >= 0.0 && v < 0.0 {
                roots.push(bisect(phi, prev.0, i, 1e-10, 200));
            }
            prev = (i, v);
        }
        (roots.last().copied(), roots.len())
    }

    /// `s^de(x) = 1 / I_c^de(x)`, or `None` where it cannot be computed.
    pub fn s_de(&self, x: f64) -> Option<f64> {
        self.ic_at(x).0.map(|i| 1.0 / i)
    }
}

impl ExitModel for FghCurves {
    fn f(&self, x: f64) -> f64 {
        self.fx(&self.f, x)
    }
    fn f_prime(&self, x: f64) -> f64 {
        self.fx(&self.f_prime, x)
    }
    fn g(&self, y: f64) -> f64 {
        self.fy(&self.g, y)
    }
    fn g_prime(&self, y: f64) -> f64 {
        self.fy(&self.g_prime, y)
    }
    fn h(&self, y: f64) -> f64 {
        self.fy(&self.h, y)
    }
    fn h_prime(&self, y: f64) -> f64 {
        self.fy(&self.h_prime, y)
    }
}

/// Monotonicity threshold from DE curves.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeThreshold {
    pub ic_thr: f64,
    /// Where the minimum of `I_c^de(x)` is reached.
    pub x_arg: f64,
    /// Grid points with more than one root.
    pub multi_root: usize,
    /// Grid points dropped for lack of data.
    pub dropped: usize,
}

/// `I_c^thr = min_x I_c^de(x)` over the LP grid.
pub fn mono_threshold_de(curves: &FghCurves) -> Result<DeThreshold> {
    let mut best = (f64::INFINITY, 0.0);
    let mut multi = 0;
    let mut dropped = 0;
    for i in 0..LP_GRID {
        let x = i as f64 / (LP_GRID - 1) as f64;
        match curves.ic_at(x) {
            (Some(v), n) => {
                if n > 1 {
                    multi += 1;
                }
                if v < best.0 {
                    best = (v, x);
                }
            }
            (None, _) => dropped += 1,
        }
    }
    if !best.0.is_finite() {
        return Err(Error::InsufficientData("no x admits a threshold".into()));
    }
    Ok(DeThreshold { ic_thr: best.0, x_arg: best.1, multi_root: multi, dropped })
}

/// Reference EA `s(x)` of `dist` with component weights `gamma`.
fn s_ref(dist: &DegreeDistribution, gamma: &[f64], x: f64) -> f64 {
    if dist.k == 1 {
        exit_ea::s_of_x(dist, x)
    } else {
        exit_ea::s_mary(dist, gamma, x)
    }
}

/// `r(x) = s^de(x) / s(x)` on the LP grid; `None` where undefined.
pub fn correction_factor(curves: &FghCurves, dist: &DegreeDistribution) -> Vec<Option<f64>> {
    (0..LP_GRID)
        .map(|i| {
            let x = i as f64 / (LP_GRID - 1) as f64;
            let s = s_ref(dist, &curves.gamma, x);
            curves.s_de(x).filter(|_| s > 0.0).map(|sd| sd / s)
        })
        .collect()
}

/// `t` with per-bit `I_c(t) = ic`.
pub fn t_for_ic(k: u32, ic: f64) -> Result<f64> {
    solve_t0(k as f64 * ic, k)
}

/// Per-bit channel weights `gamma_k'` at temperature `t` (`[1]` for binary codes).
pub fn gamma_at(k: u32, t: f64) -> Result<Vec<f64>> {
    if k == 1 {
        Ok(vec![1.0])
    } else {
        Ok(mary_channel(k, t)?.gamma)
    }
}

/// Sweeps `dist` at `t` and extracts its curves.
pub fn curves_for(dist: &DegreeDistribution, t: f64, config: &DeConfig) -> Result<FghCurves> {
    let sweep = de_sweep(dist, t, Direction::Up, config)?;
    extract_fgh(&sweep, gamma_at(dist.k, t)?)
}

/// One design round's record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefineRound {
    pub base_t: f64,
    /// DE threshold of the base code.
    pub base_thr: f64,
    /// LP prediction for the new code.
    pub predicted_thr: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Refined {
    pub dist: DegreeDistribution,
    pub rounds: Vec<RefineRound>,
    pub curves: FghCurves,
    /// DE threshold of the final code from its own curves.
    pub threshold: DeThreshold,
}

/// Iterates sweep, curve extraction, correction factor and the weighted LP.
///
/// With `pace_l`, the LP is the pacing-aware one, with `g^{-1}` from the curves.
pub fn optimize_de(
    base: &DegreeDistribution,
    degrees: &[usize],
    rounds: usize,
    pace_l: Option<f64>,
    config: &DeConfig,
) -> Result<Refined> {
    let k = base.k;
    let mut dist = base.clone();
    let mut ic = base.threshold.ok_or_else(|| Error::InvalidArgument("base distribution needs a threshold".into()))?;
    let mut log = Vec::new();
    for _ in 0..rounds {
        let t = t_for_ic(k, ic)?;
        let curves = curves_for(&dist, t, config)?;
        let base_thr = mono_threshold_de(&curves).map(|d| d.ic_thr).unwrap_or(f64::NAN);
        let r = correction_factor(&curves, &dist);
        let rf = |x: f64| r[((x * (LP_GRID - 1) as f64).round() as usize).min(LP_GRID - 1)];
        let g_inv = |v: f64| curves.g_inv(v);
        let pacing = pace_l.map(|l| exit_ea::pacing_aware_constraints(base.d_b, l, Some(&g_inv)));
        let design = Design {
            k,
            rate: base.rate,
            d_b: base.d_b,
            degrees: degrees.to_vec(),
            weights: curves.gamma.clone(),
            r: Some(&rf),
            pacing,
        };
        let (mut next, smax) = design.solve()?;
        let predicted = 1.0 / smax;
        next.threshold = Some(predicted);
        log.push(RefineRound { base_t: t, base_thr, predicted_thr: predicted });
        dist = next;
        ic = predicted;
    }
    let t = t_for_ic(k, ic)?;
    let curves = curves_for(&dist, t, config)?;
    let threshold = mono_threshold_de(&curves)?;
    if pace_l.is_none() {
        dist.threshold = Some(threshold.ic_thr);
    }
    Ok(Refined { dist, rounds: log, curves, threshold })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Binning {
        Binning { n_half: 128, l_max: 25.0 }
    }

    #[test]
    fn erasure_prior_matches_ea() {
        let dist = DegreeDistribution::regular(5, 3);
        let ic = 0.4;
        let eng = DeEngine::with_prior(&dist, QuantizedDensity::erasure(small(), ic));
        let bc = QuantizedDensity::erasure(small(), 0.3);
        let cb = eng.c_step(&bc);
        assert!((cb.mi() - ic * 0.3f64.powi(2)).abs() < 1e-12);
        let (next, g, _) = eng.b_step(&cb, 0.2);
        let y = 1.0 - cb.mi();
        assert!((g - y.powi(4)).abs() < 1e-12);
        assert!((next.mi() - (1.0 - 0.8 * y.powi(4))).abs() < 1e-12);
    }

    #[test]
    fn binary_prior_mi_is_ic() {
        let t = 4.0;
        let d = binary_prior_density(t, Binning::DEFAULT).unwrap();
        assert!((d.mi() - exit_ea::channel_ic(1, t)).abs() < 1e-3);
        assert!(d.symmetry_defect() < 1e-6);
    }
}
