//! EXIT analysis under the erasure approximation, and LP degree design.
//!
//! With `I_cb = I_c f(x)` at `x = I_bc`, the EBP curve is
//! `I_b(x) = 1 - (1-x)/(1-I_cb)^{d_b-1}`, `I_b^ext(x) = 1 - (1-I_cb)^{d_b}`.
//! It is monotone iff `I_c s(x) <= 1` for all `x`, where
//! `s(x) = f(x) + (d_b-1)(1-x) f'(x)`, so the design problem
//! `min max_x s(x)` over the edge fractions is a linear program.

use serde::{Deserialize, Serialize};

use crate::bounds::{entropy_ht, SourceModel, QUAD_TOL};
use crate::codes::{DegreeDistribution, GrayMap};
use crate::error::{Error, Result};
use crate::lp::{lp_solve, LpProblem, RowKind};
use crate::numeric::{h2, integrate, integrate_pieces};

/// Number of x rows in the design LPs.
pub const LP_GRID: usize = 1000;
/// Rows with `x` above this are dropped from weighted (corrected) problems.
pub const WEIGHTED_X_MAX: f64 = 0.995;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EbpCurve {
    pub x: Vec<f64>,
    pub ib: Vec<f64>,
    pub ibext: Vec<f64>,
}

/// Samples the EA EBP curve of a binary distribution at `npts` uniform x.
pub fn ebp_curve(dist: &DegreeDistribution, ic: f64, npts: usize) -> EbpCurve {
    let db = dist.d_b as i32;
    let mut c = EbpCurve { x: Vec::new(), ib: Vec::new(), ibext: Vec::new() };
    for i in 0..npts {
        let x = i as f64 / (npts - 1) as f64;
        let y = 1.0 - ic * dist.poly(x);
        c.x.push(x);
        c.ib.push(1.0 - (1.0 - x) / y.powi(db - 1));
        c.ibext.push(1.0 - y.powi(db));
    }
    c
}

/// `s(x) = f(x) + (d_b - 1)(1 - x) f'(x)` for a binary distribution.
pub fn s_of_x(dist: &DegreeDistribution, x: f64) -> f64 {
    dist.poly(x) + (dist.d_b as f64 - 1.0) * (1.0 - x) * dist.poly_deriv(x)
}

/// Maximizes `s` over a fine grid followed by golden-section refinement.
fn max_on_unit<F: Fn(f64) -> f64>(s: F) -> (f64, f64) {
    let n = 20_000;
    let mut best = (0.0, s(0.0));
    for i in 1..=n {
        let x = i as f64 / n as f64;
        let v = s(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    let h = 1.0 / n as f64;
    let (mut a, mut b) = ((best.0 - h).max(0.0), (best.0 + h).min(1.0));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if s(c) > s(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let x = 0.5 * (a + b);
    let v = s(x);
    if v > best.1 {
        (x, v)
    } else {
        best
    }
}

/// EA monotonicity threshold `I_c^thr = 1 / max_x s(x)` (binary, `v_1 = 0`).
pub fn ea_threshold(dist: &DegreeDistribution) -> f64 {
    1.0 / max_on_unit(|x| s_of_x(dist, x)).1
}

/// Whether the EA EBP curve at `ic` is non-negative and non-decreasing.
pub fn ea_monotone(dist: &DegreeDistribution, ic: f64) -> bool {
    let c = ebp_curve(dist, ic, 20_001);
    c.ib[0] >= -1e-12 && c.ib.windows(2).all(|w| w[1] >= w[0] - 1e-12)
}

/// Component MIs of the `2^K`-ary channel seen by the bits of one symbol.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaryChannel {
    pub k: u32,
    pub t: f64,
    /// `I_c^{k'}` for `k' = 0..K-1` (number of known other bits).
    pub ic_k: Vec<f64>,
    /// Per-bit average `I_c = (1/K) sum_k' I_c^{k'}`.
    pub ic: f64,
    /// `gamma_k' = I_c^{k'} / I_c`.
    pub gamma: Vec<f64>,
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Computes `H(c_k | c_S, y)` averaged per `|S|` by quadrature over `y`.
pub fn mary_channel(k: u32, t: f64) -> Result<MaryChannel> {
    if !(1..=3).contains(&k) {
        return Err(Error::Unsupported(format!("mary_channel needs K in 1..=3, got {k}")));
    }
    let model = SourceModel::new(k, t)?;
    let m = model.m();
    let gray = GrayMap::new(k);
    let labels: Vec<u32> = (0..m as u32).map(|u| gray.inv(u)).collect();
    let breaks: Vec<f64> = (0..=m).map(|v| v as f64).collect();
    let mut h_sum = vec![0.0; k as usize];
    let mut h_cnt = vec![0usize; k as usize];
    for bit in 0..k {
        let others: Vec<u32> = (0..k).filter(|&b| b != bit).collect();
        for mask in 0u32..(1 << others.len()) {
            let s: Vec<u32> = others.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|p| *p.1).collect();
            let integrand = |y: f64| {
                let mut post = vec![0.0; m];
                crate::bounds::prior_into(y, &model, &mut post);
                // Group by the pattern on S, then split on c_k.
                let mut groups = vec![[0.0f64; 2]; 1 << s.len()];
                for (u, &lab) in labels.iter().enumerate() {
                    let key = s.iter().enumerate().fold(0usize, |acc, (i, &b)| acc | (((lab >> b) & 1) as usize) << i);
                    groups[key][((lab >> bit) & 1) as usize] += post[u];
                }
                groups
                    .iter()
                    .map(|g| {
                        let tot = g[0] + g[1];
                        if tot > 0.0 {
                            tot * h2(g[0] / tot)
                        } else {
                            0.0
                        }
                    })
                    .sum::<f64>()
                    / m as f64
            };
            let h = integrate_pieces(integrand, &breaks, QUAD_TOL);
            h_sum[s.len()] += h;
            h_cnt[s.len()] += 1;
        }
    }
    let ic_k: Vec<f64> = h_sum.iter().zip(&h_cnt).map(|(h, c)| 1.0 - h / *c as f64).collect();
    let ic = ic_k.iter().sum::<f64>() / k as f64;
    let gamma = ic_k.iter().map(|v| v / ic).collect();
    Ok(MaryChannel { k, t, ic_k, ic, gamma })
}

/// Per-bit MI `I_c = 1 - H_t / K`.
pub fn channel_ic(k: u32, t: f64) -> f64 {
    1.0 - entropy_ht(&SourceModel { k, t }) / k as f64
}

/// `alpha_{k',d}(x) = C(K-1,k') x^{d(k'+1)-1} (1-x^d)^{K-k'-1}` and its derivative.
pub fn alpha(k: u32, kp: u32, d: usize, x: f64) -> (f64, f64) {
    let c = binom(k - 1, kp);
    let a = (d as i32) * (kp as i32 + 1) - 1;
    let b = (k - kp - 1) as i32;
    let xd = x.powi(d as i32);
    let one_m = 1.0 - xd;
    let val = c * x.powi(a) * one_m.powi(b);
    let mut der = 0.0;
    if a > 0 {
        der += a as f64 * x.powi(a - 1) * one_m.powi(b);
    }
    if b > 0 {
        der -= b as f64 * d as f64 * x.powi(d as i32 - 1) * x.powi(a) * one_m.powi(b - 1);
    }
    (val, c * der)
}

/// `I_cb(x) / I_c` for an m-ary distribution with component weights `gamma`
/// (`f(x) = sum_k' gamma_k' sum_d v_d alpha_{k',d}(x)`), and its derivative.
pub fn mary_f(dist: &DegreeDistribution, gamma: &[f64], x: f64) -> (f64, f64) {
    let mut f = 0.0;
    let mut fp = 0.0;
    for (kp, &g) in gamma.iter().enumerate() {
        for &(d, v) in &dist.v {
            let (a, ap) = alpha(dist.k, kp as u32, d, x);
            f += g * v * a;
            fp += g * v * ap;
        }
    }
    (f, fp)
}

/// `s(x)` in gamma form: `f(x) + (d_b-1)(1-x) f'(x)` with the m-ary `f`.
pub fn s_mary(dist: &DegreeDistribution, gamma: &[f64], x: f64) -> f64 {
    let (f, fp) = mary_f(dist, gamma, x);
    f + (dist.d_b as f64 - 1.0) * (1.0 - x) * fp
}

/// EA threshold of an m-ary distribution with frozen `gamma`.
pub fn ea_threshold_mary(dist: &DegreeDistribution, gamma: &[f64]) -> f64 {
    1.0 / max_on_unit(|x| s_mary(dist, gamma, x)).1
}

/// The closed-form pace `x(l) = 1 - (1 - l/L)^{2(d_b-1)/d_b}` seen from the
/// design side: `p+(x) = x(l(x) + 1)` and `q(x) = (1 - p+)/p+'`.
#[derive(Clone, Copy, Debug)]
pub struct PaceShape {
    pub d_b: usize,
    pub l: f64,
}

impl PaceShape {
    fn e(&self) -> f64 {
        2.0 * (self.d_b as f64 - 1.0) / self.d_b as f64
    }

    fn u(&self, x: f64) -> f64 {
        (1.0 - x).max(0.0).powf(1.0 / self.e()) - 1.0 / self.l
    }

    pub fn p_plus(&self, x: f64) -> f64 {
        1.0 - self.u(x).max(0.0).powf(self.e())
    }

    pub fn q(&self, x: f64) -> f64 {
        let u = self.u(x);
        if u <= 0.0 {
            0.0
        } else {
            u * (1.0 - x).powf(1.0 - 1.0 / self.e())
        }
    }

    /// `1 - g^{-1}(1 - p+(0))` for a given inverse `g^{-1}`.
    pub fn v1_factor(&self, g_inv: impl Fn(f64) -> f64) -> f64 {
        1.0 - g_inv(1.0 - self.p_plus(0.0))
    }

    /// EA form of [`Self::v1_factor`] with `g(y) = y^{d_b-1}`.
    pub fn v1_factor_ea(&self) -> f64 {
        let db = self.d_b as f64;
        self.v1_factor(|w| w.powf(1.0 / (db - 1.0)))
    }
}

/// Linear rows of the pacing-aware problem: the factor replacing `(1-x)` and
/// the bound `v_1 <= s_max * v1_factor / gamma_0`.
#[derive(Clone, Copy, Debug)]
pub struct PacingRows {
    pub shape: PaceShape,
    pub v1_factor: f64,
}

/// Builds [`PacingRows`] for pace `L` from EA forms (`g_inv = None`) or DE curves.
pub fn pacing_aware_constraints(d_b: usize, l: f64, g_inv: Option<&dyn Fn(f64) -> f64>) -> PacingRows {
    let shape = PaceShape { d_b, l };
    let v1_factor = match g_inv {
        Some(g) => shape.v1_factor(g),
        None => shape.v1_factor_ea(),
    };
    PacingRows { shape, v1_factor }
}

/// A degree-design LP: minimize `s_max` subject to
/// `r(x) sum_k' w_k' s_k'(x) <= s_max` on the x grid, normalization and rate rows.
pub struct Design<'a> {
    pub k: u32,
    pub rate: f64,
    pub d_b: usize,
    pub degrees: Vec<usize>,
    /// Component weights `w_k'` (gamma, or `I_c^{k'}` in feasibility form).
    pub weights: Vec<f64>,
    /// Correction factor; `None` drops the row.
    pub r: Option<&'a dyn Fn(f64) -> Option<f64>>,
    pub pacing: Option<PacingRows>,
}

impl<'a> Design<'a> {
    pub fn binary(rate: f64, d_b: usize, degrees: Vec<usize>) -> Self {
        Self { k: 1, rate, d_b, degrees, weights: vec![1.0], r: None, pacing: None }
    }

    fn q(&self, x: f64) -> f64 {
        match &self.pacing {
            Some(p) => p.shape.q(x),
            None => 1.0 - x,
        }
    }

    /// Coefficient of `v_d` in the row at `x` (without `r`).
    pub fn coef(&self, d: usize, x: f64) -> f64 {
        let q = self.q(x);
        let db1 = self.d_b as f64 - 1.0;
        self.weights
            .iter()
            .enumerate()
            .map(|(kp, &w)| {
                let (a, ap) = alpha(self.k, kp as u32, d, x);
                w * (a + q * db1 * ap)
            })
            .sum()
    }

    /// Solves the LP; returns the distribution and the optimal `s_max`.
    pub fn solve(&self) -> Result<(DegreeDistribution, f64)> {
        let mut degrees = self.degrees.clone();
        if self.pacing.is_some() && !degrees.contains(&1) {
            degrees.insert(0, 1);
        }
        degrees.retain(|&d| d != 1 || self.pacing.is_some());
        let nd = degrees.len();
        let mut lp = LpProblem::new(nd + 1);
        lp.objective[nd] = 1.0;
        let weighted = self.r.is_some();
        for i in 0..LP_GRID {
            let x = i as f64 / (LP_GRID - 1) as f64;
            let r = match self.r {
                Some(rf) => {
                    if x > WEIGHTED_X_MAX {
                        continue;
                    }
                    match rf(x) {
                        Some(v) => v,
                        None => continue,
                    }
                }
                None => 1.0,
            };
            let mut row: Vec<f64> = degrees.iter().map(|&d| r * self.coef(d, x)).collect();
            row.push(-1.0);
            lp.add_row(row, RowKind::Le, 0.0);
        }
        let _ = weighted;
        let mut ones = vec![1.0; nd];
        ones.push(0.0);
        lp.add_row(ones, RowKind::Eq, 1.0);
        let mut inv: Vec<f64> = degrees.iter().map(|&d| 1.0 / d as f64).collect();
        inv.push(0.0);
        lp.add_row(inv, RowKind::Eq, self.k as f64 / (self.rate * self.d_b as f64));
        if let Some(p) = &self.pacing {
            let mut row = vec![0.0; nd + 1];
            row[0] = self.weights[0];
            row[nd] = -p.v1_factor;
            lp.add_row(row, RowKind::Le, 0.0);
        }
        let sol = lp_solve(&lp)?;
        let v: Vec<(usize, f64)> = degrees.iter().zip(&sol.x).filter(|p| *p.1 > 1e-12).map(|(&d, &w)| (d, w)).collect();
        let total: f64 = v.iter().map(|p| p.1).sum();
        let v = v.into_iter().map(|(d, w)| (d, w / total)).collect();
        let dist = DegreeDistribution { k: self.k, rate: self.rate, d_b: self.d_b, v, threshold: None };
        Ok((dist, sol.x[nd]))
    }
}

/// Maximizes the EA threshold of a binary code: returns the distribution and
/// `I_c^thr = 1 / s_max` (the LP value, with `r` applied when given).
pub fn optimize_binary_ea(
    rate: f64,
    d_b: usize,
    degrees: &[usize],
    r: Option<&dyn Fn(f64) -> Option<f64>>,
) -> Result<(DegreeDistribution, f64)> {
    let mut design = Design::binary(rate, d_b, degrees.to_vec());
    design.r = r;
    let (mut dist, smax) = design.solve()?;
    let thr = 1.0 / smax;
    dist.threshold = Some(thr);
    Ok((dist, thr))
}

/// Result of an m-ary design.
#[derive(Clone, Debug)]
pub struct MaryDesign {
    pub dist: DegreeDistribution,
    pub t_thr: f64,
    pub channel: MaryChannel,
}

/// Maximizes the EA threshold of a `2^K`-ary code by bisection on `t`.
///
/// At each `t` the LP `min lambda` s.t. `sum_k' I_c^{k'}(t) s_k'(x) <= lambda`
/// is solved; the threshold is the largest `t` with `lambda <= 1`.
pub fn optimize_mary_ea(rate: f64, d_b: usize, k: u32, degrees: &[usize], pacing_l: Option<f64>) -> Result<MaryDesign> {
    let solve_at = |t: f64| -> Result<(DegreeDistribution, f64, MaryChannel)> {
        let ch = mary_channel(k, t)?;
        let pacing = pacing_l.map(|l| pacing_aware_constraints(d_b, l, None));
        let design = Design { k, rate, d_b, degrees: degrees.to_vec(), weights: ch.ic_k.clone(), r: None, pacing };
        let (dist, lambda) = design.solve()?;
        Ok((dist, lambda, ch))
    };
    // Without pacing rows t0(R) is infeasible; with them the bracket may
    // have to grow past it.
    let mut hi = crate::bounds::solve_t0(rate, k)?;
    let mut guard = 0;
    while solve_at(hi)?.1 <= 1.0 {
        hi *= 1.25;
        guard += 1;
        if guard > 30 {
            return Err(Error::Infeasible("no infeasible temperature found".into()));
        }
    }
    let mut lo = hi * 0.8;
    let mut best = solve_at(lo)?;
    guard = 0;
    while best.1 > 1.0 {
        hi = lo;
        lo *= 0.6;
        best = solve_at(lo)?;
        guard += 1;
        if guard > 30 {
            return Err(Error::Infeasible("no feasible temperature found".into()));
        }
    }
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        let r = solve_at(mid)?;
        if r.1 <= 1.0 {
            lo = mid;
            best = r;
        } else {
            hi = mid;
        }
    }
    let (mut dist, _, channel) = best;
    dist.threshold = Some(channel.ic);
    Ok(MaryDesign { dist, t_thr: lo, channel })
}

/// Area below the EBP curve given `I_cb(x)` and its derivative:
/// `int_0^1 (1 - I_b) dI_b^ext + I_b^ext(0)`.
pub fn ebp_area_from(d_b: usize, icb: impl Fn(f64) -> (f64, f64)) -> f64 {
    let db = d_b as i32;
    let lower = 1.0 - (1.0 - icb(0.0).0).powi(db);
    let upper = integrate(
        |x| {
            let (c, cp) = icb(x);
            let y = 1.0 - c;
            let ib = 1.0 - (1.0 - x) / y.powi(db - 1);
            let dext = db as f64 * y.powi(db - 1) * cp;
            (1.0 - ib) * dext
        },
        0.0,
        1.0,
        1e-10,
    );
    upper + lower
}

/// EBP area of a binary distribution at `ic` (EA curves).
pub fn ebp_area(dist: &DegreeDistribution, ic: f64) -> f64 {
    ebp_area_from(dist.d_b, |x| (ic * dist.poly(x), ic * dist.poly_deriv(x)))
}

/// EBP area of an m-ary distribution (EA curves with component MIs).
pub fn ebp_area_mary(dist: &DegreeDistribution, ch: &MaryChannel) -> f64 {
    ebp_area_from(dist.d_b, |x| {
        let (f, fp) = mary_f(dist, &ch.gamma, x);
        (ch.ic * f, ch.ic * fp)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regular_thresholds() {
        let d42 = DegreeDistribution::regular(4, 2);
        assert!((ea_threshold(&d42) - 1.0 / 3.0).abs() < 1e-9);
        let d53 = DegreeDistribution::regular(5, 3);
        assert!((ea_threshold(&d53) - 0.4375).abs() < 1e-9);
        assert!((s_of_x(&d53, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn alpha_sums_to_binary_form() {
        for k in 1..=3 {
            for d in 1..=5 {
                for &x in &[0.0, 0.3, 0.77, 1.0] {
                    let s: f64 = (0..k).map(|kp| alpha(k, kp, d, x).0).sum();
                    assert!((s - x.powi(d as i32 - 1)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn pace_shape_limits() {
        let p = PaceShape { d_b: 12, l: 1e9 };
        for &x in &[0.0, 0.3, 0.9] {
            assert!((p.q(x) - (1.0 - x)).abs() < 1e-6);
        }
        assert!(p.v1_factor_ea() < 1e-8);
        let p = PaceShape { d_b: 12, l: 100.0 };
        assert!(p.q(0.0) > 0.0 && p.q(0.0).is_finite());
    }
}
