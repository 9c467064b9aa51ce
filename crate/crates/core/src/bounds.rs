//! Random-coding analysis of the periodic codebook `U + mZ^n`.
//!
//! The quantization error of a random code at temperature `t` has density
//! `p_z(z) = exp(-t z^2) / Q(z mod 1)` on `I = [-m/2, m/2)`, where
//! `Q(y) = sum_a exp(-t (y + a)_I^2)` over `a = 0..m-1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{integrate, integrate_pieces};

/// Absolute tolerance handed to the adaptive quadrature.
pub const QUAD_TOL: f64 = 1e-11;

/// Alphabet size `m = 2^K` and temperature `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    pub k: u32,
    pub t: f64,
}

impl SourceModel {
    pub fn new(k: u32, t: f64) -> Result<Self> {
        if k == 0 || k > 8 {
            return Err(Error::InvalidArgument(format!("K must be in 1..=8, got {k}")));
        }
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("t must be finite and >= 0, got {t}")));
        }
        Ok(Self { k, t })
    }

    pub fn m(&self) -> usize {
        1usize << self.k
    }

    pub fn half_m(&self) -> f64 {
        self.m() as f64 / 2.0
    }

    /// Reduces `x` into `I = [-m/2, m/2)`.
    #[inline]
    pub fn wrap(&self, x: f64) -> f64 {
        wrap_interval(x, self.m() as f64)
    }

    /// `Q(y)` for `y` in `[0, 1)`; periodic with period 1.
    pub fn q_tilde(&self, y: f64) -> f64 {
        let y = y - y.floor();
        (0..self.m())
            .map(|a| {
                let z = self.wrap(y + a as f64);
                (-self.t * z * z).exp()
            })
            .sum()
    }

    /// Error density `p_z(z)` on `I`.
    pub fn pdf(&self, z: f64) -> f64 {
        (-self.t * z * z).exp() / self.q_tilde(z)
    }

    /// Natural log of `p_z(z)`.
    pub fn ln_pdf(&self, z: f64) -> f64 {
        -self.t * z * z - self.q_tilde(z).ln()
    }

    /// Integer breakpoints of `I`, where `p_z` has derivative kinks.
    pub fn breakpoints(&self) -> Vec<f64> {
        let h = self.m() as i64 / 2;
        (-h..=h).map(|v| v as f64).collect()
    }
}

/// Reduces `x` into `[-m/2, m/2)`.
#[inline]
pub fn wrap_interval(x: f64, m: f64) -> f64 {
    let h = 0.5 * m;
    let r = (x + h).rem_euclid(m) - h;
    if r >= h {
        r - m
    } else {
        r
    }
}

/// Entropy `H_t` of `p_z` in bits.
pub fn entropy_ht(model: &SourceModel) -> f64 {
    let nats = integrate_pieces(
        |z| {
            let lp = model.ln_pdf(z);
            -lp.exp() * lp
        },
        &model.breakpoints(),
        QUAD_TOL,
    );
    nats * std::f64::consts::LOG2_E
}

/// Second moment `P_t` of `p_z`.
pub fn power_pt(model: &SourceModel) -> f64 {
    integrate_pieces(|z| z * z * model.pdf(z), &model.breakpoints(), QUAD_TOL)
}

/// `P*_t = (m / 2^R)^2 / (2 pi e)`, the ideal second moment at rate `R`.
pub fn ideal_power(rate: f64, k: u32) -> f64 {
    let m = (1u64 << k) as f64;
    (m / rate.exp2()).powi(2) / (2.0 * std::f64::consts::PI * std::f64::consts::E)
}

/// `∫_0^1 ln Q(y) dy`.
pub fn mean_ln_q(model: &SourceModel) -> f64 {
    integrate(|y| model.q_tilde(y).ln(), 0.0, 1.0, QUAD_TOL)
}

/// Temperature `t0(R)` at which `H_t = K - R`, by bisection on `[1e-6, 256]`.
pub fn solve_t0(rate: f64, k: u32) -> Result<f64> {
    let kf = k as f64;
    if !(rate > 0.0 && rate < kf) {
        return Err(Error::InvalidArgument(format!("rate {rate} outside (0, {k})")));
    }
    let target = kf - rate;
    let h = |t: f64| entropy_ht(&SourceModel { k, t });
    let (mut lo, mut hi) = (1e-6_f64, 256.0_f64);
    if h(hi) > target {
        return Err(Error::InvalidArgument(format!("rate {rate} needs t beyond 256")));
    }
    if h(lo) < target {
        return Err(Error::InvalidArgument(format!("rate {rate} needs t below 1e-6")));
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let hm = h(mid);
        if (hm - target).abs() <= 1e-10 {
            break;
        }
        if hm > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// Random-coding loss `10 log10(P_t / P*_t)` at `t = t0(R)`, in dB.
pub fn random_coding_loss(rate: f64, k: u32) -> Result<f64> {
    Ok(random_coding_report(rate, k)?.loss_db)
}

/// Rate in `[lo, hi]` minimizing the random-coding loss, by golden-section
/// search (the loss is unimodal in `R` on the ranges of interest).
pub fn random_coding_minimum(k: u32, lo: f64, hi: f64, rtol: f64) -> Result<(f64, f64)> {
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!("empty rate range [{lo}, {hi}]")));
    }
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = random_coding_loss(x1, k)?;
    let mut f2 = random_coding_loss(x2, k)?;
    while b - a > rtol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = random_coding_loss(x1, k)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = random_coding_loss(x2, k)?;
        }
    }
    Ok(if f1 < f2 { (x1, f1) } else { (x2, f2) })
}

/// Everything the `bounds` command reports for one `(R, K)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RandomCodingReport {
    pub t0: f64,
    #[serde(rename = "Ht")]
    pub ht: f64,
    #[serde(rename = "Pt")]
    pub pt: f64,
    #[serde(rename = "Pstar")]
    pub pstar: f64,
    #[serde(rename = "loss_dB")]
    pub loss_db: f64,
}

pub fn random_coding_report(rate: f64, k: u32) -> Result<RandomCodingReport> {
    let t0 = solve_t0(rate, k)?;
    let model = SourceModel::new(k, t0)?;
    let ht = entropy_ht(&model);
    let pt = power_pt(&model);
    let pstar = ideal_power(rate, k);
    Ok(RandomCodingReport { t0, ht, pt, pstar, loss_db: 10.0 * (pt / pstar).log10() })
}

/// Prior over `u = 0..m-1` for one source sample: `p_z((y - u)_I)`, normalized.
pub fn prior_for_symbol(y: f64, model: &SourceModel) -> Vec<f64> {
    let mut out = vec![0.0; model.m()];
    prior_into(y, model, &mut out);
    out
}

/// In-place form of [`prior_for_symbol`].
pub fn prior_into(y: f64, model: &SourceModel, out: &mut [f64]) {
    let mut s = 0.0;
    for (u, o) in out.iter_mut().enumerate() {
        let z = model.wrap(y - u as f64);
        *o = (-model.t * z * z).exp();
        s += *o;
    }
    for o in out.iter_mut() {
        *o /= s;
    }
}

/// Normalized second moment of a quantizer with MSE `sigma2` at rate `R`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ShapingReport {
    pub rate: f64,
    pub sigma2: f64,
    /// `rho^{2/n} = 2^R / m`.
    pub density: f64,
    pub loss_db: f64,
}

impl ShapingReport {
    pub fn new(rate: f64, k: u32, sigma2: f64) -> Self {
        let density = rate.exp2() / (1u64 << k) as f64;
        Self { rate, sigma2, density, loss_db: shaping_loss_db(sigma2, rate, k) }
    }
}

/// `10 log10(sigma2 (2^R/m)^2 2 pi e)`.
pub fn shaping_loss_db(sigma2: f64, rate: f64, k: u32) -> f64 {
    10.0 * (sigma2 / ideal_power(rate, k)).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_lands_in_interval() {
        for &(x, m) in &[(1.0, 2.0), (-1.0, 2.0), (3.7, 4.0), (-2.0, 4.0), (2.0, 4.0), (0.999, 2.0)] {
            let r = wrap_interval(x, m);
            assert!(r >= -m / 2.0 && r < m / 2.0, "{x} {m} -> {r}");
            assert!(((x - r) / m - ((x - r) / m).round()).abs() < 1e-12);
        }
    }

    #[test]
    fn density_normalized() {
        for &(k, t) in &[(1, 4.0), (2, 2.0), (1, 0.0), (3, 1.0), (1, 100.0)] {
            let m = SourceModel::new(k, t).unwrap();
            let s = integrate_pieces(|z| m.pdf(z), &m.breakpoints(), 1e-12);
            assert!((s - 1.0).abs() < 1e-10, "k={k} t={t} mass={s}");
        }
    }

    #[test]
    fn zero_temperature_limits() {
        let m1 = SourceModel::new(1, 0.0).unwrap();
        assert!((entropy_ht(&m1) - 1.0).abs() < 1e-9);
        assert!((power_pt(&m1) - 1.0 / 3.0).abs() < 1e-10);
        let m2 = SourceModel::new(2, 0.0).unwrap();
        assert!((power_pt(&m2) - 4.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn prior_sums_to_one_and_symmetric_midpoint() {
        let m = SourceModel::new(1, 4.0).unwrap();
        let p = prior_for_symbol(0.5, &m);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        let m2 = SourceModel::new(2, 3.0).unwrap();
        let p = prior_for_symbol(1.3, &m2);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
