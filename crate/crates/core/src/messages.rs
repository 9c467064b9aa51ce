//! Binary messages and quantized L-value densities.
//!
//! A [`Message`] is a normalized pair `(mu0, mu1)`. `vn_combine` is the
//! componentwise product and `cn_combine` the GF(2) convolution
//! `(a0 b0 + a1 b1, a0 b1 + a1 b0)`.
//!
//! A [`QuantizedDensity`] holds the distribution of `L = ln(mu0/mu1)` on the
//! grid `L_i = (i - N) * delta`, `i = 0..=2N`, plus point masses at `+inf`
//! (sure 0) and `-inf` (sure 1). Sums of grid L-values stay on the grid, so
//! `⊙` is an exact linear convolution; `⊕` goes through a precomputed
//! magnitude table with a mass-preserving two-point split.

use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::h_of_l;

/// Signals `1⃗₀ ⊙ 1⃗₁`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Contradiction;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub p0: f64,
    pub p1: f64,
}

impl Message {
    pub const ZERO: Message = Message { p0: 1.0, p1: 0.0 };
    pub const ONE: Message = Message { p0: 0.0, p1: 1.0 };
    pub const STAR: Message = Message { p0: 0.5, p1: 0.5 };

    pub fn new(p0: f64, p1: f64) -> Self {
        let s = p0 + p1;
        Self { p0: p0 / s, p1: p1 / s }
    }

    pub fn sure(bit: u8) -> Self {
        if bit == 0 {
            Self::ZERO
        } else {
            Self::ONE
        }
    }

    pub fn from_l(l: f64) -> Self {
        if l == f64::INFINITY {
            return Self::ZERO;
        }
        if l == f64::NEG_INFINITY {
            return Self::ONE;
        }
        let p0 = 1.0 / (1.0 + (-l).exp());
        Self { p0, p1: 1.0 - p0 }
    }

    pub fn l_value(&self) -> f64 {
        (self.p0 / self.p1).ln()
    }

    /// Entropy in bits.
    pub fn entropy(&self) -> f64 {
        crate::numeric::h2(self.p0)
    }

    pub fn hard_decision(&self) -> u8 {
        u8::from(self.p1 > self.p0)
    }
}

/// `a ⊙ b`.
pub fn vn_combine(a: Message, b: Message) -> std::result::Result<Message, Contradiction> {
    let p0 = a.p0 * b.p0;
    let p1 = a.p1 * b.p1;
    let s = p0 + p1;
    if s == 0.0 {
        return Err(Contradiction);
    }
    Ok(Message { p0: p0 / s, p1: p1 / s })
}

/// `a ⊕ b`.
pub fn cn_combine(a: Message, b: Message) -> Message {
    Message { p0: a.p0 * b.p0 + a.p1 * b.p1, p1: a.p0 * b.p1 + a.p1 * b.p0 }
}

/// `⊕` of two L-values: `2 atanh(tanh(a/2) tanh(b/2))`.
#[inline]
pub fn boxplus(a: f64, b: f64) -> f64 {
    let d = (0.5 * a).tanh() * (0.5 * b).tanh();
    atanh2(d)
}

/// `2 atanh(d)` with `±1` mapped to `±inf`.
#[inline]
pub fn atanh2(d: f64) -> f64 {
    if d >= 1.0 {
        f64::INFINITY
    } else if d <= -1.0 {
        f64::NEG_INFINITY
    } else {
        ((1.0 + d) / (1.0 - d)).ln()
    }
}

/// Grid parameters shared by densities that may be combined.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    /// Number of positive grid points `N`; there are `2N + 1` finite bins.
    pub n_half: usize,
    pub l_max: f64,
}

impl Binning {
    pub const DEFAULT: Binning = Binning { n_half: 1024, l_max: 25.0 };

    pub fn delta(&self) -> f64 {
        self.l_max / self.n_half as f64
    }

    pub fn bins(&self) -> usize {
        2 * self.n_half + 1
    }

    pub fn l_of(&self, i: usize) -> f64 {
        (i as f64 - self.n_half as f64) * self.delta()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizedDensity {
    pub binning: Binning,
    /// Mass at `L_i = (i - N) delta`.
    pub mass: Vec<f64>,
    /// Mass at `L = +inf` (sure 0).
    pub sat_pos: f64,
    /// Mass at `L = -inf` (sure 1).
    pub sat_neg: f64,
}

impl QuantizedDensity {
    pub fn zeros(binning: Binning) -> Self {
        Self { binning, mass: vec![0.0; binning.bins()], sat_pos: 0.0, sat_neg: 0.0 }
    }

    /// Point mass at `L = 0` (the `1⃗_*` message).
    pub fn star(binning: Binning) -> Self {
        let mut d = Self::zeros(binning);
        d.mass[binning.n_half] = 1.0;
        d
    }

    /// Erasure-like density: `1⃗₀` with probability `mi`, otherwise `1⃗_*`.
    pub fn erasure(binning: Binning, mi: f64) -> Self {
        let mut d = Self::star(binning);
        d.mass[binning.n_half] = 1.0 - mi;
        d.sat_pos = mi;
        d
    }

    /// Adds mass `w` at L-value `l`: two-point split between neighbours,
    /// saturating beyond `±l_max`.
    pub fn add_point(&mut self, l: f64, w: f64) {
        let b = self.binning;
        if l > b.l_max {
            self.sat_pos += w;
            return;
        }
        if l < -b.l_max {
            self.sat_neg += w;
            return;
        }
        let p = l / b.delta() + b.n_half as f64;
        let k = (p.floor() as usize).min(2 * b.n_half);
        let f = p - k as f64;
        if f > 0.0 && k < 2 * b.n_half {
            self.mass[k] += w * (1.0 - f);
            self.mass[k + 1] += w * f;
        } else {
            self.mass[k] += w;
        }
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum::<f64>() + self.sat_pos + self.sat_neg
    }

    pub fn normalize(&mut self) {
        let s = self.total();
        if s > 0.0 {
            for m in self.mass.iter_mut() {
                *m /= s;
            }
            self.sat_pos /= s;
            self.sat_neg /= s;
        }
    }

    /// `1 - sum_i mass_i H(L_i)`: the MI of a symmetric density.
    pub fn mi(&self) -> f64 {
        let h: f64 = self
            .mass
            .iter()
            .enumerate()
            .map(|(i, &m)| if m == 0.0 { 0.0 } else { m * h_of_l(self.binning.l_of(i)) })
            .sum();
        1.0 - h
    }

    /// Largest `|p(-L) - e^{-L} p(L)|` over bins with `L > 0`, and `sat_neg`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.binning.n_half;
        let mut worst = self.sat_neg;
        for i in 1..=n {
            let l = i as f64 * self.binning.delta();
            let d = (self.mass[n - i] - (-l).exp() * self.mass[n + i]).abs();
            worst = worst.max(d);
        }
        worst
    }

    /// Mean of `L`, with saturated masses counted at `±l_max`.
    pub fn mean_l(&self) -> f64 {
        let b = self.binning;
        self.mass.iter().enumerate().map(|(i, &m)| m * b.l_of(i)).sum::<f64>() + (self.sat_pos - self.sat_neg) * b.l_max
    }

    /// Mixture `sum w_k d_k`.
    pub fn mixture(parts: &[(f64, &QuantizedDensity)]) -> Self {
        let mut out = Self::zeros(parts[0].1.binning);
        for &(w, d) in parts {
            for (o, m) in out.mass.iter_mut().zip(&d.mass) {
                *o += w * m;
            }
            out.sat_pos += w * d.sat_pos;
            out.sat_neg += w * d.sat_neg;
        }
        out
    }

    /// Draws an L-value (saturations as `±inf`) from a uniform `r` in [0,1).
    pub fn sample(&self, r: f64) -> f64 {
        let mut acc = self.sat_neg;
        if r < acc {
            return f64::NEG_INFINITY;
        }
        for (i, &m) in self.mass.iter().enumerate() {
            acc += m;
            if r < acc {
                return self.binning.l_of(i);
            }
        }
        f64::INFINITY
    }

    fn check_binning(&self, other: &Self) -> Result<()> {
        if self.binning != other.binning {
            return Err(Error::InvalidArgument("density binning mismatch".into()));
        }
        Ok(())
    }
}

/// Linear convolution of `parts[i]` raised to power `parts[i].1`, truncated to
/// `out_len`. FFT round-off below 1e-15 is dropped.
fn fft_linear_power(parts: &[(&[f64], usize)], out_len: usize) -> Vec<f64> {
    let size = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut acc: Vec<Complex<f64>> = vec![Complex::new(1.0, 0.0); size];
    for &(p, e) in parts {
        let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); size];
        for (b, &v) in buf.iter_mut().zip(p.iter()) {
            b.re = v;
        }
        fwd.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a *= b.powu(e as u32);
        }
    }
    inv.process(&mut acc);
    let scale = 1.0 / size as f64;
    acc.iter()
        .take(out_len)
        .map(|c| {
            let v = c.re * scale;
            if v < 1e-15 {
                0.0
            } else {
                v
            }
        })
        .collect()
}

/// Density of the sum of independent L-values drawn from `parts` (the `⊙` of
/// the corresponding messages).
pub fn density_vn_convolve_many(parts: &[&QuantizedDensity]) -> Result<QuantizedDensity> {
    let binning = parts[0].binning;
    for p in parts {
        parts[0].check_binning(p)?;
    }
    let n = binning.n_half;
    let k = parts.len();
    let out_len = k * 2 * n + 1;
    let conv = if k == 1 {
        parts[0].mass.clone()
    } else if parts.iter().all(|p| std::ptr::eq(*p, parts[0])) {
        fft_linear_power(&[(parts[0].mass.as_slice(), k)], out_len)
    } else {
        let fins: Vec<(&[f64], usize)> = parts.iter().map(|p| (p.mass.as_slice(), 1)).collect();
        fft_linear_power(&fins, out_len)
    };
    let mut out = QuantizedDensity::zeros(binning);
    // Convolution index r corresponds to L = (r - kN) delta.
    let offset = k * n;
    for (r, &m) in conv.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        if r + n < offset {
            out.sat_neg += m;
        } else if r > offset + n {
            out.sat_pos += m;
        } else {
            out.mass[r + n - offset] += m;
        }
    }
    // Saturation algebra: any sure input dominates; opposite sures contradict.
    let fin_mass: Vec<f64> = parts.iter().map(|p| p.mass.iter().sum()).collect();
    let mut no_neg = 1.0;
    let mut no_pos = 1.0;
    let mut fin_all = 1.0;
    for (p, &f) in parts.iter().zip(&fin_mass) {
        no_neg *= f + p.sat_pos;
        no_pos *= f + p.sat_neg;
        fin_all *= f;
    }
    let mut tot_all = 1.0;
    for (p, &f) in parts.iter().zip(&fin_mass) {
        tot_all *= f + p.sat_pos + p.sat_neg;
    }
    let pos_only = no_neg - fin_all;
    let neg_only = no_pos - fin_all;
    let contra = tot_all - no_neg - no_pos + fin_all;
    out.sat_pos += pos_only;
    out.sat_neg += neg_only;
    out.mass[n] += contra.max(0.0);
    // The finite convolution already carried total mass fin_all.
    let s: f64 = out.mass.iter().sum::<f64>() + out.sat_pos + out.sat_neg;
    if s > 0.0 {
        let t = tot_all / s;
        for m in out.mass.iter_mut() {
            *m *= t;
        }
        out.sat_pos *= t;
        out.sat_neg *= t;
    }
    Ok(out)
}

/// `p ⊙ q` on densities.
pub fn density_vn_convolve(p: &QuantizedDensity, q: &QuantizedDensity) -> Result<QuantizedDensity> {
    density_vn_convolve_many(&[p, q])
}

/// `k`-fold `⊙` of one density with itself.
pub fn density_vn_power(p: &QuantizedDensity, k: usize) -> QuantizedDensity {
    if k == 0 {
        return QuantizedDensity::star(p.binning);
    }
    let parts: Vec<&QuantizedDensity> = std::iter::repeat(p).take(k).collect();
    density_vn_convolve_many(&parts).expect("same binning")
}

/// Magnitude table for `⊕`: entry `(i, j)` is the index pair `(k, w)` such that
/// `|L_i ⊕ L_j|` lies at `(k + w) delta`. Index `N + 1` stands for infinity.
pub struct BoxplusTable {
    pub binning: Binning,
    idx: Vec<u32>,
    wt: Vec<f32>,
}

impl BoxplusTable {
    pub fn new(binning: Binning) -> Self {
        let n = binning.n_half;
        let dim = n + 2;
        let delta = binning.delta();
        let th: Vec<f64> = (0..=n).map(|i| (0.5 * i as f64 * delta).tanh()).collect();
        let mut idx = vec![0u32; dim * dim];
        let mut wt = vec![0f32; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let (k, w) = if i == n + 1 && j == n + 1 {
                    (n + 1, 0.0)
                } else if i == n + 1 {
                    (j, 0.0)
                } else if j == n + 1 {
                    (i, 0.0)
                } else {
                    let l = atanh2(th[i] * th[j]);
                    let p = (l / delta).min(n as f64);
                    let k = (p.floor() as usize).min(n);
                    let mut w = p - k as f64;
                    // Exact grid points stay put.
                    if w < 1e-12 || k == n {
                        w = 0.0;
                    }
                    (k, w)
                };
                idx[i * dim + j] = k as u32;
                wt[i * dim + j] = w as f32;
            }
        }
        Self { binning, idx, wt }
    }

    /// Shared table for the default binning.
    pub fn shared(binning: Binning) -> Arc<BoxplusTable> {
        static DEFAULT: OnceLock<Arc<BoxplusTable>> = OnceLock::new();
        if binning == Binning::DEFAULT {
            DEFAULT.get_or_init(|| Arc::new(BoxplusTable::new(Binning::DEFAULT))).clone()
        } else {
            Arc::new(BoxplusTable::new(binning))
        }
    }

    #[inline]
    fn dim(&self) -> usize {
        self.binning.n_half + 2
    }
}

/// Signed magnitude view: `pos[i]`, `neg[i]` hold mass at `±i delta`, index
/// `N + 1` is the saturation; the zero bin lives in `pos[0]`.
fn split_signs(d: &QuantizedDensity) -> (Vec<f64>, Vec<f64>) {
    let n = d.binning.n_half;
    let mut pos = vec![0.0; n + 2];
    let mut neg = vec![0.0; n + 2];
    for i in 0..=n {
        pos[i] = d.mass[n + i];
        if i > 0 {
            neg[i] = d.mass[n - i];
        }
    }
    pos[n + 1] = d.sat_pos;
    neg[n + 1] = d.sat_neg;
    (pos, neg)
}

fn join_signs(binning: Binning, pos: &[f64], neg: &[f64]) -> QuantizedDensity {
    let n = binning.n_half;
    let mut d = QuantizedDensity::zeros(binning);
    d.mass[n] = pos[0] + neg[0];
    for i in 1..=n {
        d.mass[n + i] = pos[i];
        d.mass[n - i] = neg[i];
    }
    d.sat_pos = pos[n + 1];
    d.sat_neg = neg[n + 1];
    d
}

/// `p ⊕ q` on densities, general (not necessarily symmetric) inputs.
pub fn density_cn_combine_with(
    table: &BoxplusTable,
    p: &QuantizedDensity,
    q: &QuantizedDensity,
) -> Result<QuantizedDensity> {
    p.check_binning(q)?;
    if table.binning != p.binning {
        return Err(Error::InvalidArgument("table binning mismatch".into()));
    }
    let dim = table.dim();
    let (pa, na) = split_signs(p);
    let (pb, nb) = split_signs(q);
    let mut op = vec![0.0; dim + 1];
    let mut on = vec![0.0; dim + 1];
    for i in 0..dim {
        let (ai, bi) = (pa[i], na[i]);
        if ai == 0.0 && bi == 0.0 {
            continue;
        }
        let row_i = &table.idx[i * dim..(i + 1) * dim];
        let row_w = &table.wt[i * dim..(i + 1) * dim];
        for j in 0..dim {
            let (aj, bj) = (pb[j], nb[j]);
            if aj == 0.0 && bj == 0.0 {
                continue;
            }
            let same = ai * aj + bi * bj;
            let diff = ai * bj + bi * aj;
            let k = row_i[j] as usize;
            let w = row_w[j] as f64;
            op[k] += same * (1.0 - w);
            op[k + 1] += same * w;
            on[k] += diff * (1.0 - w);
            on[k + 1] += diff * w;
        }
    }
    Ok(join_signs(p.binning, &op[..dim], &on[..dim]))
}

/// `p ⊕ q` for inputs symmetric with respect to the all-zero reference.
///
/// Works on magnitudes only and restores signs from the symmetry condition
/// `p(-L) = e^{-L} p(L)`, so the output is exactly symmetric.
pub fn density_cn_combine_symmetric(
    table: &BoxplusTable,
    p: &QuantizedDensity,
    q: &QuantizedDensity,
) -> Result<QuantizedDensity> {
    p.check_binning(q)?;
    let n = p.binning.n_half;
    let dim = table.dim();
    let (pa, na) = split_signs(p);
    let (pb, nb) = split_signs(q);
    let ma: Vec<f64> = pa.iter().zip(&na).map(|(a, b)| a + b).collect();
    let mb: Vec<f64> = pb.iter().zip(&nb).map(|(a, b)| a + b).collect();
    let mut out = vec![0.0; dim + 1];
    for i in 0..dim {
        let a = ma[i];
        if a == 0.0 {
            continue;
        }
        let row_i = &table.idx[i * dim..(i + 1) * dim];
        let row_w = &table.wt[i * dim..(i + 1) * dim];
        for j in 0..dim {
            let m = a * mb[j];
            if m == 0.0 {
                continue;
            }
            let k = row_i[j] as usize;
            let w = row_w[j] as f64;
            out[k] += m * (1.0 - w);
            out[k + 1] += m * w;
        }
    }
    let delta = p.binning.delta();
    let mut pos = vec![0.0; dim];
    let mut neg = vec![0.0; dim];
    pos[0] = out[0];
    for i in 1..=n {
        let e = (-(i as f64) * delta).exp();
        pos[i] = out[i] / (1.0 + e);
        neg[i] = out[i] * e / (1.0 + e);
    }
    pos[n + 1] = out[n + 1];
    Ok(join_signs(p.binning, &pos, &neg))
}

/// `p ⊕ q` with the shared table for the density's binning.
pub fn density_cn_combine(p: &QuantizedDensity, q: &QuantizedDensity) -> Result<QuantizedDensity> {
    let table = BoxplusTable::shared(p.binning);
    density_cn_combine_with(&table, p, q)
}
