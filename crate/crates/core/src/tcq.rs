//! Trellis-coded quantization baseline.
//!
//! A rate-1/2 feedforward convolutional code with `2^nu` states labels each
//! branch with two bits `(c1, c2)`, mapped to the 4-ary symbol `u = c1 + 2 c2`.
//! Codewords are `U + 4Z^n`. The start state is free (it carries `nu` extra
//! bits, so `R = 1 + nu/n`) and so is the end state.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::bounds::{shaping_loss_db, wrap_interval};
use crate::error::{Error, Result};
use crate::rng::{self, streams};

/// Generator polynomials as bit masks over `(D^nu ... D^0)`, bit 0 being the
/// current input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trellis {
    pub nu: u32,
    pub g1: u32,
    pub g2: u32,
}

fn parity(v: u32) -> u32 {
    v.count_ones() & 1
}

fn gf2_degree(p: u64) -> i32 {
    63 - p.leading_zeros() as i32
}

fn gf2_gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        while a != 0 && gf2_degree(a) >= gf2_degree(b) {
            a ^= b << (gf2_degree(a) - gf2_degree(b));
        }
        std::mem::swap(&mut a, &mut b);
    }
    a
}

impl Trellis {
    pub fn new(nu: u32, g1: u32, g2: u32) -> Result<Self> {
        if !(1..=20).contains(&nu) {
            return Err(Error::InvalidArgument(format!("nu must be in 1..=20, got {nu}")));
        }
        let lim = 1u32 << (nu + 1);
        if g1 >= lim || g2 >= lim {
            return Err(Error::InvalidArgument("polynomial degree exceeds nu".into()));
        }
        Ok(Self { nu, g1, g2 })
    }

    pub fn states(&self) -> usize {
        1 << self.nu
    }

    /// Delay-free (some constant term), full memory (some `D^nu` term) and
    /// coprime polynomials.
    pub fn is_admissible(&self) -> bool {
        let top = 1 << self.nu;
        (self.g1 | self.g2) & 1 == 1
            && (self.g1 | self.g2) & top != 0
            && self.g1 != 0
            && self.g2 != 0
            && gf2_gcd(self.g1 as u64, self.g2 as u64) == 1
    }

    /// Branch label from register `r = (state << 1) | input`.
    #[inline]
    pub fn label(&self, r: u32) -> u32 {
        parity(r & self.g1) | (parity(r & self.g2) << 1)
    }

    /// Symbols of the codeword from a start state and input bits.
    pub fn encode(&self, start: u32, bits: &[u8]) -> Vec<u32> {
        let mask = (1u32 << self.nu) - 1;
        let mut s = start & mask;
        bits.iter()
            .map(|&b| {
                let r = (s << 1) | b as u32;
                s = r & mask;
                self.label(r)
            })
            .collect()
    }

    /// Octal pair, one line.
    pub fn to_line(&self) -> String {
        format!("{} {:o} {:o}", self.nu, self.g1, self.g2)
    }

    pub fn from_line(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::Parse(format!("expected `nu g1 g2`, got `{line}`")));
        }
        let p = |s: &str, radix| u32::from_str_radix(s, radix).map_err(|e| Error::Parse(e.to_string()));
        Self::new(p(f[0], 10)?, p(f[1], 8)?, p(f[2], 8)?)
    }
}

/// Squared distance from `y` to the coset `u + 4Z`.
#[inline]
fn cost(y: f64, u: u32) -> f64 {
    let z = wrap_interval(y - u as f64, 4.0);
    z * z
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TcqResult {
    pub mse: f64,
    pub start: u32,
    pub bits: Vec<u8>,
    pub u: Vec<u32>,
}

/// Minimum-distortion path with free start and end states.
pub fn viterbi_quantize(y: &[f64], trellis: &Trellis) -> TcqResult {
    let ns = trellis.states();
    let mask = (ns - 1) as u32;
    let n = y.len();
    let mut metric = vec![0.0f64; ns];
    let mut next = vec![0.0f64; ns];
    // Surviving predecessor bit (the state's oldest bit) per step and state.
    let mut from_hi = vec![0u8; n * ns];
    let labels: Vec<u32> = (0..2 * ns as u32).map(|r| trellis.label(r)).collect();
    for (j, &yj) in y.iter().enumerate() {
        let c = [cost(yj, 0), cost(yj, 1), cost(yj, 2), cost(yj, 3)];
        let row = &mut from_hi[j * ns..(j + 1) * ns];
        for s2 in 0..ns as u32 {
            // Predecessors: s = (s2 >> 1) | (hi << (nu - 1)).
            let low = s2 >> 1;
            let b = s2 & 1;
            let p0 = low;
            let p1 = low | (1 << (trellis.nu - 1));
            let m0 = metric[p0 as usize] + c[labels[((p0 << 1) | b) as usize] as usize];
            let m1 = metric[p1 as usize] + c[labels[((p1 << 1) | b) as usize] as usize];
            let (m, h) = if m1 < m0 { (m1, 1) } else { (m0, 0) };
            next[s2 as usize] = m;
            row[s2 as usize] = h;
        }
        std::mem::swap(&mut metric, &mut next);
    }
    let (mut s, best) =
        metric.iter().enumerate().fold((0usize, f64::INFINITY), |acc, (i, &m)| if m < acc.1 { (i, m) } else { acc });
    let mut bits = vec![0u8; n];
    for j in (0..n).rev() {
        bits[j] = (s & 1) as u8;
        let hi = from_hi[j * ns + s] as usize;
        s = (s >> 1) | (hi << (trellis.nu - 1));
    }
    let start = s as u32 & mask;
    let u = trellis.encode(start, &bits);
    let mse = if n == 0 { 0.0 } else { best / n as f64 };
    TcqResult { mse, start, bits, u }
}

/// Shaping loss of TCQ at block length `n` from its MSE, counting the
/// `nu` start-state bits in the rate.
pub fn tcq_loss_db(mse: f64, nu: u32, n: usize) -> f64 {
    shaping_loss_db(mse, 1.0 + nu as f64 / n as f64, 2)
}

/// Uniform source blocks over `[0, 4)^n` for evaluation.
pub fn tcq_blocks(n: usize, blocks: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..blocks)
        .map(|b| {
            let mut r = rng::stream(rng::block_seed(seed, b as u64), streams::TCQ);
            (0..n).map(|_| 4.0 * r.gen::<f64>()).collect()
        })
        .collect()
}

/// Mean MSE of `trellis` over `blocks`.
pub fn evaluate(trellis: &Trellis, blocks: &[Vec<f64>]) -> f64 {
    let s: f64 = blocks.iter().map(|y| viterbi_quantize(y, trellis).mse).sum();
    s / blocks.len().max(1) as f64
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchResult {
    pub trellis: Trellis,
    pub mse: f64,
    pub loss_db: f64,
    pub tried: usize,
}

/// Random search over admissible polynomial pairs, scored on one fixed
/// block of length `n_eval`.
pub fn poly_search(nu: u32, trials: usize, n_eval: usize, seed: u64) -> Result<SearchResult> {
    let mut r = rng::stream(seed, streams::TCQ ^ 0xff);
    let blocks = tcq_blocks(n_eval, 1, seed);
    let lim = 1u32 << (nu + 1);
    let mut best: Option<(Trellis, f64)> = None;
    let mut tried = 0;
    let mut attempts = 0;
    while tried < trials.max(1) {
        attempts += 1;
        if attempts > 1000 * trials.max(1) {
            break;
        }
        let t = Trellis::new(nu, r.gen_range(0..lim), r.gen_range(0..lim))?;
        if !t.is_admissible() {
            continue;
        }
        tried += 1;
        let m = evaluate(&t, &blocks);
        if best.map_or(true, |b| m < b.1) {
            best = Some((t, m));
        }
    }
    let (trellis, mse) = best.ok_or_else(|| Error::Infeasible("no admissible polynomials".into()))?;
    Ok(SearchResult { trellis, mse, loss_db: tcq_loss_db(mse, nu, n_eval), tried })
}

/// Sphere-covering bound on the shaping loss at dimension `n`:
/// `10 log10(e Gamma(n/2 + 1)^{2/n} / (n/2 + 1))`.
pub fn sc_bound(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let h = n as f64 / 2.0;
    let ln = 1.0 + ln_gamma(h + 1.0) / h - (h + 1.0).ln();
    Ok(10.0 * ln / std::f64::consts::LN_10)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gcd_over_gf2() {
        // (1 + D)(1 + D + D^2) = 1 + D^3.
        assert_eq!(gf2_gcd(0b1001, 0b11), 0b11);
        assert_eq!(gf2_gcd(0b111, 0b101), 1);
    }

    #[test]
    fn codeword_has_zero_error() {
        let t = Trellis::new(2, 0o5, 0o2).unwrap();
        let bits = [1, 0, 1, 1, 0, 0, 1, 0];
        let y: Vec<f64> = t.encode(2, &bits).iter().map(|&u| u as f64).collect();
        assert_eq!(viterbi_quantize(&y, &t).mse, 0.0);
    }

    #[test]
    fn sc_bound_table_values() {
        assert!((sc_bound(100_000).unwrap() - 0.0005).abs() < 1e-4);
        assert!((sc_bound(300).unwrap() - 0.0703).abs() < 2e-4);
    }
}
