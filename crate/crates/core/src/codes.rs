//! Degree distributions, LDGM ensemble sampling, encoding and Gray mapping.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, streams};

/// Degrees `d_1 = 2, d_{k+1} = ceil(beta d_k)`, up to `d_max`.
pub fn degree_set(beta: f64, d_max: usize) -> Vec<usize> {
    assert!(beta > 1.0, "beta must exceed 1");
    let mut out = Vec::new();
    let mut d = 2usize;
    while d <= d_max {
        out.push(d);
        let next = (beta * d as f64 - 1e-9).ceil() as usize;
        d = next.max(d + 1);
    }
    out
}

/// Right degree `d_b` of the b-nodes plus c-side edge fractions `v_d`.
///
/// For `K >= 2`, `v_d` counts edges at c-nodes whose u-node has c-degree `d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeDistribution {
    #[serde(rename = "K")]
    pub k: u32,
    #[serde(rename = "R")]
    pub rate: f64,
    pub d_b: usize,
    /// `(d, v_d)` pairs with `v_d > 0`, sorted by degree.
    pub v: Vec<(usize, f64)>,
    /// Design threshold `I_c^thr` (per-bit), if known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl DegreeDistribution {
    pub fn new(k: u32, rate: f64, d_b: usize, v: Vec<(usize, f64)>) -> Result<Self> {
        let mut v: Vec<_> = v.into_iter().filter(|p| p.1 > 0.0).collect();
        v.sort_by_key(|p| p.0);
        let dist = Self { k, rate, d_b, v, threshold: None };
        dist.validate(1e-6)?;
        Ok(dist)
    }

    /// The regular `(d_b, d_c)` code with rate `K d_c / ... ` fixed by the degrees.
    pub fn regular(d_b: usize, d_c: usize) -> Self {
        Self { k: 1, rate: d_c as f64 / d_b as f64, d_b, v: vec![(d_c, 1.0)], threshold: None }
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.k == 0 || self.d_b == 0 || !(self.rate > 0.0) {
            return Err(Error::InvalidArgument("K, d_b and R must be positive".into()));
        }
        if self.v.iter().any(|&(d, w)| d == 0 || w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidArgument("degrees must be >= 1 and weights >= 0".into()));
        }
        let (s, r) = self.residuals();
        if s.abs() > tol || r.abs() > tol {
            return Err(Error::InvalidArgument(format!(
                "distribution constraints violated: sum v - 1 = {s:e}, rate residual = {r:e}"
            )));
        }
        Ok(())
    }

    /// `(sum v_d - 1, sum v_d/d - K/(R d_b))`.
    pub fn residuals(&self) -> (f64, f64) {
        let s: f64 = self.v.iter().map(|p| p.1).sum();
        let r: f64 = self.v.iter().map(|&(d, w)| w / d as f64).sum();
        (s - 1.0, r - self.k as f64 / (self.rate * self.d_b as f64))
    }

    /// Fraction `w_d` of u-nodes whose c-nodes have degree `d`.
    pub fn node_fractions(&self) -> Vec<(usize, f64)> {
        let scale = self.rate * self.d_b as f64 / self.k as f64;
        self.v.iter().map(|&(d, v)| (d, v * scale / d as f64)).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.v.last().map(|p| p.0).unwrap_or(0)
    }

    /// `f(x) = sum v_d x^{d-1}` under the erasure approximation.
    pub fn poly(&self, x: f64) -> f64 {
        self.v.iter().map(|&(d, w)| w * x.powi(d as i32 - 1)).sum()
    }

    /// Derivative of [`Self::poly`].
    pub fn poly_deriv(&self, x: f64) -> f64 {
        self.v.iter().filter(|p| p.0 >= 2).map(|&(d, w)| w * (d - 1) as f64 * x.powi(d as i32 - 2)).sum()
    }

    pub fn v1(&self) -> f64 {
        self.v.iter().find(|p| p.0 == 1).map(|p| p.1).unwrap_or(0.0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let d: Self = serde_json::from_str(s)?;
        d.validate(1e-6)?;
        Ok(d)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Gray mapping between K-bit labels and symbols `0..2^K`.
///
/// Bit `k` (LSB first) of a label is `c_{j,k+1}`; for `K = 2` this gives
/// `phi(00)=0, phi(10)=1, phi(11)=2, phi(01)=3` with `c_{j1}` written first.
#[derive(Clone, Copy, Debug)]
pub struct GrayMap {
    pub k: u32,
}

impl GrayMap {
    pub fn new(k: u32) -> Self {
        Self { k }
    }

    /// `phi`: label bits to symbol.
    #[inline]
    pub fn phi(&self, bits: u32) -> u32 {
        let mut v = bits;
        let mut s = bits >> 1;
        while s != 0 {
            v ^= s;
            s >>= 1;
        }
        v
    }

    /// `phi^{-1}`: symbol to label bits.
    #[inline]
    pub fn inv(&self, u: u32) -> u32 {
        u ^ (u >> 1)
    }
}

/// A sampled LDGM factor graph. Edge `e` joins b-node `edge_b[e]` to c-node
/// `edge_c[e]`; edges are grouped by b-node.
#[derive(Clone, Debug)]
pub struct LdgmCode {
    pub n: usize,
    pub n_b: usize,
    pub k: u32,
    pub d_b: usize,
    pub seed: u64,
    pub dist: DegreeDistribution,
    pub b_ptr: Vec<usize>,
    pub edge_c: Vec<u32>,
    pub edge_b: Vec<u32>,
    /// c-node CSR over edge ids.
    pub c_ptr: Vec<usize>,
    pub c_edges: Vec<u32>,
    /// Duplicate pairs removed while sampling.
    pub removed_pairs: usize,
}

impl LdgmCode {
    pub fn n_c(&self) -> usize {
        self.n * self.k as usize
    }

    pub fn num_edges(&self) -> usize {
        self.edge_c.len()
    }

    /// Builds a code from per-b-node c-node lists.
    pub fn from_adjacency(
        n: usize,
        k: u32,
        d_b: usize,
        seed: u64,
        dist: DegreeDistribution,
        adj: &[Vec<u32>],
    ) -> Result<Self> {
        let n_c = n * k as usize;
        let mut b_ptr = Vec::with_capacity(adj.len() + 1);
        let mut edge_c = Vec::new();
        let mut edge_b = Vec::new();
        b_ptr.push(0);
        for (b, list) in adj.iter().enumerate() {
            for &c in list {
                if c as usize >= n_c {
                    return Err(Error::InvalidArgument(format!("c-node {c} out of range {n_c}")));
                }
                edge_c.push(c);
                edge_b.push(b as u32);
            }
            b_ptr.push(edge_c.len());
        }
        let mut c_deg = vec![0usize; n_c];
        for &c in &edge_c {
            c_deg[c as usize] += 1;
        }
        let mut c_ptr = vec![0usize; n_c + 1];
        for j in 0..n_c {
            c_ptr[j + 1] = c_ptr[j] + c_deg[j];
        }
        let mut fill = c_ptr.clone();
        let mut c_edges = vec![0u32; edge_c.len()];
        for (e, &c) in edge_c.iter().enumerate() {
            c_edges[fill[c as usize]] = e as u32;
            fill[c as usize] += 1;
        }
        Ok(Self { n, n_b: adj.len(), k, d_b, seed, dist, b_ptr, edge_c, edge_b, c_ptr, c_edges, removed_pairs: 0 })
    }

    pub fn b_degree(&self, b: usize) -> usize {
        self.b_ptr[b + 1] - self.b_ptr[b]
    }

    pub fn c_degree(&self, c: usize) -> usize {
        self.c_ptr[c + 1] - self.c_ptr[c]
    }

    /// c-node indices adjacent to b-node `b`.
    pub fn b_neighbors(&self, b: usize) -> &[u32] {
        &self.edge_c[self.b_ptr[b]..self.b_ptr[b + 1]]
    }

    /// Writes the text format: header, distribution, one line per b-node.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {} {} {}", self.n, self.n_b, self.k, self.d_b, self.seed);
        let pairs: Vec<String> = self.dist.v.iter().map(|(d, v)| format!("{d}:{v:.17e}")).collect();
        let _ = writeln!(s, "{}", pairs.join(" "));
        for b in 0..self.n_b {
            let cs: Vec<String> = self.b_neighbors(b).iter().map(|c| c.to_string()).collect();
            let _ = writeln!(s, "{}", cs.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let perr = |m: &str| Error::Parse(m.to_string());
        let header: Vec<&str> = lines.next().ok_or_else(|| perr("empty file"))?.split_whitespace().collect();
        if header.len() != 5 {
            return Err(perr("header must be `n n_b K d_b seed`"));
        }
        let num = |s: &str| s.parse::<u64>().map_err(|_| perr("bad header number"));
        let n = num(header[0])? as usize;
        let n_b = num(header[1])? as usize;
        let k = num(header[2])? as u32;
        let d_b = num(header[3])? as usize;
        let seed = num(header[4])?;
        let mut v = Vec::new();
        for tok in lines.next().ok_or_else(|| perr("missing distribution line"))?.split_whitespace() {
            let (d, w) = tok.split_once(':').ok_or_else(|| perr("distribution pair must be d:v"))?;
            v.push((
                d.parse::<usize>().map_err(|_| perr("bad degree"))?,
                w.parse::<f64>().map_err(|_| perr("bad weight"))?,
            ));
        }
        let rate = n_b as f64 / n as f64;
        let dist = DegreeDistribution { k, rate, d_b, v, threshold: None };
        let mut adj = Vec::with_capacity(n_b);
        for _ in 0..n_b {
            let line = lines.next().ok_or_else(|| perr("too few b-node lines"))?;
            let list = line
                .split_whitespace()
                .map(|s| s.parse::<u32>().map_err(|_| perr("bad c-node index")))
                .collect::<Result<Vec<_>>>()?;
            adj.push(list);
        }
        Self::from_adjacency(n, k, d_b, seed, dist, &adj)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Largest-remainder rounding of `total * fractions` to integers summing to `total`.
fn largest_remainder(total: usize, fractions: &[f64]) -> Vec<usize> {
    let s: f64 = fractions.iter().sum();
    let exact: Vec<f64> = fractions.iter().map(|f| f / s * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut left = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Samples a code from the ensemble of `dist` with `n` symbols.
///
/// Stubs are paired by a seeded permutation; parallel edges are removed in
/// pairs in one pass. Samples leaving a b-node with degree below 2 are redrawn.
pub fn sample_code(dist: &DegreeDistribution, n: usize, seed: u64) -> Result<LdgmCode> {
    dist.validate(1e-6)?;
    let k = dist.k as usize;
    let n_b = (n as f64 * dist.rate).round() as usize;
    let n_c = n * k;
    if n_b == 0 || dist.v.is_empty() {
        return Err(Error::Infeasible("code has no b-nodes or no degrees".into()));
    }
    let fr = dist.node_fractions();
    let counts = largest_remainder(n, &fr.iter().map(|p| p.1).collect::<Vec<_>>());
    let mut c_deg = Vec::with_capacity(n_c);
    for (&(d, _), &cnt) in fr.iter().zip(&counts) {
        for _ in 0..cnt * k {
            c_deg.push(d);
        }
    }
    let e_b = n_b * dist.d_b;
    let e_c: usize = c_deg.iter().sum();
    // Leftover stubs go to (or come from) the highest-degree c-nodes.
    if e_b > e_c {
        let mut extra = e_b - e_c;
        let mut j = n_c;
        while extra > 0 {
            j = if j == 0 { n_c - 1 } else { j - 1 };
            c_deg[j] += 1;
            extra -= 1;
        }
    } else if e_c > e_b {
        let mut excess = e_c - e_b;
        let mut j = n_c;
        let mut stuck = 0;
        while excess > 0 {
            j = if j == 0 { n_c - 1 } else { j - 1 };
            if c_deg[j] > 1 {
                c_deg[j] -= 1;
                excess -= 1;
                stuck = 0;
            } else {
                stuck += 1;
                if stuck > n_c {
                    return Err(Error::Infeasible("c-side cannot absorb edge deficit".into()));
                }
            }
        }
    }
    let mut c_stubs: Vec<u32> = Vec::with_capacity(e_b);
    for (j, &d) in c_deg.iter().enumerate() {
        for _ in 0..d {
            c_stubs.push(j as u32);
        }
    }
    for attempt in 0..1000u64 {
        let mut rng = rng::stream(seed, streams::CODE + (attempt << 8));
        let mut stubs = c_stubs.clone();
        stubs.shuffle(&mut rng);
        let mut adj: Vec<Vec<u32>> = stubs.chunks(dist.d_b).map(|c| c.to_vec()).collect();
        let mut removed = 0usize;
        let mut ok = true;
        for list in adj.iter_mut() {
            list.sort_unstable();
            let mut kept = Vec::with_capacity(list.len());
            let mut i = 0;
            while i < list.len() {
                let mut j = i;
                while j < list.len() && list[j] == list[i] {
                    j += 1;
                }
                if (j - i) % 2 == 1 {
                    kept.push(list[i]);
                }
                removed += (j - i) / 2;
                i = j;
            }
            if kept.len() < 2 {
                ok = false;
                break;
            }
            *list = kept;
        }
        if !ok {
            continue;
        }
        let mut code = LdgmCode::from_adjacency(n, dist.k, dist.d_b, seed, dist.clone(), &adj)?;
        code.removed_pairs = removed;
        return Ok(code);
    }
    Err(Error::Infeasible("could not sample a code with all b-degrees >= 2".into()))
}

/// `c = bG` over GF(2) and `u_j = phi(c_{j1..jK})`.
pub fn encode(code: &LdgmCode, b: &[u8]) -> Result<(Vec<u8>, Vec<u32>)> {
    if b.len() != code.n_b {
        return Err(Error::LengthMismatch { expected: code.n_b, got: b.len() });
    }
    let mut c = vec![0u8; code.n_c()];
    for (bi, &bit) in b.iter().enumerate() {
        if bit & 1 == 1 {
            for &j in code.b_neighbors(bi) {
                c[j as usize] ^= 1;
            }
        }
    }
    Ok((c.clone(), symbols_from_bits(&c, code.k)))
}

/// Groups every K consecutive c-bits into one Gray-mapped symbol.
pub fn symbols_from_bits(c: &[u8], k: u32) -> Vec<u32> {
    let g = GrayMap::new(k);
    c.chunks(k as usize)
        .map(|ch| {
            let bits = ch.iter().enumerate().fold(0u32, |acc, (i, &x)| acc | ((x as u32 & 1) << i));
            g.phi(bits)
        })
        .collect()
}

/// Per-degree histogram of c-node degrees.
pub fn c_degree_histogram(code: &LdgmCode) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for j in 0..code.n_c() {
        *h.entry(code.c_degree(j)).or_insert(0) += 1;
    }
    h
}
