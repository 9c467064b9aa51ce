//! Binary erasure quantization: parallel BP with recovery, and an exact
//! GF(2) oracle.
//!
//! Messages are `Some(bit)` (known) or `None` (erased). After every
//! iteration each b-node with a known extrinsic is fixed, so a known
//! b-to-c message always comes from a fixed bit. This makes the parallel
//! schedule equivalent to a serial guess/discover solver: every discovered
//! bit is determined by exactly one equation, whose prior was never flipped.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::codes::LdgmCode;
use crate::error::{Error, Result};
use crate::rng::{self, streams};

/// Source with erasures, one entry per c-bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeqInstance {
    pub y: Vec<Option<u8>>,
    pub epsilon: f64,
}

impl BeqInstance {
    /// Erases each position independently with probability `epsilon`; the
    /// rest are fair bits.
    pub fn random(n_c: usize, epsilon: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidArgument(format!("epsilon must be in [0, 1], got {epsilon}")));
        }
        let mut r = rng::stream(seed, streams::BEQ);
        let y = (0..n_c).map(|_| if r.gen::<f64>() < epsilon { None } else { Some(r.gen_range(0..2u8)) }).collect();
        Ok(Self { y, epsilon })
    }

    pub fn n_ne(&self) -> usize {
        self.y.iter().filter(|v| v.is_some()).count()
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BeqConfig {
    /// Iteration budget; guesses follow a uniform pace over `l0` iterations.
    pub l0: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BeqResult {
    pub b: Vec<u8>,
    pub n_ne: usize,
    /// Bits fixed while their extrinsic was erased.
    pub n_g: usize,
    /// `n_ne - (n_b - n_g)`: equations not used to determine any bit.
    pub n_i: usize,
    /// Non-erased positions where `bG` disagrees with `y`.
    pub unsat: usize,
    pub flips: usize,
    pub iterations: usize,
    /// Equation that determined each discovered bit; `None` for guesses.
    pub discovered_by: Vec<Option<u32>>,
}

/// Runs BP with the c-node and b-node recovery rules.
pub fn beq_quantize(inst: &BeqInstance, code: &LdgmCode, cfg: &BeqConfig) -> Result<BeqResult> {
    let n_c = code.n_c();
    if inst.y.len() != n_c {
        return Err(Error::LengthMismatch { expected: n_c, got: inst.y.len() });
    }
    if cfg.l0 == 0 {
        return Err(Error::InvalidArgument("l0 must be >= 1".into()));
    }
    let n_b = code.n_b;
    let ne = code.num_edges();
    let mut r = rng::stream(cfg.seed, streams::BEQ ^ 0x1);
    let mut prior: Vec<Option<u8>> = inst.y.clone();
    // Edge-indexed messages.
    let mut bc: Vec<Option<u8>> = vec![None; ne];
    let mut cb: Vec<Option<u8>> = vec![None; ne];
    let mut fixed: Vec<Option<u8>> = vec![None; n_b];
    let mut discovered_by: Vec<Option<u32>> = vec![None; n_b];
    let mut n_fixed = 0usize;
    let mut n_g = 0usize;
    let mut flips = 0usize;
    let mut iterations = 0usize;
    let mut known_from: Vec<(usize, u8)> = Vec::new();

    while n_fixed < n_b {
        iterations += 1;
        // c-nodes.
        for j in 0..n_c {
            let edges = &code.c_edges[code.c_ptr[j]..code.c_ptr[j + 1]];
            let Some(mut p) = prior[j] else {
                for &e in edges {
                    cb[e as usize] = None;
                }
                continue;
            };
            let mut unknown = 0usize;
            let mut last_unknown = 0usize;
            let mut acc = 0u8;
            for &e in edges {
                match bc[e as usize] {
                    Some(v) => acc ^= v,
                    None => {
                        unknown += 1;
                        last_unknown = e as usize;
                    }
                }
            }
            if unknown == 0 && acc != p {
                p ^= 1;
                prior[j] = Some(p);
                flips += 1;
            }
            for &e in edges {
                let e = e as usize;
                cb[e] = match (unknown, bc[e]) {
                    (0, Some(v)) => Some(p ^ acc ^ v),
                    (1, None) if e == last_unknown => Some(p ^ acc),
                    _ => None,
                };
            }
        }
        // b-nodes.
        let mut ext: Vec<Option<(u8, usize)>> = vec![None; n_b];
        for i in 0..n_b {
            let (lo, hi) = (code.b_ptr[i], code.b_ptr[i + 1]);
            if let Some(v) = fixed[i] {
                bc[lo..hi].fill(Some(v));
                continue;
            }
            known_from.clear();
            known_from.extend((lo..hi).filter_map(|e| cb[e].map(|v| (e, v))));
            if known_from.is_empty() {
                bc[lo..hi].fill(None);
                continue;
            }
            let &(e_pick, v) = known_from.choose(&mut r).expect("non-empty");
            if known_from.iter().any(|&(_, w)| w != v) {
                for &(e, w) in &known_from {
                    if w != v {
                        let j = code.edge_c[e] as usize;
                        prior[j] = prior[j].map(|p| p ^ 1);
                        cb[e] = Some(v);
                        flips += 1;
                    }
                }
            }
            // Messages out: known iff some other incoming message is known.
            for e in lo..hi {
                let other = known_from.iter().any(|&(e2, _)| e2 != e);
                bc[e] = if other { Some(v) } else { None };
            }
            ext[i] = Some((v, e_pick));
        }
        // Discoveries are free; guesses fill the uniform pace.
        for i in 0..n_b {
            if fixed[i].is_none() {
                if let Some((v, e)) = ext[i] {
                    fixed[i] = Some(v);
                    discovered_by[i] = Some(code.edge_c[e]);
                    bc[code.b_ptr[i]..code.b_ptr[i + 1]].fill(Some(v));
                    n_fixed += 1;
                }
            }
        }
        let target = if iterations >= cfg.l0 { n_b } else { (n_b * iterations).div_ceil(cfg.l0) };
        if n_fixed < target {
            let mut open: Vec<usize> = (0..n_b).filter(|&i| fixed[i].is_none()).collect();
            open.shuffle(&mut r);
            for &i in open.iter().take(target - n_fixed) {
                let v = r.gen_range(0..2u8);
                fixed[i] = Some(v);
                bc[code.b_ptr[i]..code.b_ptr[i + 1]].fill(Some(v));
                n_g += 1;
                n_fixed += 1;
            }
        }
    }

    let b: Vec<u8> = fixed.into_iter().map(|v| v.expect("all bits fixed")).collect();
    let (c, _) = crate::codes::encode(code, &b)?;
    let unsat = inst.y.iter().zip(&c).filter(|(y, &c)| matches!(y, Some(v) if *v != c)).count();
    let n_ne = inst.n_ne();
    let n_i =
        (n_ne + n_g).checked_sub(n_b).ok_or_else(|| Error::Infeasible("more discoveries than equations".into()))?;
    Ok(BeqResult { b, n_ne, n_g, n_i, unsat, flips, iterations, discovered_by })
}

/// Dense GF(2) system `A x = r` with 64-bit word rows.
#[derive(Clone, Debug)]
pub struct Gf2System {
    pub cols: usize,
    pub rows: Vec<Vec<u64>>,
    pub rhs: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gf2Solution {
    pub rank: usize,
    pub solvable: bool,
    /// One solution with free variables at zero.
    pub x: Option<Vec<u8>>,
}

impl Gf2System {
    pub fn new(cols: usize) -> Self {
        Self { cols, rows: Vec::new(), rhs: Vec::new() }
    }

    pub fn words(&self) -> usize {
        self.cols.div_ceil(64)
    }

    pub fn push(&mut self, vars: &[usize], rhs: u8) {
        let mut row = vec![0u64; self.words()];
        for &v in vars {
            row[v / 64] ^= 1 << (v % 64);
        }
        self.rows.push(row);
        self.rhs.push(rhs & 1);
    }

    /// Equations `(bG)_j = y_j` at the non-erased positions.
    pub fn from_instance(inst: &BeqInstance, code: &LdgmCode) -> Result<Self> {
        if inst.y.len() != code.n_c() {
            return Err(Error::LengthMismatch { expected: code.n_c(), got: inst.y.len() });
        }
        let mut s = Self::new(code.n_b);
        for (j, y) in inst.y.iter().enumerate() {
            if let Some(v) = y {
                let vars: Vec<usize> = code.c_edges[code.c_ptr[j]..code.c_ptr[j + 1]]
                    .iter()
                    .map(|&e| code.edge_b[e as usize] as usize)
                    .collect();
                s.push(&vars, *v);
            }
        }
        Ok(s)
    }

    /// Gaussian elimination, pivoting on the first set bit of each row.
    pub fn solve(&self) -> Gf2Solution {
        let mut rows = self.rows.clone();
        let mut rhs = self.rhs.clone();
        let mut pivots: Vec<(usize, usize)> = Vec::new();
        let mut next = 0usize;
        for col in 0..self.cols {
            let (w, bit) = (col / 64, 1u64 << (col % 64));
            let Some(p) = (next..rows.len()).find(|&i| rows[i][w] & bit != 0) else {
                continue;
            };
            rows.swap(next, p);
            rhs.swap(next, p);
            let (head, tail) = rows.split_at_mut(next + 1);
            let prow = &head[next];
            for (k, row) in tail.iter_mut().enumerate() {
                if row[w] & bit != 0 {
                    for (a, b) in row[w..].iter_mut().zip(&prow[w..]) {
                        *a ^= b;
                    }
                    rhs[next + 1 + k] ^= rhs[next];
                }
            }
            pivots.push((next, col));
            next += 1;
        }
        let rank = next;
        let solvable = rhs[rank..].iter().all(|&v| v == 0);
        if !solvable {
            return Gf2Solution { rank, solvable, x: None };
        }
        let mut x = vec![0u8; self.cols];
        for &(row, col) in pivots.iter().rev() {
            let mut v = rhs[row];
            for c in col + 1..self.cols {
                if x[c] == 1 && rows[row][c / 64] >> (c % 64) & 1 == 1 {
                    v ^= 1;
                }
            }
            x[col] = v;
        }
        Gf2Solution { rank, solvable, x: Some(x) }
    }
}

/// Rank, solvability and one solution of the non-erased equations.
pub fn gf2_solve(inst: &BeqInstance, code: &LdgmCode) -> Result<Gf2Solution> {
    Ok(Gf2System::from_instance(inst, code)?.solve())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrix_rank_zero() {
        let mut s = Gf2System::new(5);
        s.push(&[], 0);
        s.push(&[], 0);
        assert_eq!(s.solve().rank, 0);
        assert!(s.solve().solvable);
        s.push(&[], 1);
        assert!(!s.solve().solvable);
    }

    #[test]
    fn triangular_system_unique() {
        let mut s = Gf2System::new(3);
        s.push(&[0, 1, 2], 1);
        s.push(&[1, 2], 0);
        s.push(&[2], 1);
        let sol = s.solve();
        assert_eq!(sol.rank, 3);
        assert_eq!(sol.x, Some(vec![1, 1, 1]));
    }
}
