//! Helpers shared by the property suites and the acceptance harness.
#![allow(dead_code)]

use ldgmq::beq::{BeqInstance, BeqResult};
use ldgmq::codes::{encode, sample_code, DegreeDistribution, LdgmCode};
use rand::{Rng, SeedableRng};
use std::path::PathBuf;

pub fn data_path(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(file)
}

pub fn load_dist(file: &str) -> DegreeDistribution {
    DegreeDistribution::load(&data_path(file)).expect("bundled distribution")
}

/// Random bipartite tree; every node joins one earlier node of the other side.
pub fn tree_code(n_b: usize, n_c: usize, seed: u64) -> LdgmCode {
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n_b];
    let (mut nb, mut nc) = (1usize, 0usize);
    while nb < n_b || nc < n_c {
        let add_c = nb == n_b || (nc < n_c && r.gen_bool(0.5));
        if add_c {
            adj[r.gen_range(0..nb)].push(nc as u32);
            nc += 1;
        } else if nc > 0 {
            adj[nb].push(r.gen_range(0..nc) as u32);
            nb += 1;
        } else {
            adj[0].push(0);
            nc = 1;
        }
    }
    LdgmCode::from_adjacency(n_c, 1, 2, seed, DegreeDistribution::regular(2, 2), &adj).unwrap()
}

/// `ln P(b_i = 0) / P(b_i = 1)` by enumerating all `b`.
pub fn exhaustive_marginals(code: &LdgmCode, l_c: &[f64]) -> Vec<f64> {
    let n_b = code.n_b;
    let mut p = vec![[0.0f64; 2]; n_b];
    for word in 0u32..(1 << n_b) {
        let b: Vec<u8> = (0..n_b).map(|i| (word >> i & 1) as u8).collect();
        let (c, _) = encode(code, &b).unwrap();
        let lw: f64 = c.iter().zip(l_c).map(|(&cj, &l)| if cj == 0 { 0.5 * l } else { -0.5 * l }).sum();
        let w = lw.exp();
        for i in 0..n_b {
            p[i][b[i] as usize] += w;
        }
    }
    p.iter().map(|q| (q[0] / q[1]).ln()).collect()
}

/// Small irregular binary code for BEQ experiments.
pub fn beq_code(n: usize, seed: u64) -> LdgmCode {
    let dist = DegreeDistribution::new(1, 1.0 / (0.33 * 6.0), 6, vec![(2, 0.3), (3, 0.3), (5, 0.4)]).unwrap();
    sample_code(&dist, n, seed).unwrap()
}

/// Accounting identity `n_i + n_b = n_ne + n_g`, `unsat <= n_i`, and every
/// discovery equation distinct and satisfied.
pub fn check_accounting(inst: &BeqInstance, code: &LdgmCode, r: &BeqResult) -> Result<(), String> {
    if r.n_i + code.n_b != r.n_ne + r.n_g {
        return Err(format!("n_i {} + n_b {} != n_ne {} + n_g {}", r.n_i, code.n_b, r.n_ne, r.n_g));
    }
    if r.unsat > r.n_i {
        return Err(format!("unsat {} > n_i {}", r.unsat, r.n_i));
    }
    let (c, _) = encode(code, &r.b).unwrap();
    let mut used = std::collections::HashSet::new();
    let mut discovered = 0;
    for eq in r.discovered_by.iter().flatten() {
        discovered += 1;
        if !used.insert(*eq) {
            return Err(format!("equation {eq} used twice"));
        }
        if inst.y[*eq as usize] != Some(c[*eq as usize]) {
            return Err(format!("discovery equation {eq} unsatisfied"));
        }
    }
    if discovered != code.n_b - r.n_g {
        return Err(format!("{discovered} discoveries, expected {}", code.n_b - r.n_g));
    }
    Ok(())
}
