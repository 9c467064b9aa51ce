mod common;

use common::{beq_code, check_accounting, load_dist};
use ldgmq::beq::*;
use ldgmq::codes::{encode, sample_code};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn accounting_exact_on_small_instances(n in 8usize..=48, eps in 0.0f64..1.0, l0 in 1usize..30, seed in any::<u64>()) {
        let code = beq_code(n, seed);
        let inst = BeqInstance::random(n, eps, seed ^ 1).unwrap();
        let r = beq_quantize(&inst, &code, &BeqConfig { l0, seed }).unwrap();
        check_accounting(&inst, &code, &r).unwrap();
    }

    #[test]
    fn oracle_solution_satisfies_equations(n in 8usize..=64, eps in 0.0f64..1.0, seed in any::<u64>()) {
        let code = beq_code(n, seed);
        let inst = BeqInstance::random(n, eps, seed ^ 2).unwrap();
        let sol = gf2_solve(&inst, &code).unwrap();
        prop_assert!(sol.rank <= inst.n_ne().min(code.n_b));
        if let Some(x) = &sol.x {
            let (c, _) = encode(&code, x).unwrap();
            for (y, c) in inst.y.iter().zip(&c) {
                if let Some(v) = y {
                    prop_assert_eq!(v, c);
                }
            }
        }
        // A BP run with no unsatisfied equations is a certificate of solvability.
        let r = beq_quantize(&inst, &code, &BeqConfig { l0: 10, seed }).unwrap();
        if r.unsat == 0 {
            prop_assert!(sol.solvable);
        }
        // A codeword is always a consistent right-hand side.
        let b: Vec<u8> = (0..code.n_b).map(|i| ((seed >> (i % 64)) & 1) as u8).collect();
        let (c, _) = encode(&code, &b).unwrap();
        let cw = BeqInstance { y: inst.y.iter().zip(&c).map(|(y, &c)| y.map(|_| c)).collect(), epsilon: eps };
        prop_assert!(gf2_solve(&cw, &code).unwrap().solvable);
    }
}

#[test]
fn all_erased_has_no_unsatisfied_equations() {
    let code = beq_code(200, 4);
    let inst = BeqInstance { y: vec![None; 200], epsilon: 1.0 };
    let r = beq_quantize(&inst, &code, &BeqConfig { l0: 20, seed: 1 }).unwrap();
    assert_eq!(r.unsat, 0);
    assert_eq!(r.n_g, code.n_b);
    let sol = gf2_solve(&inst, &code).unwrap();
    assert_eq!(sol.rank, 0);
    assert!(sol.solvable);
}

#[test]
fn solvable_fraction_matches_rank() {
    // For fixed A, a uniform rhs is consistent with probability
    // 2^{rank - rows}; 60 variables keep it away from 0 and 1.
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let rows = 64;
    let cols = 60;
    let mut base = Gf2System::new(cols);
    for _ in 0..rows {
        let vars: Vec<usize> = (0..cols).filter(|_| r.gen_bool(0.5)).collect();
        base.push(&vars, 0);
    }
    let rank = base.solve().rank;
    let p = 2f64.powi(rank as i32 - rows);
    let trials = 10_000;
    let mut hits = 0;
    for _ in 0..trials {
        let mut s = base.clone();
        s.rhs = (0..rows).map(|_| r.gen_range(0..2u8)).collect();
        if s.solve().solvable {
            hits += 1;
        }
    }
    let sd = (trials as f64 * p * (1.0 - p)).sqrt();
    assert!((hits as f64 - trials as f64 * p).abs() <= 3.0 * sd + 1.0, "hits {hits} expected {}", trials as f64 * p);
}

#[test]
fn unsatisfied_count_is_half_the_ignored_equations() {
    let dist = load_dist("k1_r4461_db12_de.json");
    let code = sample_code(&dist, 10_000, 5).unwrap();
    let (mut unsat, mut ni) = (0.0, 0.0);
    for run in 0..100u64 {
        let inst = BeqInstance::random(code.n_c(), 0.6, 1000 + run).unwrap();
        let r = beq_quantize(&inst, &code, &BeqConfig { l0: 50, seed: run }).unwrap();
        check_accounting(&inst, &code, &r).unwrap();
        let half = r.n_i as f64 / 2.0;
        assert!((r.unsat as f64 - half).abs() <= 4.0 * (r.n_i as f64).sqrt(), "run {run}: {} vs {half}", r.unsat);
        unsat += r.unsat as f64;
        ni += r.n_i as f64;
    }
    // Pooled: each ignored equation is unsatisfied with probability 1/2.
    assert!((unsat - ni / 2.0).abs() <= 4.0 * (ni / 4.0).sqrt(), "{unsat} vs {}", ni / 2.0);
}
