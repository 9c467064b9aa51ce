mod common;

use common::{exhaustive_marginals, load_dist, tree_code};
use ldgmq::bp::*;
use ldgmq::codes::{sample_code, DegreeDistribution};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tree_bp_is_exact(n_b in 2usize..=12, extra in 0usize..10, seed in any::<u64>(),
                        ls in prop::collection::vec(-3.0f64..3.0, 24)) {
        let n_c = n_b - 1 + extra.max(1);
        let code = tree_code(n_b, n_c, seed);
        let l_c: Vec<f64> = (0..n_c).map(|j| ls[j % ls.len()] * (1.0 + j as f64 * 0.01)).collect();
        let mut st = BpState::with_c_priors(&code, l_c.clone()).unwrap();
        for _ in 0..2 * (n_b + n_c) {
            st.iterate();
        }
        let exact = exhaustive_marginals(&code, &l_c);
        for (a, b) in st.l_ext.iter().zip(&exact) {
            prop_assert!((a - b).abs() < 1e-8, "bp {a} exact {b}");
        }
    }

    #[test]
    fn greedy_argmax_invariant_under_monotone_rescaling(ls in prop::collection::vec(-20.0f64..20.0, 16),
                                                       scale in 0.1f64..10.0, power in 0.3f64..3.0) {
        let code = sample_code(&DegreeDistribution::regular(4, 2), 32, 1).unwrap();
        let mut st = BpState::with_c_priors(&code, vec![0.0; 32]).unwrap();
        st.l_ext = (0..code.n_b).map(|i| ls[i % ls.len()] + i as f64 * 1e-3).collect();
        let before = decimate_greedy(&st).unwrap();
        // Sign-preserving, strictly increasing in |L|.
        st.l_ext = st.l_ext.iter().map(|&l| l.signum() * scale * l.abs().powf(power)).collect();
        prop_assert_eq!(decimate_greedy(&st).unwrap(), before);
    }
}

#[test]
fn recovery_fixed_point_leaves_source_unchanged() {
    for &t in &[2.0, 4.0, 6.0] {
        let rec = Recovery::new(t).unwrap();
        let table = rec.table(&rec.true_g());
        for qi in 0..=10 {
            let q = qi as f64 / 10.0;
            for i in 0..50 {
                let y = -0.98 + 1.96 * i as f64 / 49.0;
                let yh = Recovery::apply(&table, y, q);
                assert!((yh - y).abs() < 2e-3, "t={t} q={q} y={y} -> {yh}");
            }
        }
    }
}

#[test]
fn quantize_is_deterministic_and_reports_consistent_mse() {
    let dist = load_dist("k1_r4461_db12_de.json");
    let code = sample_code(&dist, 2000, 3).unwrap();
    let y = source_block(2000, 1, 9, 0);
    let cfg = QuantizerConfig::new(4.0, 50, 9);
    let a = quantize(&y, &code, &cfg).unwrap();
    let b = quantize(&y, &code, &cfg).unwrap();
    assert_eq!(a.b, b.b);
    let (c, u) = ldgmq::codes::encode(&code, &a.b).unwrap();
    assert_eq!(c, a.c);
    assert_eq!(u, a.u);
    let mse: f64 = a.z.iter().map(|z| z * z).sum::<f64>() / 2000.0;
    assert!((mse - a.mse).abs() < 1e-12);
    assert!(a.z.iter().all(|z| z.abs() <= 1.0));
    // Well below the scalar-quantizer MSE 1/3 of a 2-level lattice.
    assert!(a.mse < 0.15, "{}", a.mse);
}
