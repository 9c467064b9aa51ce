use ldgmq::tcq::*;
use proptest::prelude::*;

/// Minimum MSE over every start state and input sequence.
fn exhaustive_mse(y: &[f64], t: &Trellis) -> f64 {
    let n = y.len();
    let mut best = f64::INFINITY;
    for start in 0..t.states() as u32 {
        for word in 0u32..(1 << n) {
            let bits: Vec<u8> = (0..n).map(|j| (word >> j & 1) as u8).collect();
            let d: f64 = t
                .encode(start, &bits)
                .iter()
                .zip(y)
                .map(|(&u, &yj)| {
                    let z = (yj - u as f64 + 2.0).rem_euclid(4.0) - 2.0;
                    z * z
                })
                .sum();
            best = best.min(d);
        }
    }
    best / n as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn viterbi_matches_exhaustive(y in prop::collection::vec(0.0f64..4.0, 1..=12), nu in 1u32..=3, g in any::<(u32, u32)>()) {
        let lim = 1 << (nu + 1);
        let t = Trellis::new(nu, g.0 % lim, g.1 % lim).unwrap();
        let v = viterbi_quantize(&y, &t);
        let ex = exhaustive_mse(&y, &t);
        prop_assert!((v.mse - ex).abs() < 1e-12, "viterbi {} exhaustive {}", v.mse, ex);
        // The reported path reproduces the reported MSE.
        let d: f64 = t.encode(v.start, &v.bits).iter().zip(&y).map(|(&u, &yj)| {
            let z = (yj - u as f64 + 2.0).rem_euclid(4.0) - 2.0;
            z * z
        }).sum::<f64>() / y.len() as f64;
        prop_assert!((d - v.mse).abs() < 1e-12);
        prop_assert_eq!(&t.encode(v.start, &v.bits), &v.u);
    }

    #[test]
    fn polynomial_line_round_trips(nu in 1u32..=10, g in any::<(u32, u32)>()) {
        let lim = 1 << (nu + 1);
        let t = Trellis::new(nu, g.0 % lim, g.1 % lim).unwrap();
        prop_assert_eq!(Trellis::from_line(&t.to_line()).unwrap(), t);
    }
}

#[test]
fn constant_codeword_symbol_has_zero_error() {
    let t = Trellis::new(2, 0o5, 0o7).unwrap();
    let y = vec![0.0; 40];
    assert_eq!(viterbi_quantize(&y, &t).mse, 0.0);
}

#[test]
fn search_is_deterministic() {
    let a = poly_search(3, 8, 500, 42).unwrap();
    let b = poly_search(3, 8, 500, 42).unwrap();
    assert_eq!(a.trellis, b.trellis);
    assert_eq!(a.mse, b.mse);
    assert!(a.trellis.is_admissible());
}

#[test]
fn sc_bound_decreases_to_zero() {
    let mut prev = f64::INFINITY;
    for n in [1usize, 2, 4, 16, 64, 300, 1000, 100_000, 10_000_000] {
        let s = sc_bound(n).unwrap();
        assert!(s < prev && s > 0.0, "n={n} {s}");
        prev = s;
    }
    assert!(prev < 1e-5);
    // n = 1: the sphere is an interval, the scalar-quantizer loss.
    assert!((sc_bound(1).unwrap() - 1.5329).abs() < 1e-4);
}

#[test]
fn loss_decreases_with_memory() {
    let blocks = tcq_blocks(10_000, 5, 7);
    let mut prev = f64::INFINITY;
    for nu in 2..=8 {
        let s = poly_search(nu, 200, 20_000, 3).unwrap();
        let loss = tcq_loss_db(evaluate(&s.trellis, &blocks), nu, 10_000);
        assert!(loss < prev, "nu={nu}: {loss} !< {prev}");
        prev = loss;
    }
}
