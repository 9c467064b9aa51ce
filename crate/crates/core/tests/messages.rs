use ldgmq::messages::*;
use proptest::prelude::*;

fn msg() -> impl Strategy<Value = Message> {
    prop_oneof![
        1 => Just(Message::ZERO),
        1 => Just(Message::ONE),
        1 => Just(Message::STAR),
        6 => (0.0f64..=1.0).prop_map(|p| Message::new(p, 1.0 - p)),
    ]
}

fn close(a: Message, b: Message) -> bool {
    (a.p0 - b.p0).abs() < 1e-12 && (a.p1 - b.p1).abs() < 1e-12
}

proptest! {
    #[test]
    fn vn_commutes(a in msg(), b in msg()) {
        match (vn_combine(a, b), vn_combine(b, a)) {
            (Ok(x), Ok(y)) => prop_assert!(close(x, y)),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "asymmetric contradiction"),
        }
    }

    #[test]
    fn vn_associates(a in msg(), b in msg(), c in msg()) {
        let l = vn_combine(a, b).and_then(|ab| vn_combine(ab, c));
        let r = vn_combine(b, c).and_then(|bc| vn_combine(a, bc));
        if let (Ok(x), Ok(y)) = (l, r) {
            prop_assert!(close(x, y));
        }
    }

    #[test]
    fn star_is_vn_identity(a in msg()) {
        prop_assert!(close(vn_combine(a, Message::STAR).unwrap(), a));
    }

    #[test]
    fn cn_laws(a in msg(), b in msg(), c in msg()) {
        prop_assert!(close(cn_combine(a, b), cn_combine(b, a)));
        prop_assert!(close(cn_combine(cn_combine(a, b), c), cn_combine(a, cn_combine(b, c))));
        prop_assert!(close(cn_combine(a, Message::ZERO), a));
        prop_assert!(close(cn_combine(a, Message::STAR), Message::STAR));
        // Adding a sure one flips the message.
        let f = cn_combine(a, Message::ONE);
        prop_assert!((f.p0 - a.p1).abs() < 1e-15);
    }

    #[test]
    fn boxplus_matches_probability_domain(a in -12.0f64..12.0, b in -12.0f64..12.0) {
        let p = cn_combine(Message::from_l(a), Message::from_l(b));
        prop_assert!((boxplus(a, b) - p.l_value()).abs() < 1e-8);
        prop_assert!(boxplus(a, b).abs() <= a.abs().min(b.abs()) + 1e-12);
    }

    #[test]
    fn vn_adds_l_values(a in -12.0f64..12.0, b in -12.0f64..12.0) {
        let p = vn_combine(Message::from_l(a), Message::from_l(b)).unwrap();
        prop_assert!((p.l_value() - (a + b)).abs() < 1e-8);
    }
}

#[test]
fn contradiction_is_signalled() {
    assert_eq!(vn_combine(Message::ZERO, Message::ONE), Err(Contradiction));
}

fn binning() -> Binning {
    Binning { n_half: 256, l_max: 25.0 }
}

#[test]
fn erasure_densities_compose_like_erasure_channels() {
    let a = QuantizedDensity::erasure(binning(), 0.3);
    let b = QuantizedDensity::erasure(binning(), 0.6);
    let v = density_vn_convolve(&a, &b).unwrap();
    assert!((v.mi() - (1.0 - 0.7 * 0.4)).abs() < 1e-12);
    let c = density_cn_combine(&a, &b).unwrap();
    assert!((c.mi() - 0.18).abs() < 1e-12);
}

#[test]
fn density_ops_preserve_mass_and_symmetry() {
    let mut p = QuantizedDensity::zeros(binning());
    // Symmetric Gaussian with mean s and variance 2s.
    let s = 2.0f64;
    for i in 0..binning().bins() {
        let l = binning().l_of(i);
        let w = (-(l - s).powi(2) / (4.0 * s)).exp();
        p.add_point(l, w);
    }
    p.normalize();
    for q in [density_vn_power(&p, 3), density_cn_combine(&p, &p).unwrap()] {
        assert!((q.total() - 1.0).abs() < 1e-9);
        assert!(q.symmetry_defect() < 5e-3, "{}", q.symmetry_defect());
    }
}
