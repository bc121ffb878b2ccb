use equal_core::mitigate::sqc_in_place;
use equal_core::precision::{quantize_value, Rounding};
use equal_core::{flip_delta, srt_transform, srt_untransform, IsingModel, SpinConfig};
use proptest::prelude::*;

fn model_strategy(max_n: usize) -> impl Strategy<Value = (IsingModel, SpinConfig)> {
    (2..=max_n).prop_flat_map(|n| {
        let pairs = n * (n - 1) / 2;
        (
            proptest::collection::vec(-3.0f64..3.0, n),
            proptest::collection::vec(proptest::option::of(-3.0f64..3.0), pairs),
            -5.0f64..5.0,
            proptest::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], n),
        )
            .prop_map(move |(h, j, offset, spins)| {
                let mut m = IsingModel::new(n);
                for (i, v) in h.into_iter().enumerate() {
                    m.set_h(i, v).unwrap();
                }
                let mut k = 0;
                for a in 0..n {
                    for b in a + 1..n {
                        if let Some(v) = j[k] {
                            m.set_j(a, b, v).unwrap();
                        }
                        k += 1;
                    }
                }
                m.set_offset(offset);
                (m, SpinConfig::new(spins).unwrap())
            })
    })
}

fn naive_energy(m: &IsingModel, z: &SpinConfig) -> f64 {
    let s = z.spins();
    let mut e = m.offset();
    for i in 0..m.n() {
        e += m.h(i) * f64::from(s[i]);
        for k in i + 1..m.n() {
            e += m.coupling(i, k) * f64::from(s[i]) * f64::from(s[k]);
        }
    }
    e
}

proptest! {
    #[test]
    fn energy_matches_the_double_loop((m, z) in model_strategy(12)) {
        prop_assert!((m.energy(&z).unwrap() - naive_energy(&m, &z)).abs() < 1e-9);
    }

    #[test]
    fn flip_delta_matches_recompute((m, z) in model_strategy(12), pick in any::<usize>()) {
        let i = pick % m.n();
        let fields = m.local_fields(&z).unwrap();
        let delta = flip_delta(&z, &fields, i).unwrap();
        let direct = m.energy(&z.flipped(i)).unwrap() - m.energy(&z).unwrap();
        prop_assert!((delta - direct).abs() < 1e-9);
    }

    #[test]
    fn energy_is_linear_in_the_model((m, z) in model_strategy(8), s in 0.1f64..4.0) {
        let scaled = m.scale(s).unwrap().energy(&z).unwrap();
        prop_assert!((scaled - s * m.energy(&z).unwrap()).abs() < 1e-9);
        let doubled = m.add(&m).unwrap().energy(&z).unwrap();
        prop_assert!((doubled - 2.0 * m.energy(&z).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn quantization_is_idempotent_and_bounded(x in -1.0f64..=1.0, bits in 1u32..=16) {
        let q = quantize_value(x, 1.0, bits, Rounding::Nearest).unwrap();
        prop_assert_eq!(quantize_value(q, 1.0, bits, Rounding::Nearest).unwrap(), q);
        prop_assert!((q - x).abs() <= (-(bits as f64) - 1.0).exp2() + 1e-15);
    }

    #[test]
    fn gauges_preserve_energy((m, z) in model_strategy(10), g in proptest::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], 10)) {
        let gauge = SpinConfig::new(g[..m.n()].to_vec()).unwrap();
        let t = srt_transform(&m, &gauge).unwrap();
        let back = srt_untransform(&gauge, &z).unwrap();
        prop_assert!((t.energy(&z).unwrap() - m.energy(&back).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn sqc_output_is_one_flip_minimal((m, z) in model_strategy(10)) {
        let adj = m.adjacency();
        let mut s = z.clone().into_inner();
        sqc_in_place(&adj, &mut s);
        let out = SpinConfig::new(s).unwrap();
        let e = m.energy(&out).unwrap();
        prop_assert!(e <= m.energy(&z).unwrap() + 1e-12);
        for i in 0..m.n() {
            prop_assert!(m.energy(&out.flipped(i)).unwrap() >= e - 1e-9);
        }
    }
}
