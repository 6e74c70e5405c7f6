use std::sync::Arc;

use proptest::prelude::*;
use singplap_core::mesh::{build_interval_mesh, Field};
use singplap_core::nonlinearity::{
    cutoff_v, default_sample_grid, lower_envelope, make_power_problem, truncate_scalar, TruncationLevel,
};

proptest! {
    #[test]
    fn truncation_is_nonexpansive(a in -1e6..1e6f64, b in -1e6..1e6f64, k in 1e-3..1e3f64) {
        let (ta, tb) = (truncate_scalar(a, k), truncate_scalar(b, k));
        prop_assert!((ta - tb).abs() <= (a - b).abs());
        prop_assert!(ta.abs() <= k);
    }

    #[test]
    fn cutoff_is_nonincreasing_in_unit_range(s1 in 0.0..10.0f64, s2 in 0.0..10.0f64, delta in 1e-3..3.0f64) {
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        let (vl, vh) = (cutoff_v(lo, delta), cutoff_v(hi, delta));
        prop_assert!((0.0..=1.0).contains(&vl) && (0.0..=1.0).contains(&vh));
        prop_assert!(vh <= vl);
    }

    #[test]
    fn truncated_nonlinearities_respect_envelopes(
        gamma in 0.0..4.0f64,
        q in 0.0..1.0f64,
        n in 1u64..1000,
        s in 1e-8..1e8f64,
    ) {
        let m = Arc::new(build_interval_mesh(0.0, 1.0, 4).unwrap());
        let spec = make_power_problem(2.0, gamma, q, Field::constant(&m, 1.0), Field::constant(&m, 1.0)).unwrap();
        let lvl = TruncationLevel::new(n).unwrap();
        let next = TruncationLevel::new(n + 1).unwrap();
        let cap = n as f64;
        let (hn, kn) = (lvl.h_n(spec.h(), s), lvl.k_n(spec.k(), s));
        prop_assert!(hn >= 0.0 && hn <= cap.min(spec.c_under() * s.powf(-gamma)) * (1.0 + 1e-12));
        prop_assert!(kn >= 0.0 && kn <= cap.min(spec.c_over() * s.powf(q)) * (1.0 + 1e-12));
        prop_assert!(hn <= next.h_n(spec.h(), s));
        prop_assert!(kn <= next.k_n(spec.k(), s));
        prop_assert_eq!(lvl.k_n(spec.k(), 0.0), 0.0);
        prop_assert!(lvl.h_n(spec.h(), 0.0) <= cap);
    }

    #[test]
    fn lower_envelope_is_nonincreasing_below_h1(gamma in 0.1..4.0f64) {
        let m = Arc::new(build_interval_mesh(0.0, 1.0, 4).unwrap());
        let spec = make_power_problem(2.0, gamma, 0.0, Field::constant(&m, 1.0), Field::zeros(&m)).unwrap();
        let grid = default_sample_grid();
        let env = lower_envelope(&spec, &grid).unwrap();
        let h1 = TruncationLevel::new(1).unwrap();
        let vals: Vec<f64> = grid.iter().map(|&s| env.eval(s)).collect();
        prop_assert!(vals.windows(2).all(|w| w[1] <= w[0]));
        for (&s, &v) in grid.iter().zip(&vals) {
            prop_assert!(v <= h1.h_n(spec.h(), s));
        }
    }
}
