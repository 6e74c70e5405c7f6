use std::sync::Arc;

use proptest::collection::vec;
use proptest::prelude::*;
use singplap_core::analysis::{
    boundary_exponent_fit, comparison_certificate, default_fit_band, threshold_bounds, thresholds,
};
use singplap_core::mesh::{boundary_distance, build_interval_mesh, build_rectangle_mesh, Field, Mesh};
use singplap_core::nonlinearity::make_power_problem;

fn mesh() -> impl Strategy<Value = Arc<Mesh>> {
    prop_oneof![
        (40usize..400).prop_map(|n| Arc::new(build_interval_mesh(0.0, 1.0, n).unwrap())),
        (40usize..80).prop_map(|n| Arc::new(build_rectangle_mesh([0.0, 0.0], [1.0, 1.0], n, n).unwrap())),
    ]
}

fn positive_field(m: &Arc<Mesh>, vals: &[f64]) -> Field {
    let v = (0..m.node_count()).map(|i| vals[i % vals.len()]).collect();
    Field::new(Arc::clone(m), v).unwrap().with_dirichlet_zero()
}

proptest! {
    #[test]
    fn certificate_of_identical_fields_is_zero(
        m in mesh(),
        vals in vec(0.01..5.0f64, 1..50),
        other in vec(0.01..5.0f64, 1..50),
        gamma in 0.5..3.0f64,
        p in 1.2..4.0f64,
        eps in 0.0..0.5f64,
    ) {
        let spec = make_power_problem(p, gamma, 0.0, Field::constant(&m, 1.0), Field::zeros(&m)).unwrap();
        let v = positive_field(&m, &vals);
        let c = comparison_certificate(&v, &v, &spec, p, None, eps).unwrap();
        prop_assert_eq!(c.final_sign_quantity, 0.0);
        prop_assert_eq!(c.violation_measure, 0.0);
        let w = positive_field(&m, &other);
        let c = comparison_certificate(&v, &w, &spec, p, None, eps).unwrap();
        prop_assert!((0.0..=1.0).contains(&c.violation_measure));
        prop_assert!(c.epsilon >= 0.0);
    }

    #[test]
    fn fits_are_exact_on_pure_powers(m in mesh(), c in 0.1..10.0f64, beta in 0.1..2.0f64) {
        let d = boundary_distance(&m);
        let u = d.map(|s| c * s.powf(beta));
        let fit = boundary_exponent_fit(&u, &d, default_fit_band(&m)).unwrap();
        prop_assert!((fit - beta).abs() <= 1e-12, "fit {fit} vs {beta}");
    }

    #[test]
    fn threshold_predicates_follow_formulas(
        gamma in 0.0..5.0f64,
        m in prop_oneof![Just(f64::INFINITY), 1.0..20.0f64],
        p in 1.1..6.0f64,
    ) {
        let v = thresholds(gamma, m, p);
        prop_assert_eq!(&v, &thresholds(gamma, m, p));
        let (ex, cin, plap) = if m.is_infinite() {
            (2.0, 3.0, 1.0 + p / (p - 1.0))
        } else {
            (2.0 - 1.0 / m, 3.0 - 2.0 / m, 1.0 + p * (m - 1.0) / ((p - 1.0) * m))
        };
        prop_assert_eq!(v.ex_gamma, gamma < ex);
        prop_assert_eq!(v.cin_gamma, gamma < cin);
        prop_assert_eq!(v.plap_gamma, gamma < plap);
        let b = threshold_bounds(m, p);
        prop_assert!(b.ex <= b.cin);
    }
}
