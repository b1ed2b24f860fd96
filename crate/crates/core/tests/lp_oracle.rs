//! Simplex optima against brute-force vertex enumeration on small bounded LPs.

mod common;

use common::{boxed_lp, vertex_min, RawRow};
use proptest::prelude::*;
use stabclust::{solve_lp, LpStatus, Tolerances};

fn lp_case() -> impl Strategy<Value = (Vec<f64>, Vec<RawRow>)> {
    (1usize..=3, 1usize..=6).prop_flat_map(|(n, m)| {
        let c = proptest::collection::vec(-3.0f64..3.0, n);
        let rows = proptest::collection::vec(
            (proptest::collection::vec(-2.0f64..2.0, n), 0u8..3, -3.0f64..3.0),
            m,
        );
        (c, rows)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simplex_matches_vertex_enumeration((c, rows) in lp_case()) {
        let (model, g, h) = boxed_lp(&c, &rows);
        let sol = solve_lp(&model, &Tolerances::default()).unwrap();
        match vertex_min(&c, &g, &h) {
            Some(best) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.objective - best).abs() <= 1e-6 * (1.0 + best.abs()),
                    "simplex {} vs vertices {}", sol.objective, best);
                prop_assert!(model.max_violation(&sol.x).0 <= 1e-7);
            }
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
        }
    }
}
