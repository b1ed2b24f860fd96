//! Branch and bound against exhaustive enumeration of binary fixings.

mod common;

use common::{exhaustive, small_mip, RawRow};
use proptest::prelude::*;
use stabclust::{solve_mip, BnbConfig, LpModel, MipModel, MipStatus, RowSense, Tolerances};

type MipCase = (usize, usize, Vec<f64>, Vec<RawRow>);

fn mip_case() -> impl Strategy<Value = MipCase> {
    (1usize..=12, 0usize..=3, 1usize..=6).prop_flat_map(|(nb, nc, m)| {
        let n = nb + nc;
        let c = proptest::collection::vec(-3.0f64..3.0, n);
        let rows = proptest::collection::vec((proptest::collection::vec(-2.0f64..2.0, n), 0u8..2, -2.0f64..2.0), m);
        (Just(nb), Just(nc), c, rows)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn bnb_matches_exhaustive_fixing((nb, nc, c, rows) in mip_case()) {
        let model = small_mip(nb, nc, c, rows);
        let sol = solve_mip(&model, &BnbConfig::default(), None).unwrap();
        match exhaustive(&model) {
            Some(best) => {
                prop_assert_eq!(sol.status, MipStatus::Optimal);
                prop_assert!((sol.objective - best).abs() <= 1e-6 * (1.0 + best.abs()),
                    "bnb {} vs exhaustive {}", sol.objective, best);
                prop_assert!(model.check_feasible(&sol.x, &Tolerances::default()).is_ok());
                let hist = &sol.stats.incumbent_history;
                prop_assert!(hist.windows(2).all(|w| w[1].1 <= w[0].1));
            }
            None => prop_assert_eq!(sol.status, MipStatus::Infeasible),
        }
    }
}

#[test]
fn gub_constrained_assignment_matches_exhaustive() {
    // Three items, two bins, each item in exactly one bin; capacity per bin.
    let weights = [3.0, 2.0, 2.0];
    let cost = [[1.0, 2.5], [2.0, 0.5], [1.5, 1.0]];
    let mut lp = LpModel::new(6);
    let mut obj = Vec::new();
    for i in 0..3 {
        obj.extend_from_slice(&cost[i]);
    }
    lp.set_objective(obj).unwrap();
    for i in 0..3 {
        let mut row = vec![0.0; 6];
        row[2 * i] = 1.0;
        row[2 * i + 1] = 1.0;
        lp.add_row(row, RowSense::Eq, 1.0).unwrap();
    }
    for b in 0..2 {
        let mut row = vec![0.0; 6];
        for i in 0..3 {
            row[2 * i + b] = weights[i];
        }
        lp.add_row(row, RowSense::Le, 4.0).unwrap();
    }
    let model = MipModel::new(lp, (0..6).collect()).unwrap();
    let sol = solve_mip(&model, &BnbConfig::default(), None).unwrap();
    let best = exhaustive(&model).unwrap();
    assert!((sol.objective - best).abs() < 1e-9);
}
