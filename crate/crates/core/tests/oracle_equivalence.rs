//! Model and instability results against exhaustive enumeration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stabclust::formulation::DEFAULT_ALPHA;
use stabclust::oracle::{bf_instability, bf_sc, nearest_vertex_distance};
use stabclust::{
    build_sc_lb, build_sc_ub, compute_big_m, gen_synthetic, solve_mip, worst_case_distance, BnbConfig, Dataset,
    MipStatus, NormKind, SyntheticSpec, Tolerances,
};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * (1.0 + a.abs().max(b.abs()))
}

fn instance(seed: u64, n: usize, m: usize, k: usize) -> Dataset {
    gen_synthetic(&SyntheticSpec::new(n, m, k, seed)).unwrap().normalized().unwrap()
}

fn mip(ds: &Dataset, l: usize, norm: NormKind, alpha: Option<f64>) -> Option<f64> {
    let bm = compute_big_m(ds, 1e3, &Tolerances::default()).unwrap();
    let (model, _) = match alpha {
        Some(a) => build_sc_ub(ds, l, norm, &bm, a).unwrap(),
        None => build_sc_lb(ds, l, norm, &bm).unwrap(),
    };
    let sol = solve_mip(&model, &BnbConfig::default(), None).unwrap();
    match sol.status {
        MipStatus::Optimal => Some(sol.objective),
        MipStatus::Infeasible => None,
        other => panic!("search stopped with {other:?}"),
    }
}

#[test]
fn worst_case_distance_matches_enumeration() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut cases = 0;
    for seed in 0..25u64 {
        let n = rng.random_range(2..=3);
        let ds = instance(seed, n, rng.random_range(2 * n + 1..=8), 2);
        for it in &ds.items {
            // One random direction and one facet normal, whose optimal face
            // is not a single vertex.
            let random: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let facet = it.dmp.a[rng.random_range(0..it.dmp.m())].clone();
            for c in [random, facet] {
                for norm in [NormKind::LInf, NormKind::L1] {
                    let got = worst_case_distance(&it.dmp, &it.x_hat, &c, norm, &tol).unwrap();
                    let want = bf_instability(&it.dmp, &it.x_hat, &c, norm, &tol).unwrap();
                    assert!(close(got, want), "seed {seed} {norm:?} c {c:?}: {got} vs {want}");
                    cases += 1;
                }
            }
        }
    }
    assert_eq!(cases, 200);
}

#[test]
fn l1_models_match_enumeration() {
    let tol = Tolerances::default();
    for seed in 0..6u64 {
        let ds = instance(seed, 2, 6, 3 + (seed as usize % 2));
        for l in 1..=2 {
            for alpha in [None, Some(DEFAULT_ALPHA)] {
                let want = bf_sc(&ds, l, NormKind::L1, alpha, &tol).ok().map(|r| r.objective);
                let got = mip(&ds, l, NormKind::L1, alpha);
                match (got, want) {
                    (Some(a), Some(b)) => assert!(close(a, b), "seed {seed} L {l} {alpha:?}: {a} vs {b}"),
                    (a, b) => assert_eq!(a.is_some(), b.is_some(), "seed {seed} L {l} {alpha:?}"),
                }
            }
        }
    }
}

#[test]
fn strict_floor_only_raises_the_optimum() {
    let tol = Tolerances::default();
    for seed in 0..8u64 {
        let ds = instance(seed, 2, 6, 4);
        let lb = bf_sc(&ds, 2, NormKind::LInf, None, &tol).unwrap().objective;
        if let Ok(ub) = bf_sc(&ds, 2, NormKind::LInf, Some(DEFAULT_ALPHA), &tol) {
            assert!(ub.objective >= lb - 1e-9, "seed {seed}: {} < {lb}", ub.objective);
        }
    }
}

#[test]
fn singletons_reach_nearest_vertices() {
    let tol = Tolerances::default();
    for seed in 0..5u64 {
        let ds = instance(seed, 2, 6, 3);
        let want = ds
            .items
            .iter()
            .map(|it| nearest_vertex_distance(&it.dmp, &it.x_hat, NormKind::LInf, &tol).unwrap())
            .fold(0.0, f64::max);
        let got = bf_sc(&ds, 3, NormKind::LInf, None, &tol).unwrap().objective;
        assert!(close(got, want), "seed {seed}: {got} vs {want}");
        assert!(close(mip(&ds, 3, NormKind::LInf, None).unwrap(), want));
    }
}
