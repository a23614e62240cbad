mod common;

use common::*;
use consensus::nn::Matrix;
use consensus::viz::pca_top2;
use proptest::prelude::*;

#[test]
fn matches_dense_eigensolver_on_random_matrices() {
    for seed in 0..50 {
        let x = random_pca_input(100 + seed);
        let gap = pca_discrepancy(&pca_top2(&x).unwrap(), &oracle_pca(&x));
        assert!(gap < 1e-6, "seed {seed}: discrepancy {gap:e}");
    }
}

#[test]
fn rank_one_line() {
    let x = Matrix::from_fn(9, 2, |r, c| (r as f64 * 0.5 - 1.0) * [1.0, 2.0][c]);
    let p = pca_top2(&x).unwrap();
    let s5 = 5f64.sqrt();
    assert!((p.components[0][0] - 1.0 / s5).abs() < 1e-12);
    assert!((p.components[0][1] - 2.0 / s5).abs() < 1e-12);
    assert!((p.explained_fraction - 1.0).abs() < 1e-12);
}

#[test]
fn isotropic_plane_is_fully_explained() {
    let mut r = rng(3);
    let x = normal_matrix(200, 2, &mut r);
    let p = pca_top2(&x).unwrap();
    assert!((p.explained_fraction - 1.0).abs() < 1e-12);
    assert!(pca_discrepancy(&p, &oracle_pca(&x)) < 1e-6);
}

fn cloud() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3usize..30, 2usize..6).prop_flat_map(|(n, d)| {
        (
            proptest::collection::vec(-5.0f64..5.0, n * d).prop_map(move |v| {
                let mut v = v;
                v.push(d as f64);
                v
            }),
            proptest::collection::vec(-100.0f64..100.0, d),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn translation_invariant_and_ordered((mut flat, shift) in cloud()) {
        let d = flat.pop().unwrap() as usize;
        let n = flat.len() / d;
        let x = Matrix::from_vec(n, d, flat).unwrap();
        let Ok(p) = pca_top2(&x) else { return Ok(()); };
        let moved = Matrix::from_fn(n, d, |r, c| x.get(r, c) + shift[c]);
        let q = pca_top2(&moved).unwrap();
        prop_assert!(p.variances[0] >= p.variances[1] - 1e-9);
        prop_assert!((0.0..=1.0).contains(&p.explained_fraction));
        let scale = p.variances[0].sqrt().max(1.0);
        if p.variances[0] - p.variances[1] > 1e-3 * p.variances[0] {
            for k in 0..n {
                prop_assert!((p.coords.get(k, 0) - q.coords.get(k, 0)).abs() < 1e-6 * scale);
            }
        }
    }
}
