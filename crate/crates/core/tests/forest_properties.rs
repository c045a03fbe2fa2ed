use atlasforest::forest::{bootstrap_counts, grow_tree, Forest, HyperParams};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dataset() -> impl Strategy<Value = (Array2<f64>, Vec<usize>)> {
    (2usize..40, 1usize..5).prop_flat_map(|(n, f)| {
        (
            proptest::collection::vec(0i32..8, n * f).prop_map(move |v| {
                Array2::from_shape_vec((n, f), v.into_iter().map(|c| f64::from(c) * 0.25).collect()).unwrap()
            }),
            proptest::collection::vec(0usize..2, n).prop_map(|mut y| {
                y[0] = 0;
                y[1] = 1;
                y
            }),
        )
    })
}

proptest! {
    #[test]
    fn trees_respect_depth_and_probabilities_sum_to_one(
        (x, y) in dataset(),
        depth in 1usize..6,
        n_trees in 1usize..6,
        seed in any::<u64>(),
    ) {
        let forest = Forest::fit(x.view(), &y, &HyperParams::new(depth, n_trees).with_seed(seed)).unwrap();
        for tree in &forest.trees {
            prop_assert!(tree.leaf_depths().iter().all(|&d| d <= depth));
        }
        for row in x.rows() {
            let p = forest.predict_proba(row.as_slice().unwrap()).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        let total: f64 = forest.importances.iter().sum();
        prop_assert!(forest.importances.iter().all(|v| *v >= 0.0));
        if forest.trees.iter().any(|t| t.n_splits() > 0) {
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn row_order_does_not_change_a_tree((x, y) in dataset(), seed in any::<u64>(), depth in 1usize..5) {
        let n = y.len();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let weights: Vec<f64> = bootstrap_counts(n, &mut r).into_iter().map(|c| c as f64).collect();
        let f = x.ncols();
        let (a, ia) = grow_tree(x.view(), &y, &weights, depth, f.div_ceil(2), &mut ChaCha8Rng::seed_from_u64(seed));

        let mut order: Vec<usize> = (0..n).collect();
        order.reverse();
        order.rotate_left(seed as usize % n);
        let xp = Array2::from_shape_fn((n, f), |(i, j)| x[[order[i], j]]);
        let yp: Vec<usize> = order.iter().map(|&i| y[i]).collect();
        let wp: Vec<f64> = order.iter().map(|&i| weights[i]).collect();
        let (b, ib) = grow_tree(xp.view(), &yp, &wp, depth, f.div_ceil(2), &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(a, b);
        prop_assert_eq!(ia, ib);
    }
}

#[test]
fn out_of_bag_fraction_matches_expectation() {
    let mut r = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let counts = bootstrap_counts(1000, &mut r);
        assert_eq!(counts.iter().sum::<usize>(), 1000);
        let oob = counts.iter().filter(|&&c| c == 0).count() as f64 / 1000.0;
        assert!((0.34..=0.40).contains(&oob), "oob fraction {oob}");
    }
}

#[test]
fn determining_feature_dominates_importance() {
    let mut r = ChaCha8Rng::seed_from_u64(8);
    let n = 400;
    let y: Vec<usize> = (0..n).map(|_| r.gen_range(0..2)).collect();
    let x = Array2::from_shape_fn((n, 4), |(i, j)| if j == 2 { y[i] as f64 * 2.0 + r.gen::<f64>() } else { r.gen() });
    let forest = Forest::fit(x.view(), &y, &HyperParams::new(3, 50).with_seed(1)).unwrap();
    assert!(forest.importances[2] > 0.9, "{:?}", forest.importances);
}
