use atlasforest::eval::{auc, mann_whitney_auc, nested_cv, roc_curve};
use atlasforest::features::FeatureMatrix;
use atlasforest::forest::HyperParams;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<usize>)> {
    proptest::collection::vec((0u8..12, 0usize..2), 2..60).prop_map(|mut v| {
        v[0].1 = 0;
        v[1].1 = 1;
        v.into_iter().map(|(s, l)| (f64::from(s) / 11.0, l)).unzip()
    })
}

proptest! {
    #[test]
    fn roc_is_monotone_and_auc_counts_pairs((scores, labels) in scored()) {
        let roc = roc_curve(&scores, &labels).unwrap();
        for w in roc.windows(2) {
            prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
        }
        let (mut credit, mut pairs) = (0.0, 0.0);
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li == 1 && lj == 0 {
                    pairs += 1.0;
                    credit += if scores[i] > scores[j] { 1.0 } else if scores[i] == scores[j] { 0.5 } else { 0.0 };
                }
            }
        }
        prop_assert!((auc(&roc) - credit / pairs).abs() <= 1e-12);
        prop_assert!((mann_whitney_auc(&scores, &labels).unwrap() - credit / pairs).abs() <= 1e-12);
    }
}

#[test]
fn every_row_is_predicted_once() {
    let mut r = ChaCha8Rng::seed_from_u64(6);
    let n = 47;
    let y: Vec<usize> = (0..n).map(|i| usize::from(i % 3 == 0)).collect();
    let values = Array2::from_shape_fn((n, 3), |(i, j)| if j == 0 { y[i] as f64 + r.gen::<f64>() } else { r.gen() });
    let x = FeatureMatrix::from_dense(
        vec!["a".into(), "b".into(), "c".into()],
        values,
        (0..n).map(|i| format!("r{i}")).collect(),
    )
    .unwrap();
    let grid = [HyperParams::new(1, 5), HyperParams::new(2, 10)];
    let report = nested_cv(&x, &y, &grid, 3).unwrap();
    let mut seen = vec![0; n];
    for p in &report.predictions {
        seen[x.row_ids.iter().position(|id| *id == p.row_id).unwrap()] += 1;
    }
    assert!(seen.iter().all(|&c| c == 1));
    assert_eq!(report, nested_cv(&x, &y, &grid, 3).unwrap());
}
