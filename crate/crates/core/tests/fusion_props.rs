use livfuse_core::{compute_weights, fuse, predict_class, ModalityOutput, ProbabilityMatrix};
use proptest::prelude::*;

fn stochastic(rows: usize, k: usize) -> impl Strategy<Value = ProbabilityMatrix> {
    prop::collection::vec(prop::collection::vec(0.0f64..1.0, k), rows).prop_map(move |raw| {
        let rows: Vec<Vec<f64>> = raw
            .into_iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                if s == 0.0 {
                    vec![1.0 / k as f64; k]
                } else {
                    r.iter().map(|v| v / s).collect()
                }
            })
            .collect();
        ProbabilityMatrix::from_rows(&rows).unwrap()
    })
}

/// `m` modality matrices sharing a shape, with accuracies in (0, 1].
fn modalities() -> impl Strategy<Value = (Vec<ProbabilityMatrix>, Vec<f64>)> {
    (1usize..8, 2usize..6, 2usize..5).prop_flat_map(|(n, k, m)| {
        (prop::collection::vec(stochastic(n, k), m), prop::collection::vec(0.01f64..=1.0, m))
    })
}

fn outputs(mats: &[ProbabilityMatrix], acc: &[f64]) -> Vec<ModalityOutput> {
    let ids: Vec<String> = (0..mats[0].n_rows()).map(|i| format!("s{i}")).collect();
    mats.iter()
        .zip(acc)
        .enumerate()
        .map(|(j, (p, &a))| ModalityOutput::new(format!("m{j}"), a, ids.clone(), p.clone()).unwrap())
        .collect()
}

proptest! {
    #[test]
    fn closure_and_convexity((mats, acc) in modalities()) {
        let h = fuse(&outputs(&mats, &acc), &compute_weights(&acc).unwrap()).unwrap();
        for i in 0..h.probs.n_rows() {
            let row = h.probs.row(i);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            for (c, &v) in row.iter().enumerate() {
                let lo = mats.iter().map(|p| p.get(i, c)).fold(f64::INFINITY, f64::min);
                let hi = mats.iter().map(|p| p.get(i, c)).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(lo <= v && v <= hi);
            }
        }
        prop_assert_eq!(h.classes, predict_class(&h.probs));
    }

    #[test]
    fn class_permutation_equivariance((mats, acc) in modalities(), seed in any::<u64>()) {
        let k = mats[0].n_classes();
        let mut perm: Vec<usize> = (0..k).collect();
        let mut s = seed;
        for i in (1..k).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let permuted: Vec<ProbabilityMatrix> = mats
            .iter()
            .map(|p| ProbabilityMatrix::from_rows(&p.rows().map(|r| perm.iter().map(|&c| r[c]).collect()).collect::<Vec<_>>()).unwrap())
            .collect();
        let w = compute_weights(&acc).unwrap();
        let h = fuse(&outputs(&mats, &acc), &w).unwrap();
        let hp = fuse(&outputs(&permuted, &acc), &w).unwrap();
        for i in 0..h.probs.n_rows() {
            for (new, &old) in perm.iter().enumerate() {
                prop_assert_eq!(hp.probs.get(i, new), h.probs.get(i, old));
            }
            // the permuted argmax applies its own lowest-index tie rule
            let row = hp.probs.row(i);
            let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(hp.classes[i], row.iter().position(|&v| v == best).unwrap());
            prop_assert_eq!(h.probs.get(i, perm[hp.classes[i]]), h.probs.get(i, h.classes[i]));
        }
    }

    #[test]
    fn power_of_two_rescaling_is_exact(acc in prop::collection::vec(0.01f64..=1.0, 2..6), e in -20i32..=0) {
        let c = 2f64.powi(e);
        let scaled: Vec<f64> = acc.iter().map(|a| a * c).collect();
        prop_assert_eq!(compute_weights(&scaled).unwrap(), compute_weights(&acc).unwrap());
    }

    #[test]
    fn general_rescaling_within_rounding(acc in prop::collection::vec(0.01f64..=1.0, 2..6), frac in 1e-3f64..0.999) {
        // keeps every rescaled accuracy inside [0, 1]
        let c = frac / acc.iter().cloned().fold(0.0, f64::max);
        let scaled: Vec<f64> = acc.iter().map(|a| a * c).collect();
        let a = compute_weights(&acc).unwrap();
        let b = compute_weights(&scaled).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((x - y).abs() <= 4.0 * f64::EPSILON * x.max(*y));
        }
    }

    #[test]
    fn equal_accuracies_give_plain_mean((mats, _) in modalities(), a in 0.01f64..=1.0) {
        let acc = vec![a; mats.len()];
        let h = fuse(&outputs(&mats, &acc), &compute_weights(&acc).unwrap()).unwrap();
        let m = mats.len() as f64;
        for i in 0..h.probs.n_rows() {
            for c in 0..h.probs.n_classes() {
                let mean = mats.iter().map(|p| p.get(i, c)).sum::<f64>() / m;
                prop_assert!((h.probs.get(i, c) - mean).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn identical_inputs_reproduce_exactly(p in stochastic(5, 3), acc in prop::collection::vec(0.01f64..=1.0, 2..5)) {
        let mats = vec![p.clone(); acc.len()];
        let h = fuse(&outputs(&mats, &acc), &compute_weights(&acc).unwrap()).unwrap();
        prop_assert_eq!(h.probs, p);
    }
}
