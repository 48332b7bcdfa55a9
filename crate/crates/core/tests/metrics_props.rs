use livfuse_core::metrics::{compute_metrics, confusion, evaluate};
use proptest::prelude::*;

fn draws() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, usize)> {
    (2usize..7, 1usize..80).prop_flat_map(|(k, n)| {
        (prop::collection::vec(0..k, n), prop::collection::vec(0..k, n), Just(k))
    })
}

proptest! {
    #[test]
    fn accuracy_is_trace_over_total((t, p, k) in draws()) {
        let cm = confusion(&t, &p, k).unwrap();
        let r = compute_metrics(&cm).unwrap();
        let tp: u64 = (0..k).map(|c| cm.get(c, c)).sum();
        prop_assert_eq!(r.accuracy, tp as f64 / t.len() as f64);
        prop_assert_eq!(cm.total(), t.len() as u64);
        prop_assert!(r.per_class.iter().all(|m| (0.0..=1.0).contains(&m.f1)));
    }

    #[test]
    fn relabeling_permutes_per_class((t, p, k) in draws(), rot in 0usize..7) {
        let perm: Vec<usize> = (0..k).map(|c| (c + rot) % k).collect();
        let a = evaluate(&t, &p, k).unwrap();
        let map = |v: &[usize]| v.iter().map(|&c| perm[c]).collect::<Vec<_>>();
        let b = evaluate(&map(&t), &map(&p), k).unwrap();
        prop_assert_eq!(a.accuracy, b.accuracy);
        for (c, &pc) in perm.iter().enumerate() {
            prop_assert_eq!(a.per_class[c], b.per_class[pc]);
        }
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-15;
        prop_assert!(close(a.macro_precision, b.macro_precision));
        prop_assert!(close(a.macro_recall, b.macro_recall));
        prop_assert!(close(a.macro_f1, b.macro_f1));
    }
}
