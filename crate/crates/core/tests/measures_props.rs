mod common;

use common::{aligned_set, simplex, sparse_simplex, stream};
use proptest::prelude::*;
use streamfuse::measures::{entropy, symmetric_kld, LOG_FLOOR};
use streamfuse::stream::PosteriorStream;
use streamfuse::{
    binary_window_attention, delta_m_measure, entropy_attention, m_measure, MMeasureConfig, Measure, Window,
};

fn permute_classes(s: &PosteriorStream, perm: &[usize]) -> PosteriorStream {
    let rows: Vec<Vec<f64>> = s.frames().map(|f| perm.iter().map(|&j| f[j]).collect()).collect();
    PosteriorStream::from_frames(s.stream_id(), &rows).unwrap()
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn entropy_is_bounded_and_class_symmetric(
        (p, perm) in (2usize..12).prop_flat_map(|c| (sparse_simplex(c), permutation(c))),
    ) {
        let c = p.len() as f64;
        let h = entropy(&p);
        let slack = c * LOG_FLOOR * LOG_FLOOR.ln().abs();
        prop_assert!(h >= 0.0);
        prop_assert!(h <= c.ln() + slack + 1e-12);
        let q: Vec<f64> = perm.iter().map(|&j| p[j]).collect();
        prop_assert!(close(h, entropy(&q), 1e-12));
    }

    #[test]
    fn kld_is_symmetric_and_non_negative(
        (p, q) in (2usize..10).prop_flat_map(|c| (sparse_simplex(c), sparse_simplex(c))),
    ) {
        let d = symmetric_kld(&p, &q);
        prop_assert!(d >= 0.0);
        prop_assert_eq!(d, symmetric_kld(&q, &p));
        prop_assert_eq!(symmetric_kld(&p, &p), 0.0);
    }

    #[test]
    fn mixing_toward_uniform_raises_entropy(
        p in (2usize..=8).prop_flat_map(sparse_simplex),
        lambda in 0.01f64..=1.0,
    ) {
        let c = p.len() as f64;
        prop_assume!(p.iter().any(|&x| (x - 1.0 / c).abs() > 1e-9));
        let mixed: Vec<f64> = p.iter().map(|&x| (1.0 - lambda) * x + lambda / c).collect();
        prop_assert!(entropy(&mixed) > entropy(&p));
    }

    #[test]
    fn entropy_attention_rows_sum_to_one(set in aligned_set(4, 10, 5)) {
        let sched = entropy_attention(&set).unwrap();
        for row in sched.rows() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn m_measure_ignores_class_relabelling(
        (s, perm) in (2usize..7).prop_flat_map(|c| (stream(70, c), permutation(c))),
    ) {
        let cfg = MMeasureConfig::default();
        let a = m_measure(&s, &cfg).unwrap().value;
        let b = m_measure(&permute_classes(&s, &perm), &cfg).unwrap().value;
        prop_assert!(close(a, b, 1e-12));
        let da = delta_m_measure(&s, &cfg).unwrap().value;
        let db = delta_m_measure(&permute_classes(&s, &perm), &cfg).unwrap().value;
        prop_assert!(close(da, db, 1e-12));
    }

    #[test]
    fn binary_window_rows_are_one_hot(set in aligned_set(3, 130, 4)) {
        let cfg = MMeasureConfig::new(vec![5, 10, 20], Window::Frames(40)).unwrap();
        for measure in [Measure::M, Measure::DeltaM] {
            let sched = binary_window_attention(&set, &cfg, measure).unwrap();
            for row in sched.rows() {
                prop_assert_eq!(row.iter().filter(|&&w| w == 1.0).count(), 1);
                prop_assert_eq!(row.iter().filter(|&&w| w == 0.0).count(), 2);
            }
        }
    }

    #[test]
    fn delta_m_equals_m_when_every_pair_changes_class(
        rows in prop::collection::vec(simplex(7), 90),
    ) {
        // Winner cycles with period 7, which divides none of the spans.
        let rows: Vec<Vec<f64>> = rows
            .into_iter()
            .enumerate()
            .map(|(t, mut r)| {
                r[t % 7] += 2.0;
                let s: f64 = r.iter().sum();
                r.iter().map(|x| x / s).collect()
            })
            .collect();
        let s = PosteriorStream::from_frames(0, &rows).unwrap();
        let cfg = MMeasureConfig::default();
        let m = m_measure(&s, &cfg).unwrap().value;
        let d = delta_m_measure(&s, &cfg).unwrap().value;
        prop_assert!(close(m, d, 1e-12));
    }
}
