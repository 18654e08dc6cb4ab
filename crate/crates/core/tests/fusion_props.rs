mod common;

use common::{aligned_set, fusion_case, schedule, simplex};
use proptest::prelude::*;
use streamfuse::stream::{align_streams, argmax, AttentionSchedule, PosteriorStream, StreamSet};
use streamfuse::{fuse, n_best_truncate, validate_stream_set};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn fused_rows_stay_on_simplex((set, sched) in fusion_case()) {
        let out = fuse(&set, &sched).unwrap();
        for row in out.frames() {
            prop_assert!(row.iter().all(|&p| p >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fuse_is_linear_in_weights(
        (set, s1, s2) in (2usize..5, 1usize..10, 2usize..6)
            .prop_flat_map(|(m, t, c)| (aligned_set(m, t, c), schedule(t, m), schedule(t, m))),
        a in 0.0f64..=1.0,
    ) {
        let mixed: Vec<f64> = s1.as_slice().iter().zip(s2.as_slice())
            .map(|(x, y)| a * x + (1.0 - a) * y)
            .collect();
        let mixed = AttentionSchedule::new(set.num_streams(), mixed).unwrap();
        let lhs = fuse(&set, &mixed).unwrap();
        let f1 = fuse(&set, &s1).unwrap();
        let f2 = fuse(&set, &s2).unwrap();
        for ((l, x), y) in lhs.as_slice().iter().zip(f1.as_slice()).zip(f2.as_slice()) {
            prop_assert!((l - (a * x + (1.0 - a) * y)).abs() < 1e-12);
        }
    }

    #[test]
    fn permuting_streams_and_columns_keeps_output(
        (set, sched) in fusion_case(),
        seed in any::<u64>(),
    ) {
        let m = set.num_streams();
        let mut perm: Vec<usize> = (0..m).collect();
        let mut state = seed;
        for i in (1..m).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (state >> 33) as usize % (i + 1));
        }
        let permuted = StreamSet::new(perm.iter().map(|&i| set.stream(i).clone()).collect());
        let cols: Vec<f64> = sched.rows().flat_map(|r| perm.iter().map(move |&i| r[i])).collect();
        let psched = AttentionSchedule::new(m, cols).unwrap();
        let a = fuse(&set, &sched).unwrap();
        let b = fuse(&permuted, &psched).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn truncation_keeps_row_argmax(
        (sched, n) in (2usize..8, 1usize..20)
            .prop_flat_map(|(m, t)| (schedule(t, m), 1..=m)),
    ) {
        let cut = n_best_truncate(&sched, n).unwrap();
        prop_assert_eq!(cut.clone(), n_best_truncate(&sched, n).unwrap());
        for (before, after) in sched.rows().zip(cut.rows()) {
            prop_assert_eq!(argmax(before), argmax(after));
            prop_assert!(after.iter().filter(|&&w| w > 0.0).count() <= n);
            prop_assert!((after.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn align_is_idempotent(
        rows in prop::collection::vec(prop::collection::vec(simplex(3), 8..16), 2..5),
        offsets in prop::collection::vec(-3i32..=3, 5),
    ) {
        let set = StreamSet::new(
            rows.iter().zip(&offsets).enumerate()
                .map(|(i, (r, &o))| PosteriorStream::from_frames(i as u32, r).unwrap().with_frame_offset(o))
                .collect(),
        );
        let once = align_streams(&set).unwrap();
        let twice = align_streams(&once).unwrap();
        prop_assert!(once.is_aligned());
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn generated_sets_validate_clean((set, _) in fusion_case()) {
        prop_assert!(validate_stream_set(&set).is_empty());
    }
}

#[test]
fn tied_weights_truncate_toward_lowest_index() {
    let sched = AttentionSchedule::new(4, vec![0.25; 4]).unwrap();
    assert_eq!(n_best_truncate(&sched, 1).unwrap().row(0), &[1.0, 0.0, 0.0, 0.0]);
    assert_eq!(n_best_truncate(&sched, 2).unwrap().row(0), &[0.5, 0.5, 0.0, 0.0]);
}
