mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use streamfuse::decoder::HmmModel;
use streamfuse::measures::entropy;
use streamfuse::simulator::{emit, generate_reference, sample_labels, CorpusSpec, CorruptionProfile, Emission};
use streamfuse::{corrupt, m_measure, MMeasureConfig};

fn clean_stream(seed: u64, frames: usize, classes: usize) -> streamfuse::PosteriorStream {
    let hmm = HmmModel::self_loop(classes, 0.8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = sample_labels(&hmm, frames, &mut rng);
    emit(&labels, classes, Emission::default(), 0, &mut rng)
}

fn profile() -> impl Strategy<Value = CorruptionProfile> {
    (0.0f64..=1.0, 0usize..12, any::<bool>(), -4i32..=4).prop_map(|(mix, smear, fail, offset)| CorruptionProfile {
        mix,
        smear,
        fail,
        offset,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn corruption_keeps_frames_on_simplex(
        s in (2usize..8, 1usize..40).prop_flat_map(|(c, t)| common::stream(t, c)),
        p in profile(),
        seed in any::<u64>(),
    ) {
        let out = corrupt(&s, &p, seed).unwrap();
        prop_assert_eq!(out.len(), s.len());
        prop_assert_eq!(out.frame_offset(), p.offset);
        for row in out.frames() {
            prop_assert!(row.iter().all(|&x| x >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn entropy_does_not_fall_as_mixing_grows(
        s in (2usize..8, 1usize..20).prop_flat_map(|(c, t)| common::stream(t, c)),
    ) {
        let grid = [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0];
        let mut last = vec![f64::NEG_INFINITY; s.len()];
        for &mix in &grid {
            let p = CorruptionProfile { mix, ..CorruptionProfile::clean() };
            let out = corrupt(&s, &p, 0).unwrap();
            for (t, row) in out.frames().enumerate() {
                let h = entropy(row);
                prop_assert!(h >= last[t] - 1e-12, "frame {} at mix {}", t, mix);
                last[t] = h;
            }
        }
    }
}

#[test]
fn smearing_lowers_m_measure() {
    let cfg = MMeasureConfig::default();
    for seed in 0..5 {
        let s = clean_stream(seed, 300, 6);
        let values: Vec<f64> = [0, 3, 9, 27]
            .iter()
            .map(|&smear| {
                let p = CorruptionProfile {
                    smear,
                    ..CorruptionProfile::clean()
                };
                m_measure(&corrupt(&s, &p, 0).unwrap(), &cfg).unwrap().value
            })
            .collect();
        assert!(values.windows(2).all(|w| w[1] <= w[0]), "seed {seed}: {values:?}");
    }
}

#[test]
fn label_marginals_match_stationary_distribution() {
    let transitions = vec![
        0.8, 0.15, 0.05, //
        0.1, 0.7, 0.2, //
        0.3, 0.1, 0.6,
    ];
    let hmm = HmmModel::new(transitions, vec![0.5, 0.3, 0.2], streamfuse::decoder::default_labels(3)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let labels = sample_labels(&hmm, 10_000, &mut rng);
    let pi = hmm.stationary();
    // Successive labels are correlated, so thin the path before the test.
    let thinned: Vec<usize> = labels.iter().step_by(10).copied().collect();
    let n = thinned.len() as f64;
    let mut counts = [0.0; 3];
    for &y in &thinned {
        counts[y] += 1.0;
    }
    let chi2: f64 = counts
        .iter()
        .zip(&pi)
        .map(|(&o, &p)| (o - n * p).powi(2) / (n * p))
        .sum();
    let p_value = 1.0 - ChiSquared::new(2.0).unwrap().cdf(chi2);
    assert!(p_value > 0.01, "chi2 {chi2}, p {p_value}");
}

#[test]
fn stationary_vector_is_a_fixed_point() {
    let hmm = HmmModel::self_loop(4, 0.9).unwrap();
    let pi = hmm.stationary();
    for j in 0..4 {
        let next: f64 = (0..4).map(|i| pi[i] * hmm.transition(i, j)).sum();
        assert!((next - pi[j]).abs() < 1e-12);
    }
}

#[test]
fn reference_streams_share_labels_but_not_noise() {
    let hmm = HmmModel::self_loop(5, 0.9).unwrap();
    let spec = CorpusSpec {
        utterances: 2,
        min_frames: 30,
        max_frames: 30,
        classes: 5,
        streams: 3,
        seed: 9,
        emission: Emission::default(),
    };
    let refs = generate_reference(&spec, &hmm).unwrap();
    for r in &refs {
        assert_eq!(r.streams.len(), 3);
        assert!(r.streams.iter().all(|s| s.len() == r.labels.len()));
        assert_ne!(r.streams[0], r.streams[1]);
    }
    assert_ne!(refs[0].labels, refs[1].labels);
}
