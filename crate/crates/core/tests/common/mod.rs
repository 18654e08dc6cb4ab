#![allow(dead_code)]

use proptest::prelude::*;
use streamfuse::stream::{AttentionSchedule, PosteriorStream, StreamSet};

/// A strictly positive simplex vector of length `n`.
pub fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

/// Simplex vector with some entries exactly zero.
pub fn sparse_simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    (
        prop::collection::vec(0.0f64..1.0, n),
        prop::collection::vec(any::<bool>(), n),
        0..n,
    )
        .prop_map(|(v, keep, forced)| {
            let mut v: Vec<f64> = v.iter().zip(&keep).map(|(&x, &k)| if k { x } else { 0.0 }).collect();
            v[forced] += 0.5;
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
}

pub fn stream(frames: usize, classes: usize) -> impl Strategy<Value = PosteriorStream> {
    prop::collection::vec(simplex(classes), frames).prop_map(|rows| PosteriorStream::from_frames(0, &rows).unwrap())
}

/// Aligned set of `m` streams with `frames` frames and `classes` classes.
pub fn aligned_set(m: usize, frames: usize, classes: usize) -> impl Strategy<Value = StreamSet> {
    prop::collection::vec(stream(frames, classes), m).prop_map(|streams| {
        StreamSet::new(
            streams
                .into_iter()
                .enumerate()
                .map(|(i, s)| s.with_stream_id(i as u32))
                .collect(),
        )
    })
}

pub fn schedule(frames: usize, m: usize) -> impl Strategy<Value = AttentionSchedule> {
    prop::collection::vec(sparse_simplex(m), frames)
        .prop_map(move |rows| AttentionSchedule::new(m, rows.concat()).unwrap())
}

/// Set, schedule and sizes drawn together.
pub fn fusion_case() -> impl Strategy<Value = (StreamSet, AttentionSchedule)> {
    (2usize..6, 1usize..12, 2usize..7).prop_flat_map(|(m, t, c)| (aligned_set(m, t, c), schedule(t, m)))
}

pub mod io_cases {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::path::Path;
    use streamfuse::aemonitor::{fit_pca, Activation, FrontEnd, Network, SplicePlan};
    use streamfuse::decoder::HmmModel;
    use streamfuse::io::{self, Manifest, UtteranceRecord};
    use streamfuse::simulator::CorruptionProfile;
    use streamfuse::{AeModel, Context};

    /// Streams with arbitrary ids, offsets and near-simplex rows.
    pub fn any_stream() -> impl Strategy<Value = PosteriorStream> {
        (1usize..9, 1usize..40, any::<u32>(), any::<i32>()).prop_flat_map(|(c, t, id, off)| {
            prop::collection::vec(sparse_simplex(c), t)
                .prop_map(move |rows| PosteriorStream::from_frames(id, &rows).unwrap().with_frame_offset(off))
        })
    }

    pub fn any_schedule() -> impl Strategy<Value = AttentionSchedule> {
        (1usize..9, 1usize..40).prop_flat_map(|(m, t)| schedule(t, m))
    }

    fn word() -> impl Strategy<Value = String> {
        "[a-z0-9_]{1,12}"
    }

    fn profile() -> impl Strategy<Value = CorruptionProfile> {
        (0.0f64..=1.0, 0usize..64, any::<bool>(), -50i32..=50).prop_map(|(mix, smear, fail, offset)| {
            CorruptionProfile {
                mix,
                smear,
                fail,
                offset,
            }
        })
    }

    pub fn any_manifest() -> impl Strategy<Value = Manifest> {
        (
            word(),
            2usize..20,
            any::<u64>(),
            "[0-9a-f]{64}",
            prop::collection::vec((word(), 1usize..100_000, 0usize..20), 0..20),
        )
            .prop_flat_map(|(scenario, classes, seed, hash, utts)| {
                (1usize..16).prop_flat_map(move |streams| {
                    let (scenario, hash, utts) = (scenario.clone(), hash.clone(), utts.clone());
                    prop::collection::vec(profile(), streams).prop_map(move |profiles| Manifest {
                        scenario: scenario.clone(),
                        streams,
                        classes,
                        seed,
                        config_hash: hash.clone(),
                        profiles,
                        utterances: utts
                            .iter()
                            .map(|(id, frames, oracle)| UtteranceRecord {
                                id: id.clone(),
                                frames: *frames,
                                oracle: *oracle,
                            })
                            .collect(),
                    })
                })
            })
    }

    pub fn any_labels() -> impl Strategy<Value = (Vec<usize>, usize)> {
        (2usize..50).prop_flat_map(|c| (prop::collection::vec(0..c, 0..200), Just(c)))
    }

    pub fn any_hmm() -> impl Strategy<Value = HmmModel> {
        (2usize..7).prop_flat_map(|c| {
            (
                prop::collection::vec(simplex(c), c),
                simplex(c),
                prop::collection::vec("[A-Za-z][A-Za-z0-9_]{0,5}", c),
            )
                .prop_map(|(rows, priors, labels)| HmmModel::new(rows.concat(), priors, labels).unwrap())
        })
    }

    /// Small random model with a fitted front end, fully determined by `seed`.
    pub fn model_from_seed(seed: u64) -> AeModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = rng.random_range(2..7);
        let k = rng.random_range(1..=c);
        let data = Array2::from_shape_fn((40, c), |_| rng.random_range(-3.0..3.0));
        let clamp = rng.random_range(1e-8..0.1);
        let front_end = FrontEnd::new(fit_pca(data.view(), k).unwrap(), clamp).unwrap();
        let contexts = [
            Context::NONE,
            Context::new(8, 5),
            Context::new(13, 10),
            Context::new(16, 12),
            Context::new(20, 14),
        ];
        let plan = SplicePlan::for_context(contexts[rng.random_range(0..contexts.len())]).unwrap();
        let acts = [Activation::Relu, Activation::Linear];
        let mut widths: Vec<(usize, Activation)> = (0..plan.num_layers() - 1)
            .map(|_| (rng.random_range(1..6), acts[rng.random_range(0..2)]))
            .collect();
        widths.push((k, Activation::Linear));
        let network = Network::random(k, &widths, plan, &mut rng).unwrap();
        AeModel::new(front_end, network).unwrap()
    }

    /// Write, read and rewrite through both the byte and the file interface.
    pub fn stream_round_trip(s: &PosteriorStream, dir: &Path) -> std::result::Result<(), String> {
        let bytes = io::encode_stream(s).map_err(|e| e.to_string())?;
        let back = io::decode_stream(&bytes).map_err(|e| e.to_string())?;
        if io::encode_stream(&back).unwrap() != bytes {
            return Err("re-encoding changed the bytes".into());
        }
        for (a, b) in s.as_slice().iter().zip(back.as_slice()) {
            if (*a as f32) as f64 != *b {
                return Err(format!("value {a} read back as {b}"));
            }
        }
        if (back.stream_id(), back.frame_offset(), back.classes(), back.len())
            != (s.stream_id(), s.frame_offset(), s.classes(), s.len())
        {
            return Err("header fields changed".into());
        }
        let path = dir.join("s.satn");
        io::write_stream(&path, &back).unwrap();
        if io::read_stream(&path).unwrap() != back {
            return Err("file round trip differs".into());
        }
        Ok(())
    }

    pub fn schedule_round_trip(s: &AttentionSchedule) -> std::result::Result<(), String> {
        let bytes = io::encode_schedule(s).map_err(|e| e.to_string())?;
        let back = io::decode_schedule(&bytes).map_err(|e| e.to_string())?;
        if io::encode_schedule(&back).unwrap() != bytes {
            return Err("re-encoding changed the bytes".into());
        }
        if s.as_slice()
            .iter()
            .zip(back.as_slice())
            .any(|(a, b)| (*a as f32) as f64 != *b)
        {
            return Err("weights changed beyond f32 rounding".into());
        }
        Ok(())
    }

    pub fn model_round_trip(m: &AeModel) -> std::result::Result<(), String> {
        let bytes = io::encode_model(m).map_err(|e| e.to_string())?;
        let back = io::decode_model(&bytes).map_err(|e| e.to_string())?;
        if &back != m {
            return Err("decoded model differs".into());
        }
        if io::encode_model(&back).unwrap() != bytes {
            return Err("re-encoding changed the bytes".into());
        }
        Ok(())
    }

    pub fn manifest_round_trip(m: &Manifest) -> std::result::Result<(), String> {
        let text = m.to_text();
        let back = Manifest::parse(&text, Path::new("manifest.txt")).map_err(|e| e.to_string())?;
        if &back != m || back.to_text() != text {
            return Err("manifest changed".into());
        }
        Ok(())
    }

    pub fn labels_round_trip(labels: &[usize], classes: usize) -> std::result::Result<(), String> {
        let text = io::labels_to_text(labels);
        let back = io::parse_labels(&text, Path::new("x.lab"), classes).map_err(|e| e.to_string())?;
        if back != labels {
            return Err("labels changed".into());
        }
        Ok(())
    }

    pub fn hmm_round_trip(h: &HmmModel) -> std::result::Result<(), String> {
        let text = io::hmm_to_text(h);
        let back = io::parse_hmm(&text, Path::new("hmm.txt")).map_err(|e| e.to_string())?;
        if &back != h || io::hmm_to_text(&back) != text {
            return Err("HMM changed".into());
        }
        Ok(())
    }
}

pub mod gradient {
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use streamfuse::aemonitor::{Activation, Layer, Network, SplicePlan};

    fn with_param(net: &Network, layer: usize, index: usize, bias: bool, delta: f64) -> Network {
        let layers = net
            .layers()
            .iter()
            .enumerate()
            .map(|(l, src)| {
                let mut w = src.weights().clone();
                let mut b = src.bias().clone();
                if l == layer {
                    if bias {
                        b[index] += delta;
                    } else {
                        let cols = w.ncols();
                        w[[index / cols, index % cols]] += delta;
                    }
                }
                Layer::new(w, b, src.activation()).unwrap()
            })
            .collect();
        Network::new(layers, net.plan().clone()).unwrap()
    }

    /// Compares backprop against central differences (step 1e-4) on a
    /// spliced three-layer network no wider than 8 units. Returns the number
    /// of parameters compared and the worst relative error.
    pub fn toy_check(seed: u64) -> (usize, f64) {
        let plan = SplicePlan::new(vec![vec![-1, 0, 1], vec![0], vec![-1, 0, 2]]).unwrap();
        let widths = [(6, Activation::Relu), (3, Activation::Linear), (4, Activation::Linear)];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Network::random(4, &widths, plan, &mut rng).unwrap();
        let input = Array2::from_shape_fn((12, 4), |_| rng.random_range(-1.0..1.0));
        let context = net.plan().context();
        let rows = input.nrows() - context.left - context.right;
        let target = Array2::from_shape_fn((rows, 4), |_| rng.random_range(-1.0..1.0));

        let (_, grads) = net.loss_and_gradients(input.view(), target.view());
        let h = 1e-4;
        let mut checked = 0;
        let mut worst: f64 = 0.0;
        for l in 0..net.layers().len() {
            for bias in [false, true] {
                let count = if bias {
                    net.layers()[l].outputs()
                } else {
                    net.layers()[l].weights().len()
                };
                for i in 0..count {
                    let plus = with_param(&net, l, i, bias, h).loss(input.view(), target.view());
                    let minus = with_param(&net, l, i, bias, -h).loss(input.view(), target.view());
                    let numeric = (plus - minus) / (2.0 * h);
                    let analytic = if bias {
                        grads.bias[l][i]
                    } else {
                        grads.weights[l].as_slice().unwrap()[i]
                    };
                    let scale = numeric.abs().max(analytic.abs());
                    // Parameters behind a dead ReLU have no gradient to compare.
                    if scale < 1e-7 {
                        continue;
                    }
                    worst = worst.max((numeric - analytic).abs() / scale);
                    checked += 1;
                }
            }
        }
        (checked, worst)
    }
}
