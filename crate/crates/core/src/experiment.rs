//! End-to-end evaluation: align, weight, fuse, decode and score.

use std::fmt;
use std::str::FromStr;

use crate::aemonitor::{ae_attention, AeModel};
use crate::decoder::{score, viterbi_with, DecodeOptions, ErrorReport, HmmModel};
use crate::error::{Error, Result};
use crate::fusion::{fuse, n_best_truncate};
use crate::measures::{binary_window_attention, entropy_attention, MMeasureConfig, Measure};
use crate::simulator::{Corpus, CorpusSpec, CorpusUtterance, Emission, Grading};
use crate::stream::{common_range, AttentionSchedule, PosteriorStream, StreamSet};

/// Corpus, grading and decoder settings of the named scenarios.
///
/// Posteriors are sparse (most frames put nearly all mass on one class), so
/// a single corrupted stream can pull the fused frame away from the label
/// and stream weighting matters. The decoder floor bounds how much a
/// near-zero fused probability can cost a path.
#[derive(Debug, Clone, PartialEq)]
pub struct Setup {
    pub classes: usize,
    pub self_loop: f64,
    pub min_frames: usize,
    pub max_frames: usize,
    pub emission: Emission,
    pub grading: Grading,
    pub decode: DecodeOptions,
}

pub const SCENARIO_EMISSION: Emission = Emission {
    alpha_true: 0.2,
    alpha_other: 0.002,
};

pub const PIPELINE_DECODE_FLOOR: f64 = 3e-3;

impl Default for Setup {
    fn default() -> Self {
        Self {
            classes: 8,
            self_loop: 0.85,
            min_frames: 100,
            max_frames: 200,
            emission: SCENARIO_EMISSION,
            grading: Grading::default(),
            decode: DecodeOptions {
                hybrid: true,
                floor: PIPELINE_DECODE_FLOOR,
            },
        }
    }
}

impl Setup {
    pub fn hmm(&self) -> Result<HmmModel> {
        HmmModel::self_loop(self.classes, self.self_loop)
    }

    pub fn corpus_spec(&self, utterances: usize, streams: usize, seed: u64) -> CorpusSpec {
        CorpusSpec {
            utterances,
            min_frames: self.min_frames,
            max_frames: self.max_frames,
            classes: self.classes,
            streams,
            seed,
            emission: self.emission,
        }
    }
}

/// How per-frame stream weights are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Equal,
    Entropy,
    MMeasure,
    DeltaM,
    Autoencoder,
    /// One-hot on the least corrupted working stream.
    Oracle,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Equal,
        Method::Entropy,
        Method::MMeasure,
        Method::DeltaM,
        Method::Autoencoder,
        Method::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Equal => "equal",
            Method::Entropy => "entropy",
            Method::MMeasure => "m_measure",
            Method::DeltaM => "delta_m",
            Method::Autoencoder => "autoencoder",
            Method::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

/// A weighting method, optionally followed by n-best truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Strategy {
    pub method: Method,
    pub n_best: Option<usize>,
}

impl Strategy {
    pub fn plain(method: Method) -> Self {
        Self { method, n_best: None }
    }

    pub fn n_best(method: Method, n: usize) -> Self {
        Self {
            method,
            n_best: Some(n),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.n_best {
            None => write!(f, "{}", self.method),
            Some(n) => write!(f, "{}/max{n}", self.method),
        }
    }
}

/// Inputs shared by the weighting methods.
#[derive(Debug, Clone, Copy)]
pub struct Resources<'a> {
    pub model: Option<&'a AeModel>,
    pub m_config: &'a MMeasureConfig,
    pub decode: DecodeOptions,
}

/// An utterance cut to the frames every stream covers.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub streams: StreamSet,
    pub labels: Vec<usize>,
    pub oracle: usize,
}

/// Aligns the streams of `utt` and cuts its labels to match.
///
/// The common range is further limited to the labelled frames, so edge
/// frames a delayed stream only repeats are never scored.
pub fn prepare(utt: &CorpusUtterance) -> Result<Prepared> {
    let range = common_range(&utt.streams)?;
    let start = range.start.max(0);
    let end = range.end.min(utt.labels.len() as i64);
    if start >= end {
        return Err(Error::OverlapEmpty);
    }
    let streams = utt
        .streams
        .streams()
        .iter()
        .map(|s| {
            let o = s.frame_offset() as i64;
            s.slice((start + o) as usize..(end + o) as usize)
        })
        .collect();
    Ok(Prepared {
        streams: StreamSet::new(streams),
        labels: utt.labels[start as usize..end as usize].to_vec(),
        oracle: utt.oracle,
    })
}

/// Attention schedule of `method` for an aligned stream set.
pub fn attention(method: Method, set: &StreamSet, oracle: usize, res: &Resources<'_>) -> Result<AttentionSchedule> {
    let frames = set.frames()?;
    let m = set.num_streams();
    match method {
        Method::Equal => Ok(AttentionSchedule::uniform(frames, m)),
        Method::Entropy => entropy_attention(set),
        Method::MMeasure => binary_window_attention(set, res.m_config, Measure::M),
        Method::DeltaM => binary_window_attention(set, res.m_config, Measure::DeltaM),
        Method::Autoencoder => ae_attention(set, res.model.ok_or(Error::MissingModel)?),
        Method::Oracle => {
            if oracle >= m {
                return Err(Error::InvalidConfig(format!("oracle stream {oracle} out of {m}")));
            }
            Ok(AttentionSchedule::one_hot(frames, m, oracle))
        }
    }
}

pub fn decode_and_score(
    fused: &PosteriorStream,
    labels: &[usize],
    hmm: &HmmModel,
    opts: DecodeOptions,
) -> Result<ErrorReport> {
    let hyp = viterbi_with(fused, hmm, opts)?;
    Ok(score(&hyp, labels))
}

/// Fuses and scores one prepared utterance under several strategies. Each
/// distinct method is computed once.
pub fn evaluate_prepared(
    prepared: &Prepared,
    hmm: &HmmModel,
    strategies: &[Strategy],
    res: &Resources<'_>,
) -> Result<Vec<(ErrorReport, AttentionSchedule)>> {
    let mut cache: Vec<(Method, AttentionSchedule)> = Vec::new();
    strategies
        .iter()
        .map(|s| {
            let base = match cache.iter().find(|(m, _)| *m == s.method) {
                Some((_, sched)) => sched.clone(),
                None => {
                    let sched = attention(s.method, &prepared.streams, prepared.oracle, res)?;
                    cache.push((s.method, sched.clone()));
                    sched
                }
            };
            let sched = match s.n_best {
                Some(n) => n_best_truncate(&base, n)?,
                None => base,
            };
            let fused = fuse(&prepared.streams, &sched)?;
            Ok((decode_and_score(&fused, &prepared.labels, hmm, res.decode)?, sched))
        })
        .collect()
}

/// Corpus-level error counts for every strategy, in order.
pub fn evaluate(
    corpus: &Corpus,
    hmm: &HmmModel,
    strategies: &[Strategy],
    res: &Resources<'_>,
) -> Result<Vec<ErrorReport>> {
    let mut totals = vec![ErrorReport::default(); strategies.len()];
    for utt in &corpus.utterances {
        let prepared = prepare(utt)?;
        for (t, (r, _)) in totals
            .iter_mut()
            .zip(evaluate_prepared(&prepared, hmm, strategies, res)?)
        {
            t.accumulate(&r);
        }
    }
    Ok(totals)
}

/// Corpus-level error counts of decoding each stream on its own.
pub fn single_stream_reports(corpus: &Corpus, hmm: &HmmModel, opts: DecodeOptions) -> Result<Vec<ErrorReport>> {
    let m = corpus.num_streams();
    let mut totals = vec![ErrorReport::default(); m];
    for utt in &corpus.utterances {
        let prepared = prepare(utt)?;
        for (t, s) in totals.iter_mut().zip(prepared.streams.streams()) {
            t.accumulate(&decode_and_score(s, &prepared.labels, hmm, opts)?);
        }
    }
    Ok(totals)
}

/// Error counts of `method` followed by n-best truncation for `n = 1..=M`.
pub fn n_sweep(corpus: &Corpus, hmm: &HmmModel, method: Method, res: &Resources<'_>) -> Result<Vec<ErrorReport>> {
    let strategies: Vec<Strategy> = (1..=corpus.num_streams())
        .map(|n| Strategy::n_best(method, n))
        .collect();
    evaluate(corpus, hmm, &strategies, res)
}

/// Index and value of the smallest token error rate; ties go to the lowest
/// index.
pub fn best_by_token_error(reports: &[ErrorReport]) -> Option<(usize, f64)> {
    reports
        .iter()
        .map(ErrorReport::token_error_rate)
        .enumerate()
        .fold(None, |best, (i, r)| match best {
            Some((_, b)) if b <= r => best,
            _ => Some((i, r)),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{build_scenario, CorpusSpec, Emission, Grading, ScenarioKind};

    fn corpus(kind: ScenarioKind) -> (Corpus, HmmModel) {
        let hmm = HmmModel::self_loop(5, 0.9).unwrap();
        let spec = CorpusSpec {
            utterances: 3,
            min_frames: 60,
            max_frames: 90,
            classes: 5,
            streams: 4,
            seed: 5,
            emission: Emission::default(),
        };
        (
            build_scenario(kind, &spec, &hmm, None, &Grading::default()).unwrap(),
            hmm,
        )
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("best".parse::<Method>().is_err());
    }

    #[test]
    fn prepared_streams_line_up_with_labels() {
        let (c, _) = corpus(ScenarioKind::LdcLike);
        for u in &c.utterances {
            let p = prepare(u).unwrap();
            assert!(p.streams.is_aligned());
            assert_eq!(p.streams.frames().unwrap(), p.labels.len());
        }
    }

    #[test]
    fn full_n_sweep_matches_unmodified_method() {
        let (c, hmm) = corpus(ScenarioKind::HrmLike);
        let cfg = MMeasureConfig::default();
        let res = Resources {
            model: None,
            m_config: &cfg,
            decode: DecodeOptions::default(),
        };
        let sweep = n_sweep(&c, &hmm, Method::Entropy, &res).unwrap();
        let plain = evaluate(&c, &hmm, &[Strategy::plain(Method::Entropy)], &res).unwrap();
        assert_eq!(sweep.len(), 4);
        assert_eq!(sweep[3], plain[0]);
    }

    #[test]
    fn oracle_matches_its_single_stream() {
        let (c, hmm) = corpus(ScenarioKind::LdcLike);
        let cfg = MMeasureConfig::default();
        let res = Resources {
            model: None,
            m_config: &cfg,
            decode: DecodeOptions::default(),
        };
        let oracle = evaluate(&c, &hmm, &[Strategy::plain(Method::Oracle)], &res).unwrap();
        let single = single_stream_reports(&c, &hmm, DecodeOptions::default()).unwrap();
        assert_eq!(oracle[0], single[c.utterances[0].oracle]);
    }

    #[test]
    fn autoencoder_without_model_is_rejected() {
        let (c, hmm) = corpus(ScenarioKind::LdcLike);
        let cfg = MMeasureConfig::default();
        let res = Resources {
            model: None,
            m_config: &cfg,
            decode: DecodeOptions::default(),
        };
        let err = evaluate(&c, &hmm, &[Strategy::plain(Method::Autoencoder)], &res).unwrap_err();
        assert!(matches!(err, Error::MissingModel));
    }

    #[test]
    fn best_prefers_lowest_index_on_ties() {
        let r = ErrorReport {
            frames: 10,
            frame_errors: 1,
            ref_tokens: 4,
            substitutions: 1,
            insertions: 0,
            deletions: 0,
        };
        assert_eq!(best_by_token_error(&[r, r]), Some((0, 0.25)));
        assert_eq!(best_by_token_error(&[]), None);
    }
}
