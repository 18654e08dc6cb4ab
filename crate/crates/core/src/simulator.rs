//! Synthetic multi-stream posterior corpora with known labels.
//!
//! Labels are sampled from an HMM. Every stream receives its own noisy,
//! peaked posterior for each frame, and a per-stream corruption profile then
//! degrades it the way a distant, noisy or broken microphone would.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::decoder::HmmModel;
use crate::error::{Error, Result};
use crate::stream::{PosteriorStream, StreamSet};

/// Dirichlet concentrations of the emitted posteriors: `alpha_true` on the
/// labelled class and `alpha_other` on every other class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emission {
    pub alpha_true: f64,
    pub alpha_other: f64,
}

impl Default for Emission {
    fn default() -> Self {
        Self {
            alpha_true: 20.0,
            alpha_other: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub utterances: usize,
    /// Inclusive range of utterance lengths in frames.
    pub min_frames: usize,
    pub max_frames: usize,
    pub classes: usize,
    pub streams: usize,
    pub seed: u64,
    pub emission: Emission,
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.utterances == 0 {
            return fail("corpus needs at least one utterance".into());
        }
        if self.min_frames == 0 || self.max_frames < self.min_frames {
            return fail(format!(
                "invalid utterance length range {}..={}",
                self.min_frames, self.max_frames
            ));
        }
        if self.classes < 2 {
            return fail(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.streams < 2 {
            return fail(format!("need at least 2 streams, got {}", self.streams));
        }
        if !(self.emission.alpha_true > 0.0 && self.emission.alpha_other > 0.0) {
            return fail("Dirichlet concentrations must be positive".into());
        }
        Ok(())
    }
}

/// Labels plus the clean, per-stream posteriors of one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceUtterance {
    pub labels: Vec<usize>,
    pub streams: Vec<PosteriorStream>,
}

/// Derives independent seeds from a base seed and a pair of indices.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    // splitmix64 finaliser
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn categorical<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Samples a Dirichlet vector; falls back to a random vertex if every
/// gamma draw underflows.
fn dirichlet<R: Rng>(alphas: &[f64], rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = alphas
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
        .collect();
    let sum: f64 = v.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        v.iter_mut().for_each(|x| *x /= sum);
    } else {
        let hot = rng.random_range(0..v.len());
        v.iter_mut()
            .enumerate()
            .for_each(|(i, x)| *x = if i == hot { 1.0 } else { 0.0 });
    }
    v
}

/// Samples a label path of `frames` steps from `hmm`.
pub fn sample_labels<R: Rng>(hmm: &HmmModel, frames: usize, rng: &mut R) -> Vec<usize> {
    let mut labels = Vec::with_capacity(frames);
    let mut state = categorical(hmm.priors(), rng);
    for _ in 0..frames {
        labels.push(state);
        state = categorical(hmm.transition_row(state), rng);
    }
    labels
}

/// Peaked posteriors around `labels`, one Dirichlet draw per frame.
pub fn emit<R: Rng>(
    labels: &[usize],
    classes: usize,
    emission: Emission,
    stream_id: u32,
    rng: &mut R,
) -> PosteriorStream {
    let mut alphas = vec![emission.alpha_other; classes];
    let mut data = Vec::with_capacity(labels.len() * classes);
    for &y in labels {
        alphas[y] = emission.alpha_true;
        data.extend(dirichlet(&alphas, rng));
        alphas[y] = emission.alpha_other;
    }
    PosteriorStream::new(stream_id, 0, classes, data).expect("non-empty labels")
}

/// Samples labels and clean streams for every utterance of a corpus.
///
/// Each utterance draws from its own random stream, so results depend only
/// on `(spec.seed, utterance index)`.
pub fn generate_reference(spec: &CorpusSpec, hmm: &HmmModel) -> Result<Vec<ReferenceUtterance>> {
    spec.validate()?;
    if hmm.num_states() != spec.classes {
        return Err(Error::DimensionMismatch(format!(
            "HMM has {} states for {} classes",
            hmm.num_states(),
            spec.classes
        )));
    }
    Ok((0..spec.utterances)
        .map(|u| reference_utterance(spec, hmm, u))
        .collect())
}

fn reference_utterance(spec: &CorpusSpec, hmm: &HmmModel, index: usize) -> ReferenceUtterance {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let frames = rng.random_range(spec.min_frames..=spec.max_frames);
    let labels = sample_labels(hmm, frames, &mut rng);
    let streams = (0..spec.streams)
        .map(|i| emit(&labels, spec.classes, spec.emission, i as u32, &mut rng))
        .collect();
    ReferenceUtterance { labels, streams }
}

/// How one stream is degraded.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CorruptionProfile {
    /// Weight of the uniform distribution mixed into every frame.
    pub mix: f64,
    /// Width in frames of the centred moving average; 0 and 1 leave frames
    /// untouched.
    pub smear: usize,
    /// Replace the stream by jittered uniform posteriors.
    pub fail: bool,
    /// Delay of the stream relative to the reference time line, in frames.
    pub offset: i32,
}

impl CorruptionProfile {
    pub fn clean() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mix) {
            return Err(Error::InvalidConfig(format!("mix weight {} outside [0, 1]", self.mix)));
        }
        Ok(())
    }

    /// Ordering key for picking the least corrupted working stream.
    fn severity(&self) -> (bool, f64, usize) {
        (self.fail, self.mix, self.smear)
    }
}

impl fmt::Display for CorruptionProfile {
    /// `mix:smear:fail:offset`, e.g. `0.25:3:0:-2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}:{}", self.mix, self.smear, u8::from(self.fail), self.offset)
    }
}

impl FromStr for CorruptionProfile {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(format!("profile {s:?} is not mix:smear:fail:offset"));
        }
        let mix: f64 = parts[0].parse().map_err(|_| format!("bad mix weight {:?}", parts[0]))?;
        let smear = parts[1]
            .parse()
            .map_err(|_| format!("bad smear width {:?}", parts[1]))?;
        let fail = match parts[2] {
            "0" => false,
            "1" => true,
            other => return Err(format!("bad failure flag {other:?}")),
        };
        let offset = parts[3].parse().map_err(|_| format!("bad offset {:?}", parts[3]))?;
        let p = CorruptionProfile {
            mix,
            smear,
            fail,
            offset,
        };
        p.validate().map_err(|e| e.to_string())?;
        Ok(p)
    }
}

/// Weight of the Dirichlet jitter in failed streams, scaled by `1/sqrt(C)`
/// so their entropy stays within 1e-2 nats of `ln C`.
pub const FAIL_JITTER: f64 = 0.05;

/// Applies, in order: uniform mixing, temporal smearing, failure override
/// and frame offset.
pub fn corrupt(stream: &PosteriorStream, profile: &CorruptionProfile, seed: u64) -> Result<PosteriorStream> {
    profile.validate()?;
    let c = stream.classes();
    let frames = stream.len();
    let mut data = stream.as_slice().to_vec();

    if profile.mix > 0.0 {
        let lambda = profile.mix;
        let u = lambda / c as f64;
        data.iter_mut().for_each(|p| *p = (1.0 - lambda) * *p + u);
    }

    if profile.smear > 1 {
        data = smear(&data, c, profile.smear);
    }

    if profile.fail {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eta = FAIL_JITTER / (c as f64).sqrt();
        let alphas = vec![0.01; c];
        for frame in data.chunks_exact_mut(c) {
            let d = dirichlet(&alphas, &mut rng);
            for (p, j) in frame.iter_mut().zip(d) {
                *p = (1.0 - eta) / c as f64 + eta * j;
            }
        }
    }

    if profile.offset != 0 {
        let src = data;
        data = Vec::with_capacity(src.len());
        for j in 0..frames as i64 {
            let k = (j - profile.offset as i64).clamp(0, frames as i64 - 1) as usize;
            data.extend_from_slice(&src[k * c..(k + 1) * c]);
        }
    }

    PosteriorStream::new(stream.stream_id(), profile.offset, c, data)
}

/// Centred moving average over `width` frames, truncated at the edges.
fn smear(data: &[f64], classes: usize, width: usize) -> Vec<f64> {
    let frames = data.len() / classes;
    let left = (width - 1) / 2;
    let right = width - 1 - left;
    // Prefix sums per class make every window O(C).
    let mut prefix = vec![0.0; (frames + 1) * classes];
    for t in 0..frames {
        for k in 0..classes {
            prefix[(t + 1) * classes + k] = prefix[t * classes + k] + data[t * classes + k];
        }
    }
    let mut out = vec![0.0; data.len()];
    for t in 0..frames {
        let lo = t.saturating_sub(left);
        let hi = (t + right + 1).min(frames);
        let n = (hi - lo) as f64;
        let row = &mut out[t * classes..(t + 1) * classes];
        let sum: f64 = (0..classes)
            .map(|k| {
                let v = (prefix[hi * classes + k] - prefix[lo * classes + k]) / n;
                row[k] = v.max(0.0);
                row[k]
            })
            .sum();
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Graded corruption, every stream working.
    LdcLike,
    /// Graded corruption with two failed streams.
    HrmLike,
    /// Caller-supplied profiles.
    Custom,
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioKind::LdcLike => "ldc_like",
            ScenarioKind::HrmLike => "hrm_like",
            ScenarioKind::Custom => "custom",
        })
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "ldc_like" => Ok(ScenarioKind::LdcLike),
            "hrm_like" => Ok(ScenarioKind::HrmLike),
            "custom" => Ok(ScenarioKind::Custom),
            _ => Err(format!(
                "unknown scenario {s:?} (expected ldc_like, hrm_like or custom)"
            )),
        }
    }
}

/// Grading of the named scenarios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grading {
    /// Mix weight of the most corrupted stream; the cleanest gets 0.
    pub max_mix: f64,
    /// Smear width of the most corrupted stream.
    pub max_smear: usize,
    /// Largest absolute frame offset.
    pub max_offset: i32,
    /// Number of failed streams in the `hrm_like` scenario.
    pub failed: usize,
}

impl Default for Grading {
    fn default() -> Self {
        Self {
            max_mix: 0.05,
            max_smear: 0,
            max_offset: 2,
            failed: 2,
        }
    }
}

/// Per-stream profiles of a named scenario.
///
/// Corruption severity is spread evenly over a seeded permutation of the
/// streams. `hrm_like` additionally fails the streams ranked at one and two
/// thirds of the way down the quality order, so the cleanest stream always
/// keeps working.
pub fn scenario_profiles(
    kind: ScenarioKind,
    streams: usize,
    grading: &Grading,
    seed: u64,
) -> Result<Vec<CorruptionProfile>> {
    if kind == ScenarioKind::Custom {
        return Err(Error::InvalidConfig("custom scenarios take explicit profiles".into()));
    }
    if streams < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 streams, got {streams}")));
    }
    let mut rank: Vec<usize> = (0..streams).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5ce7, 0));
    rank.sort_by_key(|_| rng.random::<u64>());
    let span = (streams - 1) as f64;
    let mut profiles: Vec<CorruptionProfile> = rank
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let level = r as f64 / span;
            CorruptionProfile {
                mix: grading.max_mix * level,
                smear: (grading.max_smear as f64 * level).round() as usize,
                fail: false,
                offset: if grading.max_offset == 0 {
                    0
                } else {
                    (i as i32 % (2 * grading.max_offset + 1)) - grading.max_offset
                },
            }
        })
        .collect();
    if kind == ScenarioKind::HrmLike {
        if grading.failed >= streams {
            return Err(Error::InvalidConfig(format!(
                "cannot fail {} of {streams} streams",
                grading.failed
            )));
        }
        for f in 1..=grading.failed {
            let target_rank = (f * streams) / (grading.failed + 1);
            let target_rank = target_rank.max(1);
            let idx = rank.iter().position(|&r| r == target_rank).unwrap();
            profiles[idx].fail = true;
        }
    }
    Ok(profiles)
}

/// Index of the least corrupted working stream; ties go to the lowest index.
pub fn oracle_stream(profiles: &[CorruptionProfile]) -> usize {
    let mut best = 0;
    for (i, p) in profiles.iter().enumerate().skip(1) {
        if p.severity().partial_cmp(&profiles[best].severity()) == Some(std::cmp::Ordering::Less) {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusUtterance {
    pub id: String,
    /// Reference labels on the reference time line.
    pub labels: Vec<usize>,
    /// Corrupted streams, not yet aligned.
    pub streams: StreamSet,
    pub oracle: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub scenario: ScenarioKind,
    pub profiles: Vec<CorruptionProfile>,
    pub utterances: Vec<CorpusUtterance>,
}

impl Corpus {
    pub fn failed_streams(&self) -> Vec<usize> {
        self.profiles
            .iter()
            .enumerate()
            .filter(|(_, p)| p.fail)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn num_streams(&self) -> usize {
        self.profiles.len()
    }
}

/// Simulates a corpus for a scenario.
///
/// `profiles` is required for [`ScenarioKind::Custom`] and must hold one
/// profile per stream; named scenarios derive theirs from `grading`.
pub fn build_scenario(
    kind: ScenarioKind,
    spec: &CorpusSpec,
    hmm: &HmmModel,
    profiles: Option<Vec<CorruptionProfile>>,
    grading: &Grading,
) -> Result<Corpus> {
    let profiles = match (kind, profiles) {
        (ScenarioKind::Custom, Some(p)) => p,
        (ScenarioKind::Custom, None) => vec![CorruptionProfile::clean(); spec.streams],
        (_, Some(p)) => p,
        (k, None) => scenario_profiles(k, spec.streams, grading, spec.seed)?,
    };
    if profiles.len() != spec.streams {
        return Err(Error::ProfileMismatch {
            expected: spec.streams,
            got: profiles.len(),
        });
    }
    for p in &profiles {
        p.validate()?;
    }
    let oracle = oracle_stream(&profiles);
    let reference = generate_reference(spec, hmm)?;
    let utterances = reference
        .into_iter()
        .enumerate()
        .map(|(u, r)| {
            let streams = r
                .streams
                .iter()
                .zip(&profiles)
                .enumerate()
                .map(|(i, (s, p))| corrupt(s, p, derive_seed(spec.seed, u as u64 + 1, i as u64)))
                .collect::<Result<Vec<_>>>()?;
            Ok(CorpusUtterance {
                id: format!("utt{u:04}"),
                labels: r.labels,
                streams: StreamSet::new(streams),
                oracle,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus {
        scenario: kind,
        profiles,
        utterances,
    })
}
