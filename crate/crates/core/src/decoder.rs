//! Hybrid HMM Viterbi decoding and label error scoring.

use crate::error::{Error, Result};
use crate::measures::LOG_FLOOR;
use crate::stream::PosteriorStream;

/// A fully connected HMM over `C` states, one per posterior class.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    transitions: Vec<f64>,
    priors: Vec<f64>,
    labels: Vec<String>,
}

impl HmmModel {
    pub fn new(transitions: Vec<f64>, priors: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        let c = priors.len();
        if c < 2 {
            return Err(Error::InvalidConfig("an HMM needs at least two states".into()));
        }
        if transitions.len() != c * c || labels.len() != c {
            return Err(Error::DimensionMismatch(format!(
                "{c} priors, {} transition entries, {} labels",
                transitions.len(),
                labels.len()
            )));
        }
        let simplex = |row: &[f64]| {
            row.iter().all(|&p| p >= 0.0 && p.is_finite()) && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-9
        };
        if !simplex(&priors) {
            return Err(Error::InvalidConfig("priors are not a probability vector".into()));
        }
        if let Some(i) = transitions.chunks_exact(c).position(|r| !simplex(r)) {
            return Err(Error::InvalidConfig(format!("transition row {i} is not stochastic")));
        }
        Ok(Self {
            transitions,
            priors,
            labels,
        })
    }

    /// States that stay put with probability `self_loop` and otherwise jump
    /// uniformly to another state; uniform priors.
    pub fn self_loop(states: usize, self_loop: f64) -> Result<Self> {
        let c = states;
        if c < 2 || !(0.0..=1.0).contains(&self_loop) {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 states and a self-loop in [0, 1], got {c} and {self_loop}"
            )));
        }
        let jump = (1.0 - self_loop) / (c - 1) as f64;
        let transitions = (0..c * c)
            .map(|i| if i / c == i % c { self_loop } else { jump })
            .collect();
        Self::new(transitions, vec![1.0 / c as f64; c], default_labels(c))
    }

    pub fn num_states(&self) -> usize {
        self.priors.len()
    }

    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.transitions[from * self.num_states() + to]
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    pub fn transition_row(&self, from: usize) -> &[f64] {
        let c = self.num_states();
        &self.transitions[from * c..(from + 1) * c]
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Stationary distribution of the transition matrix, by power iteration.
    pub fn stationary(&self) -> Vec<f64> {
        let c = self.num_states();
        let mut pi = vec![1.0 / c as f64; c];
        for _ in 0..100_000 {
            let mut next = vec![0.0; c];
            for (i, &p) in pi.iter().enumerate() {
                for (n, &a) in next.iter_mut().zip(self.transition_row(i)) {
                    *n += p * a;
                }
            }
            let delta: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if delta < 1e-15 {
                break;
            }
        }
        pi
    }
}

pub fn default_labels(states: usize) -> Vec<String> {
    (0..states).map(|i| format!("s{i}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeOptions {
    /// Divide posteriors by state priors before taking logs.
    pub hybrid: bool,
    pub floor: f64,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self {
            hybrid: true,
            floor: LOG_FLOOR,
        }
    }
}

/// Per-frame log emission scores, `T x C`.
pub fn emission_scores(stream: &PosteriorStream, hmm: &HmmModel, opts: DecodeOptions) -> Vec<f64> {
    let log_priors: Vec<f64> = hmm.priors().iter().map(|p| p.max(opts.floor).ln()).collect();
    stream
        .as_slice()
        .chunks_exact(stream.classes())
        .flat_map(|frame| {
            frame.iter().zip(&log_priors).map(|(&p, &lp)| {
                let s = p.max(opts.floor).ln();
                if opts.hybrid {
                    s - lp
                } else {
                    s
                }
            })
        })
        .collect()
}

/// Log score of a state path: log prior, log transitions and emissions,
/// accumulated left to right in the same order as [`viterbi`].
pub fn path_score(path: &[usize], emissions: &[f64], hmm: &HmmModel) -> f64 {
    let c = hmm.num_states();
    let log_a = |i: usize, j: usize| hmm.transition(i, j).ln();
    let mut score = hmm.priors()[path[0]].ln() + emissions[path[0]];
    for t in 1..path.len() {
        score = score + log_a(path[t - 1], path[t]) + emissions[t * c + path[t]];
    }
    score
}

/// Scores closer than this (relative, at least absolute) count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

fn beats(s: f64, best: f64) -> bool {
    s > best + TIE_TOLERANCE * best.abs().max(1.0)
}

/// Most likely state sequence for a posterior stream.
///
/// Ties prefer the lower state index, both for the final state and for every
/// back-pointer. Scores within [`TIE_TOLERANCE`] of each other are tied.
pub fn viterbi(stream: &PosteriorStream, hmm: &HmmModel) -> Result<Vec<usize>> {
    viterbi_with(stream, hmm, DecodeOptions::default())
}

pub fn viterbi_with(stream: &PosteriorStream, hmm: &HmmModel, opts: DecodeOptions) -> Result<Vec<usize>> {
    let c = hmm.num_states();
    if stream.classes() != c {
        return Err(Error::DimensionMismatch(format!(
            "stream has {} classes, HMM has {c} states",
            stream.classes()
        )));
    }
    let frames = stream.len();
    let emissions = emission_scores(stream, hmm, opts);
    let log_a: Vec<f64> = hmm.transitions().iter().map(|a| a.ln()).collect();

    let mut delta: Vec<f64> = (0..c).map(|j| hmm.priors()[j].ln() + emissions[j]).collect();
    let mut next = vec![0.0; c];
    let mut back = vec![0u32; frames * c];
    for t in 1..frames {
        for j in 0..c {
            let mut best = 0;
            let mut best_score = delta[0] + log_a[j];
            for i in 1..c {
                let s = delta[i] + log_a[i * c + j];
                if beats(s, best_score) {
                    best = i;
                    best_score = s;
                }
            }
            next[j] = best_score + emissions[t * c + j];
            back[t * c + j] = best as u32;
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let mut state = 0;
    for j in 1..c {
        if beats(delta[j], delta[state]) {
            state = j;
        }
    }
    let mut path = vec![0; frames];
    for t in (0..frames).rev() {
        path[t] = state;
        state = back[t * c + state] as usize;
    }
    Ok(path)
}

/// Frame and token error rates of a hypothesis against a reference.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorReport {
    pub frames: usize,
    pub frame_errors: usize,
    pub ref_tokens: usize,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
}

impl ErrorReport {
    pub fn frame_error_rate(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.frame_errors as f64 / self.frames as f64
        }
    }

    pub fn token_errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    pub fn token_error_rate(&self) -> f64 {
        if self.ref_tokens == 0 {
            0.0
        } else {
            self.token_errors() as f64 / self.ref_tokens as f64
        }
    }

    /// Pools counts, so rates of the sum are corpus-level rates.
    pub fn accumulate(&mut self, other: &ErrorReport) {
        self.frames += other.frames;
        self.frame_errors += other.frame_errors;
        self.ref_tokens += other.ref_tokens;
        self.substitutions += other.substitutions;
        self.insertions += other.insertions;
        self.deletions += other.deletions;
    }
}

impl std::iter::Sum for ErrorReport {
    fn sum<I: Iterator<Item = ErrorReport>>(iter: I) -> Self {
        iter.fold(ErrorReport::default(), |mut acc, r| {
            acc.accumulate(&r);
            acc
        })
    }
}

/// Collapses runs of repeated labels.
pub fn collapse_runs(labels: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for &l in labels {
        if out.last() != Some(&l) {
            out.push(l);
        }
    }
    out
}

/// Levenshtein alignment counts `(substitutions, insertions, deletions)`
/// turning `reference` into `hypothesis`.
///
/// Among equal-cost alignments the backtrace prefers matches and
/// substitutions, then deletions, then insertions.
pub fn edit_counts(reference: &[usize], hypothesis: &[usize]) -> (usize, usize, usize) {
    let n = reference.len();
    let m = hypothesis.len();
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        d[i * w] = i;
    }
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let del = d[(i - 1) * w + j] + 1;
            let ins = d[i * w + j - 1] + 1;
            d[i * w + j] = sub.min(del).min(ins);
        }
    }
    let (mut s, mut ins, mut del) = (0, 0, 0);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let diff = usize::from(reference[i - 1] != hypothesis[j - 1]);
            if d[(i - 1) * w + j - 1] + diff == here {
                s += diff;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[(i - 1) * w + j] + 1 == here {
            del += 1;
            i -= 1;
        } else {
            ins += 1;
            j -= 1;
        }
    }
    (s, ins, del)
}

/// Scores a decoded state sequence against reference labels.
///
/// Frame errors compare position by position (missing positions count as
/// errors); token errors use edit distance over run-collapsed sequences.
pub fn score(hypothesis: &[usize], reference: &[usize]) -> ErrorReport {
    let frame_errors = reference
        .iter()
        .enumerate()
        .filter(|&(t, r)| hypothesis.get(t) != Some(r))
        .count();
    let reference_tokens = collapse_runs(reference);
    let hypothesis_tokens = collapse_runs(hypothesis);
    let (substitutions, insertions, deletions) = edit_counts(&reference_tokens, &hypothesis_tokens);
    ErrorReport {
        frames: reference.len(),
        frame_errors,
        ref_tokens: reference_tokens.len(),
        substitutions,
        insertions,
        deletions,
    }
}
