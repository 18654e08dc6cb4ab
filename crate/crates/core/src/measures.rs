//! Posteriorgram-based stream reliability measures.
//!
//! All logarithms are natural, so entropies and divergences are in nats.
//! Probabilities are floored at [`LOG_FLOOR`] before taking logs.

use crate::error::{Error, Result};
use crate::stream::{argmax, AttentionSchedule, PosteriorStream, StreamSet};

pub const LOG_FLOOR: f64 = 1e-10;

/// Entropies below this value are raised to it before inversion.
pub const ENTROPY_FLOOR: f64 = 1e-3;

pub const DEFAULT_SPANS: [usize; 6] = [5, 10, 20, 30, 40, 50];

/// Shannon entropy of a posterior frame.
pub fn entropy(frame: &[f64]) -> f64 {
    -frame.iter().map(|&p| p * p.max(LOG_FLOOR).ln()).sum::<f64>()
}

/// Inverse-entropy weights over one frame per stream.
pub fn inverse_entropy_weights<F: AsRef<[f64]>>(frames: &[F]) -> Vec<f64> {
    let inv: Vec<f64> = frames
        .iter()
        .map(|f| 1.0 / entropy(f.as_ref()).max(ENTROPY_FLOOR))
        .collect();
    normalize(inv)
}

pub(crate) fn normalize(mut values: Vec<f64>) -> Vec<f64> {
    let total: f64 = values.iter().sum();
    values.iter_mut().for_each(|v| *v /= total);
    values
}

/// `KL(p||q) + KL(q||p)` with floored arguments.
pub fn symmetric_kld(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            let la = a.max(LOG_FLOOR).ln();
            let lb = b.max(LOG_FLOOR).ln();
            (a - b) * (la - lb)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Utterance,
    Frames(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MMeasureConfig {
    spans: Vec<usize>,
    window: Window,
}

impl MMeasureConfig {
    pub fn new(spans: Vec<usize>, window: Window) -> Result<Self> {
        if spans.is_empty() {
            return Err(Error::InvalidConfig("at least one time span is required".into()));
        }
        if spans[0] == 0 || spans.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "time spans must be positive and strictly increasing".into(),
            ));
        }
        if let Window::Frames(w) = window {
            let max = *spans.last().unwrap();
            if w < max + 1 {
                return Err(Error::InvalidConfig(format!(
                    "window of {w} frames cannot hold span {max}"
                )));
            }
        }
        Ok(Self { spans, window })
    }

    pub fn spans(&self) -> &[usize] {
        &self.spans
    }

    pub fn window(&self) -> Window {
        self.window
    }

    fn max_span(&self) -> usize {
        *self.spans.last().unwrap()
    }

    /// Frame ranges analysed by windowed selection over `frames` frames.
    ///
    /// Finite windows tile the stream; a trailing remainder too short to
    /// hold the largest span joins the preceding tile.
    pub fn tiles(&self, frames: usize) -> Result<Vec<std::ops::Range<usize>>> {
        let needed = self.max_span() + 1;
        if frames < needed {
            return Err(Error::WindowTooShort {
                needed,
                available: frames,
            });
        }
        let w = match self.window {
            Window::Utterance => return Ok(vec![0..frames]),
            Window::Frames(w) => w,
        };
        let mut tiles = Vec::new();
        let mut start = 0;
        while start < frames {
            let end = (start + w).min(frames);
            if end - start < needed {
                if let Some(last) = tiles.last_mut() {
                    let last: &mut std::ops::Range<usize> = last;
                    last.end = end;
                    break;
                }
            }
            tiles.push(start..end);
            start = end;
        }
        Ok(tiles)
    }
}

impl Default for MMeasureConfig {
    fn default() -> Self {
        Self {
            spans: DEFAULT_SPANS.to_vec(),
            window: Window::Utterance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamScore {
    pub stream_id: u32,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    M,
    DeltaM,
}

fn analysed_frames(stream: &PosteriorStream, cfg: &MMeasureConfig) -> Result<std::ops::Range<usize>> {
    let len = match cfg.window {
        Window::Utterance => stream.len(),
        Window::Frames(w) => w.min(stream.len()),
    };
    let needed = cfg.max_span() + 1;
    if len < needed {
        return Err(Error::WindowTooShort { needed, available: len });
    }
    Ok(0..len)
}

/// Mean over spans of the average divergence between frames `dt` apart.
fn span_average(stream: &PosteriorStream, range: std::ops::Range<usize>, spans: &[usize], gated: bool) -> f64 {
    let mut total = 0.0;
    let mut counted_spans = 0usize;
    for &dt in spans {
        let mut sum = 0.0;
        let mut pairs = 0usize;
        for t in range.start + dt..range.end {
            let a = stream.frame(t - dt);
            let b = stream.frame(t);
            if gated && argmax(a) == argmax(b) {
                continue;
            }
            sum += symmetric_kld(a, b);
            pairs += 1;
        }
        if pairs > 0 {
            total += sum / pairs as f64;
            counted_spans += 1;
        } else if !gated {
            counted_spans += 1;
        }
    }
    if counted_spans == 0 {
        0.0
    } else {
        total / counted_spans as f64
    }
}

fn score_range(stream: &PosteriorStream, range: std::ops::Range<usize>, cfg: &MMeasureConfig, measure: Measure) -> f64 {
    span_average(stream, range, &cfg.spans, measure == Measure::DeltaM)
}

/// Mean temporal divergence of a stream over its analysis window.
///
/// Larger values indicate richer temporal dynamics, i.e. a cleaner stream.
pub fn m_measure(stream: &PosteriorStream, cfg: &MMeasureConfig) -> Result<StreamScore> {
    let range = analysed_frames(stream, cfg)?;
    Ok(StreamScore {
        stream_id: stream.stream_id(),
        value: score_range(stream, range, cfg, Measure::M),
    })
}

/// M-measure restricted to frame pairs whose winning class differs.
///
/// Each span averages over its contributing pairs only; spans without any
/// contributing pair are skipped, and the result is 0 when no pair
/// contributes at all.
pub fn delta_m_measure(stream: &PosteriorStream, cfg: &MMeasureConfig) -> Result<StreamScore> {
    let range = analysed_frames(stream, cfg)?;
    Ok(StreamScore {
        stream_id: stream.stream_id(),
        value: score_range(stream, range, cfg, Measure::DeltaM),
    })
}

/// Window-level binary stream selection: in every window the stream with
/// the highest score gets weight 1 on all of the window's frames.
pub fn binary_window_attention(set: &StreamSet, cfg: &MMeasureConfig, measure: Measure) -> Result<AttentionSchedule> {
    let (frames, _) = set.require_aligned()?;
    let m = set.num_streams();
    let mut weights = vec![0.0; frames * m];
    for tile in cfg.tiles(frames)? {
        let scores: Vec<f64> = set
            .streams()
            .iter()
            .map(|s| score_range(s, tile.clone(), cfg, measure))
            .collect();
        let winner = argmax(&scores);
        for t in tile {
            weights[t * m + winner] = 1.0;
        }
    }
    Ok(AttentionSchedule::from_rows_unchecked(m, weights))
}

/// Frame-wise inverse-entropy attention.
pub fn entropy_attention(set: &StreamSet) -> Result<AttentionSchedule> {
    let (frames, _) = set.require_aligned()?;
    let m = set.num_streams();
    let mut weights = Vec::with_capacity(frames * m);
    let mut row = Vec::with_capacity(m);
    for t in 0..frames {
        row.clear();
        row.extend(set.streams().iter().map(|s| s.frame(t)));
        weights.extend(inverse_entropy_weights(&row));
    }
    Ok(AttentionSchedule::from_rows_unchecked(m, weights))
}
