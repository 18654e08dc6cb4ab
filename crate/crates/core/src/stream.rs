//! Posterior streams, stream sets and attention schedules.
//!
//! A posterior frame is a probability vector over `C` classes. Frames are
//! stored row-major in a flat buffer and handed out as `&[f64]` slices.

use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};

/// Absolute tolerance on row sums for posterior frames and weight rows.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

/// A `T x C` matrix of per-frame class posteriors for one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorStream {
    stream_id: u32,
    frame_offset: i32,
    classes: usize,
    data: Vec<f64>,
}

impl PosteriorStream {
    /// Builds a stream from a flat row-major buffer.
    ///
    /// Only the shape is checked here; simplex validity is reported by
    /// [`validate_stream_set`] so that malformed data can still be inspected.
    pub fn new(stream_id: u32, frame_offset: i32, classes: usize, data: Vec<f64>) -> Result<Self> {
        if classes == 0 {
            return Err(Error::InvalidStream("class count must be positive".into()));
        }
        if data.is_empty() {
            return Err(Error::InvalidStream("stream has no frames".into()));
        }
        if !data.len().is_multiple_of(classes) {
            return Err(Error::InvalidStream(format!(
                "buffer of {} values is not a multiple of {classes} classes",
                data.len()
            )));
        }
        Ok(Self {
            stream_id,
            frame_offset,
            classes,
            data,
        })
    }

    pub fn from_frames<F: AsRef<[f64]>>(stream_id: u32, frames: &[F]) -> Result<Self> {
        let classes = frames.first().map(|f| f.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(frames.len() * classes);
        for (t, f) in frames.iter().enumerate() {
            let f = f.as_ref();
            if f.len() != classes {
                return Err(Error::InvalidStream(format!(
                    "frame {t} has {} classes, expected {classes}",
                    f.len()
                )));
            }
            data.extend_from_slice(f);
        }
        Self::new(stream_id, 0, classes, data)
    }

    pub fn stream_id(&self) -> u32 {
        self.stream_id
    }

    pub fn frame_offset(&self) -> i32 {
        self.frame_offset
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.classes
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.classes..(t + 1) * self.classes]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.classes)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn with_stream_id(mut self, stream_id: u32) -> Self {
        self.stream_id = stream_id;
        self
    }

    pub fn with_frame_offset(mut self, frame_offset: i32) -> Self {
        self.frame_offset = frame_offset;
        self
    }

    /// Copy of frames `range`, with offset reset to zero.
    pub fn slice(&self, range: Range<usize>) -> PosteriorStream {
        PosteriorStream {
            stream_id: self.stream_id,
            frame_offset: 0,
            classes: self.classes,
            data: self.data[range.start * self.classes..range.end * self.classes].to_vec(),
        }
    }

    /// Renormalizes every row whose sum is within `tolerance` of 1 and
    /// rejects rows that are further away or contain negative entries.
    ///
    /// Rows within `keep_slack` of 1 are left bit-for-bit untouched.
    pub fn renormalize(&mut self, keep_slack: f64, tolerance: f64) -> Result<()> {
        for (row, frame) in self.data.chunks_exact_mut(self.classes).enumerate() {
            let sum: f64 = frame.iter().sum();
            let ok = frame.iter().all(|&p| p >= 0.0 && p.is_finite());
            if !ok || (sum - 1.0).abs() > tolerance {
                return Err(Error::InvalidSimplex { row, sum });
            }
            if (sum - 1.0).abs() > keep_slack {
                frame.iter_mut().for_each(|p| *p /= sum);
            }
        }
        Ok(())
    }
}

/// `M` parallel posterior streams.
///
/// The set itself is unchecked; use [`validate_stream_set`] to inspect it.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSet {
    streams: Vec<PosteriorStream>,
}

impl StreamSet {
    pub fn new(streams: Vec<PosteriorStream>) -> Self {
        Self { streams }
    }

    pub fn streams(&self) -> &[PosteriorStream] {
        &self.streams
    }

    pub fn into_streams(self) -> Vec<PosteriorStream> {
        self.streams
    }

    pub fn num_streams(&self) -> usize {
        self.streams.len()
    }

    pub fn stream(&self, i: usize) -> &PosteriorStream {
        &self.streams[i]
    }

    /// Class count shared by all streams, or `DimensionMismatch`.
    pub fn classes(&self) -> Result<usize> {
        let first = self
            .streams
            .first()
            .ok_or_else(|| Error::DimensionMismatch("empty stream set".into()))?
            .classes();
        match self.streams.iter().position(|s| s.classes() != first) {
            None => Ok(first),
            Some(i) => Err(Error::DimensionMismatch(format!(
                "stream {i} has {} classes, stream 0 has {first}",
                self.streams[i].classes()
            ))),
        }
    }

    /// Common frame count of an aligned set, or `DimensionMismatch`.
    pub fn frames(&self) -> Result<usize> {
        let first = self
            .streams
            .first()
            .ok_or_else(|| Error::DimensionMismatch("empty stream set".into()))?
            .len();
        match self.streams.iter().position(|s| s.len() != first) {
            None => Ok(first),
            Some(i) => Err(Error::DimensionMismatch(format!(
                "stream {i} has {} frames, stream 0 has {first}",
                self.streams[i].len()
            ))),
        }
    }

    pub fn is_aligned(&self) -> bool {
        self.streams.iter().all(|s| s.frame_offset == 0)
    }

    pub(crate) fn require_aligned(&self) -> Result<(usize, usize)> {
        if let Some((i, s)) = self.streams.iter().enumerate().find(|(_, s)| s.frame_offset != 0) {
            return Err(Error::NotAligned {
                stream: i,
                offset: s.frame_offset,
            });
        }
        Ok((self.frames()?, self.classes()?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rule {
    TooFewStreams(usize),
    TooFewClasses(usize),
    ClassCountMismatch { expected: usize, found: usize },
    NegativeProbability { class: usize, value: f64 },
    NotFinite { class: usize },
    SumOutOfTolerance { sum: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub stream: Option<usize>,
    pub frame: Option<usize>,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(s) = self.stream {
            write!(f, "stream {s}")?;
            if let Some(t) = self.frame {
                write!(f, ", frame {t}")?;
            }
            write!(f, ": ")?;
        }
        match &self.rule {
            Rule::TooFewStreams(m) => write!(f, "set has {m} streams, need at least 2"),
            Rule::TooFewClasses(c) => write!(f, "{c} classes, need at least 2"),
            Rule::ClassCountMismatch { expected, found } => {
                write!(f, "class-count mismatch: {found} classes, expected {expected}")
            }
            Rule::NegativeProbability { class, value } => {
                write!(f, "negative probability {value} for class {class}")
            }
            Rule::NotFinite { class } => write!(f, "non-finite probability for class {class}"),
            Rule::SumOutOfTolerance { sum } => write!(f, "row sums to {sum}"),
        }
    }
}

/// Checks every structural and simplex invariant of a stream set.
///
/// An empty report means the set is valid.
pub fn validate_stream_set(set: &StreamSet) -> Vec<Violation> {
    let mut report = Vec::new();
    let m = set.num_streams();
    if m < 2 {
        report.push(Violation {
            stream: None,
            frame: None,
            rule: Rule::TooFewStreams(m),
        });
    }
    let expected = set.streams.first().map(|s| s.classes()).unwrap_or(0);
    for (i, s) in set.streams.iter().enumerate() {
        if s.classes() < 2 {
            report.push(Violation {
                stream: Some(i),
                frame: None,
                rule: Rule::TooFewClasses(s.classes()),
            });
        }
        if s.classes() != expected {
            report.push(Violation {
                stream: Some(i),
                frame: None,
                rule: Rule::ClassCountMismatch {
                    expected,
                    found: s.classes(),
                },
            });
        }
        for (t, frame) in s.frames().enumerate() {
            let mut bad_entry = false;
            for (c, &p) in frame.iter().enumerate() {
                if !p.is_finite() {
                    report.push(Violation {
                        stream: Some(i),
                        frame: Some(t),
                        rule: Rule::NotFinite { class: c },
                    });
                    bad_entry = true;
                } else if p < 0.0 {
                    report.push(Violation {
                        stream: Some(i),
                        frame: Some(t),
                        rule: Rule::NegativeProbability { class: c, value: p },
                    });
                    bad_entry = true;
                }
            }
            let sum: f64 = frame.iter().sum();
            if !bad_entry && (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
                report.push(Violation {
                    stream: Some(i),
                    frame: Some(t),
                    rule: Rule::SumOutOfTolerance { sum },
                });
            }
        }
    }
    report
}

/// Range of common time indices covered by every stream.
///
/// Stream `i` frame `k + offset_i` sits at common time `k`.
pub fn common_range(set: &StreamSet) -> Result<Range<i64>> {
    if set.streams.is_empty() {
        return Err(Error::OverlapEmpty);
    }
    let start = set.streams.iter().map(|s| -(s.frame_offset as i64)).max().unwrap_or(0);
    let end = set
        .streams
        .iter()
        .map(|s| s.len() as i64 - s.frame_offset as i64)
        .min()
        .unwrap_or(0);
    if end <= start {
        return Err(Error::OverlapEmpty);
    }
    Ok(start..end)
}

/// Shifts every stream by its frame offset and truncates all of them to the
/// overlapping range. Output offsets are zero.
pub fn align_streams(set: &StreamSet) -> Result<StreamSet> {
    let range = common_range(set)?;
    let streams = set
        .streams
        .iter()
        .map(|s| {
            let first = (range.start + s.frame_offset as i64) as usize;
            let last = (range.end + s.frame_offset as i64) as usize;
            s.slice(first..last)
        })
        .collect();
    Ok(StreamSet { streams })
}

/// Per-frame convex weights over `M` streams, stored `T x M` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionSchedule {
    streams: usize,
    weights: Vec<f64>,
}

impl AttentionSchedule {
    pub fn new(streams: usize, weights: Vec<f64>) -> Result<Self> {
        if streams == 0 || weights.is_empty() || !weights.len().is_multiple_of(streams) {
            return Err(Error::InvalidSchedule(format!(
                "{} weights cannot form rows of {streams}",
                weights.len()
            )));
        }
        for (t, row) in weights.chunks_exact(streams).enumerate() {
            if row.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
                return Err(Error::InvalidSchedule(format!("row {t} has a weight outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
                return Err(Error::InvalidSchedule(format!("row {t} sums to {sum}")));
            }
        }
        Ok(Self { streams, weights })
    }

    /// Trusted constructor for rows produced by this crate.
    pub(crate) fn from_rows_unchecked(streams: usize, weights: Vec<f64>) -> Self {
        debug_assert!(weights.len().is_multiple_of(streams));
        Self { streams, weights }
    }

    pub fn uniform(frames: usize, streams: usize) -> Self {
        Self::from_rows_unchecked(streams, vec![1.0 / streams as f64; frames * streams])
    }

    /// Every row selects `stream` alone.
    pub fn one_hot(frames: usize, streams: usize, stream: usize) -> Self {
        assert!(stream < streams, "stream index {stream} out of range");
        let mut weights = vec![0.0; frames * streams];
        for row in weights.chunks_exact_mut(streams) {
            row[stream] = 1.0;
        }
        Self::from_rows_unchecked(streams, weights)
    }

    pub fn num_streams(&self) -> usize {
        self.streams
    }

    pub fn len(&self) -> usize {
        self.weights.len() / self.streams
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.weights[t * self.streams..(t + 1) * self.streams]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.weights.chunks_exact(self.streams)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
