//! Temporal context and TDNN splice plans.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Built-in plan table, one plan per supported context.
pub const DEFAULT_PLAN_TABLE: &str = include_str!("../../data/splice_plans.txt");

/// Temporal context `[-left, +right]` in frames around the current frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Context {
    pub left: usize,
    pub right: usize,
}

impl Context {
    pub const NONE: Context = Context { left: 0, right: 0 };

    pub fn new(left: usize, right: usize) -> Self {
        Self { left, right }
    }

    pub fn width(&self) -> usize {
        self.left + self.right + 1
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "-{},{}", self.left, self.right)
    }
}

impl FromStr for Context {
    type Err = String;

    /// Parses `-16,12`, `16,12` or `[-16,12]`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim().trim_start_matches('[').trim_end_matches(']');
        let (l, r) = s
            .split_once(',')
            .ok_or_else(|| format!("context {s:?} is not of the form -left,right"))?;
        let l: i64 = l.trim().parse().map_err(|_| format!("bad left context {l:?}"))?;
        let r: i64 = r.trim().parse().map_err(|_| format!("bad right context {r:?}"))?;
        if r < 0 {
            return Err(format!("right context {r} must not be negative"));
        }
        Ok(Context::new(l.unsigned_abs() as usize, r as usize))
    }
}

/// Largest absolute offset a plan may splice.
pub const MAX_SPLICE_OFFSET: i32 = 1000;

/// Frame offsets spliced together at the input of every layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplicePlan {
    layers: Vec<Vec<i32>>,
}

impl SplicePlan {
    pub fn new(layers: Vec<Vec<i32>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("splice plan has no layers".into()));
        }
        for (l, offsets) in layers.iter().enumerate() {
            if offsets.is_empty() || offsets.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConfig(format!(
                    "layer {} offsets must be non-empty and strictly increasing",
                    l + 1
                )));
            }
            if offsets.iter().any(|o| o.unsigned_abs() > MAX_SPLICE_OFFSET as u32) {
                return Err(Error::InvalidConfig(format!(
                    "layer {} offsets exceed {MAX_SPLICE_OFFSET} frames",
                    l + 1
                )));
            }
        }
        Ok(Self { layers })
    }

    /// A plan with no temporal context.
    pub fn frame_only(layers: usize) -> Self {
        Self {
            layers: vec![vec![0]; layers],
        }
    }

    pub fn layers(&self) -> &[Vec<i32>] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_offsets(&self) -> &[i32] {
        &self.layers[0]
    }

    /// Total receptive field of the plan.
    pub fn context(&self) -> Context {
        self.layers.iter().fold(Context::NONE, |acc, offsets| {
            let (l, r) = extent(offsets);
            Context::new(acc.left + l, acc.right + r)
        })
    }

    /// Looks up the plan for `context` in a plan table.
    pub fn from_table(table: &str, context: Context) -> Result<Self> {
        parse_plan_table(table, Path::new("<splice plans>"))?
            .into_iter()
            .find(|(c, _)| *c == context)
            .map(|(_, p)| p)
            .ok_or_else(|| Error::InvalidConfig(format!("no splice plan for context {context}")))
    }

    /// Plan for `context` from the built-in table.
    pub fn for_context(context: Context) -> Result<Self> {
        Self::from_table(DEFAULT_PLAN_TABLE, context)
    }
}

/// Parses a plain-text plan table; see `data/splice_plans.txt`.
///
/// Each plan's receptive field must equal its named context.
pub fn parse_plan_table(text: &str, path: &Path) -> Result<Vec<(Context, SplicePlan)>> {
    let mut plans = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let context: Context = tokens
            .next()
            .unwrap()
            .parse()
            .map_err(|e: String| Error::parse(path, lineno, e))?;
        let layers = tokens
            .map(|tok| {
                tok.split(',')
                    .map(|v| v.parse::<i32>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::parse(path, lineno, format!("bad offset list {tok:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let plan = SplicePlan::new(layers).map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        if plan.context() != context {
            return Err(Error::parse(
                path,
                lineno,
                format!("plan covers {} but is listed as {context}", plan.context()),
            ));
        }
        plans.push((context, plan));
    }
    Ok(plans)
}

/// `(left, right)` frames consumed by splicing `offsets`.
pub(crate) fn extent(offsets: &[i32]) -> (usize, usize) {
    let lo = offsets.first().copied().unwrap_or(0);
    let hi = offsets.last().copied().unwrap_or(0);
    ((-lo).max(0) as usize, hi.max(0) as usize)
}

/// Gathers frames `t + o` for every offset `o`, repeating the first or last
/// frame past the stream edges, and concatenates them.
pub fn splice_context(frames: ArrayView2<'_, f64>, t: usize, offsets: &[i32]) -> Vec<f64> {
    let last = frames.nrows() as i64 - 1;
    let mut out = Vec::with_capacity(offsets.len() * frames.ncols());
    for &o in offsets {
        let idx = (t as i64 + o as i64).clamp(0, last) as usize;
        out.extend(frames.row(idx).iter());
    }
    out
}

/// Pads a `T x K` sequence with `left` copies of its first row and `right`
/// copies of its last row.
pub fn pad_edges(frames: ArrayView2<'_, f64>, context: Context) -> Array2<f64> {
    let t = frames.nrows();
    let k = frames.ncols();
    Array2::from_shape_fn((t + context.left + context.right, k), |(i, j)| {
        let src = (i as i64 - context.left as i64).clamp(0, t as i64 - 1) as usize;
        frames[[src, j]]
    })
}

/// Splices rows of `input` at `offsets`; output row `j` gathers input rows
/// `j + left + o`. The output is shorter than the input by the plan extent.
pub(crate) fn splice_rows(input: ArrayView2<'_, f64>, offsets: &[i32]) -> Array2<f64> {
    let (left, right) = extent(offsets);
    let rows = input.nrows() - left - right;
    let d = input.ncols();
    if offsets == [0] {
        return input.to_owned();
    }
    let mut out = Array2::zeros((rows, d * offsets.len()));
    for (j, mut row) in out.rows_mut().into_iter().enumerate() {
        for (k, &o) in offsets.iter().enumerate() {
            let src = (j as i64 + left as i64 + o as i64) as usize;
            row.slice_mut(ndarray::s![k * d..(k + 1) * d]).assign(&input.row(src));
        }
    }
    out
}

/// Adjoint of [`splice_rows`]: accumulates spliced gradients back onto the
/// input rows they were gathered from.
pub(crate) fn unsplice_rows(grad: ArrayView2<'_, f64>, offsets: &[i32], input_rows: usize) -> Array2<f64> {
    if offsets == [0] {
        return grad.to_owned();
    }
    let (left, _) = extent(offsets);
    let d = grad.ncols() / offsets.len();
    let mut out = Array2::zeros((input_rows, d));
    for (j, row) in grad.rows().into_iter().enumerate() {
        for (k, &o) in offsets.iter().enumerate() {
            let dst = (j as i64 + left as i64 + o as i64) as usize;
            let mut target = out.row_mut(dst);
            target += &row.slice(ndarray::s![k * d..(k + 1) * d]);
        }
    }
    out
}
