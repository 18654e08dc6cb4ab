//! Weighted posterior fusion and n-best weight truncation.

use crate::error::{Error, Result};
use crate::stream::{AttentionSchedule, PosteriorStream, StreamSet};

/// Fuses an aligned stream set into one posterior stream.
///
/// Output frame `t` is `sum_i w[t][i] * P_i[t]`. The fused stream has id 0
/// and offset 0.
pub fn fuse(set: &StreamSet, schedule: &AttentionSchedule) -> Result<PosteriorStream> {
    let (frames, classes) = set.require_aligned()?;
    let m = set.num_streams();
    if schedule.num_streams() != m {
        return Err(Error::DimensionMismatch(format!(
            "schedule has {} columns for {m} streams",
            schedule.num_streams()
        )));
    }
    if schedule.len() != frames {
        return Err(Error::DimensionMismatch(format!(
            "schedule has {} rows for {frames} frames",
            schedule.len()
        )));
    }
    let mut out = vec![0.0; frames * classes];
    for (t, (acc, weights)) in out.chunks_exact_mut(classes).zip(schedule.rows()).enumerate() {
        for (stream, &w) in set.streams().iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            for (o, &p) in acc.iter_mut().zip(stream.frame(t)) {
                *o += w * p;
            }
        }
    }
    PosteriorStream::new(0, 0, classes, out)
}

/// Keeps the `n` largest weights of every row, zeroes the rest and
/// renormalizes. Ties are broken toward the lowest stream index.
///
/// `n == 1` is winner-takes-all; `n == M` returns the schedule unchanged.
pub fn n_best_truncate(schedule: &AttentionSchedule, n: usize) -> Result<AttentionSchedule> {
    let m = schedule.num_streams();
    if n == 0 || n > m {
        return Err(Error::InvalidN { n, streams: m });
    }
    if n == m {
        return Ok(schedule.clone());
    }
    let mut order: Vec<usize> = (0..m).collect();
    let mut out = Vec::with_capacity(schedule.as_slice().len());
    for row in schedule.rows() {
        // Stable sort keeps lower indices first among equal weights.
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
        let mut kept = vec![0.0; m];
        let total: f64 = order[..n].iter().map(|&i| row[i]).sum();
        if n == 1 || total <= 0.0 {
            kept[order[0]] = 1.0;
        } else {
            for &i in &order[..n] {
                kept[i] = row[i] / total;
            }
        }
        out.extend_from_slice(&kept);
    }
    Ok(AttentionSchedule::from_rows_unchecked(m, out))
}
