//! Padding-free batched kernels over concatenated variable-size samples.
//!
//! A batch is a flat value array plus per-sample sizes. Instead of padding every
//! sample to a common length, the kernels tag each element with its sample id, run a
//! single global operation, and cut the result back into per-sample ranges.

use std::cmp::Ordering;
use std::ops::Add;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RankedBatch<T> {
    pub values: Vec<T>,
    pub sizes: Vec<usize>,
}

impl<T> RankedBatch<T> {
    pub fn new(values: Vec<T>, sizes: Vec<usize>) -> Result<Self> {
        let total: usize = sizes.iter().sum();
        if total != values.len() {
            return Err(Error::Shape {
                op: "RankedBatch::new",
                detail: format!("sizes sum to {total} but {} values given", values.len()),
            });
        }
        Ok(Self { values, sizes })
    }

    pub fn from_samples(samples: Vec<Vec<T>>) -> Self {
        let sizes = samples.iter().map(Vec::len).collect();
        let values = samples.into_iter().flatten().collect();
        Self { values, sizes }
    }

    /// Start offset of every sample, plus the total length at the end.
    pub fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.sizes.len() + 1);
        let mut acc = 0;
        out.push(0);
        for s in &self.sizes {
            acc += s;
            out.push(acc);
        }
        out
    }

    pub fn num_samples(&self) -> usize {
        self.sizes.len()
    }

    /// Sample id of every element (`repeat_interleave` of the sample range).
    pub fn sample_ids(&self) -> Vec<usize> {
        self.sizes
            .iter()
            .enumerate()
            .flat_map(|(i, &s)| std::iter::repeat_n(i, s))
            .collect()
    }

    pub fn sample(&self, i: usize) -> &[T] {
        let offsets = self.offsets();
        &self.values[offsets[i]..offsets[i + 1]]
    }
}

/// Per-sample top-k result in flat form.
#[derive(Debug, Clone, PartialEq)]
pub struct TopK<T> {
    pub values: Vec<T>,
    /// Indices into the flat input array.
    pub indices: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl<T: Clone> TopK<T> {
    pub fn sample_values(&self, i: usize) -> &[T] {
        let start: usize = self.sizes[..i].iter().sum();
        &self.values[start..start + self.sizes[i]]
    }

    pub fn sample_indices(&self, i: usize) -> &[usize] {
        let start: usize = self.sizes[..i].iter().sum();
        &self.indices[start..start + self.sizes[i]]
    }
}

/// Selects the `k` largest values of every sample, in descending order.
///
/// One stable sort over `(sample id, descending value)` keys replaces the additive
/// offset of the integer formulation, so floating-point scores never collide across
/// samples. Ties keep the earlier flat index. With `strict`, a sample holding fewer
/// than `k` elements is an error; otherwise it contributes all of its elements.
pub fn padding_free_topk<T>(batch: &RankedBatch<T>, k: usize, strict: bool) -> Result<TopK<T>>
where
    T: PartialOrd + Copy,
{
    if strict {
        if let Some((sample, &size)) = batch.sizes.iter().enumerate().find(|(_, &s)| s < k) {
            return Err(Error::SampleTooSmall { sample, size, k });
        }
    }
    let sample_ids = batch.sample_ids();
    let mut order: Vec<usize> = (0..batch.values.len()).collect();
    order.sort_by(|&a, &b| {
        sample_ids[a].cmp(&sample_ids[b]).then_with(|| {
            batch.values[b]
                .partial_cmp(&batch.values[a])
                .unwrap_or(Ordering::Equal)
        })
    });
    // blocks stay at their original offsets because the primary key is the sample id
    let offsets = batch.offsets();
    let mut out = TopK {
        values: Vec::new(),
        indices: Vec::new(),
        sizes: Vec::with_capacity(batch.num_samples()),
    };
    for (i, &size) in batch.sizes.iter().enumerate() {
        let take = k.min(size);
        for &idx in &order[offsets[i]..offsets[i] + take] {
            out.values.push(batch.values[idx]);
            out.indices.push(idx);
        }
        out.sizes.push(take);
    }
    Ok(out)
}

/// Integer top-k using the additive offset trick directly: shift every sample by
/// `(max - min + 1) · sample_id`, sort once, strip the shift and slice per sample.
pub fn padding_free_topk_offset(batch: &RankedBatch<i64>, k: usize) -> Result<TopK<i64>> {
    if let Some((sample, &size)) = batch.sizes.iter().enumerate().find(|(_, &s)| s < k) {
        return Err(Error::SampleTooSmall { sample, size, k });
    }
    if batch.values.is_empty() {
        return Ok(TopK {
            values: vec![],
            indices: vec![],
            sizes: vec![0; batch.num_samples()],
        });
    }
    let max = *batch.values.iter().max().unwrap();
    let min = *batch.values.iter().min().unwrap();
    let offset = max - min + 1;
    let sample_ids = batch.sample_ids();
    let shifted: Vec<i64> = batch
        .values
        .iter()
        .zip(&sample_ids)
        .map(|(&v, &s)| v + offset * s as i64)
        .collect();
    // ascending sort over the shifted values; the shift alone keeps samples in
    // contiguous blocks. Equal values order by descending index so that, read back
    // from the top, ties favour the earlier element.
    let mut order: Vec<usize> = (0..shifted.len()).collect();
    order.sort_by(|&a, &b| shifted[a].cmp(&shifted[b]).then_with(|| b.cmp(&a)));
    let ends = &batch.offsets()[1..];
    let mut out = TopK {
        values: Vec::new(),
        indices: Vec::new(),
        sizes: Vec::new(),
    };
    for &end in ends {
        // ranges = cumsum(sizes) - K + arange(K), read in reverse for descending order
        for pos in (end - k..end).rev() {
            let idx = order[pos];
            out.values.push(shifted[idx] - offset * sample_ids[idx] as i64);
            out.indices.push(idx);
        }
        out.sizes.push(k);
    }
    Ok(out)
}

/// Sorted distinct values of every sample.
///
/// Values are shifted by `(max - min + 1) · sample_id` after subtracting the global
/// minimum, deduplicated globally, then mapped back; per-sample counts come from a
/// bincount of the recovered sample ids.
pub fn padding_free_unique(batch: &RankedBatch<i64>) -> Result<(Vec<i64>, Vec<usize>)> {
    if let Some(&neg) = batch.values.iter().find(|&&v| v < 0) {
        return Err(Error::NegativeId(neg));
    }
    let mut sizes = vec![0usize; batch.num_samples()];
    if batch.values.is_empty() {
        return Ok((Vec::new(), sizes));
    }
    let max = *batch.values.iter().max().unwrap();
    let min = *batch.values.iter().min().unwrap();
    let offset = max - min + 1;
    let mut shifted: Vec<i64> = batch
        .values
        .iter()
        .zip(batch.sample_ids())
        .map(|(&v, s)| (v - min) + offset * s as i64)
        .collect();
    shifted.sort_unstable();
    shifted.dedup();
    let mut uniques = Vec::with_capacity(shifted.len());
    for v in shifted {
        let sample = (v / offset) as usize;
        sizes[sample] += 1;
        uniques.push(v - offset * sample as i64 + min);
    }
    Ok((uniques, sizes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentMode {
    Sum,
    Max,
}

/// Reduces `values` by segment id. Empty segments hold `zero`.
pub fn segment_aggregate<T>(
    values: &[T],
    segment_ids: &[usize],
    num_segments: usize,
    mode: SegmentMode,
    zero: T,
) -> Result<Vec<T>>
where
    T: Copy + PartialOrd + Add<Output = T>,
{
    if values.len() != segment_ids.len() {
        return Err(Error::Shape {
            op: "segment_aggregate",
            detail: format!("{} values, {} segment ids", values.len(), segment_ids.len()),
        });
    }
    let mut out: Vec<Option<T>> = vec![None; num_segments];
    for (&v, &s) in values.iter().zip(segment_ids) {
        if s >= num_segments {
            return Err(Error::OutOfRange {
                kind: "segment",
                id: s,
                limit: num_segments,
            });
        }
        out[s] = Some(match (out[s], mode) {
            (None, SegmentMode::Sum) => zero + v,
            (None, SegmentMode::Max) => v,
            (Some(acc), SegmentMode::Sum) => acc + v,
            (Some(acc), SegmentMode::Max) => {
                if v > acc {
                    v
                } else {
                    acc
                }
            }
        });
    }
    Ok(out.into_iter().map(|o| o.unwrap_or(zero)).collect())
}
