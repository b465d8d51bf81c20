//! Reshaping sample streams into `[batch_size, num_step, num_feature]`
//! window tensors.

use std::ops::Range;

use super::Dataset;
use crate::error::{Error, Result};
use crate::tensor::Real;

/// A batch of windows plus the target sample of each window.
///
/// Row `b`, step `s` holds the features of sample `n_b − (num_step − 1) + s`
/// and `targets[b]` is the target at `n_b`.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowBatch<T = f64> {
    batch_size: usize,
    num_step: usize,
    num_feature: usize,
    data: Vec<T>,
    targets: Vec<T>,
}

impl<T: Real> WindowBatch<T> {
    pub fn new(
        batch_size: usize,
        num_step: usize,
        num_feature: usize,
        data: Vec<T>,
        targets: Vec<T>,
    ) -> Result<Self> {
        if data.len() != batch_size * num_step * num_feature {
            return Err(Error::DimensionMismatch {
                context: "WindowBatch tensor",
                expected: batch_size * num_step * num_feature,
                found: data.len(),
            });
        }
        if targets.len() != batch_size {
            return Err(Error::DimensionMismatch {
                context: "WindowBatch targets",
                expected: batch_size,
                found: targets.len(),
            });
        }
        Ok(Self {
            batch_size,
            num_step,
            num_feature,
            data,
            targets,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn num_step(&self) -> usize {
        self.num_step
    }

    pub fn num_feature(&self) -> usize {
        self.num_feature
    }

    /// Row-major `[batch_size, num_step, num_feature]` tensor.
    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn targets(&self) -> &[T] {
        &self.targets
    }

    pub fn window(&self, b: usize) -> &[T] {
        let w = self.num_step * self.num_feature;
        &self.data[b * w..(b + 1) * w]
    }

    pub fn windows(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.data.chunks_exact((self.num_step * self.num_feature).max(1)).take(self.batch_size)
    }
}

/// Windows over a dataset for one model geometry.
///
/// Samples before the start of the containing gain segment read as zero;
/// everything else reads the true preceding samples.
#[derive(Clone, Copy, Debug)]
pub struct WindowSource<'a> {
    ds: &'a Dataset,
    num_step: usize,
    num_feature: usize,
}

impl<'a> WindowSource<'a> {
    pub fn new(ds: &'a Dataset, num_step: usize, num_feature: usize) -> Result<Self> {
        if num_step == 0 {
            return Err(Error::invalid("num_step must be >= 1"));
        }
        if !(1..=2).contains(&num_feature) {
            return Err(Error::invalid(format!("num_feature must be 1 or 2, got {num_feature}")));
        }
        Ok(Self {
            ds,
            num_step,
            num_feature,
        })
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.ds
    }

    pub fn num_step(&self) -> usize {
        self.num_step
    }

    pub fn num_feature(&self) -> usize {
        self.num_feature
    }

    /// Appends the window ending at sample `n` to `out`.
    pub fn push_window(&self, n: usize, out: &mut Vec<f64>) {
        let seg_start = self.ds.segment_start(n);
        let first = n as isize + 1 - self.num_step as isize;
        for s in 0..self.num_step {
            let idx = first + s as isize;
            if idx < seg_start as isize {
                out.extend(std::iter::repeat_n(0.0, self.num_feature));
            } else {
                let idx = idx as usize;
                out.push(self.ds.x.samples[idx]);
                if self.num_feature == 2 {
                    out.push(self.ds.g[idx]);
                }
            }
        }
    }

    /// Builds a batch from explicit target indices, in the given order.
    pub fn batch(&self, indices: &[usize]) -> WindowBatch<f64> {
        let mut data = Vec::with_capacity(indices.len() * self.num_step * self.num_feature);
        for &n in indices {
            self.push_window(n, &mut data);
        }
        let targets = indices.iter().map(|&n| self.ds.target.samples[n]).collect();
        WindowBatch {
            batch_size: indices.len(),
            num_step: self.num_step,
            num_feature: self.num_feature,
            data,
            targets,
        }
    }
}

/// Iterator returned by [`tensorize`].
#[derive(Clone, Debug)]
pub struct Tensorize<'a> {
    source: WindowSource<'a>,
    next: usize,
    end: usize,
    stride: usize,
    batch_size: usize,
}

impl Iterator for Tensorize<'_> {
    type Item = WindowBatch<f64>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.end {
            return None;
        }
        let mut indices = Vec::with_capacity(self.batch_size);
        while indices.len() < self.batch_size && self.next < self.end {
            indices.push(self.next);
            self.next += self.stride;
        }
        Some(self.source.batch(&indices))
    }
}

/// Streams the windows whose targets lie in `range`, `stride` samples apart,
/// in batches of `batch_size` (the final batch may be shorter).
pub fn tensorize<'a>(
    ds: &'a Dataset,
    range: Range<usize>,
    num_step: usize,
    num_feature: usize,
    batch_size: usize,
    stride: usize,
) -> Result<Tensorize<'a>> {
    if batch_size == 0 || stride == 0 {
        return Err(Error::invalid("batch_size and stride must be >= 1"));
    }
    if range.end > ds.len() || range.start > range.end {
        return Err(Error::invalid(format!("range {range:?} outside dataset of {} samples", ds.len())));
    }
    if range.len() < num_step {
        return Err(Error::invalid(format!(
            "range of {} samples is shorter than num_step {num_step}",
            range.len()
        )));
    }
    Ok(Tensorize {
        source: WindowSource::new(ds, num_step, num_feature)?,
        next: range.start,
        end: range.end,
        stride,
        batch_size,
    })
}

/// Reshapes one incoming block into a batch of `block.len() / num_feature`
/// windows, prefixing the stored `history` rows (the last `num_step − 1`
/// rows of the previous block). Targets are zero.
pub fn tensorize_block<T: Real>(
    history: &[T],
    block: &[T],
    num_step: usize,
    num_feature: usize,
) -> Result<WindowBatch<T>> {
    if num_step == 0 || num_feature == 0 {
        return Err(Error::invalid("num_step and num_feature must be >= 1"));
    }
    if history.len() != (num_step - 1) * num_feature {
        return Err(Error::DimensionMismatch {
            context: "tensorize_block history",
            expected: (num_step - 1) * num_feature,
            found: history.len(),
        });
    }
    if block.is_empty() || !block.len().is_multiple_of(num_feature) {
        return Err(Error::invalid("block must hold a positive whole number of feature rows"));
    }
    let rows: Vec<T> = history.iter().chain(block).copied().collect();
    let batch = block.len() / num_feature;
    let w = num_step * num_feature;
    let mut data = Vec::with_capacity(batch * w);
    for b in 0..batch {
        data.extend_from_slice(&rows[b * num_feature..b * num_feature + w]);
    }
    WindowBatch::new(batch, num_step, num_feature, data, vec![T::zero(); batch])
}
