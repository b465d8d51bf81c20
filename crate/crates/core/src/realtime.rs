//! Block-streaming inference.
//!
//! `Windowed` mode recomputes every output from its full `num_step` window
//! with a fresh state, exactly as in training; it keeps the last
//! `num_step − 1` input rows between blocks. `Stateful` mode carries the
//! cell state from sample to sample and runs one cell step per sample.

use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::{project, step_stack, CellState, LstmParams, WindowRunner};
use crate::tensor::{Real, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum StreamMode {
    #[default]
    Windowed,
    Stateful,
}

impl StreamMode {
    pub fn name(self) -> &'static str {
        match self {
            StreamMode::Windowed => "windowed",
            StreamMode::Stateful => "stateful",
        }
    }
}

impl FromStr for StreamMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "windowed" => Ok(Self::Windowed),
            "stateful" => Ok(Self::Stateful),
            other => Err(Error::invalid(format!("unknown stream mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct StreamState<T: Real = f64> {
    model: Arc<LstmParams<T>>,
    mode: StreamMode,
    /// History rows followed by the current block, `num_feature` values per row.
    buf: Vec<T>,
    runner: WindowRunner<T>,
    states: Vec<CellState<T>>,
    z: Vec<T>,
}

impl<T: Real> StreamState<T> {
    pub fn new(model: Arc<LstmParams<T>>, mode: StreamMode) -> Self {
        let cfg = *model.config();
        Self {
            mode,
            buf: vec![T::zero(); (cfg.num_step - 1) * cfg.num_feature],
            runner: WindowRunner::new(&cfg),
            states: (0..cfg.num_layer).map(|_| CellState::zeros(cfg.num_hidden)).collect(),
            z: vec![T::zero(); 4 * cfg.num_hidden],
            model,
        }
    }

    pub fn mode(&self) -> StreamMode {
        self.mode
    }

    pub fn model(&self) -> &LstmParams<T> {
        &self.model
    }

    /// The stored `num_step − 1` most recent input rows, oldest first.
    pub fn history(&self) -> &[T] {
        &self.buf[..self.history_len()]
    }

    fn history_len(&self) -> usize {
        let cfg = self.model.config();
        (cfg.num_step - 1) * cfg.num_feature
    }

    /// Reserves room for blocks of up to `max_block` rows so that later
    /// calls do not allocate.
    pub fn reserve(&mut self, max_block: usize) {
        let want = self.history_len() + max_block * self.model.config().num_feature;
        self.buf.reserve(want.saturating_sub(self.buf.len()));
    }

    /// Processes `input` (rows of `num_feature` values) into `out`, one
    /// sample per row.
    pub fn process_block(&mut self, input: &[T], out: &mut [T]) -> Result<()> {
        let cfg = *self.model.config();
        let f = cfg.num_feature;
        if input.is_empty() {
            return Err(Error::invalid("block must contain at least one row"));
        }
        if !input.len().is_multiple_of(f) {
            return Err(Error::DimensionMismatch {
                context: "stream block (rows x num_feature)",
                expected: input.len() / f * f + f,
                found: input.len(),
            });
        }
        let rows = input.len() / f;
        if out.len() != rows {
            return Err(Error::DimensionMismatch {
                context: "stream output length",
                expected: rows,
                found: out.len(),
            });
        }
        match self.mode {
            StreamMode::Windowed => {
                let hist = self.history_len();
                self.buf.truncate(hist);
                self.buf.extend_from_slice(input);
                let win = cfg.window_len();
                for (n, o) in out.iter_mut().enumerate() {
                    *o = self.runner.run(&self.model, &self.buf[n * f..n * f + win]);
                }
                let total = self.buf.len();
                self.buf.copy_within(total - hist..total, 0);
                self.buf.truncate(hist);
            }
            StreamMode::Stateful => {
                for (row, o) in input.chunks_exact(f).zip(out.iter_mut()) {
                    step_stack(&self.model, row, &mut self.states, &mut self.z);
                    *o = project(&self.model, &self.states[cfg.num_layer - 1].h);
                }
                // Keep the history current so a mode switch or inspection
                // sees the same rows either way.
                let hist = self.history_len();
                if hist > 0 {
                    if input.len() >= hist {
                        self.buf[..hist].copy_from_slice(&input[input.len() - hist..]);
                    } else {
                        self.buf.copy_within(input.len()..hist, 0);
                        self.buf[hist - input.len()..hist].copy_from_slice(input);
                    }
                }
            }
        }
        Ok(())
    }

    /// Convenience wrapper that allocates the output.
    pub fn process(&mut self, input: &[T]) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); input.len() / self.model.config().num_feature];
        self.process_block(input, &mut out)?;
        Ok(out)
    }

    /// Back to the cold-start state.
    pub fn reset(&mut self) {
        let hist = self.history_len();
        self.buf.truncate(hist);
        self.buf.fill(T::zero());
        for s in &mut self.states {
            s.reset();
        }
    }
}

/// Interleaves audio with a constant gain feature when the model expects
/// two features.
pub fn feature_rows(samples: &[f64], num_feature: usize, gain: f64) -> Vec<f64> {
    match num_feature {
        1 => samples.to_vec(),
        _ => samples.iter().flat_map(|&x| [x, gain]).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThroughputReport {
    pub mode: StreamMode,
    pub num_hidden: usize,
    pub num_step: usize,
    pub block_len: usize,
    pub samples_processed: usize,
    pub wall_seconds: f64,
    pub samples_per_second: f64,
    pub real_time_factor: f64,
}

impl ThroughputReport {
    pub const CSV_HEADER: &'static str = "mode,num_hidden,num_step,block_len,samples_per_second,rtf";

    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{},{},{},{},{},{}",
            self.mode.name(),
            self.num_hidden,
            self.num_step,
            self.block_len,
            self.samples_per_second,
            self.real_time_factor
        );
        s
    }
}

/// Streams `duration_s` seconds of synthetic noise through `model` in blocks
/// of `block_len` rows and times only the processing.
pub fn benchmark_throughput<T: Real>(
    model: Arc<LstmParams<T>>,
    mode: StreamMode,
    block_len: usize,
    duration_s: f64,
) -> Result<ThroughputReport> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(Error::invalid("benchmark duration must be positive"));
    }
    if block_len == 0 {
        return Err(Error::invalid("block_len must be >= 1"));
    }
    let cfg = *model.config();
    let n = ((duration_s * cfg.sample_rate as f64).ceil() as usize).max(block_len);
    let mut rng = Rng::new(0x0be7c4);
    let audio: Vec<f64> = (0..n).map(|_| rng.uniform(-0.9, 0.9)).collect::<Result<_>>()?;
    let input: Vec<T> = feature_rows(&audio, cfg.num_feature, 0.5).into_iter().map(T::of).collect();

    let mut stream = StreamState::new(model, mode);
    stream.reserve(block_len);
    let mut out = vec![T::zero(); block_len];
    let f = cfg.num_feature;
    let start = Instant::now();
    for block in input.chunks(block_len * f) {
        let rows = block.len() / f;
        stream.process_block(block, &mut out[..rows])?;
    }
    let wall_seconds = start.elapsed().as_secs_f64().max(1e-9);
    std::hint::black_box(&out);
    let samples_per_second = n as f64 / wall_seconds;
    Ok(ThroughputReport {
        mode,
        num_hidden: cfg.num_hidden,
        num_step: cfg.num_step,
        block_len,
        samples_processed: n,
        wall_seconds,
        samples_per_second,
        real_time_factor: samples_per_second / cfg.sample_rate as f64,
    })
}
