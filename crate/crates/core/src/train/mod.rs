//! Loss, gradients, optimizers and the epoch loop.

mod bptt;
mod init;
mod loss;
mod mlp;
mod optim;

pub use bptt::{backprop_batch, predict_batched, BpttWorkspace, Gradients};
pub use init::{init_params, InitScheme, FORGET_BIAS_INIT};
pub use loss::{mse_loss, relative_rmse_percent};
pub use mlp::{MlpConfig, MlpParams};
pub use optim::{
    clip_global_norm, OptimizerKind, OptimizerState, ADAGRAD_EPS, ADAM_BETA1, ADAM_BETA2, ADAM_EPS,
    RMSPROP_DECAY, RMSPROP_EPS,
};

use std::fmt::Write as _;
use std::ops::Range;
use std::time::{Duration, Instant};

use crate::dataset::{Dataset, Split, WindowBatch, WindowSource};
use crate::error::{Error, Result};
use crate::model::{LstmParams, ModelConfig};
use crate::tensor::Rng;

/// Global gradient norm ceiling applied before every optimizer step.
pub const MAX_GRAD_NORM: f64 = 5.0;
const EVAL_BATCH: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub init_scheme: InitScheme,
    pub dropout_keep_prob: f64,
    pub max_epochs: usize,
    /// Epochs without test-set improvement tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Distance in samples between consecutive training targets.
    pub stride: usize,
    /// Wall-clock limit, checked after each epoch.
    pub time_budget: Option<Duration>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 512,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            init_scheme: InitScheme::Xavier,
            dropout_keep_prob: 1.0,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            stride: 1,
            time_budget: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !(self.dropout_keep_prob > 0.0 && self.dropout_keep_prob <= 1.0) {
            return Err(Error::invalid("dropout_keep_prob must be in (0, 1]"));
        }
        if self.max_epochs == 0 {
            return Err(Error::invalid("max_epochs must be >= 1"));
        }
        if self.stride == 0 {
            return Err(Error::invalid("stride must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub test_mse: f64,
    /// Seconds since training started, at the end of this epoch.
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn best_test_mse(&self) -> Option<f64> {
        self.epochs.iter().map(|e| e.test_mse).min_by(f64::total_cmp)
    }

    /// Same epochs and losses, ignoring timing.
    pub fn same_trajectory(&self, other: &TrainHistory) -> bool {
        self.epochs.len() == other.epochs.len()
            && self.epochs.iter().zip(&other.epochs).all(|(a, b)| {
                a.epoch == b.epoch
                    && a.train_mse.to_bits() == b.train_mse.to_bits()
                    && a.test_mse.to_bits() == b.test_mse.to_bits()
            })
    }

    /// `epoch,train_mse,test_mse,wall_seconds` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_mse,test_mse,wall_seconds\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{},{},{},{}", e.epoch, e.train_mse, e.test_mse, e.wall_seconds);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |line: &str| Error::Parse {
            what: "training history CSV",
            detail: format!("bad line `{line}`"),
        };
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("epoch,train_mse,test_mse,wall_seconds") {
            return Err(bad("<header>"));
        }
        let mut epochs = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad(line));
            }
            epochs.push(EpochRecord {
                epoch: f[0].parse().map_err(|_| bad(line))?,
                train_mse: f[1].parse().map_err(|_| bad(line))?,
                test_mse: f[2].parse().map_err(|_| bad(line))?,
                wall_seconds: f[3].parse().map_err(|_| bad(line))?,
            });
        }
        Ok(Self { epochs })
    }
}

/// A model the epoch loop can fit: flat weights, a gradient oracle and a
/// batched predictor.
pub trait Network: Clone {
    type Workspace: Default;

    fn num_step(&self) -> usize;
    fn num_feature(&self) -> usize;
    fn weights(&self) -> &[f64];
    fn weights_mut(&mut self) -> &mut [f64];
    fn loss_and_grad(
        &self,
        batch: &WindowBatch,
        keep_prob: f64,
        rng: &mut Rng,
        workspace: &mut Self::Workspace,
        grad: &mut [f64],
    ) -> Result<f64>;
    fn predict(&self, batch: &WindowBatch) -> Result<Vec<f64>>;
}

impl Network for LstmParams {
    type Workspace = BpttWorkspace;

    fn num_step(&self) -> usize {
        self.config().num_step
    }

    fn num_feature(&self) -> usize {
        self.config().num_feature
    }

    fn weights(&self) -> &[f64] {
        self.as_slice()
    }

    fn weights_mut(&mut self) -> &mut [f64] {
        self.as_mut_slice()
    }

    fn loss_and_grad(
        &self,
        batch: &WindowBatch,
        keep_prob: f64,
        rng: &mut Rng,
        workspace: &mut BpttWorkspace,
        grad: &mut [f64],
    ) -> Result<f64> {
        workspace.loss_and_grad(self, batch, keep_prob, rng, grad)
    }

    fn predict(&self, batch: &WindowBatch) -> Result<Vec<f64>> {
        predict_batched(self, batch)
    }
}

impl Network for MlpParams {
    type Workspace = ();

    fn num_step(&self) -> usize {
        self.config().num_step
    }

    fn num_feature(&self) -> usize {
        self.config().num_feature
    }

    fn weights(&self) -> &[f64] {
        self.as_slice()
    }

    fn weights_mut(&mut self) -> &mut [f64] {
        self.as_mut_slice()
    }

    fn loss_and_grad(
        &self,
        batch: &WindowBatch,
        keep_prob: f64,
        rng: &mut Rng,
        _: &mut (),
        grad: &mut [f64],
    ) -> Result<f64> {
        MlpParams::loss_and_grad(self, batch, keep_prob, rng, grad)
    }

    fn predict(&self, batch: &WindowBatch) -> Result<Vec<f64>> {
        MlpParams::predict(self, batch)
    }
}

fn target_indices(ranges: &[Range<usize>], stride: usize) -> Vec<usize> {
    ranges.iter().flat_map(|r| r.clone().step_by(stride)).collect()
}

/// Predictions and targets for every sample of `ranges`, in order.
pub fn predict_ranges<N: Network>(net: &N, ds: &Dataset, ranges: &[Range<usize>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let src = WindowSource::new(ds, net.num_step(), net.num_feature())?;
    let indices = target_indices(ranges, 1);
    let mut preds = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(EVAL_BATCH) {
        preds.extend(net.predict(&src.batch(chunk))?);
    }
    let targets = indices.iter().map(|&n| ds.target.samples[n]).collect();
    Ok((preds, targets))
}

/// Relative RMSE (%) of `net` over one split.
pub fn evaluate_split<N: Network>(net: &N, ds: &Dataset, split: Split) -> Result<f64> {
    let (p, t) = predict_ranges(net, ds, ds.split_ranges(split)?)?;
    relative_rmse_percent(&p, &t)
}

/// Relative RMSE (%) of one split, separately for each gain segment.
pub fn per_gain_rmse<N: Network>(net: &N, ds: &Dataset, split: Split) -> Result<Vec<(f64, f64)>> {
    ds.split_ranges(split)?
        .iter()
        .map(|r| {
            let gain = ds.gain_at(r.start).unwrap_or(f64::NAN);
            let (p, t) = predict_ranges(net, ds, std::slice::from_ref(r))?;
            Ok((gain, relative_rmse_percent(&p, &t)?))
        })
        .collect()
}

/// Fits `net` on the training split with early stopping on the test split.
/// Returns the weights of the epoch with the lowest test MSE.
pub fn train_network<N: Network>(mut net: N, ds: &Dataset, tc: &TrainConfig) -> Result<(N, TrainHistory)> {
    tc.validate()?;
    let min_len = net.num_step() + 1;
    let train_idx = target_indices(ds.split_ranges(Split::Train)?, tc.stride);
    let test_ranges = ds.split_ranges(Split::Test)?;
    if train_idx.is_empty() {
        return Err(Error::EmptySplit { split: "train", min_len });
    }
    if test_ranges.iter().all(|r| r.is_empty()) {
        return Err(Error::EmptySplit { split: "test", min_len });
    }
    let src = WindowSource::new(ds, net.num_step(), net.num_feature())?;

    let mut rng = Rng::for_worker(tc.seed, 1);
    let mut opt = OptimizerState::new(tc.optimizer, net.weights().len());
    let mut workspace = N::Workspace::default();
    let mut grad = vec![0.0; net.weights().len()];
    let mut order = train_idx;
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, N)> = None;
    let mut since_best = 0;
    let start = Instant::now();

    for epoch in 1..=tc.max_epochs {
        rng.shuffle(&mut order);
        let mut sq_sum = 0.0;
        for chunk in order.chunks(tc.batch_size) {
            let batch = src.batch(chunk);
            let loss = net
                .loss_and_grad(&batch, tc.dropout_keep_prob, &mut rng, &mut workspace, &mut grad)
                .map_err(|e| diverged(epoch, e.to_string(), &history))?;
            sq_sum += loss * chunk.len() as f64;
            clip_global_norm(&mut grad, MAX_GRAD_NORM);
            opt.step(net.weights_mut(), &grad, tc.learning_rate);
        }
        let train_mse = sq_sum / order.len() as f64;
        let (p, t) = predict_ranges(&net, ds, test_ranges)?;
        let test_mse = mse_loss(&p, &t)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_mse,
            test_mse,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
        if !test_mse.is_finite() || !train_mse.is_finite() {
            return Err(diverged(epoch, "non-finite loss".into(), &history));
        }
        if best.as_ref().is_none_or(|(b, _)| test_mse < *b) {
            best = Some((test_mse, net.clone()));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if since_best >= tc.patience {
            break;
        }
        if tc.time_budget.is_some_and(|b| start.elapsed() >= b) {
            break;
        }
    }
    let (_, best_net) = best.expect("at least one epoch ran");
    Ok((best_net, history))
}

fn diverged(epoch: usize, reason: String, history: &TrainHistory) -> Error {
    Error::Diverged {
        epoch,
        reason,
        history: history.clone(),
    }
}

/// Initializes an LSTM from `tc.seed` and trains it.
pub fn train(config: &ModelConfig, tc: &TrainConfig, ds: &Dataset) -> Result<(LstmParams, TrainHistory)> {
    tc.validate()?;
    let init = init_params(config, tc.init_scheme, &mut Rng::new(tc.seed))?;
    train_network(init, ds, tc)
}

/// Result of [`mlp_baseline`].
#[derive(Clone, Debug)]
pub struct BaselineReport {
    pub params: MlpParams,
    pub validation_rmse_percent: f64,
    pub history: TrainHistory,
}

/// Trains the feed-forward baseline with the LSTM's loop and reports its
/// validation relative RMSE.
pub fn mlp_baseline(config: MlpConfig, tc: &TrainConfig, ds: &Dataset) -> Result<BaselineReport> {
    tc.validate()?;
    let init = MlpParams::init(config, tc.init_scheme, &mut Rng::new(tc.seed))?;
    let (params, history) = train_network(init, ds, tc)?;
    let validation_rmse_percent = evaluate_split(&params, ds, Split::Validation)?;
    Ok(BaselineReport {
        params,
        validation_rmse_percent,
        history,
    })
}
