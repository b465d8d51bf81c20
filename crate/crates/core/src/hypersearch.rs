//! Time-budgeted random search over the LSTM shape.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::tensor::Rng;
use crate::train::{evaluate_split, train, TrainConfig};

/// Inclusive integer range sampled log-uniformly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LogRange {
    pub lo: usize,
    pub hi: usize,
}

impl LogRange {
    pub fn new(lo: usize, hi: usize) -> Self {
        Self { lo, hi }
    }

    fn sample(self, rng: &mut Rng) -> Result<usize> {
        let (a, b) = ((self.lo as f64).ln(), (self.hi as f64).ln());
        let v = if a == b { a } else { rng.uniform(a, b)? };
        Ok((v.exp().round() as usize).clamp(self.lo, self.hi))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchSpace {
    pub batch_size: LogRange,
    pub num_step: LogRange,
    pub num_hidden: LogRange,
    /// Inclusive, sampled uniformly.
    pub num_layer: (usize, usize),
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            batch_size: LogRange::new(64, 2048),
            num_step: LogRange::new(25, 400),
            num_hidden: LogRange::new(8, 256),
            num_layer: (1, 2),
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("batch_size", self.batch_size),
            ("num_step", self.num_step),
            ("num_hidden", self.num_hidden),
        ] {
            if r.lo == 0 || r.lo > r.hi {
                return Err(Error::invalid(format!("{name} range [{}, {}] is empty", r.lo, r.hi)));
            }
        }
        let (lo, hi) = self.num_layer;
        if lo == 0 || lo > hi || hi > 2 {
            return Err(Error::invalid(format!("num_layer range [{lo}, {hi}] must lie in [1, 2]")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HyperParams {
    pub batch_size: usize,
    pub num_step: usize,
    pub num_hidden: usize,
    pub num_layer: usize,
}

/// One independent draw per dimension.
pub fn sample_config(space: &SearchSpace, rng: &mut Rng) -> Result<HyperParams> {
    space.validate()?;
    let (lo, hi) = space.num_layer;
    Ok(HyperParams {
        batch_size: space.batch_size.sample(rng)?,
        num_step: space.num_step.sample(rng)?,
        num_hidden: space.num_hidden.sample(rng)?,
        num_layer: lo + rng.below(hi - lo + 1),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialResult {
    pub trial_id: usize,
    pub params: HyperParams,
    /// Validation relative RMSE (%); `inf` when training diverged.
    pub rmse_percent: f64,
    pub epochs: usize,
    pub wall_seconds: f64,
    pub seed: u64,
}

/// Settings shared by every trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialSettings {
    /// Template for everything except batch size, seed and budget.
    pub train: TrainConfig,
    pub num_feature: usize,
    pub budget: Duration,
}

impl TrialSettings {
    /// Budget-bound trials: early stopping is effectively off, so every
    /// configuration gets the same wall-clock time and keeps its best epoch.
    pub fn new(budget: Duration) -> Self {
        Self {
            train: TrainConfig {
                max_epochs: 1_000_000,
                patience: 1_000_000,
                ..TrainConfig::default()
            },
            num_feature: 1,
            budget,
        }
    }
}

/// Trains one configuration until the budget runs out or early stopping
/// fires, then scores it on the validation split.
pub fn run_trial(trial_id: usize, hp: HyperParams, seed: u64, ds: &Dataset, settings: &TrialSettings) -> Result<TrialResult> {
    if settings.budget.is_zero() {
        return Err(Error::invalid("trial budget must be positive"));
    }
    let cfg = ModelConfig {
        num_step: hp.num_step,
        num_hidden: hp.num_hidden,
        num_layer: hp.num_layer,
        num_feature: settings.num_feature,
        sample_rate: ds.sample_rate(),
    };
    cfg.validate()?;
    let tc = TrainConfig {
        batch_size: hp.batch_size,
        seed,
        time_budget: Some(settings.budget),
        ..settings.train.clone()
    };
    let start = Instant::now();
    let (rmse_percent, epochs) = match train(&cfg, &tc, ds) {
        Ok((params, history)) => {
            let rmse = evaluate_split(&params, ds, Split::Validation)?;
            (if rmse.is_finite() { rmse } else { f64::INFINITY }, history.len())
        }
        Err(Error::Diverged { history, .. }) => (f64::INFINITY, history.len() + 1),
        Err(Error::NonFinite(_)) => (f64::INFINITY, 0),
        Err(e) => return Err(e),
    };
    Ok(TrialResult {
        trial_id,
        params: hp,
        rmse_percent,
        epochs,
        wall_seconds: start.elapsed().as_secs_f64(),
        seed,
    })
}

/// Runs `n_trials` trials on `workers` threads. Trial `i` draws its
/// configuration from `Rng::for_worker(base_seed, i)` and trains with seed
/// `base_seed + i`, so results do not depend on the worker count. The
/// returned list is sorted by RMSE, ties broken by trial id.
pub fn search(
    space: &SearchSpace,
    ds: &Dataset,
    n_trials: usize,
    settings: &TrialSettings,
    workers: usize,
    base_seed: u64,
) -> Result<Vec<TrialResult>> {
    space.validate()?;
    if n_trials == 0 {
        return Err(Error::invalid("n_trials must be >= 1"));
    }
    let configs = (0..n_trials)
        .map(|i| sample_config(space, &mut Rng::for_worker(base_seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<TrialResult>>>> = Mutex::new((0..n_trials).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, n_trials) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n_trials {
                    break;
                }
                let r = run_trial(i, configs[i], base_seed.wrapping_add(i as u64), ds, settings);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    let mut results = slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every trial ran"))
        .collect::<Result<Vec<_>>>()?;
    sort_by_rmse(&mut results);
    Ok(results)
}

pub fn sort_by_rmse(results: &mut [TrialResult]) {
    results.sort_by(|a, b| a.rmse_percent.total_cmp(&b.rmse_percent).then(a.trial_id.cmp(&b.trial_id)));
}

pub const RESULTS_HEADER: &str = "trial_id,batch_size,num_step,num_hidden,num_layer,rmse_percent,epochs,wall_seconds,seed";
pub const PLOT_HEADER: &str = "batch_size,num_step,num_hidden,rmse_percent";

pub fn results_to_csv(results: &[TrialResult]) -> String {
    let mut out = format!("{RESULTS_HEADER}\n");
    for r in results {
        let p = r.params;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.trial_id, p.batch_size, p.num_step, p.num_hidden, p.num_layer, r.rmse_percent, r.epochs, r.wall_seconds, r.seed
        );
    }
    out
}

fn csv_rows<'a>(text: &'a str, header: &str, what: &'static str) -> Result<Vec<Vec<&'a str>>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some(header) {
        return Err(Error::Parse {
            what,
            detail: format!("expected header `{header}`"),
        });
    }
    let width = header.split(',').count();
    lines
        .map(|l| {
            let fields: Vec<&str> = l.trim().split(',').collect();
            if fields.len() == width {
                Ok(fields)
            } else {
                Err(Error::Parse {
                    what,
                    detail: format!("expected {width} fields in `{l}`"),
                })
            }
        })
        .collect()
}

fn field<T: std::str::FromStr>(s: &str, what: &'static str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        what,
        detail: format!("bad value `{s}`"),
    })
}

pub fn results_from_csv(text: &str) -> Result<Vec<TrialResult>> {
    const W: &str = "hypersearch results CSV";
    csv_rows(text, RESULTS_HEADER, W)?
        .into_iter()
        .map(|f| {
            Ok(TrialResult {
                trial_id: field(f[0], W)?,
                params: HyperParams {
                    batch_size: field(f[1], W)?,
                    num_step: field(f[2], W)?,
                    num_hidden: field(f[3], W)?,
                    num_layer: field(f[4], W)?,
                },
                rmse_percent: field(f[5], W)?,
                epochs: field(f[6], W)?,
                wall_seconds: field(f[7], W)?,
                seed: field(f[8], W)?,
            })
        })
        .collect()
}

/// A point of the RMSE surface over (batch_size, num_step, num_hidden).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlotPoint {
    pub batch_size: usize,
    pub num_step: usize,
    pub num_hidden: usize,
    pub rmse_percent: f64,
}

pub fn plot_points(results: &[TrialResult]) -> Vec<PlotPoint> {
    results
        .iter()
        .map(|r| PlotPoint {
            batch_size: r.params.batch_size,
            num_step: r.params.num_step,
            num_hidden: r.params.num_hidden,
            rmse_percent: r.rmse_percent,
        })
        .collect()
}

pub fn plot_data_to_csv(points: &[PlotPoint]) -> String {
    let mut out = format!("{PLOT_HEADER}\n");
    for p in points {
        let _ = writeln!(out, "{},{},{},{}", p.batch_size, p.num_step, p.num_hidden, p.rmse_percent);
    }
    out
}

pub fn plot_data_from_csv(text: &str) -> Result<Vec<PlotPoint>> {
    const W: &str = "plot data CSV";
    csv_rows(text, PLOT_HEADER, W)?
        .into_iter()
        .map(|f| {
            Ok(PlotPoint {
                batch_size: field(f[0], W)?,
                num_step: field(f[1], W)?,
                num_hidden: field(f[2], W)?,
                rmse_percent: field(f[3], W)?,
            })
        })
        .collect()
}

/// One-line summary naming the best configuration.
pub fn summary_line(results: &[TrialResult]) -> String {
    match results.iter().min_by(|a, b| a.rmse_percent.total_cmp(&b.rmse_percent)) {
        Some(b) => format!(
            "best trial_id={} batch_size={} num_step={} num_hidden={} num_layer={} rmse_percent={}",
            b.trial_id, b.params.batch_size, b.params.num_step, b.params.num_hidden, b.params.num_layer, b.rmse_percent
        ),
        None => "no trials".to_string(),
    }
}

/// Average ranks (1-based), ties sharing their mean rank. `inf` ranks last.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = mean;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation: Pearson correlation of the average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "spearman",
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::invalid("spearman needs at least two points"));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::NonFinite("spearman input contains NaN".into()));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::NonFinite("spearman of a constant sequence".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Rank correlation between hidden size and RMSE across trials.
pub fn hidden_rmse_correlation(results: &[TrialResult]) -> Result<f64> {
    let h: Vec<f64> = results.iter().map(|r| r.params.num_hidden as f64).collect();
    let e: Vec<f64> = results.iter().map(|r| r.rmse_percent).collect();
    spearman(&h, &e)
}
