//! Feed-forward baseline on the flattened input window.

use crate::dataset::WindowBatch;
use crate::error::{Error, Result};
use crate::tensor::{axpy, dot, gemm, tanh_act, MatRef, Rng};
use crate::train::init::InitScheme;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MlpConfig {
    pub num_step: usize,
    pub num_feature: usize,
    /// Number of hidden `tanh` layers.
    pub depth: usize,
    pub width: usize,
}

impl MlpConfig {
    pub fn new(num_step: usize, num_feature: usize) -> Self {
        Self {
            num_step,
            num_feature,
            depth: 3,
            width: 64,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.num_step * self.num_feature
    }

    fn layer_input(&self, k: usize) -> usize {
        if k == 0 {
            self.input_dim()
        } else {
            self.width
        }
    }

    fn head_input(&self) -> usize {
        if self.depth == 0 {
            self.input_dim()
        } else {
            self.width
        }
    }

    pub fn param_count(&self) -> usize {
        (0..self.depth)
            .map(|k| self.width * (self.layer_input(k) + 1))
            .sum::<usize>()
            + self.head_input()
            + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_step == 0 || !(1..=2).contains(&self.num_feature) {
            return Err(Error::invalid("MLP needs num_step >= 1 and num_feature in {1, 2}"));
        }
        if self.depth > 0 && self.width == 0 {
            return Err(Error::invalid("MLP width must be >= 1"));
        }
        Ok(())
    }
}

/// Weights in order: per hidden layer `W` (`width × in`, row-major) then `b`,
/// followed by the linear head `w_out`, `b_out`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    config: MlpConfig,
    data: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            data: vec![0.0; config.param_count()],
        })
    }

    pub fn from_flat(config: MlpConfig, data: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if data.len() != config.param_count() {
            return Err(Error::DimensionMismatch {
                context: "MlpParams::from_flat",
                expected: config.param_count(),
                found: data.len(),
            });
        }
        Ok(Self { config, data })
    }

    pub fn init(config: MlpConfig, scheme: InitScheme, rng: &mut Rng) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let mut at = 0;
        for k in 0..config.depth {
            let fan_in = config.layer_input(k);
            let n = config.width * fan_in;
            scheme.fill(&mut p.data[at..at + n], fan_in, config.width, rng)?;
            at += n + config.width;
        }
        let n = config.head_input();
        scheme.fill(&mut p.data[at..at + n], n, 1, rng)?;
        Ok(p)
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn layer_offsets(&self) -> Vec<(usize, usize)> {
        let c = &self.config;
        let mut at = 0;
        (0..c.depth)
            .map(|k| {
                let w = at;
                at += c.width * c.layer_input(k);
                let b = at;
                at += c.width;
                (w, b)
            })
            .collect()
    }

    fn head_offset(&self) -> usize {
        self.data.len() - self.config.head_input() - 1
    }

    pub fn out_b(&self) -> f64 {
        self.data[self.data.len() - 1]
    }

    pub fn weight_path(&self, index: usize) -> String {
        let c = &self.config;
        for (k, (w, b)) in self.layer_offsets().into_iter().enumerate() {
            if index < b {
                let cols = c.layer_input(k);
                return format!("dense{k}.W[{}][{}]", (index - w) / cols, (index - w) % cols);
            }
            if index < b + c.width {
                return format!("dense{k}.b[{}]", index - b);
            }
        }
        let head = self.head_offset();
        if index < self.data.len() - 1 {
            format!("W_out[0][{}]", index - head)
        } else {
            "b_out[0]".into()
        }
    }

    fn check_batch(&self, batch: &WindowBatch) -> Result<()> {
        if batch.num_step() * batch.num_feature() != self.config.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "MLP input window",
                expected: self.config.input_dim(),
                found: batch.num_step() * batch.num_feature(),
            });
        }
        if batch.batch_size() == 0 {
            return Err(Error::invalid("empty batch"));
        }
        Ok(())
    }

    /// Hidden activations per layer (after dropout), plus the unmasked tanh.
    fn forward(&self, batch: &WindowBatch, masks: Option<&[Vec<f64>]>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
        let c = &self.config;
        let rows = batch.batch_size();
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(c.depth);
        let mut tanhs: Vec<Vec<f64>> = Vec::with_capacity(c.depth);
        for (k, (w, b)) in self.layer_offsets().into_iter().enumerate() {
            let fan_in = c.layer_input(k);
            let input = if k == 0 { batch.data() } else { &acts[k - 1][..] };
            let mut z = Vec::with_capacity(rows * c.width);
            for _ in 0..rows {
                z.extend_from_slice(&self.data[b..b + c.width]);
            }
            gemm(
                1.0,
                MatRef::row_major(input, rows, fan_in),
                MatRef::row_major(&self.data[w..b], c.width, fan_in).t(),
                1.0,
                &mut z,
                c.width,
            );
            for v in &mut z {
                *v = tanh_act(*v);
            }
            let a = match masks {
                Some(m) => z.iter().zip(&m[k]).map(|(v, s)| v * s).collect(),
                None => z.clone(),
            };
            tanhs.push(z);
            acts.push(a);
        }
        let head = self.head_offset();
        let n = c.head_input();
        let last = if c.depth == 0 { batch.data() } else { &acts[c.depth - 1][..] };
        let preds = last
            .chunks_exact(n)
            .map(|a| dot(&self.data[head..head + n], a) + self.out_b())
            .collect();
        (acts, tanhs, preds)
    }

    pub fn predict(&self, batch: &WindowBatch) -> Result<Vec<f64>> {
        self.check_batch(batch)?;
        Ok(self.forward(batch, None).2)
    }

    /// Batch MSE and its gradient (overwrites `grad`). Dropout, when
    /// `keep_prob < 1`, masks hidden activations.
    pub fn loss_and_grad(&self, batch: &WindowBatch, keep_prob: f64, rng: &mut Rng, grad: &mut [f64]) -> Result<f64> {
        self.check_batch(batch)?;
        if !(keep_prob > 0.0 && keep_prob <= 1.0) {
            return Err(Error::invalid(format!("keep_prob {keep_prob} not in (0, 1]")));
        }
        assert_eq!(grad.len(), self.data.len());
        grad.fill(0.0);
        let c = self.config;
        let rows = batch.batch_size();
        let masks: Option<Vec<Vec<f64>>> = (keep_prob < 1.0).then(|| {
            (0..c.depth)
                .map(|_| {
                    (0..rows * c.width)
                        .map(|_| if rng.next_f64() < keep_prob { 1.0 / keep_prob } else { 0.0 })
                        .collect()
                })
                .collect()
        });
        let (acts, tanhs, preds) = self.forward(batch, masks.as_deref());
        let mut sq = 0.0;
        let dpred: Vec<f64> = preds
            .iter()
            .zip(batch.targets())
            .map(|(p, t)| {
                sq += (p - t) * (p - t);
                2.0 * (p - t) / rows as f64
            })
            .collect();

        let head = self.head_offset();
        let n = c.head_input();
        let last = if c.depth == 0 { batch.data() } else { &acts[c.depth - 1][..] };
        for (a, &dp) in last.chunks_exact(n).zip(&dpred) {
            axpy(dp, a, &mut grad[head..head + n]);
            grad[head + n] += dp;
        }
        let mut d_act: Vec<f64> = Vec::with_capacity(rows * n);
        for &dp in &dpred {
            d_act.extend(self.data[head..head + n].iter().map(|w| dp * w));
        }
        let offsets = self.layer_offsets();
        for k in (0..c.depth).rev() {
            let (w, b) = offsets[k];
            let fan_in = c.layer_input(k);
            // through dropout and tanh
            let mut dz = d_act;
            for (i, d) in dz.iter_mut().enumerate() {
                let t = tanhs[k][i];
                let m = masks.as_ref().map_or(1.0, |m| m[k][i]);
                *d *= m * (1.0 - t * t);
            }
            let input = if k == 0 { batch.data() } else { &acts[k - 1][..] };
            gemm(
                1.0,
                MatRef::row_major(&dz, rows, c.width).t(),
                MatRef::row_major(input, rows, fan_in),
                1.0,
                &mut grad[w..b],
                fan_in,
            );
            for row in dz.chunks_exact(c.width) {
                axpy(1.0, row, &mut grad[b..b + c.width]);
            }
            d_act = if k > 0 {
                let mut next = vec![0.0; rows * fan_in];
                gemm(
                    1.0,
                    MatRef::row_major(&dz, rows, c.width),
                    MatRef::row_major(&self.data[w..b], c.width, fan_in),
                    0.0,
                    &mut next,
                    fan_in,
                );
                next
            } else {
                Vec::new()
            };
        }
        let loss = sq / rows as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite("batch loss".into()));
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of {}", self.weight_path(i))));
        }
        Ok(loss)
    }
}
