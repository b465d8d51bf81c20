//! Stacked LSTM network that maps one input window to one output sample.
//!
//! All learnable weights live in a single flat buffer. Per layer the order is
//! `W_f W_i W_o W_g` (each `num_hidden × input_dim`), `U_f U_i U_o U_g` (each
//! `num_hidden × num_hidden`), then `b_f b_i b_o b_g`; the output head
//! `W_out` (`1 × num_hidden`) and `b_out` follow the last layer. The same
//! order is used on disk, by the optimizers and by the gradient buffers.

mod persist;

pub use persist::{load_model, model_from_bytes, model_to_bytes, save_model, FORMAT_VERSION, MAGIC};

use crate::dataset::WindowBatch;
use crate::error::{Error, Result};
use crate::tensor::{dot, matvec_acc, sigmoid, tanh_act, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    /// Window length in samples (number of unrolled steps).
    pub num_step: usize,
    pub num_hidden: usize,
    /// 1 or 2 stacked layers, all with `num_hidden` units.
    pub num_layer: usize,
    /// 1 for audio only, 2 for audio plus normalized gain.
    pub num_feature: usize,
    pub sample_rate: u32,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_step == 0 || self.num_hidden == 0 {
            return Err(Error::invalid("num_step and num_hidden must be >= 1"));
        }
        if !(1..=2).contains(&self.num_layer) {
            return Err(Error::invalid(format!("num_layer must be 1 or 2, got {}", self.num_layer)));
        }
        if !(1..=2).contains(&self.num_feature) {
            return Err(Error::invalid(format!(
                "num_feature must be 1 or 2, got {}",
                self.num_feature
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::invalid("sample_rate must be positive"));
        }
        Ok(())
    }

    pub fn layer_input_dim(&self, layer: usize) -> usize {
        if layer == 0 {
            self.num_feature
        } else {
            self.num_hidden
        }
    }

    /// Flattened window length (`num_step × num_feature`).
    pub fn window_len(&self) -> usize {
        self.num_step * self.num_feature
    }

    pub fn param_count(&self) -> usize {
        let h = self.num_hidden;
        (0..self.num_layer)
            .map(|l| 4 * h * (self.layer_input_dim(l) + h + 1))
            .sum::<usize>()
            + h
            + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Forget,
    Input,
    Output,
    Candidate,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Forget, Gate::Input, Gate::Output, Gate::Candidate];

    pub fn index(self) -> usize {
        self as usize
    }

    fn suffix(self) -> &'static str {
        match self {
            Gate::Forget => "f",
            Gate::Input => "i",
            Gate::Output => "o",
            Gate::Candidate => "g",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct LayerOffsets {
    pub w: usize,
    pub u: usize,
    pub b: usize,
    pub end: usize,
    pub input_dim: usize,
}

/// Borrowed weights of one LSTM layer with the four gates stacked row-wise.
#[derive(Clone, Copy, Debug)]
pub struct LayerParams<'a, T = f64> {
    pub input_dim: usize,
    pub num_hidden: usize,
    /// `4·num_hidden × input_dim`
    pub w: &'a [T],
    /// `4·num_hidden × num_hidden`
    pub u: &'a [T],
    /// `4·num_hidden`
    pub b: &'a [T],
}

impl<'a, T: Real> LayerParams<'a, T> {
    pub fn gate_w(&self, gate: Gate) -> &'a [T] {
        let n = self.num_hidden * self.input_dim;
        &self.w[gate.index() * n..(gate.index() + 1) * n]
    }

    pub fn gate_u(&self, gate: Gate) -> &'a [T] {
        let n = self.num_hidden * self.num_hidden;
        &self.u[gate.index() * n..(gate.index() + 1) * n]
    }

    pub fn gate_b(&self, gate: Gate) -> &'a [T] {
        let h = self.num_hidden;
        &self.b[gate.index() * h..(gate.index() + 1) * h]
    }
}

/// All learnable state of the network.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams<T = f64> {
    config: ModelConfig,
    layers: Vec<LayerOffsets>,
    out_w: usize,
    out_b: usize,
    data: Vec<T>,
}

impl<T: Real> LstmParams<T> {
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        Self::from_flat(config, vec![T::zero(); config.param_count()])
    }

    pub fn from_flat(config: ModelConfig, data: Vec<T>) -> Result<Self> {
        config.validate()?;
        if data.len() != config.param_count() {
            return Err(Error::DimensionMismatch {
                context: "LstmParams::from_flat",
                expected: config.param_count(),
                found: data.len(),
            });
        }
        let h = config.num_hidden;
        let mut layers = Vec::with_capacity(config.num_layer);
        let mut at = 0;
        for l in 0..config.num_layer {
            let d = config.layer_input_dim(l);
            let w = at;
            let u = w + 4 * h * d;
            let b = u + 4 * h * h;
            let end = b + 4 * h;
            layers.push(LayerOffsets {
                w,
                u,
                b,
                end,
                input_dim: d,
            });
            at = end;
        }
        Ok(Self {
            config,
            layers,
            out_w: at,
            out_b: at + h,
            data,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub(crate) fn offsets(&self, layer: usize) -> LayerOffsets {
        self.layers[layer]
    }

    pub(crate) fn out_offset(&self) -> usize {
        self.out_w
    }

    pub fn layer(&self, layer: usize) -> LayerParams<'_, T> {
        let o = self.layers[layer];
        LayerParams {
            input_dim: o.input_dim,
            num_hidden: self.config.num_hidden,
            w: &self.data[o.w..o.u],
            u: &self.data[o.u..o.b],
            b: &self.data[o.b..o.end],
        }
    }

    pub fn gate_w_mut(&mut self, layer: usize, gate: Gate) -> &mut [T] {
        let o = self.layers[layer];
        let n = self.config.num_hidden * o.input_dim;
        let start = o.w + gate.index() * n;
        &mut self.data[start..start + n]
    }

    pub fn gate_u_mut(&mut self, layer: usize, gate: Gate) -> &mut [T] {
        let o = self.layers[layer];
        let n = self.config.num_hidden * self.config.num_hidden;
        let start = o.u + gate.index() * n;
        &mut self.data[start..start + n]
    }

    pub fn gate_b_mut(&mut self, layer: usize, gate: Gate) -> &mut [T] {
        let o = self.layers[layer];
        let h = self.config.num_hidden;
        let start = o.b + gate.index() * h;
        &mut self.data[start..start + h]
    }

    pub fn out_w(&self) -> &[T] {
        &self.data[self.out_w..self.out_b]
    }

    pub fn out_w_mut(&mut self) -> &mut [T] {
        &mut self.data[self.out_w..self.out_b]
    }

    pub fn out_b(&self) -> T {
        self.data[self.out_b]
    }

    pub fn set_out_b(&mut self, v: T) {
        self.data[self.out_b] = v;
    }

    /// Converts every weight to another float type.
    pub fn cast<U: Real>(&self) -> LstmParams<U> {
        LstmParams {
            config: self.config,
            layers: self.layers.clone(),
            out_w: self.out_w,
            out_b: self.out_b,
            data: self.data.iter().map(|v| U::of(Real::to_f64(*v))).collect(),
        }
    }

    /// Human readable name of the weight at flat `index`, e.g. `layer1.U_g[3][0]`.
    pub fn weight_path(&self, index: usize) -> String {
        let h = self.config.num_hidden;
        for (l, o) in self.layers.iter().enumerate() {
            if index >= o.end {
                continue;
            }
            let (name, local, cols) = if index < o.u {
                ("W", index - o.w, o.input_dim)
            } else if index < o.b {
                ("U", index - o.u, h)
            } else {
                let local = index - o.b;
                return format!("layer{l}.b_{}[{}]", Gate::ALL[local / h].suffix(), local % h);
            };
            let gate = Gate::ALL[local / (h * cols)];
            let r = (local % (h * cols)) / cols;
            let c = local % cols;
            return format!("layer{l}.{name}_{}[{r}][{c}]", gate.suffix());
        }
        if index < self.out_b {
            format!("W_out[0][{}]", index - self.out_w)
        } else if index == self.out_b {
            "b_out[0]".to_string()
        } else {
            format!("<out of range {index}>")
        }
    }

    /// Fails with the path of the first non-finite weight.
    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite(self.weight_path(i))),
            None => Ok(()),
        }
    }
}

/// Long-term (`c`) and short-term (`h`) state of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct CellState<T = f64> {
    pub c: Vec<T>,
    pub h: Vec<T>,
}

impl<T: Real> CellState<T> {
    pub fn zeros(num_hidden: usize) -> Self {
        Self {
            c: vec![T::zero(); num_hidden],
            h: vec![T::zero(); num_hidden],
        }
    }

    pub fn reset(&mut self) {
        self.c.fill(T::zero());
        self.h.fill(T::zero());
    }
}

/// One time step of an LSTM layer. Returns the new state and the step output
/// `y[n]` (which equals the new `h`).
pub fn lstm_cell_step<T: Real>(
    layer: &LayerParams<'_, T>,
    x: &[T],
    state: &CellState<T>,
) -> Result<(CellState<T>, Vec<T>)> {
    if x.len() != layer.input_dim {
        return Err(Error::DimensionMismatch {
            context: "lstm_cell_step input",
            expected: layer.input_dim,
            found: x.len(),
        });
    }
    if state.c.len() != layer.num_hidden || state.h.len() != layer.num_hidden {
        return Err(Error::DimensionMismatch {
            context: "lstm_cell_step state",
            expected: layer.num_hidden,
            found: state.h.len().min(state.c.len()),
        });
    }
    let mut next = state.clone();
    let mut z = vec![T::zero(); 4 * layer.num_hidden];
    lstm_cell_step_in_place(layer, x, &mut next, &mut z);
    let y = next.h.clone();
    Ok((next, y))
}

/// Allocation-free cell step. `z` is scratch of length `4·num_hidden`.
/// Lengths are the caller's responsibility.
#[inline]
pub fn lstm_cell_step_in_place<T: Real>(
    layer: &LayerParams<'_, T>,
    x: &[T],
    state: &mut CellState<T>,
    z: &mut [T],
) {
    let h = layer.num_hidden;
    z.copy_from_slice(layer.b);
    matvec_acc(layer.w, x, z);
    matvec_acc(layer.u, &state.h, z);
    let (zf, rest) = z.split_at(h);
    let (zi, rest) = rest.split_at(h);
    let (zo, zg) = rest.split_at(h);
    for j in 0..h {
        let f = sigmoid(zf[j]);
        let i = sigmoid(zi[j]);
        let o = sigmoid(zo[j]);
        let g = tanh_act(zg[j]);
        let c = f * state.c[j] + i * g;
        state.c[j] = c;
        state.h[j] = o * tanh_act(c);
    }
}

/// Reusable buffers for windowed evaluation.
#[derive(Clone, Debug)]
pub struct WindowRunner<T = f64> {
    states: Vec<CellState<T>>,
    z: Vec<T>,
}

impl<T: Real> WindowRunner<T> {
    pub fn new(config: &ModelConfig) -> Self {
        Self {
            states: (0..config.num_layer).map(|_| CellState::zeros(config.num_hidden)).collect(),
            z: vec![T::zero(); 4 * config.num_hidden],
        }
    }

    /// Runs one window from an all-zero state. `window` is `num_step` rows of
    /// `num_feature` values, oldest first; its length is not checked.
    pub fn run(&mut self, params: &LstmParams<T>, window: &[T]) -> T {
        let cfg = params.config();
        for s in &mut self.states {
            s.reset();
        }
        for row in window.chunks_exact(cfg.num_feature) {
            step_stack(params, row, &mut self.states, &mut self.z);
        }
        project(params, &self.states[cfg.num_layer - 1].h)
    }
}

/// Advances every layer by one step, layer `k` feeding layer `k + 1`.
#[inline]
pub(crate) fn step_stack<T: Real>(params: &LstmParams<T>, row: &[T], states: &mut [CellState<T>], z: &mut [T]) {
    let first = params.layer(0);
    lstm_cell_step_in_place(&first, row, &mut states[0], z);
    for l in 1..states.len() {
        let (below, rest) = states.split_at_mut(l);
        lstm_cell_step_in_place(&params.layer(l), &below[l - 1].h, &mut rest[0], z);
    }
}

#[inline]
pub(crate) fn project<T: Real>(params: &LstmParams<T>, h: &[T]) -> T {
    dot(params.out_w(), h) + params.out_b()
}

/// Prediction for one window of `num_step × num_feature` values, starting
/// from zero state.
pub fn forward_window<T: Real>(params: &LstmParams<T>, window: &[T]) -> Result<T> {
    let cfg = params.config();
    if window.len() != cfg.window_len() {
        return Err(Error::DimensionMismatch {
            context: "forward_window (num_step x num_feature)",
            expected: cfg.window_len(),
            found: window.len(),
        });
    }
    Ok(WindowRunner::new(cfg).run(params, window))
}

/// Predictions for every window of a batch, in row order.
pub fn forward_batch<T: Real>(params: &LstmParams<T>, batch: &WindowBatch<T>) -> Result<Vec<T>> {
    let cfg = params.config();
    if batch.num_step() != cfg.num_step || batch.num_feature() != cfg.num_feature {
        return Err(Error::DimensionMismatch {
            context: "forward_batch window shape",
            expected: cfg.window_len(),
            found: batch.num_step() * batch.num_feature(),
        });
    }
    let mut runner = WindowRunner::new(cfg);
    Ok(batch.windows().map(|w| runner.run(params, w)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cfg(num_step: usize, num_hidden: usize, num_layer: usize, num_feature: usize) -> ModelConfig {
        ModelConfig {
            num_step,
            num_hidden,
            num_layer,
            num_feature,
            sample_rate: 16_000,
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg(1, 1, 1, 1).validate().is_ok());
        assert!(cfg(0, 1, 1, 1).validate().is_err());
        assert!(cfg(1, 0, 1, 1).validate().is_err());
        assert!(cfg(1, 1, 3, 1).validate().is_err());
        assert!(cfg(1, 1, 1, 3).validate().is_err());
        assert_eq!(cfg(8, 3, 2, 2).param_count(), 4 * 3 * (2 + 3 + 1) + 4 * 3 * (3 + 3 + 1) + 4);
    }

    #[test]
    fn zero_params_zero_candidate() {
        let p = LstmParams::<f64>::zeros(cfg(1, 3, 1, 1)).unwrap();
        let (s, y) = lstm_cell_step(&p.layer(0), &[0.5], &CellState::zeros(3)).unwrap();
        assert_eq!(s.c, vec![0.0; 3]);
        assert_eq!(s.h, vec![0.0; 3]);
        assert_eq!(y, s.h);
    }

    #[test]
    fn saturated_forget_gate_wipes_state() {
        let mut p = LstmParams::<f64>::zeros(cfg(1, 2, 1, 1)).unwrap();
        p.gate_b_mut(0, Gate::Forget).fill(-1e3);
        p.gate_b_mut(0, Gate::Candidate).fill(0.3);
        let prev = CellState {
            c: vec![5.0, -7.0],
            h: vec![0.0, 0.0],
        };
        let (s, _) = lstm_cell_step(&p.layer(0), &[0.2], &prev).unwrap();
        let i = 0.5;
        let g = 0.3f64.tanh();
        for c in s.c {
            assert_relative_eq!(c, i * g, epsilon = 1e-15);
        }
    }

    #[test]
    fn single_unit_hand_evaluation() {
        let p = LstmParams::<f64>::zeros(cfg(1, 1, 1, 1)).unwrap();
        let prev = CellState {
            c: vec![1.0],
            h: vec![0.0],
        };
        let (s, y) = lstm_cell_step(&p.layer(0), &[0.7], &prev).unwrap();
        assert_relative_eq!(s.c[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(y[0], 0.5 * 0.5f64.tanh(), epsilon = 1e-15);
        assert!((y[0] - 0.231059).abs() < 1e-6);
    }

    #[test]
    fn cell_step_dimension_errors() {
        let p = LstmParams::<f64>::zeros(cfg(1, 2, 1, 1)).unwrap();
        assert!(lstm_cell_step(&p.layer(0), &[0.1, 0.2], &CellState::zeros(2)).is_err());
        assert!(lstm_cell_step(&p.layer(0), &[0.1], &CellState::zeros(3)).is_err());
    }

    #[test]
    fn constant_head() {
        let mut p = LstmParams::<f64>::zeros(cfg(4, 3, 2, 1)).unwrap();
        assert_eq!(forward_window(&p, &[0.3, -0.2, 0.9, 0.1]).unwrap(), 0.0);
        for v in p.as_mut_slice() {
            *v = 0.37;
        }
        p.out_w_mut().fill(0.0);
        p.set_out_b(-0.25);
        assert_eq!(forward_window(&p, &[0.3, -0.2, 0.9, 0.1]).unwrap(), -0.25);
        assert_eq!(forward_window(&p, &[0.0; 4]).unwrap(), -0.25);
    }

    /// Independent scalar evaluation of a one-unit, one-layer network.
    fn scalar_reference(p: &[f64; 14], xs: &[f64]) -> f64 {
        // order: wf wi wo wg uf ui uo ug bf bi bo bg wout bout
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let (mut c, mut h) = (0.0, 0.0);
        for &x in xs {
            let f = sig(p[0] * x + p[4] * h + p[8]);
            let i = sig(p[1] * x + p[5] * h + p[9]);
            let o = sig(p[2] * x + p[6] * h + p[10]);
            let g = (p[3] * x + p[7] * h + p[11]).tanh();
            c = f * c + i * g;
            h = o * c.tanh();
        }
        p[12] * h + p[13]
    }

    #[test]
    fn two_step_window_matches_scalar_reference() {
        let raw = [0.5, -0.3, 0.8, 1.2, 0.4, 0.1, -0.6, 0.9, 1.0, -0.2, 0.3, 0.05, 1.7, -0.1];
        let p = LstmParams::from_flat(cfg(2, 1, 1, 1), raw.to_vec()).unwrap();
        let xs = [0.6, -0.45];
        let got = forward_window(&p, &xs).unwrap();
        assert_relative_eq!(got, scalar_reference(&raw, &xs), epsilon = 1e-14);
    }

    #[test]
    fn forward_window_shape_error() {
        let p = LstmParams::<f64>::zeros(cfg(3, 2, 1, 2)).unwrap();
        assert!(forward_window(&p, &[0.0; 3]).is_err());
        assert!(forward_window(&p, &[0.0; 6]).is_ok());
    }

    #[test]
    fn forward_batch_rows_match_windows() {
        let c = cfg(3, 2, 2, 1);
        let data: Vec<f64> = (0..c.param_count()).map(|i| ((i * 37 % 23) as f64 - 11.0) / 17.0).collect();
        let p = LstmParams::from_flat(c, data).unwrap();
        let rows = vec![0.1, 0.2, 0.3, -0.4, 0.5, 0.0, 0.1, 0.2, 0.3];
        let batch = WindowBatch::new(3, 3, 1, rows.clone(), vec![0.0; 3]).unwrap();
        let out = forward_batch(&p, &batch).unwrap();
        for b in 0..3 {
            assert_eq!(out[b], forward_window(&p, &rows[b * 3..b * 3 + 3]).unwrap());
        }
        // identical rows 0 and 2
        assert_eq!(out[0], out[2]);
        let permuted = WindowBatch::new(
            3,
            3,
            1,
            [&rows[3..6], &rows[0..3], &rows[6..9]].concat(),
            vec![0.0; 3],
        )
        .unwrap();
        let out2 = forward_batch(&p, &permuted).unwrap();
        assert_eq!((out2[0], out2[1], out2[2]), (out[1], out[0], out[2]));
    }

    #[test]
    fn weight_paths() {
        let p = LstmParams::<f64>::zeros(cfg(2, 2, 2, 1)).unwrap();
        assert_eq!(p.weight_path(0), "layer0.W_f[0][0]");
        assert_eq!(p.weight_path(2), "layer0.W_i[0][0]");
        assert_eq!(p.weight_path(8 + 2 * 4 + 2 + 1), "layer0.U_o[1][1]");
        assert_eq!(p.weight_path(8 + 16 + 7), "layer0.b_g[1]");
        assert_eq!(p.weight_path(32), "layer1.W_f[0][0]");
        assert_eq!(p.weight_path(p.len() - 1), "b_out[0]");
        assert_eq!(p.weight_path(p.len() - 2), "W_out[0][1]");
    }

    #[test]
    fn cast_round_trip_f32() {
        let c = cfg(2, 2, 1, 1);
        let p = LstmParams::from_flat(c, vec![0.25; c.param_count()]).unwrap();
        let q: LstmParams<f32> = p.cast();
        let y32 = forward_window(&q, &[0.1f32, 0.2]).unwrap();
        let y64 = forward_window(&p, &[0.1, 0.2]).unwrap();
        assert!((y32 as f64 - y64).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn gates_stay_in_range(
            weights in proptest::collection::vec(-5.0f64..5.0, 4 * 2 * (1 + 2 + 1)),
            x in -3.0f64..3.0,
            c0 in -4.0f64..4.0,
            h0 in -1.0f64..1.0,
        ) {
            let h = 2;
            let layer = LayerParams {
                input_dim: 1,
                num_hidden: h,
                w: &weights[0..8],
                u: &weights[8..24],
                b: &weights[24..32],
            };
            let mut z = vec![0.0; 8];
            z.copy_from_slice(layer.b);
            matvec_acc(layer.w, &[x], &mut z);
            matvec_acc(layer.u, &[h0, -h0], &mut z);
            for j in 0..3 * h {
                let s = sigmoid(z[j]);
                prop_assert!(s > 0.0 && s < 1.0 || z[j].abs() > 30.0);
            }
            for j in 3 * h..4 * h {
                prop_assert!(z[j].tanh().abs() <= 1.0);
            }
            let (s, _) = lstm_cell_step(&layer, &[x], &CellState { c: vec![c0, c0], h: vec![h0, -h0] }).unwrap();
            prop_assert!(s.c.iter().chain(&s.h).all(|v| v.is_finite()));
            prop_assert!(s.h.iter().all(|v| v.abs() <= 1.0));
        }

        #[test]
        fn cell_state_carried_when_forget_open_input_closed(
            c0 in -3.0f64..3.0,
            xs in proptest::collection::vec(-1.0f64..1.0, 1..20),
        ) {
            let mut p = LstmParams::<f64>::zeros(cfg(1, 1, 1, 1)).unwrap();
            p.gate_w_mut(0, Gate::Candidate)[0] = 0.8;
            p.gate_b_mut(0, Gate::Forget)[0] = 1e3;
            p.gate_b_mut(0, Gate::Input)[0] = -1e3;
            let mut s = CellState { c: vec![c0], h: vec![0.0] };
            for x in xs {
                s = lstm_cell_step(&p.layer(0), &[x], &s).unwrap().0;
                prop_assert_eq!(s.c[0], c0);
            }
        }

        #[test]
        fn forward_window_is_deterministic(
            weights in proptest::collection::vec(-1.0f64..1.0, cfg(5, 3, 2, 2).param_count()),
            window in proptest::collection::vec(-1.0f64..1.0, 10),
        ) {
            let p = LstmParams::from_flat(cfg(5, 3, 2, 2), weights).unwrap();
            let a = forward_window(&p, &window).unwrap();
            let b = forward_window(&p, &window).unwrap();
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
