//! Batched forward pass and truncated backpropagation through time.
//!
//! The batch is processed time-major: at each step the gate pre-activations
//! of every window are one `[rows × 4H]` GEMM. Large batches are cut into
//! row chunks whose gradients are accumulated in row order, so results only
//! depend on the batch contents.

use crate::dataset::WindowBatch;
use crate::error::{Error, Result};
use crate::model::LstmParams;
use crate::tensor::{axpy, dot, gemm, sigmoid, tanh_act, MatRef, Rng};

/// Gradient buffers share the weight layout.
pub type Gradients = LstmParams<f64>;

/// Upper bound on cached floats per chunk (about 32 MiB).
const CHUNK_FLOATS: usize = 1 << 22;
const PREDICT_CHUNK: usize = 256;

#[derive(Clone, Debug, Default)]
struct LayerCache {
    /// post-activation gates `[T × rows × 4H]` in f, i, o, g order
    acts: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
    /// dropout-scaled copy of the layer below's `h` (layers ≥ 1 only)
    xin: Vec<f64>,
}

/// Reusable scratch for [`backprop_batch`].
#[derive(Clone, Debug, Default)]
pub struct BpttWorkspace {
    layers: Vec<LayerCache>,
    masks: Vec<Vec<f64>>,
    preds: Vec<f64>,
    dz: Vec<f64>,
    dh_rec: Vec<f64>,
    dc_rec: Vec<f64>,
    d_above: Vec<f64>,
    d_below: Vec<f64>,
}

fn check_batch(params: &LstmParams, batch: &WindowBatch) -> Result<()> {
    let cfg = params.config();
    if batch.num_step() != cfg.num_step || batch.num_feature() != cfg.num_feature {
        return Err(Error::DimensionMismatch {
            context: "batch window shape",
            expected: cfg.window_len(),
            found: batch.num_step() * batch.num_feature(),
        });
    }
    if batch.batch_size() == 0 {
        return Err(Error::invalid("empty batch"));
    }
    Ok(())
}

fn resize(v: &mut Vec<f64>, n: usize) {
    v.clear();
    v.resize(n, 0.0);
}

impl BpttWorkspace {
    /// MSE over the batch and its gradient, written to `grad` (overwritten).
    ///
    /// With `keep_prob < 1` the outputs of every non-top layer are masked
    /// with inverted dropout, one mask per window shared by all time steps.
    pub fn loss_and_grad(
        &mut self,
        params: &LstmParams,
        batch: &WindowBatch,
        keep_prob: f64,
        rng: &mut Rng,
        grad: &mut [f64],
    ) -> Result<f64> {
        check_batch(params, batch)?;
        if !(keep_prob > 0.0 && keep_prob <= 1.0) {
            return Err(Error::invalid(format!("keep_prob {keep_prob} not in (0, 1]")));
        }
        if grad.len() != params.len() {
            return Err(Error::DimensionMismatch {
                context: "gradient buffer",
                expected: params.len(),
                found: grad.len(),
            });
        }
        grad.fill(0.0);
        let cfg = *params.config();
        let (t_len, h, layers) = (cfg.num_step, cfg.num_hidden, cfg.num_layer);
        let total = batch.batch_size();

        let dropout = keep_prob < 1.0 && layers > 1;
        self.masks.resize(layers - 1, Vec::new());
        if dropout {
            let scale = 1.0 / keep_prob;
            for m in &mut self.masks {
                m.clear();
                m.extend((0..total * h).map(|_| if rng.next_f64() < keep_prob { scale } else { 0.0 }));
            }
        }

        let per_row = t_len * 9 * h * layers + 1;
        let chunk = (CHUNK_FLOATS / per_row).clamp(1, total);
        let mut sq_sum = 0.0;
        let mut r0 = 0;
        while r0 < total {
            let rows = chunk.min(total - r0);
            self.forward_chunk(params, batch, r0, rows, dropout);
            let mut dpred = std::mem::take(&mut self.preds);
            for (b, p) in dpred.iter_mut().enumerate() {
                let e = *p - batch.targets()[r0 + b];
                sq_sum += e * e;
                *p = 2.0 * e / total as f64;
            }
            self.backward_chunk(params, batch, r0, rows, dropout, &dpred, grad);
            self.preds = dpred;
            r0 += rows;
        }
        let loss = sq_sum / total as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite("batch loss".into()));
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of {}", params.weight_path(i))));
        }
        Ok(loss)
    }

    fn forward_chunk(&mut self, params: &LstmParams, batch: &WindowBatch, r0: usize, rows: usize, dropout: bool) {
        let cfg = *params.config();
        let (t_len, h, f, layers) = (cfg.num_step, cfg.num_hidden, cfg.num_feature, cfg.num_layer);
        let g4 = 4 * h;
        self.layers.resize(layers, LayerCache::default());
        for l in 0..layers {
            let layer = params.layer(l);
            let d = layer.input_dim;
            let (below, rest) = self.layers.split_at_mut(l);
            let cur = &mut rest[0];
            resize(&mut cur.acts, t_len * rows * g4);
            resize(&mut cur.c, t_len * rows * h);
            resize(&mut cur.tanh_c, t_len * rows * h);
            resize(&mut cur.h, t_len * rows * h);
            if l > 0 && dropout {
                let mask = &self.masks[l - 1][r0 * h..(r0 + rows) * h];
                cur.xin.clear();
                for hs in below[l - 1].h.chunks_exact(rows * h) {
                    cur.xin.extend(hs.iter().zip(mask).map(|(v, m)| v * m));
                }
            }
            let LayerCache {
                acts,
                c,
                tanh_c,
                h: hid,
                xin,
            } = cur;
            let w_t = MatRef::row_major(layer.w, g4, d).t();
            let u_t = MatRef::row_major(layer.u, g4, h).t();
            for t in 0..t_len {
                let z = &mut acts[t * rows * g4..(t + 1) * rows * g4];
                for row in z.chunks_exact_mut(g4) {
                    row.copy_from_slice(layer.b);
                }
                let x_t = if l == 0 {
                    MatRef {
                        data: &batch.data()[(r0 * t_len + t) * f..],
                        rows,
                        cols: f,
                        row_stride: t_len * f,
                        col_stride: 1,
                    }
                } else {
                    let src = if dropout { &xin[..] } else { &below[l - 1].h[..] };
                    MatRef::row_major(&src[t * rows * h..(t + 1) * rows * h], rows, h)
                };
                gemm(1.0, x_t, w_t, 1.0, z, g4);
                let (c_prev, c_now) = c.split_at_mut(t * rows * h);
                if t > 0 {
                    let h_prev = MatRef::row_major(&hid[(t - 1) * rows * h..t * rows * h], rows, h);
                    gemm(1.0, h_prev, u_t, 1.0, z, g4);
                }
                let c_prev = if t > 0 { Some(&c_prev[(t - 1) * rows * h..]) } else { None };
                let tc = &mut tanh_c[t * rows * h..(t + 1) * rows * h];
                let hn = &mut hid[t * rows * h..(t + 1) * rows * h];
                for b in 0..rows {
                    let zr = &mut z[b * g4..(b + 1) * g4];
                    for j in 0..h {
                        let fg = sigmoid(zr[j]);
                        let ig = sigmoid(zr[h + j]);
                        let og = sigmoid(zr[2 * h + j]);
                        let gg = tanh_act(zr[3 * h + j]);
                        zr[j] = fg;
                        zr[h + j] = ig;
                        zr[2 * h + j] = og;
                        zr[3 * h + j] = gg;
                        let cp = c_prev.map_or(0.0, |cp| cp[b * h + j]);
                        let cv = fg * cp + ig * gg;
                        let tcv = tanh_act(cv);
                        c_now[b * h + j] = cv;
                        tc[b * h + j] = tcv;
                        hn[b * h + j] = og * tcv;
                    }
                }
            }
        }
        let top = &self.layers[layers - 1].h[(t_len - 1) * rows * h..];
        self.preds.clear();
        self.preds
            .extend(top.chunks_exact(h).take(rows).map(|hl| dot(params.out_w(), hl) + params.out_b()));
    }

    #[allow(clippy::too_many_arguments)]
    fn backward_chunk(
        &mut self,
        params: &LstmParams,
        batch: &WindowBatch,
        r0: usize,
        rows: usize,
        dropout: bool,
        dpred: &[f64],
        grad: &mut [f64],
    ) {
        let cfg = *params.config();
        let (t_len, h, f, layers) = (cfg.num_step, cfg.num_hidden, cfg.num_feature, cfg.num_layer);
        let g4 = 4 * h;
        let step = rows * h;

        let out = params.out_offset();
        {
            let top_h = &self.layers[layers - 1].h[(t_len - 1) * step..];
            let (gw, gb) = grad[out..].split_at_mut(h);
            for (b, &dp) in dpred.iter().enumerate() {
                axpy(dp, &top_h[b * h..(b + 1) * h], gw);
                gb[0] += dp;
            }
        }
        resize(&mut self.d_above, t_len * step);
        for (b, &dp) in dpred.iter().enumerate() {
            let at = (t_len - 1) * step + b * h;
            for (d, w) in self.d_above[at..at + h].iter_mut().zip(params.out_w()) {
                *d = dp * w;
            }
        }
        resize(&mut self.dz, rows * g4);
        for l in (0..layers).rev() {
            let layer = params.layer(l);
            let off = params.offsets(l);
            let d = layer.input_dim;
            let (below, rest) = self.layers.split_at(l);
            let cur = &rest[0];
            resize(&mut self.dh_rec, step);
            resize(&mut self.dc_rec, step);
            if l > 0 {
                resize(&mut self.d_below, t_len * step);
            }
            let g_layer = &mut grad[off.w..off.end];
            let (g_w, g_rest) = g_layer.split_at_mut(off.u - off.w);
            let (g_u, g_b) = g_rest.split_at_mut(off.b - off.u);
            for t in (0..t_len).rev() {
                let acts = &cur.acts[t * rows * g4..(t + 1) * rows * g4];
                for b in 0..rows {
                    let a = &acts[b * g4..(b + 1) * g4];
                    let dzr = &mut self.dz[b * g4..(b + 1) * g4];
                    for j in 0..h {
                        let k = b * h + j;
                        let idx = t * step + k;
                        let (fg, ig, og, gg) = (a[j], a[h + j], a[2 * h + j], a[3 * h + j]);
                        let tcv = cur.tanh_c[idx];
                        let dh = self.dh_rec[k] + self.d_above[idx];
                        let dc = self.dc_rec[k] + dh * og * (1.0 - tcv * tcv);
                        let cp = if t > 0 { cur.c[idx - step] } else { 0.0 };
                        dzr[j] = dc * cp * fg * (1.0 - fg);
                        dzr[h + j] = dc * gg * ig * (1.0 - ig);
                        dzr[2 * h + j] = dh * tcv * og * (1.0 - og);
                        dzr[3 * h + j] = dc * ig * (1.0 - gg * gg);
                        self.dc_rec[k] = dc * fg;
                    }
                }
                let dz = MatRef::row_major(&self.dz, rows, g4);
                let x_t = if l == 0 {
                    MatRef {
                        data: &batch.data()[(r0 * t_len + t) * f..],
                        rows,
                        cols: f,
                        row_stride: t_len * f,
                        col_stride: 1,
                    }
                } else {
                    let src = if dropout { &cur.xin[..] } else { &below[l - 1].h[..] };
                    MatRef::row_major(&src[t * step..(t + 1) * step], rows, h)
                };
                gemm(1.0, dz.t(), x_t, 1.0, g_w, d);
                for row in self.dz.chunks_exact(g4) {
                    axpy(1.0, row, g_b);
                }
                if t > 0 {
                    let h_prev = MatRef::row_major(&cur.h[(t - 1) * step..t * step], rows, h);
                    gemm(1.0, dz.t(), h_prev, 1.0, g_u, h);
                    gemm(1.0, dz, MatRef::row_major(layer.u, g4, h), 0.0, &mut self.dh_rec, h);
                }
                if l > 0 {
                    let dx = &mut self.d_below[t * step..(t + 1) * step];
                    gemm(1.0, dz, MatRef::row_major(layer.w, g4, d), 0.0, dx, d);
                    if dropout {
                        let mask = &self.masks[l - 1][r0 * h..(r0 + rows) * h];
                        for (v, m) in dx.iter_mut().zip(mask) {
                            *v *= m;
                        }
                    }
                }
            }
            if l > 0 {
                std::mem::swap(&mut self.d_above, &mut self.d_below);
            }
        }
    }
}

/// MSE and analytic gradient of every weight, averaged over the batch.
pub fn backprop_batch(
    params: &LstmParams,
    batch: &WindowBatch,
    keep_prob: f64,
    rng: &mut Rng,
) -> Result<(f64, Gradients)> {
    let mut grads = LstmParams::zeros(*params.config())?;
    let loss = BpttWorkspace::default().loss_and_grad(params, batch, keep_prob, rng, grads.as_mut_slice())?;
    Ok((loss, grads))
}

/// Forward-only batched prediction sharing the training kernels. Agrees with
/// [`crate::model::forward_batch`] up to floating point reassociation.
pub fn predict_batched(params: &LstmParams, batch: &WindowBatch) -> Result<Vec<f64>> {
    check_batch(params, batch)?;
    let cfg = *params.config();
    let (t_len, h, f, layers) = (cfg.num_step, cfg.num_hidden, cfg.num_feature, cfg.num_layer);
    let g4 = 4 * h;
    let total = batch.batch_size();
    let mut out = Vec::with_capacity(total);
    let mut hs: Vec<Vec<f64>> = vec![Vec::new(); layers];
    let mut cs: Vec<Vec<f64>> = vec![Vec::new(); layers];
    let mut z = Vec::new();
    let mut r0 = 0;
    while r0 < total {
        let rows = PREDICT_CHUNK.min(total - r0);
        for v in hs.iter_mut().chain(cs.iter_mut()) {
            resize(v, rows * h);
        }
        resize(&mut z, rows * g4);
        for t in 0..t_len {
            for l in 0..layers {
                let layer = params.layer(l);
                for row in z.chunks_exact_mut(g4) {
                    row.copy_from_slice(layer.b);
                }
                let (below, rest) = hs.split_at_mut(l);
                let h_cur = &mut rest[0];
                let x_t = if l == 0 {
                    MatRef {
                        data: &batch.data()[(r0 * t_len + t) * f..],
                        rows,
                        cols: f,
                        row_stride: t_len * f,
                        col_stride: 1,
                    }
                } else {
                    MatRef::row_major(&below[l - 1], rows, h)
                };
                gemm(1.0, x_t, MatRef::row_major(layer.w, g4, layer.input_dim).t(), 1.0, &mut z, g4);
                if t > 0 {
                    gemm(1.0, MatRef::row_major(h_cur, rows, h), MatRef::row_major(layer.u, g4, h).t(), 1.0, &mut z, g4);
                }
                let c_cur = &mut cs[l];
                for b in 0..rows {
                    let zr = &z[b * g4..(b + 1) * g4];
                    for j in 0..h {
                        let k = b * h + j;
                        let cv = sigmoid(zr[j]) * c_cur[k] + sigmoid(zr[h + j]) * tanh_act(zr[3 * h + j]);
                        c_cur[k] = cv;
                        h_cur[k] = sigmoid(zr[2 * h + j]) * tanh_act(cv);
                    }
                }
            }
        }
        out.extend(
            hs[layers - 1]
                .chunks_exact(h)
                .map(|hl| dot(params.out_w(), hl) + params.out_b()),
        );
        r0 += rows;
    }
    Ok(out)
}
