use crate::error::Result;
use crate::model::{Gate, LstmParams, ModelConfig};
use crate::tensor::Rng;

pub const FORGET_BIAS_INIT: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitScheme {
    /// Uniform on `±√(6/(fan_in+fan_out))`.
    Xavier,
    /// Gaussian with std `√(2/fan_in)`.
    He,
}

impl InitScheme {
    pub fn fill(self, out: &mut [f64], fan_in: usize, fan_out: usize, rng: &mut Rng) -> Result<()> {
        match self {
            InitScheme::Xavier => {
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                for v in out {
                    *v = rng.uniform(-a, a)?;
                }
            }
            InitScheme::He => {
                let std = (2.0 / fan_in as f64).sqrt();
                for v in out {
                    *v = rng.gaussian(0.0, std)?;
                }
            }
        }
        Ok(())
    }
}

/// Fresh weights: every gate block drawn from `scheme` with its own fan
/// dimensions, biases zero except the forget gate at [`FORGET_BIAS_INIT`].
pub fn init_params(config: &ModelConfig, scheme: InitScheme, rng: &mut Rng) -> Result<LstmParams> {
    let mut p = LstmParams::zeros(*config)?;
    let h = config.num_hidden;
    for l in 0..config.num_layer {
        let d = config.layer_input_dim(l);
        for gate in Gate::ALL {
            scheme.fill(p.gate_w_mut(l, gate), d, h, rng)?;
        }
        for gate in Gate::ALL {
            scheme.fill(p.gate_u_mut(l, gate), h, h, rng)?;
        }
        p.gate_b_mut(l, Gate::Forget).fill(FORGET_BIAS_INIT);
    }
    scheme.fill(p.out_w_mut(), h, 1, rng)?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ModelConfig {
        ModelConfig {
            num_step: 4,
            num_hidden: 6,
            num_layer: 2,
            num_feature: 2,
            sample_rate: 16_000,
        }
    }

    #[test]
    fn xavier_bounds_per_block() {
        let c = cfg();
        let p = init_params(&c, InitScheme::Xavier, &mut Rng::new(1)).unwrap();
        for l in 0..2 {
            let layer = p.layer(l);
            let d = c.layer_input_dim(l);
            let bw = (6.0 / (d + 6) as f64).sqrt();
            let bu = (6.0 / 12.0f64).sqrt();
            assert!(layer.w.iter().all(|v| v.abs() <= bw));
            assert!(layer.u.iter().all(|v| v.abs() <= bu));
            assert!(layer.gate_b(Gate::Forget).iter().all(|&v| v == 1.0));
            for g in [Gate::Input, Gate::Output, Gate::Candidate] {
                assert!(layer.gate_b(g).iter().all(|&v| v == 0.0));
            }
        }
        assert!(p.out_w().iter().all(|v| v.abs() <= (6.0 / 7.0f64).sqrt()));
        assert_eq!(p.out_b(), 0.0);
    }

    #[test]
    fn he_variance() {
        let mut rng = Rng::new(2);
        let mut buf = vec![0.0; 100_000];
        InitScheme::He.fill(&mut buf, 50, 10, &mut rng).unwrap();
        let mean = buf.iter().sum::<f64>() / buf.len() as f64;
        let var = buf.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (buf.len() - 1) as f64;
        assert!((var - 0.04).abs() / 0.04 < 0.05, "variance {var}");
    }

    #[test]
    fn deterministic() {
        let a = init_params(&cfg(), InitScheme::He, &mut Rng::new(9)).unwrap();
        let b = init_params(&cfg(), InitScheme::He, &mut Rng::new(9)).unwrap();
        assert_eq!(a, b);
    }
}
