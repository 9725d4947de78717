use super::Parameter;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update at step `t` (1-based). Gradients are
/// zeroed afterwards.
pub fn adam_step(params: &mut [&mut Parameter], cfg: &AdamConfig, t: u64) -> Result<()> {
    if t == 0 {
        return Err(Error::arg("adam step counter starts at 1"));
    }
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for p in params.iter_mut() {
        if p.grad.shape() != p.value.shape() {
            return Err(Error::Dimension {
                op: "adam",
                left: p.value.shape(),
                right: p.grad.shape(),
            });
        }
        let Parameter {
            value,
            grad,
            adam_m,
            adam_v,
        } = &mut **p;
        let it = value
            .data_mut()
            .iter_mut()
            .zip(grad.data_mut().iter_mut())
            .zip(adam_m.data_mut().iter_mut().zip(adam_v.data_mut().iter_mut()));
        for ((w, g), (m, v)) in it {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * *g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * *g * *g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *w -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            *g = 0.0;
        }
    }
    Ok(())
}

/// Adam with its own step counter.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, mut params: Vec<&mut Parameter>) -> Result<()> {
        self.t += 1;
        adam_step(&mut params, &self.config, self.t)
    }
}
