//! AdamW with decoupled weight decay.

use crate::error::{Error, Result};

use super::ParamSet;

/// Optimizer hyperparameters. The paper-style run uses lr 1e-4; decay and
/// moment defaults follow common AdamW practice.
#[derive(Debug, Clone, Copy)]
pub struct AdamW {
    pub lr: f64,
    pub weight_decay: f64,
    pub betas: (f64, f64),
    pub eps: f64,
}

impl Default for AdamW {
    fn default() -> Self {
        AdamW {
            lr: 1e-4,
            weight_decay: 1e-2,
            betas: (0.9, 0.999),
            eps: 1e-8,
        }
    }
}

impl AdamW {
    pub fn with_lr(lr: f64) -> Self {
        AdamW {
            lr,
            ..Default::default()
        }
    }
}

/// One optimizer step over every parameter in the set. Gradients must be
/// populated and are left untouched; the caller zeroes them.
pub fn adamw_step(params: &mut ParamSet, cfg: &AdamW) -> Result<()> {
    let (b1, b2) = cfg.betas;
    for p in params.iter_mut() {
        let grad = p
            .tensor
            .grad
            .clone()
            .ok_or_else(|| Error::contract(format!("parameter `{}` has no gradient", p.name)))?;
        p.step += 1;
        let t = p.step as i32;
        let bias1 = 1.0 - b1.powi(t);
        let bias2 = 1.0 - b2.powi(t);
        let decay = 1.0 - cfg.lr * cfg.weight_decay;
        for ((w, g), (m, v)) in p
            .tensor
            .data_mut()
            .iter_mut()
            .zip(&grad)
            .zip(p.m.iter_mut().zip(p.v.iter_mut()))
        {
            *w *= decay;
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *w -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
