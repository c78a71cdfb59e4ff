use super::{Gradients, Params, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam moments for every parameter of one [`Params`] set.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &Params, config: AdamConfig) -> Self {
        let zeros = |t: &Tensor| Tensor::zeros(t.shape()).expect("param shape is valid");
        Self {
            config,
            step: 0,
            m: params.iter().map(|(_, _, t)| zeros(t)).collect(),
            v: params.iter().map(|(_, _, t)| zeros(t)).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update. Nothing is modified if any gradient
    /// entry is non-finite.
    pub fn step(&mut self, params: &mut Params, grads: &Gradients) -> Result<()> {
        if self.m.len() != params.len() {
            return Err(Error::invalid("adam state does not match parameter set"));
        }
        for id in params.ids() {
            if let Some(g) = grads.get(id) {
                if g.shape() != params.get(id).shape() {
                    return Err(Error::Shape {
                        op: "adam_step",
                        left: params.get(id).shape().to_vec(),
                        right: g.shape().to_vec(),
                    });
                }
                if !g.is_finite() {
                    return Err(Error::NonFinite {
                        what: "gradient".into(),
                        detail: format!("parameter {}", params.name(id)),
                    });
                }
            }
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for id in params.ids() {
            let (m, v) = (&mut self.m[id.index()], &mut self.v[id.index()]);
            let p = params.get_mut(id).data_mut();
            match grads.get(id) {
                Some(g) => {
                    for (((pi, mi), vi), gi) in p.iter_mut().zip(m.data_mut()).zip(v.data_mut()).zip(g.data()) {
                        *mi = beta1 * *mi + (1.0 - beta1) * gi;
                        *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                        *pi -= lr * (*mi / bc1) / ((*vi / bc2).sqrt() + eps);
                    }
                }
                None => {
                    for ((pi, mi), vi) in p.iter_mut().zip(m.data_mut()).zip(v.data_mut()) {
                        *mi *= beta1;
                        *vi *= beta2;
                        if *mi != 0.0 {
                            *pi -= lr * (*mi / bc1) / ((*vi / bc2).sqrt() + eps);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
