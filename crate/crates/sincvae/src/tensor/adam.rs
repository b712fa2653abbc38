//! Named parameter storage and the Adam optimizer.

use crate::error::{Error, Result};

use super::{Real, Tensor};

/// Ordered, named collection of trainable tensors. Iteration order is
/// insertion order, which keeps every downstream artifact (gradients,
/// optimizer state, checkpoints) deterministic.
#[derive(Clone, Debug, Default)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter. Duplicate names are rejected.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if self.entries.iter().any(|(n, _)| *n == name) {
            return Err(Error::Config(format!("duplicate parameter name: {name}")));
        }
        self.entries.push((name, tensor));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn name_at(&self, i: usize) -> &str {
        &self.entries[i].0
    }

    pub fn tensor_at(&self, i: usize) -> &Tensor {
        &self.entries[i].1
    }

    pub fn tensor_at_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.entries[i].1
    }
}

/// Adam hyperparameters. Defaults follow the common published values
/// with the training default learning rate of 5e-4.
#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub lr: Real,
    pub beta1: Real,
    pub beta2: Real,
    pub eps: Real,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 5e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam optimizer state: first/second moment accumulators (one pair
/// per parameter, shape-matched) and a strictly increasing step count.
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig, params: &ParamSet) -> Self {
        let m = params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        let v = params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        Adam { cfg, m, v, step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update. `grads` must align with `params`
    /// index-for-index; any non-finite gradient aborts, naming the
    /// offending parameter.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[Tensor]) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::Config(format!(
                "adam: {} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        for i in 0..params.len() {
            let name = params.name_at(i);
            if params.tensor_at(i).shape() != grads[i].shape() {
                return Err(Error::shape(
                    &format!("adam gradient for {name}"),
                    params.tensor_at(i).shape(),
                    grads[i].shape(),
                ));
            }
            if grads[i].data().iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "adam: non-finite gradient for parameter {name}"
                )));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.cfg.beta1.powi(t);
        let c2 = 1.0 - self.cfg.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i].data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let p = params.tensor_at_mut(i).data_mut();
            for j in 0..g.len() {
                m[j] = self.cfg.beta1 * m[j] + (1.0 - self.cfg.beta1) * g[j];
                v[j] = self.cfg.beta2 * v[j] + (1.0 - self.cfg.beta2) * g[j] * g[j];
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                p[j] -= self.cfg.lr * m_hat / (v_hat.sqrt() + self.cfg.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(val: Real) -> ParamSet {
        let mut p = ParamSet::new();
        p.insert("p", Tensor::scalar(val)).unwrap();
        p
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = single(1.25);
        let mut adam = Adam::new(AdamConfig::default(), &p);
        adam.step(&mut p, &[Tensor::scalar(0.0)]).unwrap();
        assert_eq!(p.get("p").unwrap().item(), 1.25);
    }

    #[test]
    fn first_step_magnitude_is_learning_rate() {
        // g=1: m_hat=1, v_hat=1, so the step is lr/(1+eps).
        let lr = 5e-4;
        let mut p = single(0.0);
        let mut adam = Adam::new(AdamConfig { lr, ..Default::default() }, &p);
        adam.step(&mut p, &[Tensor::scalar(1.0)]).unwrap();
        let got = p.get("p").unwrap().item();
        assert!((got + lr).abs() < lr * 1e-6, "step {got}, want ~{}", -lr);
    }

    #[test]
    fn identical_inputs_produce_identical_updates() {
        let run = || {
            let mut p = single(0.7);
            let mut adam = Adam::new(AdamConfig::default(), &p);
            adam.step(&mut p, &[Tensor::scalar(0.3)]).unwrap();
            adam.step(&mut p, &[Tensor::scalar(-0.1)]).unwrap();
            p.get("p").unwrap().item().to_bits()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_names_the_parameter() {
        let mut p = ParamSet::new();
        p.insert("enc.w", Tensor::scalar(0.0)).unwrap();
        let mut adam = Adam::new(AdamConfig::default(), &p);
        let err = adam
            .step(&mut p, &[Tensor::scalar(Real::NAN)])
            .unwrap_err()
            .to_string();
        assert!(err.contains("enc.w"), "{err}");
    }

    #[test]
    fn duplicate_parameter_name_rejected() {
        let mut p = ParamSet::new();
        p.insert("w", Tensor::scalar(0.0)).unwrap();
        assert!(p.insert("w", Tensor::scalar(1.0)).is_err());
    }
}
