use crate::autodiff::params::ParamStore;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdateRule {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl UpdateRule {
    pub fn adam() -> Self {
        UpdateRule::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    lr: f64,
    rule: UpdateRule,
    /// Rescale the whole gradient when its global L2 norm exceeds this.
    clip_norm: Option<f64>,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
    step: u64,
}

impl OptimizerState {
    pub fn new(lr: f64, rule: UpdateRule) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
        }
        Ok(OptimizerState {
            lr,
            rule,
            clip_norm: None,
            first: Vec::new(),
            second: Vec::new(),
            step: 0,
        })
    }

    pub fn adam(lr: f64) -> Result<Self> {
        Self::new(lr, UpdateRule::adam())
    }

    pub fn sgd(lr: f64) -> Result<Self> {
        Self::new(lr, UpdateRule::Sgd)
    }

    pub fn with_clip_norm(mut self, max_norm: f64) -> Self {
        self.clip_norm = Some(max_norm);
        self
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update from the gradients accumulated in `store`, then
    /// clears them.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        if let Some(p) = store.params().iter().find(|p| !p.grad.all_finite()) {
            return Err(Error::Training { param: p.name.clone() });
        }
        if self.first.len() != store.len() {
            self.first = store.params().iter().map(|p| Tensor::zeros(p.value.shape())).collect();
            self.second = self.first.clone();
        }
        let scale = match self.clip_norm {
            Some(max) => {
                let norm = store
                    .params()
                    .iter()
                    .flat_map(|p| p.grad.data())
                    .map(|g| g * g)
                    .sum::<f64>()
                    .sqrt();
                if norm > max {
                    max / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        self.step += 1;
        let lr = self.lr;
        match self.rule {
            UpdateRule::Sgd => {
                for p in store.params_mut() {
                    for (w, g) in p.value.data_mut().iter_mut().zip(p.grad.data()) {
                        *w -= lr * scale * g;
                    }
                }
            }
            UpdateRule::Adam { beta1, beta2, eps } => {
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for ((p, m), v) in store.params_mut().iter_mut().zip(&mut self.first).zip(&mut self.second) {
                    let grads = p.grad.data();
                    let (m, v) = (m.data_mut(), v.data_mut());
                    for (i, w) in p.value.data_mut().iter_mut().enumerate() {
                        let g = grads[i] * scale;
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        *w -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        store.zero_grads();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(value: f64, grad: f64) -> ParamStore {
        let mut store = ParamStore::new();
        let id = store.add("p", Tensor::scalar(value)).unwrap();
        store.grad_mut(id).data_mut()[0] = grad;
        store
    }

    #[test]
    fn sgd_step() {
        let mut store = single(1.0, 1.0);
        OptimizerState::sgd(0.1).unwrap().step(&mut store).unwrap();
        assert!((store.params()[0].value.item() - 0.9).abs() < 1e-15);
        assert_eq!(store.params()[0].grad.item(), 0.0);
    }

    #[test]
    fn sgd_zero_gradient_is_noop() {
        let mut store = single(1.0, 0.0);
        OptimizerState::sgd(0.1).unwrap().step(&mut store).unwrap();
        assert_eq!(store.params()[0].value.item(), 1.0);
    }

    #[test]
    fn adam_moves_monotonically_against_constant_gradient() {
        for g in [2.5, -0.3] {
            let mut store = single(0.0, 0.0);
            let id = store.ids().next().unwrap();
            let mut opt = OptimizerState::adam(1e-2).unwrap();
            let mut prev = 0.0;
            for _ in 0..100 {
                store.grad_mut(id).data_mut()[0] = g;
                opt.step(&mut store).unwrap();
                let p = store.value(id).item();
                assert!((p - prev) * g < 0.0, "step must move against sign(g)");
                prev = p;
            }
            assert_eq!(opt.steps(), 100);
        }
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let mut store = single(1.0, f64::NAN);
        match OptimizerState::adam(1e-3).unwrap().step(&mut store) {
            Err(Error::Training { param }) => assert_eq!(param, "p"),
            other => panic!("expected training error, got {other:?}"),
        }
    }

    #[test]
    fn clipping_bounds_sgd_step() {
        let mut store = single(0.0, 100.0);
        let mut opt = OptimizerState::sgd(1.0).unwrap().with_clip_norm(1.0);
        opt.step(&mut store).unwrap();
        assert!((store.params()[0].value.item() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_positive_lr() {
        assert!(OptimizerState::sgd(0.0).is_err());
        assert!(OptimizerState::adam(-1.0).is_err());
    }
}
