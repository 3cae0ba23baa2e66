//! Seeded minibatch training loop shared by every trainable model.

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, OptimizerState, ParamStore, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Global gradient-norm cap; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 8,
            lr: 1e-3,
            clip_norm: Some(5.0),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be positive".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        Ok(())
    }

    pub fn optimizer(&self) -> Result<OptimizerState> {
        let opt = OptimizerState::adam(self.lr)?;
        Ok(match self.clip_norm {
            Some(c) => opt.with_clip_norm(c),
            None => opt,
        })
    }
}

/// Mean per-item loss for each epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epoch_losses: Vec<f64>,
}

impl TrainLog {
    pub fn first(&self) -> Option<f64> {
        self.epoch_losses.first().copied()
    }

    pub fn last(&self) -> Option<f64> {
        self.epoch_losses.last().copied()
    }
}

/// Runs `cfg.epochs` passes over items `0..n`. `loss_of` builds the loss of
/// one item on a fresh graph; gradients of a minibatch are averaged before
/// each optimizer step. `on_epoch` may stop training early by returning
/// `false`.
pub fn train_loop<F, E>(
    store: &mut ParamStore,
    n: usize,
    cfg: &TrainConfig,
    tag: &str,
    mut loss_of: F,
    mut on_epoch: E,
) -> Result<TrainLog>
where
    F: FnMut(&mut Graph, &ParamStore, usize) -> Result<Var>,
    E: FnMut(usize, f64, &ParamStore) -> Result<bool>,
{
    cfg.validate()?;
    if n == 0 {
        return Err(Error::contract(format!("{tag}: empty training set")));
    }
    let mut opt = cfg.optimizer()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = TrainLog::default();
    store.zero_grads();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let mut g = Graph::new();
                let loss = loss_of(&mut g, store, i)?;
                total += g.value(loss).item();
                let scaled = g.scale(loss, scale)?;
                g.backward(scaled, store)?;
            }
            opt.step(store)?;
        }
        let mean = total / n as f64;
        if !mean.is_finite() {
            return Err(Error::Training {
                param: format!("{tag} loss at epoch {epoch}"),
            });
        }
        info!("{tag} epoch {} mean loss {mean:.6}", epoch + 1);
        log.epoch_losses.push(mean);
        if !on_epoch(epoch, mean, store)? {
            break;
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn quadratic(seed: u64) -> (ParamStore, TrainLog) {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::vector(&[3.0, -2.0])).unwrap();
        let targets = [Tensor::vector(&[1.0, 1.0]), Tensor::vector(&[0.0, 2.0])];
        let cfg = TrainConfig {
            epochs: 300,
            batch_size: 2,
            lr: 0.05,
            clip_norm: None,
            seed,
        };
        let log = train_loop(
            &mut store,
            2,
            &cfg,
            "quad",
            |g, s, i| {
                let w = g.param(s, id);
                let t = g.input(targets[i].clone());
                let diff = g.sub(w, t)?;
                g.dot(diff, diff)
            },
            |_, _, _| Ok(true),
        )
        .unwrap();
        (store, log)
    }

    #[test]
    fn converges_to_mean_target() {
        let (store, log) = quadratic(1);
        let w = store.value(store.id("w").unwrap());
        assert!(w.max_abs_diff(&Tensor::vector(&[0.5, 1.5])) < 1e-2, "{w:?}");
        assert!(log.last().unwrap() < log.first().unwrap());
    }

    #[test]
    fn deterministic_per_seed() {
        let (a, la) = quadratic(4);
        let (b, lb) = quadratic(4);
        assert_eq!(la, lb);
        assert_eq!(a.params()[0].value, b.params()[0].value);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig {
            lr: -1.0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn early_stop() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::scalar(1.0)).unwrap();
        let cfg = TrainConfig::default();
        let log = train_loop(
            &mut store,
            1,
            &cfg,
            "stop",
            |g, s, _| {
                let w = g.param(s, id);
                g.mul(w, w)
            },
            |epoch, _, _| Ok(epoch < 2),
        )
        .unwrap();
        assert_eq!(log.epoch_losses.len(), 3);
    }
}
