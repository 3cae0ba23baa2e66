//! Central finite-difference verification of analytic gradients.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::graph::{Graph, Var};
use crate::autodiff::params::{ParamId, ParamStore};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub step: f64,
    pub tolerance: f64,
    /// Upper bound on coordinates perturbed; every parameter gets at least one.
    pub max_coords: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            tolerance: 1e-4,
            max_coords: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordCheck {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    /// `|analytic − numeric| / max(1, |numeric|)`
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checked: usize,
    pub tolerance: f64,
    pub worst: Option<CoordCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.worst.as_ref().map_or(0.0, |w| w.rel_error)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() <= self.tolerance
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} coords, max rel error {:.3e} (tol {:.0e}) {}",
            self.checked,
            self.max_rel_error(),
            self.tolerance,
            if self.passed() { "PASS" } else { "FAIL" }
        )?;
        if let Some(w) = &self.worst {
            write!(
                f,
                " worst {}[{}] analytic={:.6e} numeric={:.6e}",
                w.param, w.index, w.analytic, w.numeric
            )?;
        }
        Ok(())
    }
}

fn evaluate<F>(store: &ParamStore, build: &F) -> Result<f64>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<Var>,
{
    let mut g = Graph::new();
    let loss = build(&mut g, store)?;
    let v = g.value(loss);
    if !v.is_scalar() {
        return Err(Error::contract("gradient check needs a scalar loss"));
    }
    Ok(v.item())
}

/// Compares reverse-mode gradients of the scalar built by `build` against
/// central differences on a seeded sample of parameter coordinates.
///
/// `build` must be deterministic. Parameter values are restored and
/// gradients cleared before returning.
pub fn finite_diff_check<F>(store: &mut ParamStore, build: F, cfg: GradCheckConfig) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<Var>,
{
    if !(cfg.tolerance > 0.0) || !(cfg.step > 0.0) {
        return Err(Error::contract("gradient check needs positive tolerance and step"));
    }
    store.zero_grads();
    let mut g = Graph::new();
    let loss = build(&mut g, store)?;
    g.backward(loss, store)?;
    let analytic: Vec<_> = store.params().iter().map(|p| p.grad.clone()).collect();
    store.zero_grads();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut coords: Vec<(ParamId, usize)> = Vec::new();
    let mut rest: Vec<(ParamId, usize)> = Vec::new();
    for id in store.ids().collect::<Vec<_>>() {
        let n = store.value(id).len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        coords.push((id, idx[0]));
        rest.extend(idx[1..].iter().map(|&i| (id, i)));
    }
    rest.shuffle(&mut rng);
    let budget = cfg.max_coords.saturating_sub(coords.len());
    coords.extend(rest.into_iter().take(budget));

    let mut worst: Option<CoordCheck> = None;
    for &(id, i) in &coords {
        let orig = store.value(id).data()[i];
        store.value_mut(id).data_mut()[i] = orig + cfg.step;
        let plus = evaluate(store, &build);
        store.value_mut(id).data_mut()[i] = orig - cfg.step;
        let minus = evaluate(store, &build);
        store.value_mut(id).data_mut()[i] = orig;
        let numeric = (plus? - minus?) / (2.0 * cfg.step);
        let a = analytic[id.index()].data()[i];
        let rel_error = (a - numeric).abs() / numeric.abs().max(1.0);
        if worst.as_ref().map_or(true, |w| rel_error > w.rel_error) {
            worst = Some(CoordCheck {
                param: store.name(id).to_string(),
                index: i,
                analytic: a,
                numeric,
                rel_error,
            });
        }
    }
    Ok(GradCheckReport {
        checked: coords.len(),
        tolerance: cfg.tolerance,
        worst,
    })
}
