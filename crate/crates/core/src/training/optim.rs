use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::Gradients;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

/// Adam with bias correction. Moments are keyed by parameter name.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    pub moments: BTreeMap<String, Moments>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    /// Applies one update from a backward pass. Parameters the loss did not
    /// reach are left untouched. Any non-finite gradient aborts the update
    /// before a single parameter changes.
    pub fn step(&mut self, params: Vec<(String, &mut Tensor)>, grads: &Gradients) -> Result<()> {
        let with_grads: Vec<_> = params
            .into_iter()
            .map(|(name, p)| {
                let g = grads.for_param(p);
                (name, p, g)
            })
            .collect();
        for (name, _, g) in &with_grads {
            if let Some(g) = g {
                if let Some(index) = g.iter().position(|x| !x.is_finite()) {
                    return Err(Error::NonFinite {
                        param: name.clone(),
                        index,
                    });
                }
            }
        }
        let updates = with_grads
            .into_iter()
            .filter_map(|(name, p, g)| g.map(|g| (name, p, g)));
        self.apply(updates)
    }

    /// Applies one update from explicit gradient buffers.
    pub fn step_with<'a>(
        &mut self,
        updates: impl IntoIterator<Item = (String, &'a mut Tensor, &'a [f64])>,
    ) -> Result<()> {
        let updates: Vec<_> = updates.into_iter().collect();
        for (name, p, g) in &updates {
            if g.len() != p.numel() {
                return Err(Error::dim("adam", &[g.len()], p.shape()));
            }
            if let Some(index) = g.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    param: name.clone(),
                    index,
                });
            }
        }
        self.apply(updates)
    }

    fn apply<'a>(
        &mut self,
        updates: impl IntoIterator<Item = (String, &'a mut Tensor, &'a [f64])>,
    ) -> Result<()> {
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (name, p, g) in updates {
            let n = p.numel();
            let mom = self.moments.entry(name).or_insert_with(|| Moments {
                m: vec![0.0; n],
                v: vec![0.0; n],
            });
            if mom.m.len() != n {
                return Err(Error::dim("adam", &[mom.m.len()], p.shape()));
            }
            let data = p.data_mut();
            for i in 0..n {
                let gi = g[i];
                mom.m[i] = beta1 * mom.m[i] + (1.0 - beta1) * gi;
                mom.v[i] = beta2 * mom.v[i] + (1.0 - beta2) * gi * gi;
                let m_hat = mom.m[i] / c1;
                let v_hat = mom.v[i] / c2;
                data[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
