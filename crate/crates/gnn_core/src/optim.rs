//! Adam optimizer over a model's parameter tensors.

use serde::{Deserialize, Serialize};

use crate::layers::LayerParams;
use crate::Model;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    m: (Vec<LayerParams>, Vec<LayerParams>),
    v: (Vec<LayerParams>, Vec<LayerParams>),
    step_count: u64,
}

impl Adam {
    pub fn new(model: &Model, config: AdamConfig) -> Self {
        Self {
            config,
            m: model.zeros_like(),
            v: model.zeros_like(),
            step_count: 0,
        }
    }

    pub fn step(&mut self, model: &mut Model, grads: &(Vec<LayerParams>, Vec<LayerParams>)) {
        self.step_count += 1;
        let t = self.step_count as f64;
        let c = self.config;
        let bias1 = 1.0 - c.beta1.powf(t);
        let bias2 = 1.0 - c.beta2.powf(t);

        let update = |params: &mut [LayerParams],
                          grads: &[LayerParams],
                          m: &mut [LayerParams],
                          v: &mut [LayerParams]| {
            for (((p, g), m), v) in params.iter_mut().zip(grads).zip(m).zip(v) {
                for (((pt, gt), mt), vt) in p
                    .tensors
                    .iter_mut()
                    .zip(&g.tensors)
                    .zip(&mut m.tensors)
                    .zip(&mut v.tensors)
                {
                    let pd = pt.data_mut();
                    let gd = gt.data();
                    let md = mt.data_mut();
                    let vd = vt.data_mut();
                    for i in 0..pd.len() {
                        md[i] = c.beta1 * md[i] + (1.0 - c.beta1) * gd[i];
                        vd[i] = c.beta2 * vd[i] + (1.0 - c.beta2) * gd[i] * gd[i];
                        let mhat = md[i] / bias1;
                        let vhat = vd[i] / bias2;
                        pd[i] -= c.learning_rate * mhat / (vhat.sqrt() + c.epsilon);
                    }
                }
            }
        };
        update(&mut model.node_params, &grads.0, &mut self.m.0, &mut self.v.0);
        update(
            &mut model.graph_params,
            &grads.1,
            &mut self.m.1,
            &mut self.v.1,
        );
    }
}
