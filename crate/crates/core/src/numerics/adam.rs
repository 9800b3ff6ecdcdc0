use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;
pub const DEFAULT_LEARNING_RATE: f64 = 2e-4;

/// Bias-corrected Adam.
///
/// Coordinates whose gradient is exactly zero in a step are left alone:
/// their value and both moments keep their previous state. Embedding rows
/// that a batch never touches therefore stay put.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub step_count: u64,
    pub learning_rate: f64,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
}

impl AdamState {
    pub fn new<'a>(learning_rate: f64, shapes: impl IntoIterator<Item = &'a [usize]>) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        let first_moment: Vec<Tensor> = shapes.into_iter().map(Tensor::zeros).collect();
        let second_moment = first_moment.clone();
        Ok(AdamState {
            step_count: 0,
            learning_rate,
            first_moment,
            second_moment,
        })
    }

    pub fn first_moment(&self) -> &[Tensor] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[Tensor] {
        &self.second_moment
    }

    pub fn apply<'a>(&mut self, params: impl IntoIterator<Item = &'a mut Tensor>, grads: &[Tensor]) -> Result<()> {
        let mut params: Vec<&'a mut Tensor> = params.into_iter().collect();
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::Shape {
                op: "adam_apply",
                left: vec![self.first_moment.len()],
                right: vec![params.len(), grads.len()],
            });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first_moment) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::Shape {
                    op: "adam_apply",
                    left: p.shape().to_vec(),
                    right: g.shape().to_vec(),
                });
            }
        }

        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        let lr = self.learning_rate;

        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = self.first_moment[i].data_mut();
            let v = self.second_moment[i].data_mut();
            for (j, (w, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                if gj == 0.0 {
                    continue;
                }
                m[j] = BETA1 * m[j] + (1.0 - BETA1) * gj;
                v[j] = BETA2 * v[j] + (1.0 - BETA2) * gj * gj;
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + EPSILON);
            }
        }
        Ok(())
    }
}
