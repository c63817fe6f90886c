use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Method {
    pub fn adam() -> Self {
        Method::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First-order optimizer with per-parameter moments.
///
/// A single state must be stepped by one caller at a time.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    method: Method,
    step_size: f64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
}

impl OptimizerState {
    pub fn new(method: Method, step_size: f64) -> Result<Self> {
        if !(step_size > 0.0 && step_size.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive, got {step_size}"
            )));
        }
        Ok(Self {
            method,
            step_size,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
            step_count: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    /// Applies one update in place. On error neither `params` nor the moments change.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        check_len("optimizer gradient", params.len(), grads.len())?;
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("optimizer gradient"));
        }
        let eta = self.step_size;
        match self.method {
            Method::Sgd => {
                let next: Vec<f64> = params.iter().zip(grads).map(|(p, g)| p - eta * g).collect();
                if next.iter().any(|p| !p.is_finite()) {
                    return Err(Error::NonFinite("sgd update"));
                }
                params.copy_from_slice(&next);
            }
            Method::Adam { beta1, beta2, eps } => {
                if self.first_moment.is_empty() {
                    self.first_moment = vec![0.0; params.len()];
                    self.second_moment = vec![0.0; params.len()];
                }
                check_len("adam moments", self.first_moment.len(), params.len())?;
                let t = (self.step_count + 1) as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                let mut m = self.first_moment.clone();
                let mut v = self.second_moment.clone();
                let mut next = params.to_vec();
                for i in 0..next.len() {
                    let g = grads[i];
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                    let mhat = m[i] / c1;
                    let vhat = v[i] / c2;
                    next[i] -= eta * mhat / (vhat.sqrt() + eps);
                }
                if next.iter().any(|p| !p.is_finite()) {
                    return Err(Error::NonFinite("adam update"));
                }
                self.first_moment = m;
                self.second_moment = v;
                params.copy_from_slice(&next);
            }
        }
        self.step_count += 1;
        Ok(())
    }
}
