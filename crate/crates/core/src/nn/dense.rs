use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ParamTensor;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation and the output.
    pub fn derivative(self, pre: f64, out: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - out * out,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `y = act(W x + b)` with `W` stored row-major as `[out, in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: ParamTensor,
    pub bias: ParamTensor,
    pub act: Activation,
}

#[derive(Clone, Debug)]
pub struct DenseCache {
    pub input: Vec<f64>,
    pub pre: Vec<f64>,
    pub output: Vec<f64>,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        input: usize,
        output: usize,
        act: Activation,
        init_scale: f64,
        rng: &mut R,
    ) -> Self {
        Self {
            weight: ParamTensor::uniform(format!("{name}.weight"), &[output, input], init_scale, rng),
            bias: ParamTensor::uniform(format!("{name}.bias"), &[output], init_scale, rng),
            act,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn forward(&self, x: &[f64]) -> Result<DenseCache> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "{}: input length {} but layer expects {}",
                self.weight.name,
                x.len(),
                self.input_dim()
            )));
        }
        let pre: Vec<f64> = (0..self.output_dim())
            .map(|o| super::dot(self.weight.row(o), x) + self.bias.values[o])
            .collect();
        let output = pre.iter().map(|&p| self.act.apply(p)).collect();
        Ok(DenseCache {
            input: x.to_vec(),
            pre,
            output,
        })
    }

    /// Accumulate parameter gradients and return `dL/dx`.
    pub fn backward(&mut self, cache: &DenseCache, dy: &[f64]) -> Vec<f64> {
        let n_in = self.input_dim();
        let mut dx = vec![0.0; n_in];
        for o in 0..self.output_dim() {
            let dpre = dy[o] * self.act.derivative(cache.pre[o], cache.output[o]);
            if dpre == 0.0 {
                continue;
            }
            self.bias.grad[o] += dpre;
            let row = o * n_in;
            for i in 0..n_in {
                self.weight.grad[row + i] += dpre * cache.input[i];
                dx[i] += dpre * self.weight.values[row + i];
            }
        }
        dx
    }

    pub fn params_mut(&mut self) -> [&mut ParamTensor; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn params(&self) -> [&ParamTensor; 2] {
        [&self.weight, &self.bias]
    }
}
