use rand::Rng;

use crate::{Error, Result};

/// A named parameter block with a gradient accumulator of the same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
}

impl ParamTensor {
    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            values: vec![0.0; n],
            grad: vec![0.0; n],
        }
    }

    /// Uniform(-scale, scale) initialisation.
    pub fn uniform<R: Rng + ?Sized>(
        name: impl Into<String>,
        shape: &[usize],
        scale: f64,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(name, shape);
        for v in &mut p.values {
            *v = rng.random_range(-scale..scale);
        }
        p
    }

    pub fn from_values(name: impl Into<String>, shape: &[usize], values: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if values.len() != n {
            return Err(Error::Shape(format!(
                "tensor expects {n} values, got {}",
                values.len()
            )));
        }
        Ok(Self {
            name: name.into(),
            shape: shape.to_vec(),
            grad: vec![0.0; n],
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    /// Row `r` of a 2-D tensor.
    pub fn row(&self, r: usize) -> &[f64] {
        let cols = self.shape[1];
        &self.values[r * cols..(r + 1) * cols]
    }

    pub fn grad_row_mut(&mut self, r: usize) -> &mut [f64] {
        let cols = self.shape[1];
        &mut self.grad[r * cols..(r + 1) * cols]
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) && self.grad.iter().all(|g| g.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(self.name.clone()))
        }
    }
}
