//! Single LSTM cell with gates ordered (input, forget, output, candidate).

use rand::Rng;

use super::{sigmoid, ParamTensor};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LstmCell {
    /// `[4 * hidden, input]`
    pub w_x: ParamTensor,
    /// `[4 * hidden, hidden]`
    pub w_h: ParamTensor,
    /// `[4 * hidden]`
    pub bias: ParamTensor,
}

#[derive(Clone, Debug)]
pub struct LstmCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmCell {
    pub fn new<R: Rng + ?Sized>(name: &str, input: usize, hidden: usize, scale: f64, rng: &mut R) -> Self {
        Self {
            w_x: ParamTensor::uniform(format!("{name}.w_x"), &[4 * hidden, input], scale, rng),
            w_h: ParamTensor::uniform(format!("{name}.w_h"), &[4 * hidden, hidden], scale, rng),
            bias: ParamTensor::uniform(format!("{name}.bias"), &[4 * hidden], scale, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.shape[1]
    }

    pub fn input(&self) -> usize {
        self.w_x.shape[1]
    }

    /// One step: returns `(h_t, c_t)` and the cache needed by [`Self::backward`].
    pub fn forward(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>, LstmCache)> {
        let d = self.hidden();
        if x.len() != self.input() || h_prev.len() != d || c_prev.len() != d {
            return Err(Error::Shape(format!(
                "lstm step with x={}, h={}, c={} (expects {}, {d}, {d})",
                x.len(),
                h_prev.len(),
                c_prev.len(),
                self.input()
            )));
        }
        let mut z = self.bias.values.clone();
        for (r, zr) in z.iter_mut().enumerate() {
            *zr += super::dot(self.w_x.row(r), x) + super::dot(self.w_h.row(r), h_prev);
        }
        let i: Vec<f64> = z[..d].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = z[d..2 * d].iter().map(|&v| sigmoid(v)).collect();
        let o: Vec<f64> = z[2 * d..3 * d].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = z[3 * d..].iter().map(|v| v.tanh()).collect();
        let c: Vec<f64> = (0..d).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h: Vec<f64> = (0..d).map(|k| o[k] * tanh_c[k]).collect();
        let cache = LstmCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            i,
            f,
            o,
            g,
            tanh_c,
        };
        Ok((h, c, cache))
    }

    /// Backward through one step given `dL/dh_t` and `dL/dc_t`. Returns
    /// `(dx, dh_prev, dc_prev)` and accumulates parameter gradients.
    pub fn backward(&mut self, cache: &LstmCache, dh: &[f64], dc_next: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let d = self.hidden();
        let n_in = self.input();
        let mut dz = vec![0.0; 4 * d];
        let mut dc_prev = vec![0.0; d];
        for k in 0..d {
            let (i, f, o, g, tc) = (cache.i[k], cache.f[k], cache.o[k], cache.g[k], cache.tanh_c[k]);
            let d_o = dh[k] * tc;
            let dc = dc_next[k] + dh[k] * o * (1.0 - tc * tc);
            dz[k] = dc * g * i * (1.0 - i);
            dz[d + k] = dc * cache.c_prev[k] * f * (1.0 - f);
            dz[2 * d + k] = d_o * o * (1.0 - o);
            dz[3 * d + k] = dc * i * (1.0 - g * g);
            dc_prev[k] = dc * f;
        }
        let mut dx = vec![0.0; n_in];
        let mut dh_prev = vec![0.0; d];
        for (r, &g) in dz.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            self.bias.grad[r] += g;
            for c in 0..n_in {
                self.w_x.grad[r * n_in + c] += g * cache.x[c];
                dx[c] += g * self.w_x.values[r * n_in + c];
            }
            for c in 0..d {
                self.w_h.grad[r * d + c] += g * cache.h_prev[c];
                dh_prev[c] += g * self.w_h.values[r * d + c];
            }
        }
        (dx, dh_prev, dc_prev)
    }

    pub fn params_mut(&mut self) -> [&mut ParamTensor; 3] {
        [&mut self.w_x, &mut self.w_h, &mut self.bias]
    }

    pub fn params(&self) -> [&ParamTensor; 3] {
        [&self.w_x, &self.w_h, &self.bias]
    }
}
