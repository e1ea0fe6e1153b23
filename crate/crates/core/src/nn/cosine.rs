use super::{dot, norm};
use crate::{Error, Result};

/// `u·v / (|u||v|)`; errors on a zero-norm input.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!(
            "cosine of vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::invalid("cosine of a zero-norm vector"));
    }
    Ok(dot(u, v) / (nu * nv))
}

/// Cosine that maps degenerate (zero-norm) pairs to 0.
pub fn cosine_or_zero(u: &[f64], v: &[f64]) -> f64 {
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        0.0
    } else {
        (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0)
    }
}

/// Gradients of `cos(u, v)` scaled by `dout`.
///
/// d cos / du = v/(|u||v|) - cos · u/|u|²
pub fn cosine_backward(u: &[f64], v: &[f64], dout: f64) -> (Vec<f64>, Vec<f64>) {
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return (vec![0.0; u.len()], vec![0.0; v.len()]);
    }
    let c = dot(u, v) / (nu * nv);
    let inv = 1.0 / (nu * nv);
    let du = u
        .iter()
        .zip(v)
        .map(|(&a, &b)| dout * (b * inv - c * a / (nu * nu)))
        .collect();
    let dv = u
        .iter()
        .zip(v)
        .map(|(&a, &b)| dout * (a * inv - c * b / (nv * nv)))
        .collect();
    (du, dv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_values() {
        let u = [1.0, 2.0, -0.5];
        assert!((cosine(&u, &u).unwrap() - 1.0).abs() < 1e-12);
        assert!(cosine(&[1.0, 0.0], &[0.0, 2.0]).unwrap().abs() < 1e-12);
        let scaled: Vec<f64> = u.iter().map(|x| 2.5 * x).collect();
        let v = [0.3, -1.0, 2.0];
        assert!((cosine(&scaled, &v).unwrap() - cosine(&u, &v).unwrap()).abs() < 1e-12);
        assert!(cosine(&[0.0, 0.0], &v[..2]).is_err());
        assert_eq!(cosine_or_zero(&[0.0, 0.0], &[1.0, 1.0]), 0.0);
    }
}
