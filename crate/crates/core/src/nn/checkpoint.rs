//! Binary model checkpoint container.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic           8 bytes  "AWKCKPT\0"
//! format_version  u32
//! config_hash     u32 length + UTF-8 bytes
//! metadata        u32 length + UTF-8 bytes (JSON describing the model)
//! n_tensors       u32
//!   name          u32 length + UTF-8 bytes
//!   ndim          u32
//!   dims          ndim x u64
//!   values        prod(dims) x f64
//! has_optimizer   u8 (0 or 1)
//!   algorithm     u8 (0 = sgd, 1 = adam)
//!   lr, beta1, beta2, eps   4 x f64
//!   t             u64
//!   n_buffers     u32
//!     len         u64
//!     m           len x f64
//!     v           len x f64
//! ```

use std::path::Path;

use super::{Algorithm, Optimizer, ParamTensor};
use crate::binio::{put_f64s, put_str, ByteReader};
use crate::{Error, Result, FORMAT_VERSION};

const MAGIC: &[u8; 8] = b"AWKCKPT\0";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config_hash: String,
    pub metadata: String,
    pub tensors: Vec<ParamTensor>,
    pub optimizer: Option<Optimizer>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend(MAGIC);
        out.extend(FORMAT_VERSION.to_le_bytes());
        put_str(&mut out, &self.config_hash);
        put_str(&mut out, &self.metadata);
        out.extend((self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            put_str(&mut out, &t.name);
            out.extend((t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                out.extend((d as u64).to_le_bytes());
            }
            put_f64s(&mut out, &t.values);
        }
        match &self.optimizer {
            None => out.push(0),
            Some(opt) => {
                out.push(1);
                out.push(match opt.algorithm {
                    Algorithm::Sgd => 0,
                    Algorithm::Adam => 1,
                });
                put_f64s(&mut out, &[opt.lr, opt.beta1, opt.beta2, opt.eps]);
                out.extend(opt.t.to_le_bytes());
                out.extend((opt.m.len() as u32).to_le_bytes());
                for (m, v) in opt.m.iter().zip(&opt.v) {
                    out.extend((m.len() as u64).to_le_bytes());
                    put_f64s(&mut out, m);
                    put_f64s(&mut out, v);
                }
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(buf, "checkpoint");
        if r.take(8)? != MAGIC {
            return Err(Error::Format("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "checkpoint format_version {version} is not supported"
            )));
        }
        let config_hash = r.string()?;
        let metadata = r.string()?;
        let n = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(n);
        for _ in 0..n {
            let name = r.string()?;
            let ndim = r.u32()? as usize;
            let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let len = shape.iter().product();
            let values = r.f64s(len)?;
            tensors.push(ParamTensor::from_values(name, &shape, values)?);
        }
        let optimizer = match r.u8()? {
            0 => None,
            1 => {
                let algorithm = match r.u8()? {
                    0 => Algorithm::Sgd,
                    1 => Algorithm::Adam,
                    other => return Err(Error::Format(format!("unknown optimizer tag {other}"))),
                };
                let hp = r.f64s(4)?;
                let t = r.u64()?;
                let nb = r.u32()? as usize;
                let mut m = Vec::with_capacity(nb);
                let mut v = Vec::with_capacity(nb);
                for _ in 0..nb {
                    let len = r.u64()? as usize;
                    m.push(r.f64s(len)?);
                    v.push(r.f64s(len)?);
                }
                Some(Optimizer {
                    algorithm,
                    lr: hp[0],
                    beta1: hp[1],
                    beta2: hp[2],
                    eps: hp[3],
                    t,
                    m,
                    v,
                })
            }
            other => return Err(Error::Format(format!("bad optimizer flag {other}"))),
        };
        r.finish()?;
        Ok(Self {
            config_hash,
            metadata,
            tensors,
            optimizer,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn tensor(&self, name: &str) -> Result<&ParamTensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Format(format!("checkpoint lacks tensor `{name}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_with_optimizer_state() {
        let mut p = ParamTensor::from_values("w", &[2, 2], vec![1.0, -2.0, 3.5, 0.25]).unwrap();
        let mut opt = Optimizer::adam(0.01);
        p.grad = vec![0.1, 0.2, 0.3, 0.4];
        opt.step(&mut [&mut p]).unwrap();
        let ck = Checkpoint {
            config_hash: "abc123".into(),
            metadata: "{\"kind\":\"test\"}".into(),
            tensors: vec![p],
            optimizer: Some(opt),
        };
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(back, ck);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Checkpoint::from_bytes(b"nonsense").is_err());
        let ck = Checkpoint {
            config_hash: String::new(),
            metadata: String::new(),
            tensors: vec![],
            optimizer: None,
        };
        let mut bytes = ck.to_bytes();
        bytes.push(0);
        assert!(Checkpoint::from_bytes(&bytes).is_err());
    }
}
