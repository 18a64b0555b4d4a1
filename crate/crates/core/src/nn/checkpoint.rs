//! Binary parameter files.
//!
//! A network block is
//!
//! ```text
//! magic        8 bytes   "DNETCKPT"
//! version      u32 LE    1
//! layer count  u32 LE
//! per layer:
//!   in_dim     u32 LE
//!   out_dim    u32 LE
//!   activation u8        0 linear, 1 elu, 2 tanh, 3 sigmoid
//!   weights    out_dim * in_dim f64 LE, row-major (out, in)
//!   bias       out_dim f64 LE
//! ```
//!
//! Several blocks are stored together in a bundle:
//!
//! ```text
//! magic        8 bytes   "HNDBUNDL"
//! version      u32 LE    1
//! entry count  u32 LE
//! per entry:   name length u16 LE, UTF-8 name, payload length u64 LE, payload
//! ```
//!
//! Vector payloads are `u32 LE length` followed by that many f64 LE values.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{Activation, Dense, DenseNetwork};
use crate::error::{Error, Result};
use crate::Scalar;

pub const NETWORK_MAGIC: &[u8; 8] = b"DNETCKPT";
pub const BUNDLE_MAGIC: &[u8; 8] = b"HNDBUNDL";
pub const FORMAT_VERSION: u32 = 1;

const KIND: &str = "checkpoint";

pub(crate) fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| Error::format(KIND, format!("truncated input: {e}")))?;
    Ok(b)
}

pub(crate) fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact::<4>(r)?))
}

pub(crate) fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(read_exact::<8>(r)?))
}

pub fn write_network<T: Scalar>(w: &mut impl Write, net: &DenseNetwork<T>) -> Result<()> {
    w.write_all(NETWORK_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(net.layers().len() as u32).to_le_bytes())?;
    for l in net.layers() {
        w.write_all(&(l.in_dim as u32).to_le_bytes())?;
        w.write_all(&(l.out_dim as u32).to_le_bytes())?;
        w.write_all(&[l.activation.tag()])?;
        for v in l.weights.iter().chain(&l.bias) {
            w.write_all(&v.to_f64_lossy().to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_network<T: Scalar>(r: &mut impl Read) -> Result<DenseNetwork<T>> {
    let magic = read_exact::<8>(r)?;
    if &magic != NETWORK_MAGIC {
        return Err(Error::format(KIND, "bad network magic"));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::format(KIND, format!("unsupported network version {version}")));
    }
    let n = read_u32(r)? as usize;
    let mut layers = Vec::with_capacity(n);
    for _ in 0..n {
        let in_dim = read_u32(r)? as usize;
        let out_dim = read_u32(r)? as usize;
        let [tag] = read_exact::<1>(r)?;
        let activation = Activation::from_tag(tag).ok_or_else(|| Error::format(KIND, format!("unknown activation tag {tag}")))?;
        let mut layer = Dense::zeros(in_dim, out_dim, activation);
        for v in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
            *v = T::of(read_f64(r)?);
        }
        layers.push(layer);
    }
    DenseNetwork::new(layers)
}

pub fn write_vector<T: Scalar>(w: &mut impl Write, v: &[T]) -> Result<()> {
    w.write_all(&(v.len() as u32).to_le_bytes())?;
    for x in v {
        w.write_all(&x.to_f64_lossy().to_le_bytes())?;
    }
    Ok(())
}

pub fn read_vector<T: Scalar>(r: &mut impl Read) -> Result<Vec<T>> {
    let n = read_u32(r)? as usize;
    (0..n).map(|_| read_f64(r).map(T::of)).collect()
}

/// Named binary entries written in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bundle {
    entries: Vec<(String, Vec<u8>)>,
}

impl Bundle {
    pub fn new() -> Self {
        Bundle::default()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn put_raw(&mut self, name: &str, payload: Vec<u8>) {
        self.entries.retain(|(n, _)| n != name);
        self.entries.push((name.to_string(), payload));
    }

    pub fn raw(&self, name: &str) -> Result<&[u8]> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p.as_slice())
            .ok_or_else(|| Error::format(KIND, format!("missing bundle entry `{name}`")))
    }

    pub fn put_network<T: Scalar>(&mut self, name: &str, net: &DenseNetwork<T>) {
        let mut buf = Vec::new();
        write_network(&mut buf, net).expect("writing to memory");
        self.put_raw(name, buf);
    }

    pub fn network<T: Scalar>(&self, name: &str) -> Result<DenseNetwork<T>> {
        let mut r = self.raw(name)?;
        read_network(&mut r)
    }

    pub fn put_vector<T: Scalar>(&mut self, name: &str, v: &[T]) {
        let mut buf = Vec::new();
        write_vector(&mut buf, v).expect("writing to memory");
        self.put_raw(name, buf);
    }

    pub fn vector<T: Scalar>(&self, name: &str) -> Result<Vec<T>> {
        let mut r = self.raw(name)?;
        read_vector(&mut r)
    }

    pub fn put_text(&mut self, name: &str, text: &str) {
        self.put_raw(name, text.as_bytes().to_vec());
    }

    pub fn text(&self, name: &str) -> Result<String> {
        String::from_utf8(self.raw(name)?.to_vec()).map_err(|_| Error::format(KIND, format!("entry `{name}` is not UTF-8")))
    }

    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(BUNDLE_MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.entries.len() as u32).to_le_bytes())?;
        for (name, payload) in &self.entries {
            w.write_all(&(name.len() as u16).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(payload.len() as u64).to_le_bytes())?;
            w.write_all(payload)?;
        }
        Ok(())
    }

    pub fn read(r: &mut impl Read) -> Result<Self> {
        if &read_exact::<8>(r)? != BUNDLE_MAGIC {
            return Err(Error::format(KIND, "bad bundle magic"));
        }
        let version = read_u32(r)?;
        if version != FORMAT_VERSION {
            return Err(Error::format(KIND, format!("unsupported bundle version {version}")));
        }
        let n = read_u32(r)? as usize;
        let mut entries = Vec::with_capacity(n);
        for _ in 0..n {
            let len = u16::from_le_bytes(read_exact::<2>(r)?) as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name).map_err(|e| Error::format(KIND, e.to_string()))?;
            let name = String::from_utf8(name).map_err(|_| Error::format(KIND, "entry name is not UTF-8"))?;
            let plen = u64::from_le_bytes(read_exact::<8>(r)?) as usize;
            let mut payload = vec![0u8; plen];
            r.read_exact(&mut payload).map_err(|e| Error::format(KIND, e.to_string()))?;
            entries.push((name, payload));
        }
        Ok(Bundle { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Bundle::read(&mut bytes.as_slice())
    }
}
