//! Versioned named-parameter weight files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "SINETWTS"
//! version    u32      1
//! meta_len   u32      then meta_len bytes of UTF-8 `key=value` lines
//! count      u32
//! count x {
//!   name_len u32, name (UTF-8)
//!   dtype    u8       1 = f32, 2 = f64
//!   dims     4 x u32  (N, C, H, W)
//!   payload  N*C*H*W values of dtype
//! }
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use sinet_tensor::{Shape, Tensor};

use crate::config::SinetConfig;
use crate::error::{Result, WeightError};
use crate::params::ParamStore;
use crate::sinet::Sinet;

pub const MAGIC: &[u8; 8] = b"SINETWTS";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dtype {
    F32 = 1,
    F64 = 2,
}

#[derive(Clone, Debug)]
pub struct WeightFile {
    pub meta: String,
    pub tensors: Vec<(String, Tensor)>,
}

pub fn encode(meta: &str, store: &ParamStore, dtype: Dtype) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(meta.as_bytes());
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (_, p) in store.iter() {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.push(dtype as u8);
        for d in p.value.shape().dims() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in p.value.data() {
            match dtype {
                Dtype::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
                Dtype::F64 => out.extend_from_slice(&v.to_le_bytes()),
            }
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> std::result::Result<&'a [u8], WeightError> {
        if self.buf.len() < n {
            return Err(WeightError::Truncated(what));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self, what: &'static str) -> std::result::Result<u32, WeightError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn string(&mut self, len: usize, what: &'static str) -> std::result::Result<String, WeightError> {
        let b = self.take(len, what)?;
        String::from_utf8(b.to_vec()).map_err(|_| WeightError::Malformed(format!("{what} is not UTF-8")))
    }
}

pub fn decode(bytes: &[u8]) -> std::result::Result<WeightFile, WeightError> {
    let mut r = Reader { buf: bytes };
    let magic = r.take(MAGIC.len(), "magic").map_err(|_| WeightError::BadMagic)?;
    if magic != MAGIC {
        return Err(WeightError::BadMagic);
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(WeightError::UnsupportedVersion {
            found: version,
            expected: VERSION,
        });
    }
    let meta_len = r.u32("metadata length")? as usize;
    let meta = r.string(meta_len, "metadata")?;
    let count = r.u32("tensor count")?;
    let mut tensors = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let name_len = r.u32("name length")? as usize;
        let name = r.string(name_len, "name")?;
        let dtype = r.take(1, "dtype")?[0];
        let mut dims = [0usize; 4];
        for d in dims.iter_mut() {
            *d = r.u32("dims")? as usize;
        }
        let shape = Shape::from(dims);
        let n = shape.volume();
        let data: Vec<f64> = match dtype {
            1 => r
                .take(n * 4, "payload")?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect(),
            2 => r
                .take(n * 8, "payload")?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
            other => return Err(WeightError::UnknownDtype(other)),
        };
        let t = Tensor::new(shape, data).map_err(|e| WeightError::Malformed(format!("{name}: {e}")))?;
        tensors.push((name, t));
    }
    if !r.buf.is_empty() {
        return Err(WeightError::Malformed(format!("{} trailing bytes", r.buf.len())));
    }
    Ok(WeightFile { meta, tensors })
}

/// Copies every tensor in `file` into `store`, requiring an exact name and
/// shape match in both directions.
pub fn load_into(store: &mut ParamStore, file: &WeightFile) -> std::result::Result<(), WeightError> {
    let mut seen = vec![false; store.len()];
    for (name, t) in &file.tensors {
        let id = store.id(name).ok_or_else(|| WeightError::Unexpected(name.clone()))?;
        let expected = store.get(id).shape();
        if expected != t.shape() {
            return Err(WeightError::Shape {
                name: name.clone(),
                found: t.shape().dims(),
                expected: expected.dims(),
            });
        }
        store.set(id, t.clone());
        seen[id.index()] = true;
    }
    if let Some((_, p)) = store.iter().find(|(id, _)| !seen[id.index()]) {
        return Err(WeightError::Missing(p.name.clone()));
    }
    Ok(())
}

pub fn save_model(path: &Path, net: &Sinet, store: &ParamStore, dtype: Dtype) -> std::result::Result<(), WeightError> {
    let bytes = encode(&net.config().to_kv_string(), store, dtype);
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

/// Rebuilds the network from the file's metadata and loads its parameters.
pub fn load_model(path: &Path) -> Result<(Sinet, ParamStore)> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .map_err(WeightError::from)?
        .read_to_end(&mut bytes)
        .map_err(WeightError::from)?;
    let file = decode(&bytes)?;
    let config = SinetConfig::from_kv_str(&file.meta)?;
    let (net, mut store) = Sinet::new(config)?;
    load_into(&mut store, &file)?;
    Ok((net, store))
}
