//! Flat binary parameter container.
//!
//! Layout: the 8-byte magic `ASTARNT1`, a little-endian `u64` manifest length, the
//! JSON manifest, then every array's raw little-endian values back to back. Each
//! manifest entry names an array with its shape, dtype and byte offset into the data
//! section. Adam moments are stored as extra arrays suffixed `@m` and `@v`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Matrix, ParameterStore};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"ASTARNT1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub name: String,
    pub shape: [usize; 2],
    pub dtype: String,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub arrays: Vec<ArrayEntry>,
    pub optimizer_step: u64,
    /// Free-form metadata (model configuration, vocabularies, epoch counters).
    #[serde(default)]
    pub meta: serde_json::Value,
}

pub fn encode<T: Scalar>(store: &ParameterStore<T>, meta: serde_json::Value) -> Result<Vec<u8>> {
    let mut data = Vec::new();
    let mut arrays = Vec::new();
    let mut push = |name: String, m: &Matrix<T>, data: &mut Vec<u8>| {
        arrays.push(ArrayEntry {
            name,
            shape: [m.rows(), m.cols()],
            dtype: T::DTYPE.to_owned(),
            offset: data.len(),
        });
        for &v in m.data() {
            v.write_le(data);
        }
    };
    for p in store.iter() {
        push(p.name.clone(), &p.value, &mut data);
        push(format!("{}@m", p.name), &p.m, &mut data);
        push(format!("{}@v", p.name), &p.v, &mut data);
    }
    let manifest = Manifest {
        arrays,
        optimizer_step: store.step,
        meta,
    };
    let json = serde_json::to_vec(&manifest)?;
    let mut out = Vec::with_capacity(16 + json.len() + data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&data);
    Ok(out)
}

pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<(ParameterStore<T>, Manifest)> {
    let bad = |m: &str| Error::Checkpoint(m.to_owned());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing magic header"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(16..16 + len).ok_or_else(|| bad("truncated manifest"))?;
    let manifest: Manifest = serde_json::from_slice(body)?;
    let data = &bytes[16 + len..];

    let read = |e: &ArrayEntry| -> Result<Matrix<T>> {
        if e.dtype != T::DTYPE {
            return Err(Error::Checkpoint(format!(
                "array {} has dtype {}, expected {}",
                e.name,
                e.dtype,
                T::DTYPE
            )));
        }
        let count = e.shape[0] * e.shape[1];
        let end = e.offset + count * T::BYTES;
        let raw = data
            .get(e.offset..end)
            .ok_or_else(|| Error::Checkpoint(format!("array {} runs past the data", e.name)))?;
        let values = raw.chunks_exact(T::BYTES).map(T::read_le).collect();
        Matrix::from_vec(e.shape[0], e.shape[1], values)
    };

    let mut store = ParameterStore::new();
    let find = |name: &str| manifest.arrays.iter().find(|e| e.name == name);
    for e in manifest.arrays.iter().filter(|e| !e.name.contains('@')) {
        let id = store.add(e.name.clone(), read(e)?);
        if let Some(m) = find(&format!("{}@m", e.name)) {
            store.get_mut(id).m = read(m)?;
        }
        if let Some(v) = find(&format!("{}@v", e.name)) {
            store.get_mut(id).v = read(v)?;
        }
    }
    store.step = manifest.optimizer_step;
    Ok((store, manifest))
}

pub fn save<T: Scalar>(path: &Path, store: &ParameterStore<T>, meta: serde_json::Value) -> Result<()> {
    fs::write(path, encode(store, meta)?)?;
    Ok(())
}

pub fn load<T: Scalar>(path: &Path) -> Result<(ParameterStore<T>, Manifest)> {
    decode(&fs::read(path)?)
}
