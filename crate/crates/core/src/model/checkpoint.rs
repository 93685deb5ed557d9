//! Versioned binary checkpoint: config plus every parameter array with a
//! shape header. Values are stored as raw little-endian floats so a round
//! trip is bit-exact.
//!
//! Layout:
//! ```text
//! magic "PCKPT\0" | u32 version | u8 dtype-len, dtype | u64 config-len, config JSON
//! u32 param count | per param: u32 name-len, name, u64 rows, u64 cols, rows*cols values
//! ```

use std::fs;
use std::path::Path;

use super::{ModelConfig, PatchMlp};
use crate::numerics::{Parameterized, Real, Rng};
use crate::{Error, Result};

const MAGIC: &[u8; 6] = b"PCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint<T: Real>(model: &PatchMlp<T>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.push(T::NAME.len() as u8);
    out.extend_from_slice(T::NAME.as_bytes());
    let config = serde_json::to_vec(model.config())?;
    out.extend_from_slice(&(config.len() as u64).to_le_bytes());
    out.extend_from_slice(&config);

    let mut params = Vec::new();
    model.visit_params(&mut |name, p| params.push((name.to_string(), p.value.clone())));
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, value) in params {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(value.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(value.cols() as u64).to_le_bytes());
        for &v in value.as_slice() {
            v.to_le_bytes_vec(&mut out);
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Io(format!(
                "checkpoint truncated at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<usize> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")) as usize)
    }
}

pub fn decode_checkpoint<T: Real>(bytes: &[u8]) -> Result<PatchMlp<T>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Io("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Io(format!("unsupported checkpoint version {version}")));
    }
    let dtype_len = r.take(1)?[0] as usize;
    let dtype = std::str::from_utf8(r.take(dtype_len)?).map_err(|e| Error::Io(e.to_string()))?;
    if dtype != T::NAME {
        return Err(Error::Io(format!(
            "checkpoint holds {dtype} values, requested {}",
            T::NAME
        )));
    }
    let config_len = r.u64()?;
    let config: ModelConfig = serde_json::from_slice(r.take(config_len)?)?;

    let mut model = PatchMlp::<T>::init(&config, &mut Rng::new(0))?;
    let count = r.u32()? as usize;
    let mut stored = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|e| Error::Io(e.to_string()))?;
        let rows = r.u64()?;
        let cols = r.u64()?;
        let raw = r.take(rows * cols * T::BYTES)?;
        let values: Vec<T> = raw.chunks_exact(T::BYTES).map(T::from_le_slice).collect();
        stored.push((name, rows, cols, values));
    }
    if r.pos != bytes.len() {
        return Err(Error::Io("trailing bytes after checkpoint".into()));
    }

    let mut idx = 0;
    let mut failure = None;
    model.visit_params_mut(&mut |name, p| {
        if failure.is_some() {
            return;
        }
        match stored.get_mut(idx) {
            Some((n, rows, cols, values)) if n == name && (*rows, *cols) == p.value.shape() => {
                p.value.as_mut_slice().copy_from_slice(values);
            }
            Some((n, rows, cols, _)) => {
                failure = Some(format!(
                    "parameter #{idx}: file has {n} [{rows}x{cols}], model expects {name} [{}x{}]",
                    p.value.rows(),
                    p.value.cols()
                ));
            }
            None => failure = Some(format!("checkpoint is missing parameter {name}")),
        }
        idx += 1;
    });
    if let Some(msg) = failure {
        return Err(Error::Io(msg));
    }
    if idx != stored.len() {
        return Err(Error::Io(format!(
            "checkpoint has {} parameters, model has {idx}",
            stored.len()
        )));
    }
    Ok(model)
}

pub fn save_checkpoint<T: Real>(model: &PatchMlp<T>, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(model)?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<PatchMlp<T>> {
    let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    decode_checkpoint(&bytes)
}
