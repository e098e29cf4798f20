//! Self-describing binary checkpoint container.
//!
//! Layout (all integers little-endian u32, all floats little-endian f64):
//!
//! ```text
//! magic   8 bytes  "PGNNCKPT"
//! version u32      currently 1
//! count   u32      number of tensors
//! then per tensor:
//!   name_len u32, name (utf-8, name_len bytes)
//!   ndim u32, dims u32 x ndim
//!   payload f64 x prod(dims)
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"PGNNCKPT";
const VERSION: u32 = 1;

/// A named parameter tensor: name, dims, row-major payload.
pub type TensorEntry = (String, Vec<usize>, Vec<f64>);

pub fn save_checkpoint(path: &Path, entries: &[TensorEntry]) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (name, dims, data) in entries {
        let expected: usize = dims.iter().product();
        if data.len() != expected {
            return Err(Error::argument(format!(
                "tensor {name}: payload {} does not match dims {:?}",
                data.len(),
                dims
            )));
        }
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for &d in dims {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    crate::cli::write_atomic(path, &buf)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::format(format!(
                "checkpoint truncated at byte {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Vec<TensorEntry>> {
    let buf = fs::read(path)?;
    let mut r = Reader { buf: &buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::format("bad checkpoint magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let count = r.u32()? as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| Error::format("non-utf8 tensor name"))?;
        let ndim = r.u32()? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(r.u32()? as usize);
        }
        let total: usize = dims.iter().product();
        let mut data = Vec::with_capacity(total);
        for _ in 0..total {
            data.push(r.f64()?);
        }
        entries.push((name, dims, data));
    }
    if r.pos != buf.len() {
        return Err(Error::format("trailing bytes in checkpoint"));
    }
    Ok(entries)
}
