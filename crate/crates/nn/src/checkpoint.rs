//! `GPNN1` checkpoint files.
//!
//! Layout (little-endian): magic `GPNN1`, `u32` length + JSON model spec,
//! `u32` parameter count, then per parameter a `u32` length + UTF-8 name,
//! `u32` rank, `u64` dims and the f64 data.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{NnError, Result};
use crate::model::{Model, ModelSpec, Param};
use crate::tensor::Tensor;

const MAGIC: &[u8; 5] = b"GPNN1";

pub fn write_checkpoint_to<W: Write>(mut w: W, model: &Model) -> Result<()> {
    w.write_all(MAGIC)?;
    let spec = serde_json::to_vec(&model.spec)?;
    w.write_all(&(spec.len() as u32).to_le_bytes())?;
    w.write_all(&spec)?;
    w.write_all(&(model.params.len() as u32).to_le_bytes())?;
    for p in &model.params {
        w.write_all(&(p.name.len() as u32).to_le_bytes())?;
        w.write_all(p.name.as_bytes())?;
        w.write_all(&(p.value.shape.len() as u32).to_le_bytes())?;
        for &d in &p.value.shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in &p.value.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_checkpoint(path: &Path, model: &Model) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint_to(&mut buf, model)?;
    std::fs::write(path, buf)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(NnError::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| NnError::Checkpoint(format!("dimension {v} too large")))
    }
}

pub fn read_checkpoint_from<R: Read>(mut r: R) -> Result<Model> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    if c.take(MAGIC.len())? != MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let n = c.u32()?;
    let spec: ModelSpec = serde_json::from_slice(c.take(n)?)?;
    spec.validate()?;
    let count = c.u32()?;
    let mut params = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let n = c.u32()?;
        let name = String::from_utf8(c.take(n)?.to_vec()).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        let rank = c.u32()?;
        let shape = (0..rank).map(|_| c.u64()).collect::<Result<Vec<_>>>()?;
        let len = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let len = len.filter(|l| l.checked_mul(8).is_some_and(|b| b <= buf.len()));
        let Some(len) = len else {
            return Err(NnError::Checkpoint(format!("parameter `{name}` shape {shape:?} exceeds the file")));
        };
        let data = c.take(len * 8)?.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
        params.push(Param { name, value: Tensor { shape, data } });
    }
    if c.pos != buf.len() {
        return Err(NnError::Checkpoint(format!("{} trailing bytes", buf.len() - c.pos)));
    }
    // the parameter set must match what the `ModelSpec` builds
    let reference = Model::with_init(spec.clone(), 0, Default::default())?;
    let same_layout = reference.params.len() == params.len()
        && reference.params.iter().zip(&params).all(|(a, b)| a.name == b.name && a.value.shape == b.value.shape);
    if !same_layout {
        return Err(NnError::Checkpoint("parameter layout does not match the model spec".into()));
    }
    Ok(Model::from_params(spec, params))
}

pub fn read_checkpoint(path: &Path) -> Result<Model> {
    read_checkpoint_from(std::fs::File::open(path)?)
}
