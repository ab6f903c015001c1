use std::io::{Read, Write};
use std::path::Path;

use crate::autodiff::{Matrix, ParameterStore};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SHAKGCKP";
pub const FORMAT_VERSION: u32 = 1;

/// Header fields of a checkpoint file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub version: u32,
    pub config_hash: u64,
    pub seed: u64,
}

/// Layout: magic, version (u32), config hash (u64), seed (u64), record count
/// (u32), then per record: name length (u32), UTF-8 name, rows (u32),
/// cols (u32), row-major f64 values. Everything little-endian.
pub fn write_checkpoint<W: Write>(out: &mut W, store: &ParameterStore, config_hash: u64, seed: u64) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&config_hash.to_le_bytes())?;
    out.write_all(&seed.to_le_bytes())?;
    out.write_all(&(store.len() as u32).to_le_bytes())?;
    for (_, name, m) in store.iter() {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(m.rows() as u32).to_le_bytes())?;
        out.write_all(&(m.cols() as u32).to_le_bytes())?;
        for v in m.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_checkpoint(path: &Path, store: &ParameterStore, config_hash: u64, seed: u64) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, store, config_hash, seed)?;
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, &buf)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Parses a checkpoint into its header and named matrices.
pub fn read_checkpoint<R: Read>(input: &mut R) -> Result<(CheckpointHeader, Vec<(String, Matrix)>)> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    if c.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let header = CheckpointHeader {
        version,
        config_hash: c.u64()?,
        seed: c.u64()?,
    };
    let count = c.u32()? as usize;
    let mut records = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let len = c.u32()? as usize;
        let name = std::str::from_utf8(c.take(len)?)
            .map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?
            .to_string();
        let rows = c.u32()? as usize;
        let cols = c.u32()? as usize;
        let raw = c.take(rows.checked_mul(cols).and_then(|n| n.checked_mul(8)).ok_or_else(|| {
            Error::Checkpoint(format!("parameter `{name}` is too large"))
        })?)?;
        let data = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        records.push((name, Matrix::from_vec(rows, cols, data)));
    }
    if c.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after the last record".into()));
    }
    Ok((header, records))
}

/// Overwrites every parameter in `store` from the file; names, shapes, and
/// the config hash must all match.
pub fn load_checkpoint(path: &Path, store: &mut ParameterStore, config_hash: u64) -> Result<CheckpointHeader> {
    let mut file = std::fs::File::open(path)?;
    let (header, records) = read_checkpoint(&mut file)?;
    if header.config_hash != config_hash {
        return Err(Error::Checkpoint(format!(
            "config hash {:016x} does not match {:016x}",
            header.config_hash, config_hash
        )));
    }
    if records.len() != store.len() {
        return Err(Error::Checkpoint(format!(
            "{} parameters in file, {} in model",
            records.len(),
            store.len()
        )));
    }
    for (name, m) in &records {
        let id = store
            .id(name)
            .ok_or_else(|| Error::Checkpoint(format!("unknown parameter `{name}`")))?;
        if store.value(id).shape() != m.shape() {
            return Err(Error::Checkpoint(format!("shape mismatch for `{name}`")));
        }
    }
    for (name, m) in records {
        let id = store.id(&name).expect("checked above");
        *store.value_mut(id) = m;
    }
    Ok(header)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ParameterStore {
        let mut s = ParameterStore::new(4);
        s.add_uniform("a", 3, 2).unwrap();
        s.add_zeros("b", 1, 1).unwrap();
        s
    }

    #[test]
    fn round_trip_restores_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.ckpt");
        let s = store();
        save_checkpoint(&p, &s, 77, 4).unwrap();
        let mut t = ParameterStore::new(99);
        t.add_uniform("a", 3, 2).unwrap();
        t.add_zeros("b", 1, 1).unwrap();
        let h = load_checkpoint(&p, &mut t, 77).unwrap();
        assert_eq!(h.seed, 4);
        for (id, _, m) in s.iter() {
            assert_eq!(t.value(id), m);
        }
    }

    #[test]
    fn mismatches_and_corruption_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.ckpt");
        save_checkpoint(&p, &store(), 1, 0).unwrap();
        assert!(matches!(load_checkpoint(&p, &mut store(), 2), Err(Error::Checkpoint(_))));
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_checkpoint(&p, &mut store(), 1), Err(Error::Checkpoint(_))));
        std::fs::write(&p, b"hello").unwrap();
        assert!(load_checkpoint(&p, &mut store(), 1).is_err());
    }
}
