//! Binary model files. Layout (little-endian):
//!
//! ```text
//! magic "NGLM" | u32 version | u32 order | f64 lambda | u8 abstracted
//! u64 vocab size | vocab entries (u32 byte length + UTF-8 bytes)
//! for k in 1..=order: u64 entry count | entries sorted by id sequence (k × u32 ids + u64 count)
//! ```
//!
//! Context totals are recomputed on load.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use super::model::{NgramModel, Vocab};
use super::LmError;

pub const MAGIC: &[u8; 4] = b"NGLM";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_model<W: Write>(model: &NgramModel, mut w: W) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(model.order() as u32).to_le_bytes())?;
    w.write_all(&model.lambda().to_le_bytes())?;
    w.write_all(&[model.abstracted() as u8])?;
    let words = model.vocab().words();
    w.write_all(&(words.len() as u64).to_le_bytes())?;
    for word in words {
        w.write_all(&(word.len() as u32).to_le_bytes())?;
        w.write_all(word.as_bytes())?;
    }
    for table in model.tables() {
        let mut entries: Vec<(&Vec<u32>, &u64)> = table.iter().collect();
        entries.sort_unstable();
        w.write_all(&(entries.len() as u64).to_le_bytes())?;
        for (gram, count) in entries {
            for id in gram {
                w.write_all(&id.to_le_bytes())?;
            }
            w.write_all(&count.to_le_bytes())?;
        }
    }
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], LmError> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => LmError::Truncated,
            _ => LmError::Corrupt(e.to_string()),
        })?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32, LmError> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64, LmError> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
}

pub fn read_model<R: Read>(r: R) -> Result<NgramModel, LmError> {
    let mut r = Reader { inner: r };
    if &r.bytes::<4>()? != MAGIC {
        return Err(LmError::BadMagic);
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(LmError::UnsupportedVersion(version));
    }
    let order = r.u32()? as usize;
    let lambda = f64::from_le_bytes(r.bytes()?);
    let abstracted = match r.bytes::<1>()?[0] {
        0 => false,
        1 => true,
        b => return Err(LmError::Corrupt(format!("bad abstraction flag {b}"))),
    };
    super::model::check_params(order, lambda)?;
    let vocab_size = r.u64()?;
    let mut words = Vec::new();
    for _ in 0..vocab_size {
        let len = r.u32()? as usize;
        let mut buf = vec![0u8; len];
        r.inner.read_exact(&mut buf).map_err(|_| LmError::Truncated)?;
        words.push(String::from_utf8(buf).map_err(|_| LmError::Corrupt("vocabulary entry is not UTF-8".into()))?);
    }
    let vocab = Vocab::from_words(words)?;
    let mut counts = Vec::with_capacity(order);
    for k in 1..=order {
        let n = r.u64()?;
        let mut table = HashMap::new();
        for _ in 0..n {
            let gram: Vec<u32> = (0..k).map(|_| r.u32()).collect::<Result<_, _>>()?;
            if gram.iter().any(|&id| id as u64 >= vocab_size) {
                return Err(LmError::Corrupt("n-gram id outside vocabulary".into()));
            }
            table.insert(gram, r.u64()?);
        }
        counts.push(table);
    }
    let mut rest = [0u8; 1];
    if r.inner.read(&mut rest).map_err(|e| LmError::Corrupt(e.to_string()))? != 0 {
        return Err(LmError::Corrupt("trailing bytes".into()));
    }
    NgramModel::from_parts(order, lambda, abstracted, vocab, counts)
}

pub fn save(model: &NgramModel, path: &Path) -> Result<(), LmError> {
    let io_err = |source| LmError::Io { path: path.to_path_buf(), source };
    let mut buf = Vec::new();
    write_model(model, &mut buf).map_err(io_err)?;
    fs::write(path, buf).map_err(io_err)
}

pub fn load(path: &Path) -> Result<NgramModel, LmError> {
    let file = fs::File::open(path).map_err(|source| LmError::Io { path: path.to_path_buf(), source })?;
    read_model(io::BufReader::new(file))
}
