//! EMB1 binary dataset container.
//!
//! Layout (all little-endian):
//! magic `"EMB1"` (4 bytes), `u32 n`, `u32 d`, `u32 C`,
//! then `n * d` f32 features row-major, then `n` u32 labels.
//! The file length is exactly `16 + 4nd + 4n` bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

const MAGIC: [u8; 4] = *b"EMB1";

pub fn read_emb(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);

    let mut magic = [0u8; 4];
    read_exact(&mut reader, &mut magic, path, 16)?;
    if magic != MAGIC {
        return Err(Error::BadMagic { got: magic });
    }
    let n = read_u32(&mut reader, path)? as usize;
    let d = read_u32(&mut reader, path)? as usize;
    let c = read_u32(&mut reader, path)?;
    if n == 0 {
        return Err(Error::EmptyInput("EMB1 file contains no rows"));
    }
    if d == 0 || c == 0 {
        return Err(Error::InvalidArgument(
            "EMB1 header has zero dim or zero classes".into(),
        ));
    }

    let expected = 16 + 4 * (n as u64) * (d as u64) + 4 * (n as u64);
    let mut features = Vec::with_capacity(n * d);
    let mut buf = [0u8; 4];
    for _ in 0..n * d {
        read_exact(&mut reader, &mut buf, path, expected)?;
        features.push(f32::from_le_bytes(buf));
    }
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        read_exact(&mut reader, &mut buf, path, expected)?;
        labels.push(u32::from_le_bytes(buf));
    }
    let mut extra = [0u8; 1];
    match reader.read(&mut extra) {
        Ok(0) => {}
        Ok(_) => {
            return Err(Error::TrailingBytes {
                expected,
                got: expected + 1 + remaining_len(&mut reader),
            })
        }
        Err(e) => return Err(Error::io(path, e)),
    }

    Dataset::new(features, labels, d, c)
}

pub fn write_emb(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);

    w.write_all(&MAGIC).map_err(io_err)?;
    w.write_all(&(data.len() as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(data.dim() as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&data.num_classes().to_le_bytes()).map_err(io_err)?;
    for v in data.features() {
        w.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    for l in data.labels() {
        w.write_all(&l.to_le_bytes()).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn read_u32(reader: &mut impl Read, path: &Path) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(reader, &mut buf, path, 16)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_exact(reader: &mut impl Read, buf: &mut [u8], path: &Path, expected: u64) -> Result<()> {
    reader.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Truncated { expected, got: 0 }
        } else {
            Error::io(path, e)
        }
    })
}

fn remaining_len(reader: &mut impl Read) -> u64 {
    let mut sink = Vec::new();
    reader.read_to_end(&mut sink).map(|n| n as u64).unwrap_or(0)
}
