//! Little-endian binary containers shared by the graph cache, the poisoned
//! graph file and model checkpoints.
//!
//! Layout: 8-byte magic, u32 version, then a sequence of primitive values and
//! length-prefixed arrays. No padding, no compression.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub(crate) struct BinWriter {
    out: BufWriter<File>,
    path: PathBuf,
}

impl BinWriter {
    pub fn create(path: &Path, magic: &[u8; 8], version: u32) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Self {
            out: BufWriter::new(file),
            path: path.to_path_buf(),
        };
        w.bytes(magic)?;
        w.u32(version)?;
        Ok(w)
    }

    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.out.write_all(b).map_err(|e| Error::io(&self.path, e))
    }

    pub fn u8(&mut self, v: u8) -> Result<()> {
        self.bytes(&[v])
    }

    pub fn u32(&mut self, v: u32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn usize(&mut self, v: usize) -> Result<()> {
        self.u64(v as u64)
    }

    pub fn f64s(&mut self, v: &[f64]) -> Result<()> {
        self.usize(v.len())?;
        let mut buf = Vec::with_capacity(v.len() * 8);
        for x in v {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        self.bytes(&buf)
    }

    pub fn usizes(&mut self, v: &[usize]) -> Result<()> {
        self.usize(v.len())?;
        let mut buf = Vec::with_capacity(v.len() * 8);
        for &x in v {
            buf.extend_from_slice(&(x as u64).to_le_bytes());
        }
        self.bytes(&buf)
    }

    pub fn str(&mut self, s: &str) -> Result<()> {
        self.usize(s.len())?;
        self.bytes(s.as_bytes())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub(crate) struct BinReader {
    inp: BufReader<File>,
    path: PathBuf,
}

/// Upper bound on any single length prefix, to fail fast on corrupt files
/// instead of attempting a huge allocation.
const MAX_LEN: usize = 1 << 34;

impl BinReader {
    pub fn open(path: &Path, magic: &[u8; 8], version: u32) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = Self {
            inp: BufReader::new(file),
            path: path.to_path_buf(),
        };
        let mut m = [0u8; 8];
        r.read_exact(&mut m)?;
        if &m != magic {
            return Err(r.bad("wrong magic"));
        }
        let v = r.u32()?;
        if v != version {
            return Err(r.bad(format!("version {v}, expected {version}")));
        }
        Ok(r)
    }

    pub fn bad(&self, msg: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.clone(),
            msg: msg.into(),
        }
    }

    fn read_exact(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inp.read_exact(buf).map_err(|e| Error::Format {
            path: self.path.clone(),
            msg: format!("truncated: {e}"),
        })
    }

    pub fn u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.read_exact(&mut b)?;
        Ok(b[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    pub fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    pub fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| self.bad("length overflow"))
    }

    fn len(&mut self) -> Result<usize> {
        let n = self.usize()?;
        if n > MAX_LEN {
            return Err(self.bad(format!("implausible length {n}")));
        }
        Ok(n)
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        let mut buf = vec![0u8; n * 8];
        self.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn usizes(&mut self) -> Result<Vec<usize>> {
        let n = self.len()?;
        let mut buf = vec![0u8; n * 8];
        self.read_exact(&mut buf)?;
        buf.chunks_exact(8)
            .map(|c| {
                let v = u64::from_le_bytes(c.try_into().unwrap());
                usize::try_from(v).map_err(|_| self.bad("index overflow"))
            })
            .collect()
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.len()?;
        let mut buf = vec![0u8; n];
        self.read_exact(&mut buf)?;
        String::from_utf8(buf).map_err(|_| self.bad("invalid utf-8"))
    }

    /// Errors unless the reader is positioned at end of file.
    pub fn expect_eof(mut self) -> Result<()> {
        let mut b = [0u8; 1];
        match self.inp.read(&mut b) {
            Ok(0) => Ok(()),
            Ok(_) => Err(self.bad("trailing bytes")),
            Err(e) => Err(Error::io(&self.path, e)),
        }
    }
}
