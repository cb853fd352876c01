//! Primitive reader/writer pair for the tagged little-endian model blobs.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub(crate) struct BlobWriter<W: Write> {
    w: W,
}

impl<W: Write> BlobWriter<W> {
    pub fn new(w: W) -> Self {
        Self { w }
    }

    pub fn u8(&mut self, v: u8) -> Result<()> {
        self.w.write_all(&[v])?;
        Ok(())
    }

    pub fn u16(&mut self, v: u16) -> Result<()> {
        self.w.write_all(&v.to_le_bytes())?;
        Ok(())
    }

    pub fn u64(&mut self, v: u64) -> Result<()> {
        self.w.write_all(&v.to_le_bytes())?;
        Ok(())
    }

    pub fn usize(&mut self, v: usize) -> Result<()> {
        self.u64(v as u64)
    }

    pub fn f64(&mut self, v: f64) -> Result<()> {
        self.w.write_all(&v.to_le_bytes())?;
        Ok(())
    }

    pub fn bytes(&mut self, v: &[u8]) -> Result<()> {
        self.w.write_all(v)?;
        Ok(())
    }

    pub fn f64_slice(&mut self, v: &[f64]) -> Result<()> {
        self.usize(v.len())?;
        for &x in v {
            self.f64(x)?;
        }
        Ok(())
    }

    pub fn string(&mut self, s: &str) -> Result<()> {
        self.usize(s.len())?;
        self.bytes(s.as_bytes())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

pub(crate) struct BlobReader<R: Read> {
    r: R,
}

impl<R: Read> BlobReader<R> {
    pub fn new(r: R) -> Self {
        Self { r }
    }

    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        self.r
            .read_exact(buf)
            .map_err(|_| Error::DataValidation("model file truncated".into()))
    }

    pub fn u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.fill(&mut b)?;
        Ok(b[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        let mut b = [0u8; 2];
        self.fill(&mut b)?;
        Ok(u16::from_le_bytes(b))
    }

    pub fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.fill(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    pub fn usize_checked(&mut self, cap: usize) -> Result<usize> {
        let v = self.u64()?;
        if v > cap as u64 {
            return Err(Error::DataValidation(format!(
                "length {v} exceeds the plausible maximum {cap}"
            )));
        }
        Ok(v as usize)
    }

    pub fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.fill(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    pub fn bytes(&mut self, len: usize) -> Result<Vec<u8>> {
        let mut v = vec![0u8; len];
        self.fill(&mut v)?;
        Ok(v)
    }

    pub fn f64_vec(&mut self) -> Result<Vec<f64>> {
        let len = self.usize_checked(1 << 32)?;
        (0..len).map(|_| self.f64()).collect()
    }

    pub fn string(&mut self) -> Result<String> {
        let len = self.usize_checked(1 << 20)?;
        String::from_utf8(self.bytes(len)?)
            .map_err(|_| Error::DataValidation("invalid utf-8 in model file".into()))
    }
}
