//! Length-prefixed binary encoding shared by messages, share files and
//! transcript logs. All integers are big-endian.

use crate::error::{Error, Result};
use crate::field::{FieldElement, FieldPoly, PrimeField};

#[derive(Default, Debug, Clone)]
pub struct WireWriter {
    buf: Vec<u8>,
}

impl WireWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.u32(b.len() as u32);
        self.buf.extend_from_slice(b);
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.bytes(s.as_bytes())
    }

    /// Residue as a u16 length followed by its minimal big-endian bytes.
    pub fn fe(&mut self, x: &FieldElement) -> &mut Self {
        let b = x.to_be_bytes();
        self.buf.extend_from_slice(&(b.len() as u16).to_be_bytes());
        self.buf.extend_from_slice(&b);
        self
    }

    pub fn fe_vec(&mut self, xs: &[FieldElement]) -> &mut Self {
        self.u32(xs.len() as u32);
        for x in xs {
            self.fe(x);
        }
        self
    }

    pub fn poly(&mut self, p: &FieldPoly) -> &mut Self {
        self.fe_vec(p.coeffs())
    }

    pub fn usize_vec(&mut self, xs: &[usize]) -> &mut Self {
        self.u32(xs.len() as u32);
        for &x in xs {
            self.u32(x as u32);
        }
        self
    }
}

pub struct WireReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> WireReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        WireReader { buf, pos: 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.buf.len()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Wire(format!(
                "truncated: wanted {n} bytes at offset {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    pub fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes(b.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        Ok(u64::from_be_bytes(b.try_into().unwrap()))
    }

    pub fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    pub fn str(&mut self) -> Result<String> {
        String::from_utf8(self.bytes()?.to_vec()).map_err(|e| Error::Wire(e.to_string()))
    }

    pub fn fe(&mut self, f: &PrimeField) -> Result<FieldElement> {
        let n = self.u16()? as usize;
        let b = self.take(n)?;
        if b.first() == Some(&0) {
            return Err(Error::Wire("non-minimal residue encoding".into()));
        }
        f.from_be_bytes(b)
    }

    pub fn fe_vec(&mut self, f: &PrimeField) -> Result<Vec<FieldElement>> {
        let n = self.u32()? as usize;
        (0..n).map(|_| self.fe(f)).collect()
    }

    pub fn poly(&mut self, f: &PrimeField) -> Result<FieldPoly> {
        Ok(FieldPoly::new(self.fe_vec(f)?))
    }

    pub fn usize_vec(&mut self) -> Result<Vec<usize>> {
        let n = self.u32()? as usize;
        (0..n).map(|_| Ok(self.u32()? as usize)).collect()
    }

    pub fn expect_end(&self) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(Error::Wire(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )))
        }
    }
}
