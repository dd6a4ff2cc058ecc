//! Little-endian binary containers: embedding tables (HGEMB1), projector
//! checkpoints (HIPCK1) and projected token matrices (HGTOK1).

use hgtok_core::hip::{HipConfig, HipParams};
use hgtok_core::real::Mat;

use crate::error::{Error, Result};

pub const HGEMB1: &[u8; 6] = b"HGEMB1";
pub const HIPCK1: &[u8; 6] = b"HIPCK1";
pub const HGTOK1: &[u8; 6] = b"HGTOK1";

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    format: &'static str,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], magic: &[u8; 6], format: &'static str) -> Result<Self> {
        if bytes.len() < magic.len() || &bytes[..magic.len()] != magic {
            return Err(Error::format(format, "bad magic"));
        }
        Ok(Reader { bytes, pos: magic.len(), format })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::format(self.format, "truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Error::format(self.format, "size overflow"))?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(self.format, format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

fn put_f32s(out: &mut Vec<u8>, xs: impl IntoIterator<Item = f32>) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn dim(x: usize, format: &'static str) -> Result<u32> {
    u32::try_from(x).map_err(|_| Error::format(format, format!("dimension {x} exceeds u32")))
}

/// Embedding rows, row index = object id.
pub fn write_embeddings(rows: &[Vec<f32>]) -> Result<Vec<u8>> {
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::format("HGEMB1", "ragged rows"));
    }
    let mut out = HGEMB1.to_vec();
    out.extend_from_slice(&dim(rows.len(), "HGEMB1")?.to_le_bytes());
    out.extend_from_slice(&dim(d, "HGEMB1")?.to_le_bytes());
    for r in rows {
        put_f32s(&mut out, r.iter().copied());
    }
    Ok(out)
}

pub fn read_embeddings(bytes: &[u8]) -> Result<Vec<Vec<f32>>> {
    let mut r = Reader::new(bytes, HGEMB1, "HGEMB1")?;
    let (n, d) = (r.u32()? as usize, r.u32()? as usize);
    let rows = (0..n).map(|_| r.f32s(d)).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    Ok(rows)
}

fn config_dims(c: &HipConfig) -> [usize; 7] {
    [c.d_text, c.d_struct, c.d_core, c.d_sidecar, c.d_llm, c.num_order_buckets, c.num_blocks]
}

pub fn write_checkpoint(p: &HipParams<f32>) -> Result<Vec<u8>> {
    let mut out = HIPCK1.to_vec();
    for d in config_dims(&p.config) {
        out.extend_from_slice(&dim(d, "HIPCK1")?.to_le_bytes());
    }
    out.extend_from_slice(&p.to_le_bytes());
    Ok(out)
}

/// Parameters are read in declaration order; each tensor's length is fixed
/// by the stored configuration, so any size disagreement is rejected.
pub fn read_checkpoint(bytes: &[u8]) -> Result<HipParams<f32>> {
    let mut r = Reader::new(bytes, HIPCK1, "HIPCK1")?;
    let mut d = [0usize; 7];
    for x in &mut d {
        *x = r.u32()? as usize;
    }
    let config = HipConfig {
        d_text: d[0],
        d_struct: d[1],
        d_core: d[2],
        d_sidecar: d[3],
        d_llm: d[4],
        num_order_buckets: d[5],
        num_blocks: d[6],
    };
    config.validate().map_err(|e| Error::format("HIPCK1", e.to_string()))?;
    let mut p = HipParams::<f32>::zeros(config);
    let expected: usize = p.num_params();
    if bytes.len() - r.pos != expected * 4 {
        return Err(Error::format(
            "HIPCK1",
            format!("expected {expected} parameters, found {} bytes", bytes.len() - r.pos),
        ));
    }
    for t in p.tensors_mut() {
        t.data = r.f32s(t.len())?;
    }
    r.finish()?;
    Ok(p)
}

/// `L × d_llm` token matrix, row-major.
pub fn write_tokens(m: &Mat<f32>) -> Result<Vec<u8>> {
    let mut out = HGTOK1.to_vec();
    out.extend_from_slice(&dim(m.rows, "HGTOK1")?.to_le_bytes());
    out.extend_from_slice(&dim(m.cols, "HGTOK1")?.to_le_bytes());
    put_f32s(&mut out, m.data.iter().copied());
    Ok(out)
}

pub fn read_tokens(bytes: &[u8]) -> Result<Mat<f32>> {
    let mut r = Reader::new(bytes, HGTOK1, "HGTOK1")?;
    let (rows, cols) = (r.u32()? as usize, r.u32()? as usize);
    let data = r.f32s(rows.checked_mul(cols).ok_or_else(|| Error::format("HGTOK1", "size overflow"))?)?;
    r.finish()?;
    Ok(Mat::from_vec(rows, cols, data))
}
