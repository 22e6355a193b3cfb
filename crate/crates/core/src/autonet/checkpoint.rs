//! Versioned binary checkpoints.
//!
//! Layout: magic `DYNENH-CKPT`, `u32` version, `u32` manifest length, the
//! UTF-8 layer manifest, `u32` block count, then per block `u32` layer index,
//! `u8` role (0 weight, 1 bias), `u64` value count and the values as
//! little-endian `f64`. All integers are little-endian.

use std::fs;
use std::path::Path;

use super::network::Network;
use super::params::{BlockRole, NetParams};
use crate::error::{Error, Result};

const MAGIC: &[u8] = b"DYNENH-CKPT";
const VERSION: u32 = 1;

pub fn encode(net: &Network, params: &NetParams) -> Result<Vec<u8>> {
    if !params.same_layout(net.layout()) {
        return Err(Error::Layout("parameters do not belong to this network".into()));
    }
    let manifest = net.manifest();
    let mut out = Vec::with_capacity(64 + manifest.len() + 8 * params.total_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
    out.extend_from_slice(manifest.as_bytes());
    let blocks = net.layout().blocks();
    out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
    for b in blocks {
        out.extend_from_slice(&(b.layer as u32).to_le_bytes());
        out.push(match b.role {
            BlockRole::Weight => 0,
            BlockRole::Bias => 1,
        });
        out.extend_from_slice(&(b.len as u64).to_le_bytes());
        for v in &params.values()[b.offset..b.offset + b.len] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format("checkpoint truncated".into()));
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

pub fn decode(net: &Network, bytes: &[u8]) -> Result<NetParams> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let mlen = r.u32()? as usize;
    let manifest = std::str::from_utf8(r.take(mlen)?).map_err(|_| Error::Format("manifest is not UTF-8".into()))?;
    if manifest != net.manifest() {
        return Err(Error::Layout(format!("checkpoint is for a different network:\n{manifest}")));
    }
    let count = r.u32()? as usize;
    let blocks = net.layout().blocks();
    if count != blocks.len() {
        return Err(Error::Layout(format!("checkpoint has {count} blocks, network has {}", blocks.len())));
    }
    let mut params = NetParams::zeros(net.layout().clone());
    for b in blocks {
        let layer = r.u32()? as usize;
        let role = match r.take(1)?[0] {
            0 => BlockRole::Weight,
            1 => BlockRole::Bias,
            x => return Err(Error::Format(format!("bad block role {x}"))),
        };
        let len = r.u64()? as usize;
        if layer != b.layer || role != b.role || len != b.len {
            return Err(Error::Layout(format!("block mismatch at layer {layer}")));
        }
        let raw = r.take(8 * len)?;
        for (dst, chunk) in params.values_mut()[b.offset..b.offset + len].iter_mut().zip(raw.chunks_exact(8)) {
            *dst = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    Ok(params)
}

pub fn save(path: &Path, net: &Network, params: &NetParams) -> Result<()> {
    fs::write(path, encode(net, params)?)?;
    Ok(())
}

pub fn load(path: &Path, net: &Network) -> Result<NetParams> {
    decode(net, &fs::read(path)?).map_err(|e| Error::data(path, e.to_string()))
}
