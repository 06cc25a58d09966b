//! Binary descriptor files.
//!
//! Little-endian layout:
//!
//! ```text
//! "TAKD" | version: u16 | count: u64
//! per record:
//!   kind: u8 | label: u32 | subject: u32 | joints: u32 | len: u64
//!   config_hash: u64 | out_of_domain: u64 | checksum: u64 | len × f32
//! ```
//!
//! `checksum` is the first 8 bytes of the SHA-256 of the f32 payload.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::ByteReader;
use crate::descriptor::{Descriptor, KernelKind};
use crate::error::{invalid, Error, Result};

const MAGIC: &[u8; 4] = b"TAKD";
pub const DESCRIPTOR_FORMAT_VERSION: u16 = 1;

fn checksum(payload: &[u8]) -> u64 {
    let digest = Sha256::digest(payload);
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn format_err(message: impl Into<String>) -> Error {
    Error::Format { line: None, message: message.into() }
}

pub fn write_descriptors(w: impl Write, ds: &[Descriptor]) -> Result<()> {
    let mut w = BufWriter::new(w);
    w.write_all(MAGIC)?;
    w.write_all(&DESCRIPTOR_FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(ds.len() as u64).to_le_bytes())?;
    for (k, d) in ds.iter().enumerate() {
        if d.values.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("descriptor {k} has non-finite values")));
        }
        let payload: Vec<u8> = d.values.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
        w.write_all(&[d.kind.code()])?;
        w.write_all(&d.label.to_le_bytes())?;
        w.write_all(&d.subject.to_le_bytes())?;
        w.write_all(&d.joints.to_le_bytes())?;
        w.write_all(&(d.values.len() as u64).to_le_bytes())?;
        w.write_all(&d.config_hash.to_le_bytes())?;
        w.write_all(&(d.out_of_domain as u64).to_le_bytes())?;
        w.write_all(&checksum(&payload).to_le_bytes())?;
        w.write_all(&payload)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_descriptors(mut r: impl Read) -> Result<Vec<Descriptor>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut cur = ByteReader { bytes: &bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(format_err("not a descriptor file"));
    }
    let version = u16::from_le_bytes(cur.array()?);
    if version != DESCRIPTOR_FORMAT_VERSION {
        return Err(format_err(format!("unsupported descriptor version {version}")));
    }
    let count = cur.u64()?;
    let mut out = Vec::new();
    for k in 0..count {
        let code = cur.take(1)?[0];
        let kind = KernelKind::from_code(code)
            .ok_or_else(|| format_err(format!("record {k}: unknown kind {code}")))?;
        let label = u32::from_le_bytes(cur.array()?);
        let subject = u32::from_le_bytes(cur.array()?);
        let joints = u32::from_le_bytes(cur.array()?);
        let len = cur.u64()? as usize;
        let config_hash = cur.u64()?;
        let out_of_domain = cur.u64()? as usize;
        let sum = cur.u64()?;
        let payload = cur.take(len.checked_mul(4).ok_or_else(|| format_err("length overflow"))?)?;
        if checksum(payload) != sum {
            return Err(format_err(format!("record {k}: checksum mismatch")));
        }
        let values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        out.push(Descriptor { kind, label, subject, joints, config_hash, values, out_of_domain });
    }
    if cur.pos != bytes.len() {
        return Err(format_err("trailing bytes after last record"));
    }
    Ok(out)
}

pub fn save_descriptors(path: impl AsRef<Path>, ds: &[Descriptor]) -> Result<()> {
    write_descriptors(File::create(path)?, ds)
}

pub fn load_descriptors(path: impl AsRef<Path>) -> Result<Vec<Descriptor>> {
    read_descriptors(File::open(path)?)
}
