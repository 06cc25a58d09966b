//! Line-delimited JSON sequence files.
//!
//! One sequence per line:
//!
//! ```text
//! {"version":1,"label":3,"subject":7,"joints":2,"frames":1,
//!  "coords":[x00,y00,z00,x10,y10,z10],
//!  "channels":[{"dim":2,"values":[..]}]}
//! ```
//!
//! `coords` is frame-major (`3 * (s * joints + i)`), `channels` is optional
//! and each channel holds `dim * frames` values. Writing is canonical: equal
//! sequences produce equal bytes, and floats round-trip exactly. Channels
//! are rectified when read.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Channel, SkeletonSequence};
use crate::error::{Error, Result};

pub const SEQUENCE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    version: u32,
    label: u32,
    subject: u32,
    joints: usize,
    frames: usize,
    coords: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    channels: Vec<Channel>,
}

fn line_err(line: usize, message: impl Into<String>) -> Error {
    Error::Format { line: Some(line), message: message.into() }
}

pub fn parse_sequence(text: &str, line: usize) -> Result<SkeletonSequence> {
    let rec: Record = serde_json::from_str(text).map_err(|e| line_err(line, e.to_string()))?;
    if rec.version != SEQUENCE_FORMAT_VERSION {
        return Err(line_err(line, format!("unsupported version {}", rec.version)));
    }
    let channels = rec.channels.into_iter().map(Channel::rectified).collect();
    SkeletonSequence::with_channels(rec.label, rec.subject, rec.joints, rec.frames, rec.coords, channels)
        .map_err(|e| line_err(line, e.to_string()))
}

pub fn sequence_to_line(seq: &SkeletonSequence) -> String {
    let rec = Record {
        version: SEQUENCE_FORMAT_VERSION,
        label: seq.label,
        subject: seq.subject,
        joints: seq.joints(),
        frames: seq.frames(),
        coords: seq.coords().to_vec(),
        channels: seq.channels().to_vec(),
    };
    serde_json::to_string(&rec).expect("finite values always serialize")
}

/// Blank lines are skipped; line numbers in errors are 1-based.
pub fn read_sequences(r: impl Read) -> Result<Vec<SkeletonSequence>> {
    let mut out = Vec::new();
    for (k, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_sequence(&line, k + 1)?);
    }
    Ok(out)
}

pub fn write_sequences(w: impl Write, seqs: &[SkeletonSequence]) -> Result<()> {
    let mut w = BufWriter::new(w);
    for s in seqs {
        writeln!(w, "{}", sequence_to_line(s))?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_sequences(path: impl AsRef<Path>) -> Result<Vec<SkeletonSequence>> {
    read_sequences(File::open(path)?)
}

pub fn save_sequences(path: impl AsRef<Path>, seqs: &[SkeletonSequence]) -> Result<()> {
    write_sequences(File::create(path)?, seqs)
}
