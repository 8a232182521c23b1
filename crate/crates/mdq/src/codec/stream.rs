//! Binary dump of description streams.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "MDQS" | version u8 | kind u8 | seed u64 | n u64 | fingerprint [u8; 32]
//! stage count u8, then per stage: stage u8 | description u8 | stream_id u64
//! then per stage, in the same order: n zigzag LEB128 varints
//! ```
//!
//! Only received descriptions are written.

use super::encode::{DescriptionStreams, StageStream};
use super::topology::CodecKind;
use crate::error::{MdqError, Result};
use std::io::{Read, Write};

const MAGIC: &[u8; 4] = b"MDQS";
const VERSION: u8 = 1;

#[inline]
fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

#[inline]
fn unzigzag(u: u64) -> i64 {
    ((u >> 1) as i64) ^ -((u & 1) as i64)
}

pub fn write_varint(out: &mut Vec<u8>, mut u: u64) {
    loop {
        let byte = (u & 0x7f) as u8;
        u >>= 7;
        if u == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

pub fn read_varint(bytes: &[u8], pos: &mut usize) -> Result<u64> {
    let mut u = 0u64;
    for shift in (0..64).step_by(7) {
        let b = *bytes.get(*pos).ok_or_else(|| MdqError::Format("truncated varint".into()))?;
        *pos += 1;
        u |= ((b & 0x7f) as u64) << shift;
        if b & 0x80 == 0 {
            return Ok(u);
        }
    }
    Err(MdqError::Format("varint longer than 64 bits".into()))
}

pub fn to_bytes(s: &DescriptionStreams) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(s.kind.code());
    out.extend_from_slice(&s.seed.to_le_bytes());
    out.extend_from_slice(&(s.n as u64).to_le_bytes());
    out.extend_from_slice(&s.fingerprint);
    let streams: Vec<&StageStream> = s.all_streams().collect();
    out.push(streams.len() as u8);
    for st in &streams {
        out.push(st.stage as u8);
        out.push(st.description);
        out.extend_from_slice(&st.stream_id.to_le_bytes());
    }
    for st in &streams {
        for &k in &st.indices {
            write_varint(&mut out, zigzag(k));
        }
    }
    out
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize) -> Result<&'a [u8]> {
    let s = bytes.get(*pos..*pos + n).ok_or_else(|| MdqError::Format("truncated header".into()))?;
    *pos += n;
    Ok(s)
}

fn u64_at(bytes: &[u8], pos: &mut usize) -> Result<u64> {
    Ok(u64::from_le_bytes(take(bytes, pos, 8)?.try_into().expect("8 bytes")))
}

pub fn from_bytes(bytes: &[u8]) -> Result<DescriptionStreams> {
    let mut pos = 0;
    if take(bytes, &mut pos, 4)? != MAGIC {
        return Err(MdqError::Format("bad magic".into()));
    }
    let version = take(bytes, &mut pos, 1)?[0];
    if version != VERSION {
        return Err(MdqError::Format(format!("unsupported version {version}")));
    }
    let kind = CodecKind::from_code(take(bytes, &mut pos, 1)?[0]).ok_or_else(|| MdqError::Format("unknown kind".into()))?;
    let seed = u64_at(bytes, &mut pos)?;
    let n = u64_at(bytes, &mut pos)? as usize;
    let fingerprint: [u8; 32] = take(bytes, &mut pos, 32)?.try_into().expect("32 bytes");
    let count = take(bytes, &mut pos, 1)?[0] as usize;
    let mut heads = Vec::with_capacity(count);
    for _ in 0..count {
        let h = take(bytes, &mut pos, 2)?;
        let (stage, description) = (h[0] as usize, h[1]);
        if description != 1 && description != 2 {
            return Err(MdqError::Format(format!("bad description {description}")));
        }
        heads.push((stage, description, u64_at(bytes, &mut pos)?));
    }
    let mut desc1 = Vec::new();
    let mut desc2 = Vec::new();
    for (stage, description, stream_id) in heads {
        let mut indices = Vec::with_capacity(n);
        for _ in 0..n {
            indices.push(unzigzag(read_varint(bytes, &mut pos)?));
        }
        let st = StageStream { stage, description, stream_id, indices };
        if description == 1 {
            desc1.push(st);
        } else {
            desc2.push(st);
        }
    }
    if pos != bytes.len() {
        return Err(MdqError::Format("trailing bytes".into()));
    }
    let has = |d: u8| count == 0 || desc1.iter().chain(&desc2).any(|s| s.description == d);
    let (h1, h2) = (has(1), has(2));
    Ok(DescriptionStreams {
        kind,
        seed,
        n,
        fingerprint,
        desc1: h1.then_some(desc1),
        desc2: h2.then_some(desc2),
    })
}

pub fn write_to<W: Write>(w: &mut W, s: &DescriptionStreams) -> Result<()> {
    w.write_all(&to_bytes(s))?;
    Ok(())
}

pub fn read_from<R: Read>(r: &mut R) -> Result<DescriptionStreams> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    from_bytes(&buf)
}
