//! `AMAP` activation-map archives.
//!
//! ```text
//! header   magic "AMAP" | u32 version = 1 | u32 record_count | u32 width | u32 height
//! record   u32 id_len | id (UTF-8) | u8 ethnicity | u8 gender | f32 grid[width*height]
//! ```
//!
//! Little-endian throughout; grids are row-major. Ethnicity codes: 0=C, 1=E,
//! 2=I, 3=A, 255=unknown. Gender codes: 0=m, 1=f, 255=unknown.

use std::io::{Read, Write};

use crate::cam::ActivationMap;
use crate::demographics::{Demographics, Ethnicity, Gender};
use crate::error::{Error, Result};
use crate::grid::Grid;

pub const MAGIC: &[u8; 4] = b"AMAP";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;

/// Longest accepted sample id, in bytes.
const MAX_ID_LEN: usize = 1 << 16;

/// Writes `maps` and returns the number of bytes written.
pub fn write_amap_archive<W: Write>(maps: &[ActivationMap], mut sink: W) -> Result<u64> {
    let Some(first) = maps.first() else {
        return Err(Error::InvalidArgument("cannot write an empty archive".into()));
    };
    let (w, h) = first.grid().dims();
    if let Some(k) = maps.iter().position(|m| m.grid().dims() != (w, h)) {
        return Err(Error::Record {
            record: k,
            message: format!("dimensions {:?} differ from the first record {:?}", maps[k].grid().dims(), (w, h)),
        });
    }
    let mut buf = Vec::with_capacity(HEADER_LEN + maps.len() * (w * h * 4 + 16));
    buf.extend_from_slice(MAGIC);
    for v in [VERSION, maps.len() as u32, w as u32, h as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for (k, m) in maps.iter().enumerate() {
        let id = m.sample_id().as_bytes();
        if id.len() > MAX_ID_LEN {
            return Err(Error::Record { record: k, message: format!("sample id is {} bytes long", id.len()) });
        }
        buf.extend_from_slice(&(id.len() as u32).to_le_bytes());
        buf.extend_from_slice(id);
        let d = m.demographics();
        buf.push(d.ethnicity.code());
        buf.push(d.gender.code());
        for &v in m.grid().values() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    sink.write_all(&buf)?;
    sink.flush()?;
    Ok(buf.len() as u64)
}

pub fn encode_amap_archive(maps: &[ActivationMap]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_amap_archive(maps, &mut out)?;
    Ok(out)
}

/// Reads and validates a whole archive. The header is checked before any
/// record is decoded.
pub fn read_amap_archive<R: Read>(mut source: R) -> Result<Vec<ActivationMap>> {
    let mut header = [0u8; HEADER_LEN];
    read_exact(&mut source, &mut header, None)?;
    if &header[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    let word = |i: usize| u32::from_le_bytes(header[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let version = word(0);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let (count, w, h) = (word(1) as usize, word(2) as usize, word(3) as usize);
    if w == 0 || h == 0 {
        return Err(Error::Shape(format!("archive grid dimensions {w}x{h} must be positive")));
    }
    let cells = w.checked_mul(h).filter(|c| *c <= 1 << 26).ok_or_else(|| {
        Error::Shape(format!("archive grid dimensions {w}x{h} are too large"))
    })?;

    let mut maps = Vec::with_capacity(count.min(4096));
    let mut raw = vec![0u8; cells * 4];
    for record in 0..count {
        let mut len = [0u8; 4];
        read_exact(&mut source, &mut len, Some(record))?;
        let id_len = u32::from_le_bytes(len) as usize;
        if id_len > MAX_ID_LEN {
            return Err(Error::Record { record, message: format!("sample id length {id_len} is implausible") });
        }
        let mut id = vec![0u8; id_len];
        read_exact(&mut source, &mut id, Some(record))?;
        let id = String::from_utf8(id)
            .map_err(|_| Error::Record { record, message: "sample id is not valid UTF-8".into() })?;
        let mut tags = [0u8; 2];
        read_exact(&mut source, &mut tags, Some(record))?;
        let ethnicity = Ethnicity::from_code(tags[0])
            .ok_or_else(|| Error::Record { record, message: format!("invalid ethnicity code {}", tags[0]) })?;
        let gender = Gender::from_code(tags[1])
            .ok_or_else(|| Error::Record { record, message: format!("invalid gender code {}", tags[1]) })?;
        read_exact(&mut source, &mut raw, Some(record))?;
        let mut values = Vec::with_capacity(cells);
        for (k, c) in raw.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(c.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::Record { record, message: format!("non-finite value at element {k}") });
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Record { record, message: format!("value {v} at element {k} is outside [0, 1]") });
            }
            values.push(v as f64);
        }
        let grid = Grid::from_parts(w, h, values);
        maps.push(ActivationMap::new(id, grid, Demographics { ethnicity, gender })?);
    }
    let mut probe = [0u8; 1];
    if source.read(&mut probe)? != 0 {
        return Err(Error::Record { record: count, message: "trailing bytes after the declared records".into() });
    }
    Ok(maps)
}

fn read_exact<R: Read>(source: &mut R, buf: &mut [u8], record: Option<usize>) -> Result<()> {
    source.read_exact(buf).map_err(|e| match (e.kind(), record) {
        (std::io::ErrorKind::UnexpectedEof, Some(record)) => {
            Error::Record { record, message: "truncated archive".into() }
        }
        (std::io::ErrorKind::UnexpectedEof, None) => Error::UnexpectedEof,
        _ => Error::from(e),
    })
}
