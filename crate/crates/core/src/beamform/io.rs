//! Map export: raw little-endian dump (`SALM`) and 16-bit PGM rendering.

use byteorder::{BigEndian, ByteOrder, LittleEndian, WriteBytesExt};

use super::RangeAzimuthMap;
use crate::codec::Reader;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SALM";
const VERSION: u16 = 1;

fn fmt_err(reason: impl Into<String>) -> Error {
    Error::Format { what: "map", reason: reason.into() }
}

/// `SALM | u16 version | u32 rows | u32 cols | f64 values`.
pub fn encode_map(map: &RangeAzimuthMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(14 + 8 * map.values().len());
    out.extend_from_slice(MAGIC);
    out.write_u16::<LittleEndian>(VERSION).unwrap();
    out.write_u32::<LittleEndian>(map.n_range() as u32).unwrap();
    out.write_u32::<LittleEndian>(map.n_azimuth() as u32).unwrap();
    for &v in map.values() {
        out.write_f64::<LittleEndian>(v).unwrap();
    }
    out
}

pub fn decode_map(bytes: &[u8]) -> Result<RangeAzimuthMap> {
    let mut r = Reader::new(bytes, "map");
    r.magic(MAGIC, VERSION)?;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let count = rows.checked_mul(cols).ok_or_else(|| r.err("dimensions overflow"))?;
    let values = r.f64s(count)?;
    r.finish()?;
    RangeAzimuthMap::new(rows, cols, values)
}

/// Renders maps side by side as a 16-bit binary PGM, each panel normalized
/// by its own maximum, separated by `gap` black columns.
pub fn encode_pgm(panels: &[&RangeAzimuthMap], gap: usize) -> Result<Vec<u8>> {
    let first = panels.first().ok_or_else(|| fmt_err("nothing to render"))?;
    let rows = first.n_range();
    if panels.iter().any(|p| p.n_range() != rows) {
        return Err(fmt_err("panels differ in height"));
    }
    let width = panels.iter().map(|p| p.n_azimuth()).sum::<usize>() + gap * (panels.len() - 1);
    let mut out = format!("P5\n{width} {rows}\n65535\n").into_bytes();
    let scales: Vec<f64> = panels.iter().map(|p| if p.max() > 0.0 { 65535.0 / p.max() } else { 0.0 }).collect();
    let mut px = [0u8; 2];
    for n in 0..rows {
        for (i, (p, s)) in panels.iter().zip(&scales).enumerate() {
            if i > 0 {
                out.extend(std::iter::repeat_n(0u8, 2 * gap));
            }
            for q in 0..p.n_azimuth() {
                BigEndian::write_u16(&mut px, (p.get(n, q) * s).round().min(65535.0) as u16);
                out.extend_from_slice(&px);
            }
        }
    }
    Ok(out)
}

/// Parses a 16-bit binary PGM into `(width, height, pixels)`.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u16>)> {
    let mut fields = Vec::new();
    let mut pos = 2;
    if !bytes.starts_with(b"P5") {
        return Err(fmt_err("not a binary PGM"));
    }
    while fields.len() < 3 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        let field = std::str::from_utf8(&bytes[start..pos]).unwrap_or("");
        fields.push(field.parse::<usize>().map_err(|_| fmt_err("bad PGM header"))?);
    }
    if fields[2] != 65535 || pos >= bytes.len() {
        return Err(fmt_err("expected 16-bit PGM"));
    }
    let body = &bytes[pos + 1..];
    let (w, h) = (fields[0], fields[1]);
    if w.checked_mul(h).and_then(|n| n.checked_mul(2)) != Some(body.len()) {
        return Err(fmt_err("PGM size mismatch"));
    }
    Ok((w, h, body.chunks(2).map(BigEndian::read_u16).collect()))
}

/// Ground truth, sub-sampled and reconstructed maps with a 2-pixel gap.
pub fn triptych(truth: &RangeAzimuthMap, sub: &RangeAzimuthMap, recon: &RangeAzimuthMap) -> Result<Vec<u8>> {
    encode_pgm(&[truth, sub, recon], 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RangeAzimuthMap {
        RangeAzimuthMap::new(3, 2, vec![0.0, 1.5, 2.0, 0.25, 3.0, 1e-300]).unwrap()
    }

    #[test]
    fn raw_map_round_trips() {
        let bytes = encode_map(&sample());
        let back = decode_map(&bytes).unwrap();
        assert_eq!(back, sample());
        assert_eq!(encode_map(&back), bytes);
    }

    #[test]
    fn raw_map_rejects_truncation_and_negatives() {
        let bytes = encode_map(&sample());
        assert!(decode_map(&bytes[..bytes.len() - 1]).is_err());
        let mut neg = bytes.clone();
        neg[14..22].copy_from_slice(&(-1.0f64).to_le_bytes());
        assert!(decode_map(&neg).is_err());
        let mut huge = bytes;
        huge[6..10].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(decode_map(&huge).is_err());
    }

    #[test]
    fn pgm_panels_normalize_independently() {
        let a = sample();
        let b = RangeAzimuthMap::new(3, 1, vec![0.5, 1.0, 0.0]).unwrap();
        let bytes = encode_pgm(&[&a, &b], 1).unwrap();
        let (w, h, px) = decode_pgm(&bytes).unwrap();
        assert_eq!((w, h), (4, 3));
        // row 2: a = [3.0, ~0] | gap | b = 0.0
        assert_eq!(&px[8..12], &[65535, 0, 0, 0]);
        // b peaks at row 1
        assert_eq!(px[7], 65535);
        assert_eq!(px[3], 32768);
    }
}
