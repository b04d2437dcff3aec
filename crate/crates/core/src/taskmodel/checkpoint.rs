//! `SALC` checkpoints: `SALC`, u16 version, `depth base_channels kernel
//! residual: u32`, `count: u64`, then `count` little-endian f64 parameters in
//! layer order.

use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};

use super::{ModelParams, UNetDescriptor};
use crate::codec::Reader;
use crate::error::Result;
use crate::fsio::write_atomic;

const MAGIC: &[u8; 4] = b"SALC";
const VERSION: u16 = 1;

pub fn encode_checkpoint(p: &ModelParams) -> Vec<u8> {
    let d = p.descriptor;
    let flat = p.flat();
    let mut out = Vec::with_capacity(30 + 8 * flat.len());
    out.extend_from_slice(MAGIC);
    out.write_u16::<LittleEndian>(VERSION).unwrap();
    for v in [d.depth, d.base_channels, d.kernel, d.residual as usize] {
        out.write_u32::<LittleEndian>(v as u32).unwrap();
    }
    out.write_u64::<LittleEndian>(flat.len() as u64).unwrap();
    for v in flat {
        out.write_f64::<LittleEndian>(v).unwrap();
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelParams> {
    let mut r = Reader::new(bytes, "checkpoint");
    r.magic(MAGIC, VERSION)?;
    let depth = r.u32()? as usize;
    let base_channels = r.u32()? as usize;
    let kernel = r.u32()? as usize;
    let residual = match r.u32()? {
        0 => false,
        1 => true,
        v => return Err(r.err(format!("bad residual flag {v}"))),
    };
    let descriptor = UNetDescriptor { depth, base_channels, kernel, residual };
    descriptor.validate().map_err(|e| r.err(e.to_string()))?;
    let count = r.u64()?;
    if count != descriptor.param_count() as u64 {
        return Err(r.err(format!("descriptor needs {} parameters, header says {count}", descriptor.param_count())));
    }
    let flat = r.f64s(count as usize)?;
    r.finish()?;
    ModelParams::from_flat(descriptor, &flat)
}

pub fn write_checkpoint(path: &Path, p: &ModelParams, force: bool) -> Result<()> {
    write_atomic(path, &encode_checkpoint(p), force)
}

pub fn read_checkpoint(path: &Path) -> Result<ModelParams> {
    decode_checkpoint(&std::fs::read(path)?)
}
