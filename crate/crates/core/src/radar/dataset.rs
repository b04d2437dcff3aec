//! Simulated datasets and their `SALD` container.
//!
//! Layout (little-endian): `SALD`, u16 version, then the header
//! `n_tx n_rx n_range n_azimuth: u32`, `f_start f_stop element_pitch
//! noise_sigma: f64`, `seed: u64`, `n_train n_test: u32`. Each record holds
//! `u32` reflector count with `(range, azimuth, amplitude)` f64 triples, the
//! cube as interleaved `(re, im)` f64 in `(range, tx, rx, acq)` order, and the
//! ground-truth map as `(range, azimuth)` f64.

use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};
use num_complex::Complex64;
use rayon::prelude::*;

use super::{synth_baseband, ArrayConfig, BasebandCube, Reflector, Scene, SceneSampler, N_ACQ};
use crate::autodiff::Tensor;
use crate::beamform::{build_steering, full_array_map, full_positions, RangeAzimuthMap};
use crate::codec::Reader;
use crate::error::{Error, Result};
use crate::fsio::write_atomic;
use crate::rng::{stream, Domain};

const MAGIC: &[u8; 4] = b"SALD";
const VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub scene: Scene,
    pub cube: BasebandCube,
    /// Full-array map of the temporally averaged cube.
    pub truth: RangeAzimuthMap,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub cfg: ArrayConfig,
    pub noise_sigma: f64,
    pub seed: u64,
    pub n_train: usize,
    /// Training records first, then test records.
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn train(&self) -> &[Record] {
        &self.records[..self.n_train]
    }

    pub fn test(&self) -> &[Record] {
        &self.records[self.n_train..]
    }
}

/// Simulates `n_train + n_test` records. Record `i` draws its scene and
/// noise from its own stream, so the result depends only on the arguments.
pub fn make_dataset(
    n_train: usize,
    n_test: usize,
    cfg: &ArrayConfig,
    sampler: &SceneSampler,
    noise_sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::Config("dataset needs at least one train and one test record".into()));
    }
    cfg.validate()?;
    sampler.validate()?;
    let h = build_steering(cfg, &full_positions(cfg))?;
    let records = (0..n_train + n_test)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Domain::Record, i as u64);
            let scene = sampler.sample(cfg, &mut rng);
            let cube = synth_baseband(&scene, cfg, noise_sigma, &mut rng)?;
            let truth = full_array_map(&cube, &h)?;
            Ok(Record { scene, cube, truth })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { cfg: cfg.clone(), noise_sigma, seed, n_train, records })
}

pub fn encode_dataset(ds: &Dataset) -> Vec<u8> {
    let mut out = Vec::new();
    let c = &ds.cfg;
    out.extend_from_slice(MAGIC);
    out.write_u16::<LittleEndian>(VERSION).unwrap();
    for n in [c.n_tx, c.n_rx, c.n_range, c.n_azimuth] {
        out.write_u32::<LittleEndian>(n as u32).unwrap();
    }
    for v in [c.f_start, c.f_stop, c.element_pitch, ds.noise_sigma] {
        out.write_f64::<LittleEndian>(v).unwrap();
    }
    out.write_u64::<LittleEndian>(ds.seed).unwrap();
    out.write_u32::<LittleEndian>(ds.n_train as u32).unwrap();
    out.write_u32::<LittleEndian>((ds.records.len() - ds.n_train) as u32).unwrap();
    for rec in &ds.records {
        out.write_u32::<LittleEndian>(rec.scene.reflectors.len() as u32).unwrap();
        for r in &rec.scene.reflectors {
            for v in [r.range, r.azimuth, r.amplitude] {
                out.write_f64::<LittleEndian>(v).unwrap();
            }
        }
        for z in rec.cube.tensor().cx() {
            out.write_f64::<LittleEndian>(z.re).unwrap();
            out.write_f64::<LittleEndian>(z.im).unwrap();
        }
        for &v in rec.truth.values() {
            out.write_f64::<LittleEndian>(v).unwrap();
        }
    }
    out
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader::new(bytes, "dataset");
    r.magic(MAGIC, VERSION)?;
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let [f_start, f_stop, element_pitch, noise_sigma] = [r.f64()?, r.f64()?, r.f64()?, r.f64()?];
    let cfg = ArrayConfig {
        n_tx: dims[0],
        n_rx: dims[1],
        n_range: dims[2],
        n_azimuth: dims[3],
        f_start,
        f_stop,
        element_pitch,
    };
    cfg.validate().map_err(|e| r.err(e.to_string()))?;
    if noise_sigma < 0.0 {
        return Err(r.err("negative noise sigma"));
    }
    let seed = r.u64()?;
    let n_train = r.u32()? as usize;
    let n_test = r.u32()? as usize;
    if n_train == 0 || n_test == 0 {
        return Err(r.err("empty split"));
    }
    let cube_len =
        dims[..3].iter().try_fold(N_ACQ, |a, &d| a.checked_mul(d)).ok_or_else(|| r.err("cube size overflow"))?;
    let map_len = cfg.n_range.checked_mul(cfg.n_azimuth).ok_or_else(|| r.err("map size overflow"))?;
    // each record carries at least the cube and the map
    let min_record = cube_len.checked_mul(16).and_then(|c| c.checked_add(4 + 8 * map_len));
    let total = n_train + n_test;
    if min_record.and_then(|m| m.checked_mul(total)).is_none_or(|need| need > r.remaining()) {
        return Err(r.err("record count exceeds file size"));
    }
    let mut records = Vec::with_capacity(total);
    for i in 0..total {
        let count = r.u32()? as usize;
        if count.checked_mul(24).is_none_or(|b| b > r.remaining()) {
            return Err(r.err(format!("record {i}: reflector count exceeds file size")));
        }
        let triples = r.f64s(3 * count)?;
        let scene =
            Scene::new(triples.chunks(3).map(|t| Reflector { range: t[0], azimuth: t[1], amplitude: t[2] }).collect());
        scene.validate(&cfg).map_err(|e| r.err(format!("record {i}: {e}")))?;
        let raw = r.f64s(2 * cube_len)?;
        let values = raw.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
        let tensor = Tensor::complex(&[cfg.n_range, cfg.n_tx, cfg.n_rx, N_ACQ], values)?;
        let cube = BasebandCube::new(tensor, noise_sigma)?;
        let truth = RangeAzimuthMap::new(cfg.n_range, cfg.n_azimuth, r.f64s(map_len)?)
            .map_err(|e| r.err(format!("record {i}: {e}")))?;
        records.push(Record { scene, cube, truth });
    }
    r.finish()?;
    Ok(Dataset { cfg, noise_sigma, seed, n_train, records })
}

pub fn write_dataset(path: &Path, ds: &Dataset, force: bool) -> Result<()> {
    write_atomic(path, &encode_dataset(ds), force)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    decode_dataset(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ArrayConfig {
        ArrayConfig { n_tx: 2, n_rx: 3, n_range: 6, n_azimuth: 8, ..ArrayConfig::default() }
    }

    #[test]
    fn header_counts_match() {
        let ds = make_dataset(2, 1, &tiny(), &SceneSampler::default(), 0.1, 4).unwrap();
        assert_eq!(ds.records.len(), 3);
        assert_eq!((ds.train().len(), ds.test().len()), (2, 1));
        let back = decode_dataset(&encode_dataset(&ds)).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = encode_dataset(&make_dataset(3, 2, &tiny(), &SceneSampler::default(), 0.2, 9).unwrap());
        let b = encode_dataset(&make_dataset(3, 2, &tiny(), &SceneSampler::default(), 0.2, 9).unwrap());
        let c = encode_dataset(&make_dataset(3, 2, &tiny(), &SceneSampler::default(), 0.2, 10).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(encode_dataset(&decode_dataset(&a).unwrap()), a);
    }

    #[test]
    fn parallel_and_serial_generation_agree() {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let par = pool.install(|| make_dataset(4, 3, &tiny(), &SceneSampler::default(), 0.3, 2).unwrap());
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let ser = pool.install(|| make_dataset(4, 3, &tiny(), &SceneSampler::default(), 0.3, 2).unwrap());
        assert_eq!(encode_dataset(&par), encode_dataset(&ser));
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let bytes = encode_dataset(&make_dataset(1, 1, &tiny(), &SceneSampler::default(), 0.1, 1).unwrap());
        assert!(decode_dataset(&bytes[..bytes.len() - 8]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_dataset(&extra).is_err());
        let mut huge = bytes.clone();
        // n_train field
        huge[62..66].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(decode_dataset(&huge).is_err());
        let mut nan = bytes;
        let first_cube_value = 74 + 24 * u32::from_le_bytes(nan[70..74].try_into().unwrap()) as usize;
        nan[first_cube_value..first_cube_value + 8].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode_dataset(&nan).is_err());
        assert!(decode_dataset(b"SALD").is_err());
    }

    #[test]
    fn empty_split_is_an_error() {
        assert!(make_dataset(0, 1, &tiny(), &SceneSampler::default(), 0.1, 1).is_err());
    }
}
