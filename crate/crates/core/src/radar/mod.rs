//! Scene synthesis and the stepped-frequency MIMO measurement model.

mod config;
mod cube;
mod dataset;
mod scene;

pub use config::{ArrayConfig, SPEED_OF_LIGHT};
pub use cube::{noiseless_signal, synth_baseband, BasebandCube, N_ACQ};
pub use dataset::{decode_dataset, encode_dataset, make_dataset, read_dataset, write_dataset, Dataset, Record};
pub use scene::{AzimuthMode, Reflector, Scene, SceneSampler};
