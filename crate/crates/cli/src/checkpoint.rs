//! Binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "OCAD" | version u32 | kind str | model seed u64 | steps u64 | epochs u64
//! | config echo str | tensor count u32
//! | per tensor: name str | rank u32 | dims u64 × rank | f64 × product(dims)
//! | SHA-256 of everything before it (32 bytes)
//! ```
//!
//! `str` is a u32 byte length followed by UTF-8.

use std::path::Path;

use ocad_core::anogan::AnoganModel;
use ocad_core::ganomaly::GanomalyModel;
use ocad_core::Tensor;
use sha2::{Digest, Sha256};

use crate::config::{ModelKind, RunConfig};
use crate::error::{io_err, CliError};

pub const MAGIC: &[u8; 4] = b"OCAD";
pub const VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub model_seed: u64,
    pub steps: u64,
    pub epochs: u64,
    /// `RunConfig::model_echo` of the run that produced the model.
    pub config_echo: String,
    pub tensors: Vec<(String, Tensor)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Ganomaly(GanomalyModel),
    Anogan(AnoganModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Ganomaly(_) => ModelKind::Ganomaly,
            Model::Anogan(_) => ModelKind::Anogan,
        }
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| CliError::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CliError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn str(&mut self) -> Result<String, CliError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| CliError::Checkpoint("string is not UTF-8".into()))
    }
}

impl Checkpoint {
    pub fn from_ganomaly(model: &GanomalyModel, config: &RunConfig) -> Self {
        Checkpoint {
            kind: ModelKind::Ganomaly,
            model_seed: model.config().seed,
            steps: model.steps(),
            epochs: model.epochs_trained() as u64,
            config_echo: config.model_echo(),
            tensors: model.named_params().into_iter().map(|(n, t)| (n, t.clone())).collect(),
        }
    }

    pub fn from_anogan(model: &AnoganModel, config: &RunConfig) -> Self {
        Checkpoint {
            kind: ModelKind::Anogan,
            model_seed: model.config().seed,
            steps: model.steps(),
            epochs: model.epochs_trained() as u64,
            config_echo: config.model_echo(),
            tensors: model.named_params().into_iter().map(|(n, t)| (n, t.clone())).collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_str(&mut out, self.kind.as_str());
        out.extend_from_slice(&self.model_seed.to_le_bytes());
        out.extend_from_slice(&self.steps.to_le_bytes());
        out.extend_from_slice(&self.epochs.to_le_bytes());
        put_str(&mut out, &self.config_echo);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            put_str(&mut out, name);
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    /// Parses a checkpoint, verifying the checksum before reading anything
    /// past the magic.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CliError> {
        if bytes.len() < MAGIC.len() + DIGEST_LEN || &bytes[..4] != MAGIC {
            return Err(CliError::Checkpoint("not an OCAD checkpoint".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err(CliError::Checkpoint("checksum mismatch".into()));
        }
        let mut r = Reader { bytes: body, pos: 4 };
        let version = r.u32()?;
        if version != VERSION {
            return Err(CliError::Checkpoint(format!("unsupported version {version}")));
        }
        let kind: ModelKind = r.str()?.parse().map_err(CliError::Checkpoint)?;
        let model_seed = r.u64()?;
        let steps = r.u64()?;
        let epochs = r.u64()?;
        let config_echo = r.str()?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name = r.str()?;
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
            let len = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
            let len = len
                .filter(|l| l.checked_mul(8).is_some_and(|b| b <= body.len()))
                .ok_or_else(|| CliError::Checkpoint(format!("tensor {name}: implausible shape {shape:?}")))?;
            let raw = r.take(len * 8)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            let t = Tensor::new(shape, data).map_err(|e| CliError::Checkpoint(format!("tensor {name}: {e}")))?;
            tensors.push((name, t));
        }
        if r.pos != body.len() {
            return Err(CliError::Checkpoint(format!("{} trailing bytes", body.len() - r.pos)));
        }
        Ok(Checkpoint {
            kind,
            model_seed,
            steps,
            epochs,
            config_echo,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| io_err(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| CliError::Checkpoint(format!("{}: {}", path.display(), e.message())))
    }

    /// The run config recorded in the checkpoint, over defaults.
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(&self.config_echo)
            .map_err(|e| CliError::Checkpoint(format!("config echo: {}", e.message())))?;
        Ok(cfg)
    }

    /// Rebuilds the model. Architecture comes from the config echo; every
    /// parameter is then replaced by the stored tensors.
    pub fn into_model(self) -> Result<Model, CliError> {
        let cfg = self.run_config()?;
        let bad = |e: ocad_core::Error| CliError::Checkpoint(e.to_string());
        match self.kind {
            ModelKind::Ganomaly => {
                let mut m = GanomalyModel::build(cfg.ganomaly_config(self.model_seed)).map_err(bad)?;
                m.load_params(self.tensors).map_err(bad)?;
                m.restore_counters(self.steps, self.epochs as usize);
                Ok(Model::Ganomaly(m))
            }
            ModelKind::Anogan => {
                let mut m = AnoganModel::build(cfg.anogan_config(self.model_seed)).map_err(bad)?;
                m.load_params(self.tensors).map_err(bad)?;
                m.restore_counters(self.steps, self.epochs as usize);
                Ok(Model::Anogan(m))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.model.image_size = 16;
        cfg.model.ngf = 2;
        cfg.model.nz = 4;
        cfg
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let cfg = small();
        let model = GanomalyModel::build(cfg.ganomaly_config(11)).unwrap();
        let ck = Checkpoint::from_ganomaly(&model, &cfg);
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(back, ck);
        let Model::Ganomaly(m) = back.into_model().unwrap() else { panic!("kind") };
        assert_eq!(m, model);

        let a = AnoganModel::build(cfg.anogan_config(3)).unwrap();
        let Model::Anogan(b) = Checkpoint::from_bytes(&Checkpoint::from_anogan(&a, &cfg).to_bytes())
            .unwrap()
            .into_model()
            .unwrap()
        else {
            panic!("kind")
        };
        assert_eq!(a, b);
    }

    #[test]
    fn every_flipped_byte_is_rejected() {
        let cfg = small();
        let model = AnoganModel::build(cfg.anogan_config(1)).unwrap();
        let bytes = Checkpoint::from_anogan(&model, &cfg).to_bytes();
        for i in (0..bytes.len()).step_by(97).chain([bytes.len() - 1]) {
            let mut bad = bytes.clone();
            bad[i] ^= 0x10;
            assert!(Checkpoint::from_bytes(&bad).is_err(), "flip at {i}");
        }
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Checkpoint::from_bytes(b"OCAD").is_err());
    }
}
