//! NSK1 training checkpoints.
//!
//! ```text
//! "NSK1" | u16 version | str config | u32 C, C x str class | u64 fold
//! | u64 epoch | f64 best_dev_uar | u64 best_epoch | u64 stale | u8 stopped
//! | u64 adam_step | f64 lr, beta1, beta2, eps
//! | u32 T, T x (str name | u64 len | len x f64) | u32 CRC-32
//! ```
//! `str` is a u32 byte length followed by UTF-8; everything little-endian.
//! Tensors are tagged `param/`, `best/`, `adam_m/` and `adam_v/`.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::config::ExperimentConfig;
use super::trainer::TrainState;
use crate::adapter::Model;
use crate::nn::params::{tensors, Parameters};
use crate::nn::{AdamConfig, AdamState};

pub const MAGIC: &[u8; 4] = b"NSK1";
pub const VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a checkpoint: bad magic")]
    BadMagic,
    #[error("checkpoint version {found} is not supported by this build (expects {VERSION})")]
    Version { found: u16 },
    #[error("truncated checkpoint at byte {offset} reading {what}")]
    Truncated { what: &'static str, offset: usize },
    #[error("CRC mismatch: stored {stored:08x}, computed {computed:08x}")]
    Crc { stored: u32, computed: u32 },
    #[error("invalid checkpoint: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ExperimentConfig,
    pub class_names: Vec<String>,
    pub fold: usize,
    pub state: TrainState,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn tensor(&mut self, name: &str, data: &[f64]) {
        self.str(name);
        self.u64(data.len() as u64);
        for &v in data {
            self.f64(v);
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CheckpointError> {
        if n > self.bytes.len() - self.pos {
            return Err(CheckpointError::Truncated { what, offset: self.pos });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self, what: &'static str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self, what: &'static str) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self, what: &'static str) -> Result<f64, CheckpointError> {
        Ok(f64::from_bits(self.u64(what)?))
    }
    fn str(&mut self, what: &'static str) -> Result<String, CheckpointError> {
        let n = self.u32(what)? as usize;
        let b = self.take(n, what)?;
        String::from_utf8(b.to_vec()).map_err(|_| CheckpointError::Invalid(format!("{what} is not UTF-8")))
    }
    fn tensor(&mut self) -> Result<(String, Vec<f64>), CheckpointError> {
        let name = self.str("tensor name")?;
        let n = self.u64("tensor length")? as usize;
        let raw = self.take(n.checked_mul(8).ok_or(CheckpointError::Truncated {
            what: "tensor data",
            offset: self.pos,
        })?, "tensor data")?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok((name, data))
    }
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.0.extend_from_slice(&VERSION.to_le_bytes());
    w.str(&ck.config.to_text());
    w.u32(ck.class_names.len() as u32);
    for c in &ck.class_names {
        w.str(c);
    }
    let st = &ck.state;
    w.u64(ck.fold as u64);
    w.u64(st.epoch as u64);
    w.f64(st.best_dev_uar);
    w.u64(st.best_epoch as u64);
    w.u64(st.stale as u64);
    w.0.push(u8::from(st.stopped));
    w.u64(st.adam.step);
    let a = st.adam.config;
    for v in [a.lr, a.beta1, a.beta2, a.eps] {
        w.f64(v);
    }
    let params = tensors(&st.model);
    let best = tensors(&st.best);
    w.u32((params.len() * 4) as u32);
    for (name, t) in &params {
        w.tensor(&format!("param/{name}"), t);
    }
    for (name, t) in &best {
        w.tensor(&format!("best/{name}"), t);
    }
    for ((name, _), m) in params.iter().zip(&st.adam.first_moment) {
        w.tensor(&format!("adam_m/{name}"), m);
    }
    for ((name, _), v) in params.iter().zip(&st.adam.second_moment) {
        w.tensor(&format!("adam_v/{name}"), v);
    }
    let crc = crc32fast::hash(&w.0);
    w.u32(crc);
    w.0
}

fn fill_model(model: &mut Model, group: &str, stored: &mut dyn Iterator<Item = (String, Vec<f64>)>) -> Result<(), CheckpointError> {
    let mut err = None;
    model.visit_mut("", &mut |name, dst| {
        if err.is_some() {
            return;
        }
        match stored.next() {
            Some((n, data)) if n == format!("{group}/{name}") && data.len() == dst.len() => dst.copy_from_slice(&data),
            Some((n, data)) => {
                err = Some(format!("expected {group}/{name} with {} values, found {n} with {}", dst.len(), data.len()))
            }
            None => err = Some(format!("missing tensor {group}/{name}")),
        }
    });
    err.map_or(Ok(()), |e| Err(CheckpointError::Invalid(e)))
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = u16::from_le_bytes(r.take(2, "version")?.try_into().expect("2 bytes"));
    if version != VERSION {
        return Err(CheckpointError::Version { found: version });
    }
    if bytes.len() < 10 {
        return Err(CheckpointError::Truncated {
            what: "checksum",
            offset: bytes.len(),
        });
    }
    let body = bytes.len() - 4;
    let stored = u32::from_le_bytes(bytes[body..].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(&bytes[..body]);
    if stored != computed {
        return Err(CheckpointError::Crc { stored, computed });
    }
    let mut r = Reader {
        bytes: &bytes[..body],
        pos: 6,
    };
    let config = ExperimentConfig::parse(&r.str("config")?).map_err(|e| CheckpointError::Invalid(e.to_string()))?;
    let n_classes = r.u32("class count")? as usize;
    let class_names = (0..n_classes).map(|_| r.str("class name")).collect::<Result<Vec<_>, _>>()?;
    let fold = r.u64("fold")? as usize;
    let epoch = r.u64("epoch")? as usize;
    let best_dev_uar = r.f64("best dev uar")?;
    let best_epoch = r.u64("best epoch")? as usize;
    let stale = r.u64("stale")? as usize;
    let stopped = r.take(1, "stopped")?[0] != 0;
    let step = r.u64("adam step")?;
    let adam_config = AdamConfig {
        lr: r.f64("lr")?,
        beta1: r.f64("beta1")?,
        beta2: r.f64("beta2")?,
        eps: r.f64("eps")?,
    };
    let n_tensors = r.u32("tensor count")? as usize;
    let mut stored = Vec::new();
    for _ in 0..n_tensors {
        stored.push(r.tensor()?);
    }
    if r.pos != body {
        return Err(CheckpointError::Invalid(format!("{} unexpected bytes before checksum", body - r.pos)));
    }

    let mut template = Model::new(&config.stack_config(), class_names.clone(), &mut ChaCha8Rng::seed_from_u64(0))
        .map_err(|e| CheckpointError::Invalid(e.to_string()))?;
    let per_group = tensors(&template).len();
    if n_tensors != 4 * per_group {
        return Err(CheckpointError::Invalid(format!(
            "{n_tensors} tensors stored, the configured model needs {}",
            4 * per_group
        )));
    }
    let mut it = stored.into_iter();
    let mut model = template.clone();
    fill_model(&mut model, "param", &mut it)?;
    fill_model(&mut template, "best", &mut it)?;
    let best = template;
    let mut moments = |group: &str| -> Result<Vec<Vec<f64>>, CheckpointError> {
        tensors(&model)
            .iter()
            .map(|(name, t)| match it.next() {
                Some((n, data)) if n == format!("{group}/{name}") && data.len() == t.len() => Ok(data),
                _ => Err(CheckpointError::Invalid(format!("bad or missing {group}/{name}"))),
            })
            .collect()
    };
    let first_moment = moments("adam_m")?;
    let second_moment = moments("adam_v")?;
    Ok(Checkpoint {
        config,
        class_names,
        fold,
        state: TrainState {
            model,
            best,
            adam: AdamState {
                config: adam_config,
                step,
                first_moment,
                second_moment,
            },
            epoch,
            best_dev_uar,
            best_epoch,
            stale,
            stopped,
        },
    })
}

pub fn save_checkpoint(ck: &Checkpoint, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(ck)).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, CheckpointError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_checkpoint(&bytes)
}
