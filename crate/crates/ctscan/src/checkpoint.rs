//! Training checkpoints.
//!
//! Binary layout (little-endian integers, 64-bit floats):
//!
//! ```text
//! magic      4 bytes  "CTAC"
//! version    u32      currently 1
//! paylen     u64      payload byte count
//! payload    paylen bytes (see below)
//! checksum   32 bytes sha256 of payload
//!
//! payload:
//!   config     u32 length + utf-8 resolved config document
//!   tensors    u32 count, then per tensor:
//!                u32 name length + name bytes
//!                u32 ndim + u32 dims
//!                f64 values (product of dims)
//!   adam       u32 count, then per state:
//!                u32 length, u64 t, f64 lr/beta1/beta2/eps/weight_decay
//!                f64 m values, f64 v values
//!   rng        32-byte seed, u64 stream, u128 word position
//!   episode    u64
//! ```

use crate::agent::{AgentOptimizer, AgentParams};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::nn::{AdamState, Tensor};
use crate::trainer::TrainerState;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CTAC";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to resume a run bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub params: AgentParams,
    pub opt: AgentOptimizer,
    pub rng_seed: [u8; 32],
    pub rng_stream: u64,
    pub rng_word_pos: u128,
    pub episode: u64,
}

impl Checkpoint {
    pub fn from_trainer(config: &RunConfig, state: &TrainerState) -> Self {
        Checkpoint {
            config: config.clone(),
            params: state.params.clone(),
            opt: state.opt.clone(),
            rng_seed: state.rng.get_seed(),
            rng_stream: state.rng.get_stream(),
            rng_word_pos: state.rng.get_word_pos(),
            episode: state.episode,
        }
    }

    pub fn into_trainer(self) -> TrainerState {
        let mut rng = ChaCha8Rng::from_seed(self.rng_seed);
        rng.set_stream(self.rng_stream);
        rng.set_word_pos(self.rng_word_pos);
        TrainerState {
            params: self.params,
            opt: self.opt,
            rng,
            episode: self.episode,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut p = Vec::new();
        let config_text = self.config.render();
        put_u32(&mut p, config_text.len() as u32);
        p.extend_from_slice(config_text.as_bytes());
        let named = self.params.named_tensors();
        put_u32(&mut p, named.len() as u32);
        for (name, t) in &named {
            put_u32(&mut p, name.len() as u32);
            p.extend_from_slice(name.as_bytes());
            put_u32(&mut p, t.shape.len() as u32);
            for &d in &t.shape {
                put_u32(&mut p, d as u32);
            }
            for &v in &t.data {
                p.extend_from_slice(&v.to_le_bytes());
            }
        }
        put_u32(&mut p, self.opt.states.len() as u32);
        for st in &self.opt.states {
            put_u32(&mut p, st.m.len() as u32);
            p.extend_from_slice(&st.t.to_le_bytes());
            for v in [st.lr, st.beta1, st.beta2, st.eps, st.weight_decay] {
                p.extend_from_slice(&v.to_le_bytes());
            }
            for &v in &st.m {
                p.extend_from_slice(&v.to_le_bytes());
            }
            for &v in &st.v {
                p.extend_from_slice(&v.to_le_bytes());
            }
        }
        p.extend_from_slice(&self.rng_seed);
        p.extend_from_slice(&self.rng_stream.to_le_bytes());
        p.extend_from_slice(&self.rng_word_pos.to_le_bytes());
        p.extend_from_slice(&self.episode.to_le_bytes());

        let mut out = Vec::with_capacity(p.len() + 48);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        put_u32(&mut out, CHECKPOINT_VERSION);
        out.extend_from_slice(&(p.len() as u64).to_le_bytes());
        out.extend_from_slice(&p);
        out.extend_from_slice(&Sha256::digest(&p));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut c = Cursor { bytes, pos: 0 };
        if c.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a checkpoint file".into()));
        }
        let version = c.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let paylen = c.u64()? as usize;
        let payload = c.take(paylen)?;
        let stored = c.take(32)?;
        if c.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after checksum".into()));
        }
        let digest = Sha256::digest(payload);
        if digest.as_slice() != stored {
            return Err(Error::Format("checkpoint checksum mismatch".into()));
        }

        let mut c = Cursor {
            bytes: payload,
            pos: 0,
        };
        let config_len = c.u32()? as usize;
        let config_text = std::str::from_utf8(c.take(config_len)?)
            .map_err(|_| Error::Format("config block is not utf-8".into()))?;
        let config = RunConfig::parse(config_text)?;

        let mut dummy = ChaCha8Rng::seed_from_u64(0);
        let mut params = AgentParams::init(config.image_size, &mut dummy)?;
        let expected: Vec<String> = params
            .named_tensors()
            .iter()
            .map(|(n, _)| n.clone())
            .collect();
        let tcount = c.u32()? as usize;
        if tcount != expected.len() {
            return Err(Error::Format(format!(
                "checkpoint has {tcount} tensors, expected {}",
                expected.len()
            )));
        }
        let mut tensors: Vec<Tensor> = Vec::with_capacity(tcount);
        for want in &expected {
            let nlen = c.u32()? as usize;
            let name = std::str::from_utf8(c.take(nlen)?)
                .map_err(|_| Error::Format("tensor name is not utf-8".into()))?;
            if name != want {
                return Err(Error::Format(format!(
                    "tensor '{name}' out of order (expected '{want}')"
                )));
            }
            let ndim = c.u32()? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(c.u32()? as usize);
            }
            let len: usize = shape.iter().product();
            let data = c.f64s(len)?;
            tensors.push(Tensor::from_vec(&shape, data));
        }
        for (dst, src) in params.tensors_mut().into_iter().zip(tensors) {
            if dst.shape != src.shape {
                return Err(Error::Format(format!(
                    "tensor shape {:?} does not match expected {:?}",
                    src.shape, dst.shape
                )));
            }
            *dst = src;
        }

        let acount = c.u32()? as usize;
        if acount != expected.len() {
            return Err(Error::Format(format!(
                "checkpoint has {acount} optimizer states, expected {}",
                expected.len()
            )));
        }
        let mut states = Vec::with_capacity(acount);
        for (name, t) in params.named_tensors() {
            let len = c.u32()? as usize;
            if len != t.len() {
                return Err(Error::Format(format!(
                    "optimizer state for '{name}' has length {len}, expected {}",
                    t.len()
                )));
            }
            let mut st = AdamState::new(len, 0.0, 0.0);
            st.t = c.u64()?;
            st.lr = c.f64()?;
            st.beta1 = c.f64()?;
            st.beta2 = c.f64()?;
            st.eps = c.f64()?;
            st.weight_decay = c.f64()?;
            st.m = c.f64s(len)?;
            st.v = c.f64s(len)?;
            states.push(st);
        }

        let mut rng_seed = [0u8; 32];
        rng_seed.copy_from_slice(c.take(32)?);
        let rng_stream = c.u64()?;
        let rng_word_pos = u128::from_le_bytes(c.take(16)?.try_into().unwrap());
        let episode = c.u64()?;
        if c.pos != payload.len() {
            return Err(Error::Format("trailing bytes in payload".into()));
        }
        Ok(Checkpoint {
            config,
            params,
            opt: AgentOptimizer { states },
            rng_seed,
            rng_stream,
            rng_word_pos,
            episode,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format("unexpected end of file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(8 * n)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}
