//! Binary checkpoints: magic `IRBM`, a format version, little-endian fields
//! and 64-bit float arrays, closed by a SHA-256 of everything before it.
//!
//! Random streams are derived from `(seed, step, stream)`, so the optimizer
//! step stored here is the only random-number state a resumed run needs.

use std::path::Path;

use irbm::inference::{GibbsChainState, PersistentChains};
use irbm::training::{OptimizerState, ParamBuffer, RegroupState, TrainConfig, TrainState};
use irbm::{Label, ModelParams};
use sha2::{Digest, Sha256};

use crate::error::{io_error, CliError};

const MAGIC: &[u8; 4] = b"IRBM";
pub const VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, x: u8) {
        self.0.push(x);
    }
    fn u32(&mut self, x: u32) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn u64(&mut self, x: u64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn len(&mut self, x: usize) {
        self.u64(x as u64);
    }
    fn f64s(&mut self, xs: &[f64]) {
        self.len(xs.len());
        for x in xs {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
    fn bytes(&mut self, xs: &[u8]) {
        self.len(xs.len());
        self.0.extend_from_slice(xs);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn corrupt(msg: impl Into<String>) -> CliError {
    CliError::Invariant(format!("checkpoint: {}", msg.into()))
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, CliError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64, CliError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn len(&mut self) -> Result<usize, CliError> {
        let n = self.u64()?;
        usize::try_from(n)
            .ok()
            .filter(|&n| n <= self.buf.len())
            .ok_or_else(|| corrupt(format!("implausible length {n}")))
    }
    fn f64s(&mut self) -> Result<Vec<f64>, CliError> {
        let n = self.len()?;
        let raw = self.take(n.checked_mul(8).ok_or_else(|| corrupt("length overflow"))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
    fn bytes(&mut self) -> Result<&'a [u8], CliError> {
        let n = self.len()?;
        self.take(n)
    }
}

/// Serializes everything needed to continue training bit for bit.
pub fn encode(state: &TrainState) -> Vec<u8> {
    let mut w = Writer::default();
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION);

    let config: String = state
        .config()
        .to_pairs()
        .iter()
        .map(|(k, v)| format!("{k}={v}\n"))
        .collect();
    w.bytes(config.as_bytes());

    let p = state.params();
    w.len(p.visible());
    w.len(p.classes());
    w.len(p.units());
    w.f64s(&p.to_flat());

    let opt = state.optimizer();
    w.f64s(&opt.accum.to_flat());
    w.f64s(&opt.velocity.to_flat());
    w.len(opt.ages.len());
    for &a in &opt.ages {
        w.u64(a);
    }
    w.u64(opt.step);
    w.u64(opt.momentum_ramp);

    let rg = state.regroup();
    w.len(rg.m_t);
    w.u8(u8::from(rg.adaptive_phase));
    w.f64s(&rg.history);

    match state.chains() {
        None => w.u8(0),
        Some(chains) => {
            w.u8(1);
            w.len(chains.len());
            for c in chains.states() {
                w.u64(c.stream_id);
                w.len(c.z);
                w.u64(c.y.map_or(u64::MAX, |y| y.index() as u64));
                w.bytes(&c.v);
            }
        }
    }
    w.u64(state.epoch());

    let digest = Sha256::digest(&w.0);
    w.0.extend_from_slice(&digest);
    w.0
}

pub fn decode(bytes: &[u8]) -> Result<TrainState, CliError> {
    if bytes.len() < MAGIC.len() + 4 + DIGEST_LEN {
        return Err(corrupt("file too short"));
    }
    if &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    let mut r = Reader { buf: body, pos: 4 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version} (expected {VERSION})")));
    }
    if Sha256::digest(body).as_slice() != digest {
        return Err(corrupt("checksum mismatch"));
    }

    let text = std::str::from_utf8(r.bytes()?).map_err(|_| corrupt("config is not UTF-8"))?;
    let mut config = TrainConfig::default();
    for line in text.lines() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| corrupt(format!("bad config line {line:?}")))?;
        config.set(k, v).map_err(|e| corrupt(e.to_string()))?;
    }

    let (d, c, l) = (r.len()?, r.len()?, r.len()?);
    let penalty = config.penalty().map_err(|e| corrupt(e.to_string()))?;
    let mut params = ModelParams::zeros(d, c, l, penalty).map_err(|e| corrupt(e.to_string()))?;
    params.set_flat(&r.f64s()?).map_err(|e| corrupt(e.to_string()))?;

    let n = params.n_params();
    let accum = r.f64s()?;
    let velocity = r.f64s()?;
    if accum.len() != n || velocity.len() != n {
        return Err(corrupt("optimizer buffers do not match the model"));
    }
    let ages_len = r.len()?;
    let ages = (0..ages_len).map(|_| r.u64()).collect::<Result<Vec<_>, _>>()?;
    let opt = OptimizerState {
        accum: ParamBuffer::from_flat_like(&params, &accum),
        velocity: ParamBuffer::from_flat_like(&params, &velocity),
        ages,
        step: r.u64()?,
        momentum_ramp: r.u64()?,
    };

    let regroup = RegroupState {
        m_t: r.len()?,
        adaptive_phase: r.u8()? != 0,
        history: r.f64s()?,
    };

    let chains = match r.u8()? {
        0 => None,
        1 => {
            let count = r.len()?;
            let mut states = Vec::with_capacity(count);
            for _ in 0..count {
                let stream_id = r.u64()?;
                let z = r.len()?;
                let y = match r.u64()? {
                    u64::MAX => None,
                    k => Some(Label::new(k as usize, c).map_err(|e| corrupt(e.to_string()))?),
                };
                let v = r.bytes()?.to_vec();
                if v.len() != d || v.iter().any(|&b| b > 1) {
                    return Err(corrupt("chain state is not a binary visible vector"));
                }
                states.push(GibbsChainState { v, y, z, stream_id });
            }
            Some(PersistentChains::from_states(states))
        }
        _ => return Err(corrupt("bad chain flag")),
    };
    let epoch = r.u64()?;
    if r.pos != body.len() {
        return Err(corrupt("trailing bytes"));
    }
    TrainState::from_parts(config, params, opt, regroup, chains, epoch)
        .map_err(|e| corrupt(e.to_string()))
}

pub fn save(state: &TrainState, path: &Path) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, encode(state)).map_err(|e| io_error(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_error(path, e))
}

pub fn load(path: &Path) -> Result<TrainState, CliError> {
    let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
    decode(&bytes)
}
