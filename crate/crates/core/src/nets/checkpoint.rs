//! Binary checkpoint format, shared with parameter snapshots.
//!
//! All integers and floats little-endian:
//!
//! ```text
//! magic        4 bytes  "MQCK"
//! format       u32      FORMAT_VERSION
//! n_agents     u32
//! n_actions    u32
//! obs_dim      u32
//! state_dim    u32
//! hidden       u32
//! mixer        u32      0 = VDN, 1 = monotonic
//! embed        u32
//! version      u64      snapshot version
//! count        u64      number of parameters
//! params       count x f64
//! crc32        u32      over every preceding byte
//! ```

use std::io::{Read, Write};

use super::{Layout, MixerKind, NetError};

pub const MAGIC: &[u8; 4] = b"MQCK";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 * 8 + 8 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub layout: Layout,
    pub version: u64,
    pub params: Vec<f64>,
}

fn err(msg: impl Into<String>) -> NetError {
    NetError::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn encode(&self) -> Result<Vec<u8>, NetError> {
        let expected = self.layout.param_count();
        if self.params.len() != expected {
            return Err(NetError::LengthMismatch { expected, got: self.params.len() });
        }
        let l = &self.layout;
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.params.len() + 4);
        out.extend_from_slice(MAGIC);
        let mixer = match l.mixer {
            MixerKind::Vdn => 0u32,
            MixerKind::Mono => 1,
        };
        for v in [FORMAT_VERSION, l.n_agents as u32, l.n_actions as u32, l.obs_dim as u32,
                  l.state_dim as u32, l.hidden as u32, mixer, l.embed as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, NetError> {
        if bytes.len() < HEADER_LEN + 4 {
            return Err(err("truncated header"));
        }
        if &bytes[..4] != MAGIC {
            return Err(err("bad magic"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let crc = u32::from_le_bytes(tail.try_into().unwrap());
        if crc32fast::hash(body) != crc {
            return Err(err("checksum mismatch"));
        }
        let u32_at = |i: usize| u32::from_le_bytes(body[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        if u32_at(0) != FORMAT_VERSION {
            return Err(err(format!("unsupported format version {}", u32_at(0))));
        }
        let mixer = match u32_at(6) {
            0 => MixerKind::Vdn,
            1 => MixerKind::Mono,
            k => return Err(err(format!("unknown mixer kind {k}"))),
        };
        let layout = Layout {
            n_agents: u32_at(1) as usize,
            n_actions: u32_at(2) as usize,
            obs_dim: u32_at(3) as usize,
            state_dim: u32_at(4) as usize,
            hidden: u32_at(5) as usize,
            mixer,
            embed: u32_at(7) as usize,
        };
        let version = u64::from_le_bytes(body[36..44].try_into().unwrap());
        let count = u64::from_le_bytes(body[44..52].try_into().unwrap()) as usize;
        if count != layout.param_count() {
            return Err(NetError::LengthMismatch { expected: layout.param_count(), got: count });
        }
        let data = &body[HEADER_LEN..];
        if data.len() != 8 * count {
            return Err(err(format!("expected {} parameter bytes, found {}", 8 * count, data.len())));
        }
        let params = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { layout, version, params })
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<(), NetError> {
        w.write_all(&self.encode()?).map_err(|e| err(e.to_string()))
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, NetError> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf).map_err(|e| err(e.to_string()))?;
        Self::decode(&buf)
    }
}
