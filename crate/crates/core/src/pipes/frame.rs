//! Byte layout of pipe messages for a cross-process transport.
//!
//! ```text
//! magic        4 bytes  "MAPF"
//! frame type   u8       1 = observation, 2 = action, 3 = episode
//! actor_id     u32 LE
//! payload len  u64 LE   bytes, always a multiple of 8
//! payload      f64 LE array
//! checksum     u32 LE   CRC-32 of every preceding byte
//! ```
//!
//! Integers and flags travel as exact f64 values. Payload field order:
//!
//! * observation: env_time_step, episode_done, n_agents, obs_dim, n_actions,
//!   obs (agent-major), avail (agent-major, 0/1)
//! * action: n_agents, joint_action
//! * episode: episode_index, n_agents, n_actions, obs_dim, state_dim,
//!   terminated, then the lengths of obs, state, avail, actions, rewards,
//!   then those five arrays in that order

use std::io::{Read, Write};

use super::{ActionReply, ObsRequest, PipeError};
use crate::episode::EpisodeRecord;

pub const MAGIC: [u8; 4] = *b"MAPF";
const HEADER_LEN: usize = 4 + 1 + 4 + 8;
/// Refuse payloads beyond this many bytes when reading from a stream.
pub const MAX_PAYLOAD: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum FrameType {
    Obs = 1,
    Action = 2,
    Episode = 3,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Obs(ObsRequest),
    Action(ActionReply),
    Episode(EpisodeRecord),
}

impl Frame {
    pub fn frame_type(&self) -> FrameType {
        match self {
            Frame::Obs(_) => FrameType::Obs,
            Frame::Action(_) => FrameType::Action,
            Frame::Episode(_) => FrameType::Episode,
        }
    }

    pub fn actor_id(&self) -> u32 {
        match self {
            Frame::Obs(r) => r.actor_id,
            Frame::Action(r) => r.actor_id,
            Frame::Episode(e) => e.actor_id,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut p: Vec<f64> = Vec::new();
        match self {
            Frame::Obs(r) => {
                let n = r.per_agent_obs.len();
                let o = r.per_agent_obs.first().map_or(0, Vec::len);
                let a = r.avail_actions.first().map_or(0, Vec::len);
                p.extend([r.env_time_step as f64, flag(r.episode_done), n as f64, o as f64, a as f64]);
                r.per_agent_obs.iter().for_each(|v| p.extend_from_slice(v));
                r.avail_actions.iter().for_each(|v| p.extend(v.iter().map(|&b| flag(b))));
            }
            Frame::Action(r) => {
                p.push(r.joint_action.len() as f64);
                p.extend(r.joint_action.iter().map(|&a| a as f64));
            }
            Frame::Episode(e) => {
                p.extend([
                    e.episode_index as f64,
                    e.n_agents as f64,
                    e.n_actions as f64,
                    e.obs_dim as f64,
                    e.state_dim as f64,
                    flag(e.terminated),
                    e.obs.len() as f64,
                    e.state.len() as f64,
                    e.avail.len() as f64,
                    e.actions.len() as f64,
                    e.rewards.len() as f64,
                ]);
                p.extend_from_slice(&e.obs);
                p.extend_from_slice(&e.state);
                p.extend(e.avail.iter().map(|&b| flag(b)));
                p.extend(e.actions.iter().map(|&a| a as f64));
                p.extend_from_slice(&e.rewards);
            }
        }
        let mut out = Vec::with_capacity(HEADER_LEN + p.len() * 8 + 4);
        out.extend_from_slice(&MAGIC);
        out.push(self.frame_type() as u8);
        out.extend_from_slice(&self.actor_id().to_le_bytes());
        out.extend_from_slice(&((p.len() * 8) as u64).to_le_bytes());
        for x in &p {
            out.extend_from_slice(&x.to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    /// Decodes one frame from the front of `bytes`, returning it and the
    /// number of bytes consumed.
    pub fn decode(bytes: &[u8]) -> Result<(Frame, usize), PipeError> {
        if bytes.len() < HEADER_LEN + 4 {
            return Err(err("truncated header"));
        }
        if bytes[..4] != MAGIC {
            return Err(err("bad magic"));
        }
        let ty = bytes[4];
        let actor_id = u32::from_le_bytes(bytes[5..9].try_into().unwrap());
        let len = u64::from_le_bytes(bytes[9..17].try_into().unwrap());
        if len % 8 != 0 || len > MAX_PAYLOAD {
            return Err(err("bad payload length"));
        }
        let total = HEADER_LEN + len as usize + 4;
        if bytes.len() < total {
            return Err(err("truncated payload"));
        }
        let body = &bytes[..total - 4];
        let crc = u32::from_le_bytes(bytes[total - 4..total].try_into().unwrap());
        if crc32fast::hash(body) != crc {
            return Err(err("checksum mismatch"));
        }
        let vals: Vec<f64> = body[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut r = Reader { vals: &vals, pos: 0 };
        let frame = match ty {
            1 => {
                let env_time_step = r.int()? as u32;
                let episode_done = r.flag()?;
                let (n, o, a) = (r.int()?, r.int()?, r.int()?);
                let per_agent_obs = (0..n).map(|_| r.take(o).map(<[f64]>::to_vec)).collect::<Result<_, _>>()?;
                let avail_actions = (0..n)
                    .map(|_| r.take(a).map(|s| s.iter().map(|&x| x != 0.0).collect()))
                    .collect::<Result<_, _>>()?;
                Frame::Obs(ObsRequest { actor_id, env_time_step, per_agent_obs, avail_actions, episode_done })
            }
            2 => {
                let n = r.int()?;
                let joint_action = r.take(n)?.iter().map(|&x| x as usize).collect();
                Frame::Action(ActionReply { actor_id, joint_action })
            }
            3 => {
                let episode_index = r.int()? as u64;
                let (n_agents, n_actions, obs_dim, state_dim) = (r.int()?, r.int()?, r.int()?, r.int()?);
                let terminated = r.flag()?;
                let lens = [r.int()?, r.int()?, r.int()?, r.int()?, r.int()?];
                Frame::Episode(EpisodeRecord {
                    actor_id,
                    episode_index,
                    n_agents,
                    n_actions,
                    obs_dim,
                    state_dim,
                    obs: r.take(lens[0])?.to_vec(),
                    state: r.take(lens[1])?.to_vec(),
                    avail: r.take(lens[2])?.iter().map(|&x| x != 0.0).collect(),
                    actions: r.take(lens[3])?.iter().map(|&x| x as usize).collect(),
                    rewards: r.take(lens[4])?.to_vec(),
                    terminated,
                })
            }
            t => return Err(err(&format!("unknown frame type {t}"))),
        };
        if r.pos != vals.len() {
            return Err(err("trailing payload"));
        }
        Ok((frame, total))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&self.encode())
    }

    /// Reads the next frame. `Ok(None)` at a clean end of stream.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Option<Frame>, PipeError> {
        let mut head = [0u8; HEADER_LEN];
        match r.read_exact(&mut head) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(err(&e.to_string())),
        }
        let len = u64::from_le_bytes(head[9..17].try_into().unwrap());
        if len > MAX_PAYLOAD {
            return Err(err("bad payload length"));
        }
        let mut buf = head.to_vec();
        buf.resize(HEADER_LEN + len as usize + 4, 0);
        r.read_exact(&mut buf[HEADER_LEN..]).map_err(|e| err(&e.to_string()))?;
        Frame::decode(&buf).map(|(f, _)| Some(f))
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn err(msg: &str) -> PipeError {
    PipeError::Frame(msg.to_string())
}

struct Reader<'a> {
    vals: &'a [f64],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [f64], PipeError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.vals.len()).ok_or_else(|| err("payload too short"))?;
        let s = &self.vals[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn int(&mut self) -> Result<usize, PipeError> {
        let x = self.take(1)?[0];
        if x < 0.0 || x.fract() != 0.0 || x > 9.007_199_254_740_992e15 {
            return Err(err("non-integral count"));
        }
        Ok(x as usize)
    }

    fn flag(&mut self) -> Result<bool, PipeError> {
        Ok(self.int()? != 0)
    }
}
