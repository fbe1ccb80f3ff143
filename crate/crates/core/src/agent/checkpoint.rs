//! Binary agent checkpoints: magic, format version, a length-prefixed JSON
//! header, then both networks' parameters as little-endian f64.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::files;

use super::{Agent, AgentConfig, QNetwork};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"RSIGDQN\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config: AgentConfig,
    pub n_actions: usize,
    pub space_digest: String,
    pub steps: u64,
    pub updates: u64,
    pub epsilon: f64,
    pub replay_len: usize,
    pub replay_stored: u64,
    pub replay_digest: String,
    pub param_count: usize,
}

fn replay_digest(agent: &Agent) -> String {
    let mut bytes = Vec::new();
    for t in agent.memory.iter() {
        for x in t.s.iter().chain(&t.s_next).chain([&t.reward]) {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        bytes.extend_from_slice(&(t.action as u64).to_le_bytes());
        bytes.push(u8::from(t.terminal));
    }
    files::sha256_hex(&bytes)
}

pub fn save_checkpoint(agent: &Agent, path: &Path) -> Result<()> {
    let header = CheckpointHeader {
        config: agent.config.clone(),
        n_actions: agent.space().len(),
        space_digest: agent.digest().to_string(),
        steps: agent.steps,
        updates: agent.updates,
        epsilon: agent.epsilon(),
        replay_len: agent.memory.len(),
        replay_stored: agent.memory.stored(),
        replay_digest: replay_digest(agent),
        param_count: agent.eval.param_count(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut bytes = Vec::with_capacity(16 + json.len() + 16 * header.param_count);
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&json);
    for net in [&agent.eval, &agent.target] {
        for p in net.flat_params() {
            bytes.extend_from_slice(&p.to_le_bytes());
        }
    }
    files::write_atomic(path, &bytes)
}

/// Reads a checkpoint into `agent`, which must already hold the action
/// space the checkpoint was taken on.
pub fn load_checkpoint(agent: &mut Agent, path: &Path) -> Result<CheckpointHeader> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |detail: String| Error::Malformed {
        path: path.to_path_buf(),
        detail,
    };
    if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("not an agent checkpoint".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let body = bytes.get(16..16 + hlen).ok_or_else(|| bad("truncated header".into()))?;
    let header: CheckpointHeader = serde_json::from_slice(body).map_err(|e| bad(e.to_string()))?;
    if header.space_digest != agent.digest() {
        return Err(bad(format!(
            "checkpoint action space {} differs from active {}",
            header.space_digest,
            agent.digest()
        )));
    }
    let params = &bytes[16 + hlen..];
    if params.len() != 16 * header.param_count {
        return Err(bad(format!(
            "expected {} parameter bytes, found {}",
            16 * header.param_count,
            params.len()
        )));
    }
    let mut values = params.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut load = |template: &QNetwork| {
        let mut net = template.clone();
        for (p, v) in net.params_mut().zip(values.by_ref()) {
            *p = v;
        }
        net
    };
    let eval = load(&agent.eval);
    let target = load(&agent.target);
    agent.restore(eval, target, header.steps, header.updates)?;
    Ok(header)
}
