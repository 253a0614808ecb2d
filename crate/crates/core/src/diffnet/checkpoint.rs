//! Parameter checkpoints: a small versioned header followed by every
//! parameter tensor as flat little-endian `f32`, in declaration order.
//! Identical bytes mean an identical network.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

const MAGIC: [u8; 4] = *b"GZNC";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("architecture hash mismatch: checkpoint {found:#018x}, expected {expected:#018x}")]
    ArchMismatch { expected: u64, found: u64 },
    #[error("checkpoint holds {found} parameter bytes, expected {expected}")]
    SizeMismatch { expected: usize, found: usize },
}

/// Serializes parameters. `arch_hash` fingerprints the architecture the
/// parameters belong to; loading verifies it before touching any weights.
pub fn save(path: &Path, arch_hash: u64, params: &[&[f32]]) -> Result<(), CheckpointError> {
    let total: usize = params.iter().map(|p| p.len()).sum();
    let mut bytes = Vec::with_capacity(16 + 4 * total);
    bytes.extend_from_slice(&MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&arch_hash.to_le_bytes());
    for slice in params {
        for v in *slice {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    // Write-then-rename so readers never observe a partial checkpoint.
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a checkpoint into existing parameter buffers, verifying magic,
/// version, architecture hash and total size first.
pub fn load_into(
    path: &Path,
    expected_arch: u64,
    mut params: Vec<&mut [f32]>,
) -> Result<(), CheckpointError> {
    let bytes = fs::read(path)?;
    if bytes.len() < 16 || bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let found = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    if found != expected_arch {
        return Err(CheckpointError::ArchMismatch { expected: expected_arch, found });
    }
    let total: usize = params.iter().map(|p| p.len()).sum();
    let payload = &bytes[16..];
    if payload.len() != 4 * total {
        return Err(CheckpointError::SizeMismatch { expected: 4 * total, found: payload.len() });
    }
    let mut off = 0;
    for slice in params.iter_mut() {
        for v in slice.iter_mut() {
            *v = f32::from_le_bytes(payload[off..off + 4].try_into().unwrap());
            off += 4;
        }
    }
    Ok(())
}
