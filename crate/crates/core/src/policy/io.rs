//! `policy.bin`: magic "PLC1", u32 config-JSON length and the JSON bytes,
//! u32 tensor count, then per tensor a u32 name length, the UTF-8 name, a
//! u32 rank, rank × u32 dimensions and the f64 values. Little-endian.

use std::path::Path;

use super::network::Architecture;
use super::{Policy, PolicyConfig, PolicyError};

pub const POLICY_MAGIC: &[u8; 4] = b"PLC1";

fn put_u32(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode_policy(policy: &Policy) -> Vec<u8> {
    let mut buf = Vec::with_capacity(64 + 8 * policy.params.len());
    buf.extend_from_slice(POLICY_MAGIC);
    let config = serde_json::to_vec(policy.config()).expect("config serializes");
    put_u32(&mut buf, config.len());
    buf.extend_from_slice(&config);
    put_u32(&mut buf, policy.specs().len());
    for spec in policy.specs() {
        put_u32(&mut buf, spec.name.len());
        buf.extend_from_slice(spec.name.as_bytes());
        put_u32(&mut buf, spec.shape.len());
        for &d in &spec.shape {
            put_u32(&mut buf, d);
        }
        for v in &policy.params[spec.offset..spec.offset + spec.len()] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PolicyError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| PolicyError::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, PolicyError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
}

pub fn decode_policy(bytes: &[u8]) -> Result<Policy, PolicyError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != POLICY_MAGIC {
        return Err(PolicyError::Format("bad magic".into()));
    }
    let n = r.u32()?;
    let config: PolicyConfig =
        serde_json::from_slice(r.take(n)?).map_err(|e| PolicyError::Format(format!("config: {e}")))?;
    let arch = Architecture::new(&config)?;
    let count = r.u32()?;
    if count != arch.specs.len() {
        return Err(PolicyError::Format(format!("{count} tensors, layout has {}", arch.specs.len())));
    }
    let mut params = vec![0.0; arch.n_params];
    for spec in &arch.specs {
        let len = r.u32()?;
        let name = std::str::from_utf8(r.take(len)?).map_err(|_| PolicyError::Format("tensor name".into()))?;
        let rank = r.u32()?;
        let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
        if name != spec.name || shape != spec.shape {
            return Err(PolicyError::Format(format!(
                "tensor {name} {shape:?} does not match {} {:?}",
                spec.name, spec.shape
            )));
        }
        let raw = r.take(8 * spec.len())?;
        for (v, c) in params[spec.offset..spec.offset + spec.len()].iter_mut().zip(raw.chunks_exact(8)) {
            *v = f64::from_le_bytes(c.try_into().unwrap());
        }
    }
    if r.pos != bytes.len() {
        return Err(PolicyError::Format("trailing bytes".into()));
    }
    Ok(Policy { arch, params })
}

pub fn save_policy(path: &Path, policy: &Policy) -> Result<(), PolicyError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| PolicyError::Io(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, encode_policy(policy)).map_err(|e| PolicyError::Io(format!("{}: {e}", path.display())))
}

pub fn load_policy(path: &Path) -> Result<Policy, PolicyError> {
    let bytes = std::fs::read(path).map_err(|e| PolicyError::Io(format!("{}: {e}", path.display())))?;
    decode_policy(&bytes)
}
