//! Parameter checkpoints:
//!
//! ```text
//! "CSIP" | version: u16 | meta_len: u32 | meta (UTF-8)
//!        | n_tensors: u32
//!        | per tensor: name_len: u16 | name | rank: u32 | dims: u32 × rank | f32 LE data
//!        | sha256 of all preceding bytes (32 bytes)
//! ```

use sha2::{Digest, Sha256};

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CSIP";
pub const CHECKPOINT_VERSION: u16 = 1;

pub fn encode_checkpoint(meta: &str, tensors: &[(&str, &Tensor<f32>)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(meta.as_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

/// Short content id of a checkpoint (first 16 hex chars of its hash).
pub fn checkpoint_id(bytes: &[u8]) -> String {
    hex::encode(&bytes[bytes.len().saturating_sub(32)..])[..16].to_string()
}

pub type DecodedCheckpoint = (String, Vec<(String, Tensor<f32>)>);

pub fn decode_checkpoint(bytes: &[u8]) -> Result<DecodedCheckpoint> {
    if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a parameter checkpoint".into()));
    }
    if bytes.len() < 4 + 2 + 32 {
        return Err(Error::Corrupt("checkpoint truncated".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Corrupt("checkpoint integrity hash mismatch".into()));
    }
    let mut pos = 4;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = body
            .get(pos..pos + n)
            .ok_or_else(|| Error::Corrupt("checkpoint truncated".into()))?;
        pos += n;
        Ok(s)
    };
    let version = u16::from_le_bytes(take(2)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let meta_len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let meta = String::from_utf8(take(meta_len)?.to_vec())
        .map_err(|_| Error::Corrupt("checkpoint meta is not UTF-8".into()))?;
    let n = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let mut tensors = Vec::with_capacity(n);
    for _ in 0..n {
        let nl = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(take(nl)?.to_vec())
            .map_err(|_| Error::Corrupt("tensor name is not UTF-8".into()))?;
        let rank = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize);
        }
        let count: usize = dims.iter().product();
        let raw = take(count * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push((name, Tensor::new(dims, data)?));
    }
    if pos != body.len() {
        return Err(Error::Corrupt("trailing bytes in checkpoint".into()));
    }
    Ok((meta, tensors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_integrity() {
        let a = Tensor::new(vec![2, 2], vec![1.0f32, -2.0, 3.5, 0.0]).unwrap();
        let b = Tensor::new(vec![3], vec![0.25f32, 1e-8, -7.0]).unwrap();
        let bytes = encode_checkpoint("k = v", &[("a", &a), ("b", &b)]);
        let (meta, ts) = decode_checkpoint(&bytes).unwrap();
        assert_eq!(meta, "k = v");
        assert_eq!(ts, vec![("a".to_string(), a), ("b".to_string(), b)]);
        let mut bad = bytes.clone();
        bad[20] ^= 1;
        assert!(matches!(decode_checkpoint(&bad), Err(Error::Corrupt(_))));
        assert!(matches!(decode_checkpoint(b"XXXXsomething"), Err(Error::Format(_))));
        assert_eq!(checkpoint_id(&bytes).len(), 16);
    }
}
