//! `CSID` binary format (little-endian):
//!
//! ```text
//! "CSID" | version: u16 | n_samples: u32 | n_ant: u32 | n_sub: u32
//!        | grid_dx: f64 | grid_dy: f64          (0.0, 0.0 when not gridded)
//! per sample:
//!   label: 3 × f64
//!   meta:  day_index: u32 | disturbed: u8 | grid_row: u32 | grid_col: u32
//!          (row = col = u32::MAX when not gridded)
//!   csi:   n_ant × n_sub × (re: f32, im: f32), antenna-major
//! ```
//!
//! Provenance lives in a plain-text `<file>.manifest` sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex32;

use super::{CsiDataset, CsiSample, Provenance, SampleMeta};
use crate::config::KvFile;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CSID";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 4 + 2 + 3 * 4 + 2 * 8;
pub const META_LEN: usize = 4 + 1 + 4 + 4;
const NO_GRID: u32 = u32::MAX;

/// Exact file size of a dataset with the given dimensions.
pub fn encoded_len(n_samples: usize, n_ant: usize, n_sub: usize) -> usize {
    HEADER_LEN + n_samples * (3 * 8 + META_LEN + n_ant * n_sub * 8)
}

fn u32_of(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} exceeds u32")))
}

pub fn encode(ds: &CsiDataset) -> Result<Vec<u8>> {
    ds.validate()?;
    let mut out = Vec::with_capacity(encoded_len(ds.len(), ds.n_ant, ds.n_sub));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&u32_of(ds.len(), "sample count")?.to_le_bytes());
    out.extend_from_slice(&u32_of(ds.n_ant, "antenna count")?.to_le_bytes());
    out.extend_from_slice(&u32_of(ds.n_sub, "subcarrier count")?.to_le_bytes());
    let (dx, dy) = ds.grid_spacing.unwrap_or((0.0, 0.0));
    out.extend_from_slice(&dx.to_le_bytes());
    out.extend_from_slice(&dy.to_le_bytes());
    for s in &ds.samples {
        for v in s.label {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&s.meta.day_index.to_le_bytes());
        out.push(u8::from(s.meta.disturbed));
        let (r, c) = s.meta.grid.unwrap_or((NO_GRID, NO_GRID));
        out.extend_from_slice(&r.to_le_bytes());
        out.extend_from_slice(&c.to_le_bytes());
        for v in &s.csi {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let bytes = self.buf.get(self.pos..end).ok_or_else(|| {
            Error::Corrupt(format!("file truncated at byte {} of {}", self.pos, end))
        })?;
        self.pos = end;
        Ok(bytes.try_into().expect("length checked"))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take()?))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn decode(buf: &[u8]) -> Result<CsiDataset> {
    if buf.len() < 4 || &buf[..4] != MAGIC {
        return Err(Error::Format("bad magic, not a CSID file".into()));
    }
    let mut r = Reader { buf, pos: 4 };
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported CSID version {version}")));
    }
    let n = r.u32()? as usize;
    let n_ant = r.u32()? as usize;
    let n_sub = r.u32()? as usize;
    let (dx, dy) = (r.f64()?, r.f64()?);
    let expected = encoded_len(n, n_ant, n_sub);
    if buf.len() < expected {
        return Err(Error::Corrupt(format!(
            "file truncated: {} bytes, header promises {expected}",
            buf.len()
        )));
    }
    if buf.len() > expected {
        return Err(Error::Corrupt(format!(
            "{} trailing bytes after the last sample",
            buf.len() - expected
        )));
    }
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let label = [r.f64()?, r.f64()?, r.f64()?];
        let day_index = r.u32()?;
        let disturbed = match r.u8()? {
            0 => false,
            1 => true,
            b => return Err(Error::Corrupt(format!("invalid disturbed flag {b}"))),
        };
        let (row, col) = (r.u32()?, r.u32()?);
        let grid = (row != NO_GRID || col != NO_GRID).then_some((row, col));
        let mut csi = Vec::with_capacity(n_ant * n_sub);
        for _ in 0..n_ant * n_sub {
            csi.push(Complex32::new(r.f32()?, r.f32()?));
        }
        samples.push(CsiSample {
            csi,
            label,
            meta: SampleMeta {
                day_index,
                disturbed,
                grid,
            },
        });
    }
    Ok(CsiDataset {
        n_ant,
        n_sub,
        samples,
        provenance: Provenance::default(),
        grid_spacing: (dx != 0.0 || dy != 0.0).then_some((dx, dy)),
    })
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

fn manifest(ds: &CsiDataset) -> String {
    let mut kv = KvFile::default();
    kv.push("", "format", "CSID");
    kv.push("", "version", &VERSION.to_string());
    kv.push("", "preset", &ds.provenance.preset);
    kv.push("", "samples", &ds.len().to_string());
    kv.push("", "antennas", &ds.n_ant.to_string());
    kv.push("", "subcarriers", &ds.n_sub.to_string());
    for (name, seed) in &ds.provenance.seeds {
        kv.push("seeds", name, &seed.to_string());
    }
    kv.to_string()
}

/// Writes the dataset and its manifest sidecar.
pub fn save(ds: &CsiDataset, path: &Path) -> Result<()> {
    let bytes = encode(ds)?;
    fs::write(path, bytes)?;
    fs::write(manifest_path(path), manifest(ds))?;
    Ok(())
}

/// Reads a dataset; provenance is restored from the sidecar when present.
pub fn load(path: &Path) -> Result<CsiDataset> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.display().to_string()),
        _ => Error::Io(e),
    })?;
    let mut ds = decode(&bytes)?;
    let mp = manifest_path(path);
    if mp.exists() {
        let kv = KvFile::parse(&fs::read_to_string(mp)?)?;
        ds.provenance.preset = kv.get("", "preset").unwrap_or_default().to_string();
        for (k, v) in kv.section("seeds") {
            let seed = v
                .parse()
                .map_err(|_| Error::Format(format!("bad seed '{v}' in manifest")))?;
            ds.provenance.seeds.push((k.to_string(), seed));
        }
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tests::toy;

    #[test]
    fn roundtrip_and_size() {
        let mut ds = toy(3, 2, 5);
        ds.samples[1].meta.grid = None;
        ds.samples[2].meta.disturbed = true;
        ds.samples[2].meta.day_index = 4;
        let bytes = encode(&ds).unwrap();
        assert_eq!(bytes.len(), encoded_len(9, 2, 5));
        let back = decode(&bytes).unwrap();
        assert_eq!(back, ds);
        assert_eq!(encode(&back).unwrap(), bytes);
    }

    #[test]
    fn bad_magic_and_truncation() {
        let ds = toy(2, 1, 3);
        let mut bytes = encode(&ds).unwrap();
        assert!(matches!(decode(&bytes[..bytes.len() - 1]), Err(Error::Corrupt(_))));
        assert!(matches!(decode(&bytes[..10]), Err(Error::Corrupt(_))));
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode(&bytes), Err(Error::Format(_))));
        let mut v2 = encode(&ds).unwrap();
        v2[4] = 9;
        assert!(matches!(decode(&v2), Err(Error::Format(_))));
    }

    #[test]
    fn file_roundtrip_keeps_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csid");
        let mut ds = toy(2, 2, 4);
        ds.provenance = Provenance {
            preset: "desk-los".into(),
            seeds: vec![("scene".into(), 7), ("split".into(), 11)],
        };
        save(&ds, &path).unwrap();
        assert_eq!(load(&path).unwrap(), ds);
        assert!(matches!(
            load(&dir.path().join("missing.csid")),
            Err(Error::MissingFile(_))
        ));
    }
}
