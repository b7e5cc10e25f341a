//! Binary checkpoint: everything `infer` needs to reproduce `consolidate`.
//!
//! Little-endian layout:
//!
//! ```text
//! magic        8 bytes  "SSPCKPT\0"
//! version      u32      1
//! encoder      u32 level count, then per level:
//!                f64 sample_ratio, f64 radius, u32 group_size,
//!                u32 width count, u32 widths...
//! decoder      u32 level count, then per level: u32 width count, u32 widths...
//! head         u32 width count, u32 widths...
//! transform    f64 center.x, center.y, center.z, f64 scale
//! subset_size  u64
//! precision    u8 (4 = f32, 8 = f64)
//! params       u64 count, then count scalars
//! ```

use std::fs;
use std::path::Path;

use selfsample_core::net::EncoderLevel;
use selfsample_core::train::TrainedModel;
use selfsample_core::{NetArchitecture, NetParams, NormalizationTransform, Vec3};

use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 8] = b"SSPCKPT\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    F32(NetParams<f32>),
    F64(NetParams<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub arch: NetArchitecture,
    pub transform: NormalizationTransform,
    pub subset_size: usize,
    pub params: Params,
}

impl From<TrainedModel<f32>> for Checkpoint {
    fn from(m: TrainedModel<f32>) -> Self {
        Checkpoint {
            arch: m.arch,
            transform: m.transform,
            subset_size: m.subset_size,
            params: Params::F32(m.params),
        }
    }
}

impl From<TrainedModel<f64>> for Checkpoint {
    fn from(m: TrainedModel<f64>) -> Self {
        Checkpoint {
            arch: m.arch,
            transform: m.transform,
            subset_size: m.subset_size,
            params: Params::F64(m.params),
        }
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn widths(&mut self, w: &[usize]) {
        self.u32(w.len());
        for &x in w {
            self.u32(x);
        }
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(VERSION as usize);
        w.u32(self.arch.encoder.len());
        for level in &self.arch.encoder {
            w.f64(level.sample_ratio);
            w.f64(level.radius);
            w.u32(level.group_size);
            w.widths(&level.widths);
        }
        w.u32(self.arch.decoder.len());
        for d in &self.arch.decoder {
            w.widths(d);
        }
        w.widths(&self.arch.head);
        let c = self.transform.center;
        for v in [c.x, c.y, c.z, self.transform.scale] {
            w.f64(v);
        }
        w.u64(self.subset_size as u64);
        match &self.params {
            Params::F32(p) => {
                w.0.push(4);
                w.u64(p.len() as u64);
                for v in p.values() {
                    w.0.extend_from_slice(&v.to_le_bytes());
                }
            }
            Params::F64(p) => {
                w.0.push(8);
                w.u64(p.len() as u64);
                for v in p.values() {
                    w.0.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        w.0
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> CliResult<Self> {
        let mut r = Reader {
            path,
            bytes,
            pos: 0,
        };
        if r.take(8)? != MAGIC {
            return Err(r.error("not a checkpoint (bad magic)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.error(&format!("unsupported checkpoint version {version}")));
        }
        let mut encoder = Vec::new();
        for _ in 0..r.count()? {
            let sample_ratio = r.f64()?;
            let radius = r.f64()?;
            let group_size = r.u32()? as usize;
            let widths = r.widths()?;
            encoder.push(EncoderLevel {
                sample_ratio,
                radius,
                group_size,
                widths,
            });
        }
        let mut decoder = Vec::new();
        for _ in 0..r.count()? {
            decoder.push(r.widths()?);
        }
        let head = r.widths()?;
        let arch = NetArchitecture {
            encoder,
            decoder,
            head,
        };
        let center = Vec3::new(r.f64()?, r.f64()?, r.f64()?);
        let scale = r.f64()?;
        let subset_size = r.u64()? as usize;
        let precision = r.take(1)?[0];
        let count = r.u64()? as usize;
        let params = match precision {
            4 => {
                let raw = r.take(
                    count
                        .checked_mul(4)
                        .ok_or_else(|| r.error("parameter count overflow"))?,
                )?;
                let values = raw
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect();
                Params::F32(NetParams::from_values(&arch, values)?)
            }
            8 => {
                let raw = r.take(
                    count
                        .checked_mul(8)
                        .ok_or_else(|| r.error("parameter count overflow"))?,
                )?;
                let values = raw
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect();
                Params::F64(NetParams::from_values(&arch, values)?)
            }
            p => return Err(r.error(&format!("unknown precision tag {p}"))),
        };
        if r.pos != bytes.len() {
            return Err(r.error("trailing bytes after parameters"));
        }
        Ok(Checkpoint {
            arch,
            transform: NormalizationTransform { center, scale },
            subset_size,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        fs::write(path, self.to_bytes()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        Checkpoint::from_bytes(path, &bytes)
    }
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn error(&self, message: &str) -> CliError {
        CliError::parse(self.path, format!("byte {}", self.pos), message)
    }

    fn take(&mut self, n: usize) -> CliResult<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(self.error("truncated checkpoint"));
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> CliResult<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> CliResult<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self) -> CliResult<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    /// A length prefix, bounded to keep corrupt files from allocating wildly.
    fn count(&mut self) -> CliResult<usize> {
        let n = self.u32()? as usize;
        if n > 1 << 16 {
            return Err(self.error("implausible length prefix"));
        }
        Ok(n)
    }

    fn widths(&mut self) -> CliResult<Vec<usize>> {
        let n = self.count()?;
        (0..n).map(|_| Ok(self.u32()? as usize)).collect()
    }
}
