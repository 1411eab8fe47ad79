//! Binary checkpoint format (all integers and floats little-endian):
//!
//! ```text
//! "EHRD"                      magic
//! u32                         format version (1)
//! u32                         feature width C
//! u32                         layer count L
//! L x (u32 in, u32 out)       layer dimensions
//! per layer: f32 weights (out x in, row-major), then f32 biases (out)
//! f64 x 6                     sigma_min, sigma_max, rho, sigma_data, p_mean, p_std
//! u32                         steps N
//! u8                          preconditioning flag (0 or 1)
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Layer, Matrix, Mlp};

use super::denoiser::DenoiserModel;
use super::schedule::NoiseSchedule;

pub const MAGIC: &[u8; 4] = b"EHRD";
pub const FORMAT_VERSION: u32 = 1;

/// A trained denoiser together with the schedule it was trained under.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: DenoiserModel,
    pub schedule: NoiseSchedule,
}

impl Checkpoint {
    pub fn new(model: DenoiserModel, schedule: NoiseSchedule) -> Result<Self> {
        if model.sigma_data != schedule.sigma_data {
            return Err(Error::InvalidArgument(format!(
                "model sigma_data {} disagrees with schedule sigma_data {}",
                model.sigma_data, schedule.sigma_data
            )));
        }
        Ok(Self { model, schedule })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let net = &self.model.net;
        let mut out = Vec::with_capacity(64 + 4 * net.parameter_count());
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, FORMAT_VERSION);
        put_u32(&mut out, net.output_dim() as u32);
        put_u32(&mut out, net.layers().len() as u32);
        for layer in net.layers() {
            put_u32(&mut out, layer.input_dim() as u32);
            put_u32(&mut out, layer.output_dim() as u32);
        }
        for layer in net.layers() {
            for w in layer.weight.as_slice() {
                out.extend_from_slice(&w.to_le_bytes());
            }
            for b in &layer.bias {
                out.extend_from_slice(&b.to_le_bytes());
            }
        }
        let s = &self.schedule;
        for v in [s.sigma_min, s.sigma_max, s.rho, s.sigma_data, s.p_mean, s.p_std] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        put_u32(&mut out, s.steps as u32);
        out.push(u8::from(self.model.precondition));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported format version {version}")));
        }
        let width = r.u32()? as usize;
        let depth = r.u32()? as usize;
        if depth == 0 {
            return Err(Error::Format("zero layers".into()));
        }
        let mut dims = Vec::with_capacity(depth);
        for _ in 0..depth {
            dims.push((r.u32()? as usize, r.u32()? as usize));
        }
        let mut layers = Vec::with_capacity(depth);
        for &(input, output) in &dims {
            let count = input
                .checked_mul(output)
                .ok_or_else(|| Error::Format("layer size overflows".into()))?;
            let weight = r.f32s(count)?;
            let bias = r.f32s(output)?;
            layers.push(Layer {
                weight: Matrix::from_vec(output, input, weight)?,
                bias,
            });
        }
        let net = Mlp::new(layers).map_err(|e| Error::Format(e.to_string()))?;
        if net.output_dim() != width || net.input_dim() != width + 1 {
            return Err(Error::Format(format!(
                "network maps {} -> {} but header says C = {width}",
                net.input_dim(),
                net.output_dim()
            )));
        }
        let schedule = NoiseSchedule {
            sigma_min: r.f64()?,
            sigma_max: r.f64()?,
            rho: r.f64()?,
            sigma_data: r.f64()?,
            p_mean: r.f64()?,
            p_std: r.f64()?,
            steps: r.u32()? as usize,
        };
        let precondition = match r.take(1)?[0] {
            0 => false,
            1 => true,
            other => return Err(Error::Format(format!("bad preconditioning flag {other}"))),
        };
        if r.pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        schedule.validate().map_err(|e| Error::Format(e.to_string()))?;
        let model = DenoiserModel::new(net, schedule.sigma_data, precondition)
            .map_err(|e| Error::Format(e.to_string()))?;
        Ok(Self { model, schedule })
    }

    /// Writes to a sibling temp file and renames it into place, so a failed
    /// write never leaves a partial checkpoint at `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Temp-file-then-rename write.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = std::fs::write(&tmp, bytes).and_then(|()| std::fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let len = n
            .checked_mul(4)
            .ok_or_else(|| Error::Format("array length overflows".into()))?;
        Ok(self
            .take(len)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }
}
