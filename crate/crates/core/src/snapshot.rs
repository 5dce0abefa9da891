//! MFNS binary snapshots of a spectral vector field.
//!
//! Layout, all little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "MFNS"
//! 4       4     format version (u32, currently 1)
//! 8       4     dimension (u32, always 2)
//! 12      4     truncation K_f (u32)
//! 16      8     time (f64)
//! 24      ...   (2 K_f + 1)^2 wavevectors in lexicographic (k1, k2) order; per
//!               wavevector: re(c1), im(c1), re(c2), im(c2) as f64
//! ```

use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{ModeLayout, SpectralVectorField};

pub const MAGIC: &[u8; 4] = b"MFNS";
pub const VERSION: u32 = 1;
pub const DIMENSION: u32 = 2;
const HEADER_LEN: usize = 24;

/// A mean-field (or reference) velocity at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub field: SpectralVectorField,
}

impl Snapshot {
    pub fn new(t: f64, field: SpectralVectorField) -> Self {
        Self { t, field }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 32 * self.field.coeffs().len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&DIMENSION.to_le_bytes());
        out.extend_from_slice(&(self.field.k_max() as u32).to_le_bytes());
        out.extend_from_slice(&self.t.to_le_bytes());
        for v in self.field.coeffs() {
            for c in v {
                out.extend_from_slice(&c.re.to_le_bytes());
                out.extend_from_slice(&c.im.to_le_bytes());
            }
        }
        out
    }

    /// Decodes a snapshot; the error message describes what is wrong.
    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < HEADER_LEN {
            return Err(format!("truncated header ({} bytes)", bytes.len()));
        }
        if &bytes[0..4] != MAGIC {
            return Err(format!("bad magic bytes {:?}", &bytes[0..4]));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(format!("unsupported format version {version}"));
        }
        let dim = u32_at(8);
        if dim != DIMENSION {
            return Err(format!("unsupported dimension {dim}"));
        }
        let k_max = u32_at(12) as usize;
        let t = f64_at(16);
        let modes = ModeLayout::new(k_max).len();
        let expected = HEADER_LEN + 32 * modes;
        if bytes.len() != expected {
            return Err(format!(
                "expected {expected} bytes for K = {k_max}, found {}",
                bytes.len()
            ));
        }
        let coeffs = (0..modes)
            .map(|m| {
                let o = HEADER_LEN + 32 * m;
                [
                    Complex64::new(f64_at(o), f64_at(o + 8)),
                    Complex64::new(f64_at(o + 16), f64_at(o + 24)),
                ]
            })
            .collect();
        let field = SpectralVectorField::from_coeffs(k_max, coeffs).map_err(|e| e.to_string())?;
        Ok(Self { t, field })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes).map_err(|reason| Error::format(path, reason))
    }
}
