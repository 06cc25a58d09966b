use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Sck,
    Dck,
    SckPlus,
    DckPlus,
    Fusion,
}

impl KernelKind {
    pub fn code(self) -> u8 {
        match self {
            KernelKind::Sck => 0,
            KernelKind::Dck => 1,
            KernelKind::SckPlus => 2,
            KernelKind::DckPlus => 3,
            KernelKind::Fusion => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => KernelKind::Sck,
            1 => KernelKind::Dck,
            2 => KernelKind::SckPlus,
            3 => KernelKind::DckPlus,
            4 => KernelKind::Fusion,
            _ => return None,
        })
    }
}

/// Vectorized representation of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub kind: KernelKind,
    pub label: u32,
    pub subject: u32,
    pub joints: u32,
    pub config_hash: u64,
    pub values: Vec<f64>,
    /// Inputs that fell outside their pivot grid's domain during encoding.
    pub out_of_domain: usize,
}

impl Descriptor {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dot(&self, other: &Descriptor) -> Result<f64> {
        if self.values.len() != other.values.len() {
            return Err(invalid(format!(
                "descriptors of length {} and {}",
                self.values.len(),
                other.values.len()
            )));
        }
        Ok(crate::tensor::dot_slices(&self.values, &other.values))
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn cosine(&self, other: &Descriptor) -> Result<f64> {
        let d = self.dot(other)?;
        let n = self.norm() * other.norm();
        Ok(if n == 0.0 { 0.0 } else { d / n })
    }
}

/// First 8 bytes (little-endian) of the SHA-256 of the canonical JSON
/// encoding of `cfg`.
pub fn config_hash<T: Serialize>(cfg: &T) -> u64 {
    let json = serde_json::to_vec(cfg).expect("configs serialize to JSON");
    let digest = Sha256::digest(&json);
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}
