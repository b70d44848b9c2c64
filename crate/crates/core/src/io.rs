//! Instance files and seeded instance generation.
//!
//! Instances are stored as one JSON document. Weights and prices are written
//! as decimal strings using the shortest representation that round-trips to
//! the same `f64`, so files are bit-exact across platforms.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::choice::{Instance, Product, ProductId};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductRecord {
    pub id: ProductId,
    pub weight: String,
    pub price: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub schema_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<usize>,
    pub products: Vec<ProductRecord>,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

fn parse_decimal(field: &str, id: ProductId, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Schema(format!("product {id}: {field} {s:?} is not a decimal number")))
}

impl InstanceFile {
    pub fn from_instance(instance: &Instance, metadata: BTreeMap<String, serde_json::Value>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            capacity: instance.capacity(),
            products: instance
                .products()
                .iter()
                .map(|p| ProductRecord {
                    id: p.id,
                    weight: p.weight.to_string(),
                    price: p.price.to_string(),
                })
                .collect(),
            metadata,
        }
    }

    pub fn to_instance(&self) -> Result<Instance> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported schema_version {:?}",
                self.schema_version
            )));
        }
        let products = self
            .products
            .iter()
            .map(|r| {
                Ok(Product::new(
                    r.id,
                    parse_decimal("weight", r.id, &r.weight)?,
                    parse_decimal("price", r.id, &r.price)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Instance::new(products, self.capacity)
    }

    /// Canonical form: products ordered by id, numbers in shortest round-trip form.
    pub fn canonical(&self) -> Result<Self> {
        let instance = self.to_instance()?;
        Ok(Self::from_instance(&instance, self.metadata.clone()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance file serializes");
        s.push('\n');
        s
    }

    /// SHA-256 over the canonical products and capacity (metadata excluded).
    pub fn digest(&self) -> Result<String> {
        let mut bare = self.canonical()?;
        bare.metadata.clear();
        Ok(hex::encode(Sha256::digest(bare.to_json().as_bytes())))
    }
}

/// Parses and validates an instance document.
pub fn parse_instance(bytes: &[u8]) -> Result<(Instance, InstanceFile)> {
    let file: InstanceFile =
        serde_json::from_slice(bytes).map_err(|e| Error::Schema(e.to_string()))?;
    let instance = file.to_instance()?;
    Ok((instance, file))
}

pub fn serialize_instance(instance: &Instance, metadata: BTreeMap<String, serde_json::Value>) -> String {
    InstanceFile::from_instance(instance, metadata).to_json()
}

pub fn read_instance(path: &Path) -> Result<(Instance, InstanceFile)> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_instance(&bytes)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n: usize,
    /// Weights are log-uniform on `[w_lo, w_hi]`.
    pub w_lo: f64,
    pub w_hi: f64,
    /// Prices are uniform on `[p_lo, p_hi]`.
    pub p_lo: f64,
    pub p_hi: f64,
    pub seed: u64,
    pub capacity: Option<usize>,
}

impl GeneratorSpec {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            w_lo: 0.1,
            w_hi: 10.0,
            p_lo: 1.0,
            p_hi: 100.0,
            seed,
            capacity: None,
        }
    }

    pub fn with_capacity(mut self, capacity: usize) -> Self {
        self.capacity = Some(capacity);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.w_lo, self.w_hi, self.p_lo, self.p_hi]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Range("generator bounds must be finite".into()));
        }
        if !(self.w_lo > 0.0 && self.w_lo <= self.w_hi) {
            return Err(Error::Range(format!(
                "weight range [{}, {}] must satisfy 0 < lo <= hi",
                self.w_lo, self.w_hi
            )));
        }
        if !(self.p_lo >= 0.0 && self.p_lo <= self.p_hi) {
            return Err(Error::Range(format!(
                "price range [{}, {}] must satisfy 0 <= lo <= hi",
                self.p_lo, self.p_hi
            )));
        }
        if let Some(c) = self.capacity {
            if c > self.n {
                return Err(Error::Range(format!("capacity {c} exceeds N = {}", self.n)));
            }
        }
        Ok(())
    }

    pub fn metadata(&self) -> BTreeMap<String, serde_json::Value> {
        let mut m = BTreeMap::new();
        m.insert(
            "generator".to_string(),
            serde_json::to_value(self).expect("generator spec serializes"),
        );
        m
    }
}

/// Deterministic instance from `spec`; ChaCha8 keeps the stream identical on
/// every platform.
pub fn generate_instance(spec: &GeneratorSpec) -> Result<Instance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (ln_lo, ln_hi) = (spec.w_lo.ln(), spec.w_hi.ln());
    let products = (1..=spec.n as ProductId)
        .map(|id| {
            let uw: f64 = rng.gen();
            let up: f64 = rng.gen();
            let weight = (ln_lo + uw * (ln_hi - ln_lo)).exp().clamp(spec.w_lo, spec.w_hi);
            let price = (spec.p_lo + up * (spec.p_hi - spec.p_lo)).clamp(spec.p_lo, spec.p_hi);
            Product::new(id, weight, price)
        })
        .collect();
    Instance::new(products, spec.capacity)
}

/// Child seed number `index` of `base`, independent of evaluation order.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index);
    rng.next_u64()
}
