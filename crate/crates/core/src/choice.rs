//! Product universes, assortments and revenue oracles.
//!
//! The greedy solver only ever talks to a [`RevenueOracle`]. This module ships
//! the exact multinomial-logit oracle plus two wrappers: one that degrades
//! revenues multiplicatively by a per-assortment factor, and one that counts
//! calls without touching the values it forwards.

use std::collections::HashSet;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type ProductId = u32;

/// Weight of the no-purchase alternative. Fixed; never configurable.
pub const NO_PURCHASE_WEIGHT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Product {
    pub id: ProductId,
    /// MNL preference weight, strictly positive.
    pub weight: f64,
    /// Revenue collected when the product is purchased.
    pub price: f64,
}

impl Product {
    pub fn new(id: ProductId, weight: f64, price: f64) -> Self {
        Self { id, weight, price }
    }
}

/// A validated product universe. Products are stored by id, and ids are
/// exactly `1..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    products: Vec<Product>,
    capacity: Option<usize>,
}

impl Instance {
    pub fn new(products: Vec<Product>, capacity: Option<usize>) -> Result<Self> {
        let n = products.len();
        let mut slots: Vec<Option<Product>> = vec![None; n];
        for p in products {
            if p.weight <= 0.0 || !p.weight.is_finite() {
                return Err(Error::NonPositiveWeight {
                    id: p.id,
                    weight: p.weight,
                });
            }
            if p.price < 0.0 || !p.price.is_finite() {
                return Err(Error::NegativePrice {
                    id: p.id,
                    price: p.price,
                });
            }
            if p.id == 0 || p.id as usize > n {
                return Err(Error::IdOutOfRange { id: p.id, n });
            }
            let slot = &mut slots[p.id as usize - 1];
            if slot.is_some() {
                return Err(Error::DuplicateId(p.id));
            }
            *slot = Some(p);
        }
        if let Some(c) = capacity {
            if c > n {
                return Err(Error::Config(format!(
                    "default capacity {c} exceeds product count {n}"
                )));
            }
        }
        let products = slots.into_iter().map(|p| p.expect("all slots filled")).collect();
        Ok(Self { products, capacity })
    }

    pub fn len(&self) -> usize {
        self.products.len()
    }

    pub fn is_empty(&self) -> bool {
        self.products.is_empty()
    }

    pub fn products(&self) -> &[Product] {
        &self.products
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn product(&self, id: ProductId) -> Result<&Product> {
        if id == 0 {
            return Err(Error::UnknownProduct(id));
        }
        self.products
            .get(id as usize - 1)
            .ok_or(Error::UnknownProduct(id))
    }

    pub fn ids(&self) -> Vec<ProductId> {
        self.products.iter().map(|p| p.id).collect()
    }

    /// `W_C^max`: one plus the sum of the `c` largest weights.
    pub fn max_weight_mass(&self, c: usize) -> f64 {
        let mut w: Vec<f64> = self.products.iter().map(|p| p.weight).collect();
        w.sort_by(|a, b| b.total_cmp(a));
        NO_PURCHASE_WEIGHT + w.iter().take(c).sum::<f64>()
    }

    /// `w(M) = 1 + sum of weights in M`.
    pub fn weight_mass(&self, m: &Assortment) -> Result<f64> {
        let mut total = NO_PURCHASE_WEIGHT;
        for &id in m.ids() {
            total += self.product(id)?.weight;
        }
        Ok(total)
    }

    pub fn validate(&self, m: &Assortment) -> Result<()> {
        for &id in m.ids() {
            self.product(id)?;
        }
        Ok(())
    }
}

/// A set of product ids kept in ascending order, so equality, hashing and
/// ordering all follow the canonical encoding.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<ProductId>", into = "Vec<ProductId>")]
pub struct Assortment(Vec<ProductId>);

impl Assortment {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Builds an assortment, rejecting repeated ids.
    pub fn from_ids<I: IntoIterator<Item = ProductId>>(ids: I) -> Result<Self> {
        let mut v: Vec<ProductId> = ids.into_iter().collect();
        v.sort_unstable();
        if let Some(w) = v.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateMember(w[0]));
        }
        Ok(Self(v))
    }

    pub(crate) fn from_sorted_unchecked(v: Vec<ProductId>) -> Self {
        debug_assert!(v.windows(2).all(|w| w[0] < w[1]));
        Self(v)
    }

    pub fn ids(&self) -> &[ProductId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: ProductId) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    pub fn is_subset(&self, other: &Assortment) -> bool {
        self.0.iter().all(|&id| other.contains(id))
    }

    /// `self ∪ {id}`.
    pub fn with(&self, id: ProductId) -> Self {
        let mut v = self.0.clone();
        if let Err(pos) = v.binary_search(&id) {
            v.insert(pos, id);
        }
        Self(v)
    }

    /// `self \ {id}`.
    pub fn without(&self, id: ProductId) -> Self {
        let mut v = self.0.clone();
        if let Ok(pos) = v.binary_search(&id) {
            v.remove(pos);
        }
        Self(v)
    }

    /// `(self \ {out}) ∪ {into}`.
    pub fn exchange(&self, out: ProductId, into: ProductId) -> Self {
        self.without(out).with(into)
    }

    /// Stable encoding: ascending ids joined by commas. The noise hash depends
    /// on this exact byte sequence.
    pub fn encode(&self) -> String {
        let parts: Vec<String> = self.0.iter().map(|id| id.to_string()).collect();
        parts.join(",")
    }
}

impl fmt::Display for Assortment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.encode())
    }
}

impl TryFrom<Vec<ProductId>> for Assortment {
    type Error = Error;

    fn try_from(v: Vec<ProductId>) -> Result<Self> {
        Assortment::from_ids(v)
    }
}

impl From<Assortment> for Vec<ProductId> {
    fn from(a: Assortment) -> Self {
        a.0
    }
}

/// Expected MNL revenue `Σ p_i w_i / (1 + Σ w_i)`.
pub fn mnl_revenue(instance: &Instance, m: &Assortment) -> Result<f64> {
    let mut num = 0.0;
    let mut den = NO_PURCHASE_WEIGHT;
    for &id in m.ids() {
        let p = instance.product(id)?;
        num += p.price * p.weight;
        den += p.weight;
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    NoPurchase,
    Product(ProductId),
}

pub fn mnl_choice_prob(instance: &Instance, m: &Assortment, choice: Choice) -> Result<f64> {
    let den = instance.weight_mass(m)?;
    match choice {
        Choice::NoPurchase => Ok(NO_PURCHASE_WEIGHT / den),
        Choice::Product(id) => {
            if !m.contains(id) {
                return Err(Error::InvalidChoice(id));
            }
            Ok(instance.product(id)?.weight / den)
        }
    }
}

/// Anything that can price an assortment. Implementations must be pure:
/// the same assortment always yields the same value.
pub trait RevenueOracle: Send + Sync {
    fn evaluate(&self, m: &Assortment) -> Result<f64>;
}

impl<O: RevenueOracle + ?Sized> RevenueOracle for &O {
    fn evaluate(&self, m: &Assortment) -> Result<f64> {
        (**self).evaluate(m)
    }
}

impl<O: RevenueOracle + ?Sized> RevenueOracle for Box<O> {
    fn evaluate(&self, m: &Assortment) -> Result<f64> {
        (**self).evaluate(m)
    }
}

impl<O: RevenueOracle + ?Sized> RevenueOracle for Arc<O> {
    fn evaluate(&self, m: &Assortment) -> Result<f64> {
        (**self).evaluate(m)
    }
}

/// Exact MNL revenues for a fixed instance.
#[derive(Debug, Clone, Copy)]
pub struct ExactOracle<'a> {
    instance: &'a Instance,
}

impl<'a> ExactOracle<'a> {
    pub fn new(instance: &'a Instance) -> Self {
        Self { instance }
    }

    pub fn instance(&self) -> &'a Instance {
        self.instance
    }
}

impl RevenueOracle for ExactOracle<'_> {
    fn evaluate(&self, m: &Assortment) -> Result<f64> {
        mnl_revenue(self.instance, m)
    }
}

/// Wraps a closure as an oracle.
pub struct FnOracle<F>(pub F);

impl<F> RevenueOracle for FnOracle<F>
where
    F: Fn(&Assortment) -> Result<f64> + Send + Sync,
{
    fn evaluate(&self, m: &Assortment) -> Result<f64> {
        (self.0)(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    #[default]
    None,
    Fixed,
    SeededUniform,
}

impl std::str::FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(NoiseMode::None),
            "fixed" => Ok(NoiseMode::Fixed),
            "seeded-uniform" => Ok(NoiseMode::SeededUniform),
            other => Err(Error::Noise(format!("unknown noise mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub mode: NoiseMode,
    pub eps_fixed: f64,
    pub eps_max: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn fixed(eps: f64) -> Self {
        Self {
            mode: NoiseMode::Fixed,
            eps_fixed: eps,
            ..Self::default()
        }
    }

    pub fn seeded_uniform(eps_max: f64, seed: u64) -> Self {
        Self {
            mode: NoiseMode::SeededUniform,
            eps_max,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eps_fixed", self.eps_fixed), ("eps_max", self.eps_max)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Noise(format!("{name} = {v} must lie in [0, 1)")));
            }
        }
        Ok(())
    }

    /// Largest ε this spec can assign to any assortment.
    pub fn max_epsilon(&self) -> f64 {
        match self.mode {
            NoiseMode::None => 0.0,
            NoiseMode::Fixed => self.eps_fixed,
            NoiseMode::SeededUniform => self.eps_max,
        }
    }

    /// ε(M) for this spec.
    pub fn epsilon(&self, m: &Assortment) -> f64 {
        match self.mode {
            NoiseMode::None => 0.0,
            NoiseMode::Fixed => self.eps_fixed,
            NoiseMode::SeededUniform => self.eps_max * unit_hash(self.seed, m),
        }
    }
}

/// Maps `(seed, canonical encoding)` to `[0, 1)` via SHA-256.
fn unit_hash(seed: u64, m: &Assortment) -> f64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(m.encode().as_bytes());
    let digest = h.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    (u64::from_le_bytes(head) >> 11) as f64 / (1u64 << 53) as f64
}

/// Returns `(1 − ε(M)) · base(M)`.
#[derive(Debug, Clone)]
pub struct NoisyOracle<O> {
    base: O,
    spec: NoiseSpec,
}

impl<O: RevenueOracle> NoisyOracle<O> {
    pub fn new(base: O, spec: NoiseSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { base, spec })
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }
}

impl<O: RevenueOracle> RevenueOracle for NoisyOracle<O> {
    fn evaluate(&self, m: &Assortment) -> Result<f64> {
        let r = self.base.evaluate(m)?;
        Ok(match self.spec.mode {
            NoiseMode::None => r,
            _ => (1.0 - self.spec.epsilon(m)) * r,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OracleStats {
    pub call_count: u64,
    pub distinct_count: u64,
}

#[derive(Debug, Default)]
pub struct CallCounter {
    calls: AtomicU64,
    seen: Mutex<HashSet<Assortment>>,
}

impl CallCounter {
    pub fn snapshot(&self) -> OracleStats {
        let seen = self.seen.lock().expect("counter lock poisoned");
        OracleStats {
            call_count: self.calls.load(Ordering::SeqCst),
            distinct_count: seen.len() as u64,
        }
    }

    fn record(&self, m: &Assortment) {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let mut seen = self.seen.lock().expect("counter lock poisoned");
        if !seen.contains(m) {
            seen.insert(m.clone());
        }
    }
}

/// Forwards to `base` and tallies every call.
#[derive(Debug)]
pub struct CountingOracle<O> {
    base: O,
    counter: Arc<CallCounter>,
}

impl<O: RevenueOracle> CountingOracle<O> {
    /// Returns the wrapper and a shared handle to its statistics.
    pub fn new(base: O) -> (Self, Arc<CallCounter>) {
        let counter = Arc::new(CallCounter::default());
        (
            Self {
                base,
                counter: Arc::clone(&counter),
            },
            counter,
        )
    }

    pub fn stats(&self) -> OracleStats {
        self.counter.snapshot()
    }
}

impl<O: RevenueOracle> RevenueOracle for CountingOracle<O> {
    fn evaluate(&self, m: &Assortment) -> Result<f64> {
        self.counter.record(m);
        self.base.evaluate(m)
    }
}
