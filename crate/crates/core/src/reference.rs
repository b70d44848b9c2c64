//! Exact solvers used as ground truth: exhaustive enumeration, the MNL
//! candidate-collection solver, and a search for instances where optimal
//! assortments fail to nest.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{breakpoints, sample_points, top_set};
use crate::choice::{mnl_revenue, Assortment, ExactOracle, Instance, ProductId, RevenueOracle};
use crate::error::{Error, Result};
use crate::greedy::{binomial, combinations};
use crate::io::{derive_seed, generate_instance, GeneratorSpec, InstanceFile};

pub const DEFAULT_ENUMERATION_CAP: u64 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeOptimum {
    pub size: usize,
    pub assortment: Assortment,
    pub revenue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSolution {
    pub assortment: Assortment,
    pub revenue: f64,
    /// Entry `k` is the best assortment of size at most `k`, for `k = 0..=C`.
    pub per_size_optima: Vec<SizeOptimum>,
}

impl ExactSolution {
    pub fn optimum_for(&self, size: usize) -> Option<(&Assortment, f64)> {
        self.per_size_optima
            .get(size)
            .map(|o| (&o.assortment, o.revenue))
    }
}

fn better(r: f64, m: &Assortment, best: &Option<(Assortment, f64)>) -> bool {
    match best {
        None => true,
        Some((bm, br)) => r > *br || (r == *br && m < bm),
    }
}

pub fn brute_force_opt<O: RevenueOracle + ?Sized>(
    oracle: &O,
    universe: &[ProductId],
    capacity: usize,
) -> Result<ExactSolution> {
    brute_force_opt_capped(oracle, universe, capacity, DEFAULT_ENUMERATION_CAP)
}

/// Evaluates every assortment of size at most `capacity`. Refuses outright
/// when that would exceed `cap` evaluations.
pub fn brute_force_opt_capped<O: RevenueOracle + ?Sized>(
    oracle: &O,
    universe: &[ProductId],
    capacity: usize,
    cap: u64,
) -> Result<ExactSolution> {
    let n = universe.len();
    if capacity > n {
        return Err(Error::Config(format!(
            "capacity C = {capacity} exceeds universe size N = {n}"
        )));
    }
    let count: u128 = (0..=capacity).map(|k| binomial(n as u64, k as u64)).sum();
    if count > cap as u128 {
        return Err(Error::EnumerationCap { count, cap });
    }
    let mut best: Option<(Assortment, f64)> = None;
    let mut per_size_optima = Vec::with_capacity(capacity + 1);
    for k in 0..=capacity {
        for m in combinations(universe, k) {
            let r = oracle.evaluate(&m)?;
            if better(r, &m, &best) {
                best = Some((m, r));
            }
        }
        let (assortment, revenue) = best.clone().expect("size 0 always enumerated");
        per_size_optima.push(SizeOptimum {
            size: k,
            assortment,
            revenue,
        });
    }
    let (assortment, revenue) = best.expect("size 0 always enumerated");
    Ok(ExactSolution {
        assortment,
        revenue,
        per_size_optima,
    })
}

/// Distinct sets `B_s(u)` over all `u ∈ ℝ`, in canonical order.
pub fn candidate_collection(instance: &Instance, s: usize) -> Vec<Assortment> {
    let bps = breakpoints(instance, None);
    let sets: BTreeSet<Assortment> = sample_points(&bps, false)
        .into_iter()
        .map(|u| top_set(instance, s, u))
        .collect();
    sets.into_iter().collect()
}

/// MNL-specific exact solver: the best assortment of size at most `k` is one
/// of the top sets `B_k(u)`, so only those need pricing.
pub fn candidate_set_opt(instance: &Instance, capacity: usize) -> Result<ExactSolution> {
    if capacity > instance.len() {
        return Err(Error::Config(format!(
            "capacity C = {capacity} exceeds universe size N = {}",
            instance.len()
        )));
    }
    let mut per_size_optima = Vec::with_capacity(capacity + 1);
    let mut overall: Option<(Assortment, f64)> = None;
    for k in 0..=capacity {
        let mut best: Option<(Assortment, f64)> = None;
        for m in candidate_collection(instance, k) {
            let r = mnl_revenue(instance, &m)?;
            if better(r, &m, &best) {
                best = Some((m, r));
            }
        }
        // the empty set is always a candidate (u above every price)
        let (assortment, revenue) = best.expect("collection is never empty");
        if better(revenue, &assortment, &overall) {
            overall = Some((assortment.clone(), revenue));
        }
        let (assortment, revenue) = overall.clone().expect("set above");
        per_size_optima.push(SizeOptimum {
            size: k,
            assortment,
            revenue,
        });
    }
    let (assortment, revenue) = overall.expect("capacity 0 always handled");
    Ok(ExactSolution {
        assortment,
        revenue,
        per_size_optima,
    })
}

/// An instance whose size-`c1` optimum is not contained in its size-`c2`
/// optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct NestingWitness {
    pub instance: Instance,
    pub generator: GeneratorSpec,
    pub attempt: u64,
    pub c1: usize,
    pub c2: usize,
    pub opt_c1: Assortment,
    pub opt_c2: Assortment,
}

impl NestingWitness {
    /// Re-derives both optima by brute force and confirms they do not nest.
    pub fn verify(&self) -> Result<bool> {
        let sol = brute_force_opt(&ExactOracle::new(&self.instance), &self.instance.ids(), self.c2)?;
        let (a, _) = sol.optimum_for(self.c1).expect("c1 < c2");
        let (b, _) = sol.optimum_for(self.c2).expect("c2 enumerated");
        Ok(*a == self.opt_c1 && *b == self.opt_c2 && !a.is_subset(b))
    }

    pub fn to_instance_file(&self) -> InstanceFile {
        let mut meta = self.generator.metadata();
        meta.insert("attempt".into(), serde_json::json!(self.attempt));
        let witness: BTreeMap<&str, serde_json::Value> = [
            ("c1", serde_json::json!(self.c1)),
            ("c2", serde_json::json!(self.c2)),
            ("opt_c1", serde_json::json!(self.opt_c1)),
            ("opt_c2", serde_json::json!(self.opt_c2)),
        ]
        .into_iter()
        .collect();
        meta.insert("nesting_witness".into(), serde_json::json!(witness));
        InstanceFile::from_instance(&self.instance, meta)
    }
}

fn nesting_failure(instance: &Instance, generator: GeneratorSpec, attempt: u64, capacity: usize) -> Result<Option<NestingWitness>> {
    let sol = brute_force_opt(&ExactOracle::new(instance), &instance.ids(), capacity)?;
    for c1 in 1..capacity {
        for c2 in (c1 + 1..=capacity).rev() {
            let a = &sol.per_size_optima[c1].assortment;
            let b = &sol.per_size_optima[c2].assortment;
            if !a.is_subset(b) {
                return Ok(Some(NestingWitness {
                    instance: instance.clone(),
                    generator,
                    attempt,
                    c1,
                    c2,
                    opt_c1: a.clone(),
                    opt_c2: b.clone(),
                }));
            }
        }
    }
    Ok(None)
}

/// Samples instances from the default generator (attempt `i` uses child seed
/// `i` of `seed`) and returns the lowest-numbered attempt whose optima fail to
/// nest, if any.
pub fn find_nesting_witness(seed: u64, n: usize, capacity: usize, attempts: u64) -> Result<Option<NestingWitness>> {
    if capacity > n {
        return Err(Error::Config(format!("capacity C = {capacity} exceeds N = {n}")));
    }
    (0..attempts)
        .into_par_iter()
        .map(|attempt| {
            let spec = GeneratorSpec::new(n, derive_seed(seed, attempt)).with_capacity(capacity);
            let instance = generate_instance(&spec)?;
            nesting_failure(&instance, spec, attempt, capacity)
        })
        .find_map_first(|r| match r {
            Ok(None) => None,
            other => Some(other),
        })
        .transpose()
        .map(Option::flatten)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::Product;

    fn three() -> Instance {
        Instance::new(
            vec![
                Product::new(1, 1.0, 10.0),
                Product::new(2, 2.0, 6.0),
                Product::new(3, 0.5, 12.0),
            ],
            None,
        )
        .unwrap()
    }

    fn set(ids: &[ProductId]) -> Assortment {
        Assortment::from_ids(ids.iter().copied()).unwrap()
    }

    #[test]
    fn brute_force_examples() {
        let one = Instance::new(vec![Product::new(1, 1.0, 10.0)], None).unwrap();
        let sol = brute_force_opt(&ExactOracle::new(&one), &[1], 1).unwrap();
        assert_eq!((sol.assortment.clone(), sol.revenue), (set(&[1]), 5.0));

        let inst = three();
        let sol = brute_force_opt(&ExactOracle::new(&inst), &[1, 2, 3], 2).unwrap();
        assert_eq!(sol.assortment, set(&[1, 3]));
        assert!((sol.revenue - 6.4).abs() < 1e-12);
        assert_eq!(sol.per_size_optima.len(), 3);
        assert_eq!(sol.per_size_optima[1].assortment, set(&[1]));

        let sol = brute_force_opt(&ExactOracle::new(&inst), &[1, 2, 3], 0).unwrap();
        assert_eq!((sol.assortment, sol.revenue), (Assortment::empty(), 0.0));
    }

    #[test]
    fn brute_force_refuses_past_cap() {
        let inst = three();
        let err = brute_force_opt_capped(&ExactOracle::new(&inst), &[1, 2, 3], 3, 7).unwrap_err();
        assert!(matches!(err, Error::EnumerationCap { count: 8, cap: 7 }));
        assert!(brute_force_opt_capped(&ExactOracle::new(&inst), &[1, 2, 3], 3, 8).is_ok());
    }

    #[test]
    fn candidate_set_examples() {
        let one = Instance::new(vec![Product::new(1, 1.0, 10.0)], None).unwrap();
        assert_eq!(candidate_set_opt(&one, 1).unwrap().assortment, set(&[1]));

        let sol = candidate_set_opt(&three(), 2).unwrap();
        assert_eq!(sol.assortment, set(&[1, 3]));
        assert!((sol.revenue - 6.4).abs() < 1e-12);

        let same = Instance::new((1..=5).map(|i| Product::new(i, 1.0, 8.0)).collect(), None).unwrap();
        assert_eq!(candidate_set_opt(&same, 3).unwrap().assortment, set(&[1, 2, 3]));
    }

    #[test]
    fn collection_includes_empty_set() {
        let coll = candidate_collection(&three(), 2);
        assert!(coll.contains(&Assortment::empty()));
        assert!(coll.len() <= 3 * 2 + 1);
    }

    #[test]
    fn witness_trivial_cases() {
        assert!(find_nesting_witness(1, 6, 3, 0).unwrap().is_none());
        assert!(find_nesting_witness(1, 1, 1, 20).unwrap().is_none());
        assert!(find_nesting_witness(1, 2, 3, 1).is_err());
    }
}
