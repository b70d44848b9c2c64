//! Greedy add-exchange local search and the seeded outer loop built on it.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::choice::{Assortment, ProductId, RevenueOracle};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyConfig {
    /// Size of the seed assortments enumerated by the outer loop (`S`).
    pub seed_size: usize,
    /// Capacity `C`.
    pub capacity: usize,
    /// Maximum number of exchange-outs per product (`b`).
    pub exchange_budget: u32,
}

impl GreedyConfig {
    pub fn new(seed_size: usize, capacity: usize, exchange_budget: u32) -> Self {
        Self {
            seed_size,
            capacity,
            exchange_budget,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.seed_size > self.capacity {
            return Err(Error::Config(format!(
                "seed size S = {} exceeds capacity C = {}",
                self.seed_size, self.capacity
            )));
        }
        if self.capacity > n {
            return Err(Error::Config(format!(
                "capacity C = {} exceeds universe size N = {n}",
                self.capacity
            )));
        }
        if self.exchange_budget < 1 {
            return Err(Error::Config("exchange budget b must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Add,
    Exchange,
    Terminate,
}

/// One pass of the add-exchange while loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Which add-exchange invocation (0-based, within one seed) produced this step.
    pub invocation: usize,
    pub step_index: usize,
    pub action: Action,
    pub added: Option<ProductId>,
    pub removed: Option<ProductId>,
    /// Oracle value of `assortment_after`.
    pub revenue_after: f64,
    pub assortment_before: Assortment,
    pub assortment_after: Assortment,
    /// Candidate pool at the start of the step.
    pub pool_before: Vec<ProductId>,
    pub universe_size_after: usize,
    pub exchange_out_counts: BTreeMap<ProductId, u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedTrace {
    pub seed: Assortment,
    pub records: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub best_assortment: Assortment,
    pub best_oracle_revenue: f64,
    pub oracle_calls: u64,
    pub seeds_explored: u64,
    /// Largest number of while-loop iterations seen in one add-exchange invocation.
    pub max_loop_iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traces: Option<Vec<SeedTrace>>,
}

/// Result of a single add-exchange invocation.
#[derive(Debug, Clone)]
pub struct AddExchangeOutcome {
    pub assortment: Assortment,
    pub revenue: f64,
    pub oracle_calls: u64,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
}

struct Search<'o, O: ?Sized> {
    oracle: &'o O,
    calls: u64,
}

impl<O: RevenueOracle + ?Sized> Search<'_, O> {
    fn eval(&mut self, m: &Assortment) -> Result<f64> {
        self.calls += 1;
        self.oracle.evaluate(m)
    }
}

/// Runs one invocation of the add-exchange loop starting from `m0`.
///
/// At most one net addition happens. Every accepted move strictly increases
/// the oracle revenue of the current assortment. A product exchanged out
/// `budget` times is retired from the candidate pool for good.
pub fn greedy_add_exchange<O: RevenueOracle + ?Sized>(
    m0: &Assortment,
    universe: &[ProductId],
    budget: u32,
    oracle: &O,
    trace: bool,
) -> Result<AddExchangeOutcome> {
    add_exchange_from(m0, None, universe, budget, oracle, trace, 0)
}

fn add_exchange_from<O: RevenueOracle + ?Sized>(
    m0: &Assortment,
    known_revenue: Option<f64>,
    universe: &[ProductId],
    budget: u32,
    oracle: &O,
    trace: bool,
    invocation: usize,
) -> Result<AddExchangeOutcome> {
    if budget < 1 {
        return Err(Error::Config("exchange budget b must be at least 1".into()));
    }
    let universe_set: BTreeSet<ProductId> = universe.iter().copied().collect();
    if let Some(id) = m0.ids().iter().find(|id| !universe_set.contains(id)) {
        return Err(Error::Config(format!(
            "initial assortment member {id} is outside the universe"
        )));
    }

    let mut search = Search { oracle, calls: 0 };
    let mut pool: BTreeSet<ProductId> = universe_set
        .iter()
        .copied()
        .filter(|id| !m0.contains(*id))
        .collect();
    let size_cap = m0.len() + 1;
    let mut current = m0.clone();
    let mut current_rev = match known_revenue {
        Some(r) => r,
        None => search.eval(&current)?,
    };
    let mut outs: BTreeMap<ProductId, u32> = BTreeMap::new();
    let mut records = Vec::new();
    let mut iterations = 0;

    while !pool.is_empty() {
        iterations += 1;
        let before = current.clone();
        let pool_before: Vec<ProductId> = if trace {
            pool.iter().copied().collect()
        } else {
            Vec::new()
        };

        // Best exchange: smallest entering id, then smallest leaving id.
        let mut best_exchange: Option<(ProductId, ProductId, Assortment, f64)> = None;
        for &j in &pool {
            for &i in current.ids() {
                let cand = current.exchange(i, j);
                let r = search.eval(&cand)?;
                if best_exchange.as_ref().is_none_or(|(_, _, _, br)| r > *br) {
                    best_exchange = Some((i, j, cand, r));
                }
            }
        }

        let mut best_add: Option<(ProductId, Assortment, f64)> = None;
        if current.len() < size_cap {
            for &k in &pool {
                let cand = current.with(k);
                let r = search.eval(&cand)?;
                if best_add.as_ref().is_none_or(|(_, _, br)| r > *br) {
                    best_add = Some((k, cand, r));
                }
            }
        }

        let take_add = match (&best_add, &best_exchange) {
            (Some((_, _, ra)), Some((_, _, _, re))) => *ra > current_rev && *ra > *re,
            (Some((_, _, ra)), None) => *ra > current_rev,
            _ => false,
        };

        let (action, added, removed) = if take_add {
            let (k, cand, r) = best_add.expect("checked above");
            current = cand;
            current_rev = r;
            pool.remove(&k);
            (Action::Add, Some(k), None)
        } else if let Some((i, j, cand, r)) =
            best_exchange.filter(|(_, _, _, r)| *r > current_rev)
        {
            current = cand;
            current_rev = r;
            let count = outs.entry(i).or_insert(0);
            *count += 1;
            pool.remove(&j);
            if *count < budget {
                pool.insert(i);
            }
            (Action::Exchange, Some(j), Some(i))
        } else {
            (Action::Terminate, None, None)
        };

        if trace {
            records.push(IterationRecord {
                invocation,
                step_index: records.len(),
                action,
                added,
                removed,
                revenue_after: current_rev,
                assortment_before: before,
                assortment_after: current.clone(),
                pool_before,
                universe_size_after: pool.len(),
                exchange_out_counts: outs.clone(),
            });
        }
        if action == Action::Terminate {
            break;
        }
    }

    Ok(AddExchangeOutcome {
        assortment: current,
        revenue: current_rev,
        oracle_calls: search.calls,
        iterations,
        trace: records,
    })
}

/// All `k`-subsets of `items` in lexicographic order.
pub(crate) fn combinations(items: &[ProductId], k: usize) -> Vec<Assortment> {
    let n = items.len();
    if k > n {
        return Vec::new();
    }
    let mut sorted = items.to_vec();
    sorted.sort_unstable();
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(Assortment::from_sorted_unchecked(
            idx.iter().map(|&i| sorted[i]).collect(),
        ));
        // rightmost index that can still advance
        let mut pos = k;
        while pos > 0 && idx[pos - 1] == pos - 1 + n - k {
            pos -= 1;
        }
        if pos == 0 {
            return out;
        }
        idx[pos - 1] += 1;
        for q in pos..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Analytic ceiling on oracle calls for one add-exchange invocation:
/// `(N·b + 1)·(C·N + N)`.
pub fn invocation_call_bound(n: usize, capacity: usize, budget: u32) -> u128 {
    let n = n as u128;
    (n * budget as u128 + 1) * (capacity as u128 * n + n)
}

/// Analytic ceiling on oracle calls for a full run:
/// `(C − S)·binom(N, S)·(N·b + 1)·(C·N + N)`.
pub fn call_bound(n: usize, config: &GreedyConfig) -> u128 {
    let rounds = config.capacity.saturating_sub(config.seed_size) as u128;
    rounds
        * binomial(n as u64, config.seed_size as u64)
        * invocation_call_bound(n, config.capacity, config.exchange_budget)
}

struct SeedResult {
    assortment: Assortment,
    revenue: f64,
    calls: u64,
    max_iterations: usize,
    trace: Option<SeedTrace>,
}

fn run_seed<O: RevenueOracle + ?Sized>(
    seed: &Assortment,
    config: &GreedyConfig,
    universe: &[ProductId],
    oracle: &O,
    trace: bool,
) -> Result<SeedResult> {
    let mut m = seed.clone();
    let mut revenue = None;
    let mut calls = 0;
    let mut max_iterations = 0;
    let mut records = Vec::new();
    for invocation in 0..config.capacity - config.seed_size {
        let out = add_exchange_from(
            &m,
            revenue,
            universe,
            config.exchange_budget,
            oracle,
            trace,
            invocation,
        )?;
        calls += out.oracle_calls;
        max_iterations = max_iterations.max(out.iterations);
        records.extend(out.trace);
        m = out.assortment;
        revenue = Some(out.revenue);
    }
    let revenue = match revenue {
        Some(r) => r,
        None => {
            calls += 1;
            oracle.evaluate(&m)?
        }
    };
    Ok(SeedResult {
        assortment: m,
        revenue,
        calls,
        max_iterations,
        trace: trace.then(|| SeedTrace {
            seed: seed.clone(),
            records,
        }),
    })
}

/// Enumerates every size-`S` seed, grows each with `C − S` add-exchange
/// invocations, and keeps the best final assortment. Ties go to the
/// lexicographically smallest assortment, so serial and parallel runs agree.
pub fn greedy_opt<O: RevenueOracle + ?Sized>(
    config: &GreedyConfig,
    universe: &[ProductId],
    oracle: &O,
    trace: bool,
) -> Result<SolveReport> {
    config.validate(universe.len())?;
    let seeds = combinations(universe, config.seed_size);
    let results: Vec<SeedResult> = seeds
        .par_iter()
        .map(|seed| run_seed(seed, config, universe, oracle, trace))
        .collect::<Result<_>>()?;

    let mut best: Option<&SeedResult> = None;
    for r in &results {
        let better = match best {
            None => true,
            Some(b) => r.revenue > b.revenue || (r.revenue == b.revenue && r.assortment < b.assortment),
        };
        if better {
            best = Some(r);
        }
    }
    let best = best.expect("at least one seed");
    Ok(SolveReport {
        best_assortment: best.assortment.clone(),
        best_oracle_revenue: best.revenue,
        oracle_calls: results.iter().map(|r| r.calls).sum(),
        seeds_explored: results.len() as u64,
        max_loop_iterations: results.iter().map(|r| r.max_iterations).max().unwrap_or(0),
        traces: trace.then(|| results.iter().filter_map(|r| r.trace.clone()).collect()),
    })
}

/// Pure-addition baseline: repeatedly adds the single best product while that
/// strictly improves revenue, up to `capacity` products.
pub fn naive_greedy<O: RevenueOracle + ?Sized>(
    capacity: usize,
    universe: &[ProductId],
    oracle: &O,
) -> Result<Assortment> {
    if capacity > universe.len() {
        return Err(Error::Config(format!(
            "capacity C = {capacity} exceeds universe size N = {}",
            universe.len()
        )));
    }
    let mut ids = universe.to_vec();
    ids.sort_unstable();
    let mut current = Assortment::empty();
    let mut current_rev = oracle.evaluate(&current)?;
    while current.len() < capacity {
        let mut best: Option<(Assortment, f64)> = None;
        for &k in ids.iter().filter(|k| !current.contains(**k)) {
            let cand = current.with(k);
            let r = oracle.evaluate(&cand)?;
            if best.as_ref().is_none_or(|(_, br)| r > *br) {
                best = Some((cand, r));
            }
        }
        match best {
            Some((cand, r)) if r > current_rev => {
                current = cand;
                current_rev = r;
            }
            _ => break,
        }
    }
    Ok(current)
}
