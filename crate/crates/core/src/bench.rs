//! Seeded benchmark sweeps over `(N, C, b, ε)` grids.
//!
//! Every case derives its instance and noise seeds from the base seed and its
//! position in the sweep, so results do not depend on scheduling.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{check_trace_invariants, compute_bounds, max_extended_size};
use crate::choice::{mnl_revenue, CountingOracle, ExactOracle, NoiseSpec, NoisyOracle};
use crate::error::Result;
use crate::greedy::{call_bound, greedy_opt, GreedyConfig};
use crate::io::{derive_seed, generate_instance, GeneratorSpec};
use crate::reference::brute_force_opt;
use crate::report::{relative_gap, EXACT_RTOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetRule {
    /// `b = C`
    Capacity,
    /// `b = C + 1`
    CapacityPlusOne,
    /// `b = 2C`
    TwiceCapacity,
    /// `b = max(C + 1, C̄(2δ_C) + 1)`
    NoiseAware,
}

impl BudgetRule {
    fn resolve(self, capacity: usize, noise_aware: impl FnOnce() -> usize) -> usize {
        match self {
            BudgetRule::Capacity => capacity.max(1),
            BudgetRule::CapacityPlusOne => capacity + 1,
            BudgetRule::TwiceCapacity => (2 * capacity).max(1),
            BudgetRule::NoiseAware => (capacity + 1).max(noise_aware()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchCase {
    pub index: u64,
    pub n: usize,
    pub capacity: usize,
    pub budget_rule: BudgetRule,
    pub eps_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Grid,
    Theorem1,
    Theorem2,
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "grid" => Ok(Suite::Grid),
            "theorem1" => Ok(Suite::Theorem1),
            "theorem2" => Ok(Suite::Theorem2),
            other => Err(format!("unknown suite {other:?} (expected grid, theorem1 or theorem2)")),
        }
    }
}

/// Cases for a named suite. `seeds` overrides the per-cell (grid) or total
/// (theorem suites) instance count.
pub fn suite_cases(suite: Suite, seeds: Option<u64>) -> Vec<BenchCase> {
    let mut cases = Vec::new();
    let mut push = |n, capacity, budget_rule, eps_max| {
        let index = cases.len() as u64;
        cases.push(BenchCase {
            index,
            n,
            capacity,
            budget_rule,
            eps_max,
        });
    };
    match suite {
        Suite::Grid => {
            let per_cell = seeds.unwrap_or(50);
            for n in [6, 8, 10] {
                for c in [2, 3, 4] {
                    for rule in [
                        BudgetRule::Capacity,
                        BudgetRule::CapacityPlusOne,
                        BudgetRule::TwiceCapacity,
                    ] {
                        for eps in [0.0, 0.001, 0.01] {
                            for _ in 0..per_cell {
                                push(n, c, rule, eps);
                            }
                        }
                    }
                }
            }
        }
        Suite::Theorem1 => {
            for i in 0..seeds.unwrap_or(200) as usize {
                push([6, 8, 10][i % 3], [2, 3, 4][(i / 3) % 3], BudgetRule::CapacityPlusOne, 0.0);
            }
        }
        Suite::Theorem2 => {
            for i in 0..seeds.unwrap_or(100) {
                let eps = if i % 2 == 0 { 0.001 } else { 0.01 };
                push(8, 3, BudgetRule::NoiseAware, eps);
            }
        }
    }
    cases
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case: BenchCase,
    pub instance_seed: u64,
    pub noise_seed: u64,
    pub budget: usize,
    pub optimum: f64,
    pub greedy_true_revenue: f64,
    pub gap: f64,
    pub oracle_calls: u64,
    pub call_bound: u128,
    pub max_loop_iterations: usize,
    pub f_value: f64,
    /// Budget the noisy guarantee asks for, `C̄(2δ_C) + 1`.
    pub required_budget: usize,
    pub trace_violations: usize,
}

impl CaseResult {
    pub fn theorem1_applies(&self) -> bool {
        self.case.eps_max == 0.0 && self.budget > self.case.capacity
    }

    pub fn theorem1_pass(&self) -> bool {
        self.gap <= EXACT_RTOL
    }

    pub fn theorem2_applies(&self) -> bool {
        self.case.eps_max > 0.0
            && self.budget >= self.required_budget.max(self.case.capacity + 1)
            && self.f_value < 1.0
    }

    pub fn theorem2_vacuous(&self) -> bool {
        self.case.eps_max > 0.0 && self.f_value >= 1.0
    }

    pub fn call_bound_ok(&self) -> bool {
        self.oracle_calls as u128 <= self.call_bound
    }
}

pub fn run_case(case: &BenchCase, base_seed: u64) -> Result<CaseResult> {
    let instance_seed = derive_seed(base_seed, 2 * case.index);
    let noise_seed = derive_seed(base_seed, 2 * case.index + 1);
    let instance = generate_instance(&GeneratorSpec::new(case.n, instance_seed).with_capacity(case.capacity))?;
    let universe = instance.ids();
    let exact = ExactOracle::new(&instance);
    let opt = brute_force_opt(&exact, &universe, case.capacity)?;
    let bounds = compute_bounds(&instance, case.capacity, case.eps_max, &opt)?;
    let required_budget = max_extended_size(&instance, case.capacity, 2.0 * bounds.delta_c) + 1;
    let budget = case.budget_rule.resolve(case.capacity, || required_budget);

    let config = GreedyConfig::new(0, case.capacity, budget as u32);
    let noise = if case.eps_max == 0.0 {
        NoiseSpec::none()
    } else {
        NoiseSpec::seeded_uniform(case.eps_max, noise_seed)
    };
    let (oracle, counter) = CountingOracle::new(NoisyOracle::new(exact, noise)?);
    let report = greedy_opt(&config, &universe, &oracle, true)?;
    let greedy_true_revenue = mnl_revenue(&instance, &report.best_assortment)?;
    let delta = if case.eps_max == 0.0 { 0.0 } else { bounds.delta_c };
    let mut trace_violations = 0;
    for t in report.traces.as_deref().unwrap_or_default() {
        trace_violations += check_trace_invariants(&instance, &t.records, delta)?.len();
    }
    Ok(CaseResult {
        case: *case,
        instance_seed,
        noise_seed,
        budget,
        optimum: opt.revenue,
        greedy_true_revenue,
        gap: relative_gap(opt.revenue, greedy_true_revenue),
        oracle_calls: counter.snapshot().call_count,
        call_bound: call_bound(universe.len(), &config),
        max_loop_iterations: report.max_loop_iterations,
        f_value: bounds.f_value,
        required_budget,
        trace_violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub n: usize,
    pub capacity: usize,
    pub budget_rule: BudgetRule,
    pub eps_max: f64,
    pub cases: usize,
    pub max_gap: f64,
    pub max_calls: u64,
    pub max_call_bound: u128,
    pub call_bound_violations: usize,
    pub theorem1_cases: usize,
    pub theorem1_passes: usize,
    pub theorem2_cases: usize,
    pub theorem2_violations: usize,
    pub vacuous: usize,
    pub trace_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub suite: Suite,
    pub base_seed: u64,
    pub cells: Vec<CellSummary>,
    pub theorem1_cases: usize,
    pub theorem1_passes: usize,
    pub theorem2_cases: usize,
    pub theorem2_violations: usize,
    pub vacuous: usize,
    pub call_bound_violations: usize,
    pub trace_violations: usize,
    pub cases: Vec<CaseResult>,
}

impl BenchSummary {
    pub fn passed(&self) -> bool {
        self.theorem1_passes == self.theorem1_cases
            && self.theorem2_violations == 0
            && self.call_bound_violations == 0
            && self.trace_violations == 0
    }

    pub fn theorem1_pass_rate(&self) -> f64 {
        if self.theorem1_cases == 0 {
            1.0
        } else {
            self.theorem1_passes as f64 / self.theorem1_cases as f64
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>3} {:>2} {:<18} {:>6} {:>5} {:>10} {:>9} {:>12} {:>9} {:>9} {:>5}",
            "N", "C", "b", "eps", "cases", "max_gap", "max_calls", "call_bound", "thm1", "thm2_viol", "vac"
        );
        for c in &self.cells {
            let thm1 = if c.theorem1_cases == 0 {
                "-".to_string()
            } else {
                format!("{}/{}", c.theorem1_passes, c.theorem1_cases)
            };
            let _ = writeln!(
                out,
                "{:>3} {:>2} {:<18} {:>6} {:>5} {:>10.3e} {:>9} {:>12} {:>9} {:>9} {:>5}",
                c.n,
                c.capacity,
                format!("{:?}", c.budget_rule),
                c.eps_max,
                c.cases,
                c.max_gap,
                c.max_calls,
                c.max_call_bound,
                thm1,
                c.theorem2_violations,
                c.vacuous
            );
        }
        let _ = writeln!(
            out,
            "theorem1 pass rate: {}/{} ({:.1}%)",
            self.theorem1_passes,
            self.theorem1_cases,
            100.0 * self.theorem1_pass_rate()
        );
        let _ = writeln!(
            out,
            "theorem2 violations: {} of {} non-vacuous cases ({} vacuous)",
            self.theorem2_violations, self.theorem2_cases, self.vacuous
        );
        let _ = writeln!(out, "call bound violations: {}", self.call_bound_violations);
        let _ = writeln!(out, "trace invariant violations: {}", self.trace_violations);
        out
    }
}

pub fn run_suite(suite: Suite, seeds: Option<u64>, base_seed: u64) -> Result<BenchSummary> {
    let cases = suite_cases(suite, seeds);
    let results: Vec<CaseResult> = cases
        .par_iter()
        .map(|c| run_case(c, base_seed))
        .collect::<Result<_>>()?;
    Ok(summarize(suite, base_seed, results))
}

fn summarize(suite: Suite, base_seed: u64, cases: Vec<CaseResult>) -> BenchSummary {
    let mut cells: Vec<CellSummary> = Vec::new();
    for r in &cases {
        let key = (r.case.n, r.case.capacity, r.case.budget_rule, r.case.eps_max);
        let pos = cells
            .iter()
            .position(|c| (c.n, c.capacity, c.budget_rule, c.eps_max) == key);
        let cell = match pos {
            Some(p) => &mut cells[p],
            None => {
                cells.push(CellSummary {
                    n: key.0,
                    capacity: key.1,
                    budget_rule: key.2,
                    eps_max: key.3,
                    cases: 0,
                    max_gap: 0.0,
                    max_calls: 0,
                    max_call_bound: 0,
                    call_bound_violations: 0,
                    theorem1_cases: 0,
                    theorem1_passes: 0,
                    theorem2_cases: 0,
                    theorem2_violations: 0,
                    vacuous: 0,
                    trace_violations: 0,
                });
                cells.last_mut().expect("just pushed")
            }
        };
        cell.cases += 1;
        cell.max_gap = cell.max_gap.max(r.gap);
        cell.max_calls = cell.max_calls.max(r.oracle_calls);
        cell.max_call_bound = cell.max_call_bound.max(r.call_bound);
        cell.call_bound_violations += usize::from(!r.call_bound_ok());
        if r.theorem1_applies() {
            cell.theorem1_cases += 1;
            cell.theorem1_passes += usize::from(r.theorem1_pass());
        }
        if r.theorem2_applies() {
            cell.theorem2_cases += 1;
            cell.theorem2_violations += usize::from(r.gap > r.f_value);
        }
        cell.vacuous += usize::from(r.theorem2_vacuous());
        cell.trace_violations += r.trace_violations;
    }
    BenchSummary {
        suite,
        base_seed,
        theorem1_cases: cells.iter().map(|c| c.theorem1_cases).sum(),
        theorem1_passes: cells.iter().map(|c| c.theorem1_passes).sum(),
        theorem2_cases: cells.iter().map(|c| c.theorem2_cases).sum(),
        theorem2_violations: cells.iter().map(|c| c.theorem2_violations).sum(),
        vacuous: cells.iter().map(|c| c.vacuous).sum(),
        call_bound_violations: cells.iter().map(|c| c.call_bound_violations).sum(),
        trace_violations: cells.iter().map(|c| c.trace_violations).sum(),
        cells,
        cases,
    }
}
