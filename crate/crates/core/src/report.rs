//! Self-describing run reports and their replay.

use serde::{Deserialize, Serialize};

use crate::analysis::{
    check_proposition1, check_trace_invariants, compute_bounds, max_extended_size, GapBound,
    Proposition1Report, TraceViolation,
};
use crate::choice::{mnl_revenue, CountingOracle, ExactOracle, Instance, NoiseMode, NoiseSpec, NoisyOracle};
use crate::error::{Error, Result};
use crate::greedy::{call_bound, greedy_opt, GreedyConfig, SolveReport};
use crate::io::InstanceFile;
use crate::reference::{brute_force_opt, ExactSolution};

pub const REPORT_SCHEMA_VERSION: &str = "1";

/// Relative tolerance for "greedy equals the optimum".
pub const EXACT_RTOL: f64 = 1e-9;

/// Revenue-order pairs sampled from each trace.
const PROPOSITION1_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSection {
    /// Slack used for the trace checks: 0 for exact oracles, otherwise the
    /// `W_C^max·ε/(1 − ε)` bound.
    pub delta_c: f64,
    pub trace_violations: Vec<TraceViolation>,
    pub proposition1: Vec<Proposition1Report>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: String,
    pub instance_digest: String,
    pub instance: InstanceFile,
    pub config: GreedyConfig,
    pub noise: NoiseSpec,
    pub result: SolveReport,
    /// Exact MNL revenue of the returned assortment, even for noisy runs.
    pub true_revenue: f64,
    pub call_bound: u128,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactSolution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<GapBound>,
    /// Budget the noisy guarantee asks for, `C̄(2δ_C) + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required_budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisSection>,
    pub failures: Vec<String>,
    pub status: Status,
    pub timing_ms: u64,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        serde_json::from_slice(bytes).map_err(|e| Error::Schema(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOptions {
    pub trace: bool,
    /// Brute-force the optimum and report the gap and bounds.
    pub exact: bool,
}

/// Solves `file` with the given settings and assembles a report, including
/// every check whose hypotheses hold for this run.
pub fn solve(file: &InstanceFile, config: GreedyConfig, noise: NoiseSpec, options: SolveOptions) -> Result<RunReport> {
    let started = std::time::Instant::now();
    let instance = file.to_instance()?;
    let universe = instance.ids();
    config.validate(universe.len())?;
    let exact_oracle = ExactOracle::new(&instance);
    let noisy = NoisyOracle::new(exact_oracle, noise)?;
    let (oracle, counter) = CountingOracle::new(noisy);
    let result = greedy_opt(&config, &universe, &oracle, options.trace)?;
    let calls = counter.snapshot().call_count;
    if calls != result.oracle_calls {
        return Err(Error::Assertion(format!(
            "solver reported {} oracle calls but the counter saw {calls}",
            result.oracle_calls
        )));
    }

    let mut report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION.to_string(),
        instance_digest: file.digest()?,
        instance: file.canonical()?,
        config,
        noise,
        true_revenue: mnl_revenue(&instance, &result.best_assortment)?,
        call_bound: call_bound(universe.len(), &config),
        result,
        exact: None,
        gap: None,
        bounds: None,
        required_budget: None,
        analysis: None,
        failures: Vec::new(),
        status: Status::Pass,
        timing_ms: 0,
    };

    if options.exact {
        let opt = brute_force_opt(&exact_oracle, &universe, config.capacity)?;
        let bounds = compute_bounds(&instance, config.capacity, noise.max_epsilon(), &opt)?;
        report.gap = Some(relative_gap(opt.revenue, report.true_revenue));
        if noise.mode != NoiseMode::None {
            report.required_budget = Some(max_extended_size(&instance, config.capacity, 2.0 * bounds.delta_c) + 1);
        }
        report.bounds = Some(bounds);
        report.exact = Some(opt);
    }
    if options.trace {
        report.analysis = Some(analyse(&instance, &report)?);
    }
    report.failures = evaluate_checks(&instance, &report)?;
    report.status = if report.failures.is_empty() {
        Status::Pass
    } else {
        Status::Fail
    };
    report.timing_ms = started.elapsed().as_millis() as u64;
    Ok(report)
}

pub fn relative_gap(optimum: f64, achieved: f64) -> f64 {
    if optimum == 0.0 {
        0.0
    } else {
        (optimum - achieved) / optimum
    }
}

fn trace_delta(instance: &Instance, report: &RunReport) -> f64 {
    let eps = report.noise.max_epsilon();
    if eps == 0.0 {
        0.0
    } else {
        instance.max_weight_mass(report.config.capacity) * eps / (1.0 - eps)
    }
}

fn analyse(instance: &Instance, report: &RunReport) -> Result<AnalysisSection> {
    let delta_c = trace_delta(instance, report);
    let traces = report.result.traces.as_deref().unwrap_or_default();
    let mut trace_violations = Vec::new();
    let mut proposition1 = Vec::new();
    for t in traces {
        trace_violations.extend(check_trace_invariants(instance, &t.records, delta_c)?);
        for rec in &t.records {
            if proposition1.len() >= PROPOSITION1_SAMPLES {
                break;
            }
            proposition1.push(check_proposition1(instance, &rec.assortment_after, &rec.assortment_before)?);
        }
    }
    Ok(AnalysisSection {
        delta_c,
        trace_violations,
        proposition1,
    })
}

/// Every check that applies to the report, as human-readable failures.
fn evaluate_checks(instance: &Instance, report: &RunReport) -> Result<Vec<String>> {
    let mut failures = Vec::new();
    let config = &report.config;
    if config.capacity > config.seed_size && report.result.oracle_calls as u128 > report.call_bound {
        failures.push(format!(
            "oracle calls {} exceed the analytic bound {}",
            report.result.oracle_calls, report.call_bound
        ));
    }
    let loop_cap = instance.len() * config.exchange_budget as usize + 1;
    if report.result.max_loop_iterations > loop_cap {
        failures.push(format!(
            "an add-exchange invocation ran {} iterations, above N*b + 1 = {loop_cap}",
            report.result.max_loop_iterations
        ));
    }
    if report.result.best_assortment.len() > config.capacity {
        failures.push("returned assortment exceeds capacity".into());
    }
    if let (Some(gap), Some(bounds)) = (report.gap, report.bounds) {
        let exact_run = report.noise.max_epsilon() == 0.0;
        if exact_run && config.exchange_budget as usize > config.capacity && gap > EXACT_RTOL {
            failures.push(format!("exact oracle with b >= C+1 missed the optimum (relative gap {gap:e})"));
        }
        let budget_ok = report
            .required_budget
            .is_some_and(|need| config.exchange_budget as usize >= need.max(config.capacity + 1));
        if !exact_run && budget_ok && !bounds.is_vacuous() && gap > bounds.f_value {
            failures.push(format!(
                "relative gap {gap:e} exceeds the noise bound f = {:e}",
                bounds.f_value
            ));
        }
    }
    if let Some(a) = &report.analysis {
        if !a.trace_violations.is_empty() {
            failures.push(format!("{} trace invariant violations", a.trace_violations.len()));
        }
        let bad = a.proposition1.iter().filter(|p| !p.agrees).count();
        if bad > 0 {
            failures.push(format!("{bad} transform/revenue order disagreements"));
        }
    }
    Ok(failures)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub recorded_status: Status,
    pub replayed_status: Status,
    pub problems: Vec<String>,
}

impl VerifyOutcome {
    pub fn ok(&self) -> bool {
        self.problems.is_empty() && self.replayed_status == Status::Pass
    }
}

/// Re-runs the solve recorded in `report` from its embedded instance and
/// settings, then checks that everything except timing matches.
pub fn verify(report: &RunReport) -> Result<VerifyOutcome> {
    let mut problems = Vec::new();
    if report.instance.digest()? != report.instance_digest {
        problems.push("instance digest does not match the embedded instance".to_string());
    }
    let options = SolveOptions {
        trace: report.result.traces.is_some(),
        exact: report.exact.is_some(),
    };
    let mut replay = solve(&report.instance, report.config, report.noise, options)?;
    replay.timing_ms = report.timing_ms;
    if replay.result != report.result {
        problems.push("re-solving produced a different result or trace".into());
    }
    if replay.exact != report.exact || replay.gap != report.gap || replay.bounds != report.bounds {
        problems.push("exact solution, gap or bounds differ on replay".into());
    }
    if replay.analysis != report.analysis {
        problems.push("trace analysis differs on replay".into());
    }
    if replay.failures != report.failures {
        problems.push(format!(
            "recorded failures {:?} but replay found {:?}",
            report.failures, replay.failures
        ));
    }
    Ok(VerifyOutcome {
        recorded_status: report.status,
        replayed_status: replay.status,
        problems,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{generate_instance, GeneratorSpec};
    use std::collections::BTreeMap;

    fn file(n: usize, seed: u64) -> InstanceFile {
        let inst = generate_instance(&GeneratorSpec::new(n, seed)).unwrap();
        InstanceFile::from_instance(&inst, BTreeMap::new())
    }

    #[test]
    fn exact_run_passes_and_verifies() {
        let f = file(6, 3);
        let opts = SolveOptions { trace: true, exact: true };
        let rep = solve(&f, GreedyConfig::new(0, 3, 4), NoiseSpec::none(), opts).unwrap();
        assert_eq!(rep.status, Status::Pass, "{:?}", rep.failures);
        assert!(rep.gap.unwrap().abs() <= EXACT_RTOL);
        let analysis = rep.analysis.as_ref().unwrap();
        assert_eq!(analysis.delta_c, 0.0);
        assert!(!analysis.proposition1.is_empty());

        let back = RunReport::from_json(rep.to_json().as_bytes()).unwrap();
        assert_eq!(back, rep);
        let v = verify(&back).unwrap();
        assert!(v.ok(), "{:?}", v.problems);
    }

    #[test]
    fn noisy_run_reports_bounds() {
        let f = file(7, 8);
        let opts = SolveOptions { trace: true, exact: true };
        let rep = solve(&f, GreedyConfig::new(0, 3, 8), NoiseSpec::seeded_uniform(0.01, 5), opts).unwrap();
        assert_eq!(rep.status, Status::Pass, "{:?}", rep.failures);
        assert!(rep.bounds.unwrap().delta_c > 0.0);
        assert!(rep.required_budget.is_some());
        assert!(rep.analysis.unwrap().delta_c > 0.0);
    }

    #[test]
    fn tampered_report_fails_verification() {
        let f = file(5, 1);
        let mut rep = solve(&f, GreedyConfig::new(0, 2, 3), NoiseSpec::none(), SolveOptions::default()).unwrap();
        rep.result.best_oracle_revenue += 1.0;
        let v = verify(&rep).unwrap();
        assert!(!v.ok());
        rep.instance_digest = "00".into();
        assert!(verify(&rep).unwrap().problems.len() >= 2);
    }
}
