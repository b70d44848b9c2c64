//! Revenue transform machinery for MNL instances and the runtime checks built
//! on it.
//!
//! For a fixed offset `u`, the transform of product `i` is the line
//! `h_i(u) = (p_i − u)·w_i`, and the transform of an assortment is
//! `H_M(u) = Σ_{i∈M} h_i(u) = u + w(M)·(R(M) − u)`. Comparing assortments
//! through `H` at a common `u` avoids the MNL denominator, which is what makes
//! the greedy choices easy to reason about.

use serde::{Deserialize, Serialize};

use crate::choice::{mnl_revenue, Assortment, Instance, NoiseSpec, ProductId};
use crate::error::{Error, Result};
use crate::greedy::{combinations, Action, IterationRecord};
use crate::reference::ExactSolution;

/// `h_i(u) = (p_i − u)·w_i`.
pub fn product_transform(instance: &Instance, id: ProductId, u: f64) -> Result<f64> {
    let p = instance.product(id)?;
    Ok((p.price - u) * p.weight)
}

/// `H_M(u) = Σ_{i∈M} h_i(u)`.
pub fn assortment_transform(instance: &Instance, m: &Assortment, u: f64) -> Result<f64> {
    m.ids()
        .iter()
        .map(|&id| product_transform(instance, id, u))
        .sum()
}

fn ranked(instance: &Instance, u: f64) -> Vec<(ProductId, f64)> {
    let mut h: Vec<(ProductId, f64)> = instance
        .products()
        .iter()
        .map(|p| (p.id, (p.price - u) * p.weight))
        .collect();
    h.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    h
}

/// `B_S(u)`: the at most `s` products with the largest positive `h_i(u)`,
/// ties to the smaller id.
pub fn top_set(instance: &Instance, s: usize, u: f64) -> Assortment {
    let ids = ranked(instance, u)
        .into_iter()
        .filter(|&(_, h)| h > 0.0)
        .take(s)
        .map(|(id, _)| id);
    Assortment::from_ids(ids).expect("ids are distinct")
}

/// `B̄_S(δ, u)`: `B_S(u)` plus every product whose transform is within `δ·u`
/// of the weakest member of `B_S(u)`.
pub fn extended_top_set(instance: &Instance, s: usize, delta: f64, u: f64) -> Result<Assortment> {
    let top = top_set(instance, s, u);
    let weakest = top
        .ids()
        .iter()
        .map(|&id| product_transform(instance, id, u))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if top.is_empty() {
        return Err(Error::EmptyTopSet(u));
    }
    let slack = delta * u;
    let ids = instance
        .products()
        .iter()
        .filter(|p| top.contains(p.id) || weakest - (p.price - u) * p.weight <= slack)
        .map(|p| p.id);
    Ok(Assortment::from_ids(ids).expect("ids are distinct"))
}

/// Values of `u` at which the ordering or sign of the `h` lines can change:
/// pairwise crossings, zero crossings, and (for `delta > 0`) the points where
/// `h_i(u) − h_j(u) = δ·u`.
pub fn breakpoints(instance: &Instance, delta: Option<f64>) -> Vec<f64> {
    let ps = instance.products();
    let mut out: Vec<f64> = ps.iter().map(|p| p.price).collect();
    for (a, pi) in ps.iter().enumerate() {
        for pj in &ps[a + 1..] {
            let num = pi.price * pi.weight - pj.price * pj.weight;
            if pi.weight != pj.weight {
                out.push(num / (pi.weight - pj.weight));
            }
            if let Some(d) = delta.filter(|d| *d > 0.0) {
                let den = pi.weight - pj.weight + d;
                if den != 0.0 {
                    out.push(num / den);
                }
                let den = pj.weight - pi.weight + d;
                if den != 0.0 {
                    out.push(-num / den);
                }
            }
        }
    }
    out.retain(|u| u.is_finite());
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// One representative `u` per piece of the piecewise-constant partition:
/// every breakpoint, every midpoint, and one point past each end.
pub(crate) fn sample_points(bps: &[f64], positive_only: bool) -> Vec<f64> {
    let bps: Vec<f64> = if positive_only {
        std::iter::once(0.0)
            .chain(bps.iter().copied().filter(|u| *u > 0.0))
            .collect()
    } else {
        bps.to_vec()
    };
    let mut out = Vec::with_capacity(2 * bps.len() + 2);
    match (bps.first(), bps.last()) {
        (Some(&lo), Some(&hi)) => {
            if !positive_only {
                out.push(lo - lo.abs().max(1.0));
            }
            for w in bps.windows(2) {
                out.push(w[0]);
                out.push(0.5 * (w[0] + w[1]));
            }
            out.push(hi);
            out.push(hi + hi.abs().max(1.0));
        }
        _ => out.push(if positive_only { 1.0 } else { 0.0 }),
    }
    if positive_only {
        out.retain(|u| *u > 0.0);
    }
    out
}

/// `C̄(δ) = max_{u>0} |B̄_S(δ, u)|`, evaluated exactly over the breakpoint
/// partition. Offsets where `B_S(u)` is empty contribute nothing.
pub fn max_extended_size(instance: &Instance, s: usize, delta: f64) -> usize {
    let bps = breakpoints(instance, Some(delta));
    sample_points(&bps, true)
        .into_iter()
        .filter_map(|u| extended_top_set(instance, s, delta, u).ok())
        .map(|b| b.len())
        .max()
        .unwrap_or(0)
}

/// Same maximum over `points` evenly spaced offsets in `(0, max p_i]`.
/// Never exceeds [`max_extended_size`].
pub fn max_extended_size_on_grid(instance: &Instance, s: usize, delta: f64, points: usize) -> usize {
    let top = instance
        .products()
        .iter()
        .map(|p| p.price)
        .fold(0.0, f64::max);
    (1..points)
        .map(|k| top * k as f64 / (points - 1) as f64)
        .filter_map(|u| extended_top_set(instance, s, delta, u).ok())
        .map(|b| b.len())
        .max()
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapBound {
    pub capacity: usize,
    pub eps_max: f64,
    /// `W_C^max`: 1 plus the `C` largest weights.
    pub w_c_max: f64,
    /// `w(M_OPT_C)`.
    pub w_opt: f64,
    /// Upper bound on `δ_C`: `W_C^max·ε_max/(1 − ε_max)`.
    pub delta_c: f64,
    /// `η(ε_max) = 4C·ε_max/(1 − ε_max)`.
    pub eta: f64,
    /// `f(w, ε_max) = (W_C^max / w(M_OPT_C))·η`.
    pub f_value: f64,
}

impl GapBound {
    /// A bound of 1 or more says nothing about a relative gap.
    pub fn is_vacuous(&self) -> bool {
        self.f_value >= 1.0
    }
}

pub fn compute_bounds(
    instance: &Instance,
    capacity: usize,
    eps_max: f64,
    opt: &ExactSolution,
) -> Result<GapBound> {
    if !(0.0..1.0).contains(&eps_max) {
        return Err(Error::Noise(format!("eps_max = {eps_max} must lie in [0, 1)")));
    }
    let w_c_max = instance.max_weight_mass(capacity);
    let w_opt = instance.weight_mass(&opt.assortment)?;
    let ratio = eps_max / (1.0 - eps_max);
    let eta = 4.0 * capacity as f64 * ratio;
    Ok(GapBound {
        capacity,
        eps_max,
        w_c_max,
        w_opt,
        delta_c: w_c_max * ratio,
        eta,
        f_value: w_c_max / w_opt * eta,
    })
}

/// Exact `δ_C = max_{|M|≤C} w(M)·ε(M)/(1 − ε(M))` by enumeration. Only
/// affordable for small universes.
pub fn exact_delta_c(instance: &Instance, capacity: usize, noise: &NoiseSpec) -> Result<f64> {
    if instance.len() > 12 {
        return Err(Error::Config(format!(
            "exact delta_C enumerates all assortments; N = {} is above 12",
            instance.len()
        )));
    }
    let ids = instance.ids();
    let mut best = 0.0f64;
    for k in 0..=capacity.min(ids.len()) {
        for m in combinations(&ids, k) {
            let eps = noise.epsilon(&m);
            best = best.max(instance.weight_mass(&m)? * eps / (1.0 - eps));
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposition1Report {
    pub m1: Assortment,
    pub m2: Assortment,
    pub revenue1: f64,
    pub revenue2: f64,
    /// `H_{M1}(u2)`.
    pub transform1: f64,
    /// `H_{M2}(u2)`.
    pub transform2: f64,
    pub transform_order: bool,
    pub revenue_order: bool,
    pub agrees: bool,
}

/// Checks `H_{M1}(u2) ≥ H_{M2}(u2) ⟺ R(M1) ≥ R(M2)` with `u2 = R(M2)`.
/// Pairs whose revenues tie to within `1e-9` relative are accepted either way.
pub fn check_proposition1(instance: &Instance, m1: &Assortment, m2: &Assortment) -> Result<Proposition1Report> {
    let revenue1 = mnl_revenue(instance, m1)?;
    let revenue2 = mnl_revenue(instance, m2)?;
    let transform1 = assortment_transform(instance, m1, revenue2)?;
    let transform2 = assortment_transform(instance, m2, revenue2)?;
    let transform_order = transform1 >= transform2;
    let revenue_order = revenue1 >= revenue2;
    let near_tie = (revenue1 - revenue2).abs() <= 1e-9 * revenue1.abs().max(revenue2.abs()).max(1.0);
    Ok(Proposition1Report {
        m1: m1.clone(),
        m2: m2.clone(),
        revenue1,
        revenue2,
        transform1,
        transform2,
        transform_order,
        revenue_order,
        agrees: transform_order == revenue_order || near_tie,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceViolation {
    pub invocation: usize,
    pub step_index: usize,
    /// The product whose inequality failed against the chosen one.
    pub against: ProductId,
    pub kind: ViolationKind,
    /// Amount by which the inequality is missed.
    pub excess: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// `h_{i*}(u) ≤ h_i(u) + δ_C·u` failed.
    ExchangedOut,
    /// `h_{j*}(u) ≥ h_j(u) − δ_C·u` failed.
    BroughtIn,
}

/// Replays greedy steps against the loop invariants: at `u = R(M_{t+1})`
/// (exact MNL revenue), the product brought in is within `δ_C·u` of the best
/// pool candidate and the product exchanged out is within `δ_C·u` of the
/// weakest member.
pub fn check_trace_invariants(
    instance: &Instance,
    records: &[IterationRecord],
    delta_c: f64,
) -> Result<Vec<TraceViolation>> {
    let mut violations = Vec::new();
    for rec in records {
        let (entering, leaving) = match rec.action {
            Action::Terminate => continue,
            Action::Add => {
                let j = rec
                    .added
                    .ok_or_else(|| malformed(rec, "add step without an added product"))?;
                if rec.assortment_after != rec.assortment_before.with(j) || rec.assortment_before.contains(j) {
                    return Err(malformed(rec, "add step does not match its assortments"));
                }
                (j, None)
            }
            Action::Exchange => {
                let (j, i) = rec
                    .added
                    .zip(rec.removed)
                    .ok_or_else(|| malformed(rec, "exchange step missing a product"))?;
                if !rec.assortment_before.contains(i)
                    || rec.assortment_after != rec.assortment_before.exchange(i, j)
                {
                    return Err(malformed(rec, "exchange step does not match its assortments"));
                }
                (j, Some(i))
            }
        };
        if !rec.pool_before.contains(&entering) {
            return Err(malformed(rec, "entering product was not in the candidate pool"));
        }

        let u = mnl_revenue(instance, &rec.assortment_after)?;
        let slack = delta_c * u;
        let h_in = product_transform(instance, entering, u)?;
        let mut scale = h_in.abs();
        let pool_h = rec
            .pool_before
            .iter()
            .map(|&j| Ok((j, product_transform(instance, j, u)?)))
            .collect::<Result<Vec<_>>>()?;
        let member_h = rec
            .assortment_before
            .ids()
            .iter()
            .map(|&i| Ok((i, product_transform(instance, i, u)?)))
            .collect::<Result<Vec<_>>>()?;
        for (_, h) in pool_h.iter().chain(&member_h) {
            scale = scale.max(h.abs());
        }
        let tol = 1e-9 * (1.0 + scale);

        for &(j, h) in &pool_h {
            let excess = (h - slack) - h_in;
            if excess > tol {
                violations.push(TraceViolation {
                    invocation: rec.invocation,
                    step_index: rec.step_index,
                    against: j,
                    kind: ViolationKind::BroughtIn,
                    excess,
                });
            }
        }
        if let Some(i_star) = leaving {
            let h_out = product_transform(instance, i_star, u)?;
            for &(i, h) in &member_h {
                let excess = h_out - (h + slack);
                if excess > tol {
                    violations.push(TraceViolation {
                        invocation: rec.invocation,
                        step_index: rec.step_index,
                        against: i,
                        kind: ViolationKind::ExchangedOut,
                        excess,
                    });
                }
            }
        }
    }
    Ok(violations)
}

fn malformed(rec: &IterationRecord, what: &str) -> Error {
    Error::MalformedTrace(format!(
        "invocation {} step {}: {what}",
        rec.invocation, rec.step_index
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopSetMonotonicityReport {
    pub seed_size: usize,
    pub u1: f64,
    pub u2: f64,
    pub size_at_u1: usize,
    pub size_at_u2: usize,
    pub monotone: bool,
    /// `S ≥ |B_S(u)| ≥ |M_OPT_S|` at every checked `u ≤ u_S`; `None` when no
    /// optimum was supplied or neither offset lies below it.
    pub optimum_sandwich: Option<bool>,
}

impl TopSetMonotonicityReport {
    pub fn passed(&self) -> bool {
        self.monotone && self.optimum_sandwich.unwrap_or(true)
    }
}

/// Checks `|B_S(u1)| ≥ |B_S(u2)|` for `u1 ≤ u2` and, given the size-`S`
/// optimum, the sandwich `S ≥ |B_S(u)| ≥ |M_OPT_S|` for offsets `u ≤ u_S`.
pub fn check_top_set_monotonicity(
    instance: &Instance,
    s: usize,
    u1: f64,
    u2: f64,
    opt: Option<&ExactSolution>,
) -> Result<TopSetMonotonicityReport> {
    if !(0.0 <= u1 && u1 <= u2) {
        return Err(Error::Config(format!("need 0 <= u1 <= u2, got u1 = {u1}, u2 = {u2}")));
    }
    let size_at_u1 = top_set(instance, s, u1).len();
    let size_at_u2 = top_set(instance, s, u2).len();
    let optimum_sandwich = match opt {
        Some(opt) => {
            let (opt_set, u_s) = opt
                .optimum_for(s)
                .ok_or_else(|| Error::Config(format!("no optimum recorded for size {s}")))?;
            let mut checked = None;
            for (u, size) in [(u1, size_at_u1), (u2, size_at_u2)] {
                if u <= u_s {
                    let ok = s >= size && size >= opt_set.len();
                    checked = Some(checked.unwrap_or(true) && ok);
                }
            }
            checked
        }
        None => None,
    };
    Ok(TopSetMonotonicityReport {
        seed_size: s,
        u1,
        u2,
        size_at_u1,
        size_at_u2,
        monotone: size_at_u1 >= size_at_u2,
        optimum_sandwich,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::{ExactOracle, Product};
    use crate::greedy::greedy_add_exchange;
    use crate::reference::brute_force_opt;

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
    fn transform_examples() {
        let one = Instance::new(vec![Product::new(1, 1.0, 10.0)], None).unwrap();
        assert_eq!(product_transform(&one, 1, 10.0).unwrap(), 0.0);
        assert_eq!(product_transform(&one, 1, 4.0).unwrap(), 6.0);
        assert_eq!(product_transform(&three(), 2, 4.0).unwrap(), 4.0);
        assert!(product_transform(&one, 2, 0.0).is_err());

        assert_eq!(assortment_transform(&one, &Assortment::empty(), 3.0).unwrap(), 0.0);
        assert_eq!(assortment_transform(&one, &set(&[1]), 5.0).unwrap(), 5.0);
        let m = set(&[1, 3]);
        let r = mnl_revenue(&three(), &m).unwrap();
        assert!((assortment_transform(&three(), &m, r).unwrap() - r).abs() < 1e-12);
    }

    #[test]
    fn top_set_examples() {
        let inst = three();
        assert!(top_set(&inst, 3, 12.0).is_empty());
        assert_eq!(top_set(&inst, 2, 4.0), set(&[1, 2]));
        assert!(top_set(&inst, 0, 4.0).is_empty());
    }

    #[test]
    fn extended_top_set_examples() {
        let inst = three();
        assert_eq!(extended_top_set(&inst, 1, 0.5, 4.0).unwrap(), set(&[1, 2, 3]));
        // at u = 4 products 2 and 3 tie at h = 4
        assert_eq!(extended_top_set(&inst, 2, 0.0, 4.0).unwrap(), set(&[1, 2, 3]));
        assert_eq!(extended_top_set(&inst, 1, 0.0, 5.0).unwrap(), set(&[1]));
        assert_eq!(extended_top_set(&inst, 1, 1e6, 1.0).unwrap(), set(&[1, 2, 3]));
        assert!(matches!(extended_top_set(&inst, 1, 0.1, 50.0), Err(Error::EmptyTopSet(_))));
    }

    #[test]
    fn max_extended_size_without_crossings() {
        // equal weights: the h lines are parallel and never tie
        let inst = Instance::new(
            (1..=6).map(|i| Product::new(i, 1.5, 5.0 + 3.0 * i as f64)).collect(),
            None,
        )
        .unwrap();
        for s in 1..=4 {
            assert_eq!(max_extended_size(&inst, s, 0.0), s);
            assert_eq!(max_extended_size_on_grid(&inst, s, 0.0, 10_001), s);
        }
    }

    #[test]
    fn max_extended_size_identical_products() {
        let inst = Instance::new((1..=5).map(|i| Product::new(i, 2.0, 9.0)).collect(), None).unwrap();
        for delta in [0.0, 0.3, 10.0] {
            assert_eq!(max_extended_size(&inst, 2, delta), 5);
        }
        assert_eq!(max_extended_size(&three(), 1, 1e9), 3);
    }

    #[test]
    fn bounds_examples() {
        let one = Instance::new(vec![Product::new(1, 1.0, 10.0)], None).unwrap();
        let opt = brute_force_opt(&ExactOracle::new(&one), &one.ids(), 1).unwrap();
        let b = compute_bounds(&one, 1, 0.0, &opt).unwrap();
        assert_eq!((b.eta, b.f_value), (0.0, 0.0));
        assert_eq!(b.w_c_max, 2.0);
        assert!(compute_bounds(&one, 1, 1.0, &opt).is_err());

        // W_C^max / w(opt) = 1 when the optimum holds the heaviest products
        let twins = Instance::new(vec![Product::new(1, 1.0, 10.0), Product::new(2, 1.0, 10.0)], None).unwrap();
        let opt = brute_force_opt(&ExactOracle::new(&twins), &twins.ids(), 2).unwrap();
        let b = compute_bounds(&twins, 2, 0.01, &opt).unwrap();
        assert!((b.f_value - 8.0 * 0.01 / 0.99).abs() < 1e-15);
        assert!((b.f_value - 0.0808).abs() < 1e-4);
    }

    #[test]
    fn exact_delta_c_below_bound() {
        let inst = three();
        let noise = NoiseSpec::seeded_uniform(0.05, 11);
        let exact = exact_delta_c(&inst, 2, &noise).unwrap();
        let opt = brute_force_opt(&ExactOracle::new(&inst), &inst.ids(), 2).unwrap();
        let bound = compute_bounds(&inst, 2, 0.05, &opt).unwrap();
        assert!(exact > 0.0 && exact <= bound.delta_c);
    }

    #[test]
    fn proposition1_examples() {
        let inst = three();
        let r = check_proposition1(&inst, &set(&[1]), &set(&[1])).unwrap();
        assert!(r.transform_order && r.revenue_order && r.agrees);
        let r = check_proposition1(&inst, &set(&[1]), &set(&[2])).unwrap();
        assert_eq!((r.revenue1, r.revenue2), (5.0, 4.0));
        assert_eq!((r.transform1, r.transform2), (6.0, 4.0));
        assert!(r.agrees);
        let r = check_proposition1(&inst, &set(&[2]), &set(&[1])).unwrap();
        assert!(!r.transform_order && !r.revenue_order && r.agrees);
    }

    #[test]
    fn trace_checks() {
        let inst = three();
        assert!(check_trace_invariants(&inst, &[], 0.0).unwrap().is_empty());
        let out = greedy_add_exchange(&set(&[2]), &[1, 2, 3], 3, &ExactOracle::new(&inst), true).unwrap();
        assert!(check_trace_invariants(&inst, &out.trace, 0.0).unwrap().is_empty());

        let mut bad = out.trace.clone();
        bad[1].removed = None;
        assert!(matches!(check_trace_invariants(&inst, &bad, 0.0), Err(Error::MalformedTrace(_))));

        // a forged exchange that brings in the weaker candidate is flagged
        let mut forged = out.trace[0].clone();
        forged.added = Some(3);
        forged.assortment_after = set(&[2, 3]);
        let v = check_trace_invariants(&inst, &[forged], 0.0).unwrap();
        assert!(v.iter().any(|v| v.kind == ViolationKind::BroughtIn && v.against == 1));
    }

    #[test]
    fn monotonicity_examples() {
        let inst = three();
        let r = check_top_set_monotonicity(&inst, 2, 3.0, 3.0, None).unwrap();
        assert_eq!(r.size_at_u1, r.size_at_u2);
        let r = check_top_set_monotonicity(&inst, 2, 1.0, 20.0, None).unwrap();
        assert_eq!(r.size_at_u2, 0);
        assert!(r.passed());
        let opt = brute_force_opt(&ExactOracle::new(&inst), &inst.ids(), 2).unwrap();
        let r = check_top_set_monotonicity(&inst, 2, 0.5, 6.0, Some(&opt)).unwrap();
        assert_eq!(r.optimum_sandwich, Some(true));
        assert!(check_top_set_monotonicity(&inst, 2, 2.0, 1.0, None).is_err());
    }
}
