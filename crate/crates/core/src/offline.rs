//! Offline optimum of the inventory-constrained revenue problem.
//!
//! `max Σ g_t(v_t)  s.t.  Σ v_t ≤ Δ,  v_t ≥ 0` has a single coupling
//! constraint, so the optimum is found by bisection on its shadow price `λ`:
//! at a given `λ` every slot independently sells where `g_t'(v) = λ`, and the
//! total demand is monotone in `λ`.

use serde::Serialize;

use crate::revenue::{Curve, InputSequence, MarginalSet, RevenueFunction, MAX_BISECTION_ITERS};

/// Bisection stops once the dual bracket is narrower than this times `max g'(0)`.
pub const DUAL_TOL: f64 = 1e-9;

/// Tolerance of the optimality report, relative to `M`.
pub const KKT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OfflineSolution {
    pub lambda_star: f64,
    pub allocations: Vec<f64>,
    pub revenue: f64,
    #[serde(skip)]
    pub active: bool,
}

/// `η_OPT(σ^[1:t])` and the prefix duals `λ_t`, for `t = 1..=T` (index `t - 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixOptima {
    pub eta: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl PrefixOptima {
    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }
}

/// Aggregate demand of all slots at one shadow price.
#[derive(Debug, Clone, Copy)]
struct Demand {
    lo_sum: f64,
    hi_sum: f64,
    /// Some slot still has marginal above `λ` at `v = Δ`, so demand exceeds `Δ`.
    saturated: bool,
}

impl Demand {
    fn at(curves: &[Curve], lambda: f64, delta: f64) -> Self {
        let mut d = Demand { lo_sum: 0.0, hi_sum: 0.0, saturated: false };
        for c in curves {
            match c.solve_marginal(lambda, delta) {
                MarginalSet::Interval { lo, hi } => {
                    d.lo_sum += lo;
                    d.hi_sum += hi;
                }
                MarginalSet::BaseBelow => {}
                MarginalSet::ExceedsRange => {
                    d.saturated = true;
                    d.lo_sum += delta;
                    d.hi_sum += delta;
                }
            }
        }
        d
    }

    fn too_high(&self, delta: f64) -> bool {
        self.saturated || self.lo_sum > delta
    }

    fn brackets(&self, delta: f64) -> bool {
        !self.saturated && self.lo_sum <= delta && delta <= self.hi_sum
    }
}

fn interval_ends(c: &Curve, lambda: f64, delta: f64) -> (f64, f64) {
    match c.solve_marginal(lambda, delta) {
        MarginalSet::Interval { lo, hi } => (lo, hi),
        MarginalSet::BaseBelow => (0.0, 0.0),
        MarginalSet::ExceedsRange => (delta, delta),
    }
}

/// Allocation at a bracketing `λ`: every slot at its interval's lower end,
/// then slots raised earliest-first until the inventory is used up.
fn fill_earliest_first(curves: &[Curve], lambda: f64, delta: f64) -> Vec<f64> {
    let ends: Vec<(f64, f64)> = curves.iter().map(|c| interval_ends(c, lambda, delta)).collect();
    let mut alloc: Vec<f64> = ends.iter().map(|e| e.0).collect();
    let mut left = delta - alloc.iter().sum::<f64>();
    for (v, &(lo, hi)) in alloc.iter_mut().zip(&ends) {
        if left <= 0.0 {
            break;
        }
        let raise = (hi - lo).min(left);
        *v += raise;
        left -= raise;
    }
    alloc
}

fn finish(curves: &[Curve], lambda_star: f64, allocations: Vec<f64>, delta: f64) -> OfflineSolution {
    let revenue = curves.iter().zip(&allocations).map(|(c, &v)| c.value(v)).sum();
    let used: f64 = allocations.iter().sum();
    OfflineSolution { lambda_star, allocations, revenue, active: (used - delta).abs() <= 1e-9 * delta }
}

fn solve_linear(prices: &[f64], delta: f64) -> OfflineSolution {
    let mut best = 0;
    for (i, &p) in prices.iter().enumerate() {
        if p > prices[best] {
            best = i;
        }
    }
    let mut allocations = vec![0.0; prices.len()];
    allocations[best] = delta;
    OfflineSolution { lambda_star: prices[best], allocations, revenue: delta * prices[best], active: true }
}

/// Dual bisection over `curves`. `lambda_floor` is a known lower bound on the
/// optimal dual (the previous prefix's dual when solving prefixes).
fn solve_curves(curves: &[Curve], delta: f64, lambda_floor: f64) -> OfflineSolution {
    assert!(!curves.is_empty(), "offline solve needs at least one slot");
    if let Some(prices) = curves.iter().map(|c| c.linear_price()).collect::<Option<Vec<f64>>>() {
        return solve_linear(&prices, delta);
    }

    let at_zero = Demand::at(curves, 0.0, delta);
    if !at_zero.too_high(delta) {
        // Inventory suffices for every slot's maximizer (or for a tie set at λ = 0).
        let alloc = if at_zero.hi_sum <= delta {
            curves.iter().map(|c| c.argmax_on(delta)).collect()
        } else {
            fill_earliest_first(curves, 0.0, delta)
        };
        return finish(curves, 0.0, alloc, delta);
    }

    let top = curves.iter().map(|c| c.base_price()).fold(0.0, f64::max);
    let eps = DUAL_TOL * top;
    let mut hi = top;
    let d_hi = Demand::at(curves, hi, delta);
    if d_hi.brackets(delta) {
        return finish(curves, hi, fill_earliest_first(curves, hi, delta), delta);
    }

    let mut lo = 0.0;
    if lambda_floor > 0.0 {
        let floor = (lambda_floor - eps).max(0.0);
        if floor < hi && Demand::at(curves, floor, delta).too_high(delta) {
            lo = floor;
        }
    }

    for _ in 0..MAX_BISECTION_ITERS {
        if hi - lo <= eps {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let d = Demand::at(curves, mid, delta);
        if d.too_high(delta) {
            lo = mid;
        } else if d.hi_sum < delta {
            hi = mid;
        } else {
            return finish(curves, mid, fill_earliest_first(curves, mid, delta), delta);
        }
    }

    // Demand crosses Δ strictly inside (lo, hi): blend the allocations at the
    // two ends so the inventory is used exactly. Each slot's blend lies between
    // its g' = lo and g' = hi points, so its marginal stays inside the bracket.
    let upper: Vec<f64> = curves.iter().map(|c| interval_ends(c, lo, delta).0).collect();
    let lower: Vec<f64> = curves.iter().map(|c| interval_ends(c, hi, delta).1).collect();
    let s_up: f64 = upper.iter().sum();
    let s_low: f64 = lower.iter().sum();
    let w = if s_up > s_low { ((delta - s_low) / (s_up - s_low)).clamp(0.0, 1.0) } else { 1.0 };
    let alloc = lower.iter().zip(&upper).map(|(&l, &u)| l + w * (u - l)).collect();
    finish(curves, 0.5 * (lo + hi), alloc, delta)
}

pub fn solve(sequence: &InputSequence) -> OfflineSolution {
    solve_curves(sequence.curves(), sequence.delta(), 0.0)
}

/// Incremental prefix optimum: push slots one at a time and get
/// `(η_OPT(σ^[1:t]), λ_t)` after each.
#[derive(Debug, Clone)]
pub struct PrefixSolver {
    delta: f64,
    curves: Vec<Curve>,
    lambda: f64,
    eta: f64,
    best_linear: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrefixEntry {
    pub eta: f64,
    pub lambda: f64,
}

impl PrefixSolver {
    pub fn new(delta: f64) -> Self {
        Self { delta, curves: Vec::new(), lambda: 0.0, eta: 0.0, best_linear: Some(0.0) }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn push(&mut self, curve: &Curve) -> PrefixEntry {
        self.curves.push(curve.clone());
        self.best_linear = match (self.best_linear, curve.linear_price()) {
            (Some(best), Some(p)) => Some(best.max(p)),
            _ => None,
        };
        match self.best_linear {
            Some(best) => {
                self.eta = self.delta * best;
                self.lambda = best;
            }
            None => {
                let sol = solve_curves(&self.curves, self.delta, self.lambda);
                self.eta = sol.revenue;
                self.lambda = sol.lambda_star;
            }
        }
        PrefixEntry { eta: self.eta, lambda: self.lambda }
    }
}

pub fn prefix_solve(sequence: &InputSequence) -> PrefixOptima {
    let mut solver = PrefixSolver::new(sequence.delta());
    let mut out = PrefixOptima { eta: Vec::with_capacity(sequence.len()), lambda: Vec::with_capacity(sequence.len()) };
    for c in sequence.curves() {
        let e = solver.push(c);
        out.eta.push(e.eta);
        out.lambda.push(e.lambda);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KktViolation {
    /// Slot sells but its marginal differs from the dual.
    Stationarity {
        slot: usize,
        marginal: f64,
        lambda: f64,
    },
    /// Slot sells nothing although its base price exceeds the dual.
    IdleAbovePrice {
        slot: usize,
        base_price: f64,
        lambda: f64,
    },
    NegativeAllocation {
        slot: usize,
        value: f64,
    },
    InventoryExceeded {
        used: f64,
        delta: f64,
    },
    Slackness {
        lambda: f64,
        slack: f64,
    },
    LengthMismatch {
        allocations: usize,
        slots: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktReport {
    pub passed: bool,
    pub violations: Vec<KktViolation>,
}

pub fn verify_kkt(sequence: &InputSequence, sol: &OfflineSolution) -> KktReport {
    let delta = sequence.delta();
    let tol = KKT_TOL * sequence.max_price();
    let lambda = sol.lambda_star;
    let mut violations = Vec::new();
    if sol.allocations.len() != sequence.len() {
        violations.push(KktViolation::LengthMismatch { allocations: sol.allocations.len(), slots: sequence.len() });
        return KktReport { passed: false, violations };
    }
    for (i, (c, &v)) in sequence.curves().iter().zip(&sol.allocations).enumerate() {
        let slot = i + 1;
        if v < -1e-12 * delta {
            violations.push(KktViolation::NegativeAllocation { slot, value: v });
            continue;
        }
        let v = v.clamp(0.0, delta);
        let marginal = c.marginal(v);
        if (marginal - lambda).abs() <= tol {
            continue;
        }
        let idle = v <= 1e-12 * delta;
        if idle {
            let base_price = c.base_price();
            if base_price > lambda + tol {
                violations.push(KktViolation::IdleAbovePrice { slot, base_price, lambda });
            }
        } else {
            violations.push(KktViolation::Stationarity { slot, marginal, lambda });
        }
    }
    let used: f64 = sol.allocations.iter().sum();
    if used > delta * (1.0 + 1e-7) {
        violations.push(KktViolation::InventoryExceeded { used, delta });
    }
    let slack = delta - used;
    if (lambda * slack).abs() > tol * delta {
        violations.push(KktViolation::Slackness { lambda, slack });
    }
    KktReport { passed: violations.is_empty(), violations }
}

/// Which side of the increment sandwich failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IncrementBound {
    /// `g_t(ṽ_t) − λ_t·ṽ_t ≤ increment`
    Lower,
    /// `increment ≤ g_t(ṽ_t) − λ_{t−1}·ṽ_t`
    Upper,
    /// `g_t(ṽ_t) − λ_{t−1}·ṽ_t ≤ g_t(v̂_t)`
    Cap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncrementCheck {
    pub increment: f64,
    pub lower: f64,
    pub upper: f64,
    pub cap: f64,
    pub failed: Vec<IncrementBound>,
}

impl IncrementCheck {
    pub fn passed(&self) -> bool {
        self.failed.is_empty()
    }
}

/// Bounds on the growth of the offline optimum when slot `t` (1-based, `t ≥ 2`) arrives.
pub fn increment_bounds_check(
    sequence: &InputSequence,
    t: usize,
) -> Result<IncrementCheck, crate::revenue::RevenueError> {
    if t < 2 || t > sequence.len() {
        return Err(crate::revenue::RevenueError::SlotOutOfRange { slot: t, len: sequence.len() });
    }
    let delta = sequence.delta();
    let before = solve(&sequence.prefix(t - 1)?);
    let after = solve(&sequence.prefix(t)?);
    let g = &sequence.curves()[t - 1];
    let v_new = after.allocations[t - 1];
    let gain = g.value(v_new);
    let check = IncrementCheck {
        increment: after.revenue - before.revenue,
        lower: gain - after.lambda_star * v_new,
        upper: gain - before.lambda_star * v_new,
        cap: g.value(g.argmax_on(delta)),
        failed: Vec::new(),
    };
    let tol = 1e-6 * after.revenue.max(f64::MIN_POSITIVE);
    let mut failed = Vec::new();
    if check.lower > check.increment + tol {
        failed.push(IncrementBound::Lower);
    }
    if check.increment > check.upper + tol {
        failed.push(IncrementBound::Upper);
    }
    if check.upper > check.cap + tol {
        failed.push(IncrementBound::Cap);
    }
    Ok(IncrementCheck { failed, ..check })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterchangeCheck {
    /// Increment slot `tau` brings at its original position.
    pub original: f64,
    /// Increment the same curve brings once it is moved behind its successor.
    pub deferred: f64,
    pub passed: bool,
}

fn eta_of_prefix(sequence: &InputSequence, len: usize) -> Result<f64, crate::revenue::RevenueError> {
    if len == 0 {
        return Ok(0.0);
    }
    Ok(solve(&sequence.prefix(len)?).revenue)
}

/// Deferring a curve by one slot never increases the gain it brings to the offline optimum.
pub fn interchange_check(
    sequence: &InputSequence,
    tau: usize,
) -> Result<InterchangeCheck, crate::revenue::RevenueError> {
    let swapped = sequence.swapped(tau)?;
    let original = eta_of_prefix(sequence, tau)? - eta_of_prefix(sequence, tau - 1)?;
    let top = eta_of_prefix(&swapped, tau + 1)?;
    let deferred = top - eta_of_prefix(&swapped, tau)?;
    let passed = original >= deferred - 1e-6 * top.max(f64::MIN_POSITIVE);
    Ok(InterchangeCheck { original, deferred, passed })
}
