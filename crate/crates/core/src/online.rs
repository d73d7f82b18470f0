//! The CR-Pursuit(π) online algorithm and its ratio parameters.
//!
//! At slot `t` the algorithm sells the smallest `v̄_t` with
//! `g_t(v̄_t) = (η_OPT(σ^[1:t]) − η_OPT(σ^[1:t−1])) / π`, so its cumulative
//! revenue stays at exactly `1/π` of the offline optimum of the prefix seen
//! so far. Whether the inventory suffices is a property of `π`, not something
//! the algorithm enforces: overruns are recorded in the trace.

use serde::Serialize;
use thiserror::Error;

use crate::offline::{prefix_solve, PrefixOptima};
use crate::revenue::{bisect_boundary, Curve, FamilyKind, InputSequence, ParamRanges, RevenueError, RevenueFunction};

/// Relative slack before cumulative sales count as exceeding `Δ`.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Revenue targets below this fraction of `η_OPT` are treated as zero sales.
pub const NOISE_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RatioError {
    #[error("price ratio theta must be >= 1, got {0}")]
    Theta(f64),
    #[error("problem factor c must be >= 1, got {0}")]
    Factor(f64),
    #[error("pursued ratio must be >= 1, got {0}")]
    Pi(f64),
    #[error(transparent)]
    Revenue(#[from] RevenueError),
}

fn check_theta(theta: f64) -> Result<(), RatioError> {
    if !(theta.is_finite() && theta >= 1.0) {
        return Err(RatioError::Theta(theta));
    }
    Ok(())
}

/// Optimal ratio for one-way trading: `ln θ + 1`.
pub fn ratio_one_way(theta: f64) -> Result<f64, RatioError> {
    check_theta(theta)?;
    Ok(theta.ln() + 1.0)
}

/// Feasible ratio for any family with factor `c`: `c·(ln θ + 1)`.
pub fn ratio_general(theta: f64, c: f64) -> Result<f64, RatioError> {
    if !(c.is_finite() && c >= 1.0) {
        return Err(RatioError::Factor(c));
    }
    Ok(c * ratio_one_way(theta)?)
}

/// Feasible ratio under convex price elasticity: `(ln θ + 1)² / (ln θ + 3/4)`.
pub fn ratio_elasticity(theta: f64) -> Result<f64, RatioError> {
    check_theta(theta)?;
    let l = theta.ln();
    Ok((l + 1.0).powi(2) / (l + 0.75))
}

/// Per-step quantity factor under convex elasticity when pursuing `pi`.
pub fn elasticity_c_of_pi(pi: f64) -> Result<f64, RatioError> {
    if pi.is_nan() || pi < 1.0 {
        return Err(RatioError::Pi(pi));
    }
    if pi.is_infinite() {
        return Ok(1.0);
    }
    Ok(2.0 / (1.0 + (1.0 - 1.0 / pi).sqrt()))
}

/// `sup g'(0) / (g(v̂)/v̂)` over a family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FactorC {
    pub value: f64,
    /// The value is a grid supremum, a lower bound on the true supremum.
    pub from_grid: bool,
}

const C_GRID_2D: usize = 32;
const C_GRID_3D: usize = 10;

fn base_to_average(curve: &Curve, delta: f64) -> f64 {
    let vhat = curve.argmax_on(delta);
    let avg = curve.value(vhat) / vhat;
    curve.base_price() / avg
}

fn grid_points((lo, hi): (f64, f64), n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
}

pub fn c_constant(family: FamilyKind, ranges: &ParamRanges, delta: f64) -> Result<FactorC, RatioError> {
    ranges.validate()?;
    if !(delta.is_finite() && delta > 0.0) {
        return Err(RevenueError::InvalidInventory(delta).into());
    }
    let (p_min, alpha_max, beta_min) = (ranges.price.0, ranges.alpha.1, ranges.beta.0);
    let c = match family {
        FamilyKind::Linear => FactorC { value: 1.0, from_grid: false },
        FamilyKind::LinearElastic => {
            // The ratio grows with α and falls with p; an interior maximizer at
            // the extreme corner pins the supremum at 2.
            if alpha_max > 0.0 && p_min / (2.0 * alpha_max) <= delta {
                FactorC { value: 2.0, from_grid: false }
            } else {
                let mut sup = 1.0f64;
                for p in grid_points(ranges.price, C_GRID_2D) {
                    for a in grid_points(ranges.alpha, C_GRID_2D) {
                        sup = sup.max(base_to_average(&Curve::linear_elastic(p, a)?, delta));
                    }
                }
                FactorC { value: sup, from_grid: true }
            }
        }
        FamilyKind::PowerElastic => {
            let corner = Curve::power_elastic(p_min, alpha_max, beta_min)?;
            if alpha_max > 0.0 && corner.argmax_on(delta) < delta {
                FactorC { value: (beta_min + 1.0) / beta_min, from_grid: false }
            } else {
                let mut sup = 1.0f64;
                for p in grid_points(ranges.price, C_GRID_3D) {
                    for a in grid_points(ranges.alpha, C_GRID_3D) {
                        for b in grid_points(ranges.beta, C_GRID_3D) {
                            sup = sup.max(base_to_average(&Curve::power_elastic(p, a, b)?, delta));
                        }
                    }
                }
                FactorC { value: sup, from_grid: true }
            }
        }
        FamilyKind::Mixed => {
            let parts = [
                c_constant(FamilyKind::LinearElastic, ranges, delta)?,
                c_constant(FamilyKind::PowerElastic, ranges, delta)?,
            ];
            FactorC {
                value: parts.iter().map(|c| c.value).fold(1.0, f64::max),
                from_grid: parts.iter().any(|c| c.from_grid),
            }
        }
    };
    Ok(c)
}

/// One processed slot of a pursuit run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    /// 1-based slot index.
    pub t: usize,
    pub base_price: f64,
    pub increment: f64,
    pub v_bar: f64,
    pub slot_revenue: f64,
    pub inventory_used: f64,
    pub online_revenue: f64,
    pub eta_opt: f64,
    pub breach: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub v_bar: f64,
    /// Cumulative sales now exceed the inventory.
    pub breach: bool,
}

/// Result of comparing a measured quantity with its analytic bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl BoundCheck {
    fn at_most(lhs: f64, rhs: f64, slack: f64) -> Self {
        Self { lhs, rhs, holds: lhs <= rhs + slack }
    }
}

#[derive(Debug, Clone)]
pub struct PursuitState {
    pi: f64,
    delta: f64,
    inventory_used: f64,
    online_revenue: f64,
    prev_eta: f64,
    trace: Vec<TraceRow>,
}

impl PursuitState {
    pub fn new(pi: f64, delta: f64) -> Result<Self, RatioError> {
        if !(pi.is_finite() && pi >= 1.0) {
            return Err(RatioError::Pi(pi));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(RevenueError::InvalidInventory(delta).into());
        }
        Ok(Self { pi, delta, inventory_used: 0.0, online_revenue: 0.0, prev_eta: 0.0, trace: Vec::new() })
    }

    pub fn pi(&self) -> f64 {
        self.pi
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn inventory_used(&self) -> f64 {
        self.inventory_used
    }

    pub fn online_revenue(&self) -> f64 {
        self.online_revenue
    }

    pub fn prev_eta(&self) -> f64 {
        self.prev_eta
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn feasible(&self) -> bool {
        self.inventory_used <= self.delta * (1.0 + FEASIBILITY_TOL)
    }

    /// `η_OPT / η_online` of the processed prefix.
    pub fn empirical_ratio(&self) -> f64 {
        if self.online_revenue > 0.0 {
            self.prev_eta / self.online_revenue
        } else if self.prev_eta > 0.0 {
            f64::INFINITY
        } else {
            1.0
        }
    }

    /// Process one slot given the offline optimum `eta` of the prefix ending at it.
    pub fn step<F: RevenueFunction + ?Sized>(&mut self, g: &F, eta: f64) -> Result<StepOutcome, RevenueError> {
        let increment = (eta - self.prev_eta).max(0.0);
        let target = increment / self.pi;
        let v_bar = if target < NOISE_FLOOR * eta { 0.0 } else { g.solve_value(target, self.delta)? };
        let slot_revenue = g.value(v_bar);
        self.inventory_used += v_bar;
        self.online_revenue += slot_revenue;
        self.prev_eta = eta;
        let breach = !self.feasible();
        self.trace.push(TraceRow {
            t: self.trace.len() + 1,
            base_price: g.base_price(),
            increment,
            v_bar,
            slot_revenue,
            inventory_used: self.inventory_used,
            online_revenue: self.online_revenue,
            eta_opt: eta,
            breach,
        });
        Ok(StepOutcome { v_bar, breach })
    }

    /// `v̄_t ≤ c·g_t(v̄_t)/p(t)` at every processed slot.
    pub fn check_quantity_bound(&self, c: f64) -> Vec<BoundCheck> {
        self.trace.iter().map(|r| BoundCheck::at_most(r.v_bar, c * r.slot_revenue / r.base_price, 1e-9)).collect()
    }

    /// Online revenue from slots with base price at most `threshold` against `threshold·Δ/π`.
    pub fn check_threshold_revenue(&self, threshold: f64) -> BoundCheck {
        let lhs = self.trace.iter().filter(|r| r.base_price <= threshold).map(|r| r.slot_revenue).sum();
        BoundCheck::at_most(lhs, threshold * self.delta / self.pi, 1e-7)
    }

    /// `Σ g_t(v̄_t)/p(t)` against `(Δ/π)(ln θ + 1)`.
    pub fn check_price_weighted_revenue(&self, theta: f64) -> BoundCheck {
        let lhs = self.trace.iter().map(|r| r.slot_revenue / r.base_price).sum();
        BoundCheck::at_most(lhs, self.delta / self.pi * (theta.ln() + 1.0), 1e-7)
    }
}

/// Run CR-Pursuit(π) over a sequence whose prefix optima are already known.
pub fn run_with_prefix(sequence: &InputSequence, prefix: &PrefixOptima, pi: f64) -> Result<PursuitState, RatioError> {
    let mut state = PursuitState::new(pi, sequence.delta())?;
    for (g, &eta) in sequence.curves().iter().zip(&prefix.eta) {
        state.step(g, eta)?;
    }
    Ok(state)
}

pub fn run_pursuit(sequence: &InputSequence, pi: f64) -> Result<PursuitState, RatioError> {
    run_with_prefix(sequence, &prefix_solve(sequence), pi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdaptiveStep {
    pub pi: f64,
    pub v: f64,
}

/// Adaptive pursuit for classic one-way trading (linear slots only).
///
/// Each new best price `p` re-targets the smallest ratio `π_t` that still
/// leaves room for the worst continuation, a critical price path from `p`
/// up to `M`, which needs `(Δ/π_t)·ln(M/p)` more inventory.
#[derive(Debug, Clone)]
pub struct AdaptivePursuitState {
    current_pi: f64,
    best_price_seen: f64,
    inventory_used: f64,
    online_revenue: f64,
    delta: f64,
    max_price: f64,
}

impl AdaptivePursuitState {
    /// Starts from the static optimum `ln(M/m) + 1`.
    pub fn new(delta: f64, min_price: f64, max_price: f64) -> Result<Self, RatioError> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(RevenueError::InvalidInventory(delta).into());
        }
        if !(min_price > 0.0 && min_price <= max_price && max_price.is_finite()) {
            return Err(RevenueError::InvalidPriceBounds { m: min_price, max: max_price }.into());
        }
        Ok(Self {
            current_pi: ratio_one_way(max_price / min_price)?,
            best_price_seen: 0.0,
            inventory_used: 0.0,
            online_revenue: 0.0,
            delta,
            max_price,
        })
    }

    pub fn current_pi(&self) -> f64 {
        self.current_pi
    }

    pub fn best_price_seen(&self) -> f64 {
        self.best_price_seen
    }

    pub fn inventory_used(&self) -> f64 {
        self.inventory_used
    }

    pub fn online_revenue(&self) -> f64 {
        self.online_revenue
    }

    fn sale_at(&self, price: f64, pi: f64) -> f64 {
        ((self.delta * price / pi - self.online_revenue) / price).max(0.0)
    }

    fn maintainable(&self, price: f64, pi: f64) -> bool {
        let reserve = self.delta / pi * (self.max_price / price).ln().max(0.0);
        self.inventory_used + self.sale_at(price, pi) + reserve <= self.delta * (1.0 + 1e-12)
    }

    pub fn step(&mut self, price: f64) -> AdaptiveStep {
        if price <= self.best_price_seen {
            return AdaptiveStep { pi: self.current_pi, v: 0.0 };
        }
        let pi = if self.maintainable(price, 1.0) {
            1.0
        } else if !self.maintainable(price, self.current_pi) {
            self.current_pi
        } else {
            bisect_boundary(1.0, self.current_pi, |p| self.maintainable(price, p))
        };
        let v = self.sale_at(price, pi);
        self.inventory_used += v;
        self.online_revenue += price * v;
        self.best_price_seen = price;
        self.current_pi = pi;
        AdaptiveStep { pi, v }
    }
}
