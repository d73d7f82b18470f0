//! Admissible revenue curves and the numeric queries built on them.
//!
//! Every curve `g` satisfies `g(0) = 0`, is concave on `[0, Δ]`, and has a
//! positive base price `g'(0)`. The generic queries ([`bisect_argmax`],
//! [`bisect_value`], [`bisect_marginal`]) only rely on those properties and
//! are used for user-supplied curves. The built-in families override them with
//! closed forms and keep the bisection routes as cross-checks.

mod sequence;

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use sequence::{InputSequence, SequenceFile, SequenceFormatError, SlotRecord};

/// Iteration cap shared by every bisection in the crate.
pub const MAX_BISECTION_ITERS: usize = 200;

/// Relative/absolute slack used when comparing revenue targets.
pub const VALUE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RevenueError {
    #[error("quantity {v} outside [0, {delta}]")]
    OutOfDomain { v: f64, delta: f64 },
    #[error("target revenue {target} exceeds the curve maximum {max}")]
    UnreachableTarget { target: f64, max: f64 },
    #[error("target revenue {0} is negative")]
    NegativeTarget(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("curve is not concave: chord slopes {left} then {right}")]
    NotConcave { left: f64, right: f64 },
    #[error("curve does not vanish at the origin: g(0) = {0}")]
    NonZeroOrigin(f64),
    #[error("input sequence is empty")]
    EmptySequence,
    #[error("inventory must be positive and finite, got {0}")]
    InvalidInventory(f64),
    #[error("price bounds must satisfy 0 < m <= M, got m = {m}, M = {max}")]
    InvalidPriceBounds { m: f64, max: f64 },
    #[error("slot {slot}: base price {price} outside [{m}, {max}]")]
    BasePriceOutOfBounds { slot: usize, price: f64, m: f64, max: f64 },
    #[error("slot {slot}: revenue at full inventory is negative ({value})")]
    NegativeRevenue { slot: usize, value: f64 },
    #[error("slot index {slot} outside 1..={len}")]
    SlotOutOfRange { slot: usize, len: usize },
}

/// Solution set of `g'(v) = λ` on `[0, Δ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginalSet {
    /// Closed interval of solutions; a single point for strictly concave curves.
    Interval { lo: f64, hi: f64 },
    /// `g'(0) < λ`: the slot is priced out and sells nothing at this shadow price.
    BaseBelow,
    /// `g'(Δ) > λ`: the marginal stays above `λ` on the whole domain.
    ExceedsRange,
}

impl MarginalSet {
    pub fn is_empty(&self) -> bool {
        !matches!(self, MarginalSet::Interval { .. })
    }

    pub fn interval(&self) -> Option<(f64, f64)> {
        match *self {
            MarginalSet::Interval { lo, hi } => Some((lo, hi)),
            _ => None,
        }
    }
}

/// A concave, non-decreasing-then-possibly-decreasing revenue curve with `g(0) = 0`.
///
/// `value` and `marginal` are unchecked; callers that need the `[0, Δ]`
/// domain check go through [`RevenueFunction::eval`] and
/// [`RevenueFunction::derivative`].
pub trait RevenueFunction: fmt::Debug + Send + Sync {
    fn value(&self, v: f64) -> f64;

    fn marginal(&self, v: f64) -> f64;

    fn base_price(&self) -> f64 {
        self.marginal(0.0)
    }

    /// Smallest maximizer of the curve on `[0, delta]`.
    fn argmax_on(&self, delta: f64) -> f64 {
        bisect_argmax(self, delta)
    }

    /// Smallest `v` with `g(v) = target`, searched on `[0, v̂]`.
    fn solve_value(&self, target: f64, delta: f64) -> Result<f64, RevenueError> {
        bisect_value(self, target, delta)
    }

    fn solve_marginal(&self, lambda: f64, delta: f64) -> MarginalSet {
        bisect_marginal(self, lambda, delta)
    }

    /// Unit price when the curve is `p·v`.
    fn linear_price(&self) -> Option<f64> {
        None
    }

    /// Built-in families are concave by their parameter checks and skip the probe.
    fn concave_by_construction(&self) -> bool {
        false
    }

    fn eval(&self, v: f64, delta: f64) -> Result<f64, RevenueError> {
        check_domain(v, delta)?;
        Ok(self.value(v))
    }

    fn derivative(&self, v: f64, delta: f64) -> Result<f64, RevenueError> {
        check_domain(v, delta)?;
        Ok(self.marginal(v))
    }
}

fn check_domain(v: f64, delta: f64) -> Result<(), RevenueError> {
    if !(0.0..=delta).contains(&v) {
        return Err(RevenueError::OutOfDomain { v, delta });
    }
    Ok(())
}

/// Smallest `x` in `[lo, hi]` for which the monotone predicate holds,
/// assuming it fails at `lo` and holds at `hi`. Runs to machine precision.
pub(crate) fn bisect_boundary(mut lo: f64, mut hi: f64, mut holds: impl FnMut(f64) -> bool) -> f64 {
    for _ in 0..MAX_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

pub fn bisect_argmax<F: RevenueFunction + ?Sized>(f: &F, delta: f64) -> f64 {
    if f.marginal(delta) > 0.0 {
        return delta;
    }
    if f.marginal(0.0) <= 0.0 {
        return 0.0;
    }
    bisect_boundary(0.0, delta, |v| f.marginal(v) <= 0.0)
}

pub fn bisect_value<F: RevenueFunction + ?Sized>(f: &F, target: f64, delta: f64) -> Result<f64, RevenueError> {
    let vhat = f.argmax_on(delta);
    let top = f.value(vhat);
    match value_target_shortcut(target, top, vhat)? {
        Some(v) => Ok(v),
        None => Ok(bisect_boundary(0.0, vhat, |v| f.value(v) >= target)),
    }
}

/// Handles the targets every `solve_value` implementation treats alike:
/// zero, the maximum, and the unreachable/negative error cases.
fn value_target_shortcut(target: f64, top: f64, vhat: f64) -> Result<Option<f64>, RevenueError> {
    if target < 0.0 {
        if target >= -VALUE_TOL {
            return Ok(Some(0.0));
        }
        return Err(RevenueError::NegativeTarget(target));
    }
    if target == 0.0 {
        return Ok(Some(0.0));
    }
    if target >= top {
        if target - top > VALUE_TOL * target.max(1.0) {
            return Err(RevenueError::UnreachableTarget { target, max: top });
        }
        return Ok(Some(vhat));
    }
    Ok(None)
}

pub fn bisect_marginal<F: RevenueFunction + ?Sized>(f: &F, lambda: f64, delta: f64) -> MarginalSet {
    let at_zero = f.marginal(0.0);
    let at_delta = f.marginal(delta);
    if at_zero < lambda {
        return MarginalSet::BaseBelow;
    }
    if at_delta > lambda {
        return MarginalSet::ExceedsRange;
    }
    let lo = if at_zero <= lambda { 0.0 } else { bisect_boundary(0.0, delta, |v| f.marginal(v) <= lambda) };
    let hi = if at_delta >= lambda { delta } else { bisect_boundary(0.0, delta, |v| f.marginal(v) < lambda) };
    MarginalSet::Interval { lo, hi: hi.max(lo) }
}

fn check_price(p: f64) -> Result<(), RevenueError> {
    if !(p.is_finite() && p > 0.0) {
        return Err(RevenueError::InvalidParameter(format!("base price must be positive, got {p}")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<(), RevenueError> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(RevenueError::InvalidParameter(format!("elasticity slope must be non-negative, got {alpha}")));
    }
    Ok(())
}

/// `g(v) = p·v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearRevenue {
    p: f64,
}

impl LinearRevenue {
    pub fn new(p: f64) -> Result<Self, RevenueError> {
        check_price(p)?;
        Ok(Self { p })
    }

    pub fn price(&self) -> f64 {
        self.p
    }
}

impl RevenueFunction for LinearRevenue {
    fn value(&self, v: f64) -> f64 {
        self.p * v
    }

    fn marginal(&self, _v: f64) -> f64 {
        self.p
    }

    fn argmax_on(&self, delta: f64) -> f64 {
        delta
    }

    fn solve_value(&self, target: f64, delta: f64) -> Result<f64, RevenueError> {
        match value_target_shortcut(target, self.p * delta, delta)? {
            Some(v) => Ok(v),
            None => Ok((target / self.p).min(delta)),
        }
    }

    fn solve_marginal(&self, lambda: f64, delta: f64) -> MarginalSet {
        if self.p < lambda {
            MarginalSet::BaseBelow
        } else if self.p > lambda {
            MarginalSet::ExceedsRange
        } else {
            MarginalSet::Interval { lo: 0.0, hi: delta }
        }
    }

    fn linear_price(&self) -> Option<f64> {
        Some(self.p)
    }

    fn concave_by_construction(&self) -> bool {
        true
    }
}

/// `g(v) = (p − α·v)·v`: one-way trading with a linear price impact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearElasticityRevenue {
    p: f64,
    alpha: f64,
}

impl LinearElasticityRevenue {
    pub fn new(p: f64, alpha: f64) -> Result<Self, RevenueError> {
        check_price(p)?;
        check_alpha(alpha)?;
        Ok(Self { p, alpha })
    }

    pub fn price(&self) -> f64 {
        self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl RevenueFunction for LinearElasticityRevenue {
    fn value(&self, v: f64) -> f64 {
        (self.p - self.alpha * v) * v
    }

    fn marginal(&self, v: f64) -> f64 {
        self.p - 2.0 * self.alpha * v
    }

    fn argmax_on(&self, delta: f64) -> f64 {
        if self.alpha > 0.0 {
            (self.p / (2.0 * self.alpha)).min(delta)
        } else {
            delta
        }
    }

    fn solve_value(&self, target: f64, delta: f64) -> Result<f64, RevenueError> {
        let vhat = self.argmax_on(delta);
        match value_target_shortcut(target, self.value(vhat), vhat)? {
            Some(v) => Ok(v),
            None if self.alpha == 0.0 => Ok(target / self.p),
            None => {
                // Smaller root of α v² − p v + target = 0, in the cancellation-free form.
                let disc = (self.p * self.p - 4.0 * self.alpha * target).max(0.0);
                Ok((2.0 * target / (self.p + disc.sqrt())).min(vhat))
            }
        }
    }

    fn solve_marginal(&self, lambda: f64, delta: f64) -> MarginalSet {
        if self.p < lambda {
            return MarginalSet::BaseBelow;
        }
        if self.alpha == 0.0 {
            return LinearRevenue { p: self.p }.solve_marginal(lambda, delta);
        }
        let v = (self.p - lambda) / (2.0 * self.alpha);
        if v > delta {
            MarginalSet::ExceedsRange
        } else {
            MarginalSet::Interval { lo: v, hi: v }
        }
    }

    fn linear_price(&self) -> Option<f64> {
        (self.alpha == 0.0).then_some(self.p)
    }

    fn concave_by_construction(&self) -> bool {
        true
    }
}

/// `g(v) = (p − α·v^β)·v` with `β ≥ 1`, so the price impact `α·v^β` is convex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerElasticityRevenue {
    p: f64,
    alpha: f64,
    beta: f64,
}

impl PowerElasticityRevenue {
    pub fn new(p: f64, alpha: f64, beta: f64) -> Result<Self, RevenueError> {
        check_price(p)?;
        check_alpha(alpha)?;
        if !(beta.is_finite() && beta >= 1.0) {
            return Err(RevenueError::InvalidParameter(format!("exponent must be >= 1, got {beta}")));
        }
        Ok(Self { p, alpha, beta })
    }

    pub fn price(&self) -> f64 {
        self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Quantity at which the marginal equals `lambda`, ignoring the domain cap.
    fn marginal_root(&self, lambda: f64) -> f64 {
        ((self.p - lambda) / (self.alpha * (self.beta + 1.0))).powf(1.0 / self.beta)
    }
}

impl RevenueFunction for PowerElasticityRevenue {
    fn value(&self, v: f64) -> f64 {
        (self.p - self.alpha * v.powf(self.beta)) * v
    }

    fn marginal(&self, v: f64) -> f64 {
        self.p - self.alpha * (self.beta + 1.0) * v.powf(self.beta)
    }

    fn argmax_on(&self, delta: f64) -> f64 {
        if self.alpha > 0.0 {
            self.marginal_root(0.0).min(delta)
        } else {
            delta
        }
    }

    fn solve_marginal(&self, lambda: f64, delta: f64) -> MarginalSet {
        if self.p < lambda {
            return MarginalSet::BaseBelow;
        }
        if self.alpha == 0.0 {
            return LinearRevenue { p: self.p }.solve_marginal(lambda, delta);
        }
        let v = self.marginal_root(lambda);
        if v > delta {
            MarginalSet::ExceedsRange
        } else {
            MarginalSet::Interval { lo: v, hi: v }
        }
    }

    fn linear_price(&self) -> Option<f64> {
        (self.alpha == 0.0).then_some(self.p)
    }

    fn concave_by_construction(&self) -> bool {
        true
    }
}

/// One slot of an input sequence: a built-in family or a user-supplied curve.
#[derive(Debug, Clone)]
pub enum Curve {
    Linear(LinearRevenue),
    LinearElastic(LinearElasticityRevenue),
    PowerElastic(PowerElasticityRevenue),
    Custom(Arc<dyn RevenueFunction>),
}

impl Curve {
    pub fn linear(p: f64) -> Result<Self, RevenueError> {
        LinearRevenue::new(p).map(Curve::Linear)
    }

    pub fn linear_elastic(p: f64, alpha: f64) -> Result<Self, RevenueError> {
        LinearElasticityRevenue::new(p, alpha).map(Curve::LinearElastic)
    }

    pub fn power_elastic(p: f64, alpha: f64, beta: f64) -> Result<Self, RevenueError> {
        PowerElasticityRevenue::new(p, alpha, beta).map(Curve::PowerElastic)
    }

    pub fn custom(f: impl RevenueFunction + 'static) -> Self {
        Curve::Custom(Arc::new(f))
    }
}

macro_rules! dispatch {
    ($self:expr, $f:ident => $body:expr) => {
        match $self {
            Curve::Linear($f) => $body,
            Curve::LinearElastic($f) => $body,
            Curve::PowerElastic($f) => $body,
            Curve::Custom($f) => $body,
        }
    };
}

impl RevenueFunction for Curve {
    fn value(&self, v: f64) -> f64 {
        dispatch!(self, f => f.value(v))
    }

    fn marginal(&self, v: f64) -> f64 {
        dispatch!(self, f => f.marginal(v))
    }

    fn base_price(&self) -> f64 {
        dispatch!(self, f => f.base_price())
    }

    fn argmax_on(&self, delta: f64) -> f64 {
        dispatch!(self, f => f.argmax_on(delta))
    }

    fn solve_value(&self, target: f64, delta: f64) -> Result<f64, RevenueError> {
        dispatch!(self, f => f.solve_value(target, delta))
    }

    fn solve_marginal(&self, lambda: f64, delta: f64) -> MarginalSet {
        dispatch!(self, f => f.solve_marginal(lambda, delta))
    }

    fn linear_price(&self) -> Option<f64> {
        dispatch!(self, f => f.linear_price())
    }

    fn concave_by_construction(&self) -> bool {
        dispatch!(self, f => f.concave_by_construction())
    }
}

/// Built-in curve families, used by generators and the `c` computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Linear,
    LinearElastic,
    PowerElastic,
    /// Each slot draws one of the three families uniformly.
    Mixed,
}

impl std::str::FromStr for FamilyKind {
    type Err = RevenueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(FamilyKind::Linear),
            "linear_elastic" => Ok(FamilyKind::LinearElastic),
            "power_elastic" => Ok(FamilyKind::PowerElastic),
            "mixed" => Ok(FamilyKind::Mixed),
            other => Err(RevenueError::InvalidParameter(format!("unknown family \"{other}\""))),
        }
    }
}

/// Closed parameter ranges `(lo, hi)` of a family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRanges {
    pub price: (f64, f64),
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
}

impl ParamRanges {
    pub fn linear(price: (f64, f64)) -> Self {
        Self { price, alpha: (0.0, 0.0), beta: (1.0, 1.0) }
    }

    pub fn validate(&self) -> Result<(), RevenueError> {
        let ok = |(lo, hi): (f64, f64), min: f64| lo.is_finite() && hi.is_finite() && lo >= min && lo <= hi;
        if !ok(self.price, f64::MIN_POSITIVE) {
            return Err(RevenueError::InvalidParameter(format!("bad price range {:?}", self.price)));
        }
        if !ok(self.alpha, 0.0) {
            return Err(RevenueError::InvalidParameter(format!("bad alpha range {:?}", self.alpha)));
        }
        if !ok(self.beta, 1.0) {
            return Err(RevenueError::InvalidParameter(format!("bad beta range {:?}", self.beta)));
        }
        Ok(())
    }
}

const PROBE_TRIPLES: usize = 200;
const PROBE_SEED: u64 = 0x5eed_c0de;

/// Concavity probe on random chord triples over `[0, delta]`, plus the
/// `g(0) = 0` and positive-base-price conditions.
pub fn probe_concavity<F: RevenueFunction + ?Sized>(f: &F, delta: f64) -> Result<(), RevenueError> {
    let origin = f.value(0.0);
    if origin.abs() > 1e-12 {
        return Err(RevenueError::NonZeroOrigin(origin));
    }
    check_price(f.base_price())?;
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    for _ in 0..PROBE_TRIPLES {
        let mut pts = [rng.gen_range(0.0..=delta), rng.gen_range(0.0..=delta), rng.gen_range(0.0..=delta)];
        pts.sort_by(f64::total_cmp);
        let [a, b, c] = pts;
        if b - a < 1e-9 * delta || c - b < 1e-9 * delta {
            continue;
        }
        let left = (f.value(b) - f.value(a)) / (b - a);
        let right = (f.value(c) - f.value(b)) / (c - b);
        if right > left + 1e-9 * left.abs().max(1.0) {
            return Err(RevenueError::NotConcave { left, right });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[derive(Debug)]
    struct Sqrtish;

    impl RevenueFunction for Sqrtish {
        fn value(&self, v: f64) -> f64 {
            (1.0 + v).sqrt() - 1.0
        }
        fn marginal(&self, v: f64) -> f64 {
            0.5 / (1.0 + v).sqrt()
        }
    }

    #[derive(Debug)]
    struct Convex;

    impl RevenueFunction for Convex {
        fn value(&self, v: f64) -> f64 {
            v + v * v
        }
        fn marginal(&self, v: f64) -> f64 {
            1.0 + 2.0 * v
        }
    }

    #[test]
    fn eval_examples() {
        let lin = LinearRevenue::new(2.0).unwrap();
        assert_eq!(lin.eval(0.5, 1.0).unwrap(), 1.0);
        assert_eq!(lin.eval(0.0, 1.0).unwrap(), 0.0);
        let el = LinearElasticityRevenue::new(2.0, 1.0).unwrap();
        assert_eq!(el.eval(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(el.eval(0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn eval_rejects_out_of_domain() {
        let lin = LinearRevenue::new(2.0).unwrap();
        assert!(matches!(lin.eval(-0.1, 1.0), Err(RevenueError::OutOfDomain { .. })));
        assert!(matches!(lin.eval(1.5, 1.0), Err(RevenueError::OutOfDomain { .. })));
        assert!(lin.derivative(1.5, 1.0).is_err());
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(LinearRevenue::new(3.0).unwrap().derivative(0.7, 1.0).unwrap(), 3.0);
        assert_eq!(LinearElasticityRevenue::new(4.0, 1.0).unwrap().derivative(1.0, 1.0).unwrap(), 2.0);
        let pw = PowerElasticityRevenue::new(4.0, 1.0, 2.0).unwrap();
        let h = 1e-6;
        let fd = (pw.value(1.0 + h) - pw.value(1.0 - h)) / (2.0 * h);
        assert!(close(fd, 1.0, 1e-6));
        assert!(close(pw.derivative(1.0, 2.0).unwrap(), 1.0, 1e-12));
    }

    #[test]
    fn argmax_examples() {
        assert_eq!(LinearRevenue::new(2.0).unwrap().argmax_on(1.0), 1.0);
        assert_eq!(LinearElasticityRevenue::new(2.0, 1.0).unwrap().argmax_on(1.0), 1.0);
        assert_eq!(LinearElasticityRevenue::new(2.0, 2.0).unwrap().argmax_on(1.0), 0.5);
    }

    #[test]
    fn argmax_closed_forms_match_bisection() {
        let el = LinearElasticityRevenue::new(2.0, 2.0).unwrap();
        assert!(close(bisect_argmax(&el, 1.0), 0.5, 1e-12));
        let pw = PowerElasticityRevenue::new(3.0, 1.0, 2.0).unwrap();
        assert!(close(bisect_argmax(&pw, 5.0), pw.argmax_on(5.0), 1e-12));
        assert!(close(pw.argmax_on(5.0), 1.0, 1e-12));
    }

    #[test]
    fn solve_value_examples() {
        assert_eq!(LinearRevenue::new(2.0).unwrap().solve_value(1.0, 1.0).unwrap(), 0.5);
        let el = LinearElasticityRevenue::new(2.0, 1.0).unwrap();
        let v = el.solve_value(0.5, 1.0).unwrap();
        assert!(close(v, (2.0 - 2f64.sqrt()) / 2.0, 1e-12));
        assert!(close(bisect_value(&el, 0.5, 1.0).unwrap(), v, 1e-12));
        assert_eq!(el.solve_value(0.0, 1.0).unwrap(), 0.0);
        let pw = PowerElasticityRevenue::new(2.0, 0.5, 2.0).unwrap();
        assert_eq!(pw.solve_value(0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn solve_value_rejects_unreachable_target() {
        let el = LinearElasticityRevenue::new(2.0, 1.0).unwrap();
        assert!(matches!(el.solve_value(1.1, 1.0), Err(RevenueError::UnreachableTarget { .. })));
        let lin = LinearRevenue::new(2.0).unwrap();
        assert!(lin.solve_value(2.5, 1.0).is_err());
        assert!(matches!(Sqrtish.solve_value(5.0, 1.0), Err(RevenueError::UnreachableTarget { .. })));
        // within tolerance is clamped to the maximizer
        assert_eq!(el.solve_value(1.0 + 1e-12, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn solve_value_returns_smallest_root_on_plateau() {
        #[derive(Debug)]
        struct Capped;
        impl RevenueFunction for Capped {
            fn value(&self, v: f64) -> f64 {
                v.min(0.5)
            }
            fn marginal(&self, v: f64) -> f64 {
                if v < 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
        }
        assert!(close(Capped.argmax_on(1.0), 0.5, 1e-12));
        assert!(close(Capped.solve_value(0.5, 1.0).unwrap(), 0.5, 1e-12));
    }

    #[test]
    fn solve_marginal_examples() {
        let el = LinearElasticityRevenue::new(4.0, 1.0).unwrap();
        assert_eq!(el.solve_marginal(2.0, 1.0), MarginalSet::Interval { lo: 1.0, hi: 1.0 });
        let lin = LinearRevenue::new(3.0).unwrap();
        assert_eq!(lin.solve_marginal(3.0, 1.0), MarginalSet::Interval { lo: 0.0, hi: 1.0 });
        assert!(lin.solve_marginal(4.0, 1.0).is_empty());
        assert_eq!(lin.solve_marginal(4.0, 1.0), MarginalSet::BaseBelow);
        assert_eq!(lin.solve_marginal(2.0, 1.0), MarginalSet::ExceedsRange);
    }

    #[test]
    fn solve_marginal_closed_forms_match_bisection() {
        let curves = [
            Curve::linear(3.0).unwrap(),
            Curve::linear_elastic(4.0, 1.5).unwrap(),
            Curve::power_elastic(2.5, 0.7, 1.8).unwrap(),
        ];
        for c in &curves {
            for &lambda in &[0.0, 0.3, 1.0, 2.5, 3.0, 3.9, 5.0] {
                let fast = c.solve_marginal(lambda, 1.0);
                let slow = bisect_marginal(c, lambda, 1.0);
                match (fast, slow) {
                    (MarginalSet::Interval { lo: a, hi: b }, MarginalSet::Interval { lo: c2, hi: d }) => {
                        // near λ = p the marginal is flat to machine precision, limiting bisection to ~1e-9
                        assert!(close(a, c2, 1e-8) && close(b, d, 1e-8), "{c:?} at {lambda}: {a} {b} vs {c2} {d}");
                    }
                    (x, y) => assert_eq!(x, y, "{c:?} at {lambda}: {x:?} vs {y:?}"),
                }
            }
        }
    }

    #[test]
    fn generic_curve_queries() {
        let delta = 3.0;
        assert_eq!(Sqrtish.argmax_on(delta), delta);
        let v = Sqrtish.solve_value(0.5, delta).unwrap();
        assert!(close(v, 1.25, 1e-12));
        let (lo, hi) = Sqrtish.solve_marginal(0.25, delta).interval().unwrap();
        assert!(close(lo, 3.0, 1e-9) && close(hi, 3.0, 1e-9));
        let (lo, _) = Sqrtish.solve_marginal(0.4, delta).interval().unwrap();
        assert!(close(Sqrtish.marginal(lo), 0.4, 1e-12));
    }

    #[test]
    fn parameter_validation() {
        assert!(LinearRevenue::new(0.0).is_err());
        assert!(LinearRevenue::new(f64::NAN).is_err());
        assert!(LinearElasticityRevenue::new(1.0, -0.1).is_err());
        assert!(PowerElasticityRevenue::new(1.0, 0.1, 0.5).is_err());
        assert!(PowerElasticityRevenue::new(1.0, 0.1, 1.0).is_ok());
    }

    #[test]
    fn probe_accepts_concave_and_rejects_convex() {
        assert!(probe_concavity(&Sqrtish, 2.0).is_ok());
        assert!(probe_concavity(&Curve::power_elastic(3.0, 1.0, 3.0).unwrap(), 1.0).is_ok());
        assert!(matches!(probe_concavity(&Convex, 2.0), Err(RevenueError::NotConcave { .. })));
    }

    #[test]
    fn elastic_with_zero_alpha_is_linear() {
        let el = Curve::linear_elastic(2.0, 0.0).unwrap();
        assert_eq!(el.linear_price(), Some(2.0));
        assert_eq!(el.solve_marginal(2.0, 1.0), MarginalSet::Interval { lo: 0.0, hi: 1.0 });
        assert_eq!(el.solve_value(1.0, 1.0).unwrap(), 0.5);
        assert_eq!(Curve::linear_elastic(2.0, 0.1).unwrap().linear_price(), None);
    }
}
