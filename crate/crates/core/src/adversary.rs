//! Worst-case inputs, empirical Φ_Δ(π), and the stopping adversary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::offline::PrefixSolver;
use crate::online::{run_pursuit, PursuitState, RatioError};
use crate::revenue::{Curve, FamilyKind, InputSequence, ParamRanges, RevenueError, RevenueFunction};

/// Largest search space `worst_case_search` will enumerate.
pub const MAX_SEARCH_POINTS: usize = 1_000_000;

/// Largest horizon `worst_case_search` accepts.
pub const MAX_SEARCH_HORIZON: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdversaryError {
    #[error(transparent)]
    Revenue(#[from] RevenueError),
    #[error(transparent)]
    Ratio(#[from] RatioError),
    #[error("critical sequence needs n >= 1")]
    ZeroSteps,
    #[error("pi grid is empty")]
    EmptyGrid,
    #[error("pi grid is not sorted ascending at index {0}")]
    UnsortedGrid(usize),
    #[error("search horizon must be in 1..={MAX_SEARCH_HORIZON}, got {0}")]
    Horizon(usize),
    #[error("search space of {0} sequences exceeds the cap of {MAX_SEARCH_POINTS}")]
    SearchTooLarge(f64),
    #[error("candidate grid is empty")]
    NoCandidates,
    #[error("random ranges: {0}")]
    Ranges(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalSequenceSpec {
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    pub n: usize,
    pub delta: f64,
}

/// Geometric price ladder `p_i = m·θ^{(i−1)/(n−1)}` from `m` to `M`, linear slots.
pub fn critical_sequence(spec: &CriticalSequenceSpec) -> Result<InputSequence, AdversaryError> {
    let CriticalSequenceSpec { m, big_m, n, delta } = *spec;
    if n == 0 {
        return Err(AdversaryError::ZeroSteps);
    }
    if !(m > 0.0 && m <= big_m && big_m.is_finite()) {
        return Err(RevenueError::InvalidPriceBounds { m, max: big_m }.into());
    }
    let theta = big_m / m;
    let prices = (0..n).map(|i| match i {
        0 => m,
        _ if i == n - 1 => big_m,
        _ => m * theta.powf(i as f64 / (n - 1) as f64),
    });
    let curves = prices.map(Curve::linear).collect::<Result<Vec<_>, _>>()?;
    Ok(InputSequence::new(curves, delta, m, big_m)?)
}

/// Limit of Φ on fine critical sequences: `Δ(1 + ln θ)/π`.
pub fn closed_form_phi(pi: f64, delta: f64, theta: f64) -> f64 {
    delta * (1.0 + theta.ln()) / pi
}

/// Exact Φ of CR-Pursuit(π) on the `n`-step critical sequence.
pub fn discrete_phi(pi: f64, delta: f64, theta: f64, n: usize) -> f64 {
    if n <= 1 {
        return delta / pi;
    }
    let k = (n - 1) as f64;
    delta / pi * (1.0 + k * (1.0 - theta.powf(-1.0 / k)))
}

/// Total quantity CR-Pursuit(π) sells on `sequence`, overruns included.
pub fn empirical_phi(pi: f64, sequence: &InputSequence) -> Result<f64, AdversaryError> {
    Ok(run_pursuit(sequence, pi)?.inventory_used())
}

fn check_grid(grid: &[f64]) -> Result<(), AdversaryError> {
    if grid.is_empty() {
        return Err(AdversaryError::EmptyGrid);
    }
    if let Some(i) = grid.windows(2).position(|w| w[0].is_nan() || w[1].is_nan() || w[0] > w[1]) {
        return Err(AdversaryError::UnsortedGrid(i + 1));
    }
    Ok(())
}

/// `(π, Φ)` pairs along an ascending grid; `generator` builds the input for each π.
pub fn phi_curve<G>(grid: &[f64], mut generator: G) -> Result<Vec<(f64, f64)>, AdversaryError>
where
    G: FnMut(f64) -> Result<InputSequence, AdversaryError>,
{
    check_grid(grid)?;
    grid.iter().map(|&pi| Ok((pi, empirical_phi(pi, &generator(pi)?)?))).collect()
}

/// A deterministic online seller.
pub trait OnlineAlgorithm {
    fn name(&self) -> String;

    /// Prepare for a fresh run with inventory `delta`.
    fn begin(&mut self, delta: f64);

    /// Quantity to sell in the slot with revenue curve `g`.
    fn step(&mut self, g: &Curve) -> f64;
}

/// Sells as much as is profitable in the first slot.
#[derive(Debug, Clone, Default)]
pub struct Greedy {
    remaining: f64,
}

impl OnlineAlgorithm for Greedy {
    fn name(&self) -> String {
        "greedy".into()
    }

    fn begin(&mut self, delta: f64) {
        self.remaining = delta;
    }

    fn step(&mut self, g: &Curve) -> f64 {
        if self.remaining <= 0.0 {
            return 0.0;
        }
        let v = g.argmax_on(self.remaining);
        self.remaining -= v;
        v
    }
}

/// Waits for the first base price at or above `threshold`, then sells greedily.
#[derive(Debug, Clone)]
pub struct Threshold {
    threshold: f64,
    remaining: f64,
}

impl Threshold {
    pub fn new(threshold: f64) -> Self {
        Self { threshold, remaining: 0.0 }
    }
}

impl OnlineAlgorithm for Threshold {
    fn name(&self) -> String {
        format!("threshold:{}", self.threshold)
    }

    fn begin(&mut self, delta: f64) {
        self.remaining = delta;
    }

    fn step(&mut self, g: &Curve) -> f64 {
        if self.remaining <= 0.0 || g.base_price() < self.threshold {
            return 0.0;
        }
        let v = g.argmax_on(self.remaining);
        self.remaining -= v;
        v
    }
}

/// CR-Pursuit(π) as a budget-respecting seller: sales are cut at the remaining inventory.
#[derive(Debug, Clone)]
pub struct CrPursuit {
    pi: f64,
    delta: f64,
    sold: f64,
    prev_eta: f64,
    solver: PrefixSolver,
}

impl CrPursuit {
    pub fn new(pi: f64) -> Self {
        Self { pi, delta: 0.0, sold: 0.0, prev_eta: 0.0, solver: PrefixSolver::new(1.0) }
    }
}

impl OnlineAlgorithm for CrPursuit {
    fn name(&self) -> String {
        format!("cr-pursuit:{}", self.pi)
    }

    fn begin(&mut self, delta: f64) {
        self.delta = delta;
        self.sold = 0.0;
        self.prev_eta = 0.0;
        self.solver = PrefixSolver::new(delta);
    }

    fn step(&mut self, g: &Curve) -> f64 {
        let eta = self.solver.push(g).eta;
        let target = (eta - self.prev_eta).max(0.0) / self.pi;
        self.prev_eta = eta;
        let remaining = (self.delta - self.sold).max(0.0);
        let wanted = match g.solve_value(target, self.delta) {
            Ok(v) => v,
            Err(_) => g.argmax_on(self.delta),
        };
        let v = wanted.min(remaining);
        self.sold += v;
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StopperReport {
    pub algorithm: String,
    /// 1-based stopping slot, or the sequence length when no stop occurred.
    pub tau: usize,
    pub alg_revenue: f64,
    pub eta_opt: f64,
    pub ratio: f64,
    /// The algorithm fell to or below CR-Pursuit's cumulative sales.
    pub stopped: bool,
    /// The algorithm sold a negative amount or more than its inventory.
    pub budget_violated: bool,
}

/// Feed `sequence` to `alg` alongside CR-Pursuit(`pi_ref`) and stop at the
/// first slot where the algorithm's cumulative sales are no larger.
pub fn stopper(
    alg: &mut dyn OnlineAlgorithm,
    sequence: &InputSequence,
    pi_ref: f64,
) -> Result<StopperReport, AdversaryError> {
    let delta = sequence.delta();
    let mut reference = PursuitState::new(pi_ref, delta)?;
    let mut solver = PrefixSolver::new(delta);
    alg.begin(delta);
    let mut sold = 0.0;
    let mut revenue = 0.0;
    let mut budget_violated = false;
    let mut eta = 0.0;
    for (i, g) in sequence.curves().iter().enumerate() {
        eta = solver.push(g).eta;
        reference.step(g, eta)?;
        let v = alg.step(g);
        if v.is_nan() || v < 0.0 || sold + v > delta * (1.0 + 1e-9) {
            budget_violated = true;
        }
        let v = v.clamp(0.0, delta);
        sold += v;
        revenue += g.value(v);
        if sold <= reference.inventory_used() + 1e-12 * delta {
            return Ok(report(alg, i + 1, revenue, eta, true, budget_violated));
        }
    }
    Ok(report(alg, sequence.len(), revenue, eta, false, budget_violated))
}

fn report(alg: &dyn OnlineAlgorithm, tau: usize, revenue: f64, eta: f64, stopped: bool, bad: bool) -> StopperReport {
    let ratio = if revenue > 0.0 { eta / revenue } else { f64::INFINITY };
    StopperReport {
        algorithm: alg.name(),
        tau,
        alg_revenue: revenue,
        eta_opt: eta,
        ratio,
        stopped,
        budget_violated: bad,
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Seeded random sequence of `len` slots from `family` within `ranges`.
///
/// Ranges must keep every curve non-negative on `[0, Δ]`, that is
/// `α·Δ^β ≤ p` at the worst corner.
pub fn random_sequence(
    seed: u64,
    len: usize,
    family: FamilyKind,
    ranges: &ParamRanges,
    delta: f64,
    m: f64,
    big_m: f64,
) -> Result<InputSequence, AdversaryError> {
    ranges.validate()?;
    if len == 0 {
        return Err(RevenueError::EmptySequence.into());
    }
    if !(m > 0.0 && m <= big_m) {
        return Err(RevenueError::InvalidPriceBounds { m, max: big_m }.into());
    }
    if ranges.price.0 < m || ranges.price.1 > big_m {
        return Err(AdversaryError::Ranges(format!("price range {:?} outside [{m}, {big_m}]", ranges.price)));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(RevenueError::InvalidInventory(delta).into());
    }
    let worst_power = |b: f64| ranges.alpha.1 * delta.powf(b);
    let worst = match family {
        FamilyKind::Linear => 0.0,
        FamilyKind::LinearElastic => ranges.alpha.1 * delta,
        FamilyKind::PowerElastic | FamilyKind::Mixed => {
            worst_power(ranges.beta.0).max(worst_power(ranges.beta.1)).max(ranges.alpha.1 * delta)
        }
    };
    if worst > ranges.price.0 * (1.0 + 1e-12) {
        return Err(AdversaryError::Ranges(format!(
            "alpha up to {} makes revenue negative before delta at price {}",
            ranges.alpha.1, ranges.price.0
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut curves = Vec::with_capacity(len);
    for _ in 0..len {
        let kind = match family {
            FamilyKind::Mixed => {
                [FamilyKind::Linear, FamilyKind::LinearElastic, FamilyKind::PowerElastic][rng.gen_range(0..3)]
            }
            k => k,
        };
        let p = uniform(&mut rng, ranges.price);
        let curve = match kind {
            FamilyKind::LinearElastic => Curve::linear_elastic(p, uniform(&mut rng, ranges.alpha))?,
            FamilyKind::PowerElastic => {
                let a = uniform(&mut rng, ranges.alpha);
                Curve::power_elastic(p, a, uniform(&mut rng, ranges.beta))?
            }
            _ => Curve::linear(p)?,
        };
        curves.push(curve);
    }
    Ok(InputSequence::new(curves, delta, m, big_m)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct WorstCaseReport {
    /// Candidate index chosen at each slot.
    pub choice: Vec<usize>,
    pub phi: f64,
    pub v_bar: Vec<f64>,
    /// `g'_t(v̄_t)` of the chosen sequence.
    pub marginals: Vec<f64>,
    pub marginals_non_decreasing: bool,
    pub evaluated: usize,
    #[serde(skip)]
    pub sequence: InputSequence,
}

struct Search<'a> {
    candidates: &'a [Curve],
    horizon: usize,
    choice: Vec<usize>,
    best_phi: f64,
    maximizers: Vec<(Vec<usize>, Vec<f64>)>,
    evaluated: usize,
}

impl Search<'_> {
    fn descend(&mut self, solver: &PrefixSolver, state: &PursuitState) -> Result<(), AdversaryError> {
        if self.choice.len() == self.horizon {
            self.evaluated += 1;
            let phi = state.inventory_used();
            let tie = 1e-12 * phi.abs();
            if phi > self.best_phi + tie {
                self.best_phi = phi;
                self.maximizers.clear();
            }
            if (phi - self.best_phi).abs() <= tie {
                let v_bar = state.trace().iter().map(|r| r.v_bar).collect();
                self.maximizers.push((self.choice.clone(), v_bar));
            }
            return Ok(());
        }
        for (i, g) in self.candidates.iter().enumerate() {
            let mut s = solver.clone();
            let mut st = state.clone();
            let eta = s.push(g).eta;
            st.step(g, eta)?;
            self.choice.push(i);
            self.descend(&s, &st)?;
            self.choice.pop();
        }
        Ok(())
    }
}

/// Exhaustive search over `candidates^horizon` for the sequence maximizing Φ_Δ(π).
///
/// Among equal maximizers (relative tolerance 1e-12) the first one in
/// lexicographic order whose marginals `g'_t(v̄_t)` are non-decreasing wins;
/// failing that, the first maximizer is returned with the flag cleared.
pub fn worst_case_search(
    horizon: usize,
    pi: f64,
    candidates: &[Curve],
    delta: f64,
    m: f64,
    big_m: f64,
) -> Result<WorstCaseReport, AdversaryError> {
    if horizon == 0 || horizon > MAX_SEARCH_HORIZON {
        return Err(AdversaryError::Horizon(horizon));
    }
    if candidates.is_empty() {
        return Err(AdversaryError::NoCandidates);
    }
    let size = (candidates.len() as f64).powi(horizon as i32);
    if size > MAX_SEARCH_POINTS as f64 {
        return Err(AdversaryError::SearchTooLarge(size));
    }
    // validates every candidate against the problem constants
    InputSequence::new(candidates.to_vec(), delta, m, big_m)?;
    let mut search = Search {
        candidates,
        horizon,
        choice: Vec::with_capacity(horizon),
        best_phi: f64::NEG_INFINITY,
        maximizers: Vec::new(),
        evaluated: 0,
    };
    search.descend(&PrefixSolver::new(delta), &PursuitState::new(pi, delta)?)?;
    let marginals_of = |choice: &[usize], v_bar: &[f64]| -> Vec<f64> {
        choice.iter().zip(v_bar).map(|(&i, &v)| candidates[i].marginal(v)).collect()
    };
    let non_decreasing = |ms: &[f64]| ms.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0));
    let picked = search
        .maximizers
        .iter()
        .find(|(c, v)| non_decreasing(&marginals_of(c, v)))
        .unwrap_or(&search.maximizers[0])
        .clone();
    let (choice, v_bar) = picked;
    let marginals = marginals_of(&choice, &v_bar);
    let curves = choice.iter().map(|&i| candidates[i].clone()).collect();
    Ok(WorstCaseReport {
        marginals_non_decreasing: non_decreasing(&marginals),
        sequence: InputSequence::new(curves, delta, m, big_m)?,
        phi: search.best_phi,
        choice,
        v_bar,
        marginals,
        evaluated: search.evaluated,
    })
}
