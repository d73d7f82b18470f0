#![allow(dead_code)]

use std::f64::consts::E;

use crp_core::adversary::random_sequence;
use crp_core::revenue::{FamilyKind, InputSequence, ParamRanges, RevenueFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Max-plus convolution over a uniform grid of `steps + 1` points: the exact
/// optimum of the discretized problem.
pub fn grid_optimum(seq: &InputSequence, steps: usize) -> f64 {
    let h = seq.delta() / steps as f64;
    let mut best = vec![0.0f64; steps + 1];
    for c in seq.curves() {
        let vals: Vec<f64> = (0..=steps).map(|j| c.value(j as f64 * h)).collect();
        let mut next = vec![f64::NEG_INFINITY; steps + 1];
        for (k, slot) in next.iter_mut().enumerate() {
            let mut acc = f64::NEG_INFINITY;
            for j in 0..=k {
                acc = acc.max(best[k - j] + vals[j]);
            }
            *slot = acc;
        }
        best = next;
    }
    best.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Same slots reordered by ascending base price.
pub fn ascending(seq: &InputSequence) -> InputSequence {
    let mut curves = seq.curves().to_vec();
    curves.sort_by(|a, b| a.base_price().total_cmp(&b.base_price()));
    InputSequence::new(curves, seq.delta(), seq.min_price(), seq.max_price()).unwrap()
}

fn length(seed: u64, max_len: usize) -> usize {
    ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5_5a5a).gen_range(1..=max_len)
}

/// Random sequences with `θ = e`, `Δ = 1`, lengths in `1..=max_len`; every
/// other member is sorted into ascending prices, the hard case for pursuit.
pub fn ensemble(
    family: FamilyKind,
    ranges: &ParamRanges,
    count: usize,
    max_len: usize,
    seed0: u64,
) -> Vec<InputSequence> {
    (0..count)
        .map(|i| {
            let seed = seed0 + i as u64;
            let seq = random_sequence(seed, length(seed, max_len), family, ranges, 1.0, 1.0, E).unwrap();
            if i % 2 == 1 {
                ascending(&seq)
            } else {
                seq
            }
        })
        .collect()
}

pub fn linear_ranges() -> ParamRanges {
    ParamRanges::linear((1.0, E))
}

/// `α ≤ 1` keeps `(p − αv)v ≥ 0` on `[0, 1]` for every `p ≥ 1`.
pub fn elastic_ranges() -> ParamRanges {
    ParamRanges { price: (1.0, E), alpha: (0.0, 1.0), beta: (1.0, 1.0) }
}

pub fn mixed_ranges() -> ParamRanges {
    ParamRanges { price: (1.0, E), alpha: (0.0, 1.0), beta: (1.0, 3.0) }
}
