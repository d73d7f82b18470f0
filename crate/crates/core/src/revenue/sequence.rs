use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{probe_concavity, Curve, RevenueError, RevenueFunction};

/// Relative slack when checking base prices against `[m, M]`.
const PRICE_BOUND_TOL: f64 = 1e-12;

/// An ordered list of revenue curves with the problem constants `Δ`, `m`, `M`.
#[derive(Debug, Clone)]
pub struct InputSequence {
    curves: Vec<Curve>,
    delta: f64,
    min_price: f64,
    max_price: f64,
}

impl InputSequence {
    pub fn new(curves: Vec<Curve>, delta: f64, min_price: f64, max_price: f64) -> Result<Self, RevenueError> {
        if curves.is_empty() {
            return Err(RevenueError::EmptySequence);
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(RevenueError::InvalidInventory(delta));
        }
        if !(min_price.is_finite() && max_price.is_finite() && min_price > 0.0 && min_price <= max_price) {
            return Err(RevenueError::InvalidPriceBounds { m: min_price, max: max_price });
        }
        for (i, curve) in curves.iter().enumerate() {
            let slot = i + 1;
            let price = curve.base_price();
            if price < min_price * (1.0 - PRICE_BOUND_TOL) || price > max_price * (1.0 + PRICE_BOUND_TOL) {
                return Err(RevenueError::BasePriceOutOfBounds { slot, price, m: min_price, max: max_price });
            }
            if !curve.concave_by_construction() {
                probe_concavity(curve, delta)?;
            }
            // g(0) = 0 and concavity make g(Δ) >= 0 equivalent to g >= 0 on [0, Δ].
            let end = curve.value(delta);
            if end < -1e-12 * price * delta {
                return Err(RevenueError::NegativeRevenue { slot, value: end });
            }
        }
        Ok(Self { curves, delta, min_price, max_price })
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    /// Always false; construction rejects empty sequences.
    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn min_price(&self) -> f64 {
        self.min_price
    }

    pub fn max_price(&self) -> f64 {
        self.max_price
    }

    pub fn theta(&self) -> f64 {
        self.max_price / self.min_price
    }

    pub fn base_prices(&self) -> impl Iterator<Item = f64> + '_ {
        self.curves.iter().map(|c| c.base_price())
    }

    pub fn is_all_linear(&self) -> bool {
        self.curves.iter().all(|c| c.linear_price().is_some())
    }

    /// The first `len` slots, `σ^[1:len]`.
    pub fn prefix(&self, len: usize) -> Result<Self, RevenueError> {
        if len == 0 || len > self.len() {
            return Err(RevenueError::SlotOutOfRange { slot: len, len: self.len() });
        }
        Ok(Self { curves: self.curves[..len].to_vec(), ..self.clone_constants() })
    }

    /// Copy with slots `tau` and `tau + 1` (1-based) interchanged.
    pub fn swapped(&self, tau: usize) -> Result<Self, RevenueError> {
        if tau == 0 || tau >= self.len() {
            return Err(RevenueError::SlotOutOfRange { slot: tau, len: self.len() });
        }
        let mut curves = self.curves.clone();
        curves.swap(tau - 1, tau);
        Ok(Self { curves, ..self.clone_constants() })
    }

    fn clone_constants(&self) -> Self {
        Self { curves: Vec::new(), delta: self.delta, min_price: self.min_price, max_price: self.max_price }
    }

    pub fn to_file(&self) -> Result<SequenceFile, SequenceFormatError> {
        let slots = self
            .curves
            .iter()
            .enumerate()
            .map(|(i, c)| SlotRecord::from_curve(c).ok_or(SequenceFormatError::Unserializable { slot: i + 1 }))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SequenceFile { delta: self.delta, m: self.min_price, big_m: self.max_price, slots })
    }

    pub fn to_json(&self) -> Result<String, SequenceFormatError> {
        Ok(serde_json::to_string_pretty(&self.to_file()?)?)
    }

    pub fn from_json(text: &str) -> Result<Self, SequenceFormatError> {
        let file: SequenceFile = serde_json::from_str(text)?;
        file.into_sequence()
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, SequenceFormatError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| SequenceFormatError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Error)]
pub enum SequenceFormatError {
    #[error("malformed sequence JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("slot {slot}: {message}")]
    Slot { slot: usize, message: String },
    #[error(transparent)]
    Invalid(#[from] RevenueError),
    #[error("slot {slot} holds a custom curve with no file representation")]
    Unserializable { slot: usize },
}

/// On-disk sequence: `{"delta", "m", "M", "slots": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceFile {
    pub delta: f64,
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    pub slots: Vec<SlotRecord>,
}

impl SequenceFile {
    pub fn into_sequence(self) -> Result<InputSequence, SequenceFormatError> {
        let curves = self.slots.iter().enumerate().map(|(i, s)| s.to_curve(i + 1)).collect::<Result<Vec<_>, _>>()?;
        Ok(InputSequence::new(curves, self.delta, self.m, self.big_m)?)
    }
}

/// One slot: `{"kind": "linear"|"linear_elastic"|"power_elastic", "p", "alpha"?, "beta"?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotRecord {
    pub kind: String,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl SlotRecord {
    fn from_curve(curve: &Curve) -> Option<Self> {
        let rec = match curve {
            Curve::Linear(f) => Self { kind: "linear".into(), p: f.price(), alpha: None, beta: None },
            Curve::LinearElastic(f) => {
                Self { kind: "linear_elastic".into(), p: f.price(), alpha: Some(f.alpha()), beta: None }
            }
            Curve::PowerElastic(f) => {
                Self { kind: "power_elastic".into(), p: f.price(), alpha: Some(f.alpha()), beta: Some(f.beta()) }
            }
            Curve::Custom(_) => return None,
        };
        Some(rec)
    }

    fn to_curve(&self, slot: usize) -> Result<Curve, SequenceFormatError> {
        let fail = |message: String| SequenceFormatError::Slot { slot, message };
        let need =
            |field: Option<f64>, name: &str| field.ok_or_else(|| fail(format!("{} requires \"{name}\"", self.kind)));
        let curve = match self.kind.as_str() {
            "linear" => {
                if self.alpha.is_some() || self.beta.is_some() {
                    return Err(fail("linear slots take only \"p\"".into()));
                }
                Curve::linear(self.p)
            }
            "linear_elastic" => {
                if self.beta.is_some() {
                    return Err(fail("linear_elastic slots take no \"beta\"".into()));
                }
                Curve::linear_elastic(self.p, need(self.alpha, "alpha")?)
            }
            "power_elastic" => Curve::power_elastic(self.p, need(self.alpha, "alpha")?, need(self.beta, "beta")?),
            other => return Err(fail(format!("unknown kind \"{other}\""))),
        };
        curve.map_err(|e| fail(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_seq(prices: &[f64]) -> InputSequence {
        let curves = prices.iter().map(|&p| Curve::linear(p).unwrap()).collect();
        InputSequence::new(curves, 1.0, 1.0, 3.0).unwrap()
    }

    #[test]
    fn rejects_invalid_constants() {
        let c = vec![Curve::linear(2.0).unwrap()];
        assert_eq!(InputSequence::new(vec![], 1.0, 1.0, 2.0).unwrap_err(), RevenueError::EmptySequence);
        assert!(matches!(InputSequence::new(c.clone(), 0.0, 1.0, 2.0), Err(RevenueError::InvalidInventory(_))));
        assert!(matches!(InputSequence::new(c.clone(), 1.0, 2.5, 2.0), Err(RevenueError::InvalidPriceBounds { .. })));
        assert!(matches!(
            InputSequence::new(c, 1.0, 2.5, 3.0),
            Err(RevenueError::BasePriceOutOfBounds { slot: 1, .. })
        ));
    }

    #[test]
    fn rejects_curve_negative_at_full_inventory() {
        let c = vec![Curve::linear_elastic(1.0, 2.0).unwrap()];
        assert!(matches!(InputSequence::new(c, 1.0, 1.0, 1.0), Err(RevenueError::NegativeRevenue { slot: 1, .. })));
    }

    #[test]
    fn theta_prefix_and_swap() {
        let s = linear_seq(&[1.0, 3.0, 2.0]);
        assert_eq!(s.theta(), 3.0);
        let p: Vec<f64> = s.prefix(2).unwrap().base_prices().collect();
        assert_eq!(p, vec![1.0, 3.0]);
        let w: Vec<f64> = s.swapped(2).unwrap().base_prices().collect();
        assert_eq!(w, vec![1.0, 2.0, 3.0]);
        assert!(s.prefix(0).is_err());
        assert!(s.prefix(4).is_err());
        assert!(s.swapped(3).is_err());
    }

    #[test]
    fn parses_file_format() {
        let text = r#"{"delta": 2.0, "m": 1.0, "M": 4.0, "slots": [
            {"kind": "linear", "p": 2.0},
            {"kind": "linear_elastic", "p": 3.0, "alpha": 0.5},
            {"kind": "power_elastic", "p": 4.0, "alpha": 0.1, "beta": 2.0}
        ]}"#;
        let s = InputSequence::from_json(text).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.delta(), 2.0);
        assert!(!s.is_all_linear());
        let back = InputSequence::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back.to_file().unwrap(), s.to_file().unwrap());
    }

    #[test]
    fn rejects_malformed_files() {
        let cases = [
            r#"{"delta": 1, "m": 1, "M": 2, "slots": []}"#,
            r#"{"delta": 1, "m": 1, "M": 2, "slots": [{"kind": "cubic", "p": 1}]}"#,
            r#"{"delta": 1, "m": 1, "M": 2, "slots": [{"kind": "linear_elastic", "p": 1}]}"#,
            r#"{"delta": 1, "m": 1, "M": 2, "slots": [{"kind": "linear", "p": 1, "alpha": 1}]}"#,
            r#"{"delta": 1, "m": 1, "M": 2, "slots": [{"kind": "linear", "p": 1, "gamma": 1}]}"#,
            r#"{"delta": 1, "m": 1, "M": 2, "extra": 0, "slots": [{"kind": "linear", "p": 1}]}"#,
            r#"{"delta": 1, "m": 1, "slots": [{"kind": "linear", "p": 1}]}"#,
        ];
        for text in cases {
            assert!(InputSequence::from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn custom_curves_are_probed_and_not_serializable() {
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
        let err = InputSequence::new(vec![Curve::custom(Convex)], 1.0, 1.0, 1.0).unwrap_err();
        assert!(matches!(err, RevenueError::NotConcave { .. }));

        #[derive(Debug)]
        struct Log;
        impl RevenueFunction for Log {
            fn value(&self, v: f64) -> f64 {
                (1.0 + v).ln()
            }
            fn marginal(&self, v: f64) -> f64 {
                1.0 / (1.0 + v)
            }
        }
        let s = InputSequence::new(vec![Curve::custom(Log)], 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(s.to_json(), Err(SequenceFormatError::Unserializable { slot: 1 })));
    }
}
