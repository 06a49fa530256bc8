//! Limit extrapolation for finite sequences.

use serde::{Deserialize, Serialize};

use crate::error::{HitError, Result};

/// Default bracket width under which an extrapolation counts as converged.
pub const DEFAULT_EXTRAPOLATION_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtrapolationMethod {
    Aitken,
    Last,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub limit: f64,
    pub bracket: (f64, f64),
    pub converged: bool,
    pub method: ExtrapolationMethod,
}

fn aitken(a: f64, b: f64, c: f64) -> f64 {
    let d1 = b - a;
    let d2 = c - b;
    c - d2 * d2 / (d2 - d1)
}

/// Estimates the limit of `values` (ordered by index).
///
/// Aitken's Δ² is used when the last three increment ratios are stable (spread
/// below 0.2) and contracting; otherwise the last value is returned. The
/// bracket spans the last three (accelerated or raw) values.
pub fn extrapolate_limit(points: &[(f64, f64)], tol: f64) -> Result<Extrapolation> {
    if points.len() < 4 {
        return Err(HitError::Precondition(format!(
            "extrapolation needs at least 4 points, got {}",
            points.len()
        )));
    }
    let v: Vec<f64> = points.iter().map(|p| p.1).collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(HitError::Precondition("extrapolation input must be finite".into()));
    }
    let inc: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    let ratios: Vec<f64> = inc.windows(2).map(|w| w[1] / w[0]).collect();
    let recent = &ratios[ratios.len().saturating_sub(3)..];
    let stable = recent.iter().all(|r| r.is_finite() && r.abs() < 1.0)
        && recent.iter().cloned().fold(f64::MIN, f64::max)
            - recent.iter().cloned().fold(f64::MAX, f64::min)
            < 0.2;

    let (candidates, method) = if stable {
        let acc: Vec<f64> = v.windows(3).map(|w| aitken(w[0], w[1], w[2])).collect();
        (acc[acc.len().saturating_sub(3)..].to_vec(), ExtrapolationMethod::Aitken)
    } else {
        (v[v.len() - 3..].to_vec(), ExtrapolationMethod::Last)
    };
    let lo = candidates.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = candidates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(Extrapolation {
        limit: *candidates.last().unwrap(),
        bracket: (lo, hi),
        converged: hi - lo <= tol,
        method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn indexed(v: &[f64]) -> Vec<(f64, f64)> {
        v.iter().enumerate().map(|(i, &x)| (i as f64 + 1.0, x)).collect()
    }

    #[test]
    fn constant_sequence() {
        let e = extrapolate_limit(&indexed(&[0.7; 6]), 1e-9).unwrap();
        assert_eq!(e.limit, 0.7);
        assert_eq!(e.bracket, (0.7, 0.7));
        assert!(e.converged);
    }

    #[test]
    fn geometric_tail_is_accelerated() {
        let v: Vec<f64> = (1..=10).map(|n| 1.0 - 0.5f64.powi(n)).collect();
        let e = extrapolate_limit(&indexed(&v), 1e-3).unwrap();
        assert_eq!(e.method, ExtrapolationMethod::Aitken);
        assert!((e.limit - 1.0).abs() < 1e-3);
        assert!(e.converged);
    }

    #[test]
    fn oscillation_does_not_converge() {
        let v: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let e = extrapolate_limit(&indexed(&v), 1e-3).unwrap();
        assert!(!e.converged);
        assert_eq!(e.bracket, (-1.0, 1.0));
    }

    #[test]
    fn too_few_points() {
        assert!(extrapolate_limit(&indexed(&[1.0, 2.0, 3.0]), 1e-3).is_err());
    }

    proptest! {
        #[test]
        fn limit_lies_in_bracket(v in proptest::collection::vec(-10.0f64..10.0, 4..20)) {
            let e = extrapolate_limit(&indexed(&v), 1e-3).unwrap();
            prop_assert!(e.bracket.0 <= e.limit && e.limit <= e.bracket.1);
        }

        #[test]
        fn geometric_limits_recovered(c in -5.0f64..5.0, a in 0.1f64..3.0, r in 0.05f64..0.8) {
            let v: Vec<f64> = (1..=8).map(|n| c + a * r.powi(n)).collect();
            let e = extrapolate_limit(&indexed(&v), 1e-6).unwrap();
            prop_assert!((e.limit - c).abs() < 1e-6 * (1.0 + c.abs()));
        }
    }
}
