//! Age-specific association measure φ: the Clayton-copula parameter relating
//! the two marginal survivor probabilities and the joint no-event
//! probability at each age. For a gamma shared frailty with h ≡ 1, φ is
//! constant and equals 1/k, so empirical and fitted φ curves diagnose
//! time-varying heterogeneity.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::likelihood::{CurrentStatusDataset, ModelConfig};
use crate::survival::bivariate_curves;

/// Joint no-event probability under the Clayton copula:
/// C_φ(s₁, s₂) = (s₁^{-φ} + s₂^{-φ} − 1)^{-1/φ}, with the independence
/// product as the φ → 0 limit.
pub fn forward_clayton(s1: f64, s2: f64, phi: f64) -> Result<f64> {
    check_marginal("s1", s1)?;
    check_marginal("s2", s2)?;
    if !phi.is_finite() {
        return Err(Error::domain(format!("phi must be finite, got {phi}")));
    }
    Ok(log_clayton(s1, s2, phi).exp())
}

fn check_marginal(name: &str, s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain(format!(
            "{name} must lie strictly inside (0, 1), got {s}"
        )));
    }
    Ok(())
}

/// ln C_φ(s₁, s₂); series branch near φ = 0, log-sum-exp otherwise.
/// Returns -inf when the argument of the copula generator is nonpositive
/// (below the Fréchet lower bound region for φ < 0).
fn log_clayton(s1: f64, s2: f64, phi: f64) -> f64 {
    let a = -s1.ln();
    let b = -s2.ln();
    if phi.abs() < 1e-4 {
        // ln C = ln s₁ + ln s₂ + φ·(ln s₁)(ln s₂) + O(φ²)
        return -(a + b) + phi * a * b;
    }
    // ln(e^{φa} + e^{φb} − 1), stabilized
    let m = (phi * a).max(phi * b).max(0.0);
    let d = (phi * a - m).exp() + (phi * b - m).exp() - (-m).exp();
    if d <= 0.0 {
        return f64::NEG_INFINITY;
    }
    -(m + d.ln()) / phi
}

/// Solve s₀₀ = C_φ(s₁, s₂) for φ.
///
/// The solution is unique on (−1, ∞) because C is strictly increasing in φ
/// between the Fréchet bounds; its sign matches the sign of s₀₀ − s₁·s₂.
/// Inputs at a Fréchet bound give a ±∞ sentinel; outside the bounds is a
/// domain error.
pub fn phi_from_probs(s1: f64, s2: f64, s00: f64) -> Result<f64> {
    check_marginal("s1", s1)?;
    check_marginal("s2", s2)?;
    let lower = (s1 + s2 - 1.0).max(0.0);
    let upper = s1.min(s2);
    if !(s00 >= lower && s00 <= upper) {
        return Err(Error::domain(format!(
            "s00 = {s00} violates the Fréchet bounds [{lower}, {upper}]"
        )));
    }
    let bound_tol = 1e-14 * (1.0 + s00.abs());
    if (s00 - upper).abs() <= bound_tol {
        return Ok(f64::INFINITY);
    }
    if (s00 - lower).abs() <= bound_tol {
        return Ok(f64::NEG_INFINITY);
    }
    let product = s1 * s2;
    if s00 == product {
        return Ok(0.0);
    }
    let target = s00.ln();
    let g = |phi: f64| log_clayton(s1, s2, phi) - target;

    let (mut lo, mut hi) = if s00 > product {
        // positive association: expand upward until C exceeds s00
        let mut hi = 1.0;
        while g(hi) < 0.0 {
            hi *= 2.0;
            if hi > 1e7 {
                return Ok(f64::INFINITY);
            }
        }
        (0.0, hi)
    } else {
        // negative association: φ ∈ (−1, 0); shrink past the region where
        // the generator argument is nonpositive
        let mut lo = -1.0 + 1e-9;
        if !g(lo).is_finite() {
            let (mut bad, mut good) = (lo, 0.0);
            for _ in 0..200 {
                let mid = 0.5 * (bad + good);
                if g(mid).is_finite() {
                    good = mid;
                } else {
                    bad = mid;
                }
                if (good - bad).abs() < 1e-15 {
                    break;
                }
            }
            lo = good;
        }
        if g(lo) > 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        (lo, 0.0)
    };

    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= 1e-13 * (1.0 + hi.abs()) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Why an age was excluded from a φ series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// No fully observed pairs at this age.
    NoPairs,
    /// An empirical marginal hit 0 or 1.
    DegenerateMarginal,
    /// The empirical joint probability sits on a Fréchet bound.
    AtBound,
    /// The delta-method variance was not finite and positive.
    NonFiniteWeight,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PhiPoint {
    pub age: f64,
    pub phi: f64,
    /// Inverse variance proxy; 1 for fitted curves.
    pub weight: f64,
}

/// Weighted φ-by-age series with a record of excluded ages.
#[derive(Debug, Clone, Serialize)]
pub struct PhiSeries {
    pub points: Vec<PhiPoint>,
    pub dropped: Vec<(f64, DropReason)>,
}

/// Empirical φ per age from the fully observed pairs. Weights are inverse
/// delta-method variances under multinomial sampling.
pub fn empirical_phi(data: &CurrentStatusDataset) -> Result<PhiSeries> {
    let mut points = Vec::new();
    let mut dropped = Vec::new();
    for row in data.rows() {
        let n = row.n00 + row.n01 + row.n10 + row.n11;
        if n <= 0.0 {
            dropped.push((row.age, DropReason::NoPairs));
            continue;
        }
        let s1 = (row.n00 + row.n01) / n;
        let s2 = (row.n00 + row.n10) / n;
        let s00 = row.n00 / n;
        if !(s1 > 0.0 && s1 < 1.0 && s2 > 0.0 && s2 < 1.0) {
            dropped.push((row.age, DropReason::DegenerateMarginal));
            continue;
        }
        let phi = match phi_from_probs(s1, s2, s00) {
            Ok(v) if v.is_finite() => v,
            Ok(_) => {
                dropped.push((row.age, DropReason::AtBound));
                continue;
            }
            Err(_) => {
                dropped.push((row.age, DropReason::AtBound));
                continue;
            }
        };
        match phi_variance(s1, s2, s00, n) {
            Some(var) if var.is_finite() && var > 0.0 => points.push(PhiPoint {
                age: row.age,
                phi,
                weight: 1.0 / var,
            }),
            _ => dropped.push((row.age, DropReason::NonFiniteWeight)),
        }
    }
    Ok(PhiSeries { points, dropped })
}

/// Delta-method variance of φ̂ from the multinomial covariance of
/// (ŝ₁, ŝ₂, ŝ₀₀); gradient by central differences of the φ inversion.
fn phi_variance(s1: f64, s2: f64, s00: f64, n: f64) -> Option<f64> {
    let eval = |a: f64, b: f64, c: f64| -> Option<f64> {
        match phi_from_probs(
            a.clamp(1e-9, 1.0 - 1e-9),
            b.clamp(1e-9, 1.0 - 1e-9),
            c,
        ) {
            Ok(v) if v.is_finite() => Some(v),
            _ => None,
        }
    };
    let h = 1e-5;
    let g1 = (eval(s1 + h, s2, s00)? - eval(s1 - h, s2, s00)?) / (2.0 * h);
    let g2 = (eval(s1, s2 + h, s00)? - eval(s1, s2 - h, s00)?) / (2.0 * h);
    let g0 = (eval(s1, s2, s00 + h)? - eval(s1, s2, s00 - h)?) / (2.0 * h);
    let grad = [g1, g2, g0];
    // s₁ = p00 + p01, s₂ = p00 + p10, s₀₀ = p00 in cell-probability space
    let p = [s00, s1 - s00, s2 - s00, 1.0 - s1 - s2 + s00];
    let combos = [
        [1.0, 1.0, 0.0, 0.0],
        [1.0, 0.0, 1.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
    ];
    let mut var = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let mut cov = 0.0;
            for c in 0..4 {
                for d in 0..4 {
                    let v = if c == d { p[c] * (1.0 - p[c]) } else { -p[c] * p[d] };
                    cov += combos[i][c] * combos[j][d] * v;
                }
            }
            var += grad[i] * grad[j] * cov / n;
        }
    }
    Some(var)
}

/// Model-implied φ at each age, from the fitted marginal survivors and the
/// joint no-event probability. Weights are 1.
pub fn fitted_phi(config: &ModelConfig, packed: &[f64], ages: &[f64]) -> Result<PhiSeries> {
    let cfg = config.unpack(packed)?;
    let (spec, hz1, hz2) = cfg.build()?;
    let curves = bivariate_curves(&spec, &hz1, &hz2, ages)?;
    let mut points = Vec::new();
    let mut dropped = Vec::new();
    for (i, &age) in ages.iter().enumerate() {
        let s1 = curves.marginal1[i];
        let s2 = curves.marginal2[i];
        let s00 = curves.probs[i].s00;
        if !(s1 > 0.0 && s1 < 1.0 && s2 > 0.0 && s2 < 1.0) {
            dropped.push((age, DropReason::DegenerateMarginal));
            continue;
        }
        match phi_from_probs(s1, s2, s00.clamp(s1 + s2 - 1.0, s1.min(s2))) {
            Ok(v) if v.is_finite() => points.push(PhiPoint {
                age,
                phi: v,
                weight: 1.0,
            }),
            _ => dropped.push((age, DropReason::AtBound)),
        }
    }
    Ok(PhiSeries { points, dropped })
}
