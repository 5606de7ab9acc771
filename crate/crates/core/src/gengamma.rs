//! Generalized gamma distribution (scale θ, shape k, power shape β) and the
//! extended family integral used for scaled relative-frailty-variance
//! calculations.
//!
//! Heavy-tailed and extreme-parameter cases are handled by doing all density
//! and moment work in log space; the family integral is evaluated after the
//! change of variable u = θ·eˣ, under which its log-integrand is strictly
//! concave.

use crate::error::{Error, Result};
use crate::quad::adaptive_gk;
use crate::special::{gamma_lr, inv_gamma_lr, ln_gamma};

/// Relative tolerance requested from the family-integral quadrature.
pub const EGG_REL_TOL: f64 = 1e-8;

/// Parameters (θ, k, β) of the generalized gamma density
/// f(u) = β/(θ^{kβ} Γ(k)) · u^{kβ-1} e^{-(u/θ)^β}.
///
/// The gamma distribution is the β = 1 special case and the Weibull the
/// k = 1 case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenGammaParams {
    theta: f64,
    k: f64,
    beta: f64,
}

impl GenGammaParams {
    pub fn new(theta: f64, k: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("theta", theta), ("k", k), ("beta", beta)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(format!(
                    "generalized gamma parameter {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self { theta, k, beta })
    }

    /// Construct with θ = Γ(k)/Γ(k + 1/β), which makes the mean exactly 1.
    pub fn unit_mean(k: f64, beta: f64) -> Result<Self> {
        let theta = unit_mean_theta(k, beta)?;
        Self::new(theta, k, beta)
    }

    /// Unit-mean gamma with variance 1/k.
    pub fn gamma_unit_mean(k: f64) -> Result<Self> {
        Self::unit_mean(k, 1.0)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Log density at u > 0.
    pub fn log_pdf(&self, u: f64) -> Result<f64> {
        if !(u > 0.0) || !u.is_finite() {
            return Err(Error::domain(format!(
                "generalized gamma density requires u > 0, got {u}"
            )));
        }
        let z = u / self.theta;
        Ok(self.beta.ln() - self.k * self.beta * self.theta.ln() - ln_gamma(self.k)
            + (self.k * self.beta - 1.0) * u.ln()
            - z.powf(self.beta))
    }

    /// Density at u > 0.
    pub fn pdf(&self, u: f64) -> Result<f64> {
        Ok(self.log_pdf(u)?.exp())
    }

    /// Raw moment E(U^r) = θ^r Γ(k + r/β)/Γ(k), valid whenever k + r/β > 0.
    pub fn moment(&self, r: f64) -> Result<f64> {
        Ok(self.log_moment(r)?.exp())
    }

    /// ln E(U^r), computed entirely in log space.
    pub fn log_moment(&self, r: f64) -> Result<f64> {
        let arg = self.k + r / self.beta;
        if !(arg > 0.0) {
            return Err(Error::domain(format!(
                "moment order r={r} requires k + r/beta > 0 (k={}, beta={})",
                self.k, self.beta
            )));
        }
        Ok(r * self.theta.ln() + ln_gamma(arg) - ln_gamma(self.k))
    }

    pub fn mean(&self) -> f64 {
        self.log_moment(1.0)
            .expect("k + 1/beta > 0 holds for valid parameters")
            .exp()
    }

    /// Distribution function P(U ≤ u) = P(k, (u/θ)^β).
    pub fn cdf(&self, u: f64) -> Result<f64> {
        if u <= 0.0 {
            return Ok(0.0);
        }
        gamma_lr(self.k, (u / self.theta).powf(self.beta))
    }

    /// Quantile function, the inverse of `cdf`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        let z = inv_gamma_lr(self.k, p)?;
        Ok(self.theta * z.powf(1.0 / self.beta))
    }
}

/// θ making the generalized gamma mean equal to 1: Γ(k)/Γ(k + 1/β).
pub fn unit_mean_theta(k: f64, beta: f64) -> Result<f64> {
    if !(k > 0.0) || !(beta > 0.0) {
        return Err(Error::domain(format!(
            "unit_mean_theta requires k > 0 and beta > 0, got k={k}, beta={beta}"
        )));
    }
    Ok((ln_gamma(k) - ln_gamma(k + 1.0 / beta)).exp())
}

/// Parameters (α, β, θ, λ) of the extended generalized gamma / inverse
/// Gaussian family. The generalized gamma embeds at λ = 0, α = kβ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EggParams {
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
    pub lambda: f64,
}

impl EggParams {
    pub fn new(alpha: f64, beta: f64, theta: f64, lambda: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("theta", theta)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(format!(
                    "family parameter {name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::domain(format!(
                "family parameter lambda must be nonnegative and finite, got {lambda}"
            )));
        }
        Ok(Self {
            alpha,
            beta,
            theta,
            lambda,
        })
    }

    /// Embedding of a generalized gamma: λ = 0, α = kβ.
    pub fn from_gengamma(p: &GenGammaParams) -> Self {
        Self {
            alpha: p.k() * p.beta(),
            beta: p.beta(),
            theta: p.theta(),
            lambda: 0.0,
        }
    }
}

/// The family normalizing integral
/// I*(α, β, θ, λ) = ∫₀^∞ (u/θ)^{α-1} e^{-λ(u/θ)} e^{-(u/θ)^β} du,
/// with `scale_lambda` added to the exponential-tilt parameter λ.
pub fn egg_integral(e: &EggParams, scale_lambda: f64) -> Result<f64> {
    Ok(log_egg_integral(e, scale_lambda)?.exp())
}

/// ln I*(α, β, θ, λ + scale_lambda); usable when the integral itself would
/// overflow or underflow, as happens in scaled relative-frailty-variance
/// ratios at extreme selection.
pub fn log_egg_integral(e: &EggParams, scale_lambda: f64) -> Result<f64> {
    if !(scale_lambda >= 0.0) || !scale_lambda.is_finite() {
        return Err(Error::domain(format!(
            "scale_lambda must be nonnegative and finite, got {scale_lambda}"
        )));
    }
    let alpha = e.alpha;
    let beta = e.beta;
    let lambda = e.lambda + scale_lambda;

    // After v = u/θ and v = e^x the integral is θ·∫ exp(G(x)) dx over the
    // whole real line, with G(x) = αx − λeˣ − e^{βx} strictly concave.
    let g = |x: f64| alpha * x - lambda * x.exp() - (beta * x).exp();
    let g_prime = |x: f64| alpha - lambda * x.exp() - beta * (beta * x).exp();

    // Unique maximizer of G: G' is strictly decreasing with G'(-inf) = α > 0.
    let mut lo = 0.0_f64;
    let mut hi = 0.0_f64;
    if g_prime(0.0) > 0.0 {
        hi = 1.0;
        while g_prime(hi) > 0.0 {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::numeric("family integral mode search diverged", f64::NAN));
            }
        }
    } else {
        lo = -1.0;
        while g_prime(lo) <= 0.0 {
            lo *= 2.0;
            if lo < -1e12 {
                return Err(Error::numeric("family integral mode search diverged", f64::NAN));
            }
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g_prime(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * (1.0 + hi.abs()) {
            break;
        }
    }
    let x_star = 0.5 * (lo + hi);
    let g_max = g(x_star);

    // Expand outward until the scaled integrand is negligible.
    let cutoff = g_max - 60.0;
    let mut d = 1.0;
    while g(x_star - d) > cutoff {
        d *= 2.0;
        if d > 1e12 {
            return Err(Error::numeric("family integral left tail did not decay", f64::NAN));
        }
    }
    let x_lo = x_star - d;
    d = 1.0;
    while g(x_star + d) > cutoff {
        d *= 2.0;
        if d > 1e12 {
            return Err(Error::numeric("family integral right tail did not decay", f64::NAN));
        }
    }
    let x_hi = x_star + d;

    let integrand = |x: f64| (g(x) - g_max).exp();
    let core = adaptive_gk(&integrand, x_lo, x_hi, EGG_REL_TOL * 0.1, 1e-300)?;
    Ok(e.theta.ln() + g_max + core.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive_gk_semi_inf;
    use approx::assert_relative_eq;

    #[test]
    fn pdf_special_cases() {
        // exponential: (θ=1, k=1, β=1) at u=1 is e^{-1}
        let p = GenGammaParams::new(1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(p.pdf(1.0).unwrap(), (-1.0_f64).exp(), max_relative = 1e-12);
        // gamma(2): u e^{-u} at u=1
        let p = GenGammaParams::new(1.0, 2.0, 1.0).unwrap();
        assert_relative_eq!(p.pdf(1.0).unwrap(), (-1.0_f64).exp(), max_relative = 1e-12);
        // independently evaluated closed form: 2/(Γ(0.5)·e)
        let p = GenGammaParams::new(1.0, 0.5, 2.0).unwrap();
        assert_relative_eq!(p.pdf(1.0).unwrap(), 0.4151074974205947, max_relative = 1e-12);
    }

    #[test]
    fn pdf_rejects_nonpositive_u() {
        let p = GenGammaParams::new(1.0, 1.0, 1.0).unwrap();
        assert!(p.pdf(0.0).is_err());
        assert!(p.pdf(-1.0).is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(GenGammaParams::new(0.0, 1.0, 1.0).is_err());
        assert!(GenGammaParams::new(1.0, -2.0, 1.0).is_err());
        assert!(GenGammaParams::new(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn moments() {
        let p = GenGammaParams::new(1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(p.moment(1.0).unwrap(), 1.0, max_relative = 1e-12);
        let p = GenGammaParams::new(0.5, 2.0, 1.0).unwrap();
        assert_relative_eq!(p.moment(1.0).unwrap(), 1.0, max_relative = 1e-12);
        // Γ(1.25)/Γ(1), independently computed
        let p = GenGammaParams::new(1.0, 1.0, 2.0).unwrap();
        assert_relative_eq!(p.moment(0.5).unwrap(), 0.9064024770554771, max_relative = 1e-12);
        // moment order pushing the gamma argument nonpositive is a domain error
        assert!(p.moment(-3.0).is_err());
    }

    #[test]
    fn unit_mean_construction() {
        assert_relative_eq!(unit_mean_theta(1.0, 1.0).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(unit_mean_theta(4.0, 1.0).unwrap(), 0.25, max_relative = 1e-12);
        // Γ(0.5)/Γ(1), independently computed
        assert_relative_eq!(
            unit_mean_theta(0.5, 2.0).unwrap(),
            1.7724538509055160,
            max_relative = 1e-12
        );
        for (k, beta) in [(0.2, 1.0), (1.0, 0.7), (3.5, 2.2), (0.5, 0.8)] {
            let p = GenGammaParams::unit_mean(k, beta).unwrap();
            assert!((p.mean() - 1.0).abs() < 1e-12, "k={k} beta={beta}");
        }
    }

    #[test]
    fn pdf_normalizes() {
        for (theta, k, beta) in [(1.0, 1.0, 1.0), (2.0, 0.5, 2.0), (0.7, 3.0, 0.8)] {
            let p = GenGammaParams::new(theta, k, beta).unwrap();
            let mass =
                adaptive_gk_semi_inf(&|u| p.pdf(u).unwrap_or(0.0), 0.0, 1e-9, 1e-12).unwrap();
            assert_relative_eq!(mass, 1.0, max_relative = 1e-6);
        }
    }

    #[test]
    fn gamma_special_case_agrees_with_direct_density() {
        // β = 1 must reduce to the ordinary gamma distribution
        let direct = |k: f64, theta: f64, u: f64| {
            (-(k * theta.ln()) - ln_gamma(k) + (k - 1.0) * u.ln() - u / theta).exp()
        };
        for (theta, k) in [(1.0, 1.0), (0.5, 2.0), (2.0, 0.3)] {
            let p = GenGammaParams::new(theta, k, 1.0).unwrap();
            for &u in &[0.1, 0.5, 1.0, 2.5, 7.0] {
                assert_relative_eq!(
                    p.pdf(u).unwrap(),
                    direct(k, theta, u),
                    max_relative = 1e-10
                );
            }
            assert_relative_eq!(p.moment(1.0).unwrap(), k * theta, max_relative = 1e-10);
            assert_relative_eq!(
                p.moment(2.0).unwrap(),
                k * (k + 1.0) * theta * theta,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn cdf_quantile_round_trip() {
        let p = GenGammaParams::new(1.3, 0.6, 1.7).unwrap();
        for &q in &[1e-8, 0.1, 0.5, 0.9, 1.0 - 1e-8] {
            let u = p.quantile(q).unwrap();
            assert!((p.cdf(u).unwrap() - q).abs() < 1e-8);
        }
    }

    #[test]
    fn egg_integral_closed_forms() {
        // λ = 0, β = 1, θ = 1: ∫ v^{α-1} e^{-v} dv = Γ(α)
        let e = EggParams::new(3.0, 1.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(egg_integral(&e, 0.0).unwrap(), 2.0, max_relative = 1e-8);
        // α = 1, β = 1, λ = 1: ∫ e^{-2v} dv = 1/2
        let e = EggParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(egg_integral(&e, 0.0).unwrap(), 0.5, max_relative = 1e-8);
        // the tilt argument adds to λ
        let e = EggParams::new(1.0, 1.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(egg_integral(&e, 1.0).unwrap(), 0.5, max_relative = 1e-8);
        // θ scales the integral linearly after the v = u/θ substitution
        let e = EggParams::new(3.0, 1.0, 2.5, 0.0).unwrap();
        assert_relative_eq!(egg_integral(&e, 0.0).unwrap(), 5.0, max_relative = 1e-8);
    }

    #[test]
    fn egg_integral_against_dense_grid() {
        // brute-force trapezoid on a fine grid, independent of the
        // implementation's change of variables
        let e = EggParams::new(1.5, 2.0, 1.0, 0.7).unwrap();
        let f = |v: f64| v.sqrt() * (-0.7 * v - v * v).exp();
        let (a, b, n) = (0.0, 20.0, 4_000_000);
        let hstep = (b - a) / n as f64;
        let mut acc = 0.5 * (f(a) + f(b));
        for i in 1..n {
            acc += f(a + i as f64 * hstep);
        }
        let oracle = acc * hstep;
        let got = egg_integral(&e, 0.0).unwrap();
        assert_relative_eq!(got, oracle, max_relative = 1e-7);
        // and against an independently computed high-precision value
        assert_relative_eq!(got, 0.38223140052342087, max_relative = 1e-8);
    }

    #[test]
    fn egg_embeds_gengamma_density() {
        // density built from I* matches the generalized gamma pdf pointwise
        let p = GenGammaParams::new(1.4, 0.8, 1.6).unwrap();
        let e = EggParams::from_gengamma(&p);
        let log_norm = log_egg_integral(&e, 0.0).unwrap();
        for &u in &[0.2, 0.8, 1.5, 4.0] {
            let z = u / p.theta();
            let log_f = (e.alpha - 1.0) * z.ln() - z.powf(e.beta) - log_norm;
            assert_relative_eq!(log_f.exp(), p.pdf(u).unwrap(), max_relative = 1e-8);
        }
    }

    #[test]
    fn egg_integral_extreme_tilt_stays_finite_in_log_space() {
        let e = EggParams::new(0.625, 1.25, 1.0, 0.0).unwrap();
        let v = log_egg_integral(&e, 1e6).unwrap();
        assert!(v.is_finite());
        assert!(v < 0.0);
    }
}
