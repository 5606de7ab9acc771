//! Time-varying frailty built from a power transform of a time-invariant
//! generalized gamma variable, U(t) ∝ U^{h(t)} (optionally times an
//! independent gamma second component), together with its heterogeneity
//! summaries: unconditional squared CV, scaled relative frailty variance of
//! the time-invariant case, the numeric relative frailty variance among
//! survivors, and its small-variance linear approximation.

use crate::error::{Error, Result};
use crate::gengamma::{log_egg_integral, EggParams, GenGammaParams};
use crate::special::{digamma, ln_gamma};
use crate::survival::{HazardSpec, SurvContext, QUAD_REL_TOL};

/// Deterministic modulation h(t) with h(0) = 1 and h(t) > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationFn {
    kind: ModulationKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModulationKind {
    /// h ≡ 1: no time variation.
    ConstantOne,
    /// h(t) = exp(-ρ t²); nonincreasing iff ρ ≥ 0.
    ExpQuadratic { rho: f64 },
    /// h(t) = e^{-ρt} + (1 - e^{-ρt})·β: smooth transition from 1 at t = 0
    /// toward β as t → ∞. Matching β with the base distribution's power
    /// shape makes the frailty tend to a gamma.
    ExpTransition { rho: f64, beta: f64 },
}

impl ModulationFn {
    pub fn constant_one() -> Self {
        Self {
            kind: ModulationKind::ConstantOne,
        }
    }

    /// Nonincreasing h(t) = exp(-ρ t²), ρ ≥ 0.
    pub fn exp_quadratic(rho: f64) -> Result<Self> {
        if !rho.is_finite() || rho < 0.0 {
            return Err(Error::domain(format!(
                "exp_quadratic requires rho >= 0 (got {rho}); \
                 use exp_quadratic_unconstrained for increasing modulation"
            )));
        }
        Ok(Self {
            kind: ModulationKind::ExpQuadratic { rho },
        })
    }

    /// exp(-ρ t²) with ρ of either sign. Increasing modulation (ρ < 0) can
    /// make the survivor-function quadrature and the fit unstable.
    pub fn exp_quadratic_unconstrained(rho: f64) -> Result<Self> {
        if !rho.is_finite() {
            return Err(Error::domain("exp_quadratic rho must be finite"));
        }
        if rho < 0.0 {
            log::warn!("increasing modulation (rho = {rho}) may cause convergence problems");
        }
        Ok(Self {
            kind: ModulationKind::ExpQuadratic { rho },
        })
    }

    /// Nonincreasing transition, ρ > 0 and 0 < β ≤ 1.
    pub fn exp_transition(rho: f64, beta: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::domain(format!(
                "exp_transition requires rho > 0, got {rho}"
            )));
        }
        if !(beta > 0.0) || !beta.is_finite() || beta > 1.0 {
            return Err(Error::domain(format!(
                "exp_transition requires 0 < beta <= 1 (got {beta}); \
                 use exp_transition_unconstrained for increasing modulation"
            )));
        }
        Ok(Self {
            kind: ModulationKind::ExpTransition { rho, beta },
        })
    }

    /// Transition with β > 1 allowed (increasing h).
    pub fn exp_transition_unconstrained(rho: f64, beta: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() || !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::domain(format!(
                "exp_transition requires rho > 0 and beta > 0, got rho={rho}, beta={beta}"
            )));
        }
        if beta > 1.0 {
            log::warn!("increasing modulation (beta = {beta}) may cause convergence problems");
        }
        Ok(Self {
            kind: ModulationKind::ExpTransition { rho, beta },
        })
    }

    pub fn kind(&self) -> &ModulationKind {
        &self.kind
    }

    pub fn value(&self, t: f64) -> f64 {
        match self.kind {
            ModulationKind::ConstantOne => 1.0,
            ModulationKind::ExpQuadratic { rho } => (-rho * t * t).exp(),
            ModulationKind::ExpTransition { rho, beta } => {
                let e = (-rho * t).exp();
                e + (1.0 - e) * beta
            }
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self.kind {
            ModulationKind::ConstantOne => 0.0,
            ModulationKind::ExpQuadratic { rho } => -2.0 * rho * t * (-rho * t * t).exp(),
            ModulationKind::ExpTransition { rho, beta } => rho * (beta - 1.0) * (-rho * t).exp(),
        }
    }

    pub fn is_nonincreasing(&self) -> bool {
        match self.kind {
            ModulationKind::ConstantOne => true,
            ModulationKind::ExpQuadratic { rho } => rho >= 0.0,
            ModulationKind::ExpTransition { beta, .. } => beta <= 1.0,
        }
    }
}

/// A time-varying frailty: unit-mean generalized gamma base U, modulation
/// h(t), and an optional unit-mean gamma second component V with variance
/// 1/k₂. The evaluated frailty is U(t) = U^{h(t)}/E{U^{h(t)}} (times V).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrailtySpec {
    base: GenGammaParams,
    modulation: ModulationFn,
    second_component: Option<f64>,
}

impl FrailtySpec {
    /// Unit-mean generalized gamma base with shape k and power shape β.
    pub fn new(k: f64, beta: f64, modulation: ModulationFn) -> Result<Self> {
        Ok(Self {
            base: GenGammaParams::unit_mean(k, beta)?,
            modulation,
            second_component: None,
        })
    }

    /// Unit-mean gamma base (β = 1) with variance 1/k.
    pub fn gamma(k: f64, modulation: ModulationFn) -> Result<Self> {
        Self::new(k, 1.0, modulation)
    }

    /// Attach an independent unit-mean gamma component with variance 1/k₂.
    pub fn with_second_component(mut self, k2: f64) -> Result<Self> {
        if !(k2 > 0.0) || !k2.is_finite() {
            return Err(Error::domain(format!(
                "second component shape k2 must be positive, got {k2}"
            )));
        }
        self.second_component = Some(k2);
        Ok(self)
    }

    pub fn base(&self) -> &GenGammaParams {
        &self.base
    }

    pub fn modulation(&self) -> &ModulationFn {
        &self.modulation
    }

    pub fn second_component(&self) -> Option<f64> {
        self.second_component
    }
}

/// Distribution of U^h for U ~ GenGamma(θ, k, β): GenGamma(θ^h, k, β/h).
pub fn transform_params(p: &GenGammaParams, h: f64) -> Result<GenGammaParams> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::domain(format!(
            "power transform exponent must be positive, got {h}"
        )));
    }
    GenGammaParams::new(p.theta().powf(h), p.k(), p.beta() / h)
}

/// μ(t) = E{U^{h(t)}}, evaluated in log space.
pub fn mu_t(spec: &FrailtySpec, t: f64) -> Result<f64> {
    Ok(log_mu_t(spec, t)?.exp())
}

/// ln μ(t).
pub fn log_mu_t(spec: &FrailtySpec, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("time must be nonnegative, got {t}")));
    }
    spec.base().log_moment(spec.modulation().value(t))
}

fn cv_squared_base(base: &GenGammaParams, h: f64) -> Result<f64> {
    let k = base.k();
    let beta_t = base.beta() / h;
    Ok((ln_gamma(k + 2.0 / beta_t) + ln_gamma(k) - 2.0 * ln_gamma(k + 1.0 / beta_t)).exp() - 1.0)
}

/// Squared coefficient of variation of U(t); invariant to the unit-mean
/// normalization. With a second component the factors multiply:
/// 1 + CV² = (1 + CV²_{U^h})(1 + 1/k₂).
pub fn cv_squared(spec: &FrailtySpec, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("time must be nonnegative, got {t}")));
    }
    let cv_u = cv_squared_base(spec.base(), spec.modulation().value(t))?;
    match spec.second_component() {
        None => Ok(cv_u),
        Some(k2) => Ok((1.0 + cv_u) * (1.0 + 1.0 / k2) - 1.0),
    }
}

/// d/dt of `cv_squared`: (2/β₀)·h′(t)·{1 + CV²}·{ψ(k + 2/β_t) − ψ(k + 1/β_t)},
/// scaled by (1 + 1/k₂) when a second component is present.
pub fn cv_squared_derivative(spec: &FrailtySpec, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("time must be nonnegative, got {t}")));
    }
    let base = spec.base();
    let h = spec.modulation().value(t);
    let h_prime = spec.modulation().derivative(t);
    let beta_t = base.beta() / h;
    let cv_u = cv_squared_base(base, h)?;
    let psi_diff = digamma(base.k() + 2.0 / beta_t)? - digamma(base.k() + 1.0 / beta_t)?;
    let d = 2.0 / base.beta() * h_prime * (1.0 + cv_u) * psi_diff;
    match spec.second_component() {
        None => Ok(d),
        Some(k2) => Ok(d * (1.0 + 1.0 / k2)),
    }
}

/// Scaled relative frailty variance of a time-invariant U at integrated
/// hazard s: I*(kβ+2, β, 1, sθ)·I*(kβ, β, 1, sθ)/I*(kβ+1, β, 1, sθ)² − 1.
/// Constant and equal to 1/k when β = 1; tends to 1/(kβ) as s → ∞.
pub fn rfv_scaled(p: &GenGammaParams, s: f64) -> Result<f64> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::domain(format!(
            "integrated hazard scale must be nonnegative, got {s}"
        )));
    }
    let a = p.k() * p.beta();
    let tilt = s * p.theta();
    let log_i = |shift: f64| -> Result<f64> {
        let e = EggParams::new(a + shift, p.beta(), 1.0, 0.0)?;
        log_egg_integral(&e, tilt)
    };
    let (l0, l1, l2) = (log_i(0.0)?, log_i(1.0)?, log_i(2.0)?);
    Ok((l2 + l0 - 2.0 * l1).exp() - 1.0)
}

/// Selection moments Iⱼ(t) = ∫ M(u)ʲ exp{−∫₀ᵗ U(s)λ₀(s) ds} f(u) du for
/// j = 0, 1, 2, returned as logs. `modulated` selects the moment factor
/// M(u): the normalized time-varying frailty U(t), or plain u.
fn log_selection_moments(
    spec: &FrailtySpec,
    hazard: &HazardSpec,
    t: f64,
    modulated: bool,
) -> Result<[f64; 3]> {
    let ctx = SurvContext::new(spec, &[hazard], t)?;
    let j_steps = ctx.steps(t)?;
    let h_t = ctx.h_at_step(j_steps);
    let ln_mu = ctx.ln_mu_at_step(j_steps);
    let w = ctx.weights(0).to_vec();
    let mut out = [0.0_f64; 3];
    for (j, slot) in out.iter_mut().enumerate() {
        let jf = j as f64;
        let log_moment = move |ln_u: f64| {
            if modulated {
                jf * (h_t * ln_u - ln_mu)
            } else {
                jf * ln_u
            }
        };
        *slot = match ctx.second_component() {
            None => ctx.outer().integrate_log(
                &|ln_u| log_moment(ln_u) - ctx.cum_weighted(&w, j_steps, ln_u),
                QUAD_REL_TOL,
            )?,
            Some(k2) => {
                // gamma second component integrated analytically:
                // E[V^j e^{−VI}] = Γ(k₂+j)/(Γ(k₂)k₂ʲ) · [k₂/(k₂+I)]^{k₂+j}
                let log_v_factor = if modulated {
                    ln_gamma(k2 + jf) - ln_gamma(k2) - jf * k2.ln()
                } else {
                    0.0
                };
                let exponent = if modulated { k2 + jf } else { k2 };
                log_v_factor
                    + ctx.outer().integrate_log(
                        &|ln_u| {
                            let i = ctx.cum_weighted(&w, j_steps, ln_u);
                            log_moment(ln_u) + exponent * (k2.ln() - (k2 + i).ln())
                        },
                        QUAD_REL_TOL,
                    )?
            }
        };
    }
    Ok(out)
}

/// Relative frailty variance among survivors at time t,
/// I₂(t)·I₀(t)/I₁(t)² − 1, using the δ-grid discretization of the inner
/// integral. Equals `cv_squared` at t = 0 and 1/k for a gamma base with
/// h ≡ 1 at every t.
pub fn rfv_star(spec: &FrailtySpec, hazard: &HazardSpec, t: f64) -> Result<f64> {
    let [l0, l1, l2] = log_selection_moments(spec, hazard, t, true)?;
    Ok((l2 + l0 - 2.0 * l1).exp() - 1.0)
}

/// μ_c(t) = E[U | T > t]: mean of the time-invariant base frailty among
/// survivors, with the selection weight of the full time-varying model.
pub fn conditional_mean_u(spec: &FrailtySpec, hazard: &HazardSpec, t: f64) -> Result<f64> {
    let [l0, l1, _] = log_selection_moments(spec, hazard, t, false)?;
    Ok((l1 - l0).exp())
}

/// First-order small-variance approximation
/// RFV*(t) ≈ RFV₀*(t)·[h(t)/(h(t) + μ_c(t)⁻¹(1 − h(t)))]²,
/// exact at h(t) = 1 and vanishing as h(t) → 0.
pub fn rfv_star_linear_approx(spec: &FrailtySpec, rfv0: f64, mu_c: f64, t: f64) -> Result<f64> {
    let h = spec.modulation().value(t);
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::domain(format!(
            "linear approximation requires h(t) in (0, 1], got {h} at t = {t}"
        )));
    }
    if !(mu_c > 0.0) {
        return Err(Error::domain(format!(
            "survivor mean must be positive, got {mu_c}"
        )));
    }
    if !(rfv0 >= 0.0) {
        return Err(Error::domain(format!(
            "baseline relative frailty variance must be nonnegative, got {rfv0}"
        )));
    }
    let bracket = h / (h + (1.0 - h) / mu_c);
    Ok(rfv0 * bracket * bracket)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive_gk_semi_inf;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn modulation_is_one_at_zero() {
        let fns = [
            ModulationFn::constant_one(),
            ModulationFn::exp_quadratic(0.01).unwrap(),
            ModulationFn::exp_quadratic_unconstrained(-0.01).unwrap(),
            ModulationFn::exp_transition(0.1, 0.4).unwrap(),
            ModulationFn::exp_transition_unconstrained(0.1, 1.8).unwrap(),
        ];
        for f in fns {
            assert_eq!(f.value(0.0), 1.0);
            for t in [0.5, 3.0, 25.0, 80.0] {
                assert!(f.value(t) > 0.0);
            }
        }
    }

    #[test]
    fn modulation_constraints() {
        assert!(ModulationFn::exp_quadratic(-0.1).is_err());
        assert!(ModulationFn::exp_quadratic_unconstrained(-0.1).is_ok());
        assert!(ModulationFn::exp_transition(0.1, 1.5).is_err());
        assert!(ModulationFn::exp_transition(-0.1, 0.5).is_err());
        assert!(ModulationFn::exp_transition_unconstrained(0.1, 1.5).is_ok());
        assert!(ModulationFn::exp_quadratic(0.2).unwrap().is_nonincreasing());
        assert!(!ModulationFn::exp_quadratic_unconstrained(-0.2)
            .unwrap()
            .is_nonincreasing());
    }

    #[test]
    fn transition_limits() {
        let f = ModulationFn::exp_transition(0.5, 0.3).unwrap();
        assert!((f.value(100.0) - 0.3).abs() < 1e-12);
        // derivative sign matches the direction of the transition
        assert!(f.derivative(1.0) < 0.0);
        let g = ModulationFn::exp_transition_unconstrained(0.5, 1.5).unwrap();
        assert!(g.derivative(1.0) > 0.0);
    }

    #[test]
    fn transform_params_substitution() {
        let p = GenGammaParams::new(2.0, 1.0, 1.5).unwrap();
        let q = transform_params(&p, 0.5).unwrap();
        assert_relative_eq!(q.theta(), 2.0_f64.sqrt(), max_relative = 1e-12);
        assert_eq!(q.k(), 1.0);
        assert_relative_eq!(q.beta(), 3.0, max_relative = 1e-12);
        // h = 1 is the identity
        let q = transform_params(&p, 1.0).unwrap();
        assert_eq!(q, p);
        assert!(transform_params(&p, 0.0).is_err());
    }

    #[test]
    fn power_transform_closure_monte_carlo() {
        // empirical CDF of U^h against the analytic closed-family CDF
        let p = GenGammaParams::new(1.0, 0.5, 1.0).unwrap();
        let h = 0.25;
        let q = transform_params(&p, h).unwrap();
        assert_eq!(q.theta(), 1.0);
        assert_eq!(q.k(), 0.5);
        assert_relative_eq!(q.beta(), 4.0, max_relative = 1e-12);

        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(0xC105);
        let gd = rand_distr::Gamma::new(p.k(), 1.0).unwrap();
        let n = 100_000;
        let mut draws: Vec<f64> = (0..n)
            .map(|_| {
                let w: f64 = rng.sample(gd);
                (p.theta() * w.powf(1.0 / p.beta())).powf(h)
            })
            .collect();
        draws.sort_by(f64::total_cmp);
        let mut d_stat: f64 = 0.0;
        for (i, &x) in draws.iter().enumerate() {
            let f = q.cdf(x).unwrap();
            let lo = i as f64 / n as f64;
            let hi = (i + 1) as f64 / n as f64;
            d_stat = d_stat.max((f - lo).abs().max((hi - f).abs()));
        }
        // asymptotic Kolmogorov 99% point
        assert!(
            (n as f64).sqrt() * d_stat < 1.62762,
            "KS statistic too large: {d_stat}"
        );
    }

    #[test]
    fn mu_t_values() {
        let spec = FrailtySpec::gamma(1.0, ModulationFn::constant_one()).unwrap();
        assert_relative_eq!(mu_t(&spec, 3.0).unwrap(), 1.0, max_relative = 1e-12);
        // gamma k=1 (θ=1), h = 0.5 at t = sqrt(ln 2 / ρ): E U^{1/2} = Γ(1.5)
        let rho = 0.01_f64;
        let t = (2.0_f64.ln() / rho).sqrt();
        let spec = FrailtySpec::gamma(1.0, ModulationFn::exp_quadratic(rho).unwrap()).unwrap();
        assert_relative_eq!(
            mu_t(&spec, t).unwrap(),
            0.8862269254527580,
            max_relative = 1e-9
        );
        // h → 0 pushes μ → E U⁰ = 1
        assert_relative_eq!(mu_t(&spec, 1e4).unwrap(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn cv_squared_values() {
        let spec = FrailtySpec::gamma(4.0, ModulationFn::constant_one()).unwrap();
        assert_relative_eq!(cv_squared(&spec, 7.0).unwrap(), 0.25, max_relative = 1e-10);
        // degenerate limit as h → 0
        let spec = FrailtySpec::gamma(1.0, ModulationFn::exp_quadratic(0.01).unwrap()).unwrap();
        assert!(cv_squared(&spec, 1e4).unwrap() < 1e-8);
        // independently computed: k=0.5, β=0.8, h = 0.6
        let rho = -(0.6_f64.ln());
        let spec = FrailtySpec::new(0.5, 0.8, ModulationFn::exp_quadratic(rho).unwrap()).unwrap();
        let got = cv_squared(&spec, 1.0).unwrap();
        assert_relative_eq!(got, 1.1574104047535174, max_relative = 1e-10);
        // and against a quadrature of the moments of U^{0.6}
        let base = *spec.base();
        let m1 = adaptive_gk_semi_inf(
            &|u: f64| u.powf(0.6) * base.pdf(u).unwrap_or(0.0),
            0.0,
            1e-10,
            1e-12,
        )
        .unwrap();
        let m2 = adaptive_gk_semi_inf(
            &|u: f64| u.powf(1.2) * base.pdf(u).unwrap_or(0.0),
            0.0,
            1e-10,
            1e-12,
        )
        .unwrap();
        assert_relative_eq!(got, m2 / (m1 * m1) - 1.0, max_relative = 1e-6);
    }

    #[test]
    fn cv_squared_derivative_cases() {
        // constant modulation: zero derivative
        let spec = FrailtySpec::gamma(2.0, ModulationFn::constant_one()).unwrap();
        assert_eq!(cv_squared_derivative(&spec, 5.0).unwrap(), 0.0);
        // finite-difference agreement
        let spec = FrailtySpec::gamma(1.0, ModulationFn::exp_quadratic(0.01).unwrap()).unwrap();
        let t = 5.0;
        let h = 1e-5;
        let fd = (cv_squared(&spec, t + h).unwrap() - cv_squared(&spec, t - h).unwrap())
            / (2.0 * h);
        assert_relative_eq!(
            cv_squared_derivative(&spec, t).unwrap(),
            fd,
            max_relative = 1e-6
        );
        // increasing modulation gives a positive derivative
        let spec =
            FrailtySpec::gamma(1.0, ModulationFn::exp_quadratic_unconstrained(-0.01).unwrap())
                .unwrap();
        assert!(cv_squared_derivative(&spec, 3.0).unwrap() > 0.0);
        // same turning-point law on a grid: nonincreasing for ρ > 0
        let spec = FrailtySpec::new(0.7, 1.4, ModulationFn::exp_quadratic(0.002).unwrap()).unwrap();
        let mut prev = cv_squared(&spec, 0.0).unwrap();
        for i in 1..=40 {
            let c = cv_squared(&spec, i as f64).unwrap();
            assert!(c <= prev + 1e-12);
            prev = c;
        }
    }

    #[test]
    fn rfv_scaled_gamma_is_constant() {
        let p = GenGammaParams::gamma_unit_mean(0.5).unwrap();
        for &s in &[0.0, 0.3, 2.0, 40.0] {
            assert_relative_eq!(rfv_scaled(&p, s).unwrap(), 2.0, max_relative = 1e-6);
        }
    }

    #[test]
    fn rfv_scaled_at_zero_is_cv_squared() {
        let p = GenGammaParams::unit_mean(0.5, 1.25).unwrap();
        let spec = FrailtySpec::new(0.5, 1.25, ModulationFn::constant_one()).unwrap();
        assert_relative_eq!(
            rfv_scaled(&p, 0.0).unwrap(),
            cv_squared(&spec, 0.0).unwrap(),
            max_relative = 1e-7
        );
    }

    #[test]
    fn rfv_scaled_against_dense_grid() {
        // independent dense-grid trapezoid evaluation of the three family
        // integrals (k = 0.5, β = 1.25, s = 10)
        let p = GenGammaParams::unit_mean(0.5, 1.25).unwrap();
        let got = rfv_scaled(&p, 10.0).unwrap();
        let lam = 10.0 * p.theta();
        let b = 1.25;
        let istar = |alpha: f64| {
            let f = |v: f64| ((alpha - 1.0) * v.ln() - lam * v - v.powf(b)).exp();
            let n = 2_000_000;
            let hi = 30.0;
            let h = hi / n as f64;
            // two-term analytic head for the integrable v^{alpha-1} endpoint
            let head = h.powf(alpha) / alpha - lam * h.powf(alpha + 1.0) / (alpha + 1.0);
            let mut acc = 0.5 * (f(h) + f(hi));
            for i in 2..n {
                acc += f(i as f64 * h);
            }
            head + acc * h
        };
        let a = 0.5 * 1.25;
        let oracle = istar(a + 2.0) * istar(a) / (istar(a + 1.0) * istar(a + 1.0)) - 1.0;
        assert_relative_eq!(got, oracle, max_relative = 1e-5);
        // frozen high-precision value
        assert_relative_eq!(got, 1.5878679635496, max_relative = 1e-7);
    }

    #[test]
    fn rfv_scaled_limit_and_monotone_direction() {
        let p = GenGammaParams::unit_mean(0.5, 0.8).unwrap();
        let limit = 1.0 / (0.5 * 0.8);
        let v = rfv_scaled(&p, 1e6).unwrap();
        assert!((v - limit).abs() / limit < 0.01, "v={v} limit={limit}");
        // decreasing for β < 1
        let grid = [0.0, 0.5, 2.0, 10.0, 100.0];
        let mut prev = f64::INFINITY;
        for &s in &grid {
            let r = rfv_scaled(&p, s).unwrap();
            assert!(r < prev + 1e-9);
            prev = r;
        }
        // increasing for β > 1
        let p = GenGammaParams::unit_mean(0.5, 1.25).unwrap();
        let mut prev = -f64::INFINITY;
        for &s in &grid {
            let r = rfv_scaled(&p, s).unwrap();
            assert!(r > prev - 1e-9);
            prev = r;
        }
    }

    #[test]
    fn rfv_star_gamma_constant() {
        let hz = HazardSpec::constant(0.05, 1.0).unwrap();
        let spec = FrailtySpec::gamma(0.5, ModulationFn::constant_one()).unwrap();
        for &t in &[0.0, 5.0, 20.0, 50.0] {
            assert_relative_eq!(rfv_star(&spec, &hz, t).unwrap(), 2.0, max_relative = 1e-6);
        }
    }

    #[test]
    fn rfv_star_at_zero_is_cv_squared() {
        let hz = HazardSpec::constant(0.05, 1.0).unwrap();
        let spec = FrailtySpec::new(0.5, 0.8, ModulationFn::exp_quadratic(1e-4).unwrap()).unwrap();
        assert_relative_eq!(
            rfv_star(&spec, &hz, 0.0).unwrap(),
            cv_squared(&spec, 0.0).unwrap(),
            max_relative = 1e-6
        );
        let two = spec.with_second_component(3.0).unwrap();
        assert_relative_eq!(
            rfv_star(&two, &hz, 0.0).unwrap(),
            cv_squared(&two, 0.0).unwrap(),
            max_relative = 1e-6
        );
    }

    #[test]
    fn rfv_star_matches_independent_double_integration() {
        // same δ-grid inner sum, but the outer integral done by a dense
        // log-spaced trapezoid rule instead of the gamma-weight quadrature
        let spec = FrailtySpec::new(0.5, 0.8, ModulationFn::exp_quadratic(1e-4).unwrap()).unwrap();
        let hz = HazardSpec::constant((-3.34_f64).exp(), 1.0).unwrap();
        let t = 30.0;
        let got = rfv_star(&spec, &hz, t).unwrap();

        let base = *spec.base();
        let delta = 1.0;
        let steps = 30;
        let h_of = |s: f64| spec.modulation().value(s);
        let lam = (-3.34_f64).exp();
        let mu_of = |s: f64| base.moment(h_of(s)).unwrap();
        let inner = |u: f64| {
            let mut acc = 0.0;
            for i in 1..=steps {
                let s = i as f64 * delta;
                acc += u.powf(h_of(s)) * lam / mu_of(s) * delta;
            }
            acc
        };
        let h_t = h_of(t);
        let mu_t_v = mu_of(t);
        let moment_j = |j: i32| {
            let f = |u: f64| {
                (u.powf(h_t) / mu_t_v).powi(j) * (-inner(u)).exp() * base.pdf(u).unwrap() * u
            };
            // trapezoid in ln u
            let (lo, hi) = (
                base.quantile(1e-13).unwrap().ln(),
                base.quantile(1.0 - 1e-13).unwrap().ln(),
            );
            let n = 40_000;
            let step = (hi - lo) / n as f64;
            let mut acc = 0.5 * (f(lo.exp()) + f(hi.exp()));
            for i in 1..n {
                acc += f((lo + i as f64 * step).exp());
            }
            acc * step
        };
        let (i0, i1, i2) = (moment_j(0), moment_j(1), moment_j(2));
        let oracle = i2 * i0 / (i1 * i1) - 1.0;
        assert_relative_eq!(got, oracle, max_relative = 1e-5);
    }

    #[test]
    fn rfv_star_consistent_with_scaled_on_integrated_hazard_scale() {
        // time-invariant case: RFV*(t) depends on the hazard only through
        // Λ₀(t), and equals RFV(s) at s = Λ₀(t)
        let spec = FrailtySpec::new(0.5, 1.25, ModulationFn::constant_one()).unwrap();
        let a = rfv_star(&spec, &HazardSpec::constant(0.04, 1.0).unwrap(), 25.0).unwrap();
        let b = rfv_star(&spec, &HazardSpec::constant(0.02, 1.0).unwrap(), 50.0).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-6);
        let scaled = rfv_scaled(spec.base(), 1.0).unwrap();
        assert_relative_eq!(a, scaled, max_relative = 1e-6);
    }

    #[test]
    fn linear_approx_edges() {
        let spec = FrailtySpec::gamma(100.0, ModulationFn::constant_one()).unwrap();
        assert_relative_eq!(
            rfv_star_linear_approx(&spec, 0.01, 1.0, 3.0).unwrap(),
            0.01,
            max_relative = 1e-12
        );
        let spec = FrailtySpec::gamma(100.0, ModulationFn::exp_quadratic(0.1).unwrap()).unwrap();
        // h(t) → 0 forces the approximation to 0
        let v = rfv_star_linear_approx(&spec, 0.01, 1.0, 40.0).unwrap();
        assert!(v < 1e-10);
    }

    #[test]
    fn linear_approx_tracks_exact_at_small_variance() {
        let spec = FrailtySpec::gamma(100.0, ModulationFn::exp_quadratic(0.001).unwrap()).unwrap();
        let hz = HazardSpec::constant(0.05, 1.0).unwrap();
        let rfv0 = 0.01; // gamma base: constant 1/k under any selection
        for &t in &[5.0, 15.0, 30.0] {
            let exact = rfv_star(&spec, &hz, t).unwrap();
            let mu_c = conditional_mean_u(&spec, &hz, t).unwrap();
            let approx = rfv_star_linear_approx(&spec, rfv0, mu_c, t).unwrap();
            assert!(
                (approx - exact).abs() / exact < 0.05,
                "t={t}: approx={approx} exact={exact}"
            );
        }
    }
}
