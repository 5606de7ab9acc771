//! Maximum-likelihood estimation over the packed parameter vector: a
//! derivative-free simplex stage followed by a quasi-Newton polish with
//! central-difference gradients, Hessian-based advisory standard errors, and
//! profile-likelihood confidence intervals by outward bisection.

mod optimize;

use serde::Serialize;

use crate::association::empirical_phi;
use crate::error::{Error, Result};
use crate::likelihood::{
    aic, deviance, loglik, loglik_detailed, CurrentStatusDataset, FrailtyFamily, HazardForm,
    ModelConfig, ModulationForm,
};
use crate::special::chi2_1_quantile;
use optimize::OptimOptions;

/// Penalty handed to the minimizer when the likelihood cannot be evaluated
/// at a probe point (outside a link barrier, numerically failed quadrature).
/// Larger than the negated underflow sentinel so genuine evaluations are
/// always preferred.
const PENALTY: f64 = 1e13;

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub simplex_max_iter: usize,
    pub newton_max_iter: usize,
    /// Relative function tolerance for both stages.
    pub f_tol: f64,
    /// Absolute infinity-norm gradient tolerance declaring convergence.
    pub g_tol: f64,
    /// Relative step for numeric derivatives (internal scale).
    pub grad_step: f64,
    /// Initial simplex displacement (internal scale).
    pub simplex_step: f64,
    /// Compute the numeric Hessian and advisory standard errors.
    pub compute_hessian: bool,
    /// Profile-likelihood intervals to compute after the fit.
    pub profile: Option<ProfileOptions>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            simplex_max_iter: 1500,
            newton_max_iter: 200,
            f_tol: 1e-10,
            g_tol: 5e-2,
            grad_step: 1e-5,
            simplex_step: 0.25,
            compute_hessian: true,
            profile: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProfileOptions {
    /// Confidence level, e.g. 0.95.
    pub level: f64,
    /// Parameters to profile; None profiles every free parameter.
    pub params: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Convergence {
    Converged,
    MaxIter,
    DegenerateHessian,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileInterval {
    pub name: String,
    /// None marks a side where the profile never dropped below the cutoff.
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub level: f64,
}

/// Everything a fit reports. Standard errors come from the numeric Hessian
/// and are advisory; interval estimates should come from the profile
/// likelihood.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    /// Free-parameter estimates on the natural scale, packing order.
    pub estimates: Vec<(String, f64)>,
    pub loglik_max: f64,
    pub aic: f64,
    pub deviance: f64,
    pub df: i64,
    pub convergence: Convergence,
    pub std_errors: Option<Vec<(String, f64)>>,
    pub profile_cis: Option<Vec<ProfileInterval>>,
    pub n_evals: usize,
}

impl FitResult {
    /// Estimate by name.
    pub fn estimate(&self, name: &str) -> Option<f64> {
        self.estimates
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.std_errors
            .as_ref()?
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}

fn objective<'a>(
    config: &'a ModelConfig,
    data: &'a CurrentStatusDataset,
    evals: &'a mut usize,
) -> impl FnMut(&[f64]) -> f64 + 'a {
    move |x: &[f64]| {
        *evals += 1;
        match loglik(config, x, data) {
            Ok(v) if v.is_finite() => -v,
            _ => PENALTY,
        }
    }
}

/// Maximize the multinomial log-likelihood over the free parameters.
///
/// Runs the simplex stage from the configured initial values, then the
/// quasi-Newton stage from the simplex optimum. Deterministic for a fixed
/// config, dataset and option set.
pub fn fit(
    config: &ModelConfig,
    data: &CurrentStatusDataset,
    options: &FitOptions,
) -> Result<FitResult> {
    let x0 = config.pack()?;
    let init = loglik_detailed(config, &x0, data)?;
    if !init.value.is_finite() || init.underflow {
        let desc: Vec<String> = config
            .params()
            .iter()
            .filter(|(_, p)| p.free)
            .map(|(n, p)| format!("{n}={}", p.value))
            .collect();
        return Err(Error::NonConvergence(format!(
            "log-likelihood is not finite at the initial point ({})",
            desc.join(", ")
        )));
    }

    let mut evals = 0usize;
    let nm_opts = OptimOptions {
        max_iter: options.simplex_max_iter,
        f_tol: options.f_tol,
        x_tol: 1e-8,
        g_tol: options.g_tol,
        grad_step: options.grad_step,
    };
    let nm = {
        let mut f = objective(config, data, &mut evals);
        optimize::nelder_mead(&mut f, &x0, options.simplex_step, &nm_opts)
    };
    let newton_opts = OptimOptions {
        max_iter: options.newton_max_iter,
        f_tol: options.f_tol,
        x_tol: 1e-10,
        g_tol: options.g_tol,
        grad_step: options.grad_step,
    };
    let newton = {
        let mut f = objective(config, data, &mut evals);
        optimize::bfgs(&mut f, &nm.x, &newton_opts)
    };
    let (x_best, f_best, stage_converged) = if newton.f <= nm.f {
        (newton.x.clone(), newton.f, newton.converged || nm.converged)
    } else {
        (nm.x.clone(), nm.f, nm.converged)
    };
    let ll_max = -f_best;
    if !ll_max.is_finite() || f_best >= PENALTY {
        return Err(Error::NonConvergence(
            "optimization never reached a finite log-likelihood".into(),
        ));
    }

    let fitted = config.unpack(&x_best)?;
    let estimates: Vec<(String, f64)> = fitted
        .params()
        .into_iter()
        .filter(|(_, p)| p.free)
        .map(|(n, p)| (n, p.value))
        .collect();

    let mut convergence = if stage_converged {
        Convergence::Converged
    } else {
        Convergence::MaxIter
    };

    let std_errors = if options.compute_hessian && !x_best.is_empty() {
        let mut f = objective(config, data, &mut evals);
        let h = optimize::hessian(&mut f, &x_best, 1e-4);
        match optimize::invert(&h) {
            Some(cov) if (0..x_best.len()).all(|i| cov[i][i] > 0.0) => {
                let se: Vec<(String, f64)> = fitted
                    .params()
                    .into_iter()
                    .filter(|(_, p)| p.free)
                    .enumerate()
                    .map(|(i, (n, p))| (n, cov[i][i].sqrt() * p.link_jacobian().abs()))
                    .collect();
                Some(se)
            }
            _ => {
                convergence = Convergence::DegenerateHessian;
                None
            }
        }
    } else {
        None
    };

    let (dev, df) = deviance(config, &x_best, data)?;
    let mut result = FitResult {
        estimates,
        loglik_max: ll_max,
        aic: aic(ll_max, config.n_free()),
        deviance: dev,
        df,
        convergence,
        std_errors,
        profile_cis: None,
        n_evals: evals,
    };

    if let Some(popts) = &options.profile {
        let names: Vec<String> = match &popts.params {
            Some(list) => list.clone(),
            None => config.free_names(),
        };
        let mut cis = Vec::with_capacity(names.len());
        for name in names {
            let (lower, upper) = profile_ci(config, data, &result, &name, popts.level)?;
            cis.push(ProfileInterval {
                name,
                lower,
                upper,
                level: popts.level,
            });
        }
        result.profile_cis = Some(cis);
    }
    Ok(result)
}

/// Profile-likelihood interval for one free parameter at the given level.
///
/// Walks outward from the MLE on the parameter's internal scale, doubling
/// the step until the profiled log-likelihood drops by χ²₁(level)/2, then
/// bisects to the crossing. Sides where the profile never drops are open.
pub fn profile_ci(
    config: &ModelConfig,
    data: &CurrentStatusDataset,
    fit_result: &FitResult,
    name: &str,
    level: f64,
) -> Result<(Option<f64>, Option<f64>)> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::domain(format!(
            "confidence level must be in [0, 1), got {level}"
        )));
    }
    // config at the MLE
    let mut cfg_mle = config.clone();
    for (n, v) in &fit_result.estimates {
        cfg_mle = cfg_mle.set_value(n, *v)?;
    }
    let mle = fit_result
        .estimate(name)
        .ok_or_else(|| Error::domain(format!("{name} is not a free parameter of this fit")))?;
    if level == 0.0 {
        return Ok((Some(mle), Some(mle)));
    }
    let param = cfg_mle
        .params()
        .into_iter()
        .find(|(n, _)| n == name)
        .map(|(_, p)| p)
        .expect("estimate exists, so the parameter does");
    let link = param.link;
    let x_mle = param.to_internal()?;
    let step0 = match fit_result.std_error(name) {
        Some(se) if se.is_finite() && se > 0.0 => (se / param.link_jacobian().abs()).max(1e-4),
        _ => 0.25,
    };

    let refit_opts = FitOptions {
        simplex_max_iter: 400,
        newton_max_iter: 100,
        compute_hessian: false,
        profile: None,
        ..FitOptions::default()
    };
    let mut pll = |x_internal: f64| -> f64 {
        let natural = crate::likelihood::Param::from_internal(link, x_internal);
        let cfg_prof = match cfg_mle.fix_param(name, natural) {
            Ok(c) => c,
            Err(_) => return f64::NEG_INFINITY,
        };
        if cfg_prof.n_free() == 0 {
            return loglik(&cfg_prof, &[], data).unwrap_or(f64::NEG_INFINITY);
        }
        match fit(&cfg_prof, data, &refit_opts) {
            Ok(r) => r.loglik_max,
            Err(_) => f64::NEG_INFINITY,
        }
    };

    let (lo_internal, hi_internal) =
        profile_interval_engine(&mut pll, x_mle, fit_result.loglik_max, level, step0)?;
    Ok((
        lo_internal.map(|x| crate::likelihood::Param::from_internal(link, x)),
        hi_internal.map(|x| crate::likelihood::Param::from_internal(link, x)),
    ))
}

/// Find where a profiled log-likelihood crosses ll_max − χ²₁(level)/2 on
/// both sides of the maximizer. Generic over the profile function so it can
/// be verified against analytic objectives.
fn profile_interval_engine(
    pll: &mut dyn FnMut(f64) -> f64,
    x_mle: f64,
    ll_max: f64,
    level: f64,
    step0: f64,
) -> Result<(Option<f64>, Option<f64>)> {
    let drop = chi2_1_quantile(level)? / 2.0;
    let target = ll_max - drop;
    let mut side = |direction: f64| -> Option<f64> {
        let mut inside = x_mle;
        let mut outside = None;
        let mut step = step0;
        for _ in 0..45 {
            let probe = x_mle + direction * step;
            let v = pll(probe);
            if v < target {
                outside = Some(probe);
                break;
            }
            inside = probe;
            step *= 2.0;
        }
        let mut hi = outside?;
        let mut lo = inside;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let v = pll(mid);
            if v >= target {
                lo = mid;
            } else {
                hi = mid;
            }
            if (hi - lo).abs() <= 1e-7 * (1.0 + x_mle.abs()) {
                break;
            }
        }
        Some(0.5 * (lo + hi))
    };
    let lower = side(-1.0);
    let upper = side(1.0);
    if lower.is_none() || upper.is_none() {
        log::warn!(
            "profile likelihood did not drop below the cutoff on {} side(s); reporting open interval",
            match (&lower, &upper) {
                (None, None) => "both",
                (None, _) => "the lower",
                _ => "the upper",
            }
        );
    }
    Ok((lower, upper))
}

/// Data-driven starting values: baseline hazards from a no-frailty fit to
/// the empirical marginals, the frailty shape from the association level at
/// mid ages, and the modulation decay from the association trend. Only free
/// parameters are touched.
pub fn initial_values(config: &ModelConfig, data: &CurrentStatusDataset) -> Result<ModelConfig> {
    let mut cfg = config.clone();
    let rows = data.rows();

    // empirical marginal cumulative hazards, monotonized
    let marginal_cumhaz = |event: usize| -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut running = 0.0_f64;
        for r in rows {
            let n4 = r.n00 + r.n01 + r.n10 + r.n11;
            let (pos, total) = match event {
                1 => (r.n10 + r.n11 + r.m1x, n4 + r.m0x + r.m1x),
                _ => (r.n01 + r.n11 + r.mx1, n4 + r.mx0 + r.mx1),
            };
            if total > 0.0 {
                let s = (1.0 - pos / total).clamp(1e-6, 1.0 - 1e-6);
                running = running.max(-s.ln());
                out.push((r.age, running));
            }
        }
        out
    };

    let hazard_init = |form: &HazardForm, cumhaz: &[(f64, f64)]| -> HazardForm {
        let mut new = form.clone();
        if cumhaz.len() < 2 {
            return new;
        }
        let overall = {
            let (t_last, l_last) = cumhaz[cumhaz.len() - 1];
            (l_last / t_last.max(1e-9)).clamp(1e-5, 10.0)
        };
        match &mut new {
            HazardForm::PiecewiseConstant { cutpoints, rates } => {
                let mut bounds = vec![0.0];
                bounds.extend_from_slice(cutpoints);
                bounds.push(f64::INFINITY);
                for (i, rate) in rates.iter_mut().enumerate() {
                    if !rate.free {
                        continue;
                    }
                    let (a, b) = (bounds[i], bounds[i + 1]);
                    let inside: Vec<&(f64, f64)> = cumhaz
                        .iter()
                        .filter(|(t, _)| *t >= a && *t < b)
                        .collect();
                    if inside.len() >= 2 {
                        let (t0, l0) = *inside[0];
                        let (t1, l1) = *inside[inside.len() - 1];
                        if t1 > t0 {
                            rate.value = ((l1 - l0) / (t1 - t0)).clamp(1e-5, 10.0);
                            continue;
                        }
                    }
                    rate.value = overall;
                }
            }
            HazardForm::LogLinear { a, b } => {
                if a.free {
                    a.value = overall.ln();
                }
                if b.free {
                    b.value = 0.0;
                }
            }
        }
        new
    };
    cfg.hazard1 = hazard_init(&cfg.hazard1, &marginal_cumhaz(1));
    cfg.hazard2 = hazard_init(&cfg.hazard2, &marginal_cumhaz(2));

    // association series for the frailty parameters
    let phi = empirical_phi(data)?;
    let positive: Vec<(f64, f64)> = phi
        .points
        .iter()
        .filter(|p| p.phi > 1e-4 && p.phi.is_finite())
        .map(|p| (p.age, p.phi))
        .collect();
    let median = |vals: &mut Vec<f64>| -> Option<f64> {
        if vals.is_empty() {
            return None;
        }
        vals.sort_by(f64::total_cmp);
        Some(vals[vals.len() / 2])
    };
    let tertile = |which: usize| -> Option<f64> {
        if positive.is_empty() {
            return None;
        }
        let third = (positive.len() / 3).max(1);
        let slice: Vec<f64> = match which {
            0 => positive.iter().take(third).map(|(_, p)| *p).collect(),
            1 => positive
                .iter()
                .skip(third)
                .take(third)
                .map(|(_, p)| *p)
                .collect(),
            _ => positive
                .iter()
                .skip(positive.len().saturating_sub(third))
                .map(|(_, p)| *p)
                .collect(),
        };
        median(&mut slice.clone().to_vec())
    };

    if let Some(phi_mid) = tertile(1).or_else(|| tertile(0)) {
        let k_init = (1.0 / phi_mid).clamp(0.02, 50.0);
        match &mut cfg.frailty {
            FrailtyFamily::Gamma { k } if k.free => k.value = k_init,
            FrailtyFamily::GenGamma { k, .. } if k.free => k.value = k_init,
            FrailtyFamily::GenGammaAlpha { alpha, beta } if alpha.free => {
                alpha.value = k_init * beta.value.max(1e-3);
            }
            _ => {}
        }
    }
    if let Some(p2) = &mut cfg.second_component {
        if p2.free {
            if let Some(phi_late) = tertile(2) {
                p2.value = (1.0 / phi_late).clamp(0.05, 100.0);
            }
        }
    }
    if let ModulationForm::ExpQuadratic { rho } = &mut cfg.modulation {
        if rho.free && positive.len() >= 3 {
            // least squares of ln φ on t²: slope ≈ −2ρ
            let n = positive.len() as f64;
            let xs: Vec<f64> = positive.iter().map(|(t, _)| t * t).collect();
            let ys: Vec<f64> = positive.iter().map(|(_, p)| p.ln()).collect();
            let mx = xs.iter().sum::<f64>() / n;
            let my = ys.iter().sum::<f64>() / n;
            let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
            let sxy: f64 = xs
                .iter()
                .zip(&ys)
                .map(|(x, y)| (x - mx) * (y - my))
                .sum();
            if sxx > 0.0 {
                rho.value = (-sxy / sxx / 2.0).clamp(1e-6, 1.0);
            }
        }
    }
    Ok(cfg)
}
