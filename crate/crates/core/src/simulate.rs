//! Random generation of bivariate current status data under any supported
//! frailty model, and the Monte Carlo bias/RMSE study driver.
//!
//! Generation draws each individual's frailty (and second component), forms
//! the two conditional no-event probabilities analytically, and draws the
//! two infection indicators independently given the frailty. Replicates run
//! on separate ChaCha streams derived from (seed, replicate index), so study
//! results do not depend on the parallel schedule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit, initial_values, profile_ci, Convergence, FitOptions};
use crate::gengamma::GenGammaParams;
use crate::likelihood::{CurrentStatusDataset, CurrentStatusRow, ModelConfig};
use crate::special::inv_norm_cdf;
use crate::survival::SurvContext;

/// One draw of U ~ GenGamma(θ, k, β) via θ·W^{1/β} with W ~ Gamma(k, 1).
pub fn sample_gengamma<R: Rng + ?Sized>(p: &GenGammaParams, rng: &mut R) -> f64 {
    let gd = rand_distr::Gamma::new(p.k(), 1.0).expect("validated shape");
    let w: f64 = rng.sample(gd);
    p.theta() * w.powf(1.0 / p.beta())
}

/// Kolmogorov–Smirnov statistic of a sample against a distribution function.
/// Sorts the sample in place.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &mut [f64], cdf: F) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sample.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    d
}

fn simulate_with_rng<R: Rng + ?Sized>(
    truth: &ModelConfig,
    ages: &[f64],
    n_per_age: u64,
    rng: &mut R,
) -> Result<CurrentStatusDataset> {
    if ages.is_empty() {
        return Err(Error::domain("simulation needs at least one age"));
    }
    if n_per_age == 0 {
        return Err(Error::domain("n_per_age must be at least 1"));
    }
    let (spec, hz1, hz2) = truth.build()?;
    let t_max = ages.iter().cloned().fold(0.0_f64, f64::max);
    let ctx = SurvContext::new(&spec, &[&hz1, &hz2], t_max)?;
    let base = *spec.base();
    let v_dist = spec
        .second_component()
        .map(|k2| rand_distr::Gamma::new(k2, 1.0 / k2).expect("validated shape"));

    let mut rows = Vec::with_capacity(ages.len());
    for &t in ages {
        let j = ctx.steps(t)?;
        let (mut n00, mut n01, mut n10, mut n11) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n_per_age {
            let u = sample_gengamma(&base, rng);
            let v = match &v_dist {
                Some(d) => rng.sample(*d),
                None => 1.0,
            };
            let ln_u = u.ln();
            let i1 = ctx.cum_weighted(ctx.weights(0), j, ln_u);
            let i2 = ctx.cum_weighted(ctx.weights(1), j, ln_u);
            let no1 = rng.gen::<f64>() < (-v * i1).exp();
            let no2 = rng.gen::<f64>() < (-v * i2).exp();
            match (no1, no2) {
                (true, true) => n00 += 1.0,
                (true, false) => n01 += 1.0,
                (false, true) => n10 += 1.0,
                (false, false) => n11 += 1.0,
            }
        }
        rows.push(CurrentStatusRow::complete(t, n00, n01, n10, n11));
    }
    CurrentStatusDataset::new(rows)
}

/// Draw a 4-nomial current status dataset from the model; deterministic for
/// a fixed seed.
pub fn simulate_dataset(
    truth: &ModelConfig,
    ages: &[f64],
    n_per_age: u64,
    seed: u64,
) -> Result<CurrentStatusDataset> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    simulate_with_rng(truth, ages, n_per_age, &mut rng)
}

/// Design of one Monte Carlo study: generating truth, fitting configuration
/// (possibly misspecified), sampling plan and seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimDesign {
    pub scenario: String,
    pub truth: ModelConfig,
    pub fit_config: ModelConfig,
    pub ages: Vec<f64>,
    pub n_per_age: u64,
    pub replicates: usize,
    pub seed: u64,
    /// Re-derive starting values from each simulated dataset.
    #[serde(default = "default_true")]
    pub auto_init: bool,
    /// Also compute profile-interval coverage (slow).
    #[serde(default)]
    pub profile_coverage: bool,
    #[serde(default = "default_level")]
    pub ci_level: f64,
}

fn default_true() -> bool {
    true
}

fn default_level() -> f64 {
    0.95
}

/// Aggregated accuracy measures for one parameter. `sd` is the population
/// standard deviation of the estimates, so rmse² = bias² + sd² holds
/// exactly.
#[derive(Debug, Clone, Serialize)]
pub struct ParamSummary {
    pub name: String,
    pub true_value: f64,
    pub bias: f64,
    pub rmse: f64,
    pub sd: f64,
    pub mean_se: Option<f64>,
    pub coverage_wald: Option<f64>,
    pub coverage_profile: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub scenario: String,
    pub seed: u64,
    pub n_replicates: usize,
    pub n_converged: usize,
    pub n_nonconverged: usize,
    pub params: Vec<ParamSummary>,
}

struct RepOutcome {
    estimates: Vec<(String, f64)>,
    std_errors: Option<Vec<(String, f64)>>,
    profile: Option<Vec<(String, Option<f64>, Option<f64>)>>,
}

/// Run the full simulate-fit-aggregate loop. Nonconvergent replicates are
/// counted and excluded from the summaries; the run fails only if no
/// replicate converges.
pub fn run_study(design: &SimDesign) -> Result<StudyReport> {
    if design.replicates == 0 {
        return Err(Error::domain("study needs at least one replicate"));
    }
    let fit_opts = FitOptions {
        compute_hessian: true,
        ..FitOptions::default()
    };
    let outcomes: Vec<Option<RepOutcome>> = (0..design.replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha12Rng::seed_from_u64(design.seed);
            rng.set_stream(rep as u64 + 1);
            let data = match simulate_with_rng(&design.truth, &design.ages, design.n_per_age, &mut rng)
            {
                Ok(d) => d,
                Err(_) => return None,
            };
            let start = if design.auto_init {
                initial_values(&design.fit_config, &data).unwrap_or_else(|_| design.fit_config.clone())
            } else {
                design.fit_config.clone()
            };
            let result = match fit(&start, &data, &fit_opts) {
                Ok(r) => r,
                Err(_) => return None,
            };
            if result.convergence == Convergence::MaxIter {
                return None;
            }
            let profile = if design.profile_coverage {
                let mut cis = Vec::new();
                for (name, _) in &result.estimates {
                    match profile_ci(&start, &data, &result, name, design.ci_level) {
                        Ok((lo, hi)) => cis.push((name.clone(), lo, hi)),
                        Err(_) => cis.push((name.clone(), None, None)),
                    }
                }
                Some(cis)
            } else {
                None
            };
            Some(RepOutcome {
                estimates: result.estimates.clone(),
                std_errors: result.std_errors.clone(),
                profile,
            })
        })
        .collect();

    let converged: Vec<&RepOutcome> = outcomes.iter().flatten().collect();
    let n_converged = converged.len();
    if n_converged == 0 {
        return Err(Error::NonConvergence(
            "no study replicate converged".into(),
        ));
    }

    let names = design.fit_config.free_names();
    let z = inv_norm_cdf(0.5 * (1.0 + design.ci_level))?;
    let mut params = Vec::with_capacity(names.len());
    for name in &names {
        let true_value = design.truth.param_value(name).unwrap_or(f64::NAN);
        let ests: Vec<f64> = converged
            .iter()
            .filter_map(|o| {
                o.estimates
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, v)| *v)
            })
            .collect();
        let n = ests.len() as f64;
        let mean = ests.iter().sum::<f64>() / n;
        let bias = mean - true_value;
        let var = ests.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
        let rmse = ests
            .iter()
            .map(|e| (e - true_value) * (e - true_value))
            .sum::<f64>()
            / n;
        let ses: Vec<f64> = converged
            .iter()
            .filter_map(|o| {
                o.std_errors.as_ref().and_then(|se| {
                    se.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
                })
            })
            .collect();
        let mean_se = if ses.is_empty() {
            None
        } else {
            Some(ses.iter().sum::<f64>() / ses.len() as f64)
        };
        let coverage_wald = if ses.is_empty() || !true_value.is_finite() {
            None
        } else {
            let mut covered = 0usize;
            let mut counted = 0usize;
            for o in &converged {
                let est = o
                    .estimates
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, v)| *v);
                let se = o.std_errors.as_ref().and_then(|se| {
                    se.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
                });
                if let (Some(est), Some(se)) = (est, se) {
                    counted += 1;
                    if (est - true_value).abs() <= z * se {
                        covered += 1;
                    }
                }
            }
            (counted > 0).then(|| covered as f64 / counted as f64)
        };
        let coverage_profile = if design.profile_coverage && true_value.is_finite() {
            let mut covered = 0usize;
            let mut counted = 0usize;
            for o in &converged {
                if let Some(cis) = &o.profile {
                    if let Some((_, lo, hi)) = cis.iter().find(|(n, _, _)| n == name) {
                        counted += 1;
                        let lo_ok = lo.map_or(true, |l| l <= true_value);
                        let hi_ok = hi.map_or(true, |h| h >= true_value);
                        if lo_ok && hi_ok {
                            covered += 1;
                        }
                    }
                }
            }
            (counted > 0).then(|| covered as f64 / counted as f64)
        } else {
            None
        };
        params.push(ParamSummary {
            name: name.clone(),
            true_value,
            bias,
            rmse: rmse.sqrt(),
            sd: var.sqrt(),
            mean_se,
            coverage_wald,
            coverage_profile,
        });
    }
    Ok(StudyReport {
        scenario: design.scenario.clone(),
        seed: design.seed,
        n_replicates: design.replicates,
        n_converged,
        n_nonconverged: design.replicates - n_converged,
        params,
    })
}
