//! Current-status dataset representation, model configuration with packed
//! free parameters, the multinomial log-likelihood with marginal-only
//! contributions, deviance and AIC.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frailty::{FrailtySpec, ModulationFn};
use crate::survival::{bivariate_curves, HazardKind, HazardSpec};

/// Sentinel returned when a needed probability underflows with a positive
/// count; large and negative but finite so optimizers can retreat from it.
pub const LOGLIK_SENTINEL: f64 = -1e12;

const MIN_PROB: f64 = 1e-300;

/// Scale on which a parameter is handed to the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Identity,
    Log,
    Logit,
}

/// One scalar model parameter: its natural-scale value, whether it is free,
/// and the transform used while optimizing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub value: f64,
    #[serde(default = "default_true")]
    pub free: bool,
    #[serde(default = "default_log")]
    pub link: Link,
}

fn default_true() -> bool {
    true
}

fn default_log() -> Link {
    Link::Log
}

impl Param {
    pub fn free(value: f64) -> Self {
        Self {
            value,
            free: true,
            link: Link::Log,
        }
    }

    pub fn free_with(value: f64, link: Link) -> Self {
        Self {
            value,
            free: true,
            link,
        }
    }

    pub fn fixed(value: f64) -> Self {
        Self {
            value,
            free: false,
            link: Link::Identity,
        }
    }

    pub fn to_internal(&self) -> Result<f64> {
        match self.link {
            Link::Identity => Ok(self.value),
            Link::Log => {
                if !(self.value > 0.0) {
                    Err(Error::domain(format!(
                        "log link requires a positive value, got {}",
                        self.value
                    )))
                } else {
                    Ok(self.value.ln())
                }
            }
            Link::Logit => {
                if !(self.value > 0.0 && self.value < 1.0) {
                    Err(Error::domain(format!(
                        "logit link requires a value in (0, 1), got {}",
                        self.value
                    )))
                } else {
                    Ok((self.value / (1.0 - self.value)).ln())
                }
            }
        }
    }

    pub fn from_internal(link: Link, x: f64) -> f64 {
        match link {
            Link::Identity => x,
            Link::Log => x.exp(),
            Link::Logit => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// d(natural)/d(internal) at the current value, for delta-method
    /// standard errors.
    pub fn link_jacobian(&self) -> f64 {
        match self.link {
            Link::Identity => 1.0,
            Link::Log => self.value,
            Link::Logit => self.value * (1.0 - self.value),
        }
    }
}

/// Frailty family of the base distribution U.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FrailtyFamily {
    /// Unit-mean gamma with variance 1/k.
    Gamma { k: Param },
    /// Unit-mean generalized gamma with shape k and power shape β.
    GenGamma { k: Param, beta: Param },
    /// Generalized gamma parameterized by (β, α = kβ), which reduces the
    /// correlation between the estimates.
    GenGammaAlpha { alpha: Param, beta: Param },
}

/// Parametric form of the modulation function h(t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModulationForm {
    ConstantOne,
    ExpQuadratic { rho: Param },
    ExpTransition { rho: Param, beta: Param },
}

/// Parametric form of one baseline hazard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HazardForm {
    PiecewiseConstant { cutpoints: Vec<f64>, rates: Vec<Param> },
    LogLinear { a: Param, b: Param },
}

/// Complete model template: frailty family, modulation, optional second
/// component, and the two baseline hazards, with free/fixed masks and links
/// on every scalar parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub frailty: FrailtyFamily,
    pub modulation: ModulationForm,
    #[serde(default)]
    pub second_component: Option<Param>,
    pub hazard1: HazardForm,
    pub hazard2: HazardForm,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub allow_increasing_h: bool,
}

fn default_delta() -> f64 {
    1.0
}

impl ModelConfig {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&'static str, usize, &'a Param)) {
        match &self.frailty {
            FrailtyFamily::Gamma { k } => f("k", 0, k),
            FrailtyFamily::GenGamma { k, beta } => {
                f("k", 0, k);
                f("beta", 0, beta);
            }
            FrailtyFamily::GenGammaAlpha { alpha, beta } => {
                f("beta", 0, beta);
                f("alpha", 0, alpha);
            }
        }
        match &self.modulation {
            ModulationForm::ConstantOne => {}
            ModulationForm::ExpQuadratic { rho } => f("rho", 0, rho),
            ModulationForm::ExpTransition { rho, beta } => {
                f("rho", 0, rho);
                f("mod_beta", 0, beta);
            }
        }
        if let Some(k2) = &self.second_component {
            f("k2", 0, k2);
        }
        match &self.hazard1 {
            HazardForm::PiecewiseConstant { rates, .. } => {
                for (i, r) in rates.iter().enumerate() {
                    f("h1_rate", i, r);
                }
            }
            HazardForm::LogLinear { a, b } => {
                f("h1_a", 0, a);
                f("h1_b", 0, b);
            }
        }
        match &self.hazard2 {
            HazardForm::PiecewiseConstant { rates, .. } => {
                for (i, r) in rates.iter().enumerate() {
                    f("h2_rate", i, r);
                }
            }
            HazardForm::LogLinear { a, b } => {
                f("h2_a", 0, a);
                f("h2_b", 0, b);
            }
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&'static str, usize, &mut Param)) {
        match &mut self.frailty {
            FrailtyFamily::Gamma { k } => f("k", 0, k),
            FrailtyFamily::GenGamma { k, beta } => {
                f("k", 0, k);
                f("beta", 0, beta);
            }
            FrailtyFamily::GenGammaAlpha { alpha, beta } => {
                f("beta", 0, beta);
                f("alpha", 0, alpha);
            }
        }
        match &mut self.modulation {
            ModulationForm::ConstantOne => {}
            ModulationForm::ExpQuadratic { rho } => f("rho", 0, rho),
            ModulationForm::ExpTransition { rho, beta } => {
                f("rho", 0, rho);
                f("mod_beta", 0, beta);
            }
        }
        if let Some(k2) = &mut self.second_component {
            f("k2", 0, k2);
        }
        match &mut self.hazard1 {
            HazardForm::PiecewiseConstant { rates, .. } => {
                for (i, r) in rates.iter_mut().enumerate() {
                    f("h1_rate", i, r);
                }
            }
            HazardForm::LogLinear { a, b } => {
                f("h1_a", 0, a);
                f("h1_b", 0, b);
            }
        }
        match &mut self.hazard2 {
            HazardForm::PiecewiseConstant { rates, .. } => {
                for (i, r) in rates.iter_mut().enumerate() {
                    f("h2_rate", i, r);
                }
            }
            HazardForm::LogLinear { a, b } => {
                f("h2_a", 0, a);
                f("h2_b", 0, b);
            }
        }
    }

    fn slot_name(base: &str, idx: usize) -> String {
        if base.ends_with("rate") {
            format!("{base}{idx}")
        } else {
            base.to_string()
        }
    }

    /// All parameters in canonical packing order as (name, param).
    pub fn params(&self) -> Vec<(String, Param)> {
        let mut out = Vec::new();
        self.visit(&mut |base, idx, p| out.push((Self::slot_name(base, idx), *p)));
        out
    }

    /// Names of the free parameters in packing order.
    pub fn free_names(&self) -> Vec<String> {
        self.params()
            .into_iter()
            .filter(|(_, p)| p.free)
            .map(|(n, _)| n)
            .collect()
    }

    pub fn n_free(&self) -> usize {
        self.params().iter().filter(|(_, p)| p.free).count()
    }

    /// Internal-scale vector γ of the free parameters.
    pub fn pack(&self) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for (name, p) in self.params() {
            if p.free {
                let v = p.to_internal().map_err(|e| {
                    Error::domain(format!("parameter {name}: {e}"))
                })?;
                if !v.is_finite() {
                    return Err(Error::domain(format!(
                        "parameter {name} has non-finite internal value {v}"
                    )));
                }
                out.push(v);
            }
        }
        Ok(out)
    }

    /// A copy of the config with the free parameters replaced by the given
    /// internal-scale vector.
    pub fn unpack(&self, packed: &[f64]) -> Result<ModelConfig> {
        if packed.len() != self.n_free() {
            return Err(Error::domain(format!(
                "packed vector has length {}, expected {}",
                packed.len(),
                self.n_free()
            )));
        }
        let mut cfg = self.clone();
        let mut it = packed.iter();
        cfg.visit_mut(&mut |_, _, p| {
            if p.free {
                p.value = Param::from_internal(p.link, *it.next().expect("length checked"));
            }
        });
        Ok(cfg)
    }

    /// Natural-scale value of a named parameter.
    pub fn param_value(&self, name: &str) -> Option<f64> {
        self.params()
            .into_iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p.value)
    }

    /// A copy with one named parameter pinned at a natural-scale value
    /// (used by profile likelihood).
    pub fn fix_param(&self, name: &str, value: f64) -> Result<ModelConfig> {
        let mut cfg = self.clone();
        let mut found = false;
        cfg.visit_mut(&mut |base, idx, p| {
            if Self::slot_name(base, idx) == name {
                p.value = value;
                p.free = false;
                found = true;
            }
        });
        if !found {
            return Err(Error::domain(format!("no parameter named {name}")));
        }
        Ok(cfg)
    }

    /// A copy with one named parameter's value replaced (free flag kept).
    pub fn set_value(&self, name: &str, value: f64) -> Result<ModelConfig> {
        let mut cfg = self.clone();
        let mut found = false;
        cfg.visit_mut(&mut |base, idx, p| {
            if Self::slot_name(base, idx) == name {
                p.value = value;
                found = true;
            }
        });
        if !found {
            return Err(Error::domain(format!("no parameter named {name}")));
        }
        Ok(cfg)
    }

    /// Realize the model at the current parameter values.
    pub fn build(&self) -> Result<(FrailtySpec, HazardSpec, HazardSpec)> {
        let (k, beta) = match &self.frailty {
            FrailtyFamily::Gamma { k } => (k.value, 1.0),
            FrailtyFamily::GenGamma { k, beta } => (k.value, beta.value),
            FrailtyFamily::GenGammaAlpha { alpha, beta } => {
                if !(beta.value > 0.0) {
                    return Err(Error::domain(format!(
                        "parameter beta must be positive, got {}",
                        beta.value
                    )));
                }
                (alpha.value / beta.value, beta.value)
            }
        };
        let modulation = match &self.modulation {
            ModulationForm::ConstantOne => ModulationFn::constant_one(),
            ModulationForm::ExpQuadratic { rho } => {
                if self.allow_increasing_h {
                    ModulationFn::exp_quadratic_unconstrained(rho.value)?
                } else {
                    ModulationFn::exp_quadratic(rho.value)?
                }
            }
            ModulationForm::ExpTransition { rho, beta } => {
                if self.allow_increasing_h {
                    ModulationFn::exp_transition_unconstrained(rho.value, beta.value)?
                } else {
                    ModulationFn::exp_transition(rho.value, beta.value)?
                }
            }
        };
        let mut spec = FrailtySpec::new(k, beta, modulation)?;
        if let Some(k2) = &self.second_component {
            spec = spec.with_second_component(k2.value)?;
        }
        let build_hz = |form: &HazardForm| -> Result<HazardSpec> {
            match form {
                HazardForm::PiecewiseConstant { cutpoints, rates } => HazardSpec::new(
                    HazardKind::PiecewiseConstant {
                        cutpoints: cutpoints.clone(),
                        rates: rates.iter().map(|p| p.value).collect(),
                    },
                    self.delta,
                ),
                HazardForm::LogLinear { a, b } => HazardSpec::new(
                    HazardKind::LogLinear {
                        a: a.value,
                        b: b.value,
                    },
                    self.delta,
                ),
            }
        };
        Ok((spec, build_hz(&self.hazard1)?, build_hz(&self.hazard2)?))
    }
}

/// Counts observed at one age: the fully observed 4-nomial cells plus
/// marginal-only counts where just one of the two tests was available.
/// Counts are stored as reals so that expected-count (noise-free) data can
/// be fitted for diagnostics; observed data are whole numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentStatusRow {
    pub age: f64,
    pub n00: f64,
    pub n01: f64,
    pub n10: f64,
    pub n11: f64,
    #[serde(default)]
    pub m0x: f64,
    #[serde(default)]
    pub m1x: f64,
    #[serde(default)]
    pub mx0: f64,
    #[serde(default)]
    pub mx1: f64,
}

impl CurrentStatusRow {
    pub fn complete(age: f64, n00: f64, n01: f64, n10: f64, n11: f64) -> Self {
        Self {
            age,
            n00,
            n01,
            n10,
            n11,
            m0x: 0.0,
            m1x: 0.0,
            mx0: 0.0,
            mx1: 0.0,
        }
    }

    fn counts(&self) -> [f64; 8] {
        [
            self.n00, self.n01, self.n10, self.n11, self.m0x, self.m1x, self.mx0, self.mx1,
        ]
    }

    pub fn total(&self) -> f64 {
        self.counts().iter().sum()
    }
}

/// Per-age current status counts with strictly ascending ages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentStatusDataset {
    rows: Vec<CurrentStatusRow>,
}

impl CurrentStatusDataset {
    pub fn new(rows: Vec<CurrentStatusRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::data("dataset has no rows"));
        }
        for (i, row) in rows.iter().enumerate() {
            if !row.age.is_finite() || row.age < 0.0 {
                return Err(Error::data(format!(
                    "row {i}: age must be nonnegative and finite, got {}",
                    row.age
                )));
            }
            for (j, c) in row.counts().iter().enumerate() {
                if !c.is_finite() || *c < 0.0 {
                    return Err(Error::data(format!(
                        "row {i}, count column {j}: counts must be nonnegative, got {c}"
                    )));
                }
            }
        }
        if rows.windows(2).any(|w| !(w[0].age < w[1].age)) {
            return Err(Error::data("ages must be strictly ascending"));
        }
        if rows.iter().map(|r| r.total()).sum::<f64>() <= 0.0 {
            return Err(Error::data("dataset has no positive counts"));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[CurrentStatusRow] {
        &self.rows
    }

    pub fn ages(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.age).collect()
    }
}

/// Multinomial log-likelihood value plus an underflow diagnostic.
#[derive(Debug, Clone, Copy)]
pub struct LoglikDetail {
    pub value: f64,
    /// True when a positive count met a probability below the floor and the
    /// sentinel was returned.
    pub underflow: bool,
}

/// Loglik(γ) = Σ_t Σ_ij n_ijt log S_ij(t), with marginal-only counts
/// contributing through the corresponding marginal survivor probabilities.
pub fn loglik(config: &ModelConfig, packed: &[f64], data: &CurrentStatusDataset) -> Result<f64> {
    Ok(loglik_detailed(config, packed, data)?.value)
}

/// As `loglik`, reporting whether the underflow sentinel was taken.
pub fn loglik_detailed(
    config: &ModelConfig,
    packed: &[f64],
    data: &CurrentStatusDataset,
) -> Result<LoglikDetail> {
    let cfg = config.unpack(packed)?;
    let (spec, hz1, hz2) = cfg.build()?;
    let ages = data.ages();
    let curves = bivariate_curves(&spec, &hz1, &hz2, &ages)?;
    let mut total = 0.0;
    for (i, row) in data.rows().iter().enumerate() {
        let p = &curves.probs[i];
        let m1 = curves.marginal1[i];
        let m2 = curves.marginal2[i];
        let terms = [
            (row.n00, p.s00),
            (row.n01, p.s01),
            (row.n10, p.s10),
            (row.n11, p.s11),
            (row.m0x, m1),
            (row.m1x, 1.0 - m1),
            (row.mx0, m2),
            (row.mx1, 1.0 - m2),
        ];
        for (count, prob) in terms {
            if count > 0.0 {
                if prob < MIN_PROB {
                    return Ok(LoglikDetail {
                        value: LOGLIK_SENTINEL,
                        underflow: true,
                    });
                }
                total += count * prob.ln();
            }
        }
    }
    Ok(LoglikDetail {
        value: total,
        underflow: false,
    })
}

/// Log-likelihood of the saturated multinomial model: empirical cell
/// proportions per age, zero-count cells contributing nothing.
pub fn saturated_loglik(data: &CurrentStatusDataset) -> f64 {
    let mut total = 0.0;
    for row in data.rows() {
        let n4 = row.n00 + row.n01 + row.n10 + row.n11;
        if n4 > 0.0 {
            for c in [row.n00, row.n01, row.n10, row.n11] {
                if c > 0.0 {
                    total += c * (c / n4).ln();
                }
            }
        }
        for (a, b) in [(row.m0x, row.m1x), (row.mx0, row.mx1)] {
            let m = a + b;
            if m > 0.0 {
                for c in [a, b] {
                    if c > 0.0 {
                        total += c * (c / m).ln();
                    }
                }
            }
        }
    }
    total
}

/// Number of free multinomial cells in the saturated model: per age, one
/// less than the number of nonzero cells in each observed multinomial
/// (the 4-nomial of complete pairs and each marginal binomial).
pub fn saturated_free_cells(data: &CurrentStatusDataset) -> i64 {
    let mut cells = 0i64;
    for row in data.rows() {
        let n4_nonzero = [row.n00, row.n01, row.n10, row.n11]
            .iter()
            .filter(|c| **c > 0.0)
            .count() as i64;
        if n4_nonzero > 0 {
            cells += n4_nonzero - 1;
        }
        for (a, b) in [(row.m0x, row.m1x), (row.mx0, row.mx1)] {
            let nonzero = [a, b].iter().filter(|c| **c > 0.0).count() as i64;
            if nonzero > 0 {
                cells += nonzero - 1;
            }
        }
    }
    cells
}

/// Deviance 2(saturated − model) and its degrees of freedom
/// (free cells − free parameters).
pub fn deviance(
    config: &ModelConfig,
    packed: &[f64],
    data: &CurrentStatusDataset,
) -> Result<(f64, i64)> {
    let detail = loglik_detailed(config, packed, data)?;
    if detail.underflow {
        return Err(Error::numeric(
            "deviance undefined: model probability underflowed with a positive count",
            f64::NAN,
        ));
    }
    let dev = 2.0 * (saturated_loglik(data) - detail.value);
    let df = saturated_free_cells(data) - config.n_free() as i64;
    Ok((dev.max(0.0), df))
}

/// Akaike information criterion −2·loglik + 2·n_params.
pub fn aic(loglik: f64, n_params: usize) -> f64 {
    -2.0 * loglik + 2.0 * n_params as f64
}
