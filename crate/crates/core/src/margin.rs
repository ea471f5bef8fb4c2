//! How much of a binary classifier's output margin the order-R polynomial
//! surrogate accounts for.
//!
//! For each sample the margin is `O_decided − O_other` with the decision taken
//! from the full model, so a truncation that flips the decision contributes a
//! negative margin.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::carleman::{chebyshev_fit_gelu, gelu, max_grid_error, truncated_output, CarlemanCoefficients, FitDomain, SamplingSpec, Weighting};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{argmax, Model};
use crate::scalar::Real;
use crate::train::correct_subset;

/// Where the Chebyshev fit lives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum DomainChoice {
    Fixed { lo: f64, hi: f64 },
    /// `[-m, m]` with `m` the largest `|y|` seen on the analysed samples.
    Auto,
}

impl Default for DomainChoice {
    fn default() -> Self {
        Self::Fixed { lo: FitDomain::DEFAULT.lo, hi: FitDomain::DEFAULT.hi }
    }
}

impl std::str::FromStr for DomainChoice {
    type Err = Error;
    /// `auto`, or `lo:hi`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Self::Auto);
        }
        let bad = || Error::InvalidParameter(format!("domain must be 'auto' or 'lo:hi', got '{s}'"));
        let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        FitDomain::new(lo, hi)?;
        Ok(Self::Fixed { lo, hi })
    }
}

/// Node weights for the margin-analysis fit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitWeighting {
    /// Use the sampling spec as given.
    #[default]
    Uniform,
    /// Weight each node by the empirical density of the analysed features,
    /// so the fit minimises squared error under the feature distribution.
    Data,
}

impl std::str::FromStr for FitWeighting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "data" => Ok(Self::Data),
            _ => Err(Error::InvalidParameter(format!("unknown weighting '{s}'"))),
        }
    }
}

const DENSITY_BINS: usize = 64;

/// Histogram density of `values` (already scaled to `[-1, 1]`) read off at the
/// Chebyshev nodes, times `sqrt(1 - s²)` to undo the node clustering.
fn density_weights(values: &[f64], nodes: &[f64]) -> Vec<f64> {
    let bin = |s: f64| ((((s + 1.0) / 2.0) * DENSITY_BINS as f64).floor().max(0.0) as usize).min(DENSITY_BINS - 1);
    let mut hist = vec![0.0; DENSITY_BINS];
    for &v in values {
        if (-1.0..=1.0).contains(&v) {
            hist[bin(v)] += 1.0;
        }
    }
    let total: f64 = hist.iter().sum();
    nodes.iter().map(|&s| hist[bin(s)] / total.max(1.0) * (1.0 - s * s).sqrt()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarginSettings {
    /// Truncation orders; the exact endpoint is always reported as well.
    pub orders: Vec<usize>,
    pub domain: DomainChoice,
    pub sampling: SamplingSpec,
    pub weighting: FitWeighting,
    /// Drop samples the full model misclassifies.
    pub correct_only: bool,
}

impl Default for MarginSettings {
    fn default() -> Self {
        Self { orders: vec![1, 2], domain: DomainChoice::default(), sampling: SamplingSpec::default(), weighting: FitWeighting::Uniform, correct_only: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMargin {
    pub sample_id: u64,
    pub label: usize,
    pub full: f64,
    /// One entry per requested order, same order as the settings.
    pub truncated: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderSummary {
    /// Truncation order, `None` for the exact activation.
    pub order: Option<usize>,
    /// `mean(truncated) / mean(full)`.
    pub fraction_of_means: f64,
    /// `mean(truncated / full)` over samples with a non-zero full margin.
    pub mean_of_ratios: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub degree: usize,
    pub coefficients: Vec<f64>,
    pub max_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub domain: FitDomain,
    pub n_samples: usize,
    pub fits: Vec<FitSummary>,
    pub samples: Vec<SampleMargin>,
    pub summaries: Vec<OrderSummary>,
}

impl MarginReport {
    pub fn fraction(&self, order: Option<usize>) -> Option<f64> {
        self.summaries.iter().find(|s| s.order == order).map(|s| s.fraction_of_means)
    }
}

fn signed_margin(logits: &[f64], decided: usize) -> f64 {
    logits[decided] - logits[1 - decided]
}

/// Explained margin fractions of a two-class model for each requested order.
pub fn margin_explained<T: Real>(model: &Model<T>, data: &Dataset, settings: &MarginSettings) -> Result<MarginReport> {
    if model.config().n_classes != 2 {
        return Err(Error::UnsupportedTask(format!(
            "margin analysis needs a binary model, this one has {} classes",
            model.config().n_classes
        )));
    }
    let subset = if settings.correct_only { correct_subset(model, data)? } else { data.clone() };
    if subset.is_empty() {
        return Err(Error::Empty("no samples left for the margin analysis".into()));
    }
    let domain = match settings.domain {
        DomainChoice::Fixed { lo, hi } => FitDomain::new(lo, hi)?,
        DomainChoice::Auto => {
            let peaks: Vec<f64> = subset
                .samples
                .par_iter()
                .map(|s| Ok(model.forward(s.series.view())?.y.iter().fold(0.0f64, |m, v| m.max(v.abs().as_f64()))))
                .collect::<Result<_>>()?;
            let m = peaks.into_iter().fold(0.0, f64::max);
            if !(m > 0.0) {
                return Err(Error::DegenerateMargin("all features are zero".into()));
            }
            FitDomain::symmetric(m)?
        }
    };
    let sampling = match settings.weighting {
        FitWeighting::Uniform => settings.sampling.clone(),
        FitWeighting::Data => {
            let (c, h) = (0.5 * (domain.lo + domain.hi), 0.5 * (domain.hi - domain.lo));
            let scaled: Vec<Vec<f64>> = subset
                .samples
                .par_iter()
                .map(|s| Ok(model.forward(s.series.view())?.y.iter().map(|v| (v.as_f64() - c) / h).collect()))
                .collect::<Result<_>>()?;
            let flat: Vec<f64> = scaled.into_iter().flatten().collect();
            let nodes = settings.sampling.node_positions::<f64>();
            SamplingSpec { nodes: nodes.len(), weighting: Weighting::Custom(density_weights(&flat, &nodes)) }
        }
    };
    let coeffs: Vec<CarlemanCoefficients<T>> = settings
        .orders
        .iter()
        .map(|&r| chebyshev_fit_gelu(r, domain, &sampling))
        .collect::<Result<_>>()?;
    let fits = coeffs
        .iter()
        .map(|c| FitSummary {
            degree: c.degree,
            coefficients: c.monomial.iter().map(|v| v.as_f64()).collect(),
            max_error: max_grid_error(c, gelu, 10_000).as_f64(),
        })
        .collect();

    let mixing = model.mixing();
    let w = &model.params().w;
    let samples: Vec<SampleMargin> = subset
        .samples
        .par_iter()
        .map(|s| {
            let cache = model.forward(s.series.view())?;
            let full_logits: Vec<f64> = cache.logits.iter().map(|v| v.as_f64()).collect();
            let decided = argmax(&cache.logits);
            let series = crate::modal::ModalSeries::from_modal_states(cache.states().view(), model.spectrum(), model.discretization().tau)?;
            let truncated = settings
                .orders
                .iter()
                .zip(&coeffs)
                .map(|(&r, c)| {
                    let o = truncated_output(&series, &mixing, w, c, r)?;
                    let o: Vec<f64> = o.iter().map(|v| v.as_f64()).collect();
                    Ok(signed_margin(&o, decided))
                })
                .collect::<Result<_>>()?;
            Ok(SampleMargin { sample_id: s.id, label: s.label, full: signed_margin(&full_logits, decided), truncated })
        })
        .collect::<Result<_>>()?;

    let n = samples.len() as f64;
    let mean_full = samples.iter().map(|s| s.full).sum::<f64>() / n;
    if mean_full == 0.0 {
        return Err(Error::DegenerateMargin("mean full-model margin is zero".into()));
    }
    let summarize = |order: Option<usize>, pick: &dyn Fn(&SampleMargin) -> f64| {
        let mean_t = samples.iter().map(pick).sum::<f64>() / n;
        let ratios: Vec<f64> = samples.iter().filter(|s| s.full != 0.0).map(|s| pick(s) / s.full).collect();
        OrderSummary {
            order,
            fraction_of_means: mean_t / mean_full,
            mean_of_ratios: ratios.iter().sum::<f64>() / ratios.len().max(1) as f64,
        }
    };
    let mut summaries: Vec<OrderSummary> =
        (0..settings.orders.len()).map(|i| summarize(Some(settings.orders[i]), &|s| s.truncated[i])).collect();
    summaries.push(summarize(None, &|s| s.full));
    Ok(MarginReport { domain, n_samples: samples.len(), fits, samples, summaries })
}
