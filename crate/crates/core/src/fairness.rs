//! Fairness metrics over per-attribute FAR and FRR at the global-FAR
//! threshold, and their recentered bootstrap bands.
//!
//! Every metric comes in three variants: classic (U-statistic rates at the
//! classic threshold), bootstrap (resampled rates at the resampled
//! threshold) and V-statistic (V-statistic rates at the classic threshold).
//! The band is the classic value shifted by quantiles of
//! bootstrap − V-statistic.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{
    check_band_params, order_statistic, replicate_multiplicities, sample_std, MultiplicityVector,
};
use crate::data::ScoreCache;
use crate::error::{Error, Result};
use crate::estimators::{check_alphas, Scope, ScopeIndex, StepCdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "FAR")]
    Far,
    #[serde(rename = "FRR")]
    Frr,
}

impl Side {
    pub const ALL: [Side; 2] = [Side::Far, Side::Frr];
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Far => "FAR",
            Side::Frr => "FRR",
        })
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FAR" => Ok(Side::Far),
            "FRR" => Ok(Side::Frr),
            _ => Err(Error::InvalidConfig(format!("unknown side {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    MaxMin,
    MaxGeomean,
    LogGeomean,
    Gini,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::MaxMin,
        Metric::MaxGeomean,
        Metric::LogGeomean,
        Metric::Gini,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::MaxMin => "max_min",
            Metric::MaxGeomean => "max_geomean",
            Metric::LogGeomean => "log_geomean",
            Metric::Gini => "gini",
        }
    }

    pub fn evaluate(self, rates: &[f64]) -> Result<f64> {
        match self {
            Metric::MaxMin => max_min_ratio(rates),
            Metric::MaxGeomean => max_geomean_ratio(rates),
            Metric::LogGeomean => log_geomean_sum(rates),
            Metric::Gini => gini_coefficient(rates),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown metric {s:?}")))
    }
}

/// What to do with a group rate of exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ZeroPolicy {
    /// Replace it by half the weight of one pair of that group and flag it.
    #[default]
    Floor,
    /// Leave it; metrics needing a positive rate become undefined.
    Strict,
}

fn check_rates(rates: &[f64]) -> Result<()> {
    if rates.is_empty() {
        return Err(Error::UndefinedMetric("no groups".into()));
    }
    if let Some(a) = rates
        .iter()
        .position(|&r| !r.is_finite() || r <= 0.0)
    {
        return Err(Error::UndefinedMetric(format!(
            "group {a} has rate {}",
            rates[a]
        )));
    }
    Ok(())
}

fn min_max(rates: &[f64]) -> (f64, f64) {
    rates
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
            (lo.min(r), hi.max(r))
        })
}

/// `(Π_a r_a)^{1/|A|}`, computed in log space.
pub fn geometric_mean(rates: &[f64]) -> Result<f64> {
    check_rates(rates)?;
    let (lo, hi) = min_max(rates);
    if lo == hi {
        return Ok(lo);
    }
    let mean_log = rates.iter().map(|r| r.ln()).sum::<f64>() / rates.len() as f64;
    Ok(mean_log.exp().clamp(lo, hi))
}

/// `max_a r_a / min_a r_a`.
pub fn max_min_ratio(rates: &[f64]) -> Result<f64> {
    check_rates(rates)?;
    let (lo, hi) = min_max(rates);
    Ok(hi / lo)
}

/// `max_a r_a / geomean`.
pub fn max_geomean_ratio(rates: &[f64]) -> Result<f64> {
    let g = geometric_mean(rates)?;
    Ok(min_max(rates).1 / g)
}

/// `Σ_a |log10(r_a / geomean)|`.
pub fn log_geomean_sum(rates: &[f64]) -> Result<f64> {
    let g = geometric_mean(rates)?;
    Ok(rates.iter().map(|r| (r / g).log10().abs()).sum())
}

/// `|A|/(|A|-1) · Σ_a Σ_b |r_a - r_b| / (2 |A|² geomean)`: the Gini
/// coefficient with the geometric mean in the denominator.
pub fn gini_coefficient(rates: &[f64]) -> Result<f64> {
    if rates.len() < 2 {
        return Err(Error::UndefinedMetric(
            "Gini coefficient needs at least 2 groups".into(),
        ));
    }
    let g = geometric_mean(rates)?;
    let n = rates.len() as f64;
    let mut diff = 0.0;
    for a in rates {
        for b in rates {
            diff += (a - b).abs();
        }
    }
    Ok(n / (n - 1.0) * diff / (2.0 * n * n * g))
}

/// `t_α = G^{-1}(1 - α)`: the threshold with global FAR α.
pub fn global_threshold(impostor: &StepCdf, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidProbability(alpha));
    }
    impostor.quantile(1.0 - alpha)
}

/// Which estimator supplies the group rates.
#[derive(Debug, Clone, Copy)]
pub enum RateVariant<'a> {
    Classic,
    Bootstrap(&'a MultiplicityVector),
    VStat,
}

/// Per-attribute rates of one side at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub side: Side,
    pub threshold: f64,
    pub rates: Vec<f64>,
}

/// Per-attribute score indexes plus the global one that fixes t_α.
pub struct GroupIndexes {
    pub global: ScopeIndex,
    pub groups: Vec<ScopeIndex>,
}

impl GroupIndexes {
    pub fn new(cache: &ScoreCache) -> Result<Self> {
        let global = ScopeIndex::new(cache, Scope::Global)?;
        let groups = (0..cache.num_attributes())
            .map(|a| ScopeIndex::new(cache, Scope::Attribute(a)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { global, groups })
    }

    fn cdfs(&self, side: Side, variant: RateVariant<'_>) -> Result<Vec<StepCdf>> {
        self.groups
            .iter()
            .map(|g| match (side, variant) {
                (Side::Frr, RateVariant::Classic) => g.genuine_cdf(),
                (Side::Frr, RateVariant::VStat) => g.vstat_genuine_cdf(),
                (Side::Frr, RateVariant::Bootstrap(m)) => g.weighted_genuine_cdf(m),
                (Side::Far, RateVariant::Classic | RateVariant::VStat) => g.impostor_cdf(),
                (Side::Far, RateVariant::Bootstrap(m)) => g.weighted_impostor_cdf(m),
            })
            .collect()
    }

    pub fn rates(&self, side: Side, t: f64, variant: RateVariant<'_>) -> Result<GroupRates> {
        let cdfs = self.cdfs(side, variant)?;
        Ok(GroupRates {
            side,
            threshold: t,
            rates: rates_at(&cdfs, side, t),
        })
    }
}

fn rates_at(cdfs: &[StepCdf], side: Side, t: f64) -> Vec<f64> {
    cdfs.iter()
        .map(|c| match side {
            Side::Frr => c.eval(t),
            Side::Far => 1.0 - c.eval(t),
        })
        .collect()
}

/// FAR_a(t) or FRR_a(t) for every attribute. The FAR side of the
/// V-statistic variant equals the classic one.
pub fn group_rates(
    cache: &ScoreCache,
    side: Side,
    t: f64,
    variant: RateVariant<'_>,
) -> Result<GroupRates> {
    GroupIndexes::new(cache)?.rates(side, t, variant)
}

/// Floor for a zero rate in each group: half the weight of a single pair.
///
/// FAR side: `1 / (2 Σ_{(k,l) in a} n_k n_l)`. FRR side: half the smallest
/// single-pair weight, `1 / (2 K_a max_k C(n_k, 2))`.
pub fn zero_floors(cache: &ScoreCache, side: Side) -> Vec<f64> {
    let a_count = cache.num_attributes();
    match side {
        Side::Far => {
            let mut total = vec![0usize; a_count];
            for block in cache.impostor_blocks() {
                let a = cache.attribute_of(block.first);
                if a == cache.attribute_of(block.second) {
                    total[a] += block.scores().len();
                }
            }
            total
                .iter()
                .map(|&t| 1.0 / (2.0 * t.max(1) as f64))
                .collect()
        }
        Side::Frr => {
            let mut members = vec![0usize; a_count];
            let mut max_pairs = vec![1usize; a_count];
            for id in cache.identities() {
                members[id.attribute] += 1;
                max_pairs[id.attribute] = max_pairs[id.attribute].max(id.n() * (id.n() - 1) / 2);
            }
            members
                .iter()
                .zip(&max_pairs)
                .map(|(&k, &p)| 1.0 / (2.0 * (k.max(1) * p) as f64))
                .collect()
        }
    }
}

/// Applies the zero policy in place; returns how many groups were floored.
pub fn apply_zero_policy(rates: &mut [f64], floors: &[f64], policy: ZeroPolicy) -> usize {
    if policy == ZeroPolicy::Strict {
        return 0;
    }
    let mut floored = 0;
    for (r, &f) in rates.iter_mut().zip(floors) {
        if *r == 0.0 {
            *r = f;
            floored += 1;
        }
    }
    floored
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessConfig {
    pub alphas: Vec<f64>,
    pub replicates: usize,
    pub alpha_ci: f64,
    pub seed: u64,
    pub zero_policy: ZeroPolicy,
}

/// One fairness metric on one side, along the α-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub metric: Metric,
    pub side: Side,
    pub alphas: Vec<f64>,
    pub classic: Vec<f64>,
    pub vstat: Vec<f64>,
    /// Mean of the defined bootstrap replicates.
    pub bootstrap_mean: Vec<Option<f64>>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
    pub replicate_std: Vec<Option<f64>>,
    /// replicate_std / classic; `None` where the classic value is 0.
    pub normalized_std: Vec<Option<f64>>,
    /// Groups whose classic rate was floored.
    pub floored_groups: Vec<usize>,
    /// Replicates dropped because the metric was undefined on them.
    pub excluded_replicates: Vec<usize>,
    pub replicates: usize,
    pub alpha_ci: f64,
    pub seed: u64,
    pub zero_policy: ZeroPolicy,
}

/// Rates of every group, on both sides, for one estimator variant:
/// `[side][α][group]`.
type RateTable = [Vec<Vec<f64>>; 2];

fn side_slot(side: Side) -> usize {
    match side {
        Side::Far => 0,
        Side::Frr => 1,
    }
}

fn rate_table(
    indexes: &GroupIndexes,
    thresholds: &[f64],
    variant: RateVariant<'_>,
) -> Result<RateTable> {
    let far = indexes.cdfs(Side::Far, variant)?;
    let frr = indexes.cdfs(Side::Frr, variant)?;
    Ok([
        thresholds
            .iter()
            .map(|&t| rates_at(&far, Side::Far, t))
            .collect(),
        thresholds
            .iter()
            .map(|&t| rates_at(&frr, Side::Frr, t))
            .collect(),
    ])
}

fn thresholds_of(impostor: &StepCdf, alphas: &[f64]) -> Result<Vec<f64>> {
    alphas
        .iter()
        .map(|&a| global_threshold(impostor, a))
        .collect()
}

/// Fairness reports for every requested metric × side, sharing one set of
/// bootstrap replicates (the same multiplicity streams as the ROC bands).
pub fn fairness_reports(
    cache: &ScoreCache,
    metrics: &[Metric],
    sides: &[Side],
    cfg: &FairnessConfig,
) -> Result<Vec<FairnessReport>> {
    check_alphas(&cfg.alphas)?;
    check_band_params(cfg.replicates, cfg.alpha_ci)?;
    let indexes = GroupIndexes::new(cache)?;
    if let Some(a) = indexes
        .groups
        .iter()
        .position(|g| g.num_identity_pairs() == 0)
    {
        return Err(Error::EmptyScope(format!(
            "attribute {} has no impostor pair",
            cache.attribute_labels()[a]
        )));
    }

    let alphas = &cfg.alphas;
    let classic_t = thresholds_of(&indexes.global.impostor_cdf()?, alphas)?;
    let classic = rate_table(&indexes, &classic_t, RateVariant::Classic)?;
    let vstat = rate_table(&indexes, &classic_t, RateVariant::VStat)?;

    let sizes = cache.identity_sizes();
    let replicates = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|b| {
            let m = replicate_multiplicities(cfg.seed, b, &sizes);
            let t = thresholds_of(&indexes.global.weighted_impostor_cdf(&m)?, alphas)?;
            rate_table(&indexes, &t, RateVariant::Bootstrap(&m))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut reports = Vec::new();
    for &side in sides {
        let slot = side_slot(side);
        let floors = zero_floors(cache, side);
        for &metric in metrics {
            let mut report = FairnessReport {
                metric,
                side,
                alphas: alphas.clone(),
                classic: Vec::with_capacity(alphas.len()),
                vstat: Vec::with_capacity(alphas.len()),
                bootstrap_mean: Vec::with_capacity(alphas.len()),
                lower: Vec::with_capacity(alphas.len()),
                upper: Vec::with_capacity(alphas.len()),
                replicate_std: Vec::with_capacity(alphas.len()),
                normalized_std: Vec::with_capacity(alphas.len()),
                floored_groups: Vec::with_capacity(alphas.len()),
                excluded_replicates: Vec::with_capacity(alphas.len()),
                replicates: cfg.replicates,
                alpha_ci: cfg.alpha_ci,
                seed: cfg.seed,
                zero_policy: cfg.zero_policy,
            };
            for (i, &alpha) in alphas.iter().enumerate() {
                let with_context = |e: Error| match e {
                    Error::UndefinedMetric(msg) => {
                        Error::UndefinedMetric(format!("{metric} ({side}) at α = {alpha}: {msg}"))
                    }
                    other => other,
                };
                let mut rates = classic[slot][i].clone();
                let floored = apply_zero_policy(&mut rates, &floors, cfg.zero_policy);
                let classic_value = metric.evaluate(&rates).map_err(with_context)?;
                let mut rates = vstat[slot][i].clone();
                apply_zero_policy(&mut rates, &floors, cfg.zero_policy);
                let vstat_value = metric.evaluate(&rates).map_err(with_context)?;

                let mut values = Vec::with_capacity(replicates.len());
                let mut excluded = 0;
                for rep in &replicates {
                    let mut rates = rep[slot][i].clone();
                    apply_zero_policy(&mut rates, &floors, cfg.zero_policy);
                    match metric.evaluate(&rates) {
                        Ok(v) => values.push(v),
                        Err(Error::UndefinedMetric(_)) => excluded += 1,
                        Err(e) => return Err(e),
                    }
                }

                let (lower, upper, mean, std) = if values.is_empty() {
                    (None, None, None, None)
                } else {
                    let mut gaps: Vec<f64> = values.iter().map(|v| v - vstat_value).collect();
                    gaps.sort_by(f64::total_cmp);
                    let lo = classic_value + order_statistic(&gaps, cfg.alpha_ci / 2.0);
                    let hi = classic_value + order_statistic(&gaps, 1.0 - cfg.alpha_ci / 2.0);
                    let mean = values.iter().sum::<f64>() / values.len() as f64;
                    let std = (values.len() >= 2).then(|| sample_std(&values));
                    (Some(lo), Some(hi), Some(mean), std)
                };
                report.classic.push(classic_value);
                report.vstat.push(vstat_value);
                report.bootstrap_mean.push(mean);
                report.lower.push(lower);
                report.upper.push(upper);
                report.replicate_std.push(std);
                report.normalized_std.push(
                    std.filter(|_| classic_value > 0.0)
                        .map(|s| s / classic_value),
                );
                report.floored_groups.push(floored);
                report.excluded_replicates.push(excluded);
            }
            reports.push(report);
        }
    }
    Ok(reports)
}

/// Single-metric convenience wrapper with zero-rate flooring.
pub fn fairness_band(
    cache: &ScoreCache,
    metric: Metric,
    side: Side,
    alphas: &[f64],
    b: usize,
    alpha_ci: f64,
    seed: u64,
) -> Result<FairnessReport> {
    let cfg = FairnessConfig {
        alphas: alphas.to_vec(),
        replicates: b,
        alpha_ci,
        seed,
        zero_policy: ZeroPolicy::Floor,
    };
    Ok(fairness_reports(cache, &[metric], &[side], &cfg)?.remove(0))
}
