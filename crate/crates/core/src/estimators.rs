//! Empirical CDFs of genuine and impostor scores, the generalized inverse
//! and the ROC curve `α ↦ F_N(G_N^{-1}(1 - α))`.
//!
//! Genuine CDFs average per-identity pair fractions with weight 1/K;
//! impostor CDFs average per-identity-pair fractions with weight 1/#pairs.
//! Neither pools raw pair counts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::ScoreCache;
use crate::error::{Error, Result};

/// Slack when comparing cumulative mass against a target probability, so that
/// sums like `19 × 0.05` still reach `0.95`.
pub const QUANTILE_TOLERANCE: f64 = 1e-12;

/// The population an estimator is computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Global,
    /// Dense attribute index; genuine pairs of identities with this attribute
    /// and impostor pairs with both identities carrying it.
    Attribute(usize),
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Global => f.write_str("global"),
            Scope::Attribute(a) => write!(f, "attribute {a}"),
        }
    }
}

/// Right-continuous step CDF over the distinct support points.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCdf {
    thresholds: Vec<f64>,
    cum_weight: Vec<f64>,
    effective_pairs: f64,
}

impl StepCdf {
    /// Builds the CDF of weighted points given in nondecreasing score order.
    /// Tied scores are merged; zero-mass points are dropped.
    pub(crate) fn from_sorted(
        scores: &[f64],
        mut weight: impl FnMut(usize) -> f64,
    ) -> Result<Self> {
        let mut thresholds = Vec::new();
        let mut cum_weight = Vec::new();
        let mut acc = 0.0;
        let mut sum_sq = 0.0;
        let mut idx = 0;
        while idx < scores.len() {
            let s = scores[idx];
            let mut mass = 0.0;
            while idx < scores.len() && scores[idx] == s {
                let w = weight(idx);
                mass += w;
                sum_sq += w * w;
                idx += 1;
            }
            if mass > 0.0 {
                acc += mass;
                thresholds.push(s);
                cum_weight.push(acc);
            }
        }
        if acc <= 0.0 {
            return Err(Error::EmptyScope("distribution has no mass".into()));
        }
        for c in &mut cum_weight {
            *c /= acc;
        }
        *cum_weight.last_mut().unwrap() = 1.0;
        Ok(Self {
            thresholds,
            cum_weight,
            effective_pairs: acc * acc / sum_sq,
        })
    }

    /// CDF of arbitrary `(score, weight)` points; weights need not sum to 1.
    pub fn from_weighted_points(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points
            .iter()
            .any(|(s, w)| !s.is_finite() || !w.is_finite() || *w < 0.0)
        {
            return Err(Error::InvalidConfig(
                "weighted points must be finite with nonnegative weight".into(),
            ));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let scores: Vec<f64> = points.iter().map(|p| p.0).collect();
        Self::from_sorted(&scores, |i| points[i].1)
    }

    /// Empirical CDF of equally weighted samples.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        Self::from_weighted_points(samples.iter().map(|&s| (s, 1.0)).collect())
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn cum_weight(&self) -> &[f64] {
        &self.cum_weight
    }

    /// Kish effective number of pairs, (Σw)² / Σw², over the raw pair weights.
    pub fn effective_pairs(&self) -> f64 {
        self.effective_pairs
    }

    /// Mass at or below `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.thresholds.partition_point(|&x| x <= t);
        if idx == 0 {
            0.0
        } else {
            self.cum_weight[idx - 1]
        }
    }

    /// Generalized inverse `inf{t : cdf(t) >= u}` over the support.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::InvalidProbability(u));
        }
        let idx = self
            .cum_weight
            .partition_point(|&c| c < u - QUANTILE_TOLERANCE)
            .min(self.thresholds.len() - 1);
        Ok(self.thresholds[idx])
    }

    pub fn min_threshold(&self) -> f64 {
        self.thresholds[0]
    }

    pub fn max_threshold(&self) -> f64 {
        *self.thresholds.last().unwrap()
    }
}

/// `inf{t : cdf(t) >= u}`; see [`StepCdf::quantile`].
pub fn empirical_quantile(cdf: &StepCdf, u: f64) -> Result<f64> {
    cdf.quantile(u)
}

/// An ROC curve sampled on an α-grid: values are FRR at the threshold whose
/// FAR is α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub alphas: Vec<f64>,
    pub values: Vec<f64>,
}

impl RocCurve {
    pub fn is_nonincreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0])
    }
}

pub(crate) fn check_alphas(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::InvalidConfig("empty α-grid".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Error::InvalidConfig(format!(
            "α-grid value {a} outside (0, 1)"
        )));
    }
    if alphas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(
            "α-grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// `values[i] = genuine(impostor^{-1}(1 - alphas[i]))`.
pub fn roc_curve(genuine: &StepCdf, impostor: &StepCdf, alphas: &[f64]) -> Result<RocCurve> {
    check_alphas(alphas)?;
    let values = alphas
        .iter()
        .map(|&a| Ok(genuine.eval(impostor.quantile(1.0 - a)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RocCurve {
        alphas: alphas.to_vec(),
        values,
    })
}

/// Scores of one side, sorted once, with the bookkeeping needed to weight
/// each pair. `first`/`second` are flat image indices (identity offset +
/// image index); a genuine entry with `first == second` is a self-score.
#[derive(Debug, Clone)]
pub(crate) struct ScorePool {
    pub(crate) scores: Vec<f64>,
    pub(crate) first: Vec<u32>,
    pub(crate) second: Vec<u32>,
    pub(crate) group: Vec<u32>,
    /// 1/(groups · pairs in group): U-statistic weight of one pair.
    pub(crate) unit: Vec<f64>,
    /// 1/(groups · n²): V-statistic weight of one ordered pair (genuine only).
    pub(crate) vunit: Vec<f64>,
}

impl ScorePool {
    fn from_unsorted(raw: Vec<(f64, u32, u32, u32)>, unit: Vec<f64>, vunit: Vec<f64>) -> Self {
        let mut raw = raw;
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut pool = ScorePool {
            scores: Vec::with_capacity(raw.len()),
            first: Vec::with_capacity(raw.len()),
            second: Vec::with_capacity(raw.len()),
            group: Vec::with_capacity(raw.len()),
            unit,
            vunit,
        };
        for (s, a, b, g) in raw {
            pool.scores.push(s);
            pool.first.push(a);
            pool.second.push(b);
            pool.group.push(g);
        }
        pool
    }
}

/// Pooled, sorted genuine and impostor scores for one [`Scope`]. Building it
/// costs a sort; every CDF over the scope (classic, V-statistic, bootstrap)
/// is then a linear pass.
#[derive(Debug, Clone)]
pub struct ScopeIndex {
    scope: Scope,
    /// n_k of every identity of the cache, in scope or not.
    pub(crate) sizes: Vec<usize>,
    pub(crate) genuine: ScorePool,
    pub(crate) impostor: Option<ScorePool>,
    num_identities: usize,
    num_pairs: usize,
}

impl ScopeIndex {
    pub fn new(cache: &ScoreCache, scope: Scope) -> Result<Self> {
        let in_scope = |attr: usize| match scope {
            Scope::Global => true,
            Scope::Attribute(a) => attr == a,
        };
        if let Scope::Attribute(a) = scope {
            if a >= cache.num_attributes() {
                return Err(Error::EmptyScope(format!("no attribute with index {a}")));
            }
        }

        let mut offsets = Vec::with_capacity(cache.num_identities());
        let mut total = 0usize;
        for id in cache.identities() {
            offsets.push(total);
            total += id.n();
        }
        if total > u32::MAX as usize {
            return Err(Error::InvalidConfig("too many images".into()));
        }

        let members: Vec<usize> = (0..cache.num_identities())
            .filter(|&k| in_scope(cache.attribute_of(k)))
            .collect();
        if members.is_empty() {
            return Err(Error::EmptyScope(format!("no identity in {scope}")));
        }
        let k_scope = members.len() as f64;
        let mut raw = Vec::new();
        let mut unit = Vec::with_capacity(members.len());
        let mut vunit = Vec::with_capacity(members.len());
        for (g, &k) in members.iter().enumerate() {
            let id = &cache.identities()[k];
            let n = id.n();
            let off = offsets[k] as u32;
            unit.push(1.0 / (k_scope * (n * (n - 1) / 2) as f64));
            vunit.push(1.0 / (k_scope * (n * n) as f64));
            for i in 0..n {
                for j in i..n {
                    raw.push((id.score(i, j), off + i as u32, off + j as u32, g as u32));
                }
            }
        }
        let genuine = ScorePool::from_unsorted(raw, unit, vunit);

        let blocks: Vec<_> = cache
            .impostor_blocks()
            .iter()
            .filter(|b| {
                in_scope(cache.attribute_of(b.first)) && in_scope(cache.attribute_of(b.second))
            })
            .collect();
        let num_pairs = blocks.len();
        let impostor = if blocks.is_empty() {
            None
        } else {
            let p = num_pairs as f64;
            let mut raw = Vec::new();
            let mut unit = Vec::with_capacity(num_pairs);
            for (g, block) in blocks.iter().enumerate() {
                let nk = cache.identities()[block.first].n();
                let nl = cache.identities()[block.second].n();
                unit.push(1.0 / (p * (nk * nl) as f64));
                let (ok, ol) = (offsets[block.first] as u32, offsets[block.second] as u32);
                for (idx, &s) in block.scores().iter().enumerate() {
                    raw.push((s, ok + (idx / nl) as u32, ol + (idx % nl) as u32, g as u32));
                }
            }
            Some(ScorePool::from_unsorted(raw, unit, Vec::new()))
        };

        Ok(Self {
            scope,
            sizes: cache.identity_sizes(),
            genuine,
            impostor,
            num_identities: members.len(),
            num_pairs,
        })
    }

    pub fn scope(&self) -> Scope {
        self.scope
    }

    /// Identities in scope.
    pub fn num_identities(&self) -> usize {
        self.num_identities
    }

    /// Impostor identity pairs in scope.
    pub fn num_identity_pairs(&self) -> usize {
        self.num_pairs
    }

    pub(crate) fn impostor_pool(&self) -> Result<&ScorePool> {
        self.impostor
            .as_ref()
            .ok_or_else(|| Error::EmptyScope(format!("no impostor pair in {}", self.scope)))
    }

    /// F_N: U-statistic genuine CDF.
    pub fn genuine_cdf(&self) -> Result<StepCdf> {
        let pool = &self.genuine;
        StepCdf::from_sorted(&pool.scores, |e| {
            if pool.first[e] == pool.second[e] {
                0.0
            } else {
                pool.unit[pool.group[e] as usize]
            }
        })
    }

    /// F̄: V-statistic genuine CDF, diagonal terms included.
    pub fn vstat_genuine_cdf(&self) -> Result<StepCdf> {
        let pool = &self.genuine;
        StepCdf::from_sorted(&pool.scores, |e| {
            let v = pool.vunit[pool.group[e] as usize];
            if pool.first[e] == pool.second[e] {
                v
            } else {
                2.0 * v
            }
        })
    }

    /// G_N: impostor CDF.
    pub fn impostor_cdf(&self) -> Result<StepCdf> {
        let pool = self.impostor_pool()?;
        StepCdf::from_sorted(&pool.scores, |e| pool.unit[pool.group[e] as usize])
    }

    pub fn roc_curve(&self, alphas: &[f64]) -> Result<RocCurve> {
        roc_curve(&self.genuine_cdf()?, &self.impostor_cdf()?, alphas)
    }
}

fn restrict_scope(restrict: Option<usize>) -> Scope {
    restrict.map_or(Scope::Global, Scope::Attribute)
}

/// F_N, optionally restricted to identities of one attribute.
pub fn genuine_cdf(cache: &ScoreCache, restrict: Option<usize>) -> Result<StepCdf> {
    ScopeIndex::new(cache, restrict_scope(restrict))?.genuine_cdf()
}

/// F̄_{N*}, the expectation of a bootstrap replicate of F_N.
pub fn vstat_genuine_cdf(cache: &ScoreCache, restrict: Option<usize>) -> Result<StepCdf> {
    ScopeIndex::new(cache, restrict_scope(restrict))?.vstat_genuine_cdf()
}

/// G_N, optionally restricted to identity pairs within one attribute.
pub fn impostor_cdf(cache: &ScoreCache, restrict: Option<usize>) -> Result<StepCdf> {
    ScopeIndex::new(cache, restrict_scope(restrict))?.impostor_cdf()
}

/// FRR_a(t).
pub fn group_frr(cache: &ScoreCache, attribute: usize, t: f64) -> Result<f64> {
    Ok(genuine_cdf(cache, Some(attribute))?.eval(t))
}

/// FAR_a(t).
pub fn group_far(cache: &ScoreCache, attribute: usize, t: f64) -> Result<f64> {
    Ok(1.0 - impostor_cdf(cache, Some(attribute))?.eval(t))
}

/// Strictly increasing α-grid, every value in (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AlphaGrid(Vec<f64>);

impl AlphaGrid {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        values.sort_by(f64::total_cmp);
        values.dedup();
        check_alphas(&values)?;
        Ok(Self(values))
    }

    /// 50 log-spaced points on [1e-4, 1e-1] and 50 linear points on
    /// [0.1, 0.99]; the shared 0.1 appears once.
    pub fn default_grid() -> Self {
        let mut v = log_spaced(1e-4, 1e-1, 50);
        v.extend(lin_spaced(0.1, 0.99, 50));
        Self::new(v).expect("default grid is valid")
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Default for AlphaGrid {
    fn default() -> Self {
        Self::default_grid()
    }
}

/// Parses `default`, or comma-separated items each being a number,
/// `log:lo:hi:count` or `lin:lo:hi:count`.
impl FromStr for AlphaGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "default" {
            return Ok(Self::default_grid());
        }
        let bad = |item: &str| Error::InvalidConfig(format!("cannot parse α-grid item {item:?}"));
        let mut values = Vec::new();
        for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            let parts: Vec<&str> = item.split(':').collect();
            match parts.as_slice() {
                [x] => values.push(x.parse::<f64>().map_err(|_| bad(item))?),
                [kind, lo, hi, count] => {
                    let lo = lo.parse::<f64>().map_err(|_| bad(item))?;
                    let hi = hi.parse::<f64>().map_err(|_| bad(item))?;
                    let count = count.parse::<usize>().map_err(|_| bad(item))?;
                    if count == 0 || !(lo > 0.0 && hi >= lo) {
                        return Err(bad(item));
                    }
                    match *kind {
                        "log" => values.extend(log_spaced(lo, hi, count)),
                        "lin" => values.extend(lin_spaced(lo, hi, count)),
                        _ => return Err(bad(item)),
                    }
                }
                _ => return Err(bad(item)),
            }
        }
        Self::new(values)
    }
}

fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln();
    (0..count)
        .map(|i| {
            if i == count - 1 {
                hi
            } else {
                lo * (ratio * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

fn lin_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| {
            if i == count - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (count - 1) as f64
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{IdentityScores, ImpostorBlock, ImpostorPolicy};

    fn one_identity(upper: &[f64]) -> ScoreCache {
        let n = (1..).find(|n| n * (n - 1) / 2 == upper.len()).unwrap();
        ScoreCache::from_parts(
            vec![IdentityScores::from_upper(1, 0, n, upper, 1.0)],
            vec![],
            vec![0],
            ImpostorPolicy::AllPairs,
        )
        .unwrap()
    }

    /// identity 1: n=3, pairs {0.9, 0.5, 0.7}; identity 2: n=2, pair {0.4}.
    fn two_identities() -> ScoreCache {
        ScoreCache::from_parts(
            vec![
                IdentityScores::from_upper(1, 0, 3, &[0.9, 0.5, 0.7], 1.0),
                IdentityScores::from_upper(2, 0, 2, &[0.4], 1.0),
            ],
            vec![ImpostorBlock::new(0, 1, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6])],
            vec![0],
            ImpostorPolicy::AllPairs,
        )
        .unwrap()
    }

    /// n = (2, 1) style impostor example: cross scores {0.2, 0.4}.
    fn impostor_two_scores() -> StepCdf {
        StepCdf::from_samples(&[0.2, 0.4]).unwrap()
    }

    #[test]
    fn genuine_single_identity() {
        let cache = one_identity(&[0.9, 0.5, 0.7]);
        let f = genuine_cdf(&cache, None).unwrap();
        assert!((f.eval(0.6) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(f.eval(0.9), 1.0);
        assert_eq!(f.eval(5.0), 1.0);
        assert_eq!(f.eval(0.1), 0.0);
    }

    #[test]
    fn genuine_weights_identities_equally() {
        let f = genuine_cdf(&two_identities(), None).unwrap();
        // ½(1/3 + 1), not the pooled 2/4
        assert!((f.eval(0.6) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn vstat_includes_diagonal() {
        let cache = one_identity(&[0.9, 0.5, 0.7]);
        let v = vstat_genuine_cdf(&cache, None).unwrap();
        assert!((v.eval(0.6) - 2.0 / 9.0).abs() < 1e-15);
        assert_eq!(v.eval(1.0), 1.0);
        // (n-1)/n · F_N^k(t)
        let f = genuine_cdf(&cache, None).unwrap();
        for t in [0.45, 0.6, 0.8, 0.95] {
            assert!((v.eval(t) - 2.0 / 3.0 * f.eval(t)).abs() < 1e-15);
        }
    }

    #[test]
    fn impostor_pair_averaging() {
        // three identities; pair fractions at t = 0.5 are 0.5, 0.0, 1.0
        let cache = ScoreCache::from_parts(
            vec![
                IdentityScores::from_upper(1, 0, 2, &[0.9], 1.0),
                IdentityScores::from_upper(2, 0, 2, &[0.9], 1.0),
                IdentityScores::from_upper(3, 0, 2, &[0.9], 1.0),
            ],
            vec![
                ImpostorBlock::new(0, 1, vec![0.1, 0.9, 0.2, 0.8]),
                ImpostorBlock::new(0, 2, vec![0.6, 0.7, 0.8, 0.9]),
                ImpostorBlock::new(1, 2, vec![0.1, 0.2, 0.3, 0.4]),
            ],
            vec![0],
            ImpostorPolicy::AllPairs,
        )
        .unwrap();
        let g = impostor_cdf(&cache, None).unwrap();
        assert!((g.eval(0.5) - 0.5).abs() < 1e-15);
        assert_eq!(g.eval(0.05), 0.0);
    }

    #[test]
    fn impostor_cdf_requires_pairs() {
        let cache = one_identity(&[0.9, 0.5, 0.7]);
        assert!(matches!(
            impostor_cdf(&cache, None),
            Err(Error::EmptyScope(_))
        ));
        assert!(matches!(
            genuine_cdf(&cache, Some(3)),
            Err(Error::EmptyScope(_))
        ));
    }

    #[test]
    fn quantile_convention() {
        let g = impostor_two_scores();
        assert_eq!(g.thresholds(), &[0.2, 0.4]);
        assert_eq!(g.cum_weight(), &[0.5, 1.0]);
        assert_eq!(g.quantile(0.5).unwrap(), 0.2);
        assert_eq!(g.quantile(1.0).unwrap(), 0.4);
        assert_eq!(g.quantile(0.50001).unwrap(), 0.4);
        assert_eq!(g.quantile(1e-9).unwrap(), 0.2);
        assert!(g.quantile(0.0).is_err());
        assert!(g.quantile(1.5).is_err());
        assert!(g.quantile(f64::NAN).is_err());
    }

    #[test]
    fn roc_composition() {
        let f = genuine_cdf(&one_identity(&[0.9, 0.5, 0.7]), None).unwrap();
        let g = impostor_two_scores();
        let roc = roc_curve(&f, &g, &[0.5]).unwrap();
        assert_eq!(roc.values, vec![0.0]);
        assert!(roc_curve(&f, &g, &[0.0]).is_err());
        assert!(roc_curve(&f, &g, &[0.5, 0.2]).is_err());
    }

    #[test]
    fn roc_of_identical_distributions_is_diagonal() {
        let scores: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
        let f = StepCdf::from_samples(&scores).unwrap();
        let alphas: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
        let roc = roc_curve(&f, &f, &alphas).unwrap();
        for (a, v) in roc.alphas.iter().zip(&roc.values) {
            assert!((v - (1.0 - a)).abs() < 1e-12, "α={a}: {v}");
        }
        // off-grid α: within one step
        let roc = roc_curve(&f, &f, &[0.123, 0.777]).unwrap();
        for (a, v) in roc.alphas.iter().zip(&roc.values) {
            assert!(*v >= 1.0 - a && *v <= 1.0 - a + 0.05);
        }
    }

    #[test]
    fn group_rates_basic() {
        let cache = two_identities();
        // single attribute: restriction is the whole set
        let f = genuine_cdf(&cache, None).unwrap();
        for t in [0.3, 0.45, 0.6, 0.95] {
            assert_eq!(group_frr(&cache, 0, t).unwrap(), f.eval(t));
        }
        assert_eq!(group_far(&cache, 0, 2.0).unwrap(), 0.0);
        assert_eq!(group_frr(&cache, 0, 2.0).unwrap(), 1.0);
        assert!((group_far(&cache, 0, 0.35).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn default_grid_shape() {
        let g = AlphaGrid::default_grid();
        assert_eq!(g.values().len(), 99);
        assert_eq!(g.values()[0], 1e-4);
        assert_eq!(*g.values().last().unwrap(), 0.99);
        assert!(g.values().contains(&0.1));
        assert!(g.values().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn grid_parsing() {
        let g: AlphaGrid = "0.2, 0.1, lin:0.3:0.5:3".parse().unwrap();
        assert_eq!(g.values(), &[0.1, 0.2, 0.3, 0.4, 0.5]);
        let g: AlphaGrid = "log:0.001:0.1:3".parse().unwrap();
        assert_eq!(g.values().len(), 3);
        assert!((g.values()[1] - 0.01).abs() < 1e-15);
        assert!("1.5".parse::<AlphaGrid>().is_err());
        assert!("cube:0.1:0.2:3".parse::<AlphaGrid>().is_err());
        assert!("".parse::<AlphaGrid>().is_err());
    }
}
