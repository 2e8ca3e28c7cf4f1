//! Per-identity resampling and the recentered bootstrap of the ROC curve.
//!
//! A bootstrap sample of identity k is represented by its multiplicity vector
//! `m^k` (how often each original image was drawn). Resampled statistics are
//! then closed-form weighted sums over the cached scores:
//!
//! * genuine, per identity: `[Σ_{i<j} m_i m_j 1{s_ij ≤ t} + Σ_i C(m_i, 2) 1{s_ii ≤ t}] / C(n_k, 2)`
//! * impostor, per identity pair: `Σ_{i,j} m_i^k m_j^l 1{s ≤ t} / (n_k n_l)`
//!
//! A replicate of the U-statistic F_N is centred on the V-statistic F̄_{N*},
//! not on F_N. The recentered band therefore takes quantiles of
//! `ROC_{N*} - F̄_{N*} ∘ G_N^{-1}` and shifts them by `ROC_N`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ScoreCache;
use crate::error::{Error, Result};
use crate::estimators::{check_alphas, roc_curve, RocCurve, Scope, ScopeIndex, StepCdf};

/// Resample counts for every identity of a cache, stored flat.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiplicityVector {
    offsets: Vec<usize>,
    counts: Vec<u32>,
}

impl MultiplicityVector {
    /// Validates `Σ_i m_i^k = n_k` for each identity.
    pub fn from_counts(per_identity: Vec<Vec<u32>>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(per_identity.len() + 1);
        let mut counts = Vec::new();
        for (k, m) in per_identity.into_iter().enumerate() {
            let total: u64 = m.iter().map(|&c| u64::from(c)).sum();
            if total != m.len() as u64 {
                return Err(Error::MultiplicityMismatch(format!(
                    "identity {k}: counts sum to {total}, expected {}",
                    m.len()
                )));
            }
            offsets.push(counts.len());
            counts.extend(m);
        }
        offsets.push(counts.len());
        Ok(Self { offsets, counts })
    }

    /// The identity resample: every image drawn exactly once.
    pub fn ones(sizes: &[usize]) -> Self {
        Self::from_counts(sizes.iter().map(|&n| vec![1; n]).collect()).unwrap()
    }

    pub fn num_identities(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn identity(&self, k: usize) -> &[u32] {
        &self.counts[self.offsets[k]..self.offsets[k + 1]]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub(crate) fn flat(&self) -> &[u32] {
        &self.counts
    }
}

/// Draws n_k images with replacement within each identity; identities
/// themselves are never resampled.
pub fn resample_multiplicities<R: Rng + ?Sized>(
    rng: &mut R,
    sizes: &[usize],
) -> MultiplicityVector {
    let mut offsets = Vec::with_capacity(sizes.len() + 1);
    let mut counts = Vec::with_capacity(sizes.iter().sum());
    for &n in sizes {
        offsets.push(counts.len());
        let start = counts.len();
        counts.resize(start + n, 0u32);
        for _ in 0..n {
            counts[start + rng.random_range(0..n)] += 1;
        }
    }
    offsets.push(counts.len());
    MultiplicityVector { offsets, counts }
}

/// The random stream of replicate `b`: ChaCha8 keyed by the root seed, stream
/// number `b`. Replicates are reproducible in any order.
pub fn replicate_rng(seed: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b);
    rng
}

/// Multiplicities of replicate `b` under root `seed`.
pub fn replicate_multiplicities(seed: u64, b: u64, sizes: &[usize]) -> MultiplicityVector {
    resample_multiplicities(&mut replicate_rng(seed, b), sizes)
}

fn choose2(m: u32) -> f64 {
    let m = f64::from(m);
    m * (m - 1.0) / 2.0
}

impl ScopeIndex {
    fn check_multiplicities(&self, m: &MultiplicityVector) -> Result<()> {
        let total = self.sizes.iter().sum::<usize>();
        if m.num_identities() != self.sizes.len()
            || m.flat().len() != total
            || m.sizes() != self.sizes
        {
            return Err(Error::MultiplicityMismatch(format!(
                "expected {} identities with sizes {:?}",
                self.sizes.len(),
                self.sizes
            )));
        }
        Ok(())
    }

    /// F_{N*}: the genuine CDF of the resample described by `m`.
    pub fn weighted_genuine_cdf(&self, m: &MultiplicityVector) -> Result<StepCdf> {
        self.check_multiplicities(m)?;
        let pool = &self.genuine;
        let counts = m.flat();
        StepCdf::from_sorted(&pool.scores, |e| {
            let (a, b) = (pool.first[e] as usize, pool.second[e] as usize);
            let unit = pool.unit[pool.group[e] as usize];
            if a == b {
                choose2(counts[a]) * unit
            } else {
                f64::from(counts[a]) * f64::from(counts[b]) * unit
            }
        })
    }

    /// G_{N*}: the impostor CDF of the resample described by `m`.
    pub fn weighted_impostor_cdf(&self, m: &MultiplicityVector) -> Result<StepCdf> {
        self.check_multiplicities(m)?;
        let pool = self.impostor_pool()?;
        let counts = m.flat();
        StepCdf::from_sorted(&pool.scores, |e| {
            let w = f64::from(counts[pool.first[e] as usize])
                * f64::from(counts[pool.second[e] as usize]);
            w * pool.unit[pool.group[e] as usize]
        })
    }

    /// `F_{N*} ∘ G_{N*}^{-1}(1 - α)` on the grid.
    pub fn bootstrap_roc_replicate(
        &self,
        m: &MultiplicityVector,
        alphas: &[f64],
    ) -> Result<RocCurve> {
        roc_curve(
            &self.weighted_genuine_cdf(m)?,
            &self.weighted_impostor_cdf(m)?,
            alphas,
        )
    }

    /// `F̄_{N*} ∘ G_N^{-1}(1 - α)`, the centre of the bootstrap replicates.
    pub fn vstat_roc_curve(&self, alphas: &[f64]) -> Result<RocCurve> {
        roc_curve(&self.vstat_genuine_cdf()?, &self.impostor_cdf()?, alphas)
    }
}

fn restrict_scope(restrict: Option<usize>) -> Scope {
    restrict.map_or(Scope::Global, Scope::Attribute)
}

pub fn weighted_genuine_cdf(
    cache: &ScoreCache,
    m: &MultiplicityVector,
    restrict: Option<usize>,
) -> Result<StepCdf> {
    ScopeIndex::new(cache, restrict_scope(restrict))?.weighted_genuine_cdf(m)
}

pub fn weighted_impostor_cdf(
    cache: &ScoreCache,
    m: &MultiplicityVector,
    restrict: Option<usize>,
) -> Result<StepCdf> {
    ScopeIndex::new(cache, restrict_scope(restrict))?.weighted_impostor_cdf(m)
}

pub fn bootstrap_roc_replicate(
    cache: &ScoreCache,
    m: &MultiplicityVector,
    alphas: &[f64],
) -> Result<RocCurve> {
    ScopeIndex::new(cache, Scope::Global)?.bootstrap_roc_replicate(m, alphas)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BandMode {
    /// Quantiles of replicate − V-statistic centre, shifted by the estimate.
    #[default]
    Recentered,
    /// Quantiles of the raw replicate values.
    Naive,
}

impl fmt::Display for BandMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BandMode::Recentered => "recentered",
            BandMode::Naive => "naive",
        })
    }
}

impl FromStr for BandMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "recentered" => Ok(BandMode::Recentered),
            "naive" => Ok(BandMode::Naive),
            other => Err(Error::InvalidConfig(format!("unknown band mode {other:?}"))),
        }
    }
}

/// Order-statistic quantile of sorted data: the element at 1-based index
/// `ceil(q · B)`, clamped to `[1, B]`.
pub fn order_statistic(sorted: &[f64], q: f64) -> f64 {
    let b = sorted.len();
    assert!(b > 0, "order statistic of empty sample");
    // 1e-9 absorbs products like 0.975 · 200 landing just above an integer
    let rank = (q * b as f64 - 1e-9).ceil().clamp(1.0, b as f64) as usize;
    sorted[rank - 1]
}

/// Sample standard deviation (denominator B − 1).
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1) as f64).sqrt()
}

pub(crate) fn check_band_params(b: usize, alpha_ci: f64) -> Result<()> {
    if b < 2 {
        return Err(Error::InvalidConfig(format!(
            "B = {b}; at least 2 replicates are required"
        )));
    }
    if !(alpha_ci > 0.0 && alpha_ci <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "α_CI = {alpha_ci} outside (0, 1]"
        )));
    }
    let needed = (2.0 / alpha_ci).ceil() as usize;
    if b < needed {
        log::warn!(
            "B = {b} is below {needed}; the α_CI/2 tail quantiles sit on the extreme replicates"
        );
    }
    Ok(())
}

/// Sorts the edge values into nonincreasing order along the grid.
///
/// For a nonincreasing target, the rearranged band contains it wherever the
/// pointwise band did, so coverage can only improve.
pub(crate) fn rearrange_nonincreasing(values: &mut [f64]) {
    values.sort_by(|a, b| b.total_cmp(a));
}

/// A pointwise-in-α confidence band for an ROC curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveBand {
    pub scope: Scope,
    pub alphas: Vec<f64>,
    /// ROC_N(α).
    pub estimate: Vec<f64>,
    /// F̄_{N*} ∘ G_N^{-1}(1 − α), the replicate centre.
    pub center: Vec<f64>,
    /// Emitted band edges: clamped to [0, 1] and rearranged to be
    /// nonincreasing in α.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Per-α edges before rearrangement (still clamped).
    pub pointwise_lower: Vec<f64>,
    pub pointwise_upper: Vec<f64>,
    pub replicate_std: Vec<f64>,
    pub replicates: usize,
    pub alpha_ci: f64,
    pub seed: u64,
    pub mode: BandMode,
}

impl CurveBand {
    pub fn estimate_curve(&self) -> RocCurve {
        RocCurve {
            alphas: self.alphas.clone(),
            values: self.estimate.clone(),
        }
    }
}

/// All B bootstrap ROC replicates of one scope. Both band modes are
/// post-processing of the same replicate matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RocReplicates {
    scope: Scope,
    seed: u64,
    pub estimate: RocCurve,
    pub center: RocCurve,
    /// `values[b][i]` = ROC_{N,(b)}(alphas[i]).
    pub values: Vec<Vec<f64>>,
}

impl RocReplicates {
    /// Computes replicates `0..b` in parallel; the result does not depend on
    /// the number of worker threads.
    pub fn compute(index: &ScopeIndex, alphas: &[f64], b: usize, seed: u64) -> Result<Self> {
        check_alphas(alphas)?;
        let estimate = index.roc_curve(alphas)?;
        let center = index.vstat_roc_curve(alphas)?;
        let sizes = index.sizes.clone();
        let values = (0..b as u64)
            .into_par_iter()
            .map(|rep| {
                let m = replicate_multiplicities(seed, rep, &sizes);
                index.bootstrap_roc_replicate(&m, alphas).map(|c| c.values)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            scope: index.scope(),
            seed,
            estimate,
            center,
            values,
        })
    }

    pub fn num_replicates(&self) -> usize {
        self.values.len()
    }

    fn column(&self, i: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[i]).collect()
    }

    pub fn replicate_std(&self) -> Vec<f64> {
        (0..self.estimate.alphas.len())
            .map(|i| sample_std(&self.column(i)))
            .collect()
    }

    pub fn band(&self, alpha_ci: f64, mode: BandMode) -> Result<CurveBand> {
        check_band_params(self.num_replicates(), alpha_ci)?;
        let (q_lo, q_hi) = (alpha_ci / 2.0, 1.0 - alpha_ci / 2.0);
        let n_alpha = self.estimate.alphas.len();
        let mut lower = Vec::with_capacity(n_alpha);
        let mut upper = Vec::with_capacity(n_alpha);
        for i in 0..n_alpha {
            let mut col = self.column(i);
            if mode == BandMode::Recentered {
                for v in &mut col {
                    *v -= self.center.values[i];
                }
            }
            col.sort_by(f64::total_cmp);
            let (lo, hi) = (order_statistic(&col, q_lo), order_statistic(&col, q_hi));
            let shift = match mode {
                BandMode::Recentered => self.estimate.values[i],
                BandMode::Naive => 0.0,
            };
            lower.push((shift + lo).clamp(0.0, 1.0));
            upper.push((shift + hi).clamp(0.0, 1.0));
        }
        let (pointwise_lower, pointwise_upper) = (lower.clone(), upper.clone());
        rearrange_nonincreasing(&mut lower);
        rearrange_nonincreasing(&mut upper);
        Ok(CurveBand {
            scope: self.scope,
            alphas: self.estimate.alphas.clone(),
            estimate: self.estimate.values.clone(),
            center: self.center.values.clone(),
            lower,
            upper,
            pointwise_lower,
            pointwise_upper,
            replicate_std: self.replicate_std(),
            replicates: self.num_replicates(),
            alpha_ci,
            seed: self.seed,
            mode,
        })
    }
}

/// Bootstrap confidence band of the ROC curve over `scope`.
pub fn roc_confidence_band(
    cache: &ScoreCache,
    scope: Scope,
    alphas: &[f64],
    b: usize,
    alpha_ci: f64,
    seed: u64,
    mode: BandMode,
) -> Result<CurveBand> {
    check_band_params(b, alpha_ci)?;
    let index = ScopeIndex::new(cache, scope)?;
    RocReplicates::compute(&index, alphas, b, seed)?.band(alpha_ci, mode)
}

/// replicate_std(α) / reference(α); `None` where the reference is 0.
pub fn std_curve(band: &CurveBand, reference: &RocCurve) -> Vec<Option<f64>> {
    band.replicate_std
        .iter()
        .zip(&reference.values)
        .map(|(&s, &r)| if r > 0.0 { Some(s / r) } else { None })
        .collect()
}
