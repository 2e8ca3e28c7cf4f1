//! Synthetic embedding datasets with known population ROC curves.
//!
//! Identity centres are uniform on the unit sphere of dimension d. An image of
//! an identity with attribute a is `normalize(center + σ_a / √d · z)` with
//! `z ~ N(0, I_d)`, so σ_a is the expected noise norm regardless of d.
//! Attributes are assigned to identities round-robin.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{sample_std, BandMode, RocReplicates};
use crate::data::{build_score_cache, EmbeddingDataset, ImpostorPolicy, Record};
use crate::error::{Error, Result};
use crate::estimators::{check_alphas, RocCurve, Scope, ScopeIndex};

const IDENTITY_STREAM: u64 = 1;
const ORACLE_STREAM: u64 = 2;
const COVERAGE_DATA_STREAM: u64 = 3;
const COVERAGE_BOOT_STREAM: u64 = 4;

/// Pairs simulated per oracle work unit.
const ORACLE_CHUNK: usize = 1 << 14;
/// Batches used for the oracle's standard error.
const ORACLE_BATCHES: usize = 20;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of work unit `index` in `domain`, derived from a root seed.
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ domain) ^ index)
}

fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, domain, index))
}

/// Images per identity: `min..=max`, drawn uniformly per identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageCount {
    pub min: usize,
    pub max: usize,
}

impl ImageCount {
    pub fn fixed(n: usize) -> Self {
        Self { min: n, max: n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub identities: usize,
    pub images: ImageCount,
    pub dim: usize,
    /// Noise scale per attribute value; its length is A.
    pub sigmas: Vec<f64>,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(identities: usize, images: usize, dim: usize, sigmas: Vec<f64>, seed: u64) -> Self {
        Self {
            identities,
            images: ImageCount::fixed(images),
            dim,
            sigmas,
            seed,
        }
    }

    pub fn num_attributes(&self) -> usize {
        self.sigmas.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.identities < 2 {
            return bad(format!(
                "K = {}; at least 2 identities required",
                self.identities
            ));
        }
        if self.images.min < 2 || self.images.max < self.images.min {
            return bad(format!(
                "images per identity {}..={}; need 2 <= min <= max",
                self.images.min, self.images.max
            ));
        }
        if self.dim < 2 {
            return bad(format!("d = {}; at least 2 required", self.dim));
        }
        if self.sigmas.is_empty() {
            return bad("at least one attribute noise scale required".into());
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return bad(format!("noise scale {s} must be positive"));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

fn unit_gaussian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn noisy_image<R: Rng + ?Sized>(rng: &mut R, center: &[f64], sigma: f64) -> Vec<f64> {
    let scale = sigma / (center.len() as f64).sqrt();
    loop {
        let v: Vec<f64> = center
            .iter()
            .map(|c| c + scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Identity `k` depends only on `(seed, k)`, its attribute and the config.
pub fn generate_dataset(cfg: &SynthConfig) -> Result<EmbeddingDataset> {
    cfg.validate()?;
    let a_count = cfg.num_attributes();
    let mut records = Vec::new();
    for k in 0..cfg.identities {
        let mut rng = stream(cfg.seed, IDENTITY_STREAM, k as u64);
        let attribute = k % a_count;
        let n = rng.random_range(cfg.images.min..=cfg.images.max);
        let center = unit_gaussian(&mut rng, cfg.dim);
        for i in 0..n {
            let img = noisy_image(&mut rng, &center, cfg.sigmas[attribute]);
            records.push(Record {
                image_id: format!("id{k}_img{i}"),
                identity: k as u32 + 1,
                attribute: attribute as u32,
                embedding: img.into_iter().map(|x| x as f32).collect(),
            });
        }
    }
    EmbeddingDataset::from_records(records)
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        .clamp(-1.0, 1.0)
}

/// Population ROC estimated by Monte Carlo, with a batch-means standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRoc {
    pub curve: RocCurve,
    pub std_error: Vec<f64>,
    pub mc_pairs: usize,
}

/// Simulates `mc_pairs` genuine and `mc_pairs` impostor scores, each from
/// fresh identities, and returns `F(G^{-1}(1 - α))`.
///
/// Under [`Scope::Global`] genuine pairs pick their attribute uniformly and
/// impostor pairs follow `policy`; under [`Scope::Attribute`] both sides use
/// that attribute only.
pub fn oracle_true_roc(
    cfg: &SynthConfig,
    mc_pairs: usize,
    alphas: &[f64],
    scope: Scope,
    policy: ImpostorPolicy,
    seed: u64,
) -> Result<OracleRoc> {
    cfg.validate()?;
    check_alphas(alphas)?;
    if mc_pairs < ORACLE_BATCHES {
        return Err(Error::InvalidConfig(format!(
            "mc_pairs = {mc_pairs} is too small"
        )));
    }
    if let Scope::Attribute(a) = scope {
        if a >= cfg.num_attributes() {
            return Err(Error::InvalidConfig(format!("attribute {a} out of range")));
        }
    }
    let a_count = cfg.num_attributes();
    let pick = |rng: &mut ChaCha8Rng| match scope {
        Scope::Global => rng.random_range(0..a_count),
        Scope::Attribute(a) => a,
    };

    let chunks = mc_pairs.div_ceil(ORACLE_CHUNK);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, ORACLE_STREAM, c as u64);
            let len = ORACLE_CHUNK.min(mc_pairs - c * ORACLE_CHUNK);
            let mut genuine = Vec::with_capacity(len);
            let mut impostor = Vec::with_capacity(len);
            for _ in 0..len {
                let a = pick(&mut rng);
                let center = unit_gaussian(&mut rng, cfg.dim);
                let x = noisy_image(&mut rng, &center, cfg.sigmas[a]);
                let y = noisy_image(&mut rng, &center, cfg.sigmas[a]);
                genuine.push(dot(&x, &y));

                let a1 = pick(&mut rng);
                let a2 = match (scope, policy) {
                    (Scope::Global, ImpostorPolicy::AllPairs) => pick(&mut rng),
                    _ => a1,
                };
                let c1 = unit_gaussian(&mut rng, cfg.dim);
                let c2 = unit_gaussian(&mut rng, cfg.dim);
                let x = noisy_image(&mut rng, &c1, cfg.sigmas[a1]);
                let y = noisy_image(&mut rng, &c2, cfg.sigmas[a2]);
                impostor.push(dot(&x, &y));
            }
            (genuine, impostor)
        })
        .collect();
    let (genuine, impostor): (Vec<f64>, Vec<f64>) = pairs
        .into_iter()
        .flat_map(|(g, i)| g.into_iter().zip(i))
        .unzip();

    let curve = RocCurve {
        alphas: alphas.to_vec(),
        values: sample_roc(genuine.clone(), impostor.clone(), alphas),
    };
    let batch = mc_pairs / ORACLE_BATCHES;
    let per_batch: Vec<Vec<f64>> = (0..ORACLE_BATCHES)
        .into_par_iter()
        .map(|b| {
            let range = b * batch..(b + 1) * batch;
            sample_roc(
                genuine[range.clone()].to_vec(),
                impostor[range].to_vec(),
                alphas,
            )
        })
        .collect();
    let std_error = (0..alphas.len())
        .map(|i| {
            let col: Vec<f64> = per_batch.iter().map(|v| v[i]).collect();
            sample_std(&col) / (ORACLE_BATCHES as f64).sqrt()
        })
        .collect();
    Ok(OracleRoc {
        curve,
        std_error,
        mc_pairs,
    })
}

/// ROC of two plain samples: empirical CDF of `genuine` at the empirical
/// `(1 - α)`-quantile of `impostor` (order statistic `ceil((1 - α) M)`).
fn sample_roc(mut genuine: Vec<f64>, mut impostor: Vec<f64>, alphas: &[f64]) -> Vec<f64> {
    genuine.sort_by(f64::total_cmp);
    impostor.sort_by(f64::total_cmp);
    let m = impostor.len() as f64;
    alphas
        .iter()
        .map(|&a| {
            let rank = ((1.0 - a) * m - 1e-9).ceil().clamp(1.0, m) as usize;
            let t = impostor[rank - 1];
            genuine.partition_point(|&g| g <= t) as f64 / genuine.len() as f64
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub synth: SynthConfig,
    pub policy: ImpostorPolicy,
    pub reps: usize,
    pub replicates: usize,
    pub alpha_ci: f64,
    pub alphas: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub alphas: Vec<f64>,
    pub truth: Vec<f64>,
    pub recentered: Vec<f64>,
    pub naive: Vec<f64>,
    /// Per repetition, per α: did the band contain the truth.
    pub recentered_hits: Vec<Vec<bool>>,
    pub naive_hits: Vec<Vec<bool>>,
    pub reps: usize,
    pub replicates: usize,
    pub alpha_ci: f64,
}

/// Fraction of fresh synthetic datasets whose band contains `truth`, for the
/// recentered and naive modes built from the same replicates.
pub fn coverage_experiment(cfg: &CoverageConfig, truth: &RocCurve) -> Result<CoverageReport> {
    cfg.synth.validate()?;
    check_alphas(&cfg.alphas)?;
    if truth.alphas != cfg.alphas {
        return Err(Error::InvalidConfig(
            "truth curve must be sampled on the coverage α-grid".into(),
        ));
    }
    if cfg.reps < 100 {
        log::warn!(
            "{} repetitions; coverage estimates will be coarse",
            cfg.reps
        );
    }

    let hits: Vec<(Vec<bool>, Vec<bool>)> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let synth = cfg
                .synth
                .with_seed(derive_seed(cfg.seed, COVERAGE_DATA_STREAM, rep));
            let ds = generate_dataset(&synth)?;
            let cache = build_score_cache(&ds, cfg.policy)?;
            let index = ScopeIndex::new(&cache, Scope::Global)?;
            let boot_seed = derive_seed(cfg.seed, COVERAGE_BOOT_STREAM, rep);
            let reps = RocReplicates::compute(&index, &cfg.alphas, cfg.replicates, boot_seed)?;
            let contains = |mode| -> Result<Vec<bool>> {
                let band = reps.band(cfg.alpha_ci, mode)?;
                Ok(truth
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, &t)| band.pointwise_lower[i] <= t && t <= band.pointwise_upper[i])
                    .collect())
            };
            Ok((contains(BandMode::Recentered)?, contains(BandMode::Naive)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let (recentered_hits, naive_hits): (Vec<_>, Vec<_>) = hits.into_iter().unzip();
    let rate = |h: &[Vec<bool>], i: usize| {
        h.iter().filter(|r| r[i]).count() as f64 / h.len().max(1) as f64
    };
    let n_alpha = cfg.alphas.len();
    Ok(CoverageReport {
        alphas: cfg.alphas.clone(),
        truth: truth.values.clone(),
        recentered: (0..n_alpha).map(|i| rate(&recentered_hits, i)).collect(),
        naive: (0..n_alpha).map(|i| rate(&naive_hits, i)).collect(),
        recentered_hits,
        naive_hits,
        reps: cfg.reps,
        replicates: cfg.replicates,
        alpha_ci: cfg.alpha_ci,
    })
}
