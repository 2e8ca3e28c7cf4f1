//! Brute-force oracles: statistics recomputed by explicit pair enumeration
//! over resampled image lists, without any weighting shortcuts.

#![allow(dead_code)]

use rand::Rng;
use uroc::bootstrap::MultiplicityVector;
use uroc::data::{IdentityScores, ImpostorBlock};
use uroc::{ImpostorPolicy, ScoreCache};

/// Random cache with every identity pair scored. Scores are drawn from
/// `levels` equally spaced values in [-1, 1) when `levels` is set, so ties
/// occur, and uniformly otherwise. Self-scores are 1.
pub fn random_cache<R: Rng>(
    rng: &mut R,
    sizes: &[usize],
    attributes: &[usize],
    policy: ImpostorPolicy,
    levels: Option<u32>,
) -> ScoreCache {
    let draw = |rng: &mut R| match levels {
        Some(l) => -1.0 + 2.0 * rng.random_range(0..l) as f64 / l as f64,
        None => rng.random_range(-1.0..1.0),
    };
    let identities: Vec<IdentityScores> = sizes
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let upper: Vec<f64> = (0..n * (n - 1) / 2).map(|_| draw(rng)).collect();
            IdentityScores::from_upper(k as u32 + 1, attributes[k], n, &upper, 1.0)
        })
        .collect();
    let mut blocks = Vec::new();
    for k in 0..sizes.len() {
        for l in k + 1..sizes.len() {
            let scores = (0..sizes[k] * sizes[l]).map(|_| draw(rng)).collect();
            blocks.push(ImpostorBlock::new(k, l, scores));
        }
    }
    let num_attributes = attributes.iter().max().map_or(1, |a| a + 1);
    let labels = (0..num_attributes as u32).collect();
    ScoreCache::from_parts(identities, blocks, labels, policy).unwrap()
}

/// Image indices of identity `k` after resampling: image `i` repeated `m_i` times.
fn expand(counts: &[u32]) -> Vec<usize> {
    counts
        .iter()
        .enumerate()
        .flat_map(|(i, &c)| std::iter::repeat_n(i, c as usize))
        .collect()
}

fn in_scope(cache: &ScoreCache, k: usize, restrict: Option<usize>) -> bool {
    restrict.is_none_or(|a| cache.attribute_of(k) == a)
}

/// F at `t` over the resampled dataset: per identity, the fraction of
/// position pairs p < q of the resampled list with score <= t; averaged over
/// identities. Duplicated images contribute their self-score.
pub fn explicit_genuine(
    cache: &ScoreCache,
    m: &MultiplicityVector,
    restrict: Option<usize>,
    t: f64,
) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (k, id) in cache.identities().iter().enumerate() {
        if !in_scope(cache, k, restrict) {
            continue;
        }
        let list = expand(m.identity(k));
        let mut hits = 0usize;
        let mut pairs = 0usize;
        for p in 0..list.len() {
            for q in p + 1..list.len() {
                pairs += 1;
                if id.score(list[p], list[q]) <= t {
                    hits += 1;
                }
            }
        }
        total += hits as f64 / pairs as f64;
        count += 1;
    }
    total / count as f64
}

/// G at `t` over the resampled dataset: per retained identity pair, the
/// fraction of cross pairs of the resampled lists with score <= t; averaged
/// over identity pairs.
pub fn explicit_impostor(
    cache: &ScoreCache,
    m: &MultiplicityVector,
    restrict: Option<usize>,
    t: f64,
) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for block in cache.impostor_blocks() {
        let (k, l) = (block.first, block.second);
        if !in_scope(cache, k, restrict) || !in_scope(cache, l, restrict) {
            continue;
        }
        let n_l = cache.identities()[l].n();
        let (a, b) = (expand(m.identity(k)), expand(m.identity(l)));
        let mut hits = 0usize;
        for &i in &a {
            for &j in &b {
                if block.scores()[i * n_l + j] <= t {
                    hits += 1;
                }
            }
        }
        total += hits as f64 / (a.len() * b.len()) as f64;
        count += 1;
    }
    total / count as f64
}

/// V-statistic F̄ at `t`: all ordered pairs, diagonal included.
pub fn explicit_vstat(cache: &ScoreCache, restrict: Option<usize>, t: f64) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (k, id) in cache.identities().iter().enumerate() {
        if !in_scope(cache, k, restrict) {
            continue;
        }
        let n = id.n();
        let hits = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| id.score(i, j) <= t)
            .count();
        total += hits as f64 / (n * n) as f64;
        count += 1;
    }
    total / count as f64
}

/// Per-identity genuine CDF F_N^k at `t`.
pub fn identity_genuine(cache: &ScoreCache, k: usize, t: f64) -> f64 {
    let id = &cache.identities()[k];
    let (mut hits, mut pairs) = (0usize, 0usize);
    for (_, _, s) in id.pair_scores() {
        pairs += 1;
        if s <= t {
            hits += 1;
        }
    }
    hits as f64 / pairs as f64
}

/// Every way of drawing `n` images with replacement from `n`, as counts.
pub fn compositions(n: usize) -> Vec<Vec<u32>> {
    fn rec(left: u32, slots: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if slots == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in 0..=left {
            prefix.push(c);
            rec(left - c, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n as u32, n, &mut Vec::new(), &mut out);
    out
}

/// Every multiplicity vector for the given identity sizes.
pub fn all_multiplicities(sizes: &[usize]) -> Vec<MultiplicityVector> {
    let per: Vec<Vec<Vec<u32>>> = sizes.iter().map(|&n| compositions(n)).collect();
    let mut out = vec![Vec::new()];
    for options in &per {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<Vec<u32>>| {
                options.iter().map(move |c| {
                    let mut v = prefix.clone();
                    v.push(c.clone());
                    v
                })
            })
            .collect();
    }
    out.into_iter()
        .map(|v| MultiplicityVector::from_counts(v).unwrap())
        .collect()
}

/// Thresholds probing every step: each distinct score, just below it, and
/// points outside the score range.
pub fn probe_thresholds(cache: &ScoreCache) -> Vec<f64> {
    let mut scores: Vec<f64> = cache
        .identities()
        .iter()
        .flat_map(|id| {
            let n = id.n();
            (0..n).flat_map(move |i| (0..n).map(move |j| id.score(i, j)))
        })
        .chain(
            cache
                .impostor_blocks()
                .iter()
                .flat_map(|b| b.scores().iter().copied()),
        )
        .collect();
    scores.sort_by(f64::total_cmp);
    scores.dedup();
    let mut out = vec![-2.0, 2.0];
    for s in scores {
        out.push(s);
        out.push(s - 1e-9);
    }
    out
}
