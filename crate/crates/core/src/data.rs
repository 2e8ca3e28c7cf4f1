//! Embedding datasets, cosine similarity and the pairwise score cache.
//!
//! Every estimator and every bootstrap replicate reads scores from a
//! [`ScoreCache`]; similarities are computed exactly once, when the cache is
//! built.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BINARY_MAGIC: &[u8; 5] = b"UROC1";

/// One image: its opaque id, the identity and attribute labels as found in the
/// input, and the embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub image_id: String,
    pub identity: u32,
    pub attribute: u32,
    pub embedding: Vec<f32>,
}

/// A densely indexed identity. `attribute` indexes
/// [`EmbeddingDataset::attribute_labels`]; `images` indexes the record list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Identity {
    pub label: u32,
    pub attribute: usize,
    pub images: Vec<usize>,
}

/// A validated set of embeddings grouped by identity.
///
/// Identities are re-indexed densely in increasing label order, attributes
/// likewise. The original labels stay available for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    records: Vec<Record>,
    identities: Vec<Identity>,
    attribute_labels: Vec<u32>,
    dim: usize,
}

impl EmbeddingDataset {
    pub fn from_records(records: Vec<Record>) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::InvalidConfig("dataset has no records".into()))?;
        let dim = first.embedding.len();
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                image_id: first.image_id.clone(),
                expected: 1,
                found: 0,
            });
        }

        let mut by_identity: BTreeMap<u32, (u32, Vec<usize>)> = BTreeMap::new();
        for (idx, rec) in records.iter().enumerate() {
            if rec.embedding.len() != dim {
                return Err(Error::DimensionMismatch {
                    image_id: rec.image_id.clone(),
                    expected: dim,
                    found: rec.embedding.len(),
                });
            }
            if rec.embedding.iter().any(|x| !x.is_finite()) {
                return Err(Error::malformed(
                    format!("image {}", rec.image_id),
                    "non-finite embedding component",
                ));
            }
            if squared_norm(&rec.embedding) == 0.0 {
                return Err(Error::ZeroNorm {
                    image_id: rec.image_id.clone(),
                });
            }
            let entry = by_identity
                .entry(rec.identity)
                .or_insert_with(|| (rec.attribute, Vec::new()));
            if entry.0 != rec.attribute {
                return Err(Error::InconsistentAttribute {
                    identity: rec.identity,
                    first: entry.0,
                    second: rec.attribute,
                });
            }
            entry.1.push(idx);
        }

        let attribute_labels: Vec<u32> = by_identity
            .values()
            .map(|(a, _)| *a)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let attr_index: HashMap<u32, usize> = attribute_labels
            .iter()
            .enumerate()
            .map(|(i, &a)| (a, i))
            .collect();

        let mut identities = Vec::with_capacity(by_identity.len());
        for (label, (attribute, images)) in by_identity {
            if images.len() < 2 {
                return Err(Error::TooFewImages {
                    identity: label,
                    count: images.len(),
                });
            }
            identities.push(Identity {
                label,
                attribute: attr_index[&attribute],
                images,
            });
        }

        Ok(Self {
            records,
            identities,
            attribute_labels,
            dim,
        })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn identities(&self) -> &[Identity] {
        &self.identities
    }

    pub fn attribute_labels(&self) -> &[u32] {
        &self.attribute_labels
    }

    pub fn num_identities(&self) -> usize {
        self.identities.len()
    }

    pub fn num_attributes(&self) -> usize {
        self.attribute_labels.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total number of images, N.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn identity_sizes(&self) -> Vec<usize> {
        self.identities.iter().map(|id| id.images.len()).collect()
    }
}

fn squared_norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| f64::from(x) * f64::from(x)).sum()
}

/// Cosine similarity computed in `f64`, clamped to `[-1, 1]`.
///
/// The norms enter as `sqrt(|u|² |v|²)`, which makes `s(u, u)` exactly 1.
pub fn cosine_similarity(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch(u.len(), v.len()));
    }
    let mut dot = 0.0f64;
    let mut nu = 0.0f64;
    let mut nv = 0.0f64;
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (f64::from(a), f64::from(b));
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNormVector);
    }
    Ok((dot / (nu * nv).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingFormat {
    #[default]
    Csv,
    Binary,
}

impl EmbeddingFormat {
    /// `.bin` and `.uroc` map to binary, anything else to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("uroc") => EmbeddingFormat::Binary,
            _ => EmbeddingFormat::Csv,
        }
    }
}

impl FromStr for EmbeddingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(EmbeddingFormat::Csv),
            "binary" | "bin" => Ok(EmbeddingFormat::Binary),
            other => Err(Error::InvalidConfig(format!(
                "unknown embedding format {other:?}"
            ))),
        }
    }
}

pub fn load_embeddings(path: &Path, format: EmbeddingFormat) -> Result<EmbeddingDataset> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    match format {
        EmbeddingFormat::Csv => read_embeddings_csv(reader),
        EmbeddingFormat::Binary => read_embeddings_binary(reader),
    }
}

pub fn save_embeddings(ds: &EmbeddingDataset, path: &Path, format: EmbeddingFormat) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut writer = std::io::BufWriter::new(file);
    match format {
        EmbeddingFormat::Csv => write_embeddings_csv(ds, &mut writer)?,
        EmbeddingFormat::Binary => write_embeddings_binary(ds, &mut writer)?,
    }
    writer.flush()?;
    Ok(())
}

/// Reads `image_id,identity,attribute,e0,...,e{d-1}`.
pub fn read_embeddings_csv<R: Read>(reader: R) -> Result<EmbeddingDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["image_id", "identity", "attribute"];
    if headers.len() < 4 || headers.iter().take(3).ne(expected.iter().copied()) {
        return Err(Error::malformed(
            "header",
            "expected image_id,identity,attribute,e0,...",
        ));
    }
    for (i, h) in headers.iter().skip(3).enumerate() {
        if h != format!("e{i}") {
            return Err(Error::malformed(
                "header",
                format!("column {} should be e{i}, found {h:?}", i + 3),
            ));
        }
    }
    let dim = headers.len() - 3;

    let mut records = Vec::new();
    for (row, result) in rdr.records().enumerate() {
        let rec = result?;
        let line = format!("row {}", row + 2);
        if rec.len() != dim + 3 {
            return Err(Error::malformed(
                line,
                format!("expected {} fields, found {}", dim + 3, rec.len()),
            ));
        }
        let identity = rec[1]
            .parse::<u32>()
            .map_err(|e| Error::malformed(&line, format!("identity: {e}")))?;
        let attribute = rec[2]
            .parse::<u32>()
            .map_err(|e| Error::malformed(&line, format!("attribute: {e}")))?;
        let embedding = rec
            .iter()
            .skip(3)
            .map(|f| f.parse::<f32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::malformed(&line, format!("embedding: {e}")))?;
        records.push(Record {
            image_id: rec[0].to_string(),
            identity,
            attribute,
            embedding,
        });
    }
    EmbeddingDataset::from_records(records)
}

pub fn write_embeddings_csv<W: Write>(ds: &EmbeddingDataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec![
        "image_id".to_string(),
        "identity".into(),
        "attribute".into(),
    ];
    header.extend((0..ds.dim()).map(|i| format!("e{i}")));
    wtr.write_record(&header)?;
    for rec in ds.records() {
        let mut row = Vec::with_capacity(ds.dim() + 3);
        row.push(rec.image_id.clone());
        row.push(rec.identity.to_string());
        row.push(rec.attribute.to_string());
        row.extend(rec.embedding.iter().map(|x| x.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Binary layout: `UROC1`, u32 N, u32 d, then N records of
/// (u32 identity, u32 attribute, u32 id length, id bytes, d × f32), all
/// little-endian.
pub fn write_embeddings_binary<W: Write>(ds: &EmbeddingDataset, mut writer: W) -> Result<()> {
    writer.write_all(BINARY_MAGIC)?;
    writer.write_all(&u32_len(ds.len(), "record count")?.to_le_bytes())?;
    writer.write_all(&u32_len(ds.dim(), "dimension")?.to_le_bytes())?;
    for rec in ds.records() {
        writer.write_all(&rec.identity.to_le_bytes())?;
        writer.write_all(&rec.attribute.to_le_bytes())?;
        let id = rec.image_id.as_bytes();
        writer.write_all(&u32_len(id.len(), "image id length")?.to_le_bytes())?;
        writer.write_all(id)?;
        for x in &rec.embedding {
            writer.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn u32_len(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::InvalidConfig(format!("{what} {n} does not fit in u32")))
}

pub fn read_embeddings_binary<R: Read>(mut reader: R) -> Result<EmbeddingDataset> {
    let mut magic = [0u8; 5];
    read_exact(&mut reader, &mut magic, "magic")?;
    if &magic != BINARY_MAGIC {
        return Err(Error::malformed("magic", "not a UROC1 file"));
    }
    let n = read_u32(&mut reader, "record count")? as usize;
    let dim = read_u32(&mut reader, "dimension")? as usize;
    let mut records = Vec::with_capacity(n.min(1 << 20));
    for r in 0..n {
        let loc = format!("record {r}");
        let identity = read_u32(&mut reader, &loc)?;
        let attribute = read_u32(&mut reader, &loc)?;
        let id_len = read_u32(&mut reader, &loc)? as usize;
        let mut id = vec![0u8; id_len];
        read_exact(&mut reader, &mut id, &loc)?;
        let image_id =
            String::from_utf8(id).map_err(|_| Error::malformed(&loc, "image id is not UTF-8"))?;
        let mut embedding = Vec::with_capacity(dim);
        let mut buf = [0u8; 4];
        for _ in 0..dim {
            read_exact(&mut reader, &mut buf, &loc)?;
            embedding.push(f32::from_le_bytes(buf));
        }
        records.push(Record {
            image_id,
            identity,
            attribute,
            embedding,
        });
    }
    let mut rest = [0u8; 1];
    if reader.read(&mut rest)? != 0 {
        return Err(Error::malformed(
            "trailer",
            "unexpected bytes after last record",
        ));
    }
    EmbeddingDataset::from_records(records)
}

fn read_exact<R: Read>(reader: &mut R, buf: &mut [u8], loc: &str) -> Result<()> {
    reader.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::malformed(loc, "truncated file"),
        _ => Error::Io(e),
    })
}

fn read_u32<R: Read>(reader: &mut R, loc: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(reader, &mut buf, loc)?;
    Ok(u32::from_le_bytes(buf))
}

/// Which identity pairs contribute impostor scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ImpostorPolicy {
    AllPairs,
    /// Only identities sharing the sensitive attribute are paired.
    #[default]
    SameAttributeOnly,
}

impl ImpostorPolicy {
    pub fn admits(self, attr_a: usize, attr_b: usize) -> bool {
        match self {
            ImpostorPolicy::AllPairs => true,
            ImpostorPolicy::SameAttributeOnly => attr_a == attr_b,
        }
    }
}

impl fmt::Display for ImpostorPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ImpostorPolicy::AllPairs => "all_pairs",
            ImpostorPolicy::SameAttributeOnly => "same_attribute_only",
        })
    }
}

impl FromStr for ImpostorPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all_pairs" => Ok(ImpostorPolicy::AllPairs),
            "same_attribute_only" => Ok(ImpostorPolicy::SameAttributeOnly),
            other => Err(Error::InvalidConfig(format!(
                "unknown impostor policy {other:?}"
            ))),
        }
    }
}

/// All within-identity scores of one identity, self-scores included, as a
/// row-major `n × n` symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityScores {
    pub label: u32,
    pub attribute: usize,
    pub image_ids: Vec<String>,
    matrix: Vec<f64>,
}

impl IdentityScores {
    pub fn new(label: u32, attribute: usize, image_ids: Vec<String>, matrix: Vec<f64>) -> Self {
        Self {
            label,
            attribute,
            image_ids,
            matrix,
        }
    }

    /// Builds the matrix from the upper triangle in `(0,1), (0,2), ..., (1,2), ...`
    /// order and a common self-score.
    pub fn from_upper(
        label: u32,
        attribute: usize,
        n: usize,
        upper: &[f64],
        self_score: f64,
    ) -> Self {
        assert_eq!(
            upper.len(),
            n * n.saturating_sub(1) / 2,
            "upper triangle length"
        );
        let mut matrix = vec![self_score; n * n];
        let mut it = upper.iter();
        for i in 0..n {
            for j in i + 1..n {
                let s = *it.next().unwrap();
                matrix[i * n + j] = s;
                matrix[j * n + i] = s;
            }
        }
        let image_ids = (0..n).map(|i| format!("{label}_{i}")).collect();
        Self::new(label, attribute, image_ids, matrix)
    }

    pub fn n(&self) -> usize {
        self.image_ids.len()
    }

    pub fn score(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n() + j]
    }

    pub fn self_score(&self, i: usize) -> f64 {
        self.score(i, i)
    }

    /// Genuine pair scores `s(X_i, X_j)` for `i < j`, in row order.
    pub fn pair_scores(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n();
        (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j, self.score(i, j))))
    }
}

/// Cross scores between two identities `first < second`, row-major
/// `n_first × n_second`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpostorBlock {
    pub first: usize,
    pub second: usize,
    scores: Vec<f64>,
}

impl ImpostorBlock {
    pub fn new(first: usize, second: usize, scores: Vec<f64>) -> Self {
        Self {
            first,
            second,
            scores,
        }
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
}

/// Precomputed genuine and impostor scores. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreCache {
    identities: Vec<IdentityScores>,
    impostor: Vec<ImpostorBlock>,
    attribute_labels: Vec<u32>,
    policy: ImpostorPolicy,
}

impl ScoreCache {
    /// Assembles a cache from explicit score blocks, validating shapes.
    ///
    /// Impostor blocks not admitted by `policy` are dropped.
    pub fn from_parts(
        identities: Vec<IdentityScores>,
        mut impostor: Vec<ImpostorBlock>,
        attribute_labels: Vec<u32>,
        policy: ImpostorPolicy,
    ) -> Result<Self> {
        if identities.is_empty() {
            return Err(Error::EmptyScope("score cache has no identities".into()));
        }
        for id in &identities {
            let n = id.n();
            if n < 2 {
                return Err(Error::TooFewImages {
                    identity: id.label,
                    count: n,
                });
            }
            if id.matrix.len() != n * n {
                return Err(Error::malformed(
                    format!("identity {}", id.label),
                    format!("expected {} scores, found {}", n * n, id.matrix.len()),
                ));
            }
            if id.attribute >= attribute_labels.len() {
                return Err(Error::malformed(
                    format!("identity {}", id.label),
                    "attribute index out of range",
                ));
            }
            for i in 0..n {
                for j in 0..n {
                    let s = id.score(i, j);
                    if !s.is_finite() {
                        return Err(Error::malformed(
                            format!("identity {}", id.label),
                            "non-finite score",
                        ));
                    }
                    if s != id.score(j, i) {
                        return Err(Error::malformed(
                            format!("identity {}", id.label),
                            "genuine score matrix is not symmetric",
                        ));
                    }
                }
            }
        }
        for block in &impostor {
            let (a, b) = (block.first, block.second);
            if a >= b || b >= identities.len() {
                return Err(Error::malformed(
                    format!("impostor block ({a}, {b})"),
                    "identity indices must satisfy first < second < K",
                ));
            }
            let expected = identities[a].n() * identities[b].n();
            if block.scores.len() != expected {
                return Err(Error::malformed(
                    format!("impostor block ({a}, {b})"),
                    format!("expected {expected} scores, found {}", block.scores.len()),
                ));
            }
            if block.scores.iter().any(|s| !s.is_finite()) {
                return Err(Error::malformed(
                    format!("impostor block ({a}, {b})"),
                    "non-finite score",
                ));
            }
        }
        impostor.retain(|b| {
            policy.admits(
                identities[b.first].attribute,
                identities[b.second].attribute,
            )
        });
        impostor.sort_by_key(|b| (b.first, b.second));
        if impostor
            .windows(2)
            .any(|w| (w[0].first, w[0].second) == (w[1].first, w[1].second))
        {
            return Err(Error::malformed(
                "impostor blocks",
                "duplicate identity pair",
            ));
        }
        Ok(Self {
            identities,
            impostor,
            attribute_labels,
            policy,
        })
    }

    pub fn identities(&self) -> &[IdentityScores] {
        &self.identities
    }

    pub fn impostor_blocks(&self) -> &[ImpostorBlock] {
        &self.impostor
    }

    pub fn attribute_labels(&self) -> &[u32] {
        &self.attribute_labels
    }

    pub fn num_identities(&self) -> usize {
        self.identities.len()
    }

    pub fn num_attributes(&self) -> usize {
        self.attribute_labels.len()
    }

    pub fn policy(&self) -> ImpostorPolicy {
        self.policy
    }

    pub fn identity_sizes(&self) -> Vec<usize> {
        self.identities.iter().map(IdentityScores::n).collect()
    }

    pub fn attribute_of(&self, identity: usize) -> usize {
        self.identities[identity].attribute
    }

    /// Number of identities carrying each attribute.
    pub fn attribute_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_attributes()];
        for id in &self.identities {
            counts[id.attribute] += 1;
        }
        counts
    }

    /// Σ_k C(n_k, 2).
    pub fn num_genuine_pairs(&self) -> usize {
        self.identities
            .iter()
            .map(|id| id.n() * (id.n() - 1) / 2)
            .sum()
    }

    /// Σ over retained identity pairs of n_k · n_l.
    pub fn num_impostor_scores(&self) -> usize {
        self.impostor.iter().map(|b| b.scores.len()).sum()
    }
}

/// Computes every genuine, self and impostor score of `ds` once.
pub fn build_score_cache(ds: &EmbeddingDataset, policy: ImpostorPolicy) -> Result<ScoreCache> {
    if policy == ImpostorPolicy::SameAttributeOnly {
        let mut counts = vec![0usize; ds.num_attributes()];
        for id in ds.identities() {
            counts[id.attribute] += 1;
        }
        if let Some(a) = counts.iter().position(|&c| c < 2) {
            return Err(Error::NoImpostorPairs {
                attribute: ds.attribute_labels()[a],
            });
        }
    }

    let records = ds.records();
    let emb = |idx: usize| records[idx].embedding.as_slice();

    let mut identities = Vec::with_capacity(ds.num_identities());
    for id in ds.identities() {
        let n = id.images.len();
        let mut matrix = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let s = cosine_similarity(emb(id.images[i]), emb(id.images[j]))?;
                matrix[i * n + j] = s;
                matrix[j * n + i] = s;
            }
        }
        let image_ids = id
            .images
            .iter()
            .map(|&r| records[r].image_id.clone())
            .collect();
        identities.push(IdentityScores::new(
            id.label,
            id.attribute,
            image_ids,
            matrix,
        ));
    }

    let ids = ds.identities();
    let mut impostor = Vec::new();
    for k in 0..ids.len() {
        for l in k + 1..ids.len() {
            if !policy.admits(ids[k].attribute, ids[l].attribute) {
                continue;
            }
            let mut scores = Vec::with_capacity(ids[k].images.len() * ids[l].images.len());
            for &a in &ids[k].images {
                for &b in &ids[l].images {
                    scores.push(cosine_similarity(emb(a), emb(b))?);
                }
            }
            impostor.push(ImpostorBlock::new(k, l, scores));
        }
    }

    ScoreCache::from_parts(identities, impostor, ds.attribute_labels().to_vec(), policy)
}

/// Writes `identity_a,identity_b,image_a,image_b,score` rows: genuine pairs,
/// then self-scores (image_a = image_b), then impostor pairs.
pub fn write_score_csv<W: Write>(cache: &ScoreCache, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["identity_a", "identity_b", "image_a", "image_b", "score"])?;
    for id in cache.identities() {
        let label = id.label.to_string();
        for (i, j, s) in id.pair_scores() {
            wtr.write_record([
                &label,
                &label,
                &id.image_ids[i],
                &id.image_ids[j],
                &s.to_string(),
            ])?;
        }
        for i in 0..id.n() {
            let img = &id.image_ids[i];
            wtr.write_record([&label, &label, img, img, &id.self_score(i).to_string()])?;
        }
    }
    for block in cache.impostor_blocks() {
        let a = &cache.identities()[block.first];
        let b = &cache.identities()[block.second];
        let (la, lb) = (a.label.to_string(), b.label.to_string());
        for (i, img_a) in a.image_ids.iter().enumerate() {
            for (j, img_b) in b.image_ids.iter().enumerate() {
                let s = block.scores[i * b.n() + j];
                wtr.write_record([&la, &lb, img_a, img_b, &s.to_string()])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Writes the `identity,attribute` sidecar that accompanies a score file.
pub fn write_attribute_csv<W: Write>(cache: &ScoreCache, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["identity", "attribute"])?;
    for id in cache.identities() {
        wtr.write_record([
            id.label.to_string(),
            cache.attribute_labels()[id.attribute].to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_attribute_csv<R: Read>(reader: R) -> Result<BTreeMap<u32, u32>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(["identity", "attribute"]) {
        return Err(Error::malformed(
            "attribute header",
            "expected identity,attribute",
        ));
    }
    let mut map = BTreeMap::new();
    for (row, result) in rdr.records().enumerate() {
        let rec = result?;
        let loc = format!("attribute row {}", row + 2);
        let parse = |f: &str| {
            f.parse::<u32>()
                .map_err(|e| Error::malformed(&loc, e.to_string()))
        };
        if rec.len() != 2 {
            return Err(Error::malformed(&loc, "expected 2 fields"));
        }
        let (identity, attribute) = (parse(&rec[0])?, parse(&rec[1])?);
        if let Some(prev) = map.insert(identity, attribute) {
            if prev != attribute {
                return Err(Error::InconsistentAttribute {
                    identity,
                    first: prev,
                    second: attribute,
                });
            }
        }
    }
    Ok(map)
}

/// Builds a cache from precomputed scores, bypassing embeddings.
///
/// Every identity needs all of its C(n_k, 2) genuine pairs; each identity
/// pair that appears at all needs its full n_k · n_l block. Missing
/// self-score rows default to 1, the cosine self-similarity. Identities absent
/// from `attributes` (or all of them, when it is `None`) get attribute 0.
pub fn read_score_csv<R: Read>(
    reader: R,
    attributes: Option<&BTreeMap<u32, u32>>,
    policy: ImpostorPolicy,
) -> Result<ScoreCache> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers
        .iter()
        .ne(["identity_a", "identity_b", "image_a", "image_b", "score"])
    {
        return Err(Error::malformed(
            "score header",
            "expected identity_a,identity_b,image_a,image_b,score",
        ));
    }

    // identity label -> image id -> local index (first appearance order)
    let mut images: BTreeMap<u32, (Vec<String>, HashMap<String, usize>)> = BTreeMap::new();
    let mut rows: Vec<(u32, usize, u32, usize, f64, usize)> = Vec::new();
    for (row, result) in rdr.records().enumerate() {
        let rec = result?;
        let line = row + 2;
        let loc = format!("score row {line}");
        if rec.len() != 5 {
            return Err(Error::malformed(&loc, "expected 5 fields"));
        }
        let ia = rec[0]
            .parse::<u32>()
            .map_err(|e| Error::malformed(&loc, format!("identity_a: {e}")))?;
        let ib = rec[1]
            .parse::<u32>()
            .map_err(|e| Error::malformed(&loc, format!("identity_b: {e}")))?;
        let score = rec[4]
            .parse::<f64>()
            .map_err(|e| Error::malformed(&loc, format!("score: {e}")))?;
        if !score.is_finite() {
            return Err(Error::malformed(&loc, "non-finite score"));
        }
        let mut intern = |label: u32, image: &str| {
            let (list, index) = images.entry(label).or_default();
            *index.entry(image.to_string()).or_insert_with(|| {
                list.push(image.to_string());
                list.len() - 1
            })
        };
        let xa = intern(ia, &rec[2]);
        let xb = intern(ib, &rec[3]);
        rows.push((ia, xa, ib, xb, score, line));
    }

    let labels: Vec<u32> = images.keys().copied().collect();
    let dense: HashMap<u32, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let attr_of = |label: u32| attributes.and_then(|m| m.get(&label).copied()).unwrap_or(0);
    let attribute_labels: Vec<u32> = labels
        .iter()
        .map(|&l| attr_of(l))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let attr_index: HashMap<u32, usize> = attribute_labels
        .iter()
        .enumerate()
        .map(|(i, &a)| (a, i))
        .collect();

    let sizes: Vec<usize> = labels.iter().map(|l| images[l].0.len()).collect();
    let mut genuine: Vec<Vec<Option<f64>>> = sizes.iter().map(|&n| vec![None; n * n]).collect();
    let mut blocks: BTreeMap<(usize, usize), Vec<Option<f64>>> = BTreeMap::new();

    for (ia, xa, ib, xb, score, line) in rows {
        let loc = format!("score row {line}");
        let (ka, kb) = (dense[&ia], dense[&ib]);
        if ka == kb {
            let n = sizes[ka];
            for idx in [xa * n + xb, xb * n + xa] {
                if genuine[ka][idx].replace(score).is_some() && xa != xb {
                    return Err(Error::malformed(&loc, "duplicate genuine pair"));
                }
            }
        } else {
            let (k, i, l, j) = if ka < kb {
                (ka, xa, kb, xb)
            } else {
                (kb, xb, ka, xa)
            };
            let block = blocks
                .entry((k, l))
                .or_insert_with(|| vec![None; sizes[k] * sizes[l]]);
            if block[i * sizes[l] + j].replace(score).is_some() {
                return Err(Error::malformed(&loc, "duplicate impostor pair"));
            }
        }
    }

    let mut identities = Vec::with_capacity(labels.len());
    for (k, &label) in labels.iter().enumerate() {
        let n = sizes[k];
        if n < 2 {
            return Err(Error::TooFewImages {
                identity: label,
                count: n,
            });
        }
        let mut matrix = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                match genuine[k][i * n + j] {
                    Some(s) => matrix.push(s),
                    None if i == j => matrix.push(1.0),
                    None => {
                        return Err(Error::malformed(
                            format!("identity {label}"),
                            format!(
                                "missing genuine pair ({}, {})",
                                images[&label].0[i], images[&label].0[j]
                            ),
                        ))
                    }
                }
            }
        }
        let attribute = attr_index[&attr_of(label)];
        identities.push(IdentityScores::new(
            label,
            attribute,
            images[&label].0.clone(),
            matrix,
        ));
    }

    let mut impostor = Vec::with_capacity(blocks.len());
    for ((k, l), cells) in blocks {
        let scores = cells
            .into_iter()
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| {
                Error::malformed(
                    format!("identity pair ({}, {})", labels[k], labels[l]),
                    "incomplete impostor block",
                )
            })?;
        impostor.push(ImpostorBlock::new(k, l, scores));
    }

    ScoreCache::from_parts(identities, impostor, attribute_labels, policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, identity: u32, attribute: u32, e: &[f32]) -> Record {
        Record {
            image_id: id.into(),
            identity,
            attribute,
            embedding: e.to_vec(),
        }
    }

    const FIVE_ROWS: &str = "image_id,identity,attribute,e0,e1,e2,e3
a,10,0,1,0,0,0
b,10,0,0.9,0.1,0,0
c,10,0,0.8,0.3,0.1,0
d,20,1,0,1,0,0
e,20,1,0,0.7,0.7,0
";

    #[test]
    fn csv_parse_counts() {
        let ds = read_embeddings_csv(FIVE_ROWS.as_bytes()).unwrap();
        assert_eq!(ds.num_identities(), 2);
        assert_eq!(ds.len(), 5);
        assert_eq!(ds.dim(), 4);
        assert_eq!(ds.identity_sizes(), vec![3, 2]);
        assert_eq!(ds.attribute_labels(), &[0, 1]);
    }

    #[test]
    fn csv_inconsistent_attribute() {
        let text = "image_id,identity,attribute,e0\nx,7,0,1\ny,7,1,1\n";
        match read_embeddings_csv(text.as_bytes()) {
            Err(Error::InconsistentAttribute { identity: 7, .. }) => {}
            other => panic!("expected inconsistent attribute, got {other:?}"),
        }
    }

    #[test]
    fn csv_error_paths() {
        let single = "image_id,identity,attribute,e0\nx,1,0,1\ny,1,0,2\nz,2,0,1\n";
        assert!(matches!(
            read_embeddings_csv(single.as_bytes()),
            Err(Error::TooFewImages {
                identity: 2,
                count: 1
            })
        ));
        let zero = "image_id,identity,attribute,e0,e1\nx,1,0,0,0\ny,1,0,1,1\n";
        assert!(matches!(
            read_embeddings_csv(zero.as_bytes()),
            Err(Error::ZeroNorm { .. })
        ));
        let bad = "image_id,identity,attribute,e0\nx,1,0,abc\ny,1,0,1\n";
        assert!(matches!(
            read_embeddings_csv(bad.as_bytes()),
            Err(Error::Malformed { .. })
        ));
        let header = "id,identity,attribute,e0\nx,1,0,1\n";
        assert!(matches!(
            read_embeddings_csv(header.as_bytes()),
            Err(Error::Malformed { .. })
        ));
        let ragged = "image_id,identity,attribute,e0,e1\nx,1,0,1\ny,1,0,1,1\n";
        assert!(read_embeddings_csv(ragged.as_bytes()).is_err());
    }

    #[test]
    fn dimension_mismatch_detected() {
        let recs = vec![rec("a", 1, 0, &[1.0, 0.0]), rec("b", 1, 0, &[1.0])];
        assert!(matches!(
            EmbeddingDataset::from_records(recs),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 1,
                ..
            })
        ));
    }

    #[test]
    fn binary_round_trip_and_truncation() {
        let ds = read_embeddings_csv(FIVE_ROWS.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_embeddings_binary(&ds, &mut buf).unwrap();
        assert_eq!(&buf[..5], b"UROC1");
        let back = read_embeddings_binary(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
        assert!(read_embeddings_binary(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_embeddings_binary(bad.as_slice()).is_err());
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(
            cosine_similarity(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap(),
            1.0
        );
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let s = cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroNormVector)
        ));
        assert!(cosine_similarity(&[1.0], &[1.0, 0.0]).is_err());
        // opposite vectors stay inside the clamp
        let s = cosine_similarity(&[0.1, 0.7, 0.3], &[-0.1, -0.7, -0.3]).unwrap();
        assert!((-1.0..=1.0).contains(&s));
    }

    #[test]
    fn self_similarity_is_exactly_one() {
        let mut x = 0.37f32;
        for len in 1..40 {
            let v: Vec<f32> = (0..len)
                .map(|_| {
                    x = (x * 7.31 + 0.123).fract() - 0.5;
                    x
                })
                .collect();
            assert_eq!(cosine_similarity(&v, &v).unwrap(), 1.0);
        }
    }

    #[test]
    fn cache_counts_all_pairs() {
        let ds = read_embeddings_csv(FIVE_ROWS.as_bytes()).unwrap();
        let cache = build_score_cache(&ds, ImpostorPolicy::AllPairs).unwrap();
        assert_eq!(cache.num_genuine_pairs(), 4);
        assert_eq!(cache.num_impostor_scores(), 6);
        for id in cache.identities() {
            for i in 0..id.n() {
                assert!((id.self_score(i) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn same_attribute_policy_filters_pairs() {
        let recs = vec![
            rec("a0", 1, 0, &[1.0, 0.0]),
            rec("a1", 1, 0, &[1.0, 0.1]),
            rec("b0", 2, 0, &[0.0, 1.0]),
            rec("b1", 2, 0, &[0.1, 1.0]),
            rec("c0", 3, 1, &[1.0, 1.0]),
            rec("c1", 3, 1, &[1.0, 0.9]),
        ];
        let ds = EmbeddingDataset::from_records(recs).unwrap();
        // attribute 1 has a single identity
        assert!(matches!(
            build_score_cache(&ds, ImpostorPolicy::SameAttributeOnly),
            Err(Error::NoImpostorPairs { attribute: 1 })
        ));
        let all = build_score_cache(&ds, ImpostorPolicy::AllPairs).unwrap();
        assert_eq!(all.impostor_blocks().len(), 3);

        let mut recs = ds.records().to_vec();
        recs.push(rec("d0", 4, 1, &[0.5, 1.0]));
        recs.push(rec("d1", 4, 1, &[0.4, 1.0]));
        let ds = EmbeddingDataset::from_records(recs).unwrap();
        let cache = build_score_cache(&ds, ImpostorPolicy::SameAttributeOnly).unwrap();
        let pairs: Vec<_> = cache
            .impostor_blocks()
            .iter()
            .map(|b| (b.first, b.second))
            .collect();
        assert_eq!(pairs, vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn cache_matches_direct_recomputation() {
        let ds = read_embeddings_csv(FIVE_ROWS.as_bytes()).unwrap();
        let cache = build_score_cache(&ds, ImpostorPolicy::AllPairs).unwrap();
        let emb = |k: usize, i: usize| &ds.records()[ds.identities()[k].images[i]].embedding;
        for (k, id) in cache.identities().iter().enumerate() {
            for i in 0..id.n() {
                for j in 0..id.n() {
                    assert_eq!(
                        id.score(i, j),
                        cosine_similarity(emb(k, i), emb(k, j)).unwrap()
                    );
                }
            }
        }
        for block in cache.impostor_blocks() {
            let nl = cache.identities()[block.second].n();
            for (idx, &s) in block.scores().iter().enumerate() {
                let direct =
                    cosine_similarity(emb(block.first, idx / nl), emb(block.second, idx % nl));
                assert_eq!(s, direct.unwrap());
            }
        }
    }

    #[test]
    fn score_csv_round_trip() {
        let ds = read_embeddings_csv(FIVE_ROWS.as_bytes()).unwrap();
        let cache = build_score_cache(&ds, ImpostorPolicy::AllPairs).unwrap();
        let mut scores = Vec::new();
        write_score_csv(&cache, &mut scores).unwrap();
        let mut attrs = Vec::new();
        write_attribute_csv(&cache, &mut attrs).unwrap();
        let attr_map = read_attribute_csv(attrs.as_slice()).unwrap();
        let back =
            read_score_csv(scores.as_slice(), Some(&attr_map), ImpostorPolicy::AllPairs).unwrap();
        assert_eq!(back, cache);
    }

    #[test]
    fn score_csv_defaults_and_errors() {
        let text = "identity_a,identity_b,image_a,image_b,score
1,1,a,b,0.9
2,2,c,d,0.8
1,2,a,c,0.1
1,2,a,d,0.2
2,1,c,b,0.3
1,2,b,d,0.4
";
        let cache = read_score_csv(text.as_bytes(), None, ImpostorPolicy::AllPairs).unwrap();
        assert_eq!(cache.num_genuine_pairs(), 2);
        assert_eq!(cache.num_impostor_scores(), 4);
        assert_eq!(cache.identities()[0].self_score(0), 1.0);
        assert_eq!(cache.impostor_blocks()[0].scores(), &[0.1, 0.2, 0.3, 0.4]);

        let incomplete = "identity_a,identity_b,image_a,image_b,score
1,1,a,b,0.9
2,2,c,d,0.8
1,2,a,c,0.1
";
        assert!(read_score_csv(incomplete.as_bytes(), None, ImpostorPolicy::AllPairs).is_err());
        let missing_genuine = "identity_a,identity_b,image_a,image_b,score
1,1,a,b,0.9
1,1,a,c,0.9
";
        assert!(
            read_score_csv(missing_genuine.as_bytes(), None, ImpostorPolicy::AllPairs).is_err()
        );
    }
}
