//! Subcommand bodies. Every result is computed before any file is written,
//! so a failing run leaves no partial output behind.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use uroc::data::{
    read_attribute_csv, read_score_csv, write_attribute_csv, write_embeddings_binary,
    write_embeddings_csv, write_score_csv,
};
use uroc::export::{self, Metadata};
use uroc::fairness::{fairness_reports, FairnessConfig, Metric, Side, ZeroPolicy};
use uroc::synthetic::{coverage_experiment, oracle_true_roc, CoverageConfig, ImageCount};
use uroc::{
    build_score_cache, load_embeddings, std_curve, AlphaGrid, EmbeddingFormat, Error, Result,
    RocReplicates, Scope, ScopeIndex, ScoreCache, SynthConfig,
};

use crate::{CoverageArgs, FairnessArgs, InputArgs, OutputFormat, RocArgs, ScoresArgs, SynthArgs};

/// Files to write, relative to the output directory.
struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn new() -> Self {
        Self { files: Vec::new() }
    }

    fn add(&mut self, name: String, content: impl Into<Vec<u8>>) {
        self.files.push((name, content.into()));
    }

    fn write_to(self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, content) in self.files {
            let path = dir.join(&name);
            fs::write(&path, content)?;
            println!("{}", path.display());
        }
        Ok(())
    }
}

fn metadata<T: Serialize>(command: &str, args: &T) -> Result<Metadata> {
    let args = serde_json::to_value(args)?;
    Ok(Metadata::new(json!({ "command": command, "args": args })))
}

fn load_cache(input: &InputArgs) -> Result<ScoreCache> {
    match (&input.input, &input.scores) {
        (Some(path), None) => {
            let format = input
                .input_format
                .unwrap_or_else(|| EmbeddingFormat::from_path(path));
            let ds = load_embeddings(path, format)?;
            log::info!(
                "{} images of {} identities, {} attribute values, d = {}",
                ds.len(),
                ds.num_identities(),
                ds.num_attributes(),
                ds.dim()
            );
            build_score_cache(&ds, input.policy)
        }
        (None, Some(path)) => {
            let attributes = match &input.attributes {
                Some(p) => Some(read_attribute_csv(BufReader::new(File::open(p)?))?),
                None => None,
            };
            read_score_csv(
                BufReader::new(File::open(path)?),
                attributes.as_ref(),
                input.policy,
            )
        }
        _ => Err(Error::InvalidConfig(
            "exactly one of --input and --scores is required".into(),
        )),
    }
}

fn group_name(cache: &ScoreCache, scope: Scope) -> String {
    match scope {
        Scope::Global => "global".into(),
        Scope::Attribute(a) => format!("attr_{}", cache.attribute_labels()[a]),
    }
}

pub fn roc(args: &RocArgs) -> Result<()> {
    let meta = metadata("roc", args)?;
    let alphas: AlphaGrid = args.boot.alphas.parse()?;
    let cache = load_cache(&args.input)?;
    let mut scopes = vec![Scope::Global];
    if args.per_attribute {
        scopes.extend((0..cache.num_attributes()).map(Scope::Attribute));
    }

    let ext = args.output.format.ext();
    let mut out = Outputs::new();
    for scope in scopes {
        let index = ScopeIndex::new(&cache, scope)?;
        let reps = RocReplicates::compute(
            &index,
            alphas.values(),
            args.boot.replicates,
            args.boot.seed,
        )?;
        let band = reps.band(args.boot.alpha_ci, args.mode)?;
        let estimate = band.estimate_curve();
        let normstd = std_curve(&band, &estimate);
        let name = group_name(&cache, scope);
        let (curve, band_file, std_file) = match args.output.format {
            OutputFormat::Csv => (
                export::curve_csv(&meta, &estimate),
                export::band_csv(&meta, &band),
                export::optional_curve_csv(&meta, &band.alphas, &normstd),
            ),
            OutputFormat::Json => (
                export::curve_json(&meta, &estimate),
                export::band_json(&meta, &band),
                export::optional_curve_json(&meta, &band.alphas, &normstd),
            ),
        };
        out.add(format!("roc_{name}_curve.{ext}"), curve);
        out.add(format!("roc_{name}_band.{ext}"), band_file);
        out.add(format!("roc_{name}_normstd.{ext}"), std_file);
    }
    out.write_to(&args.output.out)
}

pub fn fairness(args: &FairnessArgs) -> Result<()> {
    let meta = metadata("fairness", args)?;
    let alphas: AlphaGrid = args.boot.alphas.parse()?;
    let cache = load_cache(&args.input)?;
    let metrics = if args.metric.is_empty() {
        Metric::ALL.to_vec()
    } else {
        args.metric.clone()
    };
    let sides = if args.side.is_empty() {
        Side::ALL.to_vec()
    } else {
        args.side.clone()
    };
    let cfg = FairnessConfig {
        alphas: alphas.into_vec(),
        replicates: args.boot.replicates,
        alpha_ci: args.boot.alpha_ci,
        seed: args.boot.seed,
        zero_policy: if args.strict {
            ZeroPolicy::Strict
        } else {
            ZeroPolicy::Floor
        },
    };
    let reports = fairness_reports(&cache, &metrics, &sides, &cfg)?;

    let ext = args.output.format.ext();
    let mut out = Outputs::new();
    for report in &reports {
        let content = match args.output.format {
            OutputFormat::Csv => export::fairness_csv(&meta, report),
            OutputFormat::Json => export::fairness_json(&meta, report),
        };
        let side = report.side.to_string().to_lowercase();
        out.add(format!("fairness_{}_{side}.{ext}", report.metric), content);
    }
    out.write_to(&args.output.out)
}

fn parse_images(spec: &str) -> Result<ImageCount> {
    let bad = || {
        Error::InvalidConfig(format!(
            "images per identity {spec:?}: expected `n` or `lo-hi`"
        ))
    };
    let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    match spec.split_once('-') {
        Some((lo, hi)) => Ok(ImageCount {
            min: parse(lo)?,
            max: parse(hi)?,
        }),
        None => Ok(ImageCount::fixed(parse(spec)?)),
    }
}

fn synth_config(
    identities: usize,
    images: &str,
    dim: usize,
    attributes: Option<usize>,
    sigma: &[f64],
    seed: u64,
) -> Result<SynthConfig> {
    let sigmas = match (attributes, sigma.len()) {
        (None, _) => sigma.to_vec(),
        (Some(a), 1) => vec![sigma[0]; a],
        (Some(a), len) if a == len => sigma.to_vec(),
        (Some(a), len) => {
            return Err(Error::InvalidConfig(format!(
                "{len} noise scales given for {a} attribute values"
            )))
        }
    };
    let cfg = SynthConfig {
        identities,
        images: parse_images(images)?,
        dim,
        sigmas,
        seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let cfg = synth_config(
        args.identities,
        &args.images,
        args.dim,
        args.attributes,
        &args.sigma,
        args.seed,
    )?;
    let ds = uroc::generate_dataset(&cfg)?;
    let format = args
        .format
        .unwrap_or_else(|| EmbeddingFormat::from_path(&args.output));
    let mut buf = Vec::new();
    match format {
        EmbeddingFormat::Csv => {
            let meta = metadata("synth", args)?;
            buf.extend(format!("# tool: {}\n# config: {}\n", meta.tool, meta.config).into_bytes());
            write_embeddings_csv(&ds, &mut buf)?;
        }
        EmbeddingFormat::Binary => write_embeddings_binary(&ds, &mut buf)?,
    }
    write_file(&args.output, buf)
}

pub fn coverage(args: &CoverageArgs) -> Result<()> {
    let meta = metadata("coverage", args)?;
    let synth = synth_config(
        args.identities,
        &args.images,
        args.dim,
        args.attributes,
        &args.sigma,
        args.seed,
    )?;
    let alphas: AlphaGrid = args.alphas.parse()?;
    let truth = oracle_true_roc(
        &synth,
        args.mc_pairs,
        alphas.values(),
        Scope::Global,
        args.policy,
        args.seed,
    )?;
    let cfg = CoverageConfig {
        synth,
        policy: args.policy,
        reps: args.reps,
        replicates: args.replicates,
        alpha_ci: args.alpha_ci,
        alphas: alphas.into_vec(),
        seed: args.seed,
    };
    let report = coverage_experiment(&cfg, &truth.curve)?;

    let ext = args.output.format.ext();
    let mut out = Outputs::new();
    let (table, truth_file) = match args.output.format {
        OutputFormat::Csv => (
            export::coverage_csv(&meta, &report),
            export::curve_csv(&meta, &truth.curve),
        ),
        OutputFormat::Json => (
            export::coverage_json(&meta, &report),
            export::curve_json(&meta, &truth.curve),
        ),
    };
    out.add(format!("coverage.{ext}"), table);
    out.add(format!("coverage_truth.{ext}"), truth_file);
    let echo: Value = json!({
        "tool": meta.tool,
        "config": meta.config,
        "oracle_std_error": truth.std_error,
        "oracle_mc_pairs": truth.mc_pairs,
    });
    out.add(
        "coverage_config.json".into(),
        format!("{}\n", serde_json::to_string_pretty(&echo)?),
    );
    out.write_to(&args.output.out)
}

pub fn scores(args: &ScoresArgs) -> Result<()> {
    let meta = metadata("scores", args)?;
    let format = args
        .input_format
        .unwrap_or_else(|| EmbeddingFormat::from_path(&args.input));
    let ds = load_embeddings(&args.input, format)?;
    let cache = build_score_cache(&ds, args.policy)?;
    let preamble = format!("# tool: {}\n# config: {}\n", meta.tool, meta.config);
    let mut scores = preamble.clone().into_bytes();
    write_score_csv(&cache, &mut scores)?;
    let attributes = match &args.attributes_out {
        Some(path) => {
            let mut buf = preamble.into_bytes();
            write_attribute_csv(&cache, &mut buf)?;
            Some((path.clone(), buf))
        }
        None => None,
    };
    write_file(&args.output, scores)?;
    if let Some((path, buf)) = attributes {
        write_file(&path, buf)?;
    }
    Ok(())
}

fn write_file(path: &PathBuf, content: Vec<u8>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, content)?;
    println!("{}", path.display());
    Ok(())
}
