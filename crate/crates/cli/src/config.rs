//! Run configuration: defaults, the sectioned key-value config file, and
//! command line overrides, merged in that order.
//!
//! The file format is deliberately plain: `[section]` headers group
//! `key = value` lines, `#` starts a full-line comment, and every key has a
//! command line flag of the same name, so any setting can be pinned in the
//! file and overridden per invocation.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use tagrec_core::clustering::{ApConfig, PreferencePolicy};
use tagrec_core::corpus::{FilterConfig, InputFormat};
use tagrec_core::eval::MethodSpec;
use tagrec_core::recommender::{DiversityOrder, LikingDenominator};

/// Everything a pipeline run needs, resolved from defaults, the optional
/// config file, and command line flags.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub annotations: PathBuf,
    pub taxonomy: PathBuf,
    /// Precomputed similarity matrix; when set it replaces the taxonomy as
    /// the similarity source.
    pub similarity: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub input: InputFormat,
    pub filter: FilterConfig,
    pub clustering: ApConfig,
    pub top_n: usize,
    pub threshold: f64,
    pub blend_grid: Vec<f64>,
    pub diversity: DiversityOrder,
    pub denominator: LikingDenominator,
    pub folds: usize,
    pub repetitions: usize,
    pub master_seed: u64,
    pub methods: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            annotations: PathBuf::from("annotations.psv"),
            taxonomy: PathBuf::from("taxonomy.txt"),
            similarity: None,
            output_dir: PathBuf::from("out"),
            input: InputFormat::default(),
            filter: FilterConfig::default(),
            clustering: ApConfig::default(),
            top_n: 20,
            threshold: 0.0,
            blend_grid: MethodSpec::default_blend_grid(),
            diversity: DiversityOrder::MostDiverseFirst,
            denominator: LikingDenominator::AllAnnotators,
            folds: 5,
            repetitions: 10,
            master_seed: 42,
            methods: vec![
                "random".into(),
                "vector_space".into(),
                "peng_tag".into(),
                "peng_topic".into(),
                "proposed".into(),
            ],
        }
    }
}

pub const METHOD_NAMES: [&str; 5] = [
    "random",
    "vector_space",
    "peng_tag",
    "peng_topic",
    "proposed",
];

impl RunConfig {
    /// Resolves a full configuration: defaults, then the file, then flags.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
        let mut config = RunConfig::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            config
                .merge_file(&text)
                .with_context(|| format!("in config file {}", path.display()))?;
        }
        config.merge_overrides(overrides)?;
        config.validate()?;
        Ok(config)
    }

    fn merge_file(&mut self, text: &str) -> Result<()> {
        let mut section = String::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected 'key = value', got {line:?}", no + 1))?;
            self.set(&section, key.trim(), value.trim())
                .with_context(|| format!("line {}", no + 1))?;
        }
        Ok(())
    }

    fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        match (section, key) {
            ("paths", "annotations") => self.annotations = PathBuf::from(value),
            ("paths", "taxonomy") => self.taxonomy = PathBuf::from(value),
            ("paths", "similarity") => self.similarity = Some(PathBuf::from(value)),
            ("paths", "output_dir") => self.output_dir = PathBuf::from(value),
            ("input", "delimiter") => {
                let mut chars = value.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => self.input.delimiter = c,
                    _ => bail!("delimiter must be a single character, got {value:?}"),
                }
            }
            ("input", "article_field") => self.input.article = parse(key, value)?,
            ("input", "user_field") => self.input.user = parse(key, value)?,
            ("input", "timestamp_field") => self.input.timestamp = parse(key, value)?,
            ("input", "tag_field") => self.input.tag = parse(key, value)?,
            ("input", "max_malformed_fraction") => {
                self.input.max_malformed_fraction = parse(key, value)?
            }
            ("filter", "min_item_annotators") => {
                self.filter.min_item_annotators = parse(key, value)?
            }
            ("filter", "max_item_annotators") => {
                self.filter.max_item_annotators = parse(key, value)?
            }
            ("filter", "min_tag_uses") => self.filter.min_tag_uses = parse(key, value)?,
            ("filter", "min_user_items") => self.filter.min_user_items = parse(key, value)?,
            ("filter", "sample_size") => self.filter.sample_size = parse(key, value)?,
            ("filter", "sample_seed") => self.filter.seed = parse(key, value)?,
            ("clustering", "damping") => self.clustering.damping = parse(key, value)?,
            ("clustering", "max_iterations") => self.clustering.max_iterations = parse(key, value)?,
            ("clustering", "convergence_window") => {
                self.clustering.convergence_window = parse(key, value)?
            }
            ("clustering", "preference") => self.clustering.preference = parse_preference(value)?,
            ("model", "top_n") => self.top_n = parse(key, value)?,
            ("model", "threshold") => self.threshold = parse(key, value)?,
            ("model", "blend_grid") => self.blend_grid = parse_grid(value)?,
            ("model", "diversity") => self.diversity = parse_diversity(value)?,
            ("model", "denominator") => self.denominator = parse_denominator(value)?,
            ("evaluate", "folds") => self.folds = parse(key, value)?,
            ("evaluate", "repetitions") => self.repetitions = parse(key, value)?,
            ("evaluate", "master_seed") => self.master_seed = parse(key, value)?,
            ("evaluate", "methods") => self.methods = parse_methods(value)?,
            _ => bail!("unknown setting [{section}] {key}"),
        }
        Ok(())
    }

    fn merge_overrides(&mut self, o: &Overrides) -> Result<()> {
        if let Some(v) = &o.annotations {
            self.annotations = v.clone();
        }
        if let Some(v) = &o.taxonomy {
            self.taxonomy = v.clone();
        }
        if let Some(v) = &o.similarity {
            self.similarity = Some(v.clone());
        }
        if let Some(v) = &o.output_dir {
            self.output_dir = v.clone();
        }
        if let Some(v) = o.min_item_annotators {
            self.filter.min_item_annotators = v;
        }
        if let Some(v) = o.max_item_annotators {
            self.filter.max_item_annotators = v;
        }
        if let Some(v) = o.min_tag_uses {
            self.filter.min_tag_uses = v;
        }
        if let Some(v) = o.min_user_items {
            self.filter.min_user_items = v;
        }
        if let Some(v) = o.sample_size {
            self.filter.sample_size = v;
        }
        if let Some(v) = o.sample_seed {
            self.filter.seed = v;
        }
        if let Some(v) = o.damping {
            self.clustering.damping = v;
        }
        if let Some(v) = o.max_iterations {
            self.clustering.max_iterations = v;
        }
        if let Some(v) = o.convergence_window {
            self.clustering.convergence_window = v;
        }
        if let Some(v) = &o.preference {
            self.clustering.preference = parse_preference(v)?;
        }
        if let Some(v) = o.top_n {
            self.top_n = v;
        }
        if let Some(v) = o.threshold {
            self.threshold = v;
        }
        if let Some(v) = &o.blend_grid {
            self.blend_grid = parse_grid(v)?;
        }
        if let Some(v) = &o.diversity {
            self.diversity = parse_diversity(v)?;
        }
        if let Some(v) = &o.denominator {
            self.denominator = parse_denominator(v)?;
        }
        if let Some(v) = o.folds {
            self.folds = v;
        }
        if let Some(v) = o.repetitions {
            self.repetitions = v;
        }
        if let Some(v) = o.master_seed {
            self.master_seed = v;
        }
        if let Some(v) = &o.methods {
            self.methods = parse_methods(v)?;
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        for &d in &self.blend_grid {
            if !(0.0..=1.0).contains(&d) {
                bail!("blend factor {d} outside [0, 1]");
            }
        }
        if self.blend_grid.is_empty() {
            bail!("blend_grid must list at least one value");
        }
        if self.folds < 2 {
            bail!("folds must be at least 2");
        }
        if self.repetitions == 0 {
            bail!("repetitions must be at least 1");
        }
        if self.top_n == 0 {
            bail!("top_n must be at least 1");
        }
        Ok(())
    }

    /// Resolves method names into evaluation specs, preserving order.
    pub fn method_specs(&self) -> Vec<MethodSpec> {
        self.methods
            .iter()
            .map(|name| match name.as_str() {
                "random" => MethodSpec::Random,
                "vector_space" => MethodSpec::VectorSpace,
                "peng_tag" => MethodSpec::PengTag,
                "peng_topic" => MethodSpec::PengTopic,
                "proposed" => MethodSpec::Proposed {
                    blend_grid: self.blend_grid.clone(),
                    diversity: self.diversity,
                    denominator: self.denominator,
                },
                other => unreachable!("validated method name {other:?}"),
            })
            .collect()
    }

    /// True when the evaluation needs tag clusters (the blended method and
    /// the topic transition method read them).
    pub fn needs_clustering(&self) -> bool {
        self.methods
            .iter()
            .any(|m| m == "proposed" || m == "peng_topic")
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("invalid value {value:?} for {key}: {e}"))
}

fn parse_preference(value: &str) -> Result<PreferencePolicy> {
    match value {
        "min" => Ok(PreferencePolicy::MinOffDiagonal),
        "median" => Ok(PreferencePolicy::MedianOffDiagonal),
        other => other
            .parse()
            .map(PreferencePolicy::Explicit)
            .map_err(|_| anyhow!("preference must be 'min', 'median', or a number, got {other:?}")),
    }
}

fn parse_grid(value: &str) -> Result<Vec<f64>> {
    if value == "default" {
        return Ok(MethodSpec::default_blend_grid());
    }
    value
        .split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| anyhow!("invalid blend factor {part:?}"))
        })
        .collect()
}

fn parse_diversity(value: &str) -> Result<DiversityOrder> {
    match value {
        "most" => Ok(DiversityOrder::MostDiverseFirst),
        "least" => Ok(DiversityOrder::LeastDiverseFirst),
        other => bail!("diversity must be 'most' or 'least', got {other:?}"),
    }
}

fn parse_denominator(value: &str) -> Result<LikingDenominator> {
    match value {
        "all" => Ok(LikingDenominator::AllAnnotators),
        "flagged" => Ok(LikingDenominator::FlaggedAnnotators),
        other => bail!("denominator must be 'all' or 'flagged', got {other:?}"),
    }
}

fn parse_methods(value: &str) -> Result<Vec<String>> {
    let mut seen = BTreeSet::new();
    let mut methods = Vec::new();
    for part in value.split(',') {
        let name = part.trim();
        if !METHOD_NAMES.contains(&name) {
            bail!(
                "unknown method {name:?}; available: {}",
                METHOD_NAMES.join(", ")
            );
        }
        if seen.insert(name.to_string()) {
            methods.push(name.to_string());
        }
    }
    if methods.is_empty() {
        bail!("methods must list at least one method");
    }
    Ok(methods)
}

/// Command line counterparts of every config file key.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Raw annotation stream (one 'article|user|timestamp|tag' per line).
    #[arg(long, value_name = "FILE")]
    pub annotations: Option<PathBuf>,
    /// Concept taxonomy with tag mappings.
    #[arg(long, value_name = "FILE")]
    pub taxonomy: Option<PathBuf>,
    /// Precomputed tag similarity matrix TSV, replacing the taxonomy.
    #[arg(long, value_name = "FILE")]
    pub similarity: Option<PathBuf>,
    /// Directory for artifacts and reports.
    #[arg(long, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// Keep items with at least this many annotators.
    #[arg(long)]
    pub min_item_annotators: Option<u32>,
    /// Keep items with at most this many annotators.
    #[arg(long)]
    pub max_item_annotators: Option<u32>,
    /// Keep tags used by at least this many posts.
    #[arg(long)]
    pub min_tag_uses: Option<u32>,
    /// Keep users annotating at least this many items.
    #[arg(long)]
    pub min_user_items: Option<u32>,
    /// Users drawn from the raw corpus before filtering.
    #[arg(long)]
    pub sample_size: Option<usize>,
    /// Seed of the snapshot user sample.
    #[arg(long)]
    pub sample_seed: Option<u64>,
    /// Message damping in [0, 1).
    #[arg(long)]
    pub damping: Option<f64>,
    /// Clustering iteration cap.
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Iterations the exemplar set must hold to declare convergence.
    #[arg(long)]
    pub convergence_window: Option<usize>,
    /// Exemplar preference: 'min', 'median', or a number.
    #[arg(long)]
    pub preference: Option<String>,
    /// Recommendation list length.
    #[arg(long)]
    pub top_n: Option<usize>,
    /// Exclusive score threshold for recommendations.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Comma-separated blend factors, or 'default' for 0.0 to 1.0 step 0.1.
    #[arg(long)]
    pub blend_grid: Option<String>,
    /// Which users get competence flags: 'most' or 'least' diverse.
    #[arg(long)]
    pub diversity: Option<String>,
    /// Liking denominator: 'all' or 'flagged' annotators.
    #[arg(long)]
    pub denominator: Option<String>,
    /// Cross-validation folds.
    #[arg(long)]
    pub folds: Option<usize>,
    /// Protocol repetitions averaged into the report.
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Master seed deriving every per-repetition seed.
    #[arg(long)]
    pub master_seed: Option<u64>,
    /// Comma-separated methods to evaluate.
    #[arg(long)]
    pub methods: Option<String>,
}
