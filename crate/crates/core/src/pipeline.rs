//! Declarative run configuration and the batch commands behind the CLI.
//!
//! Every command writes into its own subdirectory of the output directory
//! and finishes with a `manifest.json` listing the files it wrote and their
//! SHA-256 digests. Commands that need fitted replications reuse the ones
//! written by `fit` when their configuration matches, and fit them
//! otherwise.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::align::{align_topics, build_topic_groups, cosine_distributions, frex_words, Matching, TopN};
use crate::corpus::{load_corpus, save_corpus, Corpus, CorpusFormat};
use crate::downstream::{
    accuracy_summary, fit_replications, select_prevalent_terms, word_weight_summary, write_accuracy_csv,
    write_word_weights_csv, PredictionModel, DEFAULT_HOLDOUT,
};
use crate::error::{Error, Result};
use crate::io::{ensure_dir, read_json, write_json, Manifest};
use crate::lda::{load_model, run_replications, save_model, LdaConfig, ReplicationSet, SeedMode, TopicModel};
use crate::perturb::{run_perturbation, write_perturb_csv, Metric, PerturbMode, PerturbSettings, ScoreSettings};
use crate::reliability::{reliability_report, Pooling, ReportSettings, DEFAULT_CUTOFF, MIN_RESAMPLES};
use crate::svg;
use crate::synthgen::{generate, label_documents, make_degenerate_replication, GenerativeSpec, GroundTruth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    #[default]
    Trivial,
    Nontrivial,
}

/// Generator settings: a preset plus optional overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSettings {
    #[serde(default)]
    pub preset: Preset,
    pub k_true: Option<usize>,
    pub vocab_size: Option<usize>,
    pub num_docs: Option<usize>,
    pub doc_length: Option<f64>,
    pub dirichlet_alpha: Option<f64>,
    pub dirichlet_beta: Option<f64>,
    pub topic_skew: Option<f64>,
    /// Defaults to the run seed.
    pub seed: Option<u64>,
    /// When set, documents get binary labels driven by their true topic
    /// proportions with this logit scale.
    pub label_strength: Option<f64>,
}

impl GenerateSettings {
    pub fn spec(&self, run_seed: u64) -> GenerativeSpec {
        let seed = self.seed.unwrap_or(run_seed);
        let base = match self.preset {
            Preset::Trivial => GenerativeSpec::trivial(seed),
            Preset::Nontrivial => GenerativeSpec::nontrivial(seed),
        };
        GenerativeSpec {
            k_true: self.k_true.unwrap_or(base.k_true),
            vocab_size: self.vocab_size.unwrap_or(base.vocab_size),
            num_docs: self.num_docs.unwrap_or(base.num_docs),
            doc_length: self.doc_length.unwrap_or(base.doc_length),
            dirichlet_alpha: self.dirichlet_alpha.unwrap_or(base.dirichlet_alpha),
            dirichlet_beta: self.dirichlet_beta.unwrap_or(base.dirichlet_beta),
            topic_skew: self.topic_skew.unwrap_or(base.topic_skew),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CorpusSource {
    File {
        path: PathBuf,
        #[serde(default = "default_format")]
        format: CorpusFormat,
    },
    Generate(GenerateSettings),
}

fn default_format() -> CorpusFormat {
    CorpusFormat::LineTokens
}

impl Default for CorpusSource {
    fn default() -> Self {
        CorpusSource::Generate(GenerateSettings::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdaSettings {
    /// Defaults to 50/K.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

impl Default for LdaSettings {
    fn default() -> Self {
        LdaSettings {
            alpha: None,
            beta: default_beta(),
            iterations: default_iterations(),
            burn_in: default_burn_in(),
        }
    }
}

impl LdaSettings {
    pub fn config(&self, k: usize, seed: u64) -> LdaConfig {
        let base = LdaConfig::new(k);
        LdaConfig {
            alpha: self.alpha.unwrap_or(base.alpha),
            beta: self.beta,
            iterations: self.iterations,
            burn_in: self.burn_in,
            ..base
        }
        .with_seed(seed)
    }
}

/// Swaps one replication for a synthetic near-uniform one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegenerateInjection {
    /// Replication index to overwrite.
    pub replace: usize,
    /// Replication whose φ and document ordering the degenerate one follows.
    pub source: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Defaults to a seed derived from the run seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub corpus: CorpusSource,
    #[serde(default = "default_k")]
    pub k: Vec<usize>,
    #[serde(default = "default_n_reps")]
    pub n_reps: usize,
    #[serde(default)]
    pub seed_mode: SeedMode,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub lda: LdaSettings,
    #[serde(default)]
    pub top_n: TopN,
    #[serde(default)]
    pub matching: Matching,
    #[serde(default)]
    pub reference: usize,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    /// Bootstrap resamples for standard errors; 0 disables them.
    #[serde(default)]
    pub bootstrap: usize,
    #[serde(default)]
    pub pooling: Pooling,
    #[serde(default)]
    pub drop_topic: Option<usize>,
    #[serde(default)]
    pub degenerate: Option<DegenerateInjection>,
    /// Replication subsets scored in addition to the full set.
    #[serde(default)]
    pub subsets: Vec<Vec<usize>>,
    #[serde(default = "default_schedule")]
    pub removal_schedule: Vec<usize>,
    #[serde(default = "default_modes")]
    pub perturb_modes: Vec<PerturbMode>,
    #[serde(default = "default_holdout")]
    pub holdout: f64,
    #[serde(default = "default_prevalent_terms")]
    pub prevalent_terms: usize,
    #[serde(default = "default_prevalent_top_n")]
    pub prevalent_top_n: usize,
    #[serde(default = "default_frex_weight")]
    pub frex_weight: f64,
    #[serde(default = "default_frex_top_n")]
    pub frex_top_n: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_beta() -> f64 {
    0.1
}
fn default_iterations() -> usize {
    1000
}
fn default_burn_in() -> usize {
    500
}
fn default_epsilon() -> f64 {
    0.01
}
fn default_k() -> Vec<usize> {
    vec![2]
}
fn default_n_reps() -> usize {
    10
}
fn default_seed() -> u64 {
    1
}
fn default_cutoff() -> f64 {
    DEFAULT_CUTOFF
}
fn default_schedule() -> Vec<usize> {
    vec![1, 10, 50, 100]
}
fn default_modes() -> Vec<PerturbMode> {
    vec![PerturbMode::Fixed, PerturbMode::Varied]
}
fn default_holdout() -> f64 {
    DEFAULT_HOLDOUT
}
fn default_prevalent_terms() -> usize {
    2
}
fn default_prevalent_top_n() -> usize {
    20
}
fn default_frex_weight() -> f64 {
    0.5
}
fn default_frex_top_n() -> usize {
    10
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl RunConfig {
    /// Reads a JSON config. Relative corpus paths are resolved against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: RunConfig = serde_json::from_str(&body).map_err(|e| Error::Config(e.to_string()))?;
        if let CorpusSource::File { path: corpus, .. } = &mut config.corpus {
            if corpus.is_relative() {
                if let Some(dir) = path.parent() {
                    *corpus = dir.join(&*corpus);
                }
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.k.is_empty() {
            return bad("k must list at least one topic count".into());
        }
        if let Some(k) = self.k.iter().find(|&&k| k < 2) {
            return bad(format!("topic counts must be at least 2, got {k}"));
        }
        if self.n_reps < 2 {
            return bad("reliability requires ≥ 2 replications".into());
        }
        if self.reference >= self.n_reps {
            return bad(format!("reference {} is not a replication index", self.reference));
        }
        self.lda.config(self.k[0], 0).validate()?;
        if !(self.cutoff.is_finite()) {
            return bad("cutoff must be finite".into());
        }
        if self.bootstrap != 0 && self.bootstrap < MIN_RESAMPLES {
            return bad(format!("bootstrap must be 0 or at least {MIN_RESAMPLES}"));
        }
        if !(self.holdout > 0.0 && self.holdout < 0.5) {
            return bad("holdout must lie in (0, 0.5)".into());
        }
        if let Some(d) = &self.degenerate {
            if d.replace >= self.n_reps || d.source >= self.n_reps || d.replace == d.source {
                return bad("degenerate replace/source must be distinct replication indices".into());
            }
        }
        for s in &self.subsets {
            if s.len() < 2 || s.iter().any(|&i| i >= self.n_reps) {
                return bad(format!("subset {s:?} needs ≥ 2 valid replication indices"));
            }
        }
        if !(0.0..=1.0).contains(&self.frex_weight) {
            return bad("frex_weight must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// The corpus named by the config, plus the ground truth when generated.
pub fn resolve_corpus(config: &RunConfig) -> Result<(Corpus, Option<GroundTruth>)> {
    match &config.corpus {
        CorpusSource::File { path, format } => Ok((load_corpus(path, *format)?, None)),
        CorpusSource::Generate(g) => {
            let spec = g.spec(config.seed);
            let (corpus, truth) = generate(&spec)?;
            let corpus = match g.label_strength {
                Some(strength) => {
                    let labels = label_documents(&truth, strength, spec.seed ^ 0x6c61_6265_6c73);
                    corpus.with_labels(labels)?
                }
                None => corpus,
            };
            Ok((corpus, Some(truth)))
        }
    }
}

fn command_dir(config: &RunConfig, command: &str) -> Result<PathBuf> {
    let dir = config.out.join(command);
    ensure_dir(&dir)?;
    Ok(dir)
}

fn rep_dir(root: &Path, k: usize, r: usize) -> PathBuf {
    root.join(format!("k{k}")).join(format!("rep{r:03}"))
}

/// Fitted replications previously written by `fit`, if they match.
fn cached_replications(config: &RunConfig, corpus: &Corpus, k: usize) -> Option<ReplicationSet> {
    let root = config.out.join("fit");
    let digest = corpus.digest();
    let seeds = crate::lda::replication_seeds(config.seed, config.n_reps, config.seed_mode);
    let models = seeds
        .iter()
        .enumerate()
        .map(|(r, &seed)| {
            let dir = rep_dir(&root, k, r);
            let (model, model_digest) = load_model(&dir).ok()?;
            let expected = config.lda.config(k, seed);
            (model_digest == digest && model.config == expected && model.num_docs() == corpus.num_docs())
                .then_some(model)
        })
        .collect::<Option<Vec<TopicModel>>>()?;
    ReplicationSet::new(models, digest).ok()
}

pub fn replications_for(config: &RunConfig, corpus: &Corpus, k: usize) -> Result<ReplicationSet> {
    if let Some(reps) = cached_replications(config, corpus, k) {
        log::info!("reusing fitted replications for K = {k}");
        return Ok(reps);
    }
    log::info!("fitting {} replications for K = {k}", config.n_reps);
    run_replications(
        corpus,
        &config.lda.config(k, config.seed),
        config.n_reps,
        config.seed_mode,
        config.seed,
    )
}

fn record_all(manifest: &mut Manifest, root: &Path, files: &[PathBuf]) -> Result<()> {
    for f in files {
        manifest.record(root, f)?;
    }
    Ok(())
}

fn finish(manifest: Manifest, dir: &Path) -> Result<Manifest> {
    manifest.write(dir)?;
    Ok(manifest)
}

/// Writes the corpus (sparse triplets with vocabulary and label sidecars),
/// the ground truth when generated, and the resolved generator spec.
pub fn cmd_generate(config: &RunConfig) -> Result<Manifest> {
    config.validate()?;
    let dir = command_dir(config, "generate")?;
    let mut manifest = Manifest::new("generate");
    let (corpus, truth) = resolve_corpus(config)?;
    let corpus_path = dir.join("corpus.csv");
    save_corpus(&corpus, &corpus_path, CorpusFormat::SparseTriplets)?;
    let mut files = vec![corpus_path.clone(), crate::corpus::vocab_path(&corpus_path)];
    if corpus.labels().is_some() {
        files.push(crate::corpus::labels_path(&corpus_path));
    }
    if let Some(truth) = truth {
        files.extend(truth.save(&dir)?);
    }
    if let CorpusSource::Generate(g) = &config.corpus {
        let spec_path = dir.join("spec.json");
        write_json(&spec_path, &g.spec(config.seed))?;
        files.push(spec_path);
    }
    record_all(&mut manifest, &dir, &files)?;
    finish(manifest, &dir)
}

#[derive(Debug, Serialize, Deserialize)]
struct SeedRecord {
    k: usize,
    seed_mode: SeedMode,
    master_seed: u64,
    seeds: Vec<u64>,
    corpus_digest: String,
}

/// Fits the replication set for every K.
pub fn cmd_fit(config: &RunConfig) -> Result<Manifest> {
    config.validate()?;
    let dir = command_dir(config, "fit")?;
    let mut manifest = Manifest::new("fit");
    let (corpus, _) = resolve_corpus(config)?;
    for &k in &config.k {
        let reps = run_replications(
            &corpus,
            &config.lda.config(k, config.seed),
            config.n_reps,
            config.seed_mode,
            config.seed,
        )?;
        for (r, model) in reps.models.iter().enumerate() {
            let files = save_model(model, &rep_dir(&dir, k, r), &reps.corpus_digest)?;
            record_all(&mut manifest, &dir, &files)?;
        }
        let seeds_path = dir.join(format!("k{k}")).join("seeds.json");
        write_json(
            &seeds_path,
            &SeedRecord {
                k,
                seed_mode: config.seed_mode,
                master_seed: config.seed,
                seeds: reps.seeds.clone(),
                corpus_digest: reps.corpus_digest.clone(),
            },
        )?;
        manifest.record(&dir, &seeds_path)?;
    }
    finish(manifest, &dir)
}

fn write_cosine_csv(path: &Path, reps: &ReplicationSet, alignment: &crate::align::Alignment) -> Result<()> {
    let dist = cosine_distributions(reps, alignment, alignment.top_n)?;
    let k = reps.k();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["replication", "ref_topic", "full", "matched"])?;
    for (i, (f, m)) in dist.full.iter().zip(&dist.matched).enumerate() {
        let rep = alignment.replications[i / k];
        w.write_record([rep.to_string(), (i % k).to_string(), f.to_string(), m.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_frex_csv(
    path: &Path,
    config: &RunConfig,
    reps: &ReplicationSet,
    corpus: &Corpus,
    alignment: &crate::align::Alignment,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["ref_topic", "replication", "rank", "term", "score"])?;
    let top = config.frex_top_n.min(reps.vocab_size());
    for k in 0..reps.k() {
        for (r, model) in reps.models.iter().enumerate() {
            let terms = frex_words(model, alignment.topic_in(r, k), config.frex_weight, top)?;
            for (rank, t) in terms.iter().enumerate() {
                w.write_record([
                    k.to_string(),
                    r.to_string(),
                    (rank + 1).to_string(),
                    corpus.vocabulary().term(t.term).to_owned(),
                    t.score.to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Aligns every K's replications to the reference and writes the matches,
/// the full-versus-matched cosine similarities and FREX terms per matched
/// topic.
pub fn cmd_align(config: &RunConfig) -> Result<Manifest> {
    config.validate()?;
    let dir = command_dir(config, "align")?;
    let mut manifest = Manifest::new("align");
    let (corpus, _) = resolve_corpus(config)?;
    for &k in &config.k {
        let reps = replications_for(config, &corpus, k)?;
        let top_n = config.top_n.fit_to(reps.vocab_size());
        let alignment = align_topics(&reps, config.reference, top_n, config.matching)?;
        let kdir = dir.join(format!("k{k}"));
        ensure_dir(&kdir)?;
        let files = [
            kdir.join("alignment.csv"),
            kdir.join("cosine.csv"),
            kdir.join("frex.csv"),
        ];
        alignment.write_csv(&files[0])?;
        write_cosine_csv(&files[1], &reps, &alignment)?;
        write_frex_csv(&files[2], config, &reps, &corpus, &alignment)?;
        record_all(&mut manifest, &dir, &files)?;
    }
    finish(manifest, &dir)
}

const HISTOGRAM_BINS: usize = 20;

fn write_histogram(dir: &Path, reps: &ReplicationSet, alignment: &crate::align::Alignment) -> Result<Vec<PathBuf>> {
    let dist = cosine_distributions(reps, alignment, alignment.top_n)?;
    let full = svg::histogram_counts(&dist.full, HISTOGRAM_BINS, 0.0, 1.0);
    let matched = svg::histogram_counts(&dist.matched, HISTOGRAM_BINS, 0.0, 1.0);
    let csv_path = dir.join("cosine_hist.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["bin_lower", "bin_upper", "full", "matched"])?;
    for b in 0..HISTOGRAM_BINS {
        let lo = b as f64 / HISTOGRAM_BINS as f64;
        let hi = (b + 1) as f64 / HISTOGRAM_BINS as f64;
        w.write_record([
            lo.to_string(),
            hi.to_string(),
            full[b].to_string(),
            matched[b].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    let svg_path = dir.join("cosine_hist.svg");
    let body = svg::histogram(
        "Cosine similarity to the reference",
        "cosine similarity",
        &[("full", full), ("matched", matched)],
        0.0,
        1.0,
    );
    fs::write(&svg_path, body).map_err(|e| Error::io(&svg_path, e))?;
    Ok(vec![csv_path, svg_path])
}

fn score_set(
    config: &RunConfig,
    reps: &ReplicationSet,
    reference: usize,
    dir: &Path,
    with_plots: bool,
) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let top_n = config.top_n.fit_to(reps.vocab_size());
    let alignment = align_topics(reps, reference, top_n, config.matching)?;
    let groups = build_topic_groups(reps, &alignment)?;
    let settings = ReportSettings {
        cutoff: config.cutoff,
        drop_topic: config.drop_topic,
        pooling: config.pooling,
        bootstrap_resamples: config.bootstrap,
        bootstrap_seed: crate::stats::child_seed(config.seed, 0x626f_6f74),
    };
    let report = reliability_report(&groups, &alignment, &reps.seeds, &reps.corpus_digest, &settings)?;
    let mut files = vec![
        dir.join("reliability.json"),
        dir.join("topics.csv"),
        dir.join("alignment.csv"),
    ];
    write_json(&files[0], &report)?;
    report.write_topic_csv(&files[1])?;
    alignment.write_csv(&files[2])?;
    if with_plots {
        files.extend(write_histogram(dir, reps, &alignment)?);
    }
    if !report.failures.is_empty() {
        log::warn!("{}: {}", dir.display(), report.failures.join("; "));
    }
    Ok(files)
}

/// Scores all four coefficients per K (plus any configured subsets) and
/// emits the cosine-similarity histogram data. A K whose scoring fails is
/// recorded in the manifest and the remaining K still run.
pub fn cmd_reliability(config: &RunConfig) -> Result<Manifest> {
    config.validate()?;
    let dir = command_dir(config, "reliability")?;
    let mut manifest = Manifest::new("reliability");
    let (corpus, _) = resolve_corpus(config)?;
    for &k in &config.k {
        let kdir = dir.join(format!("k{k}"));
        let outcome = (|| -> Result<Vec<PathBuf>> {
            let mut reps = replications_for(config, &corpus, k)?;
            if let Some(d) = &config.degenerate {
                let seed = d
                    .seed
                    .unwrap_or_else(|| crate::stats::child_seed(config.seed, 0x0064_6567_656e));
                let model = make_degenerate_replication(&reps.models[d.source], d.epsilon, seed)?;
                reps.replace(d.replace, model)?;
            }
            let mut files = score_set(config, &reps, config.reference, &kdir, true)?;
            for subset in &config.subsets {
                let name: Vec<String> = subset.iter().map(usize::to_string).collect();
                let sub = reps.subset(subset)?;
                let sdir = kdir.join(format!("subset-{}", name.join("-")));
                files.extend(score_set(config, &sub, 0, &sdir, false)?);
            }
            Ok(files)
        })();
        match outcome {
            Ok(files) => record_all(&mut manifest, &dir, &files)?,
            Err(e) if e.is_validation() => return Err(e),
            Err(e) => manifest.fail(format!("k{k}: {e}")),
        }
    }
    finish(manifest, &dir)
}

/// Word-removal sensitivity for every K: one row per (mode, removal count,
/// metric) plus a line chart of each metric against the removal count.
pub fn cmd_perturb(config: &RunConfig) -> Result<Manifest> {
    config.validate()?;
    if config.removal_schedule.is_empty() {
        return Err(Error::Config("removal_schedule is empty".into()));
    }
    let dir = command_dir(config, "perturb")?;
    let mut manifest = Manifest::new("perturb");
    let (corpus, _) = resolve_corpus(config)?;
    for &k in &config.k {
        let settings = PerturbSettings {
            lda: config.lda.config(k, config.seed),
            n_reps: config.n_reps,
            schedule: config.removal_schedule.clone(),
            modes: config.perturb_modes.clone(),
            master_seed: config.seed,
            score: ScoreSettings {
                top_n: config.top_n.fit_to(corpus.vocab_size()),
                matching: config.matching,
                cutoff: config.cutoff,
                pooling: config.pooling,
            },
        };
        let rows = run_perturbation(&corpus, &settings)?;
        let kdir = dir.join(format!("k{k}"));
        ensure_dir(&kdir)?;
        let csv_path = kdir.join("perturb.csv");
        write_perturb_csv(&csv_path, &rows)?;
        let mut series = Vec::new();
        for &mode in &config.perturb_modes {
            for metric in Metric::ALL {
                let pts = rows
                    .iter()
                    .filter(|r| r.mode == mode && r.metric == metric)
                    .filter_map(|r| r.value.map(|v| (r.removed as f64, v)))
                    .collect();
                series.push((format!("{mode} {metric}"), pts));
            }
        }
        let svg_path = kdir.join("perturb.svg");
        let body = svg::line_chart("Reliability after word removal", "terms removed", "value", &series);
        fs::write(&svg_path, body).map_err(|e| Error::io(&svg_path, e))?;
        for row in rows.iter().filter(|r| r.error.is_some()) {
            manifest.fail(format!(
                "k{k} {} n={} {}: {}",
                row.mode,
                row.removed,
                row.metric,
                row.error.as_deref().unwrap_or_default()
            ));
        }
        record_all(&mut manifest, &dir, &[csv_path, svg_path])?;
    }
    finish(manifest, &dir)
}

#[derive(Debug, Serialize)]
struct DownstreamRecord<'a> {
    k: usize,
    terms: Vec<&'a str>,
    models: &'a [PredictionModel],
}

/// Per-replication logistic regressions for every K, accuracy five-number
/// summaries and word-weight summaries for the most prevalent terms. The
/// same terms are used for every K.
pub fn cmd_downstream(config: &RunConfig) -> Result<Manifest> {
    config.validate()?;
    let (corpus, _) = resolve_corpus(config)?;
    let labels = corpus
        .labels()
        .ok_or_else(|| Error::invalid("downstream prediction needs document labels"))?
        .to_vec();
    let dir = command_dir(config, "downstream")?;
    let mut manifest = Manifest::new("downstream");
    let split_seed = crate::stats::child_seed(config.seed, 0x73706c6974);
    let mut fits = Vec::new();
    for &k in &config.k {
        let reps = replications_for(config, &corpus, k)?;
        let models = fit_replications(&reps, &labels, config.holdout, split_seed)?;
        fits.push((k, reps, models));
    }
    let all: Vec<&TopicModel> = fits.iter().flat_map(|(_, r, _)| r.models.iter()).collect();
    let terms = select_prevalent_terms(
        &all,
        &corpus.term_frequencies(),
        config.prevalent_terms.min(corpus.vocab_size()),
        config.prevalent_top_n,
    );
    let names: Vec<&str> = terms.iter().map(|&t| corpus.vocabulary().term(t)).collect();
    let mut accuracy = Vec::new();
    for (k, reps, models) in &fits {
        let kdir = dir.join(format!("k{k}"));
        ensure_dir(&kdir)?;
        let summaries = word_weight_summary(reps, models, &terms)?;
        let files = [kdir.join("word_weights.csv"), kdir.join("models.json")];
        write_word_weights_csv(&files[0], &summaries, corpus.vocabulary())?;
        write_json(
            &files[1],
            &DownstreamRecord {
                k: *k,
                terms: names.clone(),
                models,
            },
        )?;
        record_all(&mut manifest, &dir, &files)?;
        accuracy.push((*k, accuracy_summary(models)));
    }
    let acc_path = dir.join("accuracy.csv");
    write_accuracy_csv(&acc_path, &accuracy)?;
    manifest.record(&dir, &acc_path)?;
    finish(manifest, &dir)
}

/// Reads a manifest written by any command.
pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    read_json(&dir.join("manifest.json"))
}
