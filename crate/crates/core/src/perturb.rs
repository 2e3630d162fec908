//! Word-removal sensitivity study.
//!
//! Each replication is fitted on its own perturbed corpus (a distinct set of
//! removed terms). In fixed mode every fit shares one LDA seed, so at zero
//! removals the replications are identical; in varied mode the LDA seeds
//! differ too.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{align_topics, build_topic_groups, Matching, TopN};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::lda::{fit_lda, LdaConfig, ReplicationSet, TopicModel};
use crate::reliability::{
    maximal_reliability, multivariate_omega_detail, standard_practice_reliability, stratified_alpha, Pooling,
};
use crate::stats::child_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbMode {
    Fixed,
    Varied,
}

impl fmt::Display for PerturbMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PerturbMode::Fixed => "fixed",
            PerturbMode::Varied => "varied",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    StandardPractice,
    StratifiedAlpha,
    MultivariateOmega,
    MaximalReliability,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::StandardPractice,
        Metric::StratifiedAlpha,
        Metric::MultivariateOmega,
        Metric::MaximalReliability,
    ];
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::StandardPractice => "standard_practice",
            Metric::StratifiedAlpha => "stratified_alpha",
            Metric::MultivariateOmega => "multivariate_omega",
            Metric::MaximalReliability => "maximal_reliability",
        })
    }
}

/// Settings shared by alignment and scoring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreSettings {
    pub top_n: TopN,
    pub matching: Matching,
    pub cutoff: f64,
    pub pooling: Pooling,
}

impl Default for ScoreSettings {
    fn default() -> Self {
        ScoreSettings {
            top_n: TopN::default(),
            matching: Matching::Greedy,
            cutoff: crate::reliability::DEFAULT_CUTOFF,
            pooling: Pooling::Coefficient,
        }
    }
}

/// The four headline metrics for one replication set, reference 0 and the
/// last topic dropped. Failures are kept per metric.
pub fn score_replications(reps: &ReplicationSet, settings: &ScoreSettings) -> Result<Vec<(Metric, Result<f64>)>> {
    let alignment = align_topics(reps, 0, settings.top_n, settings.matching)?;
    let groups = build_topic_groups(reps, &alignment)?;
    let drop = reps.k() - 1;
    let kept: Vec<_> = groups.iter().filter(|g| g.topic_id != drop).cloned().collect();
    Ok(Metric::ALL
        .iter()
        .map(|&m| {
            let value = match m {
                Metric::StandardPractice => standard_practice_reliability(&alignment, settings.cutoff),
                Metric::StratifiedAlpha => stratified_alpha(&groups, drop),
                Metric::MultivariateOmega => {
                    multivariate_omega_detail(&groups, drop, settings.pooling).map(|o| o.value)
                }
                Metric::MaximalReliability => maximal_reliability(&kept, &alignment),
            };
            (m, value)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbSettings {
    pub lda: LdaConfig,
    pub n_reps: usize,
    pub schedule: Vec<usize>,
    pub modes: Vec<PerturbMode>,
    pub master_seed: u64,
    pub score: ScoreSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbRow {
    pub mode: PerturbMode,
    pub removed: usize,
    pub metric: Metric,
    pub value: Option<f64>,
    pub error: Option<String>,
}

fn removal_seed(master: u64, removed: usize, rep: usize) -> u64 {
    child_seed(child_seed(master ^ 0x7265_6d6f_7665, removed as u64), rep as u64)
}

/// Re-expresses a model fitted on a reduced corpus in the parent's terms
/// and the given documents. Removed terms get probability zero.
fn lift(model: &TopicModel, parent: &Corpus, child: &Corpus, docs: &[String]) -> TopicModel {
    let k = model.k();
    let mut phi = DMatrix::zeros(k, parent.vocab_size());
    for (cid, term) in child.vocabulary().terms().iter().enumerate() {
        let pid = parent.vocabulary().id(term).expect("child terms come from the parent");
        phi.set_column(pid, &model.phi.column(cid));
    }
    let row_of: HashMap<&str, usize> = child
        .doc_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let theta = DMatrix::from_fn(docs.len(), k, |i, t| model.theta[(row_of[docs[i].as_str()], t)]);
    TopicModel {
        phi,
        theta,
        config: model.config,
        log_likelihood_trace: model.log_likelihood_trace.clone(),
    }
}

/// Fits the perturbed replications for one (mode, removal count) cell and
/// returns them lifted onto the documents every replication kept.
pub fn perturbed_replications(
    corpus: &Corpus,
    settings: &PerturbSettings,
    mode: PerturbMode,
    removed: usize,
) -> Result<ReplicationSet> {
    let fits = (0..settings.n_reps)
        .into_par_iter()
        .map(|r| {
            let reduced = corpus.remove_words(removed, removal_seed(settings.master_seed, removed, r))?;
            let seed = match mode {
                PerturbMode::Fixed => settings.master_seed,
                PerturbMode::Varied => child_seed(settings.master_seed, r as u64),
            };
            let model = fit_lda(&reduced.corpus, &settings.lda.with_seed(seed))?;
            Ok((reduced.corpus, model))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut common: Vec<String> = corpus.doc_ids().to_vec();
    for (c, _) in &fits {
        let present: std::collections::HashSet<&str> = c.doc_ids().iter().map(String::as_str).collect();
        common.retain(|id| present.contains(id.as_str()));
    }
    if common.len() < 3 {
        return Err(Error::invalid(format!(
            "only {} documents survive every removal",
            common.len()
        )));
    }
    let models = fits.iter().map(|(c, m)| lift(m, corpus, c, &common)).collect();
    ReplicationSet::new(models, corpus.digest())
}

/// One row per (mode, removal count, metric), in schedule order.
pub fn run_perturbation(corpus: &Corpus, settings: &PerturbSettings) -> Result<Vec<PerturbRow>> {
    if settings.n_reps < 2 {
        return Err(Error::invalid("reliability requires ≥ 2 replications"));
    }
    settings.lda.validate()?;
    if let Some(&n) = settings.schedule.iter().find(|&&n| n >= corpus.vocab_size()) {
        return Err(Error::invalid(format!(
            "removal count {n} must be below the vocabulary size {}",
            corpus.vocab_size()
        )));
    }
    let mut rows = Vec::new();
    for &mode in &settings.modes {
        for &removed in &settings.schedule {
            let reps = perturbed_replications(corpus, settings, mode, removed)?;
            for (metric, value) in score_replications(&reps, &settings.score)? {
                let (value, error) = match value {
                    Ok(v) => (Some(v), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                rows.push(PerturbRow {
                    mode,
                    removed,
                    metric,
                    value,
                    error,
                });
            }
        }
    }
    Ok(rows)
}

/// `mode,removed,metric,value`; failed cells have an empty value.
pub fn write_perturb_csv(path: &Path, rows: &[PerturbRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["mode", "removed", "metric", "value"])?;
    for r in rows {
        w.write_record([
            r.mode.to_string(),
            r.removed.to_string(),
            r.metric.to_string(),
            r.value.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
