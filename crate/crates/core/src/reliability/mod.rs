//! Internal-consistency reliability of replicated topic models.
//!
//! Every coefficient treats replications as the items of a test. A topic's
//! observations come from two sources: its document proportions (D x n) and
//! its word distribution (V x n). Source-level statistics are pooled with
//! weights proportional to the number of observations in each source.

mod bootstrap;
mod factor;

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::align::{cosine_similarity, Alignment, Matching, TopN, TopicGroup};
use crate::error::{Error, Result};
use crate::stats::{covariance_matrix, variance};

pub use bootstrap::{bootstrap_se, resample_groups, MIN_RESAMPLES};
pub use factor::{
    fit_single_factor_cov, initial_communalities, FactorSolution, MAX_ITERATIONS, TOLERANCE, UNIQUENESS_FLOOR,
};

pub const DEFAULT_CUTOFF: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    DocTopic,
    TopicWord,
}

/// N observations x n replications.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    data: DMatrix<f64>,
    source: Source,
}

impl ObservationMatrix {
    pub fn new(data: DMatrix<f64>, source: Source) -> Result<Self> {
        if data.ncols() < 2 {
            return Err(Error::invalid("need at least 2 replications"));
        }
        if data.nrows() < 3 {
            return Err(Error::invalid("need at least 3 observations"));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("observation matrix has non-finite entries"));
        }
        Ok(ObservationMatrix { data, source })
    }

    pub fn doc_side(group: &TopicGroup) -> Result<Self> {
        Self::new(group.theta_columns.clone(), Source::DocTopic)
    }

    pub fn word_side(group: &TopicGroup) -> Result<Self> {
        Self::new(group.word_observations(), Source::TopicWord)
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn num_observations(&self) -> usize {
        self.data.nrows()
    }

    pub fn num_replications(&self) -> usize {
        self.data.ncols()
    }

    /// First constant column, if any.
    pub fn constant_column(&self) -> Option<usize> {
        self.data.column_iter().position(|c| c.iter().all(|&x| x == c[0]))
    }

    fn require_varying(&self) -> Result<()> {
        match self.constant_column() {
            Some(j) => Err(Error::ConstantColumn(j)),
            None => Ok(()),
        }
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        covariance_matrix(&self.data)
    }

    pub fn moments(&self) -> SourceMoments {
        let s = self.covariance();
        let n = s.nrows();
        let v_bar = s.diagonal().mean();
        let off = s.sum() - s.trace();
        SourceMoments {
            v_bar,
            c_bar: off / (n * (n - 1)) as f64,
            n_obs: self.num_observations(),
        }
    }
}

/// Mean item variance and mean inter-item covariance of one source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SourceMoments {
    pub v_bar: f64,
    pub c_bar: f64,
    pub n_obs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PooledMoments {
    pub v_bar: f64,
    pub c_bar: f64,
    /// Document side, then word side.
    pub per_source: [SourceMoments; 2],
}

/// Cronbach's alpha from moments: n·c̄ / (v̄ + (n−1)·c̄).
pub fn alpha_from_moments(v_bar: f64, c_bar: f64, n: usize) -> Result<f64> {
    let n = n as f64;
    let denom = v_bar + (n - 1.0) * c_bar;
    if !denom.is_finite() || denom.abs() <= 1e-12 * v_bar.abs() {
        return Err(Error::Undefined("alpha"));
    }
    Ok(n * c_bar / denom)
}

pub fn cronbach_alpha(m: &ObservationMatrix) -> Result<f64> {
    m.require_varying()?;
    let mo = m.moments();
    alpha_from_moments(mo.v_bar, mo.c_bar, m.num_replications())
}

pub fn fit_single_factor(m: &ObservationMatrix) -> Result<FactorSolution> {
    m.require_varying()?;
    fit_single_factor_cov(&m.covariance())
}

/// (Σλ)² / ((Σλ)² + Σθ).
pub fn omega_from_solution(solution: &FactorSolution) -> f64 {
    let s = solution.loading_sum().powi(2);
    s / (s + solution.uniquenesses.iter().sum::<f64>())
}

pub fn mcdonald_omega(m: &ObservationMatrix) -> Result<f64> {
    Ok(omega_from_solution(&fit_single_factor(m)?))
}

/// Spearman–Brown prophecy n·r / (1 + (n−1)·r).
pub fn spearman_brown(r: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("Spearman-Brown needs n >= 1"));
    }
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::invalid(format!("Spearman-Brown needs 0 <= r <= 1, got {r}")));
    }
    if r == 1.0 {
        return Ok(1.0);
    }
    let n = n as f64;
    Ok(n * r / (1.0 + (n - 1.0) * r))
}

pub fn pool_estimates(doc_side: &ObservationMatrix, word_side: &ObservationMatrix) -> Result<PooledMoments> {
    if doc_side.num_replications() != word_side.num_replications() {
        return Err(Error::invalid("sources have different replication counts"));
    }
    Ok(pool_moments(doc_side.moments(), word_side.moments()))
}

pub fn pool_moments(doc: SourceMoments, word: SourceMoments) -> PooledMoments {
    let (wd, ww) = weights(doc.n_obs, word.n_obs);
    PooledMoments {
        v_bar: wd * doc.v_bar + ww * word.v_bar,
        c_bar: wd * doc.c_bar + ww * word.c_bar,
        per_source: [doc, word],
    }
}

fn weights(n_doc: usize, n_word: usize) -> (f64, f64) {
    let total = (n_doc + n_word) as f64;
    (n_doc as f64 / total, n_word as f64 / total)
}

fn retained(groups: &[TopicGroup], drop: usize) -> Result<Vec<&TopicGroup>> {
    if groups.len() < 2 {
        return Err(Error::invalid("multidimensional coefficients need K >= 2"));
    }
    if !groups.iter().any(|g| g.topic_id == drop) {
        return Err(Error::invalid(format!("no topic {drop} to drop")));
    }
    Ok(groups.iter().filter(|g| g.topic_id != drop).collect())
}

/// Replication-mean vector of each row.
fn composite(data: &DMatrix<f64>) -> Vec<f64> {
    data.column_mean().iter().copied().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopicAlpha {
    pub topic: usize,
    pub alpha: Option<f64>,
    pub alpha_doc: Option<f64>,
    pub alpha_word: Option<f64>,
    /// Pooled variance of the topic composite.
    pub composite_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratifiedAlpha {
    pub value: f64,
    pub total_variance: f64,
    pub per_topic: Vec<TopicAlpha>,
}

/// Stratified alpha over all topics except `drop`:
/// 1 − Σ σᵢ²(1 − αᵢ) / σ².
pub fn stratified_alpha_detail(groups: &[TopicGroup], drop: usize) -> Result<StratifiedAlpha> {
    let kept = retained(groups, drop)?;
    let n = kept[0].num_replications();
    let mut unreliable = 0.0;
    let mut per_topic = Vec::with_capacity(kept.len());
    let mut doc_sum = vec![0.0; kept[0].theta_columns.nrows()];
    let mut word_sum = vec![0.0; kept[0].phi_rows.ncols()];
    for g in &kept {
        let doc = ObservationMatrix::doc_side(g)?;
        let word = ObservationMatrix::word_side(g)?;
        let pooled = pool_estimates(&doc, &word)?;
        let sigma_i = (pooled.v_bar + (n as f64 - 1.0) * pooled.c_bar) / n as f64;
        let alpha = alpha_from_moments(pooled.v_bar, pooled.c_bar, n).ok();
        unreliable += match alpha {
            Some(a) => sigma_i * (1.0 - a),
            // σᵢ²(1 − αᵢ) reduces to (v̄ − c̄)/n
            None => (pooled.v_bar - pooled.c_bar) / n as f64,
        };
        let [d, w] = pooled.per_source;
        per_topic.push(TopicAlpha {
            topic: g.topic_id,
            alpha,
            alpha_doc: alpha_from_moments(d.v_bar, d.c_bar, n).ok(),
            alpha_word: alpha_from_moments(w.v_bar, w.c_bar, n).ok(),
            composite_variance: sigma_i,
        });
        for (s, c) in doc_sum.iter_mut().zip(composite(&g.theta_columns)) {
            *s += c;
        }
        for (s, c) in word_sum.iter_mut().zip(composite(&g.word_observations())) {
            *s += c;
        }
    }
    let (wd, ww) = weights(doc_sum.len(), word_sum.len());
    let total_variance = wd * variance(&doc_sum) + ww * variance(&word_sum);
    if !(total_variance.abs() > 0.0) {
        return Err(Error::Undefined("stratified alpha"));
    }
    Ok(StratifiedAlpha {
        value: 1.0 - unreliable / total_variance,
        total_variance,
        per_topic,
    })
}

pub fn stratified_alpha(groups: &[TopicGroup], drop: usize) -> Result<f64> {
    Ok(stratified_alpha_detail(groups, drop)?.value)
}

/// Whether multivariate omega pools per-source coefficients or pooled
/// covariance matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    #[default]
    Coefficient,
    Moments,
}

/// 1'λλ'1 / σ²_X with σ²_X the sum of all covariance entries.
pub fn omega_total(cov: &DMatrix<f64>) -> Result<f64> {
    let total = cov.sum();
    if !(total > 0.0) {
        return Err(Error::Undefined("omega"));
    }
    let sol = fit_single_factor_cov(cov)?;
    Ok(sol.loading_sum().powi(2) / total)
}

pub fn source_omega(m: &ObservationMatrix) -> Result<f64> {
    m.require_varying()?;
    omega_total(&m.covariance())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopicOmega {
    pub topic: usize,
    pub omega: Option<f64>,
    pub omega_doc: Option<f64>,
    pub omega_word: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultivariateOmega {
    pub value: f64,
    pub pooling: Pooling,
    pub per_topic: Vec<TopicOmega>,
    /// Topics whose factor fits failed.
    pub excluded: Vec<usize>,
}

fn topic_omega(g: &TopicGroup, pooling: Pooling) -> Result<(f64, Option<f64>, Option<f64>)> {
    let doc = ObservationMatrix::doc_side(g)?;
    let word = ObservationMatrix::word_side(g)?;
    let (wd, ww) = weights(doc.num_observations(), word.num_observations());
    match pooling {
        Pooling::Coefficient => {
            let od = source_omega(&doc)?;
            let ow = source_omega(&word)?;
            Ok((wd * od + ww * ow, Some(od), Some(ow)))
        }
        Pooling::Moments => {
            doc.require_varying()?;
            word.require_varying()?;
            let cov = doc.covariance() * wd + word.covariance() * ww;
            Ok((omega_total(&cov)?, source_omega(&doc).ok(), source_omega(&word).ok()))
        }
    }
}

/// Per retained topic omega pooled over the two sources, combined across
/// topics by an observation-weighted mean. Topics whose fit fails are
/// excluded and listed.
pub fn multivariate_omega_detail(groups: &[TopicGroup], drop: usize, pooling: Pooling) -> Result<MultivariateOmega> {
    let kept = retained(groups, drop)?;
    let mut per_topic = Vec::with_capacity(kept.len());
    let mut excluded = Vec::new();
    let (mut acc, mut weight) = (0.0, 0.0);
    for g in kept {
        match topic_omega(g, pooling) {
            Ok((omega, omega_doc, omega_word)) => {
                let w = (g.theta_columns.nrows() + g.phi_rows.ncols()) as f64;
                acc += w * omega;
                weight += w;
                per_topic.push(TopicOmega {
                    topic: g.topic_id,
                    omega: Some(omega),
                    omega_doc,
                    omega_word,
                    error: None,
                });
            }
            Err(e) => {
                log::warn!("omega for topic {} excluded: {e}", g.topic_id);
                excluded.push(g.topic_id);
                per_topic.push(TopicOmega {
                    topic: g.topic_id,
                    omega: None,
                    omega_doc: None,
                    omega_word: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    if weight == 0.0 {
        return Err(Error::Numerical("every topic's factor fit failed".into()));
    }
    Ok(MultivariateOmega {
        value: acc / weight,
        pooling,
        per_topic,
        excluded,
    })
}

pub fn multivariate_omega(groups: &[TopicGroup], drop: usize) -> Result<f64> {
    Ok(multivariate_omega_detail(groups, drop, Pooling::Coefficient)?.value)
}

fn mean_pairwise_cosine(vectors: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for a in 0..vectors.len() {
        for b in a + 1..vectors.len() {
            total += cosine_similarity(&vectors[a], &vectors[b])?;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

fn columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopicSimilarity {
    pub topic: usize,
    pub r: f64,
    pub r_doc: f64,
    pub r_word: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaximalReliability {
    pub value: f64,
    pub rho: f64,
    pub per_topic: Vec<TopicSimilarity>,
}

/// rᵢ of one topic: mean pairwise cosine across replications, averaged over
/// the document side and the word side.
pub fn topic_similarity(g: &TopicGroup) -> Result<TopicSimilarity> {
    if g.num_replications() < 2 {
        return Err(Error::invalid("need at least 2 replications"));
    }
    let r_doc = mean_pairwise_cosine(&columns(&g.theta_columns))?;
    let r_word = mean_pairwise_cosine(&rows(&g.phi_rows))?;
    Ok(TopicSimilarity {
        topic: g.topic_id,
        r: (r_doc + r_word) / 2.0,
        r_doc,
        r_word,
    })
}

/// Maximal reliability from per-topic similarities rᵢ, replication counts
/// nᵢ and the common inter-topic similarity ρ.
pub fn maximal_reliability_from(r: &[f64], n: &[usize], rho: f64) -> Result<f64> {
    if r.is_empty() || r.len() != n.len() {
        return Err(Error::invalid("need one replication count per topic"));
    }
    let k = r.len() as f64;
    let mut signal = 0.0;
    for (&ri, &ni) in r.iter().zip(n) {
        if !(0.0..=1.0).contains(&ri) {
            return Err(Error::invalid(format!("topic similarity {ri} outside [0, 1]")));
        }
        if ri >= 1.0 - 1e-12 {
            // Spearman–Brown limit: a perfectly reliable topic dominates.
            return Ok(1.0);
        }
        signal += ni as f64 * ri / (1.0 - ri);
    }
    let noise = if r.len() == 1 { 1.0 } else { k / (1.0 + (k - 1.0) * rho) };
    Ok(signal / (noise + signal))
}

pub fn maximal_reliability_detail(groups: &[TopicGroup], alignment: &Alignment) -> Result<MaximalReliability> {
    if groups.is_empty() {
        return Err(Error::invalid("no topic groups"));
    }
    if let Some(g) = groups
        .iter()
        .find(|g| g.num_replications() != alignment.num_replications())
    {
        return Err(Error::invalid(format!(
            "topic {} has {} replications but the alignment covers {}",
            g.topic_id,
            g.num_replications(),
            alignment.num_replications()
        )));
    }
    let per_topic = groups.iter().map(topic_similarity).collect::<Result<Vec<_>>>()?;
    let doc_comp: Vec<Vec<f64>> = groups.iter().map(|g| composite(&g.theta_columns)).collect();
    let word_comp: Vec<Vec<f64>> = groups.iter().map(|g| composite(&g.word_observations())).collect();
    let mut rho = 0.0;
    let mut pairs = 0usize;
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            rho += (cosine_similarity(&doc_comp[i], &doc_comp[j])? + cosine_similarity(&word_comp[i], &word_comp[j])?)
                / 2.0;
            pairs += 1;
        }
    }
    if pairs > 0 {
        rho /= pairs as f64;
    }
    let r: Vec<f64> = per_topic.iter().map(|t| t.r).collect();
    let n: Vec<usize> = groups.iter().map(TopicGroup::num_replications).collect();
    Ok(MaximalReliability {
        value: maximal_reliability_from(&r, &n, rho)?,
        rho,
        per_topic,
    })
}

pub fn maximal_reliability(groups: &[TopicGroup], alignment: &Alignment) -> Result<f64> {
    Ok(maximal_reliability_detail(groups, alignment)?.value)
}

/// Share of matched (replication, topic) pairs whose similarity exceeds
/// `cutoff`.
pub fn standard_practice_reliability(alignment: &Alignment, cutoff: f64) -> Result<f64> {
    proportion_above(&alignment.all_matched_similarities(), cutoff)
}

pub fn proportion_above(similarities: &[f64], cutoff: f64) -> Result<f64> {
    if similarities.is_empty() {
        return Err(Error::invalid("no matched similarities"));
    }
    let above = similarities.iter().filter(|&&s| s > cutoff).count();
    Ok(above as f64 / similarities.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interpretation {
    Excellent,
    Good,
    Acceptable,
    Questionable,
    Poor,
    Unacceptable,
    #[serde(rename = "Out of range")]
    OutOfRange,
}

impl fmt::Display for Interpretation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Interpretation::Excellent => "Excellent",
            Interpretation::Good => "Good",
            Interpretation::Acceptable => "Acceptable",
            Interpretation::Questionable => "Questionable",
            Interpretation::Poor => "Poor",
            Interpretation::Unacceptable => "Unacceptable",
            Interpretation::OutOfRange => "Out of range",
        })
    }
}

/// Rounding slack above 1 still labelled as in range.
const LABEL_SLACK: f64 = 1e-9;

/// Rule-of-thumb label. Values outside [0, 1] are never clipped.
pub fn interpret_reliability(value: f64) -> Interpretation {
    match value {
        v if !(0.0..=1.0 + LABEL_SLACK).contains(&v) => Interpretation::OutOfRange,
        v if v > 0.9 => Interpretation::Excellent,
        v if v > 0.8 => Interpretation::Good,
        v if v > 0.7 => Interpretation::Acceptable,
        v if v > 0.6 => Interpretation::Questionable,
        v if v > 0.5 => Interpretation::Poor,
        _ => Interpretation::Unacceptable,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Labeled {
    pub value: f64,
    pub label: Interpretation,
}

impl Labeled {
    pub fn new(value: f64) -> Self {
        Labeled {
            value,
            label: interpret_reliability(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficients {
    pub standard_practice: Labeled,
    pub stratified_alpha: Option<Labeled>,
    pub multivariate_omega: Option<Labeled>,
    pub maximal_reliability: Option<Labeled>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct StandardErrors {
    pub stratified_alpha: Option<f64>,
    pub multivariate_omega: Option<f64>,
    pub maximal_reliability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopicDetail {
    pub topic: usize,
    pub alpha: Option<f64>,
    pub omega: Option<f64>,
    pub r: Option<f64>,
    pub alpha_doc: Option<f64>,
    pub alpha_word: Option<f64>,
    pub omega_doc: Option<f64>,
    pub omega_word: Option<f64>,
    pub r_doc: Option<f64>,
    pub r_word: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub seeds: Vec<u64>,
    pub k: usize,
    pub n_reps: usize,
    pub top_n: TopN,
    pub matching: Matching,
    pub reference_index: usize,
    pub dropped_topic: usize,
    pub cutoff: f64,
    pub pooling: Pooling,
    pub bootstrap_resamples: usize,
    pub corpus_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReliabilityReport {
    pub coefficients: Coefficients,
    pub standard_errors: StandardErrors,
    pub per_topic: Vec<TopicDetail>,
    /// Messages for coefficients that could not be computed.
    pub failures: Vec<String>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportSettings {
    pub cutoff: f64,
    /// Topic left out of the multidimensional coefficients; defaults to the
    /// last reference topic.
    pub drop_topic: Option<usize>,
    pub pooling: Pooling,
    /// Zero skips standard errors.
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
}

impl Default for ReportSettings {
    fn default() -> Self {
        ReportSettings {
            cutoff: DEFAULT_CUTOFF,
            drop_topic: None,
            pooling: Pooling::Coefficient,
            bootstrap_resamples: 0,
            bootstrap_seed: 0,
        }
    }
}

/// All four coefficients with labels, bootstrap standard errors and
/// per-topic detail. Maximal reliability uses the retained topics only, so
/// a two-topic model reports the unidimensional values throughout.
pub fn reliability_report(
    groups: &[TopicGroup],
    alignment: &Alignment,
    seeds: &[u64],
    corpus_digest: &str,
    settings: &ReportSettings,
) -> Result<ReliabilityReport> {
    let k = groups.len();
    let drop = settings.drop_topic.unwrap_or(k.saturating_sub(1));
    let kept: Vec<TopicGroup> = groups.iter().filter(|g| g.topic_id != drop).cloned().collect();
    let mut failures = Vec::new();
    let mut note = |what: &str, e: &Error| failures.push(format!("{what}: {e}"));

    let standard_practice = Labeled::new(standard_practice_reliability(alignment, settings.cutoff)?);
    let alpha = stratified_alpha_detail(groups, drop)
        .map_err(|e| note("stratified alpha", &e))
        .ok();
    let omega = multivariate_omega_detail(groups, drop, settings.pooling)
        .map_err(|e| note("multivariate omega", &e))
        .ok();
    let maximal = maximal_reliability_detail(&kept, alignment)
        .map_err(|e| note("maximal reliability", &e))
        .ok();

    let mut standard_errors = StandardErrors::default();
    if settings.bootstrap_resamples > 0 {
        let (b, seed) = (settings.bootstrap_resamples, settings.bootstrap_seed);
        let pooling = settings.pooling;
        if alpha.is_some() {
            standard_errors.stratified_alpha = bootstrap_se(|g| stratified_alpha(g, drop), groups, b, seed)
                .map_err(|e| note("stratified alpha SE", &e))
                .ok();
        }
        if omega.is_some() {
            standard_errors.multivariate_omega = bootstrap_se(
                |g| Ok(multivariate_omega_detail(g, drop, pooling)?.value),
                groups,
                b,
                seed,
            )
            .map_err(|e| note("multivariate omega SE", &e))
            .ok();
        }
        if maximal.is_some() {
            standard_errors.maximal_reliability = bootstrap_se(|g| maximal_reliability(g, alignment), &kept, b, seed)
                .map_err(|e| note("maximal reliability SE", &e))
                .ok();
        }
    }

    let per_topic = kept
        .iter()
        .map(|g| {
            let a = alpha
                .as_ref()
                .and_then(|a| a.per_topic.iter().find(|t| t.topic == g.topic_id));
            let o = omega
                .as_ref()
                .and_then(|o| o.per_topic.iter().find(|t| t.topic == g.topic_id));
            let r = maximal
                .as_ref()
                .and_then(|m| m.per_topic.iter().find(|t| t.topic == g.topic_id));
            TopicDetail {
                topic: g.topic_id,
                alpha: a.and_then(|a| a.alpha),
                omega: o.and_then(|o| o.omega),
                r: r.map(|r| r.r),
                alpha_doc: a.and_then(|a| a.alpha_doc),
                alpha_word: a.and_then(|a| a.alpha_word),
                omega_doc: o.and_then(|o| o.omega_doc),
                omega_word: o.and_then(|o| o.omega_word),
                r_doc: r.map(|r| r.r_doc),
                r_word: r.map(|r| r.r_word),
            }
        })
        .collect();

    Ok(ReliabilityReport {
        coefficients: Coefficients {
            standard_practice,
            stratified_alpha: alpha.map(|a| Labeled::new(a.value)),
            multivariate_omega: omega.map(|o| Labeled::new(o.value)),
            maximal_reliability: maximal.map(|m| Labeled::new(m.value)),
        },
        standard_errors,
        per_topic,
        failures,
        provenance: Provenance {
            seeds: seeds.to_vec(),
            k,
            n_reps: alignment.num_replications(),
            top_n: alignment.top_n,
            matching: alignment.matching,
            reference_index: alignment.reference_index,
            dropped_topic: drop,
            cutoff: settings.cutoff,
            pooling: settings.pooling,
            bootstrap_resamples: settings.bootstrap_resamples,
            corpus_digest: corpus_digest.to_owned(),
        },
    })
}

impl ReliabilityReport {
    /// Writes `topic,alpha,omega,r,` followed by the per-source columns.
    pub fn write_topic_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "topic",
            "alpha",
            "omega",
            "r",
            "alpha_doc",
            "alpha_word",
            "omega_doc",
            "omega_word",
            "r_doc",
            "r_word",
        ])?;
        let cell = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for t in &self.per_topic {
            w.write_record([
                t.topic.to_string(),
                cell(t.alpha),
                cell(t.omega),
                cell(t.r),
                cell(t.alpha_doc),
                cell(t.alpha_word),
                cell(t.omega_doc),
                cell(t.omega_word),
                cell(t.r_doc),
                cell(t.r_word),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
