//! Topic alignment across replications.
//!
//! Topics are matched to a reference replication by cosine similarity of
//! their topic–word vectors, optionally restricted to each pair's top words.
//! The default matcher repeatedly takes the globally most similar unmatched
//! pair; an optimal assignment is available for sensitivity checks.

use std::cmp::Ordering;
use std::path::Path;

use nalgebra::DMatrix;
use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lda::{ReplicationSet, TopicModel};

/// Number of top words per vector considered when matching, or all of them.
/// Serialized as a number or the string `"all"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopN {
    Count(usize),
    All,
}

impl Default for TopN {
    fn default() -> Self {
        TopN::Count(50)
    }
}

impl TopN {
    /// `All` when the count covers the whole vocabulary.
    pub fn fit_to(self, vocab_size: usize) -> TopN {
        match self {
            TopN::Count(n) if n >= vocab_size => TopN::All,
            other => other,
        }
    }
}

impl Serialize for TopN {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TopN::Count(n) => s.serialize_u64(*n as u64),
            TopN::All => s.serialize_str("all"),
        }
    }
}

impl<'de> Deserialize<'de> for TopN {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(usize),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(n) => Ok(TopN::Count(n)),
            Raw::Word(w) if w == "all" => Ok(TopN::All),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "top_n must be a count or \"all\", got {w:?}"
            ))),
        }
    }
}

impl std::str::FromStr for TopN {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(TopN::All);
        }
        s.parse()
            .map(TopN::Count)
            .map_err(|_| Error::invalid(format!("bad top_n {s:?}")))
    }
}

impl std::fmt::Display for TopN {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TopN::Count(n) => write!(f, "{n}"),
            TopN::All => f.write_str("all"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Matching {
    #[default]
    Greedy,
    Hungarian,
}

pub fn cosine_similarity(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid("vectors differ in length"));
    }
    let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        xy += a * b;
        xx += a * a;
        yy += b * b;
    }
    if xx == 0.0 || yy == 0.0 {
        return Err(Error::invalid("cosine similarity of a zero vector"));
    }
    Ok((xy / (xx.sqrt() * yy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation: the cosine similarity of the centred vectors.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid("vectors differ in length"));
    }
    if x.len() < 2 {
        return Err(Error::invalid("correlation needs at least two points"));
    }
    let (mx, my) = (crate::stats::mean(x), crate::stats::mean(y));
    let cx: Vec<f64> = x.iter().map(|a| a - mx).collect();
    let cy: Vec<f64> = y.iter().map(|b| b - my).collect();
    cosine_similarity(&cx, &cy).map_err(|_| Error::invalid("correlation with zero variance"))
}

/// Cosine over the union of both vectors' `top_n` largest entries.
pub fn top_n_cosine(x: &[f64], y: &[f64], top_n: TopN) -> Result<f64> {
    let n = match top_n {
        TopN::All => return cosine_similarity(x, y),
        TopN::Count(n) if n >= x.len() => return cosine_similarity(x, y),
        TopN::Count(n) => n,
    };
    let mut keep = vec![false; x.len()];
    for v in [x, y] {
        for i in top_indices(v, n) {
            keep[i] = true;
        }
    }
    let (rx, ry): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .zip(&keep)
        .map(|((&a, &b), &k)| if k { (a, b) } else { (0.0, 0.0) })
        .unzip();
    cosine_similarity(&rx, &ry)
}

fn top_indices(v: &[f64], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx.truncate(n);
    idx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub reference_index: usize,
    /// Replication index of each mapping below, excluding the reference.
    pub replications: Vec<usize>,
    /// `mappings[i][k]` is the topic in `replications[i]` matched to
    /// reference topic `k`.
    pub mappings: Vec<Vec<usize>>,
    /// Cosine of each matched pair, same layout as `mappings`.
    pub matched_similarities: Vec<Vec<f64>>,
    pub top_n: TopN,
    pub matching: Matching,
}

impl Alignment {
    pub fn k(&self) -> usize {
        self.mappings.first().map_or(0, Vec::len)
    }

    pub fn num_replications(&self) -> usize {
        self.replications.len() + 1
    }

    /// Topic of replication `rep` that corresponds to reference topic `k`.
    pub fn topic_in(&self, rep: usize, k: usize) -> usize {
        if rep == self.reference_index {
            return k;
        }
        let i = self
            .replications
            .iter()
            .position(|&r| r == rep)
            .expect("replication covered by alignment");
        self.mappings[i][k]
    }

    pub fn all_matched_similarities(&self) -> Vec<f64> {
        self.matched_similarities.iter().flatten().copied().collect()
    }

    /// Writes `replication,ref_topic,matched_topic,cosine` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["replication", "ref_topic", "matched_topic", "cosine"])?;
        for ((rep, map), sims) in self
            .replications
            .iter()
            .zip(&self.mappings)
            .zip(&self.matched_similarities)
        {
            for (k, (&m, &s)) in map.iter().zip(sims).enumerate() {
                w.write_record([rep.to_string(), k.to_string(), m.to_string(), s.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn similarity_matrix(reference: &TopicModel, other: &TopicModel, top_n: TopN) -> Result<DMatrix<f64>> {
    let k = reference.k();
    let rows: Vec<Vec<f64>> = (0..k).map(|i| reference.phi.row(i).iter().copied().collect()).collect();
    let cols: Vec<Vec<f64>> = (0..k).map(|j| other.phi.row(j).iter().copied().collect()).collect();
    let mut sim = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            sim[(i, j)] = top_n_cosine(&rows[i], &cols[j], top_n)?;
        }
    }
    Ok(sim)
}

/// Pairs rows to columns by repeatedly taking the largest remaining entry.
/// Ties go to the lowest (row, column).
pub fn greedy_match(sim: &DMatrix<f64>) -> Vec<usize> {
    let k = sim.nrows();
    let mut pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).collect();
    pairs.sort_by(|&(a, b), &(c, d)| sim[(c, d)].total_cmp(&sim[(a, b)]).then_with(|| (a, b).cmp(&(c, d))));
    let mut mapping = vec![usize::MAX; k];
    let mut used = vec![false; k];
    let mut left = k;
    for (i, j) in pairs {
        if left == 0 {
            break;
        }
        if mapping[i] == usize::MAX && !used[j] {
            mapping[i] = j;
            used[j] = true;
            left -= 1;
        }
    }
    mapping
}

/// Assignment maximizing total similarity.
pub fn hungarian_match(sim: &DMatrix<f64>) -> Vec<usize> {
    const SCALE: f64 = 1e12;
    let k = sim.nrows();
    let weights = Matrix::from_fn(k, k, |(i, j)| (sim[(i, j)] * SCALE).round() as i64);
    kuhn_munkres(&weights).1
}

pub fn align_topics(
    reps: &ReplicationSet,
    reference_index: usize,
    top_n: TopN,
    matching: Matching,
) -> Result<Alignment> {
    if reference_index >= reps.len() {
        return Err(Error::invalid(format!(
            "reference replication {reference_index} out of range"
        )));
    }
    if let TopN::Count(n) = top_n {
        if n == 0 || n > reps.vocab_size() {
            return Err(Error::invalid(format!(
                "top_n must be in 1..={}, got {n}",
                reps.vocab_size()
            )));
        }
    }
    let reference = &reps.models[reference_index];
    let mut out = Alignment {
        reference_index,
        replications: Vec::new(),
        mappings: Vec::new(),
        matched_similarities: Vec::new(),
        top_n,
        matching,
    };
    for (r, model) in reps.models.iter().enumerate() {
        if r == reference_index {
            continue;
        }
        let sim = similarity_matrix(reference, model, top_n)?;
        let mapping = match matching {
            Matching::Greedy => greedy_match(&sim),
            Matching::Hungarian => hungarian_match(&sim),
        };
        out.matched_similarities
            .push(mapping.iter().enumerate().map(|(i, &j)| sim[(i, j)]).collect());
        out.mappings.push(mapping);
        out.replications.push(r);
    }
    Ok(out)
}

/// One reference topic's matched columns across all replications.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicGroup {
    pub topic_id: usize,
    /// D x n: the matched topic's document proportions per replication.
    pub theta_columns: DMatrix<f64>,
    /// n x V: the matched topic's word distribution per replication.
    pub phi_rows: DMatrix<f64>,
}

impl TopicGroup {
    pub fn num_replications(&self) -> usize {
        self.theta_columns.ncols()
    }

    /// The word side as a V x n observation matrix.
    pub fn word_observations(&self) -> DMatrix<f64> {
        self.phi_rows.transpose()
    }
}

/// Stacks each reference topic's matched θ columns and φ rows, replications
/// in index order.
pub fn build_topic_groups(reps: &ReplicationSet, alignment: &Alignment) -> Result<Vec<TopicGroup>> {
    if alignment.num_replications() != reps.len() || alignment.k() != reps.k() {
        return Err(Error::invalid("alignment does not match the replication set"));
    }
    let (n, d, v) = (reps.len(), reps.num_docs(), reps.vocab_size());
    Ok((0..reps.k())
        .map(|k| {
            let mut theta_columns = DMatrix::zeros(d, n);
            let mut phi_rows = DMatrix::zeros(n, v);
            for (r, model) in reps.models.iter().enumerate() {
                let t = alignment.topic_in(r, k);
                theta_columns.set_column(r, &model.theta.column(t));
                phi_rows.set_row(r, &model.phi.row(t));
            }
            TopicGroup {
                topic_id: k,
                theta_columns,
                phi_rows,
            }
        })
        .collect())
}

/// Per reference topic and non-reference replication: the best similarity
/// over all candidate topics (`full`) and the similarity of the enforced
/// one-to-one match (`matched`). Both are laid out replication-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineDistributions {
    pub full: Vec<f64>,
    pub matched: Vec<f64>,
}

pub fn cosine_distributions(reps: &ReplicationSet, alignment: &Alignment, top_n: TopN) -> Result<CosineDistributions> {
    let reference = &reps.models[alignment.reference_index];
    let mut full = Vec::new();
    let mut matched = Vec::new();
    for (i, &r) in alignment.replications.iter().enumerate() {
        let sim = similarity_matrix(reference, &reps.models[r], top_n)?;
        for k in 0..sim.nrows() {
            let best = sim.row(k).iter().copied().fold(f64::NEG_INFINITY, f64::max);
            full.push(best);
            matched.push(sim[(k, alignment.mappings[i][k])]);
        }
    }
    Ok(CosineDistributions { full, matched })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrexTerm {
    pub term: usize,
    pub score: f64,
}

/// Within-topic empirical CDF: share of entries less than or equal to each.
fn ecdf(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .iter()
        .map(|x| sorted.partition_point(|s| s <= x) as f64 / n)
        .collect()
}

/// Frequent-and-exclusive ranking: the weighted harmonic mean of a term's
/// exclusivity ECDF and frequency ECDF within the topic.
pub fn frex_words(model: &TopicModel, topic: usize, weight: f64, top_n: usize) -> Result<Vec<FrexTerm>> {
    if topic >= model.k() {
        return Err(Error::invalid(format!("topic {topic} out of range")));
    }
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::invalid("FREX weight must be in [0, 1]"));
    }
    let freq: Vec<f64> = model.phi.row(topic).iter().copied().collect();
    let column_sums = model.phi.row_sum();
    let excl: Vec<f64> = freq
        .iter()
        .zip(column_sums.iter())
        .map(|(p, s)| if *s > 0.0 { p / s } else { 0.0 })
        .collect();
    let (fe, ee) = (ecdf(&freq), ecdf(&excl));
    let mut scored: Vec<FrexTerm> = (0..freq.len())
        .map(|t| FrexTerm {
            term: t,
            score: 1.0 / (weight / ee[t] + (1.0 - weight) / fe[t]),
        })
        .collect();
    scored.sort_by(|a, b| match b.score.total_cmp(&a.score) {
        Ordering::Equal => a.term.cmp(&b.term),
        o => o,
    });
    scored.truncate(top_n);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lda::LdaConfig;

    fn model(phi: DMatrix<f64>, theta: DMatrix<f64>) -> TopicModel {
        TopicModel {
            config: LdaConfig::new(phi.nrows().max(2)),
            phi,
            theta,
            log_likelihood_trace: vec![],
        }
    }

    fn permuted(m: &TopicModel, sigma: &[usize]) -> TopicModel {
        // new topic sigma[k] holds old topic k
        let mut phi = m.phi.clone();
        let mut theta = m.theta.clone();
        for (k, &s) in sigma.iter().enumerate() {
            phi.set_row(s, &m.phi.row(k));
            theta.set_column(s, &m.theta.column(k));
        }
        model(phi, theta)
    }

    fn three_topics() -> TopicModel {
        let phi = DMatrix::from_row_slice(3, 4, &[0.7, 0.1, 0.1, 0.1, 0.1, 0.6, 0.2, 0.1, 0.05, 0.05, 0.3, 0.6]);
        let theta = DMatrix::from_row_slice(2, 3, &[0.2, 0.3, 0.5, 0.6, 0.3, 0.1]);
        model(phi, theta)
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&[0.5, 0.5], &[0.5, 0.5]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let s = cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((s - 0.70711).abs() < 1e-5);
        assert!(cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn pearson_examples() {
        let p = |x: &[f64], y: &[f64]| pearson_correlation(x, y).unwrap();
        assert!((p(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-12);
        assert!((p(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert!((p(&[0.0, 1.0, 2.0], &[0.0, 2.0, 1.0]) - 0.5).abs() < 1e-12);
        assert!(pearson_correlation(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn identical_models_align_to_identity() {
        let m = three_topics();
        let set = ReplicationSet::new(vec![m.clone(), m], "x".into()).unwrap();
        let a = align_topics(&set, 0, TopN::All, Matching::Greedy).unwrap();
        assert_eq!(a.mappings, vec![vec![0, 1, 2]]);
        let total: f64 = a.all_matched_similarities().iter().sum();
        assert!((total - 3.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_known_permutation() {
        let m = three_topics();
        let sigma = [2, 0, 1];
        let set = ReplicationSet::new(vec![m.clone(), permuted(&m, &sigma)], "x".into()).unwrap();
        for matching in [Matching::Greedy, Matching::Hungarian] {
            let a = align_topics(&set, 0, TopN::Count(2), matching).unwrap();
            assert_eq!(a.mappings[0], sigma.to_vec());
            let d = cosine_distributions(&set, &a, TopN::Count(2)).unwrap();
            assert_eq!(d.full, d.matched);
        }
    }

    #[test]
    fn groups_stack_matched_columns() {
        let m = three_topics();
        let sigma = [1, 2, 0];
        let set = ReplicationSet::new(vec![m.clone(), permuted(&m, &sigma)], "x".into()).unwrap();
        let a = align_topics(&set, 0, TopN::All, Matching::Greedy).unwrap();
        let g = build_topic_groups(&set, &a).unwrap();
        assert_eq!(g.len(), 3);
        for grp in &g {
            assert_eq!(grp.theta_columns.column(0), grp.theta_columns.column(1));
            assert_eq!(grp.phi_rows.row(0), grp.phi_rows.row(1));
            assert_eq!(grp.theta_columns.column(0), m.theta.column(grp.topic_id));
        }
    }

    #[test]
    fn greedy_can_fall_short_of_full_maximum() {
        // reference topic 0 and 1 both prefer candidate 0
        let sim = DMatrix::from_row_slice(2, 2, &[0.9, 0.5, 0.8, 0.1]);
        assert_eq!(greedy_match(&sim), vec![0, 1]);
        assert_eq!(hungarian_match(&sim), vec![1, 0]);
    }

    #[test]
    fn frex_weight_zero_is_frequency_order() {
        let m = three_topics();
        let f = frex_words(&m, 1, 0.0, 4).unwrap();
        let ids: Vec<usize> = f.iter().map(|t| t.term).collect();
        assert_eq!(ids, m.top_terms(1, 4));
    }

    #[test]
    fn frex_hand_computed() {
        // topic 0 of a 3-term, 2-topic model
        let phi = DMatrix::from_row_slice(2, 3, &[0.5, 0.3, 0.2, 0.1, 0.1, 0.8]);
        let m = model(phi, DMatrix::from_element(1, 2, 0.5));
        // frequency ecdf: 0.5 -> 1, 0.3 -> 2/3, 0.2 -> 1/3
        // exclusivity: 0.5/0.6, 0.3/0.4, 0.2/1.0 = .833, .75, .2 -> ecdf 1, 2/3, 1/3
        let f = frex_words(&m, 0, 0.5, 3).unwrap();
        let want = [1.0, 1.0 / (0.5 * 1.5 + 0.5 * 1.5), 1.0 / (0.5 * 3.0 + 0.5 * 3.0)];
        for (t, w) in f.iter().zip(want) {
            assert!((t.score - w).abs() < 1e-12);
        }
        assert_eq!(f.iter().map(|t| t.term).collect::<Vec<_>>(), vec![0, 1, 2]);
    }
}
