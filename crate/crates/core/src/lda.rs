//! Collapsed Gibbs sampling for LDA and the replication runner.
//!
//! Randomness is keyed per token rather than drawn from one sequential
//! stream: each token's uniform in sweep `s` is a hash of the model seed, the
//! token's identity (document id, term string, occurrence index) and `s`.
//! Documents are swept in doc-id order and tokens in term-id order. The
//! result depends only on the multiset of (document, term) tokens, not on
//! their storage order, and deleting a word leaves every other token's random
//! stream untouched.

use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::io::{self, read_json, read_matrix, write_json, write_matrix};
use crate::stats::{child_seed, hash_str, mix64, unit_f64};

const INIT_SWEEP: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl LdaConfig {
    /// Defaults: alpha = 50/K, beta = 0.1, 1000 sweeps with 500 burn-in.
    pub fn new(k: usize) -> Self {
        LdaConfig {
            k,
            alpha: 50.0 / k as f64,
            beta: 0.1,
            iterations: 1000,
            burn_in: 500,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid(format!("K must be at least 2, got {}", self.k)));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::invalid("alpha and beta must be positive"));
        }
        if self.iterations <= self.burn_in {
            return Err(Error::invalid("iterations must exceed burn_in"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    /// K x V, rows sum to one.
    pub phi: DMatrix<f64>,
    /// D x K, rows sum to one.
    pub theta: DMatrix<f64>,
    pub config: LdaConfig,
    pub log_likelihood_trace: Vec<f64>,
}

impl TopicModel {
    pub fn k(&self) -> usize {
        self.phi.nrows()
    }

    pub fn vocab_size(&self) -> usize {
        self.phi.ncols()
    }

    pub fn num_docs(&self) -> usize {
        self.theta.nrows()
    }

    /// Term ids of topic `k` by descending probability, ties by id.
    pub fn top_terms(&self, k: usize, n: usize) -> Vec<usize> {
        let row = self.phi.row(k);
        let mut ids: Vec<usize> = (0..row.len()).collect();
        ids.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        ids.truncate(n);
        ids
    }

    /// Topic with the largest mean document proportion.
    pub fn most_prevalent_topic(&self) -> usize {
        let means = self.theta.row_mean();
        (0..means.len())
            .max_by(|&a, &b| means[a].total_cmp(&means[b]).then(b.cmp(&a)))
            .unwrap_or(0)
    }
}

/// Identity of one token occurrence, stable under word removal and document
/// reordering.
pub fn token_key(doc_id: &str, term: &str, occurrence: u32) -> u64 {
    mix64(hash_str(doc_id) ^ mix64(hash_str(term) ^ u64::from(occurrence)))
}

/// The uniform draw used for a token in a given sweep.
pub fn token_uniform(seed: u64, key: u64, sweep: u64) -> f64 {
    unit_f64(mix64(mix64(seed ^ key) ^ sweep.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// Uniform used for a token's initial topic.
pub fn token_init_uniform(seed: u64, key: u64) -> f64 {
    token_uniform(seed, key, INIT_SWEEP)
}

struct Sampler {
    k: usize,
    v: usize,
    alpha: f64,
    beta: f64,
    // token arrays in sweep order
    doc: Vec<u32>,
    term: Vec<u32>,
    key: Vec<u64>,
    z: Vec<u32>,
    ndk: Vec<u32>,
    nkw: Vec<u32>,
    nk: Vec<u32>,
    nd: Vec<u32>,
}

impl Sampler {
    fn new(corpus: &Corpus, config: &LdaConfig) -> Self {
        let (k, v, d) = (config.k, corpus.vocab_size(), corpus.num_docs());
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| corpus.doc_ids()[a].cmp(&corpus.doc_ids()[b]).then(a.cmp(&b)));

        let n = corpus.total_tokens();
        let mut s = Sampler {
            k,
            v,
            alpha: config.alpha,
            beta: config.beta,
            doc: Vec::with_capacity(n),
            term: Vec::with_capacity(n),
            key: Vec::with_capacity(n),
            z: Vec::with_capacity(n),
            ndk: vec![0; d * k],
            nkw: vec![0; k * v],
            nk: vec![0; k],
            nd: vec![0; d],
        };
        let vocab = corpus.vocabulary();
        for &di in &order {
            let id = &corpus.doc_ids()[di];
            for &(t, c) in corpus.documents()[di].counts() {
                for j in 0..c {
                    let ident = token_key(id, vocab.term(t), j);
                    let key = mix64(config.seed ^ ident);
                    let u = token_init_uniform(config.seed, ident);
                    let z = ((u * k as f64) as usize).min(k - 1);
                    s.doc.push(di as u32);
                    s.term.push(t as u32);
                    s.key.push(key);
                    s.z.push(z as u32);
                    s.ndk[di * k + z] += 1;
                    s.nkw[z * v + t] += 1;
                    s.nk[z] += 1;
                    s.nd[di] += 1;
                }
            }
        }
        s
    }

    fn sweep(&mut self, sweep: u64, weights: &mut [f64]) {
        let (k, v) = (self.k, self.v);
        let vbeta = v as f64 * self.beta;
        let salt = sweep.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let mut inv_nk: Vec<f64> = self.nk.iter().map(|&n| 1.0 / (f64::from(n) + vbeta)).collect();
        for i in 0..self.z.len() {
            let d = self.doc[i] as usize;
            let w = self.term[i] as usize;
            let old = self.z[i] as usize;
            self.ndk[d * k + old] -= 1;
            self.nkw[old * v + w] -= 1;
            self.nk[old] -= 1;

            inv_nk[old] = 1.0 / (f64::from(self.nk[old]) + vbeta);

            let mut total = 0.0;
            for (t, slot) in weights.iter_mut().enumerate() {
                total += (f64::from(self.ndk[d * k + t]) + self.alpha)
                    * (f64::from(self.nkw[t * v + w]) + self.beta)
                    * inv_nk[t];
                *slot = total;
            }
            let target = unit_f64(mix64(self.key[i] ^ salt)) * total;
            let new = weights.iter().position(|&c| target < c).unwrap_or(k - 1);

            self.z[i] = new as u32;
            self.ndk[d * k + new] += 1;
            self.nkw[new * v + w] += 1;
            self.nk[new] += 1;
            inv_nk[new] = 1.0 / (f64::from(self.nk[new]) + vbeta);
        }
    }

    /// Collapsed joint log p(w, z).
    fn log_likelihood(&self) -> f64 {
        let (k, v) = (self.k, self.v);
        let (a, b) = (self.alpha, self.beta);
        let (lg_a, lg_b) = (ln_gamma(a), ln_gamma(b));
        let (vb, ka) = (v as f64 * b, k as f64 * a);
        let (lg_vb, lg_ka) = (ln_gamma(vb), ln_gamma(ka));
        let mut ll = 0.0;
        for t in 0..k {
            ll += lg_vb - ln_gamma(f64::from(self.nk[t]) + vb);
            for &c in self.nkw[t * v..(t + 1) * v].iter().filter(|&&c| c > 0) {
                ll += ln_gamma(f64::from(c) + b) - lg_b;
            }
        }
        for (di, &n) in self.nd.iter().enumerate() {
            ll += lg_ka - ln_gamma(f64::from(n) + ka);
            for &c in self.ndk[di * k..(di + 1) * k].iter().filter(|&&c| c > 0) {
                ll += ln_gamma(f64::from(c) + a) - lg_a;
            }
        }
        ll
    }

    fn estimates(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let (k, v) = (self.k, self.v);
        let d = self.nd.len();
        let vbeta = v as f64 * self.beta;
        let kalpha = k as f64 * self.alpha;
        let phi = DMatrix::from_fn(k, v, |t, w| {
            (f64::from(self.nkw[t * v + w]) + self.beta) / (f64::from(self.nk[t]) + vbeta)
        });
        let theta = DMatrix::from_fn(d, k, |di, t| {
            (f64::from(self.ndk[di * k + t]) + self.alpha) / (f64::from(self.nd[di]) + kalpha)
        });
        (phi, theta)
    }
}

/// Fits LDA by collapsed Gibbs sampling. Point estimates come from the
/// assignments after the final sweep.
pub fn fit_lda(corpus: &Corpus, config: &LdaConfig) -> Result<TopicModel> {
    config.validate()?;
    if corpus.num_docs() == 0 || corpus.total_tokens() == 0 {
        return Err(Error::NoDocuments);
    }
    if config.k > corpus.total_tokens() {
        log::warn!(
            "K = {} exceeds the corpus token count {}",
            config.k,
            corpus.total_tokens()
        );
    }
    let mut sampler = Sampler::new(corpus, config);
    let mut weights = vec![0.0; config.k];
    let mut trace = Vec::with_capacity(config.iterations);
    for sweep in 0..config.iterations {
        sampler.sweep(sweep as u64, &mut weights);
        trace.push(sampler.log_likelihood());
    }
    let (phi, theta) = sampler.estimates();
    Ok(TopicModel {
        phi,
        theta,
        config: *config,
        log_likelihood_trace: trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SeedMode {
    /// Child seeds derived from the master seed per replication index.
    #[default]
    Distinct,
    /// Every replication uses the master seed.
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationSet {
    pub models: Vec<TopicModel>,
    pub seeds: Vec<u64>,
    pub corpus_digest: String,
}

impl ReplicationSet {
    pub fn new(models: Vec<TopicModel>, corpus_digest: String) -> Result<Self> {
        let first = models
            .first()
            .ok_or_else(|| Error::invalid("replication set is empty"))?;
        let shape = (first.k(), first.vocab_size(), first.num_docs());
        if let Some(bad) = models
            .iter()
            .position(|m| (m.k(), m.vocab_size(), m.num_docs()) != shape)
        {
            return Err(Error::invalid(format!(
                "replication {bad} has shape (K, V, D) different from {shape:?}"
            )));
        }
        let seeds = models.iter().map(|m| m.config.seed).collect();
        Ok(ReplicationSet {
            models,
            seeds,
            corpus_digest,
        })
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn k(&self) -> usize {
        self.models[0].k()
    }

    pub fn vocab_size(&self) -> usize {
        self.models[0].vocab_size()
    }

    pub fn num_docs(&self) -> usize {
        self.models[0].num_docs()
    }

    /// The replications at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let models = indices
            .iter()
            .map(|&i| {
                self.models
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::invalid(format!("no replication {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        ReplicationSet::new(models, self.corpus_digest.clone())
    }

    pub fn replace(&mut self, index: usize, model: TopicModel) -> Result<()> {
        if index >= self.len() {
            return Err(Error::invalid(format!("no replication {index}")));
        }
        if (model.k(), model.vocab_size(), model.num_docs()) != (self.k(), self.vocab_size(), self.num_docs()) {
            return Err(Error::invalid("replacement model has a different shape"));
        }
        self.seeds[index] = model.config.seed;
        self.models[index] = model;
        Ok(())
    }
}

pub fn replication_seeds(master_seed: u64, n_reps: usize, mode: SeedMode) -> Vec<u64> {
    match mode {
        SeedMode::Distinct => (0..n_reps as u64).map(|i| child_seed(master_seed, i)).collect(),
        SeedMode::Fixed => vec![master_seed; n_reps],
    }
}

/// Fits `n_reps` independent models in parallel. `config.seed` is replaced
/// by the per-replication seed.
pub fn run_replications(
    corpus: &Corpus,
    config: &LdaConfig,
    n_reps: usize,
    seed_mode: SeedMode,
    master_seed: u64,
) -> Result<ReplicationSet> {
    if n_reps < 2 {
        return Err(Error::invalid("reliability requires ≥ 2 replications"));
    }
    config.validate()?;
    let models = replication_seeds(master_seed, n_reps, seed_mode)
        .into_par_iter()
        .map(|seed| fit_lda(corpus, &config.with_seed(seed)))
        .collect::<Result<Vec<_>>>()?;
    ReplicationSet::new(models, corpus.digest())
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelMeta {
    seed: u64,
    k: usize,
    alpha: f64,
    beta: f64,
    iterations: usize,
    burn_in: usize,
    corpus_digest: String,
    log_likelihood_trace: Vec<f64>,
}

/// Writes `phi.csv`, `theta.csv` and `meta.json` into `dir`. Returns the
/// written paths.
pub fn save_model(model: &TopicModel, dir: &Path, corpus_digest: &str) -> Result<Vec<std::path::PathBuf>> {
    io::ensure_dir(dir)?;
    let paths = [dir.join("phi.csv"), dir.join("theta.csv"), dir.join("meta.json")];
    write_matrix(&paths[0], &model.phi)?;
    write_matrix(&paths[1], &model.theta)?;
    let c = model.config;
    write_json(
        &paths[2],
        &ModelMeta {
            seed: c.seed,
            k: c.k,
            alpha: c.alpha,
            beta: c.beta,
            iterations: c.iterations,
            burn_in: c.burn_in,
            corpus_digest: corpus_digest.to_owned(),
            log_likelihood_trace: model.log_likelihood_trace.clone(),
        },
    )?;
    Ok(paths.to_vec())
}

/// Reads a model written by [`save_model`]; returns it with the corpus digest.
pub fn load_model(dir: &Path) -> Result<(TopicModel, String)> {
    let meta: ModelMeta = read_json(&dir.join("meta.json"))?;
    let phi = read_matrix(&dir.join("phi.csv"))?;
    let theta = read_matrix(&dir.join("theta.csv"))?;
    if phi.nrows() != meta.k || theta.ncols() != meta.k {
        return Err(Error::invalid(format!(
            "model in {} does not have K = {}",
            dir.display(),
            meta.k
        )));
    }
    let config = LdaConfig {
        k: meta.k,
        alpha: meta.alpha,
        beta: meta.beta,
        iterations: meta.iterations,
        burn_in: meta.burn_in,
        seed: meta.seed,
    };
    Ok((
        TopicModel {
            phi,
            theta,
            config,
            log_likelihood_trace: meta.log_likelihood_trace,
        },
        meta.corpus_digest,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Vocabulary};

    fn tiny() -> Corpus {
        let vocab = Vocabulary::from_terms(["a", "b", "c", "d"]).unwrap();
        let docs = vec![
            Document::from_counts([(0, 3), (1, 2)]),
            Document::from_counts([(2, 2), (3, 3)]),
            Document::from_counts([(0, 1), (3, 1)]),
        ];
        Corpus::with_default_ids(vocab, docs).unwrap()
    }

    fn short(k: usize) -> LdaConfig {
        LdaConfig {
            iterations: 20,
            burn_in: 5,
            ..LdaConfig::new(k)
        }
    }

    #[test]
    fn config_validation() {
        assert!(LdaConfig::new(1).validate().is_err());
        assert!(LdaConfig {
            burn_in: 1000,
            ..LdaConfig::new(3)
        }
        .validate()
        .is_err());
        assert!(LdaConfig {
            beta: 0.0,
            ..LdaConfig::new(3)
        }
        .validate()
        .is_err());
    }

    #[test]
    fn single_token_corpus_is_normalized() {
        let vocab = Vocabulary::from_terms(["x"]).unwrap();
        let c = Corpus::with_default_ids(vocab, vec![Document::from_counts([(0, 1)])]).unwrap();
        let m = fit_lda(&c, &short(2)).unwrap();
        assert!((m.theta.row(0).sum() - 1.0).abs() < 1e-12);
        for k in 0..2 {
            assert!((m.phi.row(k).sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn log_likelihood_is_finite() {
        let m = fit_lda(&tiny(), &short(2)).unwrap();
        assert_eq!(m.log_likelihood_trace.len(), 20);
        assert!(m.log_likelihood_trace.iter().all(|x| x.is_finite() && *x < 0.0));
    }

    #[test]
    fn fewer_than_two_replications_is_an_error() {
        let err = run_replications(&tiny(), &short(2), 1, SeedMode::Distinct, 3).unwrap_err();
        assert!(err.to_string().contains("≥ 2 replications"));
    }

    #[test]
    fn fixed_mode_gives_identical_models() {
        let set = run_replications(&tiny(), &short(2), 3, SeedMode::Fixed, 11).unwrap();
        assert!(set.models.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn model_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = fit_lda(&tiny(), &short(3)).unwrap();
        save_model(&m, dir.path(), "abc").unwrap();
        let (back, digest) = load_model(dir.path()).unwrap();
        assert_eq!(back, m);
        assert_eq!(digest, "abc");
    }
}
