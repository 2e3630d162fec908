//! Synthetic corpora drawn from the LDA generative process, outcome labels
//! for the downstream study, and injected degenerate replications.

use std::path::Path;

use nalgebra::DMatrix;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Gamma, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, Vocabulary};
use crate::error::{Error, Result};
use crate::io::write_matrix;
use crate::lda::TopicModel;

/// Share of the degenerate replication's deviation that is independent
/// noise; the remainder follows the reference replication's direction.
pub const DEGENERATE_NOISE_SHARE: f64 = 0.5;
/// Weight of the uniform distribution in the degenerate replication's φ.
pub const DEGENERATE_PHI_BLEND: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerativeSpec {
    pub k_true: usize,
    pub vocab_size: usize,
    pub num_docs: usize,
    /// Poisson mean of document length.
    pub doc_length: f64,
    pub dirichlet_alpha: f64,
    pub dirichlet_beta: f64,
    /// Zipf exponent of expected topic prevalence; 0 keeps the document-topic
    /// prior symmetric.
    #[serde(default)]
    pub topic_skew: f64,
    pub seed: u64,
}

impl GenerativeSpec {
    /// 16 terms, 2 well separated topics, 10,000 documents.
    pub fn trivial(seed: u64) -> Self {
        GenerativeSpec {
            k_true: 2,
            vocab_size: 16,
            num_docs: 10_000,
            doc_length: 50.0,
            dirichlet_alpha: 0.1,
            dirichlet_beta: 0.1,
            topic_skew: 0.0,
            seed,
        }
    }

    /// Desk-scale stand-in for a large generator fitted to real text: 50
    /// topics whose expected prevalence falls off like a Zipf law.
    pub fn nontrivial(seed: u64) -> Self {
        GenerativeSpec {
            k_true: 50,
            vocab_size: 500,
            num_docs: 2000,
            doc_length: 50.0,
            dirichlet_alpha: 0.1,
            dirichlet_beta: 0.1,
            topic_skew: 1.5,
            seed,
        }
    }

    /// Per-topic document-topic concentrations. Their mean is
    /// `dirichlet_alpha`; with positive skew topic k gets weight ∝ (k+1)^-skew.
    pub fn alpha_vector(&self) -> Vec<f64> {
        let w: Vec<f64> = (0..self.k_true)
            .map(|k| (k as f64 + 1.0).powf(-self.topic_skew))
            .collect();
        let total: f64 = w.iter().sum();
        let scale = self.dirichlet_alpha * self.k_true as f64 / total;
        w.into_iter().map(|x| x * scale).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_true < 2 {
            return Err(Error::invalid(format!(
                "K_true must be at least 2, got {}",
                self.k_true
            )));
        }
        if self.vocab_size < self.k_true {
            return Err(Error::invalid("vocabulary must be at least K_true"));
        }
        if self.num_docs == 0 {
            return Err(Error::invalid("need at least one document"));
        }
        if !(self.doc_length >= 1.0) {
            return Err(Error::invalid("doc_length must be at least 1"));
        }
        if !(self.dirichlet_alpha > 0.0 && self.dirichlet_beta > 0.0) {
            return Err(Error::invalid("Dirichlet concentrations must be positive"));
        }
        if !(self.topic_skew >= 0.0 && self.topic_skew.is_finite()) {
            return Err(Error::invalid("topic_skew must be a finite value >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// K_true x V
    pub phi_true: DMatrix<f64>,
    /// D x K_true
    pub theta_true: DMatrix<f64>,
}

impl GroundTruth {
    pub fn save(&self, dir: &Path) -> Result<[std::path::PathBuf; 2]> {
        let paths = [dir.join("phi_true.csv"), dir.join("theta_true.csv")];
        write_matrix(&paths[0], &self.phi_true)?;
        write_matrix(&paths[1], &self.theta_true)?;
        Ok(paths)
    }
}

/// Symmetric Dirichlet draw.
pub fn sample_dirichlet<R: Rng + ?Sized>(rng: &mut R, concentration: f64, dim: usize) -> Vec<f64> {
    sample_dirichlet_with(rng, &vec![concentration; dim])
}

/// Dirichlet draw. Works in log space so that concentrations far below one
/// do not underflow to an all-zero vector.
pub fn sample_dirichlet_with<R: Rng + ?Sized>(rng: &mut R, concentrations: &[f64]) -> Vec<f64> {
    // Gamma(a) = Gamma(a + 1) * U^(1/a)
    let logs: Vec<f64> = concentrations
        .iter()
        .map(|&a| {
            let g: f64 = Gamma::new(a + 1.0, 1.0).expect("positive shape").sample(rng);
            let u: f64 = 1.0 - rng.random::<f64>();
            g.ln() + u.ln() / a
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

fn term_names(v: usize) -> Vec<String> {
    let width = (v.max(2) - 1).to_string().len();
    (0..v).map(|i| format!("w{i:0width$}")).collect()
}

/// Draws a corpus by ancestral sampling: φ_k ~ Dir(β), θ_d ~ Dir(α),
/// length ~ Poisson(doc_length) redrawn while zero, z ~ θ_d, w ~ φ_z.
pub fn generate(spec: &GenerativeSpec) -> Result<(Corpus, GroundTruth)> {
    spec.validate()?;
    let (k, v, d) = (spec.k_true, spec.vocab_size, spec.num_docs);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut phi = DMatrix::zeros(k, v);
    for t in 0..k {
        for (w, p) in sample_dirichlet(&mut rng, spec.dirichlet_beta, v)
            .into_iter()
            .enumerate()
        {
            phi[(t, w)] = p;
        }
    }
    let word_dists: Vec<WeightedIndex<f64>> = (0..k)
        .map(|t| WeightedIndex::new(phi.row(t).iter().copied()).expect("valid topic"))
        .collect();

    let lengths = Poisson::new(spec.doc_length).expect("positive mean");
    let alpha = spec.alpha_vector();
    let mut theta = DMatrix::zeros(d, k);
    let mut documents = Vec::with_capacity(d);
    for di in 0..d {
        let row = sample_dirichlet_with(&mut rng, &alpha);
        let topics = WeightedIndex::new(row.iter().copied()).expect("valid proportions");
        for (t, p) in row.into_iter().enumerate() {
            theta[(di, t)] = p;
        }
        let len = loop {
            let n: f64 = lengths.sample(&mut rng);
            if n >= 1.0 {
                break n as usize;
            }
        };
        let tokens: Vec<usize> = (0..len)
            .map(|_| word_dists[topics.sample(&mut rng)].sample(&mut rng))
            .collect();
        documents.push(Document::from_tokens(tokens));
    }
    let vocab = Vocabulary::from_terms(term_names(v))?;
    let corpus = Corpus::with_default_ids(vocab, documents)?;
    Ok((
        corpus,
        GroundTruth {
            phi_true: phi,
            theta_true: theta,
        },
    ))
}

/// Binary outcomes whose log-odds are a random linear function of every
/// true topic's proportion, centred so both classes occur.
pub fn label_documents(truth: &GroundTruth, strength: f64, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = truth.theta_true.ncols();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let weights: Vec<f64> = (0..k).map(|_| normal.sample(&mut rng)).collect();
    let scores: Vec<f64> = truth
        .theta_true
        .row_iter()
        .map(|row| row.iter().zip(&weights).map(|(p, w)| p * w).sum())
        .collect();
    let centre = crate::stats::mean(&scores);
    scores
        .iter()
        .map(|s| {
            let p = 1.0 / (1.0 + (-strength * (s - centre)).exp());
            u8::from(rng.random::<f64>() < p)
        })
        .collect()
}

/// A replication whose θ rows sit within `epsilon` of uniform and whose φ
/// is the reference φ blended with the uniform distribution.
///
/// Each θ deviation mixes the reference replication's direction
/// (`reference θ - 1/K`) with independent uniform noise, is centred so rows
/// still sum to one, then scaled so no entry moves more than `epsilon`.
pub fn make_degenerate_replication(reference: &TopicModel, epsilon: f64, seed: u64) -> Result<TopicModel> {
    let k = reference.k();
    let d = reference.num_docs();
    let uniform = 1.0 / k as f64;
    if k < 2 {
        return Err(Error::invalid("K must be at least 2"));
    }
    if !(0.0..uniform).contains(&epsilon) {
        return Err(Error::invalid(format!("epsilon must lie in [0, 1/K), got {epsilon}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = k as f64 / (k as f64 - 1.0);
    let mut theta = DMatrix::from_element(d, k, uniform);
    let mut dev = vec![0.0; k];
    for di in 0..d {
        for (t, slot) in dev.iter_mut().enumerate() {
            let direction = ((reference.theta[(di, t)] - uniform) * scale).clamp(-1.0, 1.0);
            let noise = rng.random_range(-1.0..=1.0);
            *slot = (1.0 - DEGENERATE_NOISE_SHARE) * direction + DEGENERATE_NOISE_SHARE * noise;
        }
        let centre = crate::stats::mean(&dev);
        let peak = dev.iter().map(|x| (x - centre).abs()).fold(0.0, f64::max);
        let shrink = if peak > 1.0 { 1.0 / peak } else { 1.0 };
        for t in 0..k {
            theta[(di, t)] = uniform + epsilon * (dev[t] - centre) * shrink;
        }
    }
    let v = reference.vocab_size() as f64;
    let phi = reference
        .phi
        .map(|p| (1.0 - DEGENERATE_PHI_BLEND) * p + DEGENERATE_PHI_BLEND / v);
    Ok(TopicModel {
        phi,
        theta,
        config: reference.config.with_seed(seed),
        log_likelihood_trace: Vec::new(),
    })
}
