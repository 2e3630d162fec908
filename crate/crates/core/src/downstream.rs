//! Logistic regression on topic proportions and word-weight instability.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::lda::{ReplicationSet, TopicModel};
use crate::stats::five_number;

pub const RIDGE: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 100;
pub const TOLERANCE: f64 = 1e-8;
pub const DEFAULT_HOLDOUT: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct IrlsFit {
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Ridge-penalised Newton iterations for logistic regression. `x` must
/// already contain any intercept column.
pub fn irls(x: &DMatrix<f64>, y: &[f64], ridge: f64, max_iterations: usize, tolerance: f64) -> Result<IrlsFit> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::invalid("one label per row required"));
    }
    let y = DVector::from_column_slice(y);
    let mut beta = DVector::zeros(p);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        let prob = (x * &beta).map(sigmoid);
        let w = prob.map(|q| q * (1.0 - q));
        let gradient = x.transpose() * (&y - &prob) - &beta * ridge;
        let mut weighted = x.clone();
        for (mut row, wi) in weighted.row_iter_mut().zip(w.iter()) {
            row *= *wi;
        }
        let hessian = x.transpose() * weighted + DMatrix::identity(p, p) * ridge;
        let step = match hessian.clone().cholesky() {
            Some(c) => c.solve(&gradient),
            None => hessian
                .lu()
                .solve(&gradient)
                .ok_or_else(|| Error::Numerical("singular IRLS system".into()))?,
        };
        beta += &step;
        if !beta.iter().all(|b| b.is_finite()) {
            return Err(Error::Numerical("IRLS diverged".into()));
        }
        if step.amax() < tolerance {
            converged = true;
            break;
        }
    }
    Ok(IrlsFit {
        coefficients: beta.iter().copied().collect(),
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionModel {
    /// Intercept first, then one coefficient per topic.
    pub coefficients: Vec<f64>,
    pub train_accuracy: f64,
    pub holdout_accuracy: f64,
    pub replication_id: usize,
    pub converged: bool,
    /// Training data were perfectly separated; coefficients are finite only
    /// because of the ridge.
    pub separated: bool,
}

impl PredictionModel {
    pub fn topic_coefficients(&self) -> &[f64] {
        &self.coefficients[1..]
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let eta = self.coefficients[0]
            + row
                .iter()
                .zip(self.topic_coefficients())
                .map(|(x, b)| x * b)
                .sum::<f64>();
        sigmoid(eta)
    }
}

fn design(theta: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), theta.ncols() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            theta[(rows[i], j - 1)]
        }
    })
}

/// Seed-deterministic split; returns (train, holdout) row indices, each sorted.
pub fn holdout_split(n: usize, holdout_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((n as f64) * holdout_fraction).round() as usize;
    let mut holdout = idx[..cut].to_vec();
    let mut train = idx[cut..].to_vec();
    holdout.sort_unstable();
    train.sort_unstable();
    (train, holdout)
}

fn accuracy(model: &PredictionModel, theta: &DMatrix<f64>, labels: &[u8], rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return f64::NAN;
    }
    let correct = rows
        .iter()
        .filter(|&&r| {
            let row: Vec<f64> = theta.row(r).iter().copied().collect();
            (model.predict(&row) > 0.5) == (labels[r] == 1)
        })
        .count();
    correct as f64 / rows.len() as f64
}

/// Logistic regression of `labels` on every topic proportion plus an
/// intercept, fitted on a seeded training split.
pub fn fit_logistic(theta: &DMatrix<f64>, labels: &[u8], holdout_fraction: f64, seed: u64) -> Result<PredictionModel> {
    if labels.len() != theta.nrows() {
        return Err(Error::invalid(format!(
            "{} labels for {} documents",
            labels.len(),
            theta.nrows()
        )));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    if !(holdout_fraction > 0.0 && holdout_fraction < 0.5) {
        return Err(Error::invalid("holdout fraction must lie in (0, 0.5)"));
    }
    let (train, holdout) = holdout_split(labels.len(), holdout_fraction, seed);
    let positives = train.iter().filter(|&&r| labels[r] == 1).count();
    if positives == 0 || positives == train.len() {
        return Err(Error::invalid("labels need both classes in the training split"));
    }
    let x = design(theta, &train);
    let y: Vec<f64> = train.iter().map(|&r| f64::from(labels[r])).collect();
    let fit = irls(&x, &y, RIDGE, MAX_ITERATIONS, TOLERANCE)?;
    let eta = &x * DVector::from_column_slice(&fit.coefficients);
    let separated = eta.iter().zip(&y).all(|(e, t)| (*e > 0.0) == (*t == 1.0));
    if separated {
        log::warn!("training data are perfectly separated; coefficients are ridge-stabilised");
    }
    if !fit.converged {
        log::warn!("IRLS stopped after {} iterations without converging", fit.iterations);
    }
    let mut model = PredictionModel {
        coefficients: fit.coefficients,
        train_accuracy: 0.0,
        holdout_accuracy: 0.0,
        replication_id: 0,
        converged: fit.converged,
        separated,
    };
    model.train_accuracy = accuracy(&model, theta, labels, &train);
    model.holdout_accuracy = accuracy(&model, theta, labels, &holdout);
    Ok(model)
}

/// One model per replication, all on the same split.
pub fn fit_replications(
    reps: &ReplicationSet,
    labels: &[u8],
    holdout_fraction: f64,
    seed: u64,
) -> Result<Vec<PredictionModel>> {
    reps.models
        .par_iter()
        .enumerate()
        .map(|(r, m)| {
            let mut model = fit_logistic(&m.theta, labels, holdout_fraction, seed)?;
            model.replication_id = r;
            Ok(model)
        })
        .collect()
}

/// Σₖ βₖ·φ[k][term], intercept excluded.
pub fn word_weight(model: &PredictionModel, phi: &DMatrix<f64>, term: usize) -> Result<f64> {
    if term >= phi.ncols() {
        return Err(Error::invalid(format!("term {term} out of range")));
    }
    let beta = model.topic_coefficients();
    if beta.len() != phi.nrows() {
        return Err(Error::invalid("model and φ disagree on K"));
    }
    Ok(beta.iter().enumerate().map(|(k, b)| b * phi[(k, term)]).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WordWeightSummary {
    pub term: usize,
    pub weights: Vec<f64>,
    /// min, Q1, median, Q3, max.
    pub summary: [f64; 5],
}

impl WordWeightSummary {
    pub fn iqr(&self) -> f64 {
        self.summary[3] - self.summary[1]
    }
}

pub fn word_weight_summary(
    reps: &ReplicationSet,
    models: &[PredictionModel],
    terms: &[usize],
) -> Result<Vec<WordWeightSummary>> {
    if models.len() != reps.len() {
        return Err(Error::invalid("need one prediction model per replication"));
    }
    terms
        .iter()
        .map(|&term| {
            let weights = reps
                .models
                .iter()
                .zip(models)
                .map(|(m, pm)| word_weight(pm, &m.phi, term))
                .collect::<Result<Vec<_>>>()?;
            Ok(WordWeightSummary {
                term,
                summary: five_number(&weights),
                weights,
            })
        })
        .collect()
}

/// The `count` most frequent terms among those in the top `top_n` of every
/// given model's most prevalent topic. Falls back to overall frequency
/// order when the intersection is too small.
pub fn select_prevalent_terms(
    models: &[&TopicModel],
    term_frequencies: &[u64],
    count: usize,
    top_n: usize,
) -> Vec<usize> {
    let v = term_frequencies.len();
    let mut in_all = vec![true; v];
    for m in models {
        let mut here = vec![false; v];
        for t in m.top_terms(m.most_prevalent_topic(), top_n) {
            here[t] = true;
        }
        for (a, h) in in_all.iter_mut().zip(here) {
            *a &= h;
        }
    }
    let by_freq =
        |ids: &mut Vec<usize>| ids.sort_by(|&a, &b| term_frequencies[b].cmp(&term_frequencies[a]).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = (0..v).filter(|&t| in_all[t]).collect();
    by_freq(&mut chosen);
    chosen.truncate(count);
    if chosen.len() < count {
        let mut rest: Vec<usize> = (0..v).filter(|t| !chosen.contains(t)).collect();
        by_freq(&mut rest);
        chosen.extend(rest.into_iter().take(count - chosen.len()));
    }
    chosen
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccuracySummary {
    pub train: [f64; 5],
    pub holdout: [f64; 5],
}

pub fn accuracy_summary(models: &[PredictionModel]) -> AccuracySummary {
    let train: Vec<f64> = models.iter().map(|m| m.train_accuracy).collect();
    let holdout: Vec<f64> = models.iter().map(|m| m.holdout_accuracy).collect();
    AccuracySummary {
        train: five_number(&train),
        holdout: five_number(&holdout),
    }
}

/// `term,min,Q1,Q2,Q3,max`.
pub fn write_word_weights_csv(path: &Path, summaries: &[WordWeightSummary], vocab: &Vocabulary) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["term", "min", "Q1", "Q2", "Q3", "max"])?;
    for s in summaries {
        let mut row = vec![vocab.term(s.term).to_owned()];
        row.extend(s.summary.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `k,split,min,Q1,Q2,Q3,max`, one train and one holdout row per K.
pub fn write_accuracy_csv(path: &Path, rows: &[(usize, AccuracySummary)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "split", "min", "Q1", "Q2", "Q3", "max"])?;
    for (k, s) in rows {
        for (split, five) in [("train", s.train), ("holdout", s.holdout)] {
            let mut row = vec![k.to_string(), split.to_owned()];
            row.extend(five.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
