//! Nonparametric bootstrap standard errors.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::align::TopicGroup;
use crate::error::{Error, Result};
use crate::stats::{child_seed, mean};

pub const MIN_RESAMPLES: usize = 50;
/// Largest tolerated share of failed resamples.
const MAX_FAILURE_RATE: f64 = 0.10;

/// Rebuilds every group from the given document and term indices. The same
/// draw is applied to all topics so between-topic structure is preserved.
pub fn resample_groups(groups: &[TopicGroup], docs: &[usize], terms: &[usize]) -> Vec<TopicGroup> {
    groups
        .iter()
        .map(|g| {
            let n = g.num_replications();
            TopicGroup {
                topic_id: g.topic_id,
                theta_columns: DMatrix::from_fn(docs.len(), n, |i, j| g.theta_columns[(docs[i], j)]),
                phi_rows: DMatrix::from_fn(n, terms.len(), |i, j| g.phi_rows[(i, terms[j])]),
            }
        })
        .collect()
}

/// Sample standard deviation of `metric` over `b` resamples of documents
/// and terms drawn with replacement.
pub fn bootstrap_se<F>(metric: F, groups: &[TopicGroup], b: usize, seed: u64) -> Result<f64>
where
    F: Fn(&[TopicGroup]) -> Result<f64> + Sync,
{
    if b < MIN_RESAMPLES {
        return Err(Error::invalid(format!(
            "bootstrap needs at least {MIN_RESAMPLES} resamples, got {b}"
        )));
    }
    let first = groups.first().ok_or_else(|| Error::invalid("no topic groups"))?;
    let (d, v) = (first.theta_columns.nrows(), first.phi_rows.ncols());
    let draws: Vec<Option<f64>> = (0..b)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, i as u64));
            let docs: Vec<usize> = (0..d).map(|_| rng.random_range(0..d)).collect();
            let terms: Vec<usize> = (0..v).map(|_| rng.random_range(0..v)).collect();
            metric(&resample_groups(groups, &docs, &terms))
                .ok()
                .filter(|x| x.is_finite())
        })
        .collect();
    let values: Vec<f64> = draws.iter().flatten().copied().collect();
    let failed = b - values.len();
    if failed as f64 > MAX_FAILURE_RATE * b as f64 {
        return Err(Error::Bootstrap { failed, total: b });
    }
    if failed > 0 {
        log::warn!("bootstrap metric failed on {failed} of {b} resamples");
    }
    let m = mean(&values);
    let ss: f64 = values.iter().map(|x| (x - m).powi(2)).sum();
    Ok((ss / (values.len() - 1) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_metric_has_zero_se() {
        let g = TopicGroup {
            topic_id: 0,
            theta_columns: DMatrix::from_element(5, 2, 0.5),
            phi_rows: DMatrix::from_element(2, 4, 0.25),
        };
        let se = bootstrap_se(|_| Ok(1.0), &[g], 60, 1).unwrap();
        assert_eq!(se, 0.0);
    }

    #[test]
    fn too_few_resamples_rejected() {
        assert!(bootstrap_se(|_| Ok(1.0), &[], 10, 1).is_err());
    }

    #[test]
    fn frequent_failures_are_reported() {
        let g = TopicGroup {
            topic_id: 0,
            theta_columns: DMatrix::from_element(5, 2, 0.5),
            phi_rows: DMatrix::from_element(2, 4, 0.25),
        };
        let err = bootstrap_se(|_| Err(Error::Undefined("alpha")), &[g], 50, 1).unwrap_err();
        assert!(matches!(err, Error::Bootstrap { failed: 50, total: 50 }));
    }
}
