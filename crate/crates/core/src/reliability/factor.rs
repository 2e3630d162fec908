//! One-factor principal-axis factoring.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 1000;
pub const TOLERANCE: f64 = 1e-6;
/// Floor applied to uniquenesses (Heywood cases).
pub const UNIQUENESS_FLOOR: f64 = 1e-6;
/// Correlation matrices with a smaller eigenvalue are treated as singular
/// when seeding communalities.
const SINGULAR_EIGENVALUE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorSolution {
    pub loadings: Vec<f64>,
    pub uniquenesses: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl FactorSolution {
    pub fn loading_sum(&self) -> f64 {
        self.loadings.iter().sum()
    }
}

/// Starting communalities: squared multiple correlations on the covariance
/// scale. When the correlation matrix is singular each item falls back to
/// its largest absolute correlation with another item.
pub fn initial_communalities(cov: &DMatrix<f64>) -> Vec<f64> {
    let p = cov.nrows();
    let sd: Vec<f64> = (0..p).map(|i| cov[(i, i)].sqrt()).collect();
    let corr = DMatrix::from_fn(p, p, |i, j| cov[(i, j)] / (sd[i] * sd[j]));
    let min_eigen = corr
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let inverse = if min_eigen > SINGULAR_EIGENVALUE {
        corr.clone().try_inverse()
    } else {
        None
    };
    match inverse {
        Some(inv) => (0..p).map(|i| (1.0 - 1.0 / inv[(i, i)]) * cov[(i, i)]).collect(),
        None => (0..p)
            .map(|i| {
                let r = (0..p)
                    .filter(|&j| j != i)
                    .map(|j| corr[(i, j)].abs())
                    .fold(0.0, f64::max);
                r * cov[(i, i)]
            })
            .collect(),
    }
}

/// Iterates: reduced matrix (communalities on the diagonal) → leading
/// eigenpair → loadings → communalities, until the largest loading change
/// is below [`TOLERANCE`] or [`MAX_ITERATIONS`] is reached.
pub fn fit_single_factor_cov(cov: &DMatrix<f64>) -> Result<FactorSolution> {
    let p = cov.nrows();
    if p < 2 || cov.ncols() != p {
        return Err(Error::invalid("need a square covariance matrix with at least 2 items"));
    }
    if cov.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularCovariance("non-finite entries".into()));
    }
    if let Some(i) = (0..p).find(|&i| !(cov[(i, i)] > 0.0)) {
        return Err(Error::SingularCovariance(format!("item {i} has zero variance")));
    }

    let mut communalities = initial_communalities(cov);
    let mut loadings: Option<Vec<f64>> = None;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut reduced = cov.clone();
        for (i, h) in communalities.iter().enumerate() {
            reduced[(i, i)] = *h;
        }
        let eig = SymmetricEigen::new(reduced);
        let top = eig.eigenvalues.imax();
        let scale = eig.eigenvalues[top].max(0.0).sqrt();
        let mut next: Vec<f64> = eig.eigenvectors.column(top).iter().map(|v| v * scale).collect();
        if next.iter().sum::<f64>() < 0.0 {
            next.iter_mut().for_each(|x| *x = -*x);
        }
        let delta = loadings.as_ref().map_or(f64::INFINITY, |prev| {
            prev.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        });
        communalities = next.iter().map(|l| l * l).collect();
        loadings = Some(next);
        if delta < TOLERANCE {
            converged = true;
            break;
        }
    }
    let loadings = loadings.expect("at least one iteration");
    if !converged {
        log::warn!("principal-axis factoring did not converge in {MAX_ITERATIONS} iterations");
    }
    let uniquenesses = loadings
        .iter()
        .enumerate()
        .map(|(i, l)| (cov[(i, i)] - l * l).max(UNIQUENESS_FLOOR))
        .collect();
    Ok(FactorSolution {
        loadings,
        uniquenesses,
        converged,
        iterations,
    })
}
