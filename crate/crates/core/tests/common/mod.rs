//! Brute-force reference implementations shared by the integration tests.
//! Nothing here calls into the library's numerical code.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use toprel::align::{Alignment, Matching, TopN, TopicGroup};

pub type Mat = Vec<Vec<f64>>;

/// Columns of an N x n matrix.
pub fn cols(m: &DMatrix<f64>) -> Mat {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)]).collect())
        .collect()
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn var(x: &[f64]) -> f64 {
    cov(x, x)
}

pub fn cov(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut s = 0.0;
    for i in 0..x.len() {
        s += (x[i] - mx) * (y[i] - my);
    }
    s / (x.len() - 1) as f64
}

pub fn cov_matrix(columns: &Mat) -> Mat {
    let n = columns.len();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            s[i][j] = cov(&columns[i], &columns[j]);
        }
    }
    s
}

pub fn total(m: &Mat) -> f64 {
    m.iter().flatten().sum()
}

pub fn cosine(x: &[f64], y: &[f64]) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let nx: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ny: f64 = y.iter().map(|a| a * a).sum::<f64>().sqrt();
    dot / (nx * ny)
}

/// Row means of the given columns.
pub fn composite(columns: &Mat) -> Vec<f64> {
    let n = columns.len() as f64;
    (0..columns[0].len())
        .map(|i| columns.iter().map(|c| c[i]).sum::<f64>() / n)
        .collect()
}

/// Classical form n/(n−1)·(1 − Σ item variances / variance of the total).
pub fn alpha_textbook(columns: &Mat) -> f64 {
    let n = columns.len() as f64;
    let items: f64 = columns.iter().map(|c| var(c)).sum();
    let totals: Vec<f64> = (0..columns[0].len())
        .map(|i| columns.iter().map(|c| c[i]).sum())
        .collect();
    n / (n - 1.0) * (1.0 - items / var(&totals))
}

pub fn gauss_jordan_inverse(a: &Mat) -> Option<Mat> {
    let n = a.len();
    let mut m: Mat = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs()))?;
        if m[p][c].abs() < 1e-300 {
            return None;
        }
        m.swap(c, p);
        let d = m[c][c];
        m[c].iter_mut().for_each(|x| *x /= d);
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                for k in 0..2 * n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Cyclic Jacobi rotations. Returns eigenvalues and eigenvectors as
/// columns of the second value.
pub fn jacobi_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.len();
    let mut m = a.clone();
    let mut v: Mat = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| m[i][i] * m[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| m[i][i]).collect(), v)
}

/// One-factor principal-axis factoring on a covariance matrix: SMC start
/// (largest |r| when the correlation matrix is singular), leading eigenpair
/// per step, stop when no loading moves by 1e-6, at most 1000 steps,
/// sign so that the loadings sum to a nonnegative value.
pub fn paf_loadings(s: &Mat) -> Vec<f64> {
    let p = s.len();
    let sd: Vec<f64> = (0..p).map(|i| s[i][i].sqrt()).collect();
    let r: Mat = (0..p)
        .map(|i| (0..p).map(|j| s[i][j] / (sd[i] * sd[j])).collect())
        .collect();
    let min_eigen = jacobi_eigen(&r).0.into_iter().fold(f64::INFINITY, f64::min);
    let mut h: Vec<f64> = match (min_eigen > 1e-10).then(|| gauss_jordan_inverse(&r)).flatten() {
        Some(inv) => (0..p).map(|i| (1.0 - 1.0 / inv[i][i]) * s[i][i]).collect(),
        None => (0..p)
            .map(|i| {
                let best = (0..p).filter(|&j| j != i).map(|j| r[i][j].abs()).fold(0.0, f64::max);
                best * s[i][i]
            })
            .collect(),
    };
    let mut prev: Option<Vec<f64>> = None;
    for _ in 0..1000 {
        let mut reduced = s.clone();
        for i in 0..p {
            reduced[i][i] = h[i];
        }
        let (values, vectors) = jacobi_eigen(&reduced);
        let top = (0..p).max_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
        let scale = values[top].max(0.0).sqrt();
        let mut l: Vec<f64> = (0..p).map(|i| vectors[i][top] * scale).collect();
        if l.iter().sum::<f64>() < 0.0 {
            l.iter_mut().for_each(|x| *x = -*x);
        }
        h = l.iter().map(|x| x * x).collect();
        let done = prev
            .as_ref()
            .is_some_and(|q| q.iter().zip(&l).all(|(a, b)| (a - b).abs() < 1e-6));
        prev = Some(l);
        if done {
            break;
        }
    }
    prev.unwrap()
}

/// 1'λλ'1 divided by the sum of all covariance entries.
pub fn omega_total(s: &Mat) -> f64 {
    let l = paf_loadings(s);
    l.iter().sum::<f64>().powi(2) / total(s)
}

fn source_weights(g: &TopicGroup) -> (f64, f64) {
    let (d, v) = (g.theta_columns.nrows() as f64, g.phi_rows.ncols() as f64);
    (d / (d + v), v / (d + v))
}

fn word_cols(g: &TopicGroup) -> Mat {
    cols(&g.phi_rows.transpose())
}

fn moments(s: &Mat) -> (f64, f64) {
    let n = s.len();
    let diag: f64 = (0..n).map(|i| s[i][i]).sum();
    (diag / n as f64, (total(s) - diag) / (n * (n - 1)) as f64)
}

pub fn stratified_alpha(groups: &[TopicGroup], drop: usize) -> f64 {
    let kept: Vec<&TopicGroup> = groups.iter().filter(|g| g.topic_id != drop).collect();
    let (wd, ww) = source_weights(kept[0]);
    let mut unreliable = 0.0;
    let mut doc_sum = vec![0.0; kept[0].theta_columns.nrows()];
    let mut word_sum = vec![0.0; kept[0].phi_rows.ncols()];
    for g in kept {
        let (dc, wc) = (cols(&g.theta_columns), word_cols(g));
        let n = dc.len() as f64;
        let (vd, cd) = moments(&cov_matrix(&dc));
        let (vw, cw) = moments(&cov_matrix(&wc));
        let (v, c) = (wd * vd + ww * vw, wd * cd + ww * cw);
        let alpha = n * c / (v + (n - 1.0) * c);
        let (d_comp, w_comp) = (composite(&dc), composite(&wc));
        let sigma_i = wd * var(&d_comp) + ww * var(&w_comp);
        unreliable += sigma_i * (1.0 - alpha);
        doc_sum.iter_mut().zip(&d_comp).for_each(|(s, x)| *s += x);
        word_sum.iter_mut().zip(&w_comp).for_each(|(s, x)| *s += x);
    }
    1.0 - unreliable / (wd * var(&doc_sum) + ww * var(&word_sum))
}

pub fn multivariate_omega(groups: &[TopicGroup], drop: usize) -> f64 {
    let mut acc = 0.0;
    let mut weight = 0.0;
    for g in groups.iter().filter(|g| g.topic_id != drop) {
        let (wd, ww) = source_weights(g);
        let od = omega_total(&cov_matrix(&cols(&g.theta_columns)));
        let ow = omega_total(&cov_matrix(&word_cols(g)));
        let obs = (g.theta_columns.nrows() + g.phi_rows.ncols()) as f64;
        acc += obs * (wd * od + ww * ow);
        weight += obs;
    }
    acc / weight
}

fn mean_pairwise_cosine(v: &Mat) -> f64 {
    let mut s = 0.0;
    let mut k = 0;
    for a in 0..v.len() {
        for b in a + 1..v.len() {
            s += cosine(&v[a], &v[b]);
            k += 1;
        }
    }
    s / k as f64
}

pub fn maximal_reliability(groups: &[TopicGroup]) -> f64 {
    let k = groups.len();
    let mut signal = 0.0;
    for g in groups {
        let n = g.theta_columns.ncols() as f64;
        let r = (mean_pairwise_cosine(&cols(&g.theta_columns)) + mean_pairwise_cosine(&word_cols(g))) / 2.0;
        signal += n * r / (1.0 - r);
    }
    let noise = if k == 1 {
        1.0
    } else {
        let mut rho = 0.0;
        let mut pairs = 0;
        for i in 0..k {
            for j in i + 1..k {
                let (di, dj) = (
                    composite(&cols(&groups[i].theta_columns)),
                    composite(&cols(&groups[j].theta_columns)),
                );
                let (wi, wj) = (composite(&word_cols(&groups[i])), composite(&word_cols(&groups[j])));
                rho += (cosine(&di, &dj) + cosine(&wi, &wj)) / 2.0;
                pairs += 1;
            }
        }
        rho /= pairs as f64;
        k as f64 / (1.0 + (k as f64 - 1.0) * rho)
    };
    signal / (noise + signal)
}

/// Columns `offset + λᵣ·f + e` with f, e standard normal.
pub fn one_factor_matrix(rng: &mut ChaCha8Rng, rows: usize, loadings: &[f64], offset: f64) -> DMatrix<f64> {
    let f: Vec<f64> = (0..rows).map(|_| StandardNormal.sample(rng)).collect();
    DMatrix::from_fn(rows, loadings.len(), |i, j| {
        let e: f64 = StandardNormal.sample(rng);
        offset + loadings[j] * f[i] + e
    })
}

/// Random positive topic groups of the given shape.
pub fn random_groups(rng: &mut ChaCha8Rng, k: usize, n: usize, d: usize, v: usize) -> Vec<TopicGroup> {
    (0..k)
        .map(|t| {
            let loadings: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
            TopicGroup {
                topic_id: t,
                theta_columns: one_factor_matrix(rng, d, &loadings, 6.0),
                phi_rows: one_factor_matrix(rng, v, &loadings, 6.0).transpose(),
            }
        })
        .collect()
}

/// Identity alignment over `n` replications with reference 0.
pub fn identity_alignment(k: usize, n: usize) -> Alignment {
    Alignment {
        reference_index: 0,
        replications: (1..n).collect(),
        mappings: vec![(0..k).collect(); n - 1],
        matched_similarities: vec![vec![1.0; k]; n - 1],
        top_n: TopN::All,
        matching: Matching::Greedy,
    }
}
