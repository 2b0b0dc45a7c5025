//! First principal component by power iteration on the sample covariance.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Pc1 {
    /// Unit-length top eigenvector; its largest-magnitude entry is positive.
    pub loadings: Vec<f64>,
    /// Projection of every (centered) row onto `loadings`.
    pub scores: Vec<f64>,
    /// Variance along the component.
    pub eigenvalue: f64,
}

const MAX_ITER: usize = 100_000;
const TOL: f64 = 1e-15;

pub fn sample_covariance(points: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = points.rows();
    let d = points.cols();
    if n < 2 || d == 0 {
        return Err(Error::TooFewDistricts { need: 2, got: n });
    }
    let means: Vec<f64> = (0..d).map(|j| points.iter_rows().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let mut cov = Matrix::zeros(d, d);
    for row in points.iter_rows() {
        for a in 0..d {
            let da = row[a] - means[a];
            for b in a..d {
                let v = cov.get(a, b) + da * (row[b] - means[b]);
                cov.set(a, b, v);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov.get(a, b) / (n - 1) as f64;
            cov.set(a, b, v);
            cov.set(b, a, v);
        }
    }
    Ok((means, cov))
}

fn mat_vec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    m.iter_rows().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn fix_sign(v: &mut [f64]) {
    let mut lead = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[lead].abs() {
            lead = i;
        }
    }
    if v[lead] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn pca_first_component(points: &Matrix) -> Result<Pc1> {
    let (means, cov) = sample_covariance(points)?;
    if cov.as_slice().iter().all(|&x| x == 0.0) {
        return Err(Error::DegenerateCovariance);
    }
    // Start from the covariance column with the largest norm: it cannot be
    // orthogonal to the dominant eigenvector.
    let d = cov.cols();
    let start = (0..d)
        .max_by(|&a, &b| {
            let na: f64 = cov.row(a).iter().map(|x| x * x).sum();
            let nb: f64 = cov.row(b).iter().map(|x| x * x).sum();
            na.total_cmp(&nb).then(b.cmp(&a))
        })
        .expect("d >= 1");
    let mut v = cov.row(start).to_vec();
    normalize(&mut v);
    for _ in 0..MAX_ITER {
        let mut next = mat_vec(&cov, &v);
        if normalize(&mut next) == 0.0 {
            break;
        }
        // Align sign before measuring the step so a negative eigenvalue's
        // oscillation does not look like non-convergence.
        let dot: f64 = next.iter().zip(&v).map(|(a, b)| a * b).sum();
        if dot < 0.0 {
            next.iter_mut().for_each(|x| *x = -*x);
        }
        let step = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if step < TOL {
            break;
        }
    }
    fix_sign(&mut v);
    let cv = mat_vec(&cov, &v);
    let eigenvalue = cv.iter().zip(&v).map(|(a, b)| a * b).sum();
    let scores =
        points.iter_rows().map(|r| r.iter().zip(&means).zip(&v).map(|((x, m), l)| (x - m) * l).sum()).collect();
    Ok(Pc1 { loadings: v, scores, eigenvalue })
}
