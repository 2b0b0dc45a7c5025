//! Gap statistic with the one-standard-error selection rule, repeated over
//! independent repetitions and summarized by the modal choice of k.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cluster::{best_run_sequential, KMeansOptions};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::{self, TAG_GAP_OBSERVED, TAG_GAP_REFERENCE};

#[derive(Debug, Clone, PartialEq)]
pub struct GapOptions {
    pub k_min: usize,
    pub k_max: usize,
    /// Reference sets per repetition.
    pub b: usize,
    pub reps: usize,
    /// K-means restarts per individual fit.
    pub restarts: usize,
    pub kmeans: KMeansOptions,
}

impl Default for GapOptions {
    fn default() -> Self {
        Self { k_min: 1, k_max: 10, b: 50, reps: 500, restarts: 25, kmeans: KMeansOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub k: usize,
    /// Mean over repetitions of gap(k).
    pub gap: f64,
    /// Mean over repetitions of s_k.
    pub se: f64,
    pub log_w_observed: f64,
    pub log_w_reference: f64,
    /// Share of repetitions that selected this k.
    pub selection_frequency: f64,
}

/// One repetition's curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapCurve {
    pub gap: Vec<f64>,
    pub se: Vec<f64>,
    pub selected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub k_min: usize,
    pub k_max: usize,
    pub rows: Vec<GapRow>,
    pub curves: Vec<GapCurve>,
    pub modal_k: usize,
    pub reps: usize,
    pub b: usize,
}

impl GapReport {
    pub fn selections(&self) -> Vec<usize> {
        self.curves.iter().map(|c| c.selected).collect()
    }

    /// Most and second-most frequently selected k (ties → smaller k).
    pub fn ranked_selections(&self) -> Vec<(usize, usize)> {
        let mut counts: Vec<(usize, usize)> = (self.k_min..=self.k_max)
            .map(|k| (k, self.curves.iter().filter(|c| c.selected == k).count()))
            .filter(|&(_, c)| c > 0)
            .collect();
        counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        counts
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["k", "gap_mean", "se", "selection_frequency", "log_w_observed", "log_w_reference"])?;
        for r in &self.rows {
            out.write_record([
                r.k.to_string(),
                r.gap.to_string(),
                r.se.to_string(),
                r.selection_frequency.to_string(),
                r.log_w_observed.to_string(),
                r.log_w_reference.to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("gap.csv", e))?;
        Ok(())
    }
}

/// Smallest k with gap(k) ≥ gap(k+1) − s(k+1); the largest k when none qualifies.
/// `gap[i]` and `se[i]` belong to `k_min + i`.
pub fn one_se_rule(k_min: usize, gap: &[f64], se: &[f64]) -> usize {
    for i in 0..gap.len().saturating_sub(1) {
        if gap[i] >= gap[i + 1] - se[i + 1] {
            return k_min + i;
        }
    }
    k_min + gap.len().saturating_sub(1)
}

/// Uniform sample over the per-variable bounding box of `points`.
pub fn uniform_reference<R: Rng>(points: &Matrix, rng: &mut R) -> Matrix {
    let d = points.cols();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for r in points.iter_rows() {
        for j in 0..d {
            lo[j] = lo[j].min(r[j]);
            hi[j] = hi[j].max(r[j]);
        }
    }
    let mut out = Matrix::zeros(points.rows(), d);
    for i in 0..points.rows() {
        for (j, x) in out.row_mut(i).iter_mut().enumerate() {
            *x = lo[j] + (hi[j] - lo[j]) * rng.random::<f64>();
        }
    }
    out
}

fn log_w_curve(points: &Matrix, opts: &GapOptions, seed_path: &[u64], master: u64) -> Result<Vec<f64>> {
    (opts.k_min..=opts.k_max)
        .map(|k| {
            let mut path = seed_path.to_vec();
            path.push(k as u64);
            let (_, run) = best_run_sequential(points, k, opts.restarts, seed::derive(master, &path), &opts.kmeans)?;
            if run.wcss <= 0.0 {
                return Err(Error::DegenerateData(format!("W_{k} = 0; too many duplicated points for k = {k}")));
            }
            Ok(run.wcss.ln())
        })
        .collect()
}

pub fn gap_statistic(points: &Matrix, opts: &GapOptions, master_seed: u64) -> Result<GapReport> {
    let n = points.rows();
    if opts.k_min < 1 || opts.k_max < opts.k_min || opts.k_max + 1 > n {
        return Err(Error::KRangeInvalid { lo: opts.k_min, hi: opts.k_max, n });
    }
    if opts.b < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 reference sets, got {}", opts.b)));
    }
    if opts.reps < 1 || opts.restarts < 1 {
        return Err(Error::InvalidParameter("reps and restarts must be at least 1".into()));
    }

    // Task 0 of each repetition is the observed data; tasks 1..=b are references.
    let tasks: Vec<(usize, usize)> = (0..opts.reps).flat_map(|r| (0..=opts.b).map(move |t| (r, t))).collect();
    let curves: Vec<Vec<f64>> = tasks
        .par_iter()
        .map(|&(rep, t)| {
            if t == 0 {
                log_w_curve(points, opts, &[TAG_GAP_OBSERVED, rep as u64], master_seed)
            } else {
                let path = [TAG_GAP_REFERENCE, rep as u64, t as u64];
                let mut rng = seed::rng(seed::derive(master_seed, &path));
                let reference = uniform_reference(points, &mut rng);
                log_w_curve(&reference, opts, &path, master_seed)
            }
        })
        .collect::<Result<_>>()?;

    let nk = opts.k_max - opts.k_min + 1;
    let bf = opts.b as f64;
    let mut rep_curves = Vec::with_capacity(opts.reps);
    let mut obs_sum = vec![0.0; nk];
    let mut ref_sum = vec![0.0; nk];
    for per_rep in curves.chunks_exact(opts.b + 1) {
        let observed = &per_rep[0];
        let refs = &per_rep[1..];
        let mut gap = vec![0.0; nk];
        let mut se = vec![0.0; nk];
        for i in 0..nk {
            let mean = refs.iter().map(|c| c[i]).sum::<f64>() / bf;
            let sd = (refs.iter().map(|c| (c[i] - mean) * (c[i] - mean)).sum::<f64>() / bf).sqrt();
            gap[i] = mean - observed[i];
            se[i] = sd * (1.0 + 1.0 / bf).sqrt();
            obs_sum[i] += observed[i];
            ref_sum[i] += mean;
        }
        let selected = one_se_rule(opts.k_min, &gap, &se);
        rep_curves.push(GapCurve { gap, se, selected });
    }

    let reps = opts.reps as f64;
    let rows = (0..nk)
        .map(|i| {
            let k = opts.k_min + i;
            GapRow {
                k,
                gap: rep_curves.iter().map(|c| c.gap[i]).sum::<f64>() / reps,
                se: rep_curves.iter().map(|c| c.se[i]).sum::<f64>() / reps,
                log_w_observed: obs_sum[i] / reps,
                log_w_reference: ref_sum[i] / reps,
                selection_frequency: rep_curves.iter().filter(|c| c.selected == k).count() as f64 / reps,
            }
        })
        .collect();
    let mut report = GapReport {
        k_min: opts.k_min,
        k_max: opts.k_max,
        rows,
        curves: rep_curves,
        modal_k: opts.k_min,
        reps: opts.reps,
        b: opts.b,
    };
    report.modal_k = report.ranked_selections()[0].0;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_se_rule_by_hand() {
        let gap = [0.5, 0.9, 0.95, 0.93];
        let se = [0.01; 4];
        assert_eq!(one_se_rule(1, &gap, &se), 3);
        // Strictly increasing curve falls through to the largest k.
        assert_eq!(one_se_rule(1, &[0.1, 0.2, 0.3], &[0.0; 3]), 3);
        assert_eq!(one_se_rule(2, &[0.4], &[0.1]), 2);
    }

    #[test]
    fn reference_stays_in_the_box() {
        let pts = Matrix::from_rows(&[[0.0, 5.0], [1.0, 7.0], [0.5, 6.0]]);
        let mut rng = seed::rng(3);
        let r = uniform_reference(&pts, &mut rng);
        for row in r.iter_rows() {
            assert!((0.0..=1.0).contains(&row[0]));
            assert!((5.0..=7.0).contains(&row[1]));
        }
    }

    #[test]
    fn range_and_parameter_checks() {
        let pts = Matrix::from_rows(&[[0.0], [1.0], [2.0]]);
        let bad = GapOptions { k_min: 1, k_max: 3, b: 5, reps: 1, restarts: 1, ..Default::default() };
        assert!(matches!(gap_statistic(&pts, &bad, 0), Err(Error::KRangeInvalid { .. })));
        let bad = GapOptions { k_min: 0, k_max: 2, b: 5, reps: 1, restarts: 1, ..Default::default() };
        assert!(matches!(gap_statistic(&pts, &bad, 0), Err(Error::KRangeInvalid { .. })));
        let bad = GapOptions { k_min: 1, k_max: 2, b: 1, reps: 1, restarts: 1, ..Default::default() };
        assert!(matches!(gap_statistic(&pts, &bad, 0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn duplicated_points_are_degenerate() {
        let pts = Matrix::from_rows(&[[0.0], [0.0], [1.0], [1.0], [1.0]]);
        let opts = GapOptions { k_min: 1, k_max: 3, b: 3, reps: 1, restarts: 3, ..Default::default() };
        assert!(matches!(gap_statistic(&pts, &opts, 0), Err(Error::DegenerateData(_))));
    }
}
