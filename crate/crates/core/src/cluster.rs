//! K-means partitioning with repeated randomized restarts.
//!
//! A single run is plain Lloyd iteration. [`kmeans_restarts`] runs many
//! independent restarts, each with its own generator derived from the master
//! seed and the restart index, and keeps the lowest-WCSS model (lowest index on
//! ties). Cluster ids are relabeled canonically so that repeated runs and
//! permuted inputs produce comparable labels.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{sq_dist, Matrix};
use crate::seed;

/// How starting centers are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// `k` distinct data points drawn without replacement.
    #[default]
    Forgy,
    /// D² weighted seeding.
    KMeansPlusPlus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub init: Init,
    pub max_iterations: usize,
    /// Stop once no center moves further than this.
    pub tolerance: f64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self { init: Init::Forgy, max_iterations: 300, tolerance: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    /// `k × d`, in the feature space the model was fitted on.
    pub centers: Matrix,
    /// Cluster id per input row.
    pub assignments: Vec<usize>,
    pub wcss: f64,
    pub seed: u64,
    pub best_restart: usize,
    pub iterations: usize,
    pub converged: bool,
}

impl ClusterModel {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &a in &self.assignments {
            s[a] += 1;
        }
        s
    }

    /// Member row indices per cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.k];
        for (i, &a) in self.assignments.iter().enumerate() {
            m[a].push(i);
        }
        m
    }

    /// Rebuilds a model from persisted assignments and centers; WCSS is recomputed.
    pub fn from_parts(points: &Matrix, centers: Matrix, assignments: Vec<usize>) -> Result<Self> {
        if assignments.len() != points.rows() {
            return Err(Error::DimensionMismatch { expected: points.rows(), got: assignments.len() });
        }
        if centers.cols() != points.cols() {
            return Err(Error::DimensionMismatch { expected: points.cols(), got: centers.cols() });
        }
        let k = centers.rows();
        if let Some(&bad) = assignments.iter().find(|&&a| a >= k) {
            return Err(Error::UnknownClusterId(bad));
        }
        let wcss = wcss(points, &centers, &assignments);
        Ok(Self { k, centers, assignments, wcss, seed: 0, best_restart: 0, iterations: 0, converged: true })
    }
}

/// Σ‖x_i − c(a_i)‖² in row order.
pub fn wcss(points: &Matrix, centers: &Matrix, assignments: &[usize]) -> f64 {
    points.iter_rows().zip(assignments).map(|(p, &a)| sq_dist(p, centers.row(a))).sum()
}

/// Raw Lloyd result before relabeling.
#[derive(Debug, Clone)]
pub(crate) struct LloydRun {
    pub centers: Matrix,
    pub assignments: Vec<usize>,
    pub wcss: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn check_k(points: &Matrix, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::KZero);
    }
    if k > points.rows() {
        return Err(Error::KTooLarge { k, n: points.rows() });
    }
    Ok(())
}

fn initial_centers<R: Rng>(points: &Matrix, k: usize, init: Init, rng: &mut R) -> Matrix {
    let n = points.rows();
    let d = points.cols();
    match init {
        Init::Forgy => {
            let picks = index::sample(rng, n, k);
            let mut c = Matrix::zeros(k, d);
            for (slot, i) in picks.iter().enumerate() {
                c.row_mut(slot).copy_from_slice(points.row(i));
            }
            c
        }
        Init::KMeansPlusPlus => {
            let mut c = Matrix::zeros(k, d);
            let first = rng.random_range(0..n);
            c.row_mut(0).copy_from_slice(points.row(first));
            let mut nearest: Vec<f64> = points.iter_rows().map(|p| sq_dist(p, c.row(0))).collect();
            for slot in 1..k {
                let total: f64 = nearest.iter().sum();
                let pick = if total > 0.0 {
                    let mut target = rng.random::<f64>() * total;
                    let mut chosen = n - 1;
                    for (i, &w) in nearest.iter().enumerate() {
                        if target < w {
                            chosen = i;
                            break;
                        }
                        target -= w;
                    }
                    chosen
                } else {
                    rng.random_range(0..n)
                };
                c.row_mut(slot).copy_from_slice(points.row(pick));
                for (i, p) in points.iter_rows().enumerate() {
                    let dd = sq_dist(p, c.row(slot));
                    if dd < nearest[i] {
                        nearest[i] = dd;
                    }
                }
            }
            c
        }
    }
}

/// Lloyd iterations from seeded starting centers. `trace` receives the WCSS
/// after every center update.
pub(crate) fn lloyd<R: Rng>(
    points: &Matrix,
    k: usize,
    opts: &KMeansOptions,
    rng: &mut R,
    mut trace: Option<&mut Vec<f64>>,
) -> LloydRun {
    let n = points.rows();
    let d = points.cols();
    let mut centers = initial_centers(points, k, opts.init, rng);
    let mut assignments = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        iterations += 1;

        // Assignment step; ties go to the lowest center index.
        let mut changed = false;
        for (i, p) in points.iter_rows().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter_rows().enumerate() {
                let dd = sq_dist(p, center);
                if dd < best_d {
                    best_d = dd;
                    best = c;
                }
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
            dist[i] = best_d;
        }
        if !changed {
            // Centers are already the means of these memberships.
            converged = true;
            break;
        }

        counts.iter_mut().for_each(|c| *c = 0);
        for &a in &assignments {
            counts[a] += 1;
        }
        repair_empty(&mut assignments, &mut dist, &mut counts);

        // Update step.
        sums.iter_mut().for_each(|s| *s = 0.0);
        for (p, &a) in points.iter_rows().zip(&assignments) {
            for (s, x) in sums[a * d..(a + 1) * d].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut max_shift: f64 = 0.0;
        for c in 0..k {
            let cnt = counts[c] as f64;
            let row = centers.row_mut(c);
            let mut shift = 0.0;
            for (x, s) in row.iter_mut().zip(&sums[c * d..(c + 1) * d]) {
                let nx = s / cnt;
                shift += (nx - *x) * (nx - *x);
                *x = nx;
            }
            max_shift = max_shift.max(shift.sqrt());
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(wcss(points, &centers, &assignments));
        }
        if max_shift < opts.tolerance {
            converged = true;
            break;
        }
    }

    let wcss = wcss(points, &centers, &assignments);
    LloydRun { centers, assignments, wcss, iterations, converged }
}

/// Fills empty clusters by moving in the point farthest from its own center,
/// taken only from clusters that can spare a member.
fn repair_empty(assignments: &mut [usize], dist: &mut [f64], counts: &mut [usize]) {
    for c in 0..counts.len() {
        if counts[c] > 0 {
            continue;
        }
        let mut far = None;
        let mut far_d = -1.0;
        for (i, &a) in assignments.iter().enumerate() {
            if counts[a] > 1 && dist[i] > far_d {
                far_d = dist[i];
                far = Some(i);
            }
        }
        // k ≤ n guarantees a donor exists.
        let i = far.expect("k <= n leaves a cluster with a spare point");
        counts[assignments[i]] -= 1;
        assignments[i] = c;
        counts[c] = 1;
        dist[i] = 0.0;
    }
}

/// Relabels clusters by descending size, ties broken by lowest member index.
fn canonicalize(run: LloydRun, k: usize) -> (Matrix, Vec<usize>) {
    let mut size = vec![0usize; k];
    let mut first = vec![usize::MAX; k];
    for (i, &a) in run.assignments.iter().enumerate() {
        size[a] += 1;
        first[a] = first[a].min(i);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| size[b].cmp(&size[a]).then(first[a].cmp(&first[b])));
    let mut relabel = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new;
    }
    let centers = run.centers.select_rows(&order);
    let assignments = run.assignments.iter().map(|&a| relabel[a]).collect();
    (centers, assignments)
}

fn into_model(run: LloydRun, k: usize, seed: u64, restart: usize) -> ClusterModel {
    let wcss = run.wcss;
    let iterations = run.iterations;
    let converged = run.converged;
    let (centers, assignments) = canonicalize(run, k);
    ClusterModel { k, centers, assignments, wcss, seed, best_restart: restart, iterations, converged }
}

/// One K-means run seeded directly with `seed`.
pub fn kmeans_once(points: &Matrix, k: usize, seed: u64, opts: &KMeansOptions) -> Result<ClusterModel> {
    check_k(points, k)?;
    let mut rng = seed::rng(seed);
    let run = lloyd(points, k, opts, &mut rng, None);
    Ok(into_model(run, k, seed, 0))
}

/// The seed restart `index` uses under `master_seed`.
pub fn restart_seed(master_seed: u64, index: usize) -> u64 {
    seed::derive(master_seed, &[index as u64])
}

/// Best of `restarts` independent runs. The result does not depend on the
/// size of the rayon pool the call runs in.
pub fn kmeans_restarts(
    points: &Matrix,
    k: usize,
    restarts: usize,
    master_seed: u64,
    opts: &KMeansOptions,
) -> Result<ClusterModel> {
    check_k(points, k)?;
    if restarts == 0 {
        return Err(Error::NoRestarts);
    }
    let (best_idx, run) = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::rng(restart_seed(master_seed, r));
            (r, lloyd(points, k, opts, &mut rng, None))
        })
        .reduce_with(|a, b| if better(&b, &a) { b } else { a })
        .expect("restarts >= 1");
    let mut model = into_model(run, k, master_seed, best_idx);
    model.seed = master_seed;
    Ok(model)
}

#[inline]
fn better(a: &(usize, LloydRun), b: &(usize, LloydRun)) -> bool {
    a.1.wcss < b.1.wcss || (a.1.wcss == b.1.wcss && a.0 < b.0)
}

/// Sequential best-of-restarts WCSS, for callers that parallelize at an outer
/// level (gap statistic, clustergram).
pub(crate) fn best_run_sequential(
    points: &Matrix,
    k: usize,
    restarts: usize,
    master_seed: u64,
    opts: &KMeansOptions,
) -> Result<(usize, LloydRun)> {
    check_k(points, k)?;
    if restarts == 0 {
        return Err(Error::NoRestarts);
    }
    let mut best: Option<(usize, LloydRun)> = None;
    for r in 0..restarts {
        let mut rng = seed::rng(restart_seed(master_seed, r));
        let cand = (r, lloyd(points, k, opts, &mut rng, None));
        best = match best {
            Some(b) if !better(&cand, &b) => Some(b),
            _ => Some(cand),
        };
    }
    Ok(best.expect("restarts >= 1"))
}

/// Sequential counterpart of [`kmeans_restarts`] returning a canonical model.
pub(crate) fn kmeans_restarts_sequential(
    points: &Matrix,
    k: usize,
    restarts: usize,
    master_seed: u64,
    opts: &KMeansOptions,
) -> Result<ClusterModel> {
    let (idx, run) = best_run_sequential(points, k, restarts, master_seed, opts)?;
    Ok(into_model(run, k, master_seed, idx))
}

/// Euclidean distance from every point to its own center.
pub fn distances_to_center(points: &Matrix, model: &ClusterModel) -> Result<Vec<f64>> {
    if points.cols() != model.centers.cols() {
        return Err(Error::DimensionMismatch { expected: model.centers.cols(), got: points.cols() });
    }
    if points.rows() != model.assignments.len() {
        return Err(Error::DimensionMismatch { expected: model.assignments.len(), got: points.rows() });
    }
    Ok(points.iter_rows().zip(&model.assignments).map(|(p, &a)| sq_dist(p, model.centers.row(a)).sqrt()).collect())
}
