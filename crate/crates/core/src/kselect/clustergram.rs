//! Clustergram: PC1 means of the K-means clusters at each k, with links from
//! every cluster to its largest-overlap parent at k − 1.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pca::{pca_first_component, Pc1};
use crate::cluster::{kmeans_restarts_sequential, KMeansOptions};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::{self, TAG_CLUSTERGRAM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Every repetition's rows, tagged with the repetition index.
    #[default]
    Overlay,
    /// One row per (k, rank of PC1 mean), averaged across repetitions.
    Average,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "overlay" => Ok(Self::Overlay),
            "average" => Ok(Self::Average),
            other => Err(Error::Config(format!("unknown clustergram aggregation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClustergramOptions {
    pub k_min: usize,
    pub k_max: usize,
    pub reps: usize,
    pub restarts: usize,
    pub aggregation: Aggregation,
    pub kmeans: KMeansOptions,
}

impl Default for ClustergramOptions {
    fn default() -> Self {
        Self {
            k_min: 1,
            k_max: 12,
            reps: 100,
            restarts: 25,
            aggregation: Aggregation::Overlay,
            kmeans: KMeansOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClustergramRow {
    /// `None` for averaged tables.
    pub rep: Option<usize>,
    pub k: usize,
    pub cluster_id: usize,
    pub pc1_mean: f64,
    pub size: usize,
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClustergramTable {
    pub k_min: usize,
    pub k_max: usize,
    pub reps: usize,
    pub aggregation: Aggregation,
    pub rows: Vec<ClustergramRow>,
    pub pc1: Pc1,
}

impl ClustergramTable {
    pub fn rows_at(&self, k: usize) -> impl Iterator<Item = &ClustergramRow> {
        self.rows.iter().filter(move |r| r.k == k)
    }

    /// Mean over repetitions of the smallest gap between adjacent PC1 means
    /// at each k ≥ 2.
    pub fn separation_by_k(&self) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for k in self.k_min.max(2)..=self.k_max {
            let mut groups: Vec<(Option<usize>, Vec<f64>)> = Vec::new();
            for r in self.rows_at(k) {
                match groups.iter_mut().find(|(rep, _)| *rep == r.rep) {
                    Some(g) => g.1.push(r.pc1_mean),
                    None => groups.push((r.rep, vec![r.pc1_mean])),
                }
            }
            if groups.is_empty() {
                continue;
            }
            let total: f64 = groups
                .iter_mut()
                .map(|(_, m)| {
                    m.sort_by(f64::total_cmp);
                    m.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
                })
                .sum();
            out.push((k, total / groups.len() as f64));
        }
        out
    }

    /// The (up to) two ks whose clusters are most evenly spread along PC1.
    pub fn candidate_ks(&self) -> Vec<usize> {
        let mut sep = self.separation_by_k();
        sep.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        sep.into_iter().take(2).map(|(k, _)| k).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["rep", "k", "cluster_id", "pc1_mean", "size", "parent_cluster_id"])?;
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            out.write_record([
                opt(r.rep),
                r.k.to_string(),
                r.cluster_id.to_string(),
                r.pc1_mean.to_string(),
                r.size.to_string(),
                opt(r.parent),
            ])?;
        }
        out.flush().map_err(|e| Error::io("clustergram.csv", e))?;
        Ok(())
    }
}

fn rep_rows(
    points: &Matrix,
    scores: &[f64],
    opts: &ClustergramOptions,
    rep: usize,
    master: u64,
) -> Result<Vec<ClustergramRow>> {
    let mut rows = Vec::new();
    let mut prev: Option<Vec<usize>> = None;
    for k in opts.k_min..=opts.k_max {
        let s = seed::derive(master, &[TAG_CLUSTERGRAM, rep as u64, k as u64]);
        let model = kmeans_restarts_sequential(points, k, opts.restarts, s, &opts.kmeans)?;
        let mut sum = vec![0.0; k];
        let mut size = vec![0usize; k];
        for (&a, &sc) in model.assignments.iter().zip(scores) {
            sum[a] += sc;
            size[a] += 1;
        }
        let parents: Vec<Option<usize>> = match &prev {
            None => vec![None; k],
            Some(pa) => {
                let kp = k - 1;
                let mut overlap = vec![0usize; k * kp];
                for (&c, &p) in model.assignments.iter().zip(pa) {
                    overlap[c * kp + p] += 1;
                }
                (0..k)
                    .map(|c| {
                        let row = &overlap[c * kp..(c + 1) * kp];
                        // First maximum wins, so ties go to the lower parent id.
                        let best = (0..kp).fold(0, |b, p| if row[p] > row[b] { p } else { b });
                        Some(best)
                    })
                    .collect()
            }
        };
        for c in 0..k {
            rows.push(ClustergramRow {
                rep: Some(rep),
                k,
                cluster_id: c,
                pc1_mean: sum[c] / size[c] as f64,
                size: size[c],
                parent: parents[c],
            });
        }
        prev = Some(model.assignments);
    }
    Ok(rows)
}

/// Sizes rounded to integers that still sum to `n` (largest remainder).
fn round_sizes(avg: &[f64], n: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = avg.iter().map(|x| x.floor() as usize).collect();
    let short = n.saturating_sub(sizes.iter().sum());
    let mut order: Vec<usize> = (0..avg.len()).collect();
    order.sort_by(|&a, &b| (avg[b] - avg[b].floor()).total_cmp(&(avg[a] - avg[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().take(short) {
        sizes[i] += 1;
    }
    sizes
}

fn average(rows: &[ClustergramRow], opts: &ClustergramOptions, n: usize) -> Vec<ClustergramRow> {
    let reps = opts.reps as f64;
    let mut out = Vec::new();
    for k in opts.k_min..=opts.k_max {
        let mut mean = vec![0.0; k];
        let mut size = vec![0.0; k];
        for rep in 0..opts.reps {
            let mut here: Vec<&ClustergramRow> = rows.iter().filter(|r| r.k == k && r.rep == Some(rep)).collect();
            here.sort_by(|a, b| a.pc1_mean.total_cmp(&b.pc1_mean).then(a.cluster_id.cmp(&b.cluster_id)));
            for (rank, r) in here.iter().enumerate() {
                mean[rank] += r.pc1_mean / reps;
                size[rank] += r.size as f64 / reps;
            }
        }
        let sizes = round_sizes(&size, n);
        for c in 0..k {
            out.push(ClustergramRow { rep: None, k, cluster_id: c, pc1_mean: mean[c], size: sizes[c], parent: None });
        }
    }
    out
}

pub fn clustergram(points: &Matrix, opts: &ClustergramOptions, master_seed: u64) -> Result<ClustergramTable> {
    let n = points.rows();
    if opts.k_min < 1 || opts.k_max < opts.k_min || opts.k_max > n {
        return Err(Error::KRangeInvalid { lo: opts.k_min, hi: opts.k_max, n });
    }
    if opts.reps < 1 || opts.restarts < 1 {
        return Err(Error::InvalidParameter("reps and restarts must be at least 1".into()));
    }
    let pc1 = pca_first_component(points)?;
    let per_rep: Vec<Vec<ClustergramRow>> = (0..opts.reps)
        .into_par_iter()
        .map(|rep| rep_rows(points, &pc1.scores, opts, rep, master_seed))
        .collect::<Result<_>>()?;
    let mut rows: Vec<ClustergramRow> = per_rep.into_iter().flatten().collect();
    if opts.aggregation == Aggregation::Average {
        rows = average(&rows, opts, n);
    }
    Ok(ClustergramTable {
        k_min: opts.k_min,
        k_max: opts.k_max,
        reps: opts.reps,
        aggregation: opts.aggregation,
        rows,
        pc1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn largest_remainder_keeps_the_total() {
        assert_eq!(round_sizes(&[3.5, 3.5, 3.0], 10), vec![4, 3, 3]);
        assert_eq!(round_sizes(&[1.2, 1.2, 1.6], 4), vec![1, 1, 2]);
    }

    #[test]
    fn parents_follow_overlap() {
        let pts = Matrix::from_rows(&[[0.0, 0.0], [0.1, 0.0], [10.0, 0.0], [10.1, 0.0], [20.0, 1.0], [20.1, 1.0]]);
        let opts = ClustergramOptions { k_min: 1, k_max: 3, reps: 2, restarts: 10, ..Default::default() };
        let t = clustergram(&pts, &opts, 5).unwrap();
        for r in &t.rows {
            assert_eq!(r.parent.is_none(), r.k == 1);
        }
        for rep in 0..2 {
            for k in 1..=3 {
                let here: Vec<_> = t.rows.iter().filter(|r| r.k == k && r.rep == Some(rep)).collect();
                assert_eq!(here.len(), k);
                assert_eq!(here.iter().map(|r| r.size).sum::<usize>(), 6);
                let wm: f64 = here.iter().map(|r| r.pc1_mean * r.size as f64).sum::<f64>() / 6.0;
                assert!(wm.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_bad_range() {
        let pts = Matrix::from_rows(&[[0.0], [1.0]]);
        let opts = ClustergramOptions { k_min: 1, k_max: 3, reps: 1, restarts: 1, ..Default::default() };
        assert!(matches!(clustergram(&pts, &opts, 0), Err(Error::KRangeInvalid { .. })));
    }
}
