//! Cluster quality: one-way ANOVA F per variable, cluster sizes, and the
//! distribution of member distances to their centers.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::cluster::{distances_to_center, ClusterModel};
use crate::error::{Error, Result};
use crate::preprocess::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FValue {
    Finite(f64),
    /// Within-group sum of squares is zero.
    Infinite,
}

impl FValue {
    pub fn as_f64(self) -> f64 {
        match self {
            FValue::Finite(f) => f,
            FValue::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for FValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FValue::Finite(v) => fmt::Display::fmt(v, f),
            FValue::Infinite => f.pad("inf"),
        }
    }
}

impl Serialize for FValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            FValue::Finite(v) => s.serialize_f64(*v),
            FValue::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaRow {
    pub variable: String,
    pub f: FValue,
    pub df_between: usize,
    pub df_within: usize,
    pub ss_between: f64,
    pub ss_within: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaReport {
    pub rows: Vec<AnovaRow>,
    /// Mean of the finite F values.
    pub mean_f: f64,
    /// max F − min F over the finite values.
    pub spread: f64,
}

impl AnovaReport {
    pub fn f_of(&self, variable: &str) -> Option<FValue> {
        self.rows.iter().find(|r| r.variable == variable).map(|r| r.f)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["variable", "F", "df1", "df2", "ss_between", "ss_within"])?;
        for r in &self.rows {
            out.write_record([
                r.variable.clone(),
                r.f.to_string(),
                r.df_between.to_string(),
                r.df_within.to_string(),
                r.ss_between.to_string(),
                r.ss_within.to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("anova.csv", e))?;
        Ok(())
    }
}

pub fn anova_f(features: &FeatureMatrix, assignments: &[usize], k: usize) -> Result<AnovaReport> {
    let z = &features.z;
    let n = z.rows();
    if assignments.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: assignments.len() });
    }
    if k < 2 {
        return Err(Error::SingleCluster);
    }
    if n <= k {
        return Err(Error::KTooLarge { k, n });
    }
    if let Some(&bad) = assignments.iter().find(|&&a| a >= k) {
        return Err(Error::UnknownClusterId(bad));
    }
    let mut counts = vec![0usize; k];
    for &a in assignments {
        counts[a] += 1;
    }
    let (df1, df2) = (k - 1, n - k);
    let mut rows = Vec::with_capacity(z.cols());
    for j in 0..z.cols() {
        let mut sums = vec![0.0; k];
        for (row, &a) in z.iter_rows().zip(assignments) {
            sums[a] += row[j];
        }
        let grand = sums.iter().sum::<f64>() / n as f64;
        let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
        let ss_between: f64 = means.iter().zip(&counts).map(|(m, &c)| c as f64 * (m - grand) * (m - grand)).sum();
        let ss_within: f64 = z.iter_rows().zip(assignments).map(|(row, &a)| (row[j] - means[a]).powi(2)).sum();
        let f = if ss_within == 0.0 {
            FValue::Infinite
        } else {
            FValue::Finite((ss_between / df1 as f64) / (ss_within / df2 as f64))
        };
        rows.push(AnovaRow {
            variable: features.variables[j].name.clone(),
            f,
            df_between: df1,
            df_within: df2,
            ss_between,
            ss_within,
        });
    }
    let finite: Vec<f64> = rows
        .iter()
        .filter_map(|r| match r.f {
            FValue::Finite(v) => Some(v),
            FValue::Infinite => None,
        })
        .collect();
    let (mean_f, spread) = if finite.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
        (finite.iter().sum::<f64>() / finite.len() as f64, max - min)
    };
    Ok(AnovaReport { rows, mean_f, spread })
}

/// Member count per cluster id `0..k`; empty clusters appear as 0.
pub fn cluster_sizes(assignments: &[usize], k: usize) -> Vec<usize> {
    let k = k.max(assignments.iter().map(|&a| a + 1).max().unwrap_or(0));
    let mut out = vec![0; k];
    for &a in assignments {
        out[a] += 1;
    }
    out
}

pub fn write_sizes_csv<W: Write>(sizes: &[usize], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["cluster_id", "size"])?;
    for (c, s) in sizes.iter().enumerate() {
        out.write_record([c.to_string(), s.to_string()])?;
    }
    out.flush().map_err(|e| Error::io("sizes.csv", e))?;
    Ok(())
}

/// Type-7 sample quantile of sorted data: linear interpolation at (n − 1)·p.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outlier {
    pub district: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxStats {
    pub cluster: usize,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub lower_fence: f64,
    pub upper_fence: f64,
    /// Most extreme values still inside the fences.
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<Outlier>,
}

impl BoxStats {
    /// Summary of one group; `labels[i]` names `values[i]`.
    pub fn from_values(cluster: usize, values: &[f64], labels: &[String]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyCluster(cluster));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q1 = quantile_sorted(&sorted, 0.25);
        let q3 = quantile_sorted(&sorted, 0.75);
        let iqr = q3 - q1;
        let (lower_fence, upper_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let mut outliers: Vec<Outlier> = values
            .iter()
            .zip(labels)
            .filter(|(v, _)| **v < lower_fence || **v > upper_fence)
            .map(|(v, l)| Outlier { district: l.clone(), distance: *v })
            .collect();
        outliers.sort_by(|a, b| b.distance.total_cmp(&a.distance).then_with(|| a.district.cmp(&b.district)));
        Ok(Self {
            cluster,
            n: values.len(),
            min: sorted[0],
            q1,
            median: quantile_sorted(&sorted, 0.5),
            q3,
            max: sorted[sorted.len() - 1],
            mean: values.iter().sum::<f64>() / values.len() as f64,
            lower_fence,
            upper_fence,
            whisker_low: sorted.iter().copied().find(|&v| v >= lower_fence).unwrap_or(sorted[0]),
            whisker_high: sorted.iter().rev().copied().find(|&v| v <= upper_fence).unwrap_or(sorted[sorted.len() - 1]),
            outliers,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxplotStats {
    pub clusters: Vec<BoxStats>,
    /// Distance of every district to its own center, in district order.
    #[serde(skip)]
    pub distances: Vec<f64>,
}

impl BoxplotStats {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "cluster_id",
            "n",
            "min",
            "q1",
            "median",
            "q3",
            "max",
            "mean",
            "lower_fence",
            "upper_fence",
            "outliers",
        ])?;
        for b in &self.clusters {
            let outliers =
                b.outliers.iter().map(|o| format!("{}:{}", o.district, o.distance)).collect::<Vec<_>>().join(";");
            out.write_record([
                b.cluster.to_string(),
                b.n.to_string(),
                b.min.to_string(),
                b.q1.to_string(),
                b.median.to_string(),
                b.q3.to_string(),
                b.max.to_string(),
                b.mean.to_string(),
                b.lower_fence.to_string(),
                b.upper_fence.to_string(),
                outliers,
            ])?;
        }
        out.flush().map_err(|e| Error::io("boxplot.csv", e))?;
        Ok(())
    }
}

pub fn distance_distribution(features: &FeatureMatrix, model: &ClusterModel) -> Result<BoxplotStats> {
    let distances = distances_to_center(&features.z, model)?;
    let mut clusters = Vec::with_capacity(model.k);
    for (c, members) in model.members().iter().enumerate() {
        let values: Vec<f64> = members.iter().map(|&i| distances[i]).collect();
        let labels: Vec<String> = members.iter().map(|&i| features.districts[i].code.clone()).collect();
        clusters.push(BoxStats::from_values(c, &values, &labels)?);
    }
    Ok(BoxplotStats { clusters, distances })
}

/// Adjusted Rand index between two labelings of the same items.
/// Returns 1.0 when both labelings put everything in one group.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let pairs = |n: u64| (n * n.saturating_sub(1) / 2) as f64;
    let index: f64 = table.iter().flatten().map(|&n| pairs(n)).sum();
    let rows: f64 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| pairs(table.iter().map(|r| r[j]).sum())).sum();
    let total = pairs(a.len() as u64);
    let expected = rows * cols / total;
    let max = 0.5 * (rows + cols);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::DistrictCode;
    use crate::matrix::Matrix;
    use crate::preprocess::{Domain, VariableMeta};

    fn features(cols: &[&[f64]]) -> FeatureMatrix {
        let n = cols[0].len();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        let districts = (0..n).map(|i| DistrictCode::new(&format!("D{i}"), "")).collect();
        let vars = (0..cols.len()).map(|j| VariableMeta::new(&format!("v{j}"), Domain::Social, "x")).collect();
        FeatureMatrix::from_z(districts, vars, Matrix::from_rows(&rows)).unwrap()
    }

    #[test]
    fn two_pairs_give_f_eight() {
        let f = features(&[&[0.0, 1.0, 2.0, 3.0]]);
        let r = anova_f(&f, &[0, 0, 1, 1], 2).unwrap();
        let row = &r.rows[0];
        assert_eq!(row.f, FValue::Finite(8.0));
        assert_eq!((row.ss_between, row.ss_within, row.df_between, row.df_within), (4.0, 1.0, 1, 2));
    }

    #[test]
    fn equal_means_and_zero_within() {
        let f = features(&[&[0.0, 2.0, 0.0, 2.0], &[1.0, 1.0, 5.0, 5.0]]);
        let r = anova_f(&f, &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(r.rows[0].f, FValue::Finite(0.0));
        assert_eq!(r.rows[1].f, FValue::Infinite);
        assert_eq!(r.mean_f, 0.0);
    }

    #[test]
    fn anova_errors() {
        let f = features(&[&[0.0, 1.0]]);
        assert!(matches!(anova_f(&f, &[0, 0], 1), Err(Error::SingleCluster)));
        assert!(matches!(anova_f(&f, &[0, 1], 2), Err(Error::KTooLarge { .. })));
    }

    #[test]
    fn ari_values() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
        // contingency [[1,1],[1,1]]: index 0, expected 2/3, max 2
        assert!((adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]) + 0.5).abs() < 1e-12);
        assert!((adjusted_rand_index(&[0, 0, 0, 1, 1, 1], &[0, 0, 1, 1, 2, 2]) - 0.24242424242424243).abs() < 1e-12);
    }

    #[test]
    fn sizes_tally() {
        assert_eq!(cluster_sizes(&[0, 0, 1, 2, 2], 3), vec![2, 1, 2]);
        assert_eq!(cluster_sizes(&[0, 0, 2], 4), vec![2, 0, 1, 0]);
    }

    #[test]
    fn type7_quartiles_and_fences() {
        let labels: Vec<String> = (0..5).map(|i| i.to_string()).collect();
        let b = BoxStats::from_values(0, &[1.0, 2.0, 3.0, 4.0, 100.0], &labels).unwrap();
        assert_eq!((b.q1, b.median, b.q3), (2.0, 3.0, 4.0));
        assert_eq!(b.upper_fence, 7.0);
        assert_eq!((b.whisker_low, b.whisker_high), (1.0, 4.0));
        assert_eq!(b.outliers, vec![Outlier { district: "4".into(), distance: 100.0 }]);
        assert!(matches!(BoxStats::from_values(3, &[], &[]), Err(Error::EmptyCluster(3))));
    }

    #[test]
    fn interpolated_quantile() {
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0], 0.25), 1.75);
        assert_eq!(quantile_sorted(&[5.0], 0.75), 5.0);
    }
}
