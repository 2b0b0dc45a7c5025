//! Variable suitability and normalization: Pearson correlation, greedy
//! multicollinearity pruning and z-scoring into the clustering space.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::ingest::{DistrictCode, RateTable};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Demographic,
    Social,
}

impl std::str::FromStr for Domain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "demographic" => Ok(Domain::Demographic),
            "social" => Ok(Domain::Social),
            other => Err(Error::Config(format!("unknown domain `{other}`"))),
        }
    }
}

/// Sign convention applied before scoring. `Inverted` flips the variable so
/// that larger always means the same direction of disadvantage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    #[default]
    AsIs,
    Inverted,
}

impl std::str::FromStr for Polarity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "as_is" | "asis" | "" => Ok(Polarity::AsIs),
            "inverted" => Ok(Polarity::Inverted),
            other => Err(Error::Config(format!("unknown polarity `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableMeta {
    pub name: String,
    pub domain: Domain,
    pub dimension: String,
    pub polarity: Polarity,
}

impl VariableMeta {
    pub fn new(name: &str, domain: Domain, dimension: &str) -> Self {
        Self { name: name.to_string(), domain, dimension: dimension.to_string(), polarity: Polarity::AsIs }
    }

    /// The eleven age, ethnicity, qualification and employment measures of the
    /// digital-accessibility classification.
    pub fn digital_accessibility() -> Vec<VariableMeta> {
        use Domain::*;
        [
            ("aged_16_24", Demographic, "Age"),
            ("aged_25_34", Demographic, "Age"),
            ("aged_35_44", Demographic, "Age"),
            ("mixed", Demographic, "Ethnicity"),
            ("indian", Demographic, "Ethnicity"),
            ("pakistani_bangladeshi", Demographic, "Ethnicity"),
            ("black", Demographic, "Ethnicity"),
            ("other_minority", Demographic, "Ethnicity"),
            ("nvq3_plus", Social, "Qualifications"),
            ("unemployed", Social, "EmploymentStatus"),
            ("inactive", Social, "EmploymentStatus"),
        ]
        .into_iter()
        .map(|(n, d, dim)| VariableMeta::new(n, d, dim))
        .collect()
    }
}

/// Pearson coefficients with two-sided significance.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrMatrix {
    pub variables: Vec<String>,
    pub r: Matrix,
    pub p_values: Matrix,
    pub n: usize,
}

impl CorrMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.variables.iter().position(|v| v == a)?;
        let j = self.variables.iter().position(|v| v == b)?;
        Some(self.r.get(i, j))
    }

    /// Largest off-diagonal |r| among the named variables.
    pub fn max_abs_off_diagonal(&self, among: &[String]) -> f64 {
        let idx: Vec<usize> = among.iter().filter_map(|n| self.variables.iter().position(|v| v == n)).collect();
        let mut m: f64 = 0.0;
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                m = m.max(self.r.get(i, j).abs());
            }
        }
        m
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["variable".to_string()];
        header.extend(self.variables.iter().cloned());
        out.write_record(&header)?;
        for (i, v) in self.variables.iter().enumerate() {
            let mut rec = vec![v.clone()];
            rec.extend((0..self.variables.len()).map(|j| self.r.get(i, j).to_string()));
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::io("corr_matrix.csv", e))?;
        Ok(())
    }
}

fn column_mean(col: &[f64]) -> f64 {
    let n = col.len() as f64;
    let m = col.iter().sum::<f64>() / n;
    // Second pass removes most of the first pass's rounding error.
    m + col.iter().map(|x| x - m).sum::<f64>() / n
}

fn require_rows(n: usize, need: usize) -> Result<()> {
    if n < need {
        return Err(Error::TooFewDistricts { need, got: n });
    }
    Ok(())
}

pub fn correlation_matrix(rates: &RateTable) -> Result<CorrMatrix> {
    let n = rates.values.rows();
    let d = rates.values.cols();
    require_rows(n, 3)?;
    let mut centered = Vec::with_capacity(d);
    let mut norms = Vec::with_capacity(d);
    for j in 0..d {
        let col = rates.values.column(j);
        let m = column_mean(&col);
        let c: Vec<f64> = col.iter().map(|x| x - m).collect();
        let ss: f64 = c.iter().map(|x| x * x).sum();
        if ss == 0.0 {
            return Err(Error::ConstantColumn(rates.variables[j].name.clone()));
        }
        centered.push(c);
        norms.push(ss.sqrt());
    }
    let mut r = Matrix::zeros(d, d);
    let mut p = Matrix::zeros(d, d);
    let df = (n - 2) as f64;
    let t_dist = if n > 2 { StudentsT::new(0.0, 1.0, df).ok() } else { None };
    for i in 0..d {
        r.set(i, i, 1.0);
        for j in i + 1..d {
            let cross: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
            let v = (cross / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            r.set(i, j, v);
            r.set(j, i, v);
            let pv = if v.abs() >= 1.0 {
                0.0
            } else {
                let t = v * (df / (1.0 - v * v)).sqrt();
                t_dist.as_ref().map_or(f64::NAN, |dist| 2.0 * (1.0 - dist.cdf(t.abs())))
            };
            p.set(i, j, pv);
            p.set(j, i, pv);
        }
    }
    Ok(CorrMatrix { variables: rates.variables.iter().map(|v| v.name.clone()).collect(), r, p_values: p, n })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Removal {
    pub variable: String,
    /// The violating pair (removed variable first) with the largest |r|.
    pub trigger: (String, String),
    pub abs_r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneOutcome {
    pub kept: Vec<String>,
    pub removals: Vec<Removal>,
}

impl PruneOutcome {
    pub fn write_log_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["removed_variable", "trigger_pair", "abs_r"])?;
        for r in &self.removals {
            out.write_record([r.variable.clone(), format!("{}|{}", r.trigger.0, r.trigger.1), r.abs_r.to_string()])?;
        }
        out.flush().map_err(|e| Error::io("pruning_log.csv", e))?;
        Ok(())
    }
}

/// Greedy pruning: while some pair exceeds `threshold` in |r|, drop the
/// variable (from a violating pair) with the highest mean |r| to the other
/// remaining variables. Ties drop the later variable. Variables on the keep
/// list are never dropped.
pub fn prune_multicollinear(corr: &CorrMatrix, threshold: f64, keep: &[String]) -> Result<PruneOutcome> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::ThresholdOutOfRange(threshold));
    }
    for k in keep {
        if !corr.variables.contains(k) {
            return Err(Error::UnknownVariable(k.clone()));
        }
    }
    let d = corr.variables.len();
    let abs = |i: usize, j: usize| corr.r.get(i, j).abs();
    let mut alive: Vec<usize> = (0..d).collect();
    let mut removals = Vec::new();
    loop {
        let mut in_violation = vec![false; d];
        let mut any = false;
        for (a, &i) in alive.iter().enumerate() {
            for &j in &alive[a + 1..] {
                if abs(i, j) > threshold {
                    in_violation[i] = true;
                    in_violation[j] = true;
                    any = true;
                }
            }
        }
        if !any {
            break;
        }
        let mut victim: Option<(usize, f64)> = None;
        for &i in &alive {
            if !in_violation[i] || keep.contains(&corr.variables[i]) {
                continue;
            }
            let others = alive.iter().filter(|&&j| j != i);
            let mean = others.clone().map(|&j| abs(i, j)).sum::<f64>() / (alive.len() - 1) as f64;
            // `>=` lets later variables win ties.
            if victim.is_none_or(|(_, best)| mean >= best) {
                victim = Some((i, mean));
            }
        }
        let Some((v, _)) = victim else {
            return Err(Error::InvalidParameter(format!(
                "keep-list variables correlate above |r| = {threshold} and cannot be pruned"
            )));
        };
        let mut partner = None;
        let mut partner_r = -1.0;
        for &j in &alive {
            if j != v && abs(v, j) > threshold && abs(v, j) > partner_r {
                partner_r = abs(v, j);
                partner = Some(j);
            }
        }
        let partner = partner.expect("victim is in a violating pair");
        removals.push(Removal {
            variable: corr.variables[v].clone(),
            trigger: (corr.variables[v].clone(), corr.variables[partner].clone()),
            abs_r: partner_r,
        });
        alive.retain(|&i| i != v);
        if alive.is_empty() {
            return Err(Error::AllVariablesRemoved);
        }
    }
    Ok(PruneOutcome { kept: alive.iter().map(|&i| corr.variables[i].clone()).collect(), removals })
}

/// Districts × variables of z-scores plus the column statistics used.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub districts: Vec<DistrictCode>,
    pub variables: Vec<VariableMeta>,
    pub z: Matrix,
    pub column_means: Vec<f64>,
    pub column_sds: Vec<f64>,
}

impl FeatureMatrix {
    pub fn n_districts(&self) -> usize {
        self.z.rows()
    }

    pub fn n_variables(&self) -> usize {
        self.z.cols()
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn variable_names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    /// Wraps an already-standardized matrix (synthetic data, tests).
    pub fn from_z(districts: Vec<DistrictCode>, variables: Vec<VariableMeta>, z: Matrix) -> Result<Self> {
        if districts.len() != z.rows() {
            return Err(Error::DimensionMismatch { expected: z.rows(), got: districts.len() });
        }
        if variables.len() != z.cols() {
            return Err(Error::DimensionMismatch { expected: z.cols(), got: variables.len() });
        }
        let d = z.cols();
        Ok(Self { districts, variables, z, column_means: vec![0.0; d], column_sds: vec![1.0; d] })
    }
}

/// Standard scores with the sample (n − 1) standard deviation, after applying
/// each variable's polarity. Columns are taken from `rates` by name in `meta` order.
pub fn zscore(rates: &RateTable, meta: &[VariableMeta]) -> Result<FeatureMatrix> {
    let n = rates.values.rows();
    require_rows(n, 2)?;
    let mut z = Matrix::zeros(n, meta.len());
    let mut means = Vec::with_capacity(meta.len());
    let mut sds = Vec::with_capacity(meta.len());
    for (j, m) in meta.iter().enumerate() {
        let src = rates.variable_index(&m.name).ok_or_else(|| Error::UnknownVariable(m.name.clone()))?;
        let mut col = rates.values.column(src);
        if m.polarity == Polarity::Inverted {
            col.iter_mut().for_each(|x| *x = -*x);
        }
        let mu = column_mean(&col);
        let ss: f64 = col.iter().map(|x| (x - mu) * (x - mu)).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        if sd == 0.0 || !sd.is_finite() {
            return Err(Error::ConstantColumn(m.name.clone()));
        }
        for (i, x) in col.iter().enumerate() {
            z.set(i, j, (x - mu) / sd);
        }
        means.push(mu);
        sds.push(sd);
    }
    Ok(FeatureMatrix {
        districts: rates.districts.clone(),
        variables: meta.to_vec(),
        z,
        column_means: means,
        column_sds: sds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rates(cols: &[(&str, &[f64])]) -> RateTable {
        let n = cols[0].1.len();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|c| c.1[i]).collect()).collect();
        RateTable {
            districts: (0..n).map(|i| DistrictCode::new(&format!("E0600{i:04}"), "x")).collect(),
            variables: cols.iter().map(|c| VariableMeta::new(c.0, Domain::Social, "Test")).collect(),
            values: Matrix::from_rows(&rows),
        }
    }

    fn corr_from(names: &[&str], r: &[&[f64]]) -> CorrMatrix {
        let d = names.len();
        CorrMatrix {
            variables: names.iter().map(|s| s.to_string()).collect(),
            r: Matrix::from_rows(r),
            p_values: Matrix::zeros(d, d),
            n: 100,
        }
    }

    #[test]
    fn pearson_small_cases() {
        let t = rates(&[("x", &[1.0, 2.0, 3.0]), ("y", &[1.0, 2.0, 4.0]), ("nx", &[-1.0, -2.0, -3.0])]);
        let c = correlation_matrix(&t).unwrap();
        assert_eq!(c.get("x", "x"), Some(1.0));
        // Σdxdy = 3, Σdx² = 2, Σdy² = 14/3.
        let expected = 3.0 / (2.0f64 * 14.0 / 3.0).sqrt();
        assert!((c.get("x", "y").unwrap() - expected).abs() < 1e-12);
        assert!((c.get("x", "y").unwrap() - 0.9820).abs() < 5e-5);
        assert!((c.get("x", "nx").unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_column_is_rejected() {
        let t = rates(&[("x", &[1.0, 2.0, 3.0]), ("flat", &[5.0, 5.0, 5.0])]);
        assert!(matches!(correlation_matrix(&t), Err(Error::ConstantColumn(v)) if v == "flat"));
        assert!(matches!(zscore(&t, &t.variables), Err(Error::ConstantColumn(v)) if v == "flat"));
    }

    #[test]
    fn p_value_is_small_for_strong_correlation() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * 2.0 + (x * 7.0).sin()).collect();
        let c = correlation_matrix(&rates(&[("x", &xs), ("y", &ys)])).unwrap();
        assert!(c.p_values.get(0, 1) < 1e-10);
    }

    #[test]
    fn prune_drops_the_hub_variable() {
        let c = corr_from(&["a", "b", "c"], &[&[1.0, 0.9, 0.5], &[0.9, 1.0, 0.9], &[0.5, 0.9, 1.0]]);
        let out = prune_multicollinear(&c, 0.7, &[]).unwrap();
        assert_eq!(out.kept, vec!["a", "c"]);
        assert_eq!(out.removals.len(), 1);
        assert_eq!(out.removals[0].variable, "b");
        assert!(c.max_abs_off_diagonal(&out.kept) <= 0.7);
    }

    #[test]
    fn prune_duplicate_pair_drops_later_one() {
        let c = corr_from(&["a", "b", "c"], &[&[1.0, 1.0, 0.1], &[1.0, 1.0, 0.1], &[0.1, 0.1, 1.0]]);
        let out = prune_multicollinear(&c, 0.7, &[]).unwrap();
        assert_eq!(out.kept, vec!["a", "c"]);
        let keep = vec!["b".to_string()];
        let out = prune_multicollinear(&c, 0.7, &keep).unwrap();
        assert_eq!(out.kept, vec!["b", "c"]);
    }

    #[test]
    fn prune_below_threshold_keeps_all() {
        let c = corr_from(&["a", "b"], &[&[1.0, 0.695], &[0.695, 1.0]]);
        let out = prune_multicollinear(&c, 0.7, &[]).unwrap();
        assert_eq!(out.kept.len(), 2);
        assert!(out.removals.is_empty());
    }

    #[test]
    fn prune_threshold_range() {
        let c = corr_from(&["a"], &[&[1.0]]);
        assert!(matches!(prune_multicollinear(&c, 0.0, &[]), Err(Error::ThresholdOutOfRange(_))));
        assert!(matches!(prune_multicollinear(&c, 1.5, &[]), Err(Error::ThresholdOutOfRange(_))));
        assert!(prune_multicollinear(&c, 1.0, &[]).is_ok());
    }

    #[test]
    fn zscore_of_one_two_three() {
        let t = rates(&[("x", &[1.0, 2.0, 3.0])]);
        let f = zscore(&t, &t.variables).unwrap();
        assert_eq!(f.z.column(0), vec![-1.0, 0.0, 1.0]);
        assert_eq!(f.column_means, vec![2.0]);
        assert_eq!(f.column_sds, vec![1.0]);
    }

    #[test]
    fn inverted_polarity_flips_sign() {
        let t = rates(&[("x", &[1.0, 2.0, 3.0])]);
        let mut meta = t.variables.clone();
        meta[0].polarity = Polarity::Inverted;
        let f = zscore(&t, &meta).unwrap();
        assert_eq!(f.z.column(0), vec![1.0, 0.0, -1.0]);
    }
}
