//! External validation: broadband speeds per cluster and internet-usage ranks
//! for case-study districts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::quantile_sorted;
use crate::ingest::DistrictCode;

/// Great Britain reference speeds attached to every report, Mbit/s.
pub const GB_MEAN_UPLOAD: f64 = 10.0;
pub const GB_MEAN_DOWNLOAD: f64 = 58.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRecord {
    pub code: String,
    #[serde(rename = "upload_mbits")]
    pub upload: f64,
    #[serde(rename = "download_mbits")]
    pub download: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageRecord {
    pub area_code: String,
    #[serde(rename = "used_pct")]
    pub used_last_3_months: f64,
    #[serde(rename = "lapsed_pct")]
    pub never_or_lapsed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookupRecord {
    pub district_code: String,
    pub area_code: String,
    #[serde(deserialize_with = "de_bool")]
    pub same_boundary: bool,
}

fn de_bool<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    let s = String::deserialize(d)?;
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "y" => Ok(true),
        "false" | "0" | "no" | "n" | "" => Ok(false),
        other => Err(serde::de::Error::custom(format!("not a boolean: {other:?}"))),
    }
}

fn read_records<T: serde::de::DeserializeOwned, R: Read>(reader: R) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::io(path, e))
}

fn bad(row: usize, column: &str, value: f64) -> Error {
    Error::BadCell { row, column: column.to_string(), value: value.to_string() }
}

pub fn read_performance<R: Read>(reader: R) -> Result<Vec<PerformanceRecord>> {
    let recs: Vec<PerformanceRecord> = read_records(reader)?;
    for (i, r) in recs.iter().enumerate() {
        for (col, v) in [("upload_mbits", r.upload), ("download_mbits", r.download)] {
            if !v.is_finite() || v < 0.0 {
                return Err(bad(i + 1, col, v));
            }
        }
    }
    Ok(recs)
}

pub fn read_usage<R: Read>(reader: R) -> Result<Vec<UsageRecord>> {
    let recs: Vec<UsageRecord> = read_records(reader)?;
    let mut seen = BTreeSet::new();
    for (i, r) in recs.iter().enumerate() {
        for (col, v) in [("used_pct", r.used_last_3_months), ("lapsed_pct", r.never_or_lapsed)] {
            if !(0.0..=100.0).contains(&v) {
                return Err(bad(i + 1, col, v));
            }
        }
        if !seen.insert(r.area_code.as_str()) {
            return Err(Error::DuplicateCode(r.area_code.clone()));
        }
    }
    Ok(recs)
}

pub fn read_lookup<R: Read>(reader: R) -> Result<Vec<LookupRecord>> {
    read_records(reader)
}

pub fn load_performance(path: &Path) -> Result<Vec<PerformanceRecord>> {
    read_performance(open(path)?)
}

pub fn load_usage(path: &Path) -> Result<Vec<UsageRecord>> {
    read_usage(open(path)?)
}

pub fn load_lookup(path: &Path) -> Result<Vec<LookupRecord>> {
    read_lookup(open(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JoinedRow {
    pub district: String,
    pub cluster: usize,
    pub upload: f64,
    pub download: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Joined {
    /// Ordered by cluster id, then district code.
    pub rows: Vec<JoinedRow>,
    /// Classified districts without a performance record.
    pub unmatched_districts: Vec<String>,
    /// Performance records with no classified district.
    pub unmatched_records: Vec<String>,
}

/// Inner join of the classification with performance records on district code.
pub fn join_performance(
    districts: &[DistrictCode],
    assignments: &[usize],
    perf: &[PerformanceRecord],
) -> Result<Joined> {
    if districts.len() != assignments.len() {
        return Err(Error::DimensionMismatch { expected: districts.len(), got: assignments.len() });
    }
    let mut by_code: BTreeMap<&str, &PerformanceRecord> = BTreeMap::new();
    for r in perf {
        if by_code.insert(r.code.as_str(), r).is_some() {
            return Err(Error::DuplicateCode(r.code.clone()));
        }
    }
    let mut seen = BTreeSet::new();
    let mut rows = Vec::new();
    let mut unmatched_districts = Vec::new();
    for (d, &c) in districts.iter().zip(assignments) {
        if !seen.insert(d.code.as_str()) {
            return Err(Error::DuplicateCode(d.code.clone()));
        }
        match by_code.get(d.code.as_str()) {
            Some(r) => {
                rows.push(JoinedRow { district: d.code.clone(), cluster: c, upload: r.upload, download: r.download })
            }
            None => unmatched_districts.push(d.code.clone()),
        }
    }
    if rows.is_empty() {
        log::warn!("no classified district has a performance record");
    }
    rows.sort_by(|a, b| a.cluster.cmp(&b.cluster).then_with(|| a.district.cmp(&b.district)));
    unmatched_districts.sort();
    let unmatched_records = by_code.keys().filter(|c| !seen.contains(*c)).map(|c| c.to_string()).collect();
    Ok(Joined { rows, unmatched_districts, unmatched_records })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSpeed {
    pub cluster: usize,
    pub matched: usize,
    pub mean_upload: f64,
    pub median_upload: f64,
    pub mean_download: f64,
    pub median_download: f64,
    /// Cluster mean minus the mean over all joined districts.
    pub upload_deviation: f64,
    pub download_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedSummary {
    /// Ascending by mean upload, ties by cluster id.
    pub clusters: Vec<ClusterSpeed>,
    pub matched: usize,
    pub sample_mean_upload: f64,
    pub sample_mean_download: f64,
    pub gb_mean_upload: f64,
    pub gb_mean_download: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn median(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, 0.5)
}

pub fn cluster_speed_summary(joined: &Joined) -> Result<SpeedSummary> {
    if joined.rows.is_empty() {
        return Err(Error::NoJoinedRows);
    }
    let up: Vec<f64> = joined.rows.iter().map(|r| r.upload).collect();
    let down: Vec<f64> = joined.rows.iter().map(|r| r.download).collect();
    let (mu_up, mu_down) = (mean(&up), mean(&down));
    let mut groups: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in &joined.rows {
        let g = groups.entry(r.cluster).or_default();
        g.0.push(r.upload);
        g.1.push(r.download);
    }
    let mut clusters: Vec<ClusterSpeed> = groups
        .into_iter()
        .map(|(cluster, (u, d))| ClusterSpeed {
            cluster,
            matched: u.len(),
            mean_upload: mean(&u),
            median_upload: median(&u),
            mean_download: mean(&d),
            median_download: median(&d),
            upload_deviation: mean(&u) - mu_up,
            download_deviation: mean(&d) - mu_down,
        })
        .collect();
    clusters.sort_by(|a, b| a.mean_upload.total_cmp(&b.mean_upload).then(a.cluster.cmp(&b.cluster)));
    Ok(SpeedSummary {
        clusters,
        matched: joined.rows.len(),
        sample_mean_upload: mu_up,
        sample_mean_download: mu_down,
        gb_mean_upload: GB_MEAN_UPLOAD,
        gb_mean_download: GB_MEAN_DOWNLOAD,
    })
}

impl SpeedSummary {
    pub fn write_csv<W: Write>(&self, names: &BTreeMap<usize, String>, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "cluster_id",
            "cluster_name",
            "matched",
            "mean_upload_mbits",
            "median_upload_mbits",
            "mean_download_mbits",
            "median_download_mbits",
            "upload_deviation",
            "download_deviation",
            "gb_mean_upload_mbits",
            "gb_mean_download_mbits",
        ])?;
        for c in &self.clusters {
            out.write_record([
                c.cluster.to_string(),
                names.get(&c.cluster).cloned().unwrap_or_default(),
                c.matched.to_string(),
                c.mean_upload.to_string(),
                c.median_upload.to_string(),
                c.mean_download.to_string(),
                c.median_download.to_string(),
                c.upload_deviation.to_string(),
                c.download_deviation.to_string(),
                self.gb_mean_upload.to_string(),
                self.gb_mean_download.to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("validation_report.csv", e))?;
        Ok(())
    }
}

/// Ranks 1..=n by `key` descending; ties broken by area code ascending.
pub fn rank_desc(usage: &[UsageRecord], key: impl Fn(&UsageRecord) -> f64) -> BTreeMap<String, usize> {
    let mut order: Vec<&UsageRecord> = usage.iter().collect();
    order.sort_by(|a, b| key(b).total_cmp(&key(a)).then_with(|| a.area_code.cmp(&b.area_code)));
    order.into_iter().enumerate().map(|(i, r)| (r.area_code.clone(), i + 1)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseRank {
    pub district: String,
    pub area_code: String,
    pub used_pct: f64,
    /// 1 = highest recent usage.
    pub usage_rank: usize,
    pub lapsed_pct: f64,
    /// 1 = highest share of never/lapsed users.
    pub lapsed_rank: usize,
    pub same_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseRanks {
    pub total_areas: usize,
    pub cases: Vec<CaseRank>,
}

pub const CASE_RANK_HEADER: [&str; 8] = [
    "district_code",
    "area_code",
    "used_pct",
    "usage_rank_1_is_most_usage",
    "lapsed_pct",
    "lapsed_rank_1_is_most_never_or_lapsed",
    "total_areas",
    "boundary_caveat",
];

pub fn usage_ranks(usage: &[UsageRecord], lookup: &[LookupRecord], cases: &[String]) -> Result<CaseRanks> {
    let mut seen = BTreeSet::new();
    for u in usage {
        if !seen.insert(u.area_code.as_str()) {
            return Err(Error::DuplicateCode(u.area_code.clone()));
        }
    }
    let usage_rank = rank_desc(usage, |u| u.used_last_3_months);
    let lapsed_rank = rank_desc(usage, |u| u.never_or_lapsed);
    let cases = cases
        .iter()
        .map(|d| {
            let l = lookup.iter().find(|l| &l.district_code == d).ok_or_else(|| Error::MissingLookup(d.clone()))?;
            let u = usage
                .iter()
                .find(|u| u.area_code == l.area_code)
                .ok_or_else(|| Error::MissingArea(l.area_code.clone()))?;
            Ok(CaseRank {
                district: d.clone(),
                area_code: l.area_code.clone(),
                used_pct: u.used_last_3_months,
                usage_rank: usage_rank[&u.area_code],
                lapsed_pct: u.never_or_lapsed,
                lapsed_rank: lapsed_rank[&u.area_code],
                same_boundary: l.same_boundary,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CaseRanks { total_areas: usage.len(), cases })
}

impl CaseRanks {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CASE_RANK_HEADER)?;
        for c in &self.cases {
            let caveat = if c.same_boundary { "" } else { "area boundary differs from district" };
            out.write_record([
                c.district.clone(),
                c.area_code.clone(),
                c.used_pct.to_string(),
                c.usage_rank.to_string(),
                c.lapsed_pct.to_string(),
                c.lapsed_rank.to_string(),
                self.total_areas.to_string(),
                caveat.to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("case_ranks.csv", e))?;
        Ok(())
    }
}

/// Short Markdown narrative over the speed summary and case ranks.
pub fn validation_markdown(
    summary: &SpeedSummary,
    joined: &Joined,
    ranks: Option<&CaseRanks>,
    names: &BTreeMap<usize, String>,
    at_risk: &BTreeSet<usize>,
) -> String {
    let mut s = String::from("# External validation\n\n");
    let _ = writeln!(
        s,
        "{} districts matched the performance table; unmatched: {} classified district(s), {} performance record(s).\n",
        summary.matched,
        joined.unmatched_districts.len(),
        joined.unmatched_records.len()
    );
    let _ = writeln!(
        s,
        "Reference speeds: upload {} Mbit/s, download {} Mbit/s. Sample means: upload {:.2}, download {:.2}.\n",
        summary.gb_mean_upload, summary.gb_mean_download, summary.sample_mean_upload, summary.sample_mean_download
    );
    s.push_str("| cluster | name | at risk | matched | mean upload | mean download |\n|---|---|---|---|---|---|\n");
    for c in &summary.clusters {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {:.2} | {:.2} |",
            c.cluster,
            names.get(&c.cluster).map(String::as_str).unwrap_or(""),
            if at_risk.contains(&c.cluster) { "yes" } else { "no" },
            c.matched,
            c.mean_upload,
            c.mean_download
        );
    }
    if let Some(r) = ranks {
        let _ = writeln!(s, "\n## Case studies ({} areas ranked)\n", r.total_areas);
        s.push_str("Usage rank 1 = most recent use; lapsed rank 1 = largest never/lapsed share.\n\n");
        for c in &r.cases {
            let _ = writeln!(
                s,
                "- {} ({}): usage rank {}, lapsed rank {}{}",
                c.district,
                c.area_code,
                c.usage_rank,
                c.lapsed_rank,
                if c.same_boundary { "" } else { " (area boundary differs; compare with care)" }
            );
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn perf(code: &str, up: f64, down: f64) -> PerformanceRecord {
        PerformanceRecord { code: code.into(), upload: up, download: down }
    }

    fn usage(code: &str, used: f64, lapsed: f64) -> UsageRecord {
        UsageRecord { area_code: code.into(), used_last_3_months: used, never_or_lapsed: lapsed }
    }

    fn districts(codes: &[&str]) -> Vec<DistrictCode> {
        codes.iter().map(|c| DistrictCode::new(c, "")).collect()
    }

    #[test]
    fn join_reports_both_sides() {
        let j = join_performance(
            &districts(&["A", "B", "C"]),
            &[0, 1, 0],
            &[perf("C", 1.0, 2.0), perf("A", 3.0, 4.0), perf("Z", 0.0, 0.0)],
        )
        .unwrap();
        assert_eq!(j.rows.len(), 2);
        assert_eq!(j.rows[0].district, "A");
        assert_eq!(j.unmatched_districts, vec!["B"]);
        assert_eq!(j.unmatched_records, vec!["Z"]);
    }

    #[test]
    fn empty_table_and_duplicates() {
        let j = join_performance(&districts(&["A"]), &[0], &[]).unwrap();
        assert!(j.rows.is_empty());
        assert!(matches!(cluster_speed_summary(&j), Err(Error::NoJoinedRows)));
        let dup = join_performance(&districts(&["A"]), &[0], &[perf("A", 1.0, 1.0), perf("A", 2.0, 2.0)]);
        assert!(matches!(dup, Err(Error::DuplicateCode(c)) if c == "A"));
        let dup = join_performance(&districts(&["A", "A"]), &[0, 0], &[]);
        assert!(matches!(dup, Err(Error::DuplicateCode(_))));
    }

    #[test]
    fn speed_mean_and_median() {
        let j = join_performance(
            &districts(&["A", "B", "C"]),
            &[0, 0, 0],
            &[perf("A", 8.0, 1.0), perf("B", 10.0, 1.0), perf("C", 12.0, 1.0)],
        )
        .unwrap();
        let s = cluster_speed_summary(&j).unwrap();
        assert_eq!((s.clusters[0].mean_upload, s.clusters[0].median_upload), (10.0, 10.0));
        assert_eq!(s.clusters[0].upload_deviation, 0.0);
        assert_eq!((s.gb_mean_upload, s.gb_mean_download), (10.0, 58.0));
    }

    #[test]
    fn ranks_descend_with_code_tiebreak() {
        let u = vec![usage("C", 70.0, 1.0), usage("A", 90.0, 1.0), usage("B", 80.0, 2.0)];
        let r = rank_desc(&u, |x| x.used_last_3_months);
        assert_eq!((r["A"], r["B"], r["C"]), (1, 2, 3));
        let r = rank_desc(&u, |x| x.never_or_lapsed);
        assert_eq!((r["B"], r["A"], r["C"]), (1, 2, 3));
    }

    #[test]
    fn case_ranks_and_errors() {
        let u = vec![usage("X", 50.0, 10.0)];
        let l = vec![LookupRecord { district_code: "D".into(), area_code: "X".into(), same_boundary: false }];
        let r = usage_ranks(&u, &l, &["D".into()]).unwrap();
        assert_eq!((r.cases[0].usage_rank, r.cases[0].lapsed_rank, r.total_areas), (1, 1, 1));
        assert!(matches!(usage_ranks(&u, &l, &["Q".into()]), Err(Error::MissingLookup(_))));
        let l2 = vec![LookupRecord { district_code: "D".into(), area_code: "Y".into(), same_boundary: true }];
        assert!(matches!(usage_ranks(&u, &l2, &["D".into()]), Err(Error::MissingArea(_))));
    }

    #[test]
    fn readers_validate() {
        assert!(read_performance("code,upload_mbits,download_mbits\nA,-1,2\n".as_bytes()).is_err());
        assert!(read_usage("area_code,used_pct,lapsed_pct\nA,101,2\n".as_bytes()).is_err());
        assert!(matches!(
            read_usage("area_code,used_pct,lapsed_pct\nA,1,2\nA,3,4\n".as_bytes()),
            Err(Error::DuplicateCode(_))
        ));
        let l = read_lookup("district_code,area_code,same_boundary\nD,X,true\nE,X,0\n".as_bytes()).unwrap();
        assert!(l[0].same_boundary && !l[1].same_boundary);
    }
}
