//! Joins a classification with broadband speeds and ranks case-study
//! districts in a coarser usage table.
use std::collections::{BTreeMap, BTreeSet};

use geoclass::cluster::{kmeans_restarts, KMeansOptions};
use geoclass::preprocess::zscore;
use geoclass::synthetic::{case_districts, planted_districts, write_fixture, FixtureConfig};
use geoclass::validate::{
    cluster_speed_summary, join_performance, load_lookup, load_performance, load_usage, usage_ranks,
    validation_markdown,
};

fn main() -> geoclass::error::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let (files, _) = write_fixture(dir.path(), 2020, &FixtureConfig::default())?;
    let planted = planted_districts(2020);
    let features = zscore(&planted.rates, &planted.rates.variables)?;
    let model = kmeans_restarts(&features.z, 7, 1000, 2020, &KMeansOptions::default())?;

    let joined = join_performance(&features.districts, &model.assignments, &load_performance(&files.performance)?)?;
    let summary = cluster_speed_summary(&joined)?;
    let ranks = usage_ranks(&load_usage(&files.usage)?, &load_lookup(&files.lookup)?, &case_districts(&planted))?;
    let names: BTreeMap<usize, String> = (0..7).map(|c| (c, format!("Group {}", (b'A' + c as u8) as char))).collect();
    print!("{}", validation_markdown(&summary, &joined, Some(&ranks), &names, &BTreeSet::from([4, 5, 6])));
    Ok(())
}
