//! Pen portraits and at-risk flags, with the default rule and a custom one.
use std::collections::BTreeMap;

use geoclass::cluster::{kmeans_restarts, KMeansOptions};
use geoclass::preprocess::zscore;
use geoclass::profile::{flag_risk, name_clusters, pen_portrait, portraits_markdown, RiskRule, DEFAULT_EPSILON};
use geoclass::synthetic::planted_districts;

fn main() -> geoclass::error::Result<()> {
    let planted = planted_districts(2020);
    let features = zscore(&planted.rates, &planted.rates.variables)?;
    let model = kmeans_restarts(&features.z, 7, 1000, 2020, &KMeansOptions::default())?;

    let profiles = pen_portrait(&features, &model, DEFAULT_EPSILON)?;
    let rule = RiskRule::default();
    let profiles = flag_risk(profiles, &rule)?;
    let profiles = name_clusters(profiles, &BTreeMap::from([(0, "Suburban Families".to_string())]))?;
    print!("{}", portraits_markdown(&profiles, &rule));

    let strict = RiskRule::parse("nvq3_plus < -1 AND unemployed > 1")?;
    let flagged: Vec<_> = flag_risk(profiles, &strict)?.into_iter().filter(|p| p.at_risk).map(|p| p.name).collect();
    println!("\nunder `{}`: {:?}", strict.description, flagged);
    Ok(())
}
