//! ANOVA F per variable and distance-to-center boxplot statistics for a
//! 7-cluster fit of the planted fixture.
use geoclass::cluster::{kmeans_restarts, KMeansOptions};
use geoclass::evaluate::{adjusted_rand_index, anova_f, distance_distribution};
use geoclass::preprocess::zscore;
use geoclass::synthetic::planted_districts;

fn main() -> geoclass::error::Result<()> {
    let planted = planted_districts(2020);
    let features = zscore(&planted.rates, &planted.rates.variables)?;
    let model = kmeans_restarts(&features.z, 7, 1000, 2020, &KMeansOptions::default())?;
    println!("ARI vs planted archetypes: {:.3}", adjusted_rand_index(&model.assignments, &planted.labels));

    let anova = anova_f(&features, &model.assignments, 7)?;
    for r in &anova.rows {
        println!("{:<24} F = {:>9.2} (df {}, {})", r.variable, r.f, r.df_between, r.df_within);
    }
    println!("mean F {:.2}", anova.mean_f);

    let boxes = distance_distribution(&features, &model)?;
    for b in &boxes.clusters {
        println!(
            "cluster {}: n={} median {:.3} IQR [{:.3}, {:.3}] outliers {}",
            b.cluster,
            b.n,
            b.median,
            b.q1,
            b.q3,
            b.outliers.len()
        );
    }
    Ok(())
}
