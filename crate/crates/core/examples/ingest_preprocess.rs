//! Loads a district table with suppressed cells, fills the gaps from group
//! totals, converts counts to rates, standardizes and prunes correlated
//! variables.
use geoclass::ingest::{load_district_table, reconstruct_suppressed, to_percentages, Schema};
use geoclass::preprocess::{correlation_matrix, prune_multicollinear, zscore};
use geoclass::synthetic::{write_fixture, FixtureConfig};

fn main() -> geoclass::error::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let (files, _) = write_fixture(dir.path(), 2020, &FixtureConfig::default())?;

    let schema = Schema::load(&files.schema)?;
    let raw = load_district_table(&files.district_table, &schema)?;
    println!("{} districts, {} suppressed cells", raw.n_rows(), raw.suppressed_count());
    let filled = reconstruct_suppressed(&raw)?;

    let rates = to_percentages(&filled)?;
    let corr = correlation_matrix(&rates)?;
    let pruning = prune_multicollinear(&corr, 0.7, &[])?;
    println!(
        "max |r| = {:.3}; kept {} of {}",
        corr.max_abs_off_diagonal(&corr.variables),
        pruning.kept.len(),
        corr.variables.len()
    );
    for r in &pruning.removals {
        println!("  dropped {} ({} vs {}: |r| = {:.3})", r.variable, r.trigger.0, r.trigger.1, r.abs_r);
    }

    let kept = rates.select(&pruning.kept)?;
    let features = zscore(&kept, &kept.variables)?;
    for (j, v) in features.variable_names().iter().enumerate() {
        let col = features.z.column(j);
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        println!("  {v:<24} mean {mean:+.1e}");
    }
    Ok(())
}
