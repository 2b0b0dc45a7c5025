//! Gap statistic with the one-standard-error rule, plus a clustergram, on
//! data with three obvious groups.
use geoclass::kselect::{clustergram, gap_statistic, select_k, ClustergramOptions, GapOptions};
use geoclass::synthetic::three_blobs;

fn main() -> geoclass::error::Result<()> {
    let (points, _) = three_blobs(40, 1);
    let gap =
        gap_statistic(&points, &GapOptions { k_max: 6, reps: 20, b: 20, restarts: 10, ..Default::default() }, 11)?;
    println!("k   gap     se      chosen");
    for r in &gap.rows {
        println!("{:<3} {:<7.3} {:<7.3} {:.2}", r.k, r.gap, r.se, r.selection_frequency);
    }
    let cg = clustergram(&points, &ClustergramOptions { k_max: 6, reps: 10, restarts: 10, ..Default::default() }, 11)?;
    println!("clustergram separation by k: {:?}", cg.separation_by_k());

    let choice = select_k(&gap, &cg, None);
    println!("{}", serde_json::to_string_pretty(&choice).unwrap());
    let svg = geoclass::charts::gap_curve(&gap);
    println!("gap curve SVG: {} bytes", svg.len());
    Ok(())
}
