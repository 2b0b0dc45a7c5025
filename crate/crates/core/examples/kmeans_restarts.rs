//! Best-of-N K-means on three well separated blobs. The result is the same
//! whatever the thread count.
use geoclass::cluster::{kmeans_restarts, KMeansOptions};
use geoclass::synthetic::three_blobs;

fn main() -> geoclass::error::Result<()> {
    let (points, truth) = three_blobs(50, 7);
    let model = kmeans_restarts(&points, 3, 1000, 42, &KMeansOptions::default())?;
    println!("wcss {:.4} (restart {} of 1000, {} iterations)", model.wcss, model.best_restart, model.iterations);
    println!("sizes {:?}", model.sizes());
    for c in 0..model.k {
        println!("center {c}: {:?}", model.centers.row(c));
    }
    println!("ARI vs generating blobs: {:.3}", geoclass::evaluate::adjusted_rand_index(&model.assignments, &truth));

    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let again = single.install(|| kmeans_restarts(&points, 3, 1000, 42, &KMeansOptions::default()))?;
    assert_eq!(again.assignments, model.assignments);
    Ok(())
}
