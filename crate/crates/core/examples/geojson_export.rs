//! Adds cluster attributes to boundary polygons, whole and clipped to a
//! bounding box.
use std::collections::BTreeMap;

use geoclass::geojson::{export_geojson, load, DistrictAttributes};
use geoclass::synthetic::{write_fixture, FixtureConfig, ARCHETYPE_NAMES, AT_RISK_ARCHETYPES};

fn main() -> geoclass::error::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let (files, planted) = write_fixture(dir.path(), 2020, &FixtureConfig::default())?;

    // Planted archetypes stand in for fitted clusters here.
    let attrs: BTreeMap<String, DistrictAttributes> = planted
        .districts
        .iter()
        .zip(&planted.labels)
        .map(|(d, &a)| {
            let attr = DistrictAttributes {
                cluster_id: a,
                cluster_name: ARCHETYPE_NAMES[a].to_string(),
                at_risk: AT_RISK_ARCHETYPES.contains(&a),
                distance_to_center: 0.0,
            };
            (d.code.clone(), attr)
        })
        .collect();
    let boundaries = load(&files.boundaries)?;
    let (all, summary) = export_geojson(&boundaries, &attrs, "code", None)?;
    println!("exported {} features", summary.exported);
    println!("boundaries without a district: {:?}", summary.unmatched_boundaries);
    println!("districts without a boundary: {:?}", summary.unmatched_districts);
    let (london, _) = export_geojson(&boundaries, &attrs, "code", Some([-0.6, 51.2, 0.2, 52.0]))?;
    println!("{} features inside the box", london["features"].as_array().map_or(0, Vec::len));
    let first = &all["features"][0]["properties"];
    println!("first feature: {first}");
    Ok(())
}
