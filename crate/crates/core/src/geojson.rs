//! Attaches cluster attributes to district boundary features.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// What gets attached to a district's feature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistrictAttributes {
    pub cluster_id: usize,
    pub cluster_name: String,
    pub at_risk: bool,
    pub distance_to_center: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ExportSummary {
    pub exported: usize,
    /// Boundary codes with no classified district.
    pub unmatched_boundaries: Vec<String>,
    /// Classified districts with no boundary.
    pub unmatched_districts: Vec<String>,
}

pub fn load(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidGeoJson(e.to_string()))
}

fn extend_bounds(v: &Value, b: &mut [f64; 4]) {
    match v {
        Value::Array(items) if items.len() >= 2 && items[0].is_number() && items[1].is_number() => {
            let (x, y) = (items[0].as_f64().unwrap_or(f64::NAN), items[1].as_f64().unwrap_or(f64::NAN));
            b[0] = b[0].min(x);
            b[1] = b[1].min(y);
            b[2] = b[2].max(x);
            b[3] = b[3].max(y);
        }
        Value::Array(items) => items.iter().for_each(|i| extend_bounds(i, b)),
        _ => {}
    }
}

/// Bounding box of a geometry's coordinates, if it has any.
pub fn geometry_bounds(geometry: &Value) -> Option<[f64; 4]> {
    let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    match geometry.get("type").and_then(Value::as_str) {
        Some("GeometryCollection") => {
            for g in geometry.get("geometries").and_then(Value::as_array).into_iter().flatten() {
                if let Some(gb) = geometry_bounds(g) {
                    extend_bounds(&Value::from(vec![gb[0], gb[1]]), &mut b);
                    extend_bounds(&Value::from(vec![gb[2], gb[3]]), &mut b);
                }
            }
        }
        _ => extend_bounds(geometry.get("coordinates")?, &mut b),
    }
    (b[0] <= b[2]).then_some(b)
}

fn intersects(a: &[f64; 4], b: &[f64; 4]) -> bool {
    a[0] <= b[2] && b[0] <= a[2] && a[1] <= b[3] && b[1] <= a[3]
}

/// Copies `boundaries`, keeping features whose `code_property` matches a
/// classified district and adding cluster properties to each. With `bbox`,
/// only features whose bounds intersect it are kept.
pub fn export_geojson(
    boundaries: &Value,
    attributes: &BTreeMap<String, DistrictAttributes>,
    code_property: &str,
    bbox: Option<[f64; 4]>,
) -> Result<(Value, ExportSummary)> {
    if attributes.is_empty() {
        return Err(Error::NothingToExport("no classified districts".into()));
    }
    if boundaries.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::InvalidGeoJson("top level is not a FeatureCollection".into()));
    }
    let features = boundaries
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::InvalidGeoJson("`features` is missing or not an array".into()))?;

    let mut out_features = Vec::new();
    let mut summary = ExportSummary::default();
    let mut seen = BTreeSet::new();
    for (i, f) in features.iter().enumerate() {
        let props = f
            .get("properties")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::InvalidGeoJson(format!("feature {i} has no properties object")))?;
        let code = match props.get(code_property) {
            Some(Value::String(s)) => s.clone(),
            _ => return Err(Error::NoCodeProperty(i)),
        };
        seen.insert(code.clone());
        let Some(attr) = attributes.get(&code) else {
            summary.unmatched_boundaries.push(code);
            continue;
        };
        if let Some(b) = bbox {
            let inside = f.get("geometry").and_then(geometry_bounds).is_some_and(|g| intersects(&g, &b));
            if !inside {
                continue;
            }
        }
        let mut props: Map<String, Value> = props.clone();
        props.insert("cluster_id".into(), attr.cluster_id.into());
        props.insert("cluster_name".into(), attr.cluster_name.clone().into());
        props.insert("at_risk".into(), attr.at_risk.into());
        props.insert("distance_to_center".into(), attr.distance_to_center.into());
        let mut feature = f.as_object().cloned().unwrap_or_default();
        feature.insert("properties".into(), Value::Object(props));
        out_features.push(Value::Object(feature));
    }
    summary.unmatched_districts = attributes.keys().filter(|c| !seen.contains(*c)).cloned().collect();
    summary.unmatched_boundaries.sort();
    summary.exported = out_features.len();
    let mut out = boundaries.as_object().cloned().unwrap_or_default();
    out.insert("features".into(), Value::Array(out_features));
    Ok((Value::Object(out), summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn attrs() -> BTreeMap<String, DistrictAttributes> {
        BTreeMap::from([(
            "E08000035".to_string(),
            DistrictAttributes {
                cluster_id: 6,
                cluster_name: "Student Central".into(),
                at_risk: false,
                distance_to_center: 1.25,
            },
        )])
    }

    fn square(x: f64, y: f64) -> Value {
        json!({"type": "Polygon", "coordinates": [[[x, y], [x + 1.0, y], [x + 1.0, y + 1.0], [x, y + 1.0], [x, y]]]})
    }

    #[test]
    fn one_polygon_gets_properties() {
        let fc = json!({"type": "FeatureCollection", "features": [
            {"type": "Feature", "properties": {"code": "E08000035"}, "geometry": square(0.0, 0.0)},
            {"type": "Feature", "properties": {"code": "E06000001"}, "geometry": square(5.0, 5.0)}
        ]});
        let (out, s) = export_geojson(&fc, &attrs(), "code", None).unwrap();
        let p = &out["features"][0]["properties"];
        assert_eq!(p["cluster_id"], 6);
        assert_eq!(p["cluster_name"], "Student Central");
        assert_eq!(p["at_risk"], false);
        assert_eq!(p["distance_to_center"], 1.25);
        assert_eq!(out["features"].as_array().unwrap().len(), 1);
        assert_eq!(s.unmatched_boundaries, vec!["E06000001"]);
        assert!(s.unmatched_districts.is_empty());
    }

    #[test]
    fn bbox_filters() {
        let fc = json!({"type": "FeatureCollection", "features": [
            {"type": "Feature", "properties": {"code": "E08000035"}, "geometry": square(0.0, 0.0)}
        ]});
        let (out, _) = export_geojson(&fc, &attrs(), "code", Some([10.0, 10.0, 11.0, 11.0])).unwrap();
        assert!(out["features"].as_array().unwrap().is_empty());
        let (out, _) = export_geojson(&fc, &attrs(), "code", Some([0.5, 0.5, 2.0, 2.0])).unwrap();
        assert_eq!(out["features"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn errors() {
        let fc = json!({"type": "FeatureCollection", "features": [{"type": "Feature", "properties": {"name": "x"}, "geometry": null}]});
        assert!(matches!(export_geojson(&fc, &attrs(), "code", None), Err(Error::NoCodeProperty(0))));
        assert!(matches!(
            export_geojson(&json!({"type": "Feature"}), &attrs(), "code", None),
            Err(Error::InvalidGeoJson(_))
        ));
        assert!(matches!(export_geojson(&fc, &BTreeMap::new(), "code", None), Err(Error::NothingToExport(_))));
    }
}
