//! Pipeline configuration: an INI file of `key = value` pairs (relative paths
//! resolve against the file's directory) with an optional `[names]` section
//! mapping cluster ids to display names.
//!
//! ```ini
//! district_table = districts.csv
//! schema = schema.ini
//! seed = 2020
//! k = 7
//! restarts = 1000
//! gap_k_range = 1-10
//! risk_rule = nvq3_plus < 0 AND unemployed > 0
//!
//! [names]
//! 0 = Suburban Families
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ini::Ini;
use crate::kselect::Aggregation;
use crate::profile::{DEFAULT_EPSILON, DEFAULT_RISK_RULE};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub district_table: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub boundaries: Option<PathBuf>,
    pub performance: Option<PathBuf>,
    pub usage: Option<PathBuf>,
    pub lookup: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Overrides the schema's threshold when set.
    pub suppression_threshold: Option<f64>,
    pub correlation_threshold: f64,
    pub k: Option<usize>,
    pub restarts: usize,
    pub kselect_restarts: usize,
    pub gap_k_range: (usize, usize),
    pub gap_reps: usize,
    pub gap_b: usize,
    pub clustergram_k_range: (usize, usize),
    pub clustergram_reps: usize,
    pub clustergram_aggregation: Aggregation,
    pub seed: Option<u64>,
    pub risk_rule: String,
    pub epsilon: f64,
    pub cluster_names: BTreeMap<usize, String>,
    pub case_districts: Vec<String>,
    pub code_property: String,
    /// min lon, min lat, max lon, max lat of an extra extract.
    pub bbox: Option<[f64; 4]>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            district_table: None,
            schema: None,
            boundaries: None,
            performance: None,
            usage: None,
            lookup: None,
            out_dir: PathBuf::from("out"),
            suppression_threshold: None,
            correlation_threshold: 0.7,
            k: None,
            restarts: 1000,
            kselect_restarts: 25,
            gap_k_range: (1, 10),
            gap_reps: 500,
            gap_b: 50,
            clustergram_k_range: (1, 12),
            clustergram_reps: 100,
            clustergram_aggregation: Aggregation::Overlay,
            seed: None,
            risk_rule: DEFAULT_RISK_RULE.to_string(),
            epsilon: DEFAULT_EPSILON,
            cluster_names: BTreeMap::new(),
            case_districts: Vec::new(),
            code_property: "code".to_string(),
            bbox: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("bad value for `{key}`: `{v}`")))
}

fn parse_range(key: &str, v: &str) -> Result<(usize, usize)> {
    let (a, b) =
        v.split_once(['-', ':']).ok_or_else(|| Error::Config(format!("`{key}` must look like `1-10`, got `{v}`")))?;
    Ok((parse(key, a)?, parse(key, b)?))
}

fn parse_bbox(v: &str) -> Result<[f64; 4]> {
    let parts: Vec<f64> = v.split(',').map(|p| parse("bbox", p)).collect::<Result<_>>()?;
    let b: [f64; 4] = parts.try_into().map_err(|_| Error::Config("bbox needs four numbers".into()))?;
    if b[0] > b[2] || b[1] > b[3] {
        return Err(Error::Config("bbox must be min lon, min lat, max lon, max lat".into()));
    }
    Ok(b)
}

impl PipelineConfig {
    /// Applies one `key = value` setting; `base` resolves relative paths.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = || {
            let p = PathBuf::from(value.trim());
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        match key {
            "district_table" => self.district_table = Some(path()),
            "schema" => self.schema = Some(path()),
            "boundaries" => self.boundaries = Some(path()),
            "performance" => self.performance = Some(path()),
            "usage" => self.usage = Some(path()),
            "lookup" => self.lookup = Some(path()),
            "out_dir" => self.out_dir = path(),
            "suppression_threshold" => self.suppression_threshold = Some(parse(key, value)?),
            "correlation_threshold" => self.correlation_threshold = parse(key, value)?,
            "k" => self.k = if value.trim().is_empty() { None } else { Some(parse(key, value)?) },
            "restarts" => self.restarts = parse(key, value)?,
            "kselect_restarts" => self.kselect_restarts = parse(key, value)?,
            "gap_k_range" => self.gap_k_range = parse_range(key, value)?,
            "gap_reps" => self.gap_reps = parse(key, value)?,
            "gap_b" => self.gap_b = parse(key, value)?,
            "clustergram_k_range" => self.clustergram_k_range = parse_range(key, value)?,
            "clustergram_reps" => self.clustergram_reps = parse(key, value)?,
            "clustergram_aggregation" => self.clustergram_aggregation = value.parse()?,
            "seed" => self.seed = Some(parse(key, value)?),
            "risk_rule" => self.risk_rule = value.trim().to_string(),
            "epsilon" => self.epsilon = parse(key, value)?,
            "case_districts" => {
                self.case_districts = value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
            }
            "code_property" => self.code_property = value.trim().to_string(),
            "bbox" => self.bbox = if value.trim().is_empty() { None } else { Some(parse_bbox(value)?) },
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn from_ini(ini: &Ini, base: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        for (section, entries) in ini.sections() {
            match section {
                "" | "pipeline" => {
                    for (k, v) in entries {
                        cfg.set(k, v, base)?;
                    }
                }
                "names" => {
                    for (k, v) in entries {
                        cfg.cluster_names.insert(parse("names", k)?, v.clone());
                    }
                }
                other => return Err(Error::Config(format!("unknown config section `[{other}]`"))),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_ini(&Ini::load(path)?, base)
    }

    /// Range and presence checks done before any stage runs.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.correlation_threshold) {
            return Err(Error::ThresholdOutOfRange(self.correlation_threshold));
        }
        if self.seed.is_none() {
            return bad("a `seed` is required; runs are never seeded from the clock".into());
        }
        if self.restarts == 0 || self.kselect_restarts == 0 {
            return bad("restart counts must be at least 1".into());
        }
        if self.k == Some(0) {
            return Err(Error::KZero);
        }
        if self.k.is_none() && (self.gap_reps == 0 || self.gap_b < 2 || self.clustergram_reps == 0) {
            return bad("k selection needs gap_reps >= 1, gap_b >= 2 and clustergram_reps >= 1".into());
        }
        for (name, (lo, hi)) in [("gap_k_range", self.gap_k_range), ("clustergram_k_range", self.clustergram_k_range)] {
            if lo < 1 || hi < lo {
                return bad(format!("`{name}` must satisfy 1 <= lo <= hi"));
            }
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return bad("epsilon must be >= 0".into());
        }
        Ok(())
    }
}
