//! Stage orchestration. Every stage reads its inputs from the configuration
//! and from files earlier stages left in the output directory, so running the
//! stages one by one produces the same bytes as [`run_all`].

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Read};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::charts;
use crate::cluster::{distances_to_center, kmeans_restarts, ClusterModel, KMeansOptions};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::evaluate::{anova_f, cluster_sizes, distance_distribution, write_sizes_csv, BoxplotStats};
use crate::geojson::{self, DistrictAttributes, ExportSummary};
use crate::ingest::{load_district_table, reconstruct_suppressed, to_percentages, RawTable, Schema};
use crate::kselect::{clustergram, gap_statistic, select_k, ClustergramOptions, GapOptions};
use crate::matrix::Matrix;
use crate::preprocess::{correlation_matrix, prune_multicollinear, zscore, CorrMatrix, FeatureMatrix, PruneOutcome};
use crate::profile::{
    flag_risk, name_clusters, pen_portrait, portraits_markdown, write_profiles_csv, ClusterProfile, RiskRule,
};
use crate::validate;

pub const MANIFEST: &str = "manifest.json";

/// Subcommand-sized pieces of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    ValidateInput,
    KSelect,
    Fit,
    Evaluate,
    Profile,
    ExternalValidate,
    ExportGeojson,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::ValidateInput,
        Stage::KSelect,
        Stage::Fit,
        Stage::Evaluate,
        Stage::Profile,
        Stage::ExternalValidate,
        Stage::ExportGeojson,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::ValidateInput => "validate-input",
            Stage::KSelect => "kselect",
            Stage::Fit => "fit",
            Stage::Evaluate => "evaluate",
            Stage::Profile => "profile",
            Stage::ExternalValidate => "external-validate",
            Stage::ExportGeojson => "export-geojson",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub seconds: f64,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub threads: usize,
    pub config: Value,
    pub stages: Vec<StageRecord>,
    /// Output path (relative to the output directory) to SHA-256 hex digest.
    pub outputs: BTreeMap<String, String>,
    /// Join diagnostics keyed by what failed to match.
    pub unmatched: BTreeMap<String, Vec<String>>,
}

impl RunManifest {
    fn new(cfg: &PipelineConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            threads: rayon::current_num_threads(),
            config: serde_json::to_value(cfg).unwrap_or(Value::Null),
            stages: Vec::new(),
            outputs: BTreeMap::new(),
            unmatched: BTreeMap::new(),
        }
    }

    pub fn load(out_dir: &Path) -> Result<Option<Self>> {
        let path = out_dir.join(MANIFEST);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Some(serde_json::from_str(&text)?))
    }

    fn write(&mut self, out_dir: &Path) -> Result<()> {
        for (rel, digest) in self.outputs.iter_mut() {
            *digest = sha256_file(&out_dir.join(rel))?;
        }
        let path = out_dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&buf)))
}

/// Output-directory writer that remembers what it wrote.
struct Outputs<'a> {
    dir: &'a Path,
    written: Vec<String>,
    unmatched: BTreeMap<String, Vec<String>>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path) -> Self {
        Self { dir, written: Vec::new(), unmatched: BTreeMap::new() }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    fn create(&mut self, rel: &str) -> Result<BufWriter<File>> {
        let p = self.path(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        self.written.push(rel.to_string());
        Ok(BufWriter::new(File::create(&p).map_err(|e| Error::io(&p, e))?))
    }

    fn text(&mut self, rel: &str, text: &str) -> Result<()> {
        let p = self.path(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        self.written.push(rel.to_string());
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        self.text(rel, &(serde_json::to_string_pretty(value)? + "\n"))
    }
}

fn require<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a PathBuf> {
    p.as_ref().ok_or_else(|| Error::Config(format!("config key `{key}` is required for this stage")))
}

fn seed(cfg: &PipelineConfig) -> Result<u64> {
    cfg.seed.ok_or_else(|| Error::Config("a `seed` is required; runs are never seeded from the clock".into()))
}

/// Everything derived deterministically from the input table.
pub struct Prepared {
    pub raw: RawTable,
    pub corr: CorrMatrix,
    pub pruning: PruneOutcome,
    pub features: FeatureMatrix,
}

pub fn prepare(cfg: &PipelineConfig) -> Result<Prepared> {
    let ingest = || -> Result<RawTable> {
        let mut schema = Schema::load(require(&cfg.schema, "schema")?)?;
        if let Some(t) = cfg.suppression_threshold {
            schema.suppression_threshold = t;
        }
        let raw = load_district_table(require(&cfg.district_table, "district_table")?, &schema)?;
        reconstruct_suppressed(&raw)
    };
    let raw = ingest().map_err(|e| e.in_stage("ingest"))?;
    let pre = || -> Result<(CorrMatrix, PruneOutcome, FeatureMatrix)> {
        let rates = to_percentages(&raw)?;
        let corr = correlation_matrix(&rates)?;
        let pruning = prune_multicollinear(&corr, cfg.correlation_threshold, &[])?;
        let kept_rates = rates.select(&pruning.kept)?;
        let features = zscore(&kept_rates, &kept_rates.variables)?;
        Ok((corr, pruning, features))
    };
    let (corr, pruning, features) = pre().map_err(|e| e.in_stage("preprocess"))?;
    Ok(Prepared { raw, corr, pruning, features })
}

fn kmeans_options() -> KMeansOptions {
    KMeansOptions::default()
}

fn stage_validate_input(cfg: &PipelineConfig, out: &mut Outputs) -> Result<()> {
    let p = prepare(cfg)?;
    p.raw.write_report_csv(out.create("ingest_report.csv")?)?;
    p.corr.write_csv(out.create("corr_matrix.csv")?)?;
    p.pruning.write_log_csv(out.create("pruning_log.csv")?)?;
    out.text("charts/corr_heatmap.svg", &charts::correlation_heatmap(&p.corr))?;
    info!(
        "{} districts, {} of {} variables kept",
        p.features.n_districts(),
        p.pruning.kept.len(),
        p.corr.variables.len()
    );
    Ok(())
}

fn stage_kselect(cfg: &PipelineConfig, out: &mut Outputs) -> Result<()> {
    let p = prepare(cfg)?;
    let s = seed(cfg)?;
    let gap_opts = GapOptions {
        k_min: cfg.gap_k_range.0,
        k_max: cfg.gap_k_range.1,
        b: cfg.gap_b,
        reps: cfg.gap_reps,
        restarts: cfg.kselect_restarts,
        kmeans: kmeans_options(),
    };
    let gap = gap_statistic(&p.features.z, &gap_opts, s)?;
    let cg_opts = ClustergramOptions {
        k_min: cfg.clustergram_k_range.0,
        k_max: cfg.clustergram_k_range.1,
        reps: cfg.clustergram_reps,
        restarts: cfg.kselect_restarts,
        aggregation: cfg.clustergram_aggregation,
        kmeans: kmeans_options(),
    };
    let cg = clustergram(&p.features.z, &cg_opts, s)?;
    let choice = select_k(&gap, &cg, cfg.k);
    gap.write_csv(out.create("gap.csv")?)?;
    cg.write_csv(out.create("clustergram.csv")?)?;
    out.json(
        "k_selection.json",
        &json!({
            "choice": choice,
            "gap_selection_counts": gap.ranked_selections(),
            "gap_reps": gap.reps,
            "gap_b": gap.b,
            "clustergram_separation": cg.separation_by_k(),
            "pc1_loadings": p.features.variable_names().into_iter().zip(cg.pc1.loadings.iter().copied()).collect::<Vec<_>>(),
        }),
    )?;
    out.text("charts/gap_curve.svg", &charts::gap_curve(&gap))?;
    out.text("charts/clustergram.svg", &charts::clustergram(&cg))?;
    info!("gap modal k = {}, chosen k = {}", gap.modal_k, choice.k);
    Ok(())
}

/// The configured k, else the one recorded by the kselect stage.
fn chosen_k(cfg: &PipelineConfig) -> Result<usize> {
    if let Some(k) = cfg.k {
        return Ok(k);
    }
    let path = cfg.out_dir.join("k_selection.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|_| Error::Config("no `k` configured and no k_selection.json from a kselect run".into()))?;
    let v: Value = serde_json::from_str(&text)?;
    v["choice"]["k"]
        .as_u64()
        .map(|k| k as usize)
        .ok_or_else(|| Error::Config("k_selection.json has no choice.k".into()))
}

fn stage_fit(cfg: &PipelineConfig, out: &mut Outputs) -> Result<()> {
    let p = prepare(cfg)?;
    let k = chosen_k(cfg)?;
    let model = kmeans_restarts(&p.features.z, k, cfg.restarts, seed(cfg)?, &kmeans_options())?;
    let f = &p.features;
    {
        let mut w = csv::Writer::from_writer(out.create("assignments.csv")?);
        w.write_record(["district_code", "district_name", "cluster_id"])?;
        for (d, a) in f.districts.iter().zip(&model.assignments) {
            w.write_record([d.code.as_str(), d.name.as_str(), &a.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("assignments.csv", e))?;
    }
    {
        let mut w = csv::Writer::from_writer(out.create("centers.csv")?);
        let mut header = vec!["cluster_id".to_string()];
        header.extend(f.variable_names());
        w.write_record(&header)?;
        for c in 0..model.k {
            let mut rec = vec![c.to_string()];
            rec.extend(model.centers.row(c).iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("centers.csv", e))?;
    }
    out.json(
        "model.json",
        &json!({
            "k": model.k,
            "restarts": cfg.restarts,
            "seed": model.seed,
            "best_restart": model.best_restart,
            "wcss": model.wcss,
            "iterations": model.iterations,
            "converged": model.converged,
            "sizes": model.sizes(),
            "variables": f.variable_names(),
        }),
    )?;
    info!("k = {k}: wcss {:.4}, sizes {:?}", model.wcss, model.sizes());
    Ok(())
}

/// Rebuilds the fitted model from assignments.csv and centers.csv.
pub fn load_model(out_dir: &Path, features: &FeatureMatrix) -> Result<ClusterModel> {
    let path = out_dir.join("assignments.csv");
    let mut rdr = csv::Reader::from_path(&path)
        .map_err(|_| Error::Config(format!("{} not found; run `fit` first", path.display())))?;
    let mut by_code = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let c: usize = rec[2].parse().map_err(|_| Error::Config(format!("bad cluster id in {}", path.display())))?;
        by_code.insert(rec[0].to_string(), c);
    }
    let assignments = features
        .districts
        .iter()
        .map(|d| {
            by_code
                .get(&d.code)
                .copied()
                .ok_or_else(|| Error::Config(format!("{} missing from assignments.csv", d.code)))
        })
        .collect::<Result<Vec<_>>>()?;

    let path = out_dir.join("centers.csv");
    let mut rdr = csv::Reader::from_path(&path)
        .map_err(|_| Error::Config(format!("{} not found; run `fit` first", path.display())))?;
    let header: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_string).collect();
    if header != features.variable_names() {
        return Err(Error::Config("centers.csv variables differ from the current feature set".into()));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row: Vec<f64> = rec
            .iter()
            .skip(1)
            .map(|v| v.parse().map_err(|_| Error::Config(format!("bad number `{v}` in centers.csv"))))
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    ClusterModel::from_parts(&features.z, Matrix::from_rows(&rows), assignments)
}

fn cluster_names(cfg: &PipelineConfig, k: usize) -> Vec<String> {
    (0..k).map(|c| cfg.cluster_names.get(&c).cloned().unwrap_or_else(|| crate::profile::default_name(c))).collect()
}

fn stage_evaluate(cfg: &PipelineConfig, out: &mut Outputs) -> Result<()> {
    let p = prepare(cfg)?;
    let model = load_model(&cfg.out_dir, &p.features)?;
    let anova = anova_f(&p.features, &model.assignments, model.k)?;
    anova.write_csv(out.create("anova.csv")?)?;
    write_sizes_csv(&cluster_sizes(&model.assignments, model.k), out.create("sizes.csv")?)?;
    let boxes: BoxplotStats = distance_distribution(&p.features, &model)?;
    boxes.write_csv(out.create("boxplot.csv")?)?;
    out.text("charts/boxplots.svg", &charts::boxplots(&boxes, &cluster_names(cfg, model.k)))?;
    Ok(())
}

fn profiles(cfg: &PipelineConfig, p: &Prepared, model: &ClusterModel) -> Result<(Vec<ClusterProfile>, RiskRule)> {
    let rule = RiskRule::parse(&cfg.risk_rule)?;
    let profiles = pen_portrait(&p.features, model, cfg.epsilon)?;
    let profiles = flag_risk(profiles, &rule)?;
    Ok((name_clusters(profiles, &cfg.cluster_names)?, rule))
}

fn stage_profile(cfg: &PipelineConfig, out: &mut Outputs) -> Result<()> {
    let p = prepare(cfg)?;
    let model = load_model(&cfg.out_dir, &p.features)?;
    let (profiles, rule) = profiles(cfg, &p, &model)?;
    write_profiles_csv(&profiles, out.create("profiles.csv")?)?;
    out.text("portraits.md", &portraits_markdown(&profiles, &rule))?;
    let flagged: Vec<&ClusterProfile> = profiles.iter().filter(|p| p.at_risk).collect();
    info!("{} clusters at risk covering {} districts", flagged.len(), flagged.iter().map(|p| p.size).sum::<usize>());
    Ok(())
}

fn stage_external_validate(cfg: &PipelineConfig, out: &mut Outputs) -> Result<()> {
    let perf_path = require(&cfg.performance, "performance")?;
    let p = prepare(cfg)?;
    let model = load_model(&cfg.out_dir, &p.features)?;
    let (profiles, _) = profiles(cfg, &p, &model)?;
    let names: BTreeMap<usize, String> = profiles.iter().map(|p| (p.cluster, p.name.clone())).collect();
    let at_risk: BTreeSet<usize> = profiles.iter().filter(|p| p.at_risk).map(|p| p.cluster).collect();

    let perf = validate::load_performance(perf_path)?;
    let joined = validate::join_performance(&p.features.districts, &model.assignments, &perf)?;
    out.unmatched.insert("performance_missing_district".into(), joined.unmatched_districts.clone());
    out.unmatched.insert("performance_unknown_code".into(), joined.unmatched_records.clone());
    let summary = validate::cluster_speed_summary(&joined)?;
    summary.write_csv(&names, out.create("validation_report.csv")?)?;

    let ranks = match (&cfg.usage, &cfg.lookup) {
        (Some(u), Some(l)) if !cfg.case_districts.is_empty() => {
            let r = validate::usage_ranks(&validate::load_usage(u)?, &validate::load_lookup(l)?, &cfg.case_districts)?;
            r.write_csv(out.create("case_ranks.csv")?)?;
            Some(r)
        }
        (Some(_), None) => return Err(Error::Config("`usage` given without `lookup`".into())),
        _ => None,
    };
    out.text("validation.md", &validate::validation_markdown(&summary, &joined, ranks.as_ref(), &names, &at_risk))?;
    Ok(())
}

fn stage_export_geojson(cfg: &PipelineConfig, out: &mut Outputs) -> Result<()> {
    let path = require(&cfg.boundaries, "boundaries")?;
    let p = prepare(cfg)?;
    let model = load_model(&cfg.out_dir, &p.features)?;
    let (profiles, _) = profiles(cfg, &p, &model)?;
    let dist = distances_to_center(&p.features.z, &model)?;
    let attrs: BTreeMap<String, DistrictAttributes> = p
        .features
        .districts
        .iter()
        .zip(&model.assignments)
        .zip(&dist)
        .map(|((d, &c), &dd)| {
            let prof = &profiles[c];
            (
                d.code.clone(),
                DistrictAttributes {
                    cluster_id: c,
                    cluster_name: prof.name.clone(),
                    at_risk: prof.at_risk,
                    distance_to_center: dd,
                },
            )
        })
        .collect();
    let boundaries = geojson::load(path)?;
    let (fc, summary): (Value, ExportSummary) = geojson::export_geojson(&boundaries, &attrs, &cfg.code_property, None)?;
    out.text("classification.geojson", &(serde_json::to_string(&fc)? + "\n"))?;
    out.unmatched.insert("boundary_without_district".into(), summary.unmatched_boundaries);
    out.unmatched.insert("district_without_boundary".into(), summary.unmatched_districts);
    if let Some(b) = cfg.bbox {
        let (fc, _) = geojson::export_geojson(&boundaries, &attrs, &cfg.code_property, Some(b))?;
        out.text("classification_bbox.geojson", &(serde_json::to_string(&fc)? + "\n"))?;
    }
    Ok(())
}

fn dispatch(stage: Stage, cfg: &PipelineConfig, out: &mut Outputs) -> Result<()> {
    match stage {
        Stage::ValidateInput => stage_validate_input(cfg, out),
        Stage::KSelect => stage_kselect(cfg, out),
        Stage::Fit => stage_fit(cfg, out),
        Stage::Evaluate => stage_evaluate(cfg, out),
        Stage::Profile => stage_profile(cfg, out),
        Stage::ExternalValidate => stage_external_validate(cfg, out),
        Stage::ExportGeojson => stage_export_geojson(cfg, out),
    }
}

/// Runs `stages` in order, merging their outputs into the manifest. On error
/// the manifest still records the stages that completed.
pub fn run_stages(cfg: &PipelineConfig, stages: &[Stage], fresh: bool) -> Result<RunManifest> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let mut manifest = match (fresh, RunManifest::load(&cfg.out_dir)?) {
        (false, Some(mut m)) => {
            m.config = serde_json::to_value(cfg).unwrap_or(Value::Null);
            m.threads = rayon::current_num_threads();
            m.version = env!("CARGO_PKG_VERSION").to_string();
            m
        }
        _ => RunManifest::new(cfg),
    };
    let mut result = Ok(());
    for &stage in stages {
        let start = Instant::now();
        let mut out = Outputs::new(&cfg.out_dir);
        info!("stage {}", stage.name());
        let r = dispatch(stage, cfg, &mut out);
        for rel in &out.written {
            manifest.outputs.insert(rel.clone(), String::new());
        }
        manifest.unmatched.extend(out.unmatched);
        if let Err(e) = r {
            result = Err(e.in_stage(stage.name()));
            break;
        }
        manifest.stages.retain(|s| s.stage != stage.name());
        manifest.stages.push(StageRecord {
            stage: stage.name().to_string(),
            seconds: start.elapsed().as_secs_f64(),
            outputs: out.written,
        });
    }
    manifest.write(&cfg.out_dir)?;
    result.map(|_| manifest)
}

/// ingest → preprocess → (kselect unless k is fixed) → fit → evaluate →
/// profile → (external validation, GeoJSON export when their inputs are configured).
pub fn run_all(cfg: &PipelineConfig) -> Result<RunManifest> {
    let stages: Vec<Stage> = Stage::ALL
        .into_iter()
        .filter(|s| match s {
            Stage::KSelect => cfg.k.is_none(),
            Stage::ExternalValidate => cfg.performance.is_some(),
            Stage::ExportGeojson => cfg.boundaries.is_some(),
            _ => true,
        })
        .collect();
    run_stages(cfg, &stages, true)
}
