//! Synthetic inputs with planted structure: a 370-district table drawn from
//! seven archetypes (plus every side file the pipeline reads), and small
//! Gaussian-blob sets for k-selection checks.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;

use crate::error::{Error, Result};
use crate::ingest::{DistrictCode, RateTable};
use crate::matrix::Matrix;
use crate::preprocess::VariableMeta;
use crate::profile::DEFAULT_RISK_RULE;
use crate::seed;

pub const N_VARIABLES: usize = 11;
pub const ARCHETYPE_SIZES: [usize; 7] = [137, 151, 9, 4, 25, 38, 6];
/// Archetypes whose means satisfy the default risk rule.
pub const AT_RISK_ARCHETYPES: [usize; 3] = [2, 3, 6];
pub const NOISE_SD: f64 = 0.3;

pub const ARCHETYPE_NAMES: [&str; 7] = [
    "Rural Retirees",
    "Suburban Families",
    "Metropolitan Minority Struggle",
    "Indian Metropolitan Living",
    "Cosmopolitan Professionals",
    "Student Central",
    "Pakistani-Bangladeshi Inequality",
];

/// Latent mean z-scores, columns in [`VariableMeta::digital_accessibility`] order:
/// aged 16–24, 25–34, 35–44, mixed, indian, pakistani/bangladeshi, black,
/// other minority, nvq3+, unemployed, inactive.
pub const ARCHETYPE_MEANS: [[f64; N_VARIABLES]; 7] = [
    [-1.0, -1.4, -1.1, 0.1, -0.1, -0.6, 0.3, -0.3, 0.3, -0.4, 0.9],
    [0.1, 0.8, 1.1, -0.7, -0.2, -0.3, 0.3, -0.2, 0.5, -0.4, -1.4],
    [-0.3, 0.9, 1.9, 2.6, 0.3, 0.5, 3.4, 2.0, -1.7, 3.2, 1.8],
    [0.1, 0.9, 2.9, -0.2, 4.1, 1.0, 0.4, 1.2, -2.4, 1.6, 2.4],
    [0.3, 2.2, -1.2, 1.5, 0.6, -0.2, 2.5, 2.7, 2.6, -1.7, -1.5],
    [3.6, 0.8, -0.5, 2.1, 0.3, 0.2, -1.8, 0.2, 2.5, 1.8, 1.2],
    [1.2, 1.9, -1.3, -0.2, 1.0, 5.0, 0.1, 0.5, -2.4, 2.1, 2.6],
];

/// Rate = BASE + SCALE · latent, in percent.
const BASE: [f64; N_VARIABLES] = [12.0, 14.0, 13.0, 4.0, 4.0, 4.0, 4.0, 4.0, 55.0, 4.5, 22.0];
const SCALE: [f64; N_VARIABLES] = [2.5, 2.5, 2.0, 1.2, 1.2, 1.2, 1.2, 1.2, 8.0, 1.0, 4.0];
/// Columns 3..8 are ethnic groups counted against an ethnicity total.
const ETHNIC: std::ops::Range<usize> = 3..8;

#[derive(Debug, Clone)]
pub struct PlantedDistricts {
    pub districts: Vec<DistrictCode>,
    /// Archetype index per district.
    pub labels: Vec<usize>,
    pub rates: RateTable,
    /// Ethnicity-table population per district.
    pub population: Vec<u64>,
    /// Lon/lat of each district's cell centre.
    pub centroids: Vec<(f64, f64)>,
}

fn district_codes(n: usize) -> Vec<String> {
    // 33 London boroughs, 36 metropolitan districts, 60 unitaries, the rest shire districts.
    let mut out = Vec::with_capacity(n);
    for (prefix, count) in [("E09", 33usize), ("E08", 36), ("E06", 60), ("E07", usize::MAX)] {
        for i in 1..=count {
            if out.len() == n {
                return out;
            }
            out.push(format!("{prefix}{i:06}"));
        }
    }
    out
}

fn centroid(index: usize, code: &str) -> (f64, f64) {
    if code.starts_with("E09") {
        (-0.5 + (index % 6) as f64 * 0.1, 51.3 + (index / 6) as f64 * 0.1)
    } else {
        let j = index - 33;
        (-5.0 + (j % 20) as f64 * 0.35, 52.2 + (j / 20) as f64 * 0.3)
    }
}

/// 370 districts drawn from [`ARCHETYPE_MEANS`] with N(0, 0.3²) noise.
pub fn planted_districts(master_seed: u64) -> PlantedDistricts {
    let mut rng = seed::rng(seed::derive(master_seed, &[0x706c_616e_7465_6400]));
    let normal = Normal::new(0.0, NOISE_SD).expect("valid sd");
    let mut labels: Vec<usize> =
        ARCHETYPE_SIZES.iter().enumerate().flat_map(|(a, &s)| std::iter::repeat_n(a, s)).collect();
    labels.shuffle(&mut rng);
    let n = labels.len();
    let codes = district_codes(n);
    let mut values = Matrix::zeros(n, N_VARIABLES);
    let mut population = Vec::with_capacity(n);
    for (i, &a) in labels.iter().enumerate() {
        for (j, x) in values.row_mut(i).iter_mut().enumerate() {
            let latent = ARCHETYPE_MEANS[a][j] + normal.sample(&mut rng);
            *x = (BASE[j] + SCALE[j] * latent).clamp(0.5, 95.0);
        }
        population.push(rng.random_range(80_000..400_000u64));
    }
    let districts: Vec<DistrictCode> =
        codes.iter().enumerate().map(|(i, c)| DistrictCode::new(c, &format!("Synthetic District {}", i + 1))).collect();
    let centroids = codes.iter().enumerate().map(|(i, c)| centroid(i, c)).collect();
    PlantedDistricts {
        rates: RateTable { districts: districts.clone(), variables: VariableMeta::digital_accessibility(), values },
        districts,
        labels,
        population,
        centroids,
    }
}

/// `points_per_blob` points around each of three centres at least 10 apart, sd 0.3.
pub fn three_blobs(points_per_blob: usize, master_seed: u64) -> (Matrix, Vec<usize>) {
    let centres = [(0.0, 0.0), (10.0, 0.0), (5.0, 9.0)];
    let mut rng = seed::rng(seed::derive(master_seed, &[0x626c_6f62_7300]));
    let normal = Normal::new(0.0, 0.3).expect("valid sd");
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, &(x, y)) in centres.iter().enumerate() {
        for _ in 0..points_per_blob {
            rows.push([x + normal.sample(&mut rng), y + normal.sample(&mut rng)]);
            labels.push(c);
        }
    }
    (Matrix::from_rows(&rows), labels)
}

pub const SCHEMA_INI: &str = "\
[table]
code_column = code
name_column = name
suppression_token = !
suppression_threshold = 500
region_prefixes = E06,E07,E08,E09

[group.ethnicity]
total = eth_total

[measure.aged_16_24]
kind = percent
domain = demographic
dimension = Age

[measure.aged_25_34]
kind = percent
domain = demographic
dimension = Age

[measure.aged_35_44]
kind = percent
domain = demographic
dimension = Age

[measure.white]
group = ethnicity
denominator = eth_total
variable = false

[measure.mixed]
group = ethnicity
denominator = eth_total
domain = demographic
dimension = Ethnicity

[measure.indian]
group = ethnicity
denominator = eth_total
domain = demographic
dimension = Ethnicity

[measure.pakistani_bangladeshi]
group = ethnicity
denominator = eth_total
domain = demographic
dimension = Ethnicity

[measure.black]
group = ethnicity
denominator = eth_total
domain = demographic
dimension = Ethnicity

[measure.other_minority]
group = ethnicity
denominator = eth_total
domain = demographic
dimension = Ethnicity

[measure.nvq3_plus]
kind = percent
domain = social
dimension = Qualifications

[measure.unemployed]
kind = percent
domain = social
dimension = EmploymentStatus

[measure.inactive]
kind = percent
domain = social
dimension = EmploymentStatus
";

/// Paths of the files written by [`write_fixture`].
#[derive(Debug, Clone)]
pub struct FixtureFiles {
    pub dir: PathBuf,
    pub district_table: PathBuf,
    pub schema: PathBuf,
    pub boundaries: PathBuf,
    pub performance: PathBuf,
    pub usage: PathBuf,
    pub lookup: PathBuf,
    pub config: PathBuf,
}

/// Parameters for the generated `config.ini`.
#[derive(Debug, Clone)]
pub struct FixtureConfig {
    pub seed: u64,
    pub k: Option<usize>,
    pub restarts: usize,
    pub kselect_restarts: usize,
    pub gap_reps: usize,
    pub gap_b: usize,
    pub clustergram_reps: usize,
}

impl Default for FixtureConfig {
    /// Small enough to run in seconds.
    fn default() -> Self {
        Self { seed: 2020, k: Some(7), restarts: 1000, kselect_restarts: 3, gap_reps: 2, gap_b: 5, clustergram_reps: 2 }
    }
}

impl FixtureConfig {
    /// Full-size run settings.
    pub fn full_protocol(seed: u64) -> Self {
        Self { seed, k: Some(7), restarts: 1000, kselect_restarts: 25, gap_reps: 500, gap_b: 50, clustergram_reps: 100 }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Districts whose single ethnic count is replaced by the suppression sentinel.
fn sentinel_rows(n: usize) -> Vec<usize> {
    (0..5).map(|i| (i * 71 + 13) % n).collect()
}

fn table_csv(p: &PlantedDistricts) -> String {
    let mut s = String::from(
        "code,name,aged_16_24,aged_25_34,aged_35_44,white,mixed,indian,pakistani_bangladeshi,black,other_minority,eth_total,nvq3_plus,unemployed,inactive\n",
    );
    let sentinels = sentinel_rows(p.districts.len());
    for (i, d) in p.districts.iter().enumerate() {
        let r = p.rates.values.row(i);
        let pop = p.population[i];
        let ethnic: Vec<u64> = ETHNIC.map(|j| (r[j] / 100.0 * pop as f64).round() as u64).collect();
        let white = pop - ethnic.iter().sum::<u64>();
        let mut eth_cells: Vec<String> = ethnic.iter().map(u64::to_string).collect();
        if let Some(pos) = sentinels.iter().position(|&x| x == i) {
            let m = eth_cells.len();
            eth_cells[pos % m] = "!".into();
        }
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            d.code,
            d.name,
            r[0],
            r[1],
            r[2],
            white,
            eth_cells.join(","),
            pop,
            r[8],
            format_args!("{},{}", r[9], r[10]),
        );
    }
    s
}

fn boundaries_geojson(p: &PlantedDistricts) -> String {
    let half = 0.04;
    let square = |(x, y): (f64, f64)| {
        json!([[
            [x - half, y - half],
            [x + half, y - half],
            [x + half, y + half],
            [x - half, y + half],
            [x - half, y - half]
        ]])
    };
    // The last district has no boundary and one boundary has no district.
    let mut features: Vec<serde_json::Value> = p
        .districts
        .iter()
        .zip(&p.centroids)
        .take(p.districts.len() - 1)
        .map(|(d, &c)| {
            json!({"type": "Feature", "properties": {"code": d.code, "name": d.name}, "geometry": {"type": "Polygon", "coordinates": square(c)}})
        })
        .collect();
    features.push(json!({
        "type": "Feature",
        "properties": {"code": "E07999999", "name": "Retired boundary"},
        "geometry": {"type": "Polygon", "coordinates": square((1.8, 52.2))}
    }));
    serde_json::to_string_pretty(&json!({"type": "FeatureCollection", "features": features})).expect("serializable")
        + "\n"
}

fn performance_csv<R: Rng>(p: &PlantedDistricts, rng: &mut R) -> String {
    let noise: Normal<f64> = Normal::new(0.0, 1.0).expect("valid sd");
    let mut s = String::from("code,upload_mbits,download_mbits\n");
    for (i, d) in p.districts.iter().enumerate() {
        let a = p.labels[i];
        let (up_shift, down_shift): (f64, f64) = match a {
            0 => (-4.0, -15.0),
            a if AT_RISK_ARCHETYPES.contains(&a) => (-2.5, -8.0),
            4 => (3.0, 12.0),
            _ => (0.0, 0.0),
        };
        let up = (11.0 + up_shift + 1.5 * noise.sample(rng)).max(0.5_f64);
        let down = (60.0 + down_shift + 8.0 * noise.sample(rng)).max(2.0_f64);
        // Three districts are missing from the speed table.
        if i % 150 == 7 {
            continue;
        }
        let _ = writeln!(s, "{},{:.2},{:.2}", d.code, up, down);
    }
    s.push_str("E07999999,9.00,50.00\n");
    s
}

const N_AREAS: usize = 40;

fn usage_csv<R: Rng>(rng: &mut R) -> String {
    let mut s = String::from("area_code,used_pct,lapsed_pct\n");
    for a in 0..N_AREAS {
        let used = rng.random_range(80.0..97.0f64);
        let lapsed = (100.0 - used) * rng.random_range(0.5..0.9f64);
        let _ = writeln!(s, "UKX{:02},{:.1},{:.1}", a + 1, used, lapsed);
    }
    s
}

fn lookup_csv(p: &PlantedDistricts) -> String {
    let mut s = String::from("district_code,area_code,same_boundary\n");
    for (i, d) in p.districts.iter().enumerate() {
        let _ = writeln!(s, "{},UKX{:02},{}", d.code, i % N_AREAS + 1, i % 9 == 0);
    }
    s
}

/// First district (in table order) of each at-risk archetype, plus one student district.
pub fn case_districts(p: &PlantedDistricts) -> Vec<String> {
    [2usize, 3, 6, 5]
        .iter()
        .filter_map(|&a| p.labels.iter().position(|&l| l == a).map(|i| p.districts[i].code.clone()))
        .collect()
}

fn config_ini(p: &PlantedDistricts, c: &FixtureConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "district_table = districts.csv");
    let _ = writeln!(s, "schema = schema.ini");
    let _ = writeln!(s, "boundaries = boundaries.geojson");
    let _ = writeln!(s, "performance = performance.csv");
    let _ = writeln!(s, "usage = usage.csv");
    let _ = writeln!(s, "lookup = lookup.csv");
    let _ = writeln!(s, "out_dir = out");
    let _ = writeln!(s, "seed = {}", c.seed);
    if let Some(k) = c.k {
        let _ = writeln!(s, "k = {k}");
    }
    let _ = writeln!(s, "restarts = {}", c.restarts);
    let _ = writeln!(s, "kselect_restarts = {}", c.kselect_restarts);
    let _ = writeln!(s, "gap_reps = {}", c.gap_reps);
    let _ = writeln!(s, "gap_b = {}", c.gap_b);
    let _ = writeln!(s, "clustergram_reps = {}", c.clustergram_reps);
    let _ = writeln!(s, "correlation_threshold = 0.7");
    let _ = writeln!(s, "risk_rule = {DEFAULT_RISK_RULE}");
    let _ = writeln!(s, "case_districts = {}", case_districts(p).join(", "));
    let _ = writeln!(s, "bbox = -0.6, 51.2, 0.2, 52.0");
    s
}

/// Writes districts.csv, schema.ini, boundaries.geojson, performance.csv,
/// usage.csv, lookup.csv and config.ini into `dir`.
pub fn write_fixture(dir: &Path, master_seed: u64, config: &FixtureConfig) -> Result<(FixtureFiles, PlantedDistricts)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let planted = planted_districts(master_seed);
    let mut rng = seed::rng(seed::derive(master_seed, &[0x7369_6465_0000]));
    let files = FixtureFiles {
        dir: dir.to_path_buf(),
        district_table: dir.join("districts.csv"),
        schema: dir.join("schema.ini"),
        boundaries: dir.join("boundaries.geojson"),
        performance: dir.join("performance.csv"),
        usage: dir.join("usage.csv"),
        lookup: dir.join("lookup.csv"),
        config: dir.join("config.ini"),
    };
    write(&files.district_table, &table_csv(&planted))?;
    write(&files.schema, SCHEMA_INI)?;
    write(&files.boundaries, &boundaries_geojson(&planted))?;
    write(&files.performance, &performance_csv(&planted, &mut rng))?;
    write(&files.usage, &usage_csv(&mut rng))?;
    write(&files.lookup, &lookup_csv(&planted))?;
    write(&files.config, &config_ini(&planted, config))?;
    Ok((files, planted))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_codes() {
        let p = planted_districts(1);
        assert_eq!(p.districts.len(), 370);
        for (a, &s) in ARCHETYPE_SIZES.iter().enumerate() {
            assert_eq!(p.labels.iter().filter(|&&l| l == a).count(), s);
        }
        assert!(p.districts.iter().any(|d| d.code == "E08000035"));
        assert_eq!(AT_RISK_ARCHETYPES.iter().map(|&a| ARCHETYPE_SIZES[a]).sum::<usize>(), 19);
    }

    #[test]
    fn archetypes_are_separated() {
        for a in 0..7 {
            for b in a + 1..7 {
                let far =
                    (0..N_VARIABLES).filter(|&j| (ARCHETYPE_MEANS[a][j] - ARCHETYPE_MEANS[b][j]).abs() >= 2.0).count();
                assert!(far >= 3, "archetypes {a} and {b} differ by >= 2 in only {far} coordinates");
            }
        }
    }

    #[test]
    fn blobs() {
        let (m, l) = three_blobs(30, 0);
        assert_eq!((m.rows(), m.cols(), l.len()), (90, 2, 90));
    }

    #[test]
    fn default_rule_flags_exactly_the_planted_risk_archetypes() {
        use crate::cluster::ClusterModel;
        use crate::profile::{flag_risk, pen_portrait, RiskRule, DEFAULT_EPSILON};
        let p = planted_districts(7);
        let f = crate::preprocess::zscore(&p.rates, &VariableMeta::digital_accessibility()).unwrap();
        let k = ARCHETYPE_SIZES.len();
        let mut sums = vec![vec![0.0; N_VARIABLES]; k];
        for (row, &a) in f.z.iter_rows().zip(&p.labels) {
            sums[a].iter_mut().zip(row).for_each(|(s, x)| *s += x);
        }
        let centers: Vec<Vec<f64>> =
            sums.iter().zip(ARCHETYPE_SIZES).map(|(s, n)| s.iter().map(|x| x / n as f64).collect()).collect();
        let model = ClusterModel::from_parts(&f.z, Matrix::from_rows(&centers), p.labels.clone()).unwrap();
        let profiles = flag_risk(pen_portrait(&f, &model, DEFAULT_EPSILON).unwrap(), &RiskRule::default()).unwrap();
        let flagged: Vec<usize> = profiles.iter().filter(|p| p.at_risk).map(|p| p.cluster).collect();
        assert_eq!(flagged, AT_RISK_ARCHETYPES.to_vec());
    }
}
