//! District survey tables: parsing, suppressed-cell reconstruction and
//! conversion of counts to percentage rates.
//!
//! A schema (INI) declares which CSV columns are measures, which measures
//! share a group total, and which total column is each measure's denominator:
//!
//! ```ini
//! [table]
//! code_column = code
//! name_column = name
//! suppression_token = !
//! suppression_threshold = 500
//! region_prefixes = E06,E07,E08,E09,W06,S12
//!
//! [group.ethnicity]
//! total = eth_total
//!
//! [measure.indian]
//! kind = count            # or `percent`
//! group = ethnicity
//! denominator = eth_total
//! domain = demographic
//! dimension = Ethnicity
//! variable = true         # false for group members not used as features (e.g. white)
//! ```

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use log::{info, warn};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ini::Ini;
use crate::matrix::Matrix;
use crate::preprocess::{Polarity, VariableMeta};

pub const DEFAULT_SUPPRESSION_TOKEN: &str = "!";
pub const DEFAULT_SUPPRESSION_THRESHOLD: f64 = 500.0;
pub const DEFAULT_REGION_PREFIXES: [&str; 6] = ["E06", "E07", "E08", "E09", "W06", "S12"];
/// Slack allowed when checking group totals against their known cells.
pub const TOTAL_TOLERANCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct DistrictCode {
    pub code: String,
    pub name: String,
}

impl DistrictCode {
    pub fn new(code: &str, name: &str) -> Self {
        Self { code: code.to_string(), name: name.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Count,
    Percent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    pub name: String,
    pub column: String,
    pub kind: MeasureKind,
    pub group: Option<String>,
    pub denominator: Option<String>,
    pub meta: VariableMeta,
    /// Whether the measure becomes a clustering variable.
    pub variable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub code_column: String,
    pub name_column: String,
    pub suppression_token: String,
    pub suppression_threshold: f64,
    pub region_prefixes: Vec<String>,
    /// Group name → total column.
    pub groups: BTreeMap<String, String>,
    pub measures: Vec<Measure>,
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        o => Err(Error::Config(format!("expected boolean, got `{o}`"))),
    }
}

impl Schema {
    pub fn from_ini(ini: &Ini) -> Result<Self> {
        let get = |k: &str| ini.get("table", k);
        let threshold = match get("suppression_threshold") {
            Some(v) => v.parse().map_err(|_| Error::Config(format!("bad suppression_threshold `{v}`")))?,
            None => DEFAULT_SUPPRESSION_THRESHOLD,
        };
        let mut schema = Schema {
            code_column: get("code_column").unwrap_or("code").to_string(),
            name_column: get("name_column").unwrap_or("name").to_string(),
            suppression_token: get("suppression_token").unwrap_or(DEFAULT_SUPPRESSION_TOKEN).to_string(),
            suppression_threshold: threshold,
            region_prefixes: match get("region_prefixes") {
                Some(v) => v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
                None => DEFAULT_REGION_PREFIXES.iter().map(|s| s.to_string()).collect(),
            },
            groups: BTreeMap::new(),
            measures: Vec::new(),
        };
        for (section, entries) in ini.sections() {
            let lookup = |k: &str| entries.iter().find(|(ek, _)| ek == k).map(|(_, v)| v.as_str());
            if let Some(g) = section.strip_prefix("group.") {
                let total = lookup("total").ok_or_else(|| Error::Config(format!("group `{g}` has no total")))?;
                schema.groups.insert(g.to_string(), total.to_string());
            } else if let Some(m) = section.strip_prefix("measure.") {
                let kind = match lookup("kind").unwrap_or("count") {
                    "count" => MeasureKind::Count,
                    "percent" => MeasureKind::Percent,
                    o => return Err(Error::Config(format!("measure `{m}`: unknown kind `{o}`"))),
                };
                let meta = VariableMeta {
                    name: m.to_string(),
                    domain: lookup("domain").unwrap_or("social").parse()?,
                    dimension: lookup("dimension").unwrap_or("").to_string(),
                    polarity: lookup("polarity").unwrap_or("as_is").parse::<Polarity>()?,
                };
                let measure = Measure {
                    name: m.to_string(),
                    column: lookup("column").unwrap_or(m).to_string(),
                    kind,
                    group: lookup("group").map(str::to_string),
                    denominator: lookup("denominator").map(str::to_string),
                    meta,
                    variable: lookup("variable").map(parse_bool).transpose()?.unwrap_or(true),
                };
                if measure.kind == MeasureKind::Count && measure.variable && measure.denominator.is_none() {
                    return Err(Error::Config(format!("count measure `{m}` needs a denominator")));
                }
                schema.measures.push(measure);
            }
        }
        for m in &schema.measures {
            if let Some(g) = &m.group {
                if !schema.groups.contains_key(g) {
                    return Err(Error::Config(format!("measure `{}` names undeclared group `{g}`", m.name)));
                }
            }
        }
        if schema.measures.is_empty() {
            return Err(Error::Config("schema declares no measures".into()));
        }
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_ini(&Ini::load(path)?)
    }

    /// Every column holding a total or denominator.
    pub fn total_columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = self.groups.values().cloned().collect();
        cols.extend(self.measures.iter().filter_map(|m| m.denominator.clone()));
        cols.sort();
        cols.dedup();
        cols
    }

    pub fn variables(&self) -> Vec<VariableMeta> {
        self.measures.iter().filter(|m| m.variable).map(|m| m.meta.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CellValue {
    pub value: Option<f64>,
    pub suppressed: bool,
    pub reconstructed: bool,
}

impl CellValue {
    pub fn known(v: f64) -> Self {
        Self { value: Some(v), suppressed: false, reconstructed: false }
    }

    pub fn suppressed() -> Self {
        Self { value: None, suppressed: true, reconstructed: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellEvent {
    /// Sentinel token in the source file.
    Suppressed,
    /// Numeric count below the suppression threshold.
    BelowThreshold,
    Reconstructed,
    /// Reconstructed from a negative residual, set to zero.
    Clamped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestEntry {
    pub district_code: String,
    pub measure: String,
    pub status: CellEvent,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub schema: Schema,
    pub districts: Vec<DistrictCode>,
    /// `cells[district][measure]`, measures in schema order.
    pub cells: Vec<Vec<CellValue>>,
    /// Total column → per-district value (`None` when suppressed at source).
    pub totals: BTreeMap<String, Vec<Option<f64>>>,
    pub report: Vec<IngestEntry>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.districts.len()
    }

    pub fn n_measures(&self) -> usize {
        self.schema.measures.len()
    }

    pub fn measure_index(&self, name: &str) -> Option<usize> {
        self.schema.measures.iter().position(|m| m.name == name)
    }

    pub fn suppressed_count(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.value.is_none()).count()
    }

    pub fn write_report_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["district_code", "measure", "status", "value"])?;
        for e in &self.report {
            let status = match e.status {
                CellEvent::Suppressed => "suppressed",
                CellEvent::BelowThreshold => "below_threshold",
                CellEvent::Reconstructed => "reconstructed",
                CellEvent::Clamped => "clamped",
            };
            let v = e.value.map(|v| v.to_string()).unwrap_or_default();
            out.write_record([e.district_code.as_str(), e.measure.as_str(), status, v.as_str()])?;
        }
        out.flush().map_err(|e| Error::io("ingest_report.csv", e))?;
        Ok(())
    }

    fn check_group_totals(&self) -> Result<()> {
        for (g, total_col) in &self.schema.groups {
            let members: Vec<usize> = self
                .schema
                .measures
                .iter()
                .enumerate()
                .filter(|(_, m)| m.group.as_deref() == Some(g))
                .map(|(i, _)| i)
                .collect();
            for (r, d) in self.districts.iter().enumerate() {
                let Some(total) = self.totals[total_col][r] else { continue };
                let known: f64 = members.iter().filter_map(|&m| self.cells[r][m].value).sum();
                if known > total + TOTAL_TOLERANCE {
                    return Err(Error::InconsistentTotal { group: g.clone(), district: d.code.clone(), known, total });
                }
            }
        }
        Ok(())
    }
}

fn parse_number(s: &str) -> Option<f64> {
    let v: f64 = s.trim().replace(',', "").parse().ok()?;
    (v.is_finite() && v >= 0.0).then_some(v)
}

/// Parses a district CSV against `schema`. Sentinel cells and count cells
/// below the suppression threshold come back suppressed (value absent).
pub fn read_district_table<R: Read>(reader: R, schema: &Schema) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let code_ix = col(&schema.code_column)?;
    let name_ix = col(&schema.name_column)?;
    let measure_ix: Vec<usize> = schema.measures.iter().map(|m| col(&m.column)).collect::<Result<_>>()?;
    let total_cols = schema.total_columns();
    let total_ix: Vec<usize> = total_cols.iter().map(|c| col(c)).collect::<Result<_>>()?;

    let mut districts = Vec::new();
    let mut cells = Vec::new();
    let mut totals: BTreeMap<String, Vec<Option<f64>>> = total_cols.iter().map(|c| (c.clone(), Vec::new())).collect();
    let mut report = Vec::new();
    let mut seen = HashSet::new();

    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let code = rec.get(code_ix).unwrap_or("").to_string();
        if code.is_empty() || !schema.region_prefixes.iter().any(|p| code.starts_with(p.as_str())) {
            return Err(Error::BadDistrictCode { code });
        }
        if !seen.insert(code.clone()) {
            return Err(Error::DuplicateDistrict(code));
        }
        let mut row_cells = Vec::with_capacity(measure_ix.len());
        for (m, &ix) in schema.measures.iter().zip(&measure_ix) {
            let raw = rec.get(ix).unwrap_or("");
            let cell = if raw == schema.suppression_token {
                report.push(IngestEntry {
                    district_code: code.clone(),
                    measure: m.name.clone(),
                    status: CellEvent::Suppressed,
                    value: None,
                });
                CellValue::suppressed()
            } else {
                let v = parse_number(raw).ok_or_else(|| Error::BadCell {
                    row: row + 1,
                    column: m.column.clone(),
                    value: raw.to_string(),
                })?;
                if m.kind == MeasureKind::Count && v < schema.suppression_threshold {
                    report.push(IngestEntry {
                        district_code: code.clone(),
                        measure: m.name.clone(),
                        status: CellEvent::BelowThreshold,
                        value: Some(v),
                    });
                    CellValue::suppressed()
                } else {
                    CellValue::known(v)
                }
            };
            row_cells.push(cell);
        }
        for (c, &ix) in total_cols.iter().zip(&total_ix) {
            let raw = rec.get(ix).unwrap_or("");
            let v = if raw == schema.suppression_token {
                None
            } else {
                Some(parse_number(raw).ok_or_else(|| Error::BadCell {
                    row: row + 1,
                    column: c.clone(),
                    value: raw.to_string(),
                })?)
            };
            totals.get_mut(c).expect("declared").push(v);
        }
        districts.push(DistrictCode { code, name: rec.get(name_ix).unwrap_or("").to_string() });
        cells.push(row_cells);
    }
    if districts.is_empty() {
        return Err(Error::EmptyTable);
    }
    let table = RawTable { schema: schema.clone(), districts, cells, totals, report };
    table.check_group_totals()?;
    info!(
        "loaded {} districts × {} measures, {} suppressed cells",
        table.n_rows(),
        table.n_measures(),
        table.suppressed_count()
    );
    Ok(table)
}

pub fn load_district_table(path: &Path, schema: &Schema) -> Result<RawTable> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_district_table(std::io::BufReader::new(f), schema)
}

/// Fills suppressed cells from their group total: a single gap takes the
/// residual `total − Σknown`; `m` gaps share it equally. Negative residuals are
/// clamped to zero and logged.
pub fn reconstruct_suppressed(table: &RawTable) -> Result<RawTable> {
    let mut out = table.clone();
    let mut clamped = 0usize;
    for r in 0..out.districts.len() {
        let mut handled = vec![false; out.schema.measures.len()];
        for (g, total_col) in &out.schema.groups {
            let members: Vec<usize> = out
                .schema
                .measures
                .iter()
                .enumerate()
                .filter(|(_, m)| m.group.as_deref() == Some(g))
                .map(|(i, _)| i)
                .collect();
            let gaps: Vec<usize> = members.iter().copied().filter(|&m| out.cells[r][m].value.is_none()).collect();
            if gaps.is_empty() {
                continue;
            }
            let total = out.totals[total_col][r]
                .ok_or_else(|| Error::NoGroupTotal { group: g.clone(), district: out.districts[r].code.clone() })?;
            let known: f64 = members.iter().filter_map(|&m| out.cells[r][m].value).sum();
            let mut residual = total - known;
            let mut status = CellEvent::Reconstructed;
            if residual < 0.0 {
                warn!("{}: group `{g}` residual {residual} is negative, clamping to 0", out.districts[r].code);
                residual = 0.0;
                status = CellEvent::Clamped;
                clamped += 1;
            }
            let share = residual / gaps.len() as f64;
            for &m in &gaps {
                let cell = &mut out.cells[r][m];
                cell.value = Some(share);
                cell.reconstructed = true;
                handled[m] = true;
                out.report.push(IngestEntry {
                    district_code: out.districts[r].code.clone(),
                    measure: out.schema.measures[m].name.clone(),
                    status,
                    value: Some(share),
                });
            }
        }
        if let Some(m) = (0..handled.len()).find(|&m| !handled[m] && out.cells[r][m].value.is_none()) {
            return Err(Error::NoGroupTotal {
                group: out.schema.measures[m].group.clone().unwrap_or_else(|| "<none>".into()),
                district: out.districts[r].code.clone(),
            });
        }
    }
    if clamped > 0 {
        warn!("{clamped} group residual(s) clamped to zero");
    }
    Ok(out)
}

/// Districts × clustering variables on the 0–100 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub districts: Vec<DistrictCode>,
    pub variables: Vec<VariableMeta>,
    pub values: Matrix,
}

impl RateTable {
    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Keeps only the named variables, in the given order.
    pub fn select(&self, names: &[String]) -> Result<RateTable> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.variable_index(n).ok_or_else(|| Error::UnknownVariable(n.clone())))
            .collect::<Result<_>>()?;
        Ok(RateTable {
            districts: self.districts.clone(),
            variables: idx.iter().map(|&i| self.variables[i].clone()).collect(),
            values: self.values.select_cols(&idx),
        })
    }
}

/// `100 × count / denominator` for count measures; percent measures pass
/// through. Only measures flagged as variables are kept.
pub fn to_percentages(table: &RawTable) -> Result<RateTable> {
    let vars: Vec<(usize, &Measure)> = table.schema.measures.iter().enumerate().filter(|(_, m)| m.variable).collect();
    let n = table.districts.len();
    let mut values = Matrix::zeros(n, vars.len());
    for (r, d) in table.districts.iter().enumerate() {
        for (j, (m_ix, m)) in vars.iter().enumerate() {
            let v = table.cells[r][*m_ix]
                .value
                .ok_or_else(|| Error::Unreconstructed { measure: m.name.clone(), district: d.code.clone() })?;
            let rate = match m.kind {
                MeasureKind::Percent => v,
                MeasureKind::Count => {
                    let col = m.denominator.as_ref().expect("validated by schema");
                    let den = table.totals[col][r].unwrap_or(0.0);
                    if den <= 0.0 {
                        return Err(Error::ZeroDenominator { measure: m.name.clone(), district: d.code.clone() });
                    }
                    100.0 * v / den
                }
            };
            if !(0.0..=100.0).contains(&rate) {
                return Err(Error::RateOutOfRange { measure: m.name.clone(), district: d.code.clone(), rate });
            }
            values.set(r, j, rate);
        }
    }
    Ok(RateTable {
        districts: table.districts.clone(),
        variables: vars.iter().map(|(_, m)| m.meta.clone()).collect(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA: &str = "\
[table]
suppression_threshold = 500

[group.eth]
total = pop

[measure.white]
group = eth
denominator = pop
variable = false

[measure.indian]
group = eth
denominator = pop
domain = demographic
dimension = Ethnicity

[measure.black]
group = eth
denominator = pop
domain = demographic
dimension = Ethnicity

[measure.nvq3]
kind = percent
dimension = Qualifications
";

    fn schema() -> Schema {
        Schema::from_ini(&Ini::parse(SCHEMA).unwrap()).unwrap()
    }

    fn read(csv: &str) -> Result<RawTable> {
        read_district_table(csv.as_bytes(), &schema())
    }

    #[test]
    fn parses_clean_row() {
        let t = read("code,name,white,indian,black,nvq3,pop\nE08000035,Leeds,9000,612,700,55.5,10312\n").unwrap();
        assert_eq!(t.n_rows(), 1);
        assert_eq!(t.suppressed_count(), 0);
        assert!(t.report.is_empty());
        assert_eq!(t.cells[0][1], CellValue::known(612.0));
    }

    #[test]
    fn sentinel_marks_suppressed() {
        let t = read("code,name,white,indian,black,nvq3,pop\nE08000035,Leeds,9000,!,700,55.5,10312\n").unwrap();
        assert_eq!(t.cells[0][1], CellValue::suppressed());
        assert_eq!(t.report[0].status, CellEvent::Suppressed);
    }

    #[test]
    fn small_counts_are_suppressed() {
        let t = read("code,name,white,indian,black,nvq3,pop\nE08000035,Leeds,9000,499,700,55.5,10199\n").unwrap();
        assert!(t.cells[0][1].suppressed);
        assert_eq!(t.report[0].status, CellEvent::BelowThreshold);
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(read("code,name,white,indian,black,nvq3,pop\n"), Err(Error::EmptyTable)));
        assert!(
            matches!(read("code,name,white,indian,nvq3,pop\nE08000035,L,1,1,1,1\n"), Err(Error::MissingColumn(c)) if c == "black")
        );
        let dup =
            "code,name,white,indian,black,nvq3,pop\nE08000035,L,900,600,600,5,2100\nE08000035,L,900,600,600,5,2100\n";
        assert!(matches!(read(dup), Err(Error::DuplicateDistrict(_))));
        let bad = "code,name,white,indian,black,nvq3,pop\nX99,L,900,600,600,5,2100\n";
        assert!(matches!(read(bad), Err(Error::BadDistrictCode { .. })));
        let over = "code,name,white,indian,black,nvq3,pop\nE08000035,L,900,600,600,5,2000\n";
        assert!(matches!(read(over), Err(Error::InconsistentTotal { .. })));
    }

    #[test]
    fn single_gap_takes_the_residual() {
        let t = read("code,name,white,indian,black,nvq3,pop\nE06000001,A,50000,!,40000,5,100000\n").unwrap();
        let r = reconstruct_suppressed(&t).unwrap();
        assert_eq!(r.cells[0][1].value, Some(10000.0));
        assert!(r.cells[0][1].reconstructed && r.cells[0][1].suppressed);
    }

    #[test]
    fn gaps_share_the_residual_equally() {
        // Small counts; switch the threshold off.
        let mut s = schema();
        s.suppression_threshold = 0.0;
        let t = read_district_table("code,name,white,indian,black,nvq3,pop\nE06000001,A,90,!,!,5,100\n".as_bytes(), &s);
        let r = reconstruct_suppressed(&t.unwrap()).unwrap();
        assert_eq!(r.cells[0][1].value, Some(5.0));
        assert_eq!(r.cells[0][2].value, Some(5.0));
    }

    #[test]
    fn nothing_suppressed_is_identity() {
        let t = read("code,name,white,indian,black,nvq3,pop\nE06000001,A,5000,600,700,5,6300\n").unwrap();
        let r = reconstruct_suppressed(&t).unwrap();
        assert_eq!(r.cells, t.cells);
        assert!(r.cells.iter().flatten().all(|c| !c.reconstructed));
    }

    #[test]
    fn negative_residual_clamps() {
        let mut s = schema();
        s.suppression_threshold = 0.0;
        let t =
            read_district_table("code,name,white,indian,black,nvq3,pop\nE06000001,A,60,!,40.4,5,100\n".as_bytes(), &s)
                .unwrap();
        let r = reconstruct_suppressed(&t).unwrap();
        assert_eq!(r.cells[0][1].value, Some(0.0));
        assert!(r.report.iter().any(|e| e.status == CellEvent::Clamped));
    }

    #[test]
    fn missing_total_is_an_error() {
        let t = read("code,name,white,indian,black,nvq3,pop\nE06000001,A,5000,!,700,5,!\n").unwrap();
        assert!(matches!(reconstruct_suppressed(&t), Err(Error::NoGroupTotal { .. })));
    }

    #[test]
    fn percentages() {
        let t = read("code,name,white,indian,black,nvq3,pop\nE06000001,A,5000,600,700,55,6300\n").unwrap();
        let rates = to_percentages(&t).unwrap();
        assert_eq!(rates.variables.iter().map(|v| v.name.as_str()).collect::<Vec<_>>(), ["indian", "black", "nvq3"]);
        assert_eq!(rates.values.get(0, 0), 100.0 * 600.0 / 6300.0);
        assert_eq!(rates.values.get(0, 2), 55.0);
        assert!(to_percentages(
            &read("code,name,white,indian,black,nvq3,pop\nE06000001,A,!,600,700,55,6300\n").unwrap()
        )
        .is_ok());
        let zero = read("code,name,white,indian,black,nvq3,pop\nE06000001,A,0,600,700,55,0\n");
        assert!(matches!(zero, Err(Error::InconsistentTotal { .. })));
        let pct = read("code,name,white,indian,black,nvq3,pop\nE06000001,A,5000,600,700,155,6300\n").unwrap();
        assert!(matches!(to_percentages(&pct), Err(Error::RateOutOfRange { .. })));
        let unrec = read("code,name,white,indian,black,nvq3,pop\nE06000001,A,5000,!,700,55,6300\n").unwrap();
        assert!(matches!(to_percentages(&unrec), Err(Error::Unreconstructed { .. })));
    }

    #[test]
    fn rate_arithmetic() {
        let mut s = schema();
        s.suppression_threshold = 0.0;
        let t =
            read_district_table("code,name,white,indian,black,nvq3,pop\nE06000001,A,0,25,175,5,200\n".as_bytes(), &s)
                .unwrap();
        let rates = to_percentages(&t).unwrap();
        assert_eq!(rates.values.get(0, 0), 12.5);
        assert_eq!(rates.values.get(0, 1), 87.5);
        let full =
            read_district_table("code,name,white,indian,black,nvq3,pop\nE06000001,A,0,0,200,5,200\n".as_bytes(), &s)
                .unwrap();
        assert_eq!(to_percentages(&full).unwrap().values.get(0, 1), 100.0);
        let zero = read_district_table("code,name,white,indian,black,nvq3,pop\nE06000001,A,0,0,0,5,0\n".as_bytes(), &s)
            .unwrap();
        assert!(matches!(to_percentages(&zero), Err(Error::ZeroDenominator { .. })));
    }
}
