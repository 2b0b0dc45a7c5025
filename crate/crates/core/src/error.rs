use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong between reading a district table and writing
/// the final classification.
#[derive(Debug, Error)]
pub enum Error {
    // -- ingestion --
    #[error("column `{0}` missing from table header")]
    MissingColumn(String),
    #[error("district `{0}` appears more than once")]
    DuplicateDistrict(String),
    #[error("table has no data rows")]
    EmptyTable,
    #[error("district code `{code}` does not start with a configured region prefix")]
    BadDistrictCode { code: String },
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a non-negative number")]
    BadCell { row: usize, column: String, value: String },
    #[error("group `{group}` in district `{district}` has suppressed cells but no known total")]
    NoGroupTotal { group: String, district: String },
    #[error("group `{group}` in district `{district}`: known cells sum to {known} but total is {total}")]
    InconsistentTotal { group: String, district: String, known: f64, total: f64 },
    #[error("measure `{measure}` in district `{district}` has a zero denominator")]
    ZeroDenominator { measure: String, district: String },
    #[error("measure `{measure}` in district `{district}` has rate {rate} outside [0, 100]")]
    RateOutOfRange { measure: String, district: String, rate: f64 },
    #[error("measure `{measure}` in district `{district}` is still suppressed")]
    Unreconstructed { measure: String, district: String },

    // -- preprocessing --
    #[error("variable `{0}` is constant (zero standard deviation)")]
    ConstantColumn(String),
    #[error("need at least {need} districts, got {got}")]
    TooFewDistricts { need: usize, got: usize },
    #[error("correlation threshold {0} outside (0, 1]")]
    ThresholdOutOfRange(f64),
    #[error("pruning removed every variable")]
    AllVariablesRemoved,
    #[error("variable `{0}` is not part of the feature set")]
    UnknownVariable(String),

    // -- clustering and k selection --
    #[error("k must be at least 1")]
    KZero,
    #[error("k = {k} exceeds the number of points ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("restarts must be at least 1")]
    NoRestarts,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid k range {lo}..={hi} for {n} points")]
    KRangeInvalid { lo: usize, hi: usize, n: usize },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("covariance matrix is all zeros")]
    DegenerateCovariance,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    // -- evaluation and profiling --
    #[error("ANOVA needs at least two clusters")]
    SingleCluster,
    #[error("cluster {0} has no members")]
    EmptyCluster(usize),
    #[error("risk rule references unknown variable `{0}`")]
    UnknownVariableInRule(String),
    #[error("cannot parse risk rule: {0}")]
    RuleSyntax(String),
    #[error("unknown cluster id {0}")]
    UnknownClusterId(usize),

    // -- external validation --
    #[error("code `{0}` appears more than once")]
    DuplicateCode(String),
    #[error("no districts matched the performance table")]
    NoJoinedRows,
    #[error("district `{0}` has no area lookup")]
    MissingLookup(String),
    #[error("area `{0}` missing from usage table")]
    MissingArea(String),

    // -- export --
    #[error("nothing to export: {0}")]
    NothingToExport(String),
    #[error("boundary feature {0} has no district-code property")]
    NoCodeProperty(usize),
    #[error("invalid GeoJSON: {0}")]
    InvalidGeoJson(String),

    // -- configuration and io --
    #[error("config: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse failure category, used to pick the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage { stage, source: Box::new(e) },
        }
    }

    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            Stage { source, .. } => source.kind(),
            Config(_)
            | ThresholdOutOfRange(_)
            | KZero
            | KTooLarge { .. }
            | NoRestarts
            | KRangeInvalid { .. }
            | InvalidParameter(_)
            | RuleSyntax(_)
            | UnknownVariableInRule(_)
            | UnknownClusterId(_)
            | UnknownVariable(_) => ErrorKind::Config,
            ConstantColumn(_) | DegenerateData(_) | DegenerateCovariance | SingleCluster | EmptyCluster(_)
            | AllVariablesRemoved => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }

    /// 2 for configuration problems, 3 for bad data, 4 for numerical degeneracy.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        }
    }
}
