//! Choosing the number of clusters: gap statistic and clustergram.

mod clustergram;
mod gap;
mod pca;

pub use clustergram::{clustergram, Aggregation, ClustergramOptions, ClustergramRow, ClustergramTable};
pub use gap::{gap_statistic, one_se_rule, uniform_reference, GapCurve, GapOptions, GapReport, GapRow};
pub use pca::{pca_first_component, sample_covariance, Pc1};

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KSource {
    Override,
    GapModal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KChoice {
    pub k: usize,
    pub source: KSource,
    pub modal_k: usize,
    /// Second most frequent gap selection, if any repetition chose another k.
    pub runner_up: Option<usize>,
    pub modal_frequency: f64,
    pub clustergram_candidates: Vec<usize>,
    pub note: String,
}

pub fn select_k(gap: &GapReport, clustergram: &ClustergramTable, override_k: Option<usize>) -> KChoice {
    let ranked = gap.ranked_selections();
    let modal_frequency = ranked[0].1 as f64 / gap.reps as f64;
    let runner_up = ranked.get(1).map(|r| r.0);
    let candidates = clustergram.candidate_ks();
    let (k, source, note) = match override_k {
        Some(k) => (
            k,
            KSource::Override,
            format!("manual override k = {k}; gap modal k = {}, clustergram candidates {candidates:?}", gap.modal_k),
        ),
        None => (
            gap.modal_k,
            KSource::GapModal,
            format!("gap modal k = {} chosen in {:.1}% of repetitions", gap.modal_k, 100.0 * modal_frequency),
        ),
    };
    KChoice { k, source, modal_k: gap.modal_k, runner_up, modal_frequency, clustergram_candidates: candidates, note }
}
