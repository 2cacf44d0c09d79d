//! Post-processing of the solver output into track candidates, and the
//! doublet-level efficiency, purity and pT-weighted score.

mod metrics;
mod tracks;

pub use metrics::{
    count_doublets, count_doublets_with, efficiency, purity, weighted_score, DoubletCounts, MetricsReport,
    Qualification,
};
pub use tracks::{
    build_candidates, candidate_doublets, resolve_conflicts, selected_triplets_to_doublets, write_final_doublets_csv,
    TrackCandidate,
};
