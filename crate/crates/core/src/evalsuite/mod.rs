//! Sequence, structure and property analyses.

mod correlation;
mod divergence;
mod motifs;
mod physchem;
mod report;
mod stats;
mod validity;

pub use correlation::{correlation_matrix, feature_property_correlation, CorrelationMatrix};
pub use divergence::{hamming_distance, kl_bits, kl_divergence, sequence_kl, KL_SMOOTHING};
pub use motifs::{count_motifs, count_motifs_in, feature_names, scan_motif, Motif, MotifReport, MotifStat};
pub use physchem::{
    diwv, grouped_composition, instability_index, isoelectric_point, isoelectric_point_with, molecular_weight,
    net_charge, physchem, ss_fractions, GroupedComposition, PhysChemReport, PkaTable, AMINO_ACID_MASS, DIWV,
    HELIX_RESIDUES, SHEET_RESIDUES, WATER_MASS,
};
pub use report::{
    compare_to_reference, coverage_columns, evaluate_records, evaluate_sequence, pooled_composition, EvalOptions,
    EvaluationReport, ReferenceComparison, SequenceReport, SetSummary,
};
pub use stats::{
    average_ranks, cosine, kolmogorov_q, ks_statistic, ks_two_sample, mae, pearson, r_squared, rmse, spearman,
    trend_metrics, KsResult, TrendMetrics, TrendReport,
};
pub use validity::{repeat_validity, window_densities, Validity, ValidityReport, DEFAULT_THRESHOLD, DEFAULT_WINDOW};
