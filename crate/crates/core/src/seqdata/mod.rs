//! Sequences, labeled datasets, normalization, fold planning and ingestion.

mod background;
pub mod fasta;
mod folds;
mod properties;
mod scaler;
mod sequence;
pub mod uniprot;

pub use background::{background_frequencies, BackgroundDistribution, MASP_REPEAT_BACKGROUND};
pub use fasta::{parse_fasta, parse_fasta_lenient, read_fasta_file, write_fasta, FastaRecord};
pub use folds::{make_folds, FoldPlan};
pub use properties::{
    join_labeled, parse_properties_tsv, read_labeled, tsv_header, write_labeled_tsv,
    write_properties_tsv, LabeledRecord, PropertyRow, PropertyVector, MEAN_PROPERTIES,
    PROPERTY_NAMES, STRAIN_AT_BREAK, STRENGTH, TOUGHNESS, YOUNGS_MODULUS,
};
pub use scaler::MinMaxScaler;
pub use sequence::{
    extract_repeat_region, residue_index, AminoAcidSequence, ALPHABET, C_TERMINAL_TRIM,
    N_TERMINAL_TRIM,
};
pub use uniprot::{fetch_uniprot, uniprot_url};
