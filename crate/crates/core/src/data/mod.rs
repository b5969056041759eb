//! Surveillance seasons, CSV ingest, synthetic generation and partitioning.

mod ingest;
mod season;
mod split;
mod synth;

pub use ingest::{emit_wili, ingest_wili, read_wili, write_wili, WILI_HEADER};
pub use season::{
    epi_week_at, index_of_epi_week, year_label, PredictionTask, Season, SeasonKey, SeasonSet, FIRST_WEEK,
    LAST_WEEK, LONG_LEN, STANDARD_LEN,
};
pub use split::{split, split_with, DataSplit, SplitMembership, SplitParams};
pub use synth::{bump, synth_seasons, SynthConfig};
