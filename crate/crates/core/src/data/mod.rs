//! Interaction logs, sequence construction and the leave-one-out protocol.

mod bundle;
mod ingest;
mod negatives;
mod sequences;
mod synth;

pub use bundle::{read_bundle, write_bundle, DatasetStats, BUNDLE_MAGIC, BUNDLE_VERSION};
pub use ingest::{ingest, five_core_filter, IngestReport, InputFormat, MIN_USER_EVENTS};
pub use negatives::sample_negatives;
pub use sequences::{
    build_sequences, pad_truncate, split_leave_one_out, Role, SequenceDataset, Split,
    SplitExample, TrainExample, PAD,
};
pub use synth::{generate_synthetic, write_tsv, SynthConfig, SyntheticLog};

/// One raw user-item event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interaction {
    pub user: String,
    pub item: String,
    pub timestamp: i64,
    pub category: Option<String>,
}

impl Interaction {
    pub fn new(user: impl Into<String>, item: impl Into<String>, timestamp: i64) -> Self {
        Interaction {
            user: user.into(),
            item: item.into(),
            timestamp,
            category: None,
        }
    }

    pub fn with_category(mut self, category: impl Into<String>) -> Self {
        self.category = Some(category.into());
        self
    }
}
