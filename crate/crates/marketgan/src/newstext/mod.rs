//! Headline cleaning and word-embedding featurization.
//!
//! Daily headline bundles are cleaned (lowercase, punctuation and digits
//! stripped, stop words removed), looked up in a pretrained embedding
//! table, and packed into a fixed-shape `k × l × m` tensor per trading
//! day: `k` headline slots, `l` tokens (the training corpus maximum),
//! `m` embedding components, zero-padded everywhere a value is missing.
//! Out-of-vocabulary tokens embed to zero so that "unknown word" and
//! "no word" look identical downstream.

mod clean;
mod csv;
mod embedding;

pub use clean::{clean_headline, is_stop_word, STOP_WORDS};
pub use csv::{align_to_trading_days, parse_news_csv};
pub use embedding::{
    corpus_max_length, embed_day, parse_embedding_file, EmbeddedDay, EmbeddingTable,
};

use chrono::NaiveDate;

/// Headline slots per day (`k`): news CSVs carry the top 25 stories.
pub const NEWS_SLOTS: usize = 25;

/// Default embedding dimension (`m`) expected of the pretrained table.
pub const DEFAULT_EMBEDDING_DIM: usize = 50;

/// Errors from headline parsing and embedding.
#[derive(Debug, thiserror::Error)]
pub enum NewsTextError {
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: {detail}")]
    Line { line: usize, detail: String },
    #[error("input is empty")]
    Empty,
    #[error("corpus has no tokens; cannot size the embedding tensor")]
    EmptyCorpus,
    #[error("{0}")]
    BadConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] ::csv::Error),
}

/// One calendar day's cleaned headlines, at most [`NEWS_SLOTS`] of them,
/// in rank order. Tokens are nonempty, lowercase, and letter-only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeadlineBundle {
    pub date: NaiveDate,
    pub headlines: Vec<Vec<String>>,
}
