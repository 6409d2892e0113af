//! Scores a simulator trace against its ground truth.
//!
//! [`align`] pairs every trace item with its annotation; the scoring
//! functions turn an alignment (or the raw trace, for timing) into the
//! report tables.

pub mod align;
pub mod latency;
pub mod overlap;
pub mod report;
pub mod score;

pub use align::{align, AlignError, Alignment, Item};
pub use latency::{latency_stats, LatencyStats};
pub use overlap::{count_overlaps, OverlapCounts};
pub use report::{Format, MetricsReport};
pub use score::{score_addressee, score_recognition, AddresseeTable, Modality, RecognitionTable};
