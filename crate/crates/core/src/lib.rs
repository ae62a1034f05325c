//! Reconstructs researchers' international mobility from bibliometric
//! authorship records and measures departure and return behaviour.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! 1. [`records`]: ingest and validate authorship records.
//! 2. [`imputer`]: predict missing affiliation countries (tf-idf + feed-forward net).
//! 3. [`disambiguation`]: split suspicious author profiles into revised ids.
//! 4. [`gender`]: first-name based gender labels.
//! 5. [`mobility`]: yearly mode countries, migration events, mobility categories.
//! 6. [`topics`]: per-researcher documents, LDA and discipline assignment.
//! 7. [`rates`]: cohort person-time departure/return rates and collaboration ratios.
//!
//! [`synth`] generates populations with planted ground truth and the
//! brute-force oracles used to check every stage; [`pipeline`] sequences the
//! stages and writes the report bundle.

pub mod country;
pub mod disambiguation;
pub mod gender;
pub mod imputer;
pub mod kv;
pub mod mobility;
pub mod pipeline;
pub mod rates;
pub mod records;
pub mod synth;
pub mod topics;

pub use country::{CountryCode, GERMANY};
pub use records::{AuthorshipRecord, Affiliation, RecordStore};
