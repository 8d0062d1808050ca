//! Activity-based analysis of open source contributors.
//!
//! The crate mines contributor actions from a code-hosting service, turns them
//! into per-quarter action metrics, extracts latent activity dimensions with
//! iterated principal-axis factoring and an oblique (quartimin) rotation,
//! groups contributor-quarters into roles with Ward hierarchical clustering,
//! and measures how contributors move between roles over time.
//!
//! The pipeline stages map onto modules:
//!
//! - [`ingest`]: REST ingestion, bot filtering, body parsing, quarter bucketing
//!   and the JSON-lines [`ingest::EventStore`].
//! - [`metrics`]: the 19 action metrics per (contributor, project, quarter).
//! - [`factor`]: standardization, PAF, rotation, factor scores and reports.
//! - [`cluster`]: Ward clustering, group split, silhouette-guided cuts and the
//!   role model.
//! - [`dynamics`]: role trajectories, transition matrices and role change
//!   intensity.
//! - [`pipeline`] / [`report`] / [`config`]: end-to-end orchestration used by
//!   the `rolescope` binary.

pub mod cluster;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod factor;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod synth;

mod util;

pub use error::{Error, Result};

/// Version stamped into every artifact's metadata.
pub const SCHEMA_VERSION: u32 = 1;
