//! Consistency checking between two independent PHD trackers.
//!
//! A unit-level and a sub-unit-level particle PHD filter run on independent
//! observation streams. The unit PHD is mapped to a synthesized sub-unit PHD
//! by convolving it with a doctrine mask (sub-unit offsets relative to their
//! unit), and the synthesized and tracked sub-unit PHDs are compared with
//! L_p distances, globally and over recursively refined sub-regions.
//!
//! Modules:
//! * [`phd`]: particle and grid PHD representations, discretization.
//! * [`filter`]: SMC PHD filter (predict, update, resample).
//! * [`doctrine`]: doctrine masks, the convolution operator, superposition
//!   and best-match selection.
//! * [`metrics`]: L_p norms, distances and failure localization.
//! * [`scenario`]: seeded ground truth and observation simulator.
//! * [`experiment`]: the end-to-end pipeline, config files and CSV output.
//! * [`oracle`]: slow reference implementations for cross-checks.

pub mod doctrine;
pub mod error;
pub mod experiment;
pub mod filter;
pub mod metrics;
pub mod oracle;
pub mod phd;
pub mod scenario;

pub use error::{Error, Result};
