//! Closed-loop coverage closure for constrained-random simulation
//! regressions.
//!
//! The flow: run a seeded constrained-random regression over one of the
//! built-in designs while logging stimulus and coverbin hits to a CSV
//! dataset; prepare that dataset (dedup + correlation-driven variable
//! selection); train one supervised regressor per coverbin; synthesize
//! directed constraint sets from the model predictions; run the resulting
//! optimized regression; and report test-run, run-time and coverage-regain
//! ratios. The loop repeats on accumulated data until the regain target is
//! met or the iteration cap is hit.

pub mod builtin;
pub mod coverage;
pub mod dataprep;
pub mod duv;
pub mod error;
pub mod ml;
pub mod pipeline;
pub mod report;
pub mod runner;
pub mod stimulus;
pub mod synth;

pub use error::{Error, Result};
