//! Experiment driver for discrete causal fermion systems.
//!
//! Every CLI subcommand maps to an [`Experiment`]; [`run`] executes it
//! against a validated [`Context`] and returns a [`Bundle`] of the JSON
//! report, CSV tables and plot files. The report's checks decide the exit
//! status. [`criteria`] holds the acceptance experiments.
//!
//! ```
//! use cfs_lab::{run, Context, Experiment, ExperimentConfig};
//!
//! let ctx = Context::new(ExperimentConfig::default()).unwrap();
//! let bundle = run(Experiment::Classify, &ctx).unwrap();
//! assert!(bundle.passed());
//! assert_eq!(bundle.report.experiment, "classify");
//! ```

pub mod config;
pub mod criteria;
pub mod demo;
pub mod error;
pub mod experiments;
pub mod report;

pub use cfs_core;
pub use cfs_dirac;
pub use cfs_spin;
pub use cfs_variations;
pub use cfs_wave;

pub use config::{ChainSettings, CouplingSettings, ExperimentConfig, GeneratorSpec, OutputFormat};
pub use demo::demo_system;
pub use error::{LabError, Result};
pub use experiments::{run, Context, Experiment, Physics};
pub use report::{Bundle, Check, Plot, Relation, Report};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/systems.md")]
    mod systems {}
    #[doc = include_str!("../../../book/src/variations.md")]
    mod variations {}
    #[doc = include_str!("../../../book/src/strips.md")]
    mod strips {}
    #[doc = include_str!("../../../book/src/dirac.md")]
    mod dirac {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/acceptance.md")]
    mod acceptance {}
}
