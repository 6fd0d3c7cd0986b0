//! Online false discovery rate and false coverage rate control with e-values
//! under arbitrary dependence.
//!
//! The crate provides the e-LOND family of online testing procedures
//! (e-LOND, U-eLOND, LOND, r-LOND, Ur-LOND and the LORD* baseline), the
//! transforms connecting them, sequential e-processes, selective confidence
//! intervals, online weighted conformal selection, and a simulation lab with a
//! seeded Monte Carlo runner.
//!
//! ```
//! use elond::{DiscountSequence, OnlineProcedure, ProcedureKind, Statistic};
//!
//! let mut p = OnlineProcedure::new(ProcedureKind::ELond, 0.05, DiscountSequence::Default).unwrap();
//! let r = p.process(Statistic::EValue(40.0), None).unwrap();
//! assert!(r.rejected);
//! assert_eq!(r.level.get(), 0.025);
//! ```

pub mod discount;
pub mod eprocess;
pub mod error;
pub mod metrics;
pub mod procedures;
pub mod runner;
pub mod selective;
pub mod simlab;
pub mod transforms;
pub mod types;
pub mod uniform;
pub mod wcs;

pub use discount::DiscountSequence;
pub use error::{Error, Result};
pub use metrics::{MeanSe, TrialSummary};
pub use procedures::{OnlineProcedure, ProcedureKind, ProcedureSnapshot};
pub use runner::{run_trials, trial_seed, Execution};
pub use types::{DecisionRecord, GroundTruth, Statistic, TestLevel};
pub use uniform::{DrawMode, UniformSource};
