//! Sources, Monte Carlo driver and reporting.

pub mod experiment;
pub mod source;
pub mod stats;

pub use experiment::{encode_experiment, highres_acceptance, run_experiment, sweep_dominant_face, ExperimentConfig, MeasureSpec, SimReport, SweepRow, TrendRow};
