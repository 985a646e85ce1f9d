//! Scenario configuration, Monte Carlo experiments and result output.

pub mod config;
pub mod experiment;
pub mod output;
pub mod ring;

pub use config::{CodeChoice, DetectorSpec, GridPoint, PsiConfig, ScenarioConfig};
pub use experiment::{
    load_or_calibrate_psi, perturb_classes, run_approx, run_per_experiment, run_variance_mismatch, wilson_interval,
    PerResult, PerRow, APPROX_LABEL,
};
pub use output::CsvSink;
pub use ring::{generate_ring_scenario, RingClass, RingConfig};
