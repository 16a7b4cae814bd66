//! Batch front-end for `grpd-core`: scenario files, built-in demos and report export.

pub mod run;
pub mod scenario;

pub use run::{export_report, run_scenario, RunReport, VerifySummary};
pub use scenario::{ConeSpec, DistSpec, Operation, Scenario, Suite};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] grpd_core::GrpdError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Built-in scenarios, one per acceptance criterion, in criterion order.
pub const DEMOS: [(&str, &str); 9] = [
    ("groupoid-axioms", include_str!("../scenarios/groupoid-axioms.json")),
    ("kernel-identities", include_str!("../scenarios/kernel-identities.json")),
    ("unit-laws", include_str!("../scenarios/unit-laws.json")),
    ("g-operators", include_str!("../scenarios/g-operators.json")),
    ("transformation-iso", include_str!("../scenarios/transformation-iso.json")),
    ("remark-counterexample", include_str!("../scenarios/remark-counterexample.json")),
    ("wf-product-layers", include_str!("../scenarios/wf-product-layers.json")),
    ("cone-heredity", include_str!("../scenarios/cone-heredity.json")),
    ("serialization-roundtrip", include_str!("../scenarios/serialization-roundtrip.json")),
];

pub fn demo(name: &str) -> Result<Scenario, CliError> {
    let (_, text) = DEMOS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| CliError::Invalid(format!("unknown demo {name:?}; see list-demos")))?;
    Scenario::from_json(text)
}

/// Sizes the global rayon pool from `GRPD_THREADS` (unset or 0 = one thread per core).
pub fn configure_threads() -> Result<(), CliError> {
    let threads = match std::env::var("GRPD_THREADS") {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| CliError::Invalid(format!("GRPD_THREADS={v:?} is not a count")))?,
        Err(_) => 0,
    };
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}
