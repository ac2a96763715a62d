//! Shock propagation and robustness analysis for weighted, directed trade
//! networks.
//!
//! A network is an [`ImportMatrix`] whose entry `(i, j)` holds the value of
//! imports into country `i` from country `j`. From it an [`IncomeModel`] is
//! derived (propensity to spend, internal income, propensity to import) and
//! shocks are propagated by alternating an income update with an import
//! update while the model parameters stay frozen.
//!
//! The crate is organised bottom-up:
//!
//! - [`ingest`]: dyadic CSV parsing and per-year matrix assembly.
//! - [`model`]: income model derivation, the two-step dynamics and the
//!   closed-form equilibrium.
//! - [`shocks`]: node deletion, two-parameter node perturbation and
//!   bilateral link deletion.
//! - [`experiments`]: maximal extinction analysis, perturbation and link
//!   scans, degree-preserving null models and significance bands.
//! - [`metrics`]: connectance, trade imbalance extremes and least-squares
//!   fits.

pub mod experiments;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod shocks;

pub use experiments::{
    link_impact, link_scan, max_vulnerability, mea, node_power, null_band, null_model, perturbation_scan,
    robustness_timeseries, ExperimentError, LinkImpact, MeaResult, NullBand, PerturbationTable,
};
pub use ingest::{
    build_import_matrix, matrix_series, parse_dyadic_csv, ImportMatrix, IngestDiagnostics, IngestError,
    MatrixSeries, TradeRecord,
};
pub use metrics::{
    connectance, linear_fit, max_trade_deficit, max_trade_surplus, quadratic_fit, FitError, FitResult,
};
pub use model::{
    derive_model, equilibrium_income, in_degree, income, iterate, out_degree, step, IncomeModel, ModelError,
    SimulationTrace, DEFAULT_ITERATIONS,
};
pub use shocks::{delete_link, delete_node, perturb_node, Shock, ShockError, ShockedState};
