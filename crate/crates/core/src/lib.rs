//! Integral indicators for an enterprise digital copy.
//!
//! The enterprise is a panel of monetary flows `x(t)` over `n` parameters.
//! At each time `t` the `k` previous measures are standardized, their Pearson
//! correlations `r_ij(t)` formed, and the integral indicator
//! `G_i(t) = sum_j |r_ij(t)|` summed per parameter. Two operating modes are
//! compared through the per-time aggregate `V(t)` and its difference.
//!
//! * [`panel`]: ingestion, validation and window extraction.
//! * [`corrwin`]: standardization and explicit correlation matrices.
//! * [`indicator`]: the tiled, parallel, deterministic indicator engine.
//! * [`strategy`]: strategy-to-process plans, budget check and optimizer.
//! * [`compare`]: mode comparison, the published-table check, reports.
//! * [`synth`]: seeded factor-model panels and strategy overlays.

pub mod compare;
pub mod corrwin;
mod error;
pub mod indicator;
pub mod panel;
pub mod strategy;
pub mod synth;

pub use compare::{
    compare_modes, render_report, verify_paper_table, ModeComparison, PaperTableFixture, ReportFormat,
    VerificationReport,
};
pub use corrwin::{correlation_entry, correlation_matrix, standardize, CorrelationWindow, StandardizedWindow};
pub use error::{Error, Result};
pub use indicator::{
    indicator_series, row_abs_sums, total_indicator, Aggregate, Engine, EngineConfig, IncrementalState, IndicatorSeries,
};
pub use panel::{
    load_panel, validate_panel, window_slice, LoadOptions, Panel, ParamKind, ParamMeta, ValidationReport, WindowMatrix,
    WindowSpec,
};
pub use strategy::{
    brute_force_assignment, check_budget, evaluate_plan, optimize_assignment, CostTable, CoverageRule, Optimized,
    StrategyModel,
};
pub use synth::{apply_strategy_overlay, generate_panel, OverlayEffect, SynthSpec};
