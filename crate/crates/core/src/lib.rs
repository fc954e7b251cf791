//! Robust stochastic control under volatility uncertainty.
//!
//! The crate simulates G-Brownian motion over finite volatility-scenario
//! families, solves the G-heat equation as an independent oracle,
//! represents strict and relaxed controls on finite action sets together
//! with the chattering approximation, and minimises worst-case costs of
//! controlled G-SDEs over both control classes.

pub mod cost;
pub mod error;
pub mod gheat;
pub mod gsde;
pub mod optimizer;
pub mod paths;
pub mod registry;
pub mod relaxed;
pub mod scenario;
pub mod stats;

pub use cost::{cost_stability_study, cost_under_scenario, robust_cost, CostEvaluator, CostSpec, RobustCost};
pub use error::{Error, Result};
pub use gheat::{extract_worst_case_scenario, gnormal_expectation, solve_gheat, PdeGrid, ValueSurface};
pub use gsde::{solve_relaxed, solve_strict, stability_gap, GsdeSpec, StatePathSet};
pub use optimizer::{
    brute_force_strict, duality_check, gap_report, optimize_relaxed, per_scenario_minimizer, DualityCheck, GapReport,
    RelaxedOptimum, SearchOptions, StrictOptimum,
};
pub use paths::{
    check_bdg, check_isometry, g_integral, generate_gbm, generate_noise, qv_integral, BdgReport, GPathSet,
    IsometryReport, NoiseBundle, PathView, StepProcess, TimeGrid,
};
pub use registry::{Coefficient, CostSelection, DynamicsSelection, Monomial};
pub use relaxed::{
    chatter, chatter_onto, chattering_convergence_study, embed_strict, stable_pairing, ActionSet, ChatteringStudy,
    RelaxedControl, StrictControl,
};
pub use scenario::{
    capacity_estimate, g_operator, sublinear_expectation, FamilyEstimate, ScenarioFamily, StateGrid, StateMap,
    SupEstimate, VolatilityBand, VolatilityScenario,
};
pub use stats::Estimate;
