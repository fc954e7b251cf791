//! Run configuration, read from JSON.

use std::path::{Path, PathBuf};

use grelax::{
    Coefficient, CostSelection, DynamicsSelection, PdeGrid, RelaxedControl, SearchOptions, TimeGrid, VolatilityBand,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// The configuration shipped with the binary and used when `--config` is absent.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub sigma_min: f64,
    pub sigma_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    /// Constant volatility levels, one scenario each.
    pub levels: Vec<f64>,
    /// Piecewise-constant scenarios, each a list of levels over equal sub-intervals.
    #[serde(default)]
    pub piecewise: Vec<Vec<f64>>,
    /// Append the worst-case feedback scenario extracted from the G-heat
    /// solve of `payoff`.
    #[serde(default)]
    pub worst_case_feedback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_max_evaluations")]
    pub max_evaluations: usize,
}

fn default_resolution() -> usize {
    4
}
fn default_levels() -> usize {
    3
}
fn default_rel_tol() -> f64 {
    1e-4
}
fn default_max_evaluations() -> usize {
    20_000
}
fn default_refinement() -> usize {
    grelax::relaxed::DEFAULT_REFINEMENT
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            resolution: default_resolution(),
            levels: default_levels(),
            rel_tol: default_rel_tol(),
            max_evaluations: default_max_evaluations(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: String,
    pub seed: u64,
    pub band: BandConfig,
    pub family: FamilyConfig,
    /// Simulation grid; every Monte-Carlo artifact lives on it.
    pub grid: TimeGrid,
    /// Steps of the coarse control grid searched by `optimize`.
    pub control_steps: usize,
    /// Simulation steps used while searching; defaults to `grid.n_steps`.
    #[serde(default)]
    pub search_steps: Option<usize>,
    pub actions: Vec<f64>,
    pub dynamics: DynamicsSelection,
    pub cost: CostSelection,
    /// Terminal payoff of `gheat` and `expect`, also the source of the
    /// worst-case feedback scenario.
    pub payoff: Coefficient,
    pub pde: PdeConfig,
    pub m_paths: usize,
    pub n_list: Vec<usize>,
    #[serde(default = "default_refinement")]
    pub refinement: usize,
    #[serde(default)]
    pub budget: BudgetConfig,
    /// Relaxed control for `solve`, `cost` and `chatter`; uniform on the
    /// control grid when absent.
    #[serde(default)]
    pub control: Option<RelaxedControl>,
    pub out: PathBuf,
}

fn field(name: &str, reason: impl Into<String>) -> CliError {
    CliError::Config(format!("field `{name}`: {}", reason.into()))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.band()?;
        TimeGrid::new(self.grid.horizon(), self.grid.n_steps()).map_err(|e| field("grid", e.to_string()))?;
        if self.family.levels.is_empty() && self.family.piecewise.is_empty() && !self.family.worst_case_feedback {
            return Err(field("family", "at least one scenario is required"));
        }
        if self.actions.is_empty() {
            return Err(field("actions", "at least one action is required"));
        }
        if self.control_steps == 0 || self.grid.n_steps() % self.control_steps != 0 {
            return Err(field("control_steps", "must be positive and divide grid.n_steps"));
        }
        if let Some(s) = self.search_steps {
            if s == 0 || s % self.control_steps != 0 {
                return Err(field("search_steps", "must be a positive multiple of control_steps"));
            }
        }
        if self.m_paths < 2 {
            return Err(field("m_paths", "at least two paths are needed for a standard error"));
        }
        let unit = self.actions.len();
        for &n in &self.n_list {
            if n == 0 || self.grid.n_steps() % (n * unit) != 0 {
                return Err(field("n_list", format!("grid.n_steps must be a multiple of n * |U| for n = {n}")));
            }
        }
        if self.refinement == 0 {
            return Err(field("refinement", "must be at least 1"));
        }
        if let Some(mu) = &self.control {
            if mu.n_actions() != self.actions.len() || mu.grid().horizon() != self.grid.horizon() {
                return Err(field("control", "must have one weight per action and the grid's horizon"));
            }
            if self.grid.refinement_of(mu.grid()).is_none() {
                return Err(field("control", "its grid must divide the simulation grid"));
            }
        }
        if self.pde.nx < 2 || self.pde.x_min >= self.pde.x_max {
            return Err(field("pde", "need x_min < x_max and nx >= 2"));
        }
        if self.dynamics.bound <= 0.0 || self.cost.bound <= 0.0 {
            return Err(field("bound", "declared bounds must be positive"));
        }
        Ok(())
    }

    pub fn band(&self) -> Result<VolatilityBand, CliError> {
        VolatilityBand::new(self.band.sigma_min, self.band.sigma_max).map_err(|e| field("band", e.to_string()))
    }

    pub fn control_grid(&self) -> TimeGrid {
        TimeGrid::new(self.grid.horizon(), self.control_steps).expect("validated")
    }

    pub fn search_grid(&self) -> TimeGrid {
        TimeGrid::new(self.grid.horizon(), self.search_steps.unwrap_or(self.grid.n_steps())).expect("validated")
    }

    pub fn pde_grid(&self) -> Result<PdeGrid, CliError> {
        PdeGrid::stable(self.pde.x_min, self.pde.x_max, self.pde.nx, self.grid.horizon(), &self.band()?)
            .map_err(|e| field("pde", e.to_string()))
    }

    pub fn search_options(&self) -> SearchOptions {
        SearchOptions {
            resolution: self.budget.resolution,
            levels: self.budget.levels,
            rel_tol: self.budget.rel_tol,
            max_evaluations: self.budget.max_evaluations,
            start: None,
        }
    }

    /// The configured control, or uniform weights on the control grid.
    pub fn control(&self) -> RelaxedControl {
        self.control
            .clone()
            .unwrap_or_else(|| RelaxedControl::uniform(self.control_grid(), self.actions.len()).expect("validated"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_parses() {
        let c = RunConfig::parse(DEFAULT_CONFIG).unwrap();
        assert_eq!(c.actions.len(), 2);
        assert!(c.family.worst_case_feedback);
    }

    #[test]
    fn errors_name_the_field() {
        let mut v: serde_json::Value = serde_json::from_str(DEFAULT_CONFIG).unwrap();
        v["control_steps"] = 7.into();
        let err = RunConfig::parse(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("control_steps"), "{err}");

        v["control_steps"] = 4.into();
        v["band"]["sigma_min"] = 2.0.into();
        let err = RunConfig::parse(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("band"), "{err}");
    }

    #[test]
    fn seed_is_mandatory() {
        let mut v: serde_json::Value = serde_json::from_str(DEFAULT_CONFIG).unwrap();
        v.as_object_mut().unwrap().remove("seed");
        let err = RunConfig::parse(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("seed"), "{err}");
    }

    #[test]
    fn unknown_registry_family_is_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(DEFAULT_CONFIG).unwrap();
        v["dynamics"]["drift"] = serde_json::json!({"family": "neural_net"});
        let err = RunConfig::parse(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("neural_net"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let err = RunConfig::parse("{\n  \"seed\": ,\n}").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }
}
