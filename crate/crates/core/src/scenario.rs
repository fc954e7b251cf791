//! Volatility uncertainty sets and finite scenario families.
//!
//! The sublinear expectation is estimated as the maximum of per-scenario
//! sample means, all computed from one [`NoiseBundle`]. With common noise,
//! a fixed reduction order and payoffs that add exactly, the estimator is
//! itself sub-additive, monotone, constant preserving and positively
//! homogeneous, bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::paths::{generate_gbm, GPathSet, NoiseBundle, PathView, TimeGrid};
use crate::stats::{argmax_first, Estimate};

/// Closed volatility interval `[sigma_min, sigma_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolatilityBand {
    sigma_min: f64,
    sigma_max: f64,
}

impl VolatilityBand {
    pub fn new(sigma_min: f64, sigma_max: f64) -> Result<Self> {
        if !(sigma_min.is_finite() && sigma_max.is_finite() && 0.0 < sigma_min && sigma_min <= sigma_max) {
            return Err(invalid("band", format!("need 0 < sigma_min <= sigma_max, got ({sigma_min}, {sigma_max})")));
        }
        Ok(Self { sigma_min, sigma_max })
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn contains(&self, sigma: f64) -> bool {
        self.sigma_min <= sigma && sigma <= self.sigma_max
    }

    pub fn is_singleton(&self) -> bool {
        self.sigma_min == self.sigma_max
    }
}

/// `G(a) = 1/2 sup_{gamma in band} gamma^2 a = 1/2 (sigma_max^2 a^+ - sigma_min^2 a^-)`.
pub fn g_operator(a: f64, band: &VolatilityBand) -> f64 {
    if a >= 0.0 {
        0.5 * band.sigma_max * band.sigma_max * a
    } else {
        0.5 * band.sigma_min * band.sigma_min * a
    }
}

/// Uniform state grid a feedback table is tabulated on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateGrid {
    pub x_min: f64,
    pub x_max: f64,
    /// Number of nodes, including both ends.
    pub nodes: usize,
}

impl StateGrid {
    /// Index of the node nearest to `x`, clamped to the grid.
    pub fn nearest(&self, x: f64) -> usize {
        if self.nodes <= 1 {
            return 0;
        }
        let dx = (self.x_max - self.x_min) / (self.nodes - 1) as f64;
        let pos = ((x - self.x_min) / dx).round();
        if pos.is_nan() || pos <= 0.0 {
            0
        } else {
            (pos as usize).min(self.nodes - 1)
        }
    }
}

/// Affine map from the simulated state to the coordinate of a feedback table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateMap {
    pub scale: f64,
    pub shift: f64,
}

impl Default for StateMap {
    fn default() -> Self {
        Self { scale: 1.0, shift: 0.0 }
    }
}

impl StateMap {
    pub fn apply(&self, state: f64) -> f64 {
        self.scale * state + self.shift
    }
}

#[derive(Debug, Clone, PartialEq)]
enum ScenarioKind {
    Deterministic { values: Vec<f64> },
    Feedback { table: Vec<f64>, states: StateGrid, map: StateMap },
}

/// One volatility policy; together with the shared noise it induces one
/// probability measure of the family.
#[derive(Debug, Clone, PartialEq)]
pub struct VolatilityScenario {
    band: VolatilityBand,
    grid: TimeGrid,
    kind: ScenarioKind,
}

impl VolatilityScenario {
    /// One volatility value per step of `grid`.
    pub fn deterministic(band: VolatilityBand, grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_steps() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} step values", grid.n_steps()),
                actual: values.len().to_string(),
            });
        }
        check_in_band(&band, &values)?;
        Ok(Self { band, grid, kind: ScenarioKind::Deterministic { values } })
    }

    pub fn constant(band: VolatilityBand, grid: TimeGrid, sigma: f64) -> Result<Self> {
        Self::deterministic(band, grid, vec![sigma; grid.n_steps()])
    }

    /// Piecewise-constant scenario: `levels` are spread evenly over the grid,
    /// step `k` taking `levels[k * levels.len() / n_steps]`.
    pub fn piecewise(band: VolatilityBand, grid: TimeGrid, levels: &[f64]) -> Result<Self> {
        if levels.is_empty() {
            return Err(invalid("levels", "need at least one volatility level"));
        }
        let n = grid.n_steps();
        let values = (0..n).map(|k| levels[k * levels.len() / n]).collect();
        Self::deterministic(band, grid, values)
    }

    /// State-feedback scenario: `table` is `n_steps x states.nodes`, row-major.
    pub fn feedback(band: VolatilityBand, grid: TimeGrid, table: Vec<f64>, states: StateGrid, map: StateMap) -> Result<Self> {
        if states.nodes == 0 || table.len() != grid.n_steps() * states.nodes {
            return Err(Error::ShapeMismatch {
                expected: format!("{} x {} feedback table", grid.n_steps(), states.nodes),
                actual: table.len().to_string(),
            });
        }
        check_in_band(&band, &table)?;
        Ok(Self { band, grid, kind: ScenarioKind::Feedback { table, states, map } })
    }

    pub fn band(&self) -> &VolatilityBand {
        &self.band
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn is_feedback(&self) -> bool {
        matches!(self.kind, ScenarioKind::Feedback { .. })
    }

    /// Step values of a deterministic scenario.
    pub fn values(&self) -> Option<&[f64]> {
        match &self.kind {
            ScenarioKind::Deterministic { values } => Some(values),
            ScenarioKind::Feedback { .. } => None,
        }
    }

    /// Volatility on step `k` given the state at the start of the step.
    pub fn volatility(&self, k: usize, state: f64) -> f64 {
        match &self.kind {
            ScenarioKind::Deterministic { values } => values[k],
            ScenarioKind::Feedback { table, states, map } => table[k * states.nodes + states.nearest(map.apply(state))],
        }
    }

    /// Short human-readable description used in reports.
    pub fn label(&self) -> String {
        match &self.kind {
            ScenarioKind::Deterministic { values } => {
                if values.iter().all(|v| *v == values[0]) {
                    format!("constant({})", values[0])
                } else {
                    "piecewise".to_string()
                }
            }
            ScenarioKind::Feedback { .. } => "worst-case feedback".to_string(),
        }
    }
}

fn check_in_band(band: &VolatilityBand, values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !band.contains(**v)) {
        Some(&value) => Err(Error::ScenarioOutOfBand {
            value,
            sigma_min: band.sigma_min,
            sigma_max: band.sigma_max,
        }),
        None => Ok(()),
    }
}

/// Finite, ordered surrogate for the family of measures.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFamily {
    band: VolatilityBand,
    scenarios: Vec<VolatilityScenario>,
    includes_worst_case_feedback: bool,
}

impl ScenarioFamily {
    pub fn new(band: VolatilityBand, scenarios: Vec<VolatilityScenario>) -> Result<Self> {
        let first = scenarios.first().ok_or(Error::EmptyFamily)?;
        let grid = *first.grid();
        for s in &scenarios {
            if s.grid() != &grid {
                return Err(Error::GridMismatch("all scenarios of a family must share one time grid".into()));
            }
            if s.band() != &band {
                return Err(invalid("scenarios", "every scenario must use the family band"));
            }
        }
        let includes_worst_case_feedback = scenarios.iter().any(VolatilityScenario::is_feedback);
        Ok(Self { band, scenarios, includes_worst_case_feedback })
    }

    /// Constant scenarios, one per level, in the given order.
    pub fn constants(band: VolatilityBand, grid: TimeGrid, levels: &[f64]) -> Result<Self> {
        let scenarios = levels
            .iter()
            .map(|s| VolatilityScenario::constant(band, grid, *s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(band, scenarios)
    }

    /// Appends a scenario (typically the PDE-derived worst case) at the end of the order.
    pub fn push(&mut self, scenario: VolatilityScenario) -> Result<()> {
        if scenario.grid() != self.grid() || scenario.band() != &self.band {
            return Err(Error::GridMismatch("scenario does not match the family grid and band".into()));
        }
        self.includes_worst_case_feedback |= scenario.is_feedback();
        self.scenarios.push(scenario);
        Ok(())
    }

    pub fn band(&self) -> &VolatilityBand {
        &self.band
    }

    pub fn grid(&self) -> &TimeGrid {
        self.scenarios[0].grid()
    }

    pub fn scenarios(&self) -> &[VolatilityScenario] {
        &self.scenarios
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn includes_worst_case_feedback(&self) -> bool {
        self.includes_worst_case_feedback
    }

    /// Paths of every scenario, in family order, over the same noise.
    pub fn generate_paths(&self, noise: &NoiseBundle) -> Result<Vec<GPathSet>> {
        self.scenarios.iter().map(|s| generate_gbm(noise, s)).collect()
    }

    /// Sublinear expectation of a path functional over the family.
    pub fn expectation(&self, noise: &NoiseBundle, payoff: impl Fn(&PathView<'_>) -> f64) -> Result<FamilyEstimate> {
        let per_scenario = self
            .generate_paths(noise)?
            .iter()
            .map(|paths| Estimate::from_samples(&paths.map_paths(&payoff)).ok_or(Error::NoPaths))
            .collect::<Result<Vec<_>>>()?;
        FamilyEstimate::from_estimates(per_scenario)
    }
}

/// Result of a sup-reduction over the family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupEstimate {
    pub value: f64,
    pub argmax: usize,
}

/// Maximum of per-scenario estimates; the first attaining index wins ties.
pub fn sublinear_expectation(per_scenario_estimates: &[f64]) -> Result<SupEstimate> {
    argmax_first(per_scenario_estimates)
        .map(|(argmax, value)| SupEstimate { value, argmax })
        .ok_or(Error::EmptyFamily)
}

/// Per-scenario estimates together with their sup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyEstimate {
    pub value: f64,
    /// Standard error of the attaining scenario.
    pub se: f64,
    pub argmax: usize,
    pub per_scenario: Vec<Estimate>,
}

impl FamilyEstimate {
    pub fn from_estimates(per_scenario: Vec<Estimate>) -> Result<Self> {
        let means: Vec<f64> = per_scenario.iter().map(|e| e.mean).collect();
        let sup = sublinear_expectation(&means)?;
        Ok(Self { value: sup.value, se: per_scenario[sup.argmax].se, argmax: sup.argmax, per_scenario })
    }
}

/// Upper capacity of an event: the largest path fraction over the family.
pub fn capacity_estimate(event: impl Fn(&PathView<'_>) -> bool, family: &ScenarioFamily, noise: &NoiseBundle) -> Result<f64> {
    let m = noise.m_paths();
    if m == 0 {
        return Err(Error::NoPaths);
    }
    let fractions = family
        .generate_paths(noise)?
        .iter()
        .map(|paths| paths.paths().filter(|p| event(p)).count() as f64 / m as f64)
        .collect::<Vec<_>>();
    Ok(sublinear_expectation(&fractions)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::generate_noise;

    fn band() -> VolatilityBand {
        VolatilityBand::new(0.5, 1.0).unwrap()
    }

    #[test]
    fn band_validation() {
        assert!(VolatilityBand::new(0.0, 1.0).is_err());
        assert!(VolatilityBand::new(1.0, 0.5).is_err());
        assert!(VolatilityBand::new(0.7, 0.7).unwrap().is_singleton());
    }

    #[test]
    fn g_operator_values() {
        assert_eq!(g_operator(0.0, &band()), 0.0);
        assert_eq!(g_operator(2.0, &band()), 1.0);
        assert_eq!(g_operator(-2.0, &band()), -0.25);
    }

    #[test]
    fn g_operator_matches_brute_force_sup() {
        let b = band();
        let gammas: Vec<f64> = (0..10_000).map(|i| 0.5 + 0.5 * i as f64 / 9_999.0).collect();
        for a in [-3.0, -2.0, -0.1, 0.0, 0.4, 2.0, 5.0] {
            let brute = gammas.iter().map(|g| 0.5 * g * g * a).fold(f64::NEG_INFINITY, f64::max);
            assert!((brute - g_operator(a, &b)).abs() < 1e-12, "a = {a}");
        }
    }

    #[test]
    fn sublinear_expectation_reports_first_argmax() {
        let sup = sublinear_expectation(&[0.2, 0.5, 0.4]).unwrap();
        assert_eq!((sup.value, sup.argmax), (0.5, 1));
        assert_eq!(sublinear_expectation(&[3.7]).unwrap().value, 3.7);
        assert_eq!(sublinear_expectation(&[]), Err(Error::EmptyFamily));
    }

    #[test]
    fn piecewise_levels_spread_over_grid() {
        let grid = TimeGrid::new(1.0, 6).unwrap();
        let s = VolatilityScenario::piecewise(band(), grid, &[0.5, 1.0]).unwrap();
        assert_eq!(s.values().unwrap(), &[0.5, 0.5, 0.5, 1.0, 1.0, 1.0]);
        assert!(VolatilityScenario::deterministic(band(), grid, vec![0.5; 5]).is_err());
    }

    #[test]
    fn family_rejects_mixed_grids() {
        let g1 = TimeGrid::new(1.0, 4).unwrap();
        let g2 = TimeGrid::new(1.0, 5).unwrap();
        let s1 = VolatilityScenario::constant(band(), g1, 0.5).unwrap();
        let s2 = VolatilityScenario::constant(band(), g2, 0.5).unwrap();
        assert!(ScenarioFamily::new(band(), vec![s1, s2]).is_err());
        assert_eq!(ScenarioFamily::new(band(), vec![]), Err(Error::EmptyFamily));
    }

    #[test]
    fn capacity_of_trivial_events() {
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let family = ScenarioFamily::constants(band(), grid, &[0.5, 1.0]).unwrap();
        let noise = generate_noise(1, 256, grid).unwrap();
        assert_eq!(capacity_estimate(|_| true, &family, &noise).unwrap(), 1.0);
        assert_eq!(capacity_estimate(|_| false, &family, &noise).unwrap(), 0.0);
    }

    #[test]
    fn capacity_of_positive_terminal_is_one_half() {
        let m = 40_000;
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let family = ScenarioFamily::constants(band(), grid, &[0.5, 0.75, 1.0]).unwrap();
        let noise = generate_noise(2024, m, grid).unwrap();
        let c = capacity_estimate(|p| p.terminal() > 0.0, &family, &noise).unwrap();
        assert!((c - 0.5).abs() <= 3.0 * (0.25 / m as f64).sqrt(), "capacity {c}");
    }

    #[test]
    fn expectation_of_squared_terminal_is_attained_at_upper_volatility() {
        let m = 100_000;
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let family = ScenarioFamily::constants(band(), grid, &[0.5, 0.75, 1.0]).unwrap();
        let noise = generate_noise(2024, m, grid).unwrap();
        let est = family.expectation(&noise, |p| p.terminal().powi(2)).unwrap();
        assert_eq!(est.argmax, 2);
        assert!((est.value - 1.0).abs() <= 3.0 * est.se, "{est:?}");
        let centred = family.expectation(&noise, |p| p.terminal()).unwrap();
        assert!(centred.value.abs() <= 4.0 * centred.se);
    }
}
