//! Per-scenario and robust costs of a controlled G-SDE.
//!
//! `chi = sum_k sum_a w_k(a) f(t_k, x_k, a) dt + h(x_T)` per path; the cost
//! under one scenario is its sample mean and the robust cost is the
//! largest of those means. The robust value carries the standard error of
//! the attaining scenario.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gsde::{check_control, checked, simulate_path, ControlledFn, GsdeSpec, StatePathSet};
use crate::paths::{GPathSet, NoiseBundle, TimeGrid};
use crate::relaxed::{chatter_onto, embed_strict, ActionSet, RelaxedControl, StrictControl};
use crate::scenario::{ScenarioFamily, VolatilityScenario};
use crate::stats::{argmax_first, Estimate};

/// Running cost `f(t, x, a)`, terminal cost `h(x)` and their declared bound.
#[derive(Clone)]
pub struct CostSpec {
    pub running: ControlledFn,
    pub terminal: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub declared_bound: f64,
}

impl fmt::Debug for CostSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CostSpec").field("declared_bound", &self.declared_bound).finish_non_exhaustive()
    }
}

impl CostSpec {
    /// Zero running and terminal cost.
    pub fn new(declared_bound: f64) -> Self {
        Self { running: Arc::new(|_, _, _| 0.0), terminal: Arc::new(|_| 0.0), declared_bound }
    }

    pub fn with_running(mut self, f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.running = Arc::new(f);
        self
    }

    pub fn with_terminal(mut self, h: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.terminal = Arc::new(h);
        self
    }
}

fn running_term(spec: &CostSpec, row: &[f64], actions: &ActionSet, t: f64, x: f64) -> Result<f64> {
    let mut acc = 0.0;
    for (a, &w) in row.iter().enumerate() {
        if w != 0.0 {
            acc += w * checked("f", (spec.running)(t, x, actions.value(a)), spec.declared_bound, t, x)?;
        }
    }
    Ok(acc)
}

/// Per-path `chi` from already solved states.
pub fn chi(spec: &CostSpec, mu: &RelaxedControl, actions: &ActionSet, states: &StatePathSet) -> Result<Vec<f64>> {
    if mu.grid() != states.grid() {
        return Err(Error::GridMismatch("control and states use different grids".into()));
    }
    let grid = *states.grid();
    let dt = grid.dt();
    states
        .paths()
        .map(|x| {
            let mut running = 0.0;
            for (k, row) in mu.rows().enumerate() {
                running += running_term(spec, row, actions, grid.time(k), x[k])? * dt;
            }
            let xt = x[grid.n_steps()];
            let terminal = checked("h", (spec.terminal)(xt), spec.declared_bound, grid.horizon(), xt)?;
            Ok(running + terminal)
        })
        .collect()
}

/// Per-path `chi` computed while stepping the SDE, without storing states.
fn chi_streaming(gsde: &GsdeSpec, cost: &CostSpec, mu: &RelaxedControl, actions: &ActionSet, paths: &GPathSet) -> Result<Vec<f64>> {
    check_control(mu, actions, paths)?;
    let grid = *paths.grid();
    let dt = grid.dt();
    let n = grid.n_steps();
    let mut out = Vec::with_capacity(paths.m_paths());
    for i in 0..paths.m_paths() {
        let mut running = 0.0;
        let mut terminal = 0.0;
        simulate_path(gsde, mu, actions, &grid, &paths.path(i), |k, x| {
            if k < n {
                running += running_term(cost, mu.row(k), actions, grid.time(k), x)? * dt;
            } else {
                terminal = checked("h", (cost.terminal)(x), cost.declared_bound, grid.horizon(), x)?;
            }
            Ok(())
        })?;
        out.push(running + terminal);
    }
    Ok(out)
}

/// JSON record of a robust cost evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustCost {
    pub value: f64,
    pub se: f64,
    pub argmax_scenario: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub per_scenario: Vec<Estimate>,
}

/// Precomputed scenario paths for repeated cost evaluations on one noise bundle.
///
/// Controls on a coarser grid are lifted onto the noise grid before solving.
#[derive(Debug, Clone)]
pub struct CostEvaluator {
    gsde: GsdeSpec,
    cost: CostSpec,
    actions: ActionSet,
    paths: Vec<GPathSet>,
    seed: u64,
}

impl CostEvaluator {
    pub fn new(gsde: GsdeSpec, cost: CostSpec, actions: ActionSet, family: &ScenarioFamily, noise: &NoiseBundle) -> Result<Self> {
        Ok(Self { gsde, cost, actions, paths: family.generate_paths(noise)?, seed: noise.seed() })
    }

    pub fn actions(&self) -> &ActionSet {
        &self.actions
    }

    pub fn grid(&self) -> &TimeGrid {
        self.paths[0].grid()
    }

    pub fn n_scenarios(&self) -> usize {
        self.paths.len()
    }

    pub fn n_paths(&self) -> usize {
        self.paths[0].m_paths()
    }

    pub fn family_paths(&self) -> &[GPathSet] {
        &self.paths
    }

    pub fn gsde(&self) -> &GsdeSpec {
        &self.gsde
    }

    fn on_noise_grid(&self, mu: &RelaxedControl) -> Result<RelaxedControl> {
        if mu.grid() == self.grid() {
            Ok(mu.clone())
        } else {
            mu.lift(*self.grid())
        }
    }

    /// Per-path `chi` under scenario `index`.
    pub fn chi_samples(&self, index: usize, mu: &RelaxedControl) -> Result<Vec<f64>> {
        let mu = self.on_noise_grid(mu)?;
        chi_streaming(&self.gsde, &self.cost, &mu, &self.actions, &self.paths[index])
    }

    /// `J^P(mu)` for scenario `index`.
    pub fn scenario_cost(&self, index: usize, mu: &RelaxedControl) -> Result<Estimate> {
        Estimate::from_samples(&self.chi_samples(index, mu)?).ok_or(Error::NoPaths)
    }

    /// `J(mu) = max_P J^P(mu)`.
    pub fn robust(&self, mu: &RelaxedControl) -> Result<RobustCost> {
        let mu = self.on_noise_grid(mu)?;
        let per_scenario = self
            .paths
            .iter()
            .map(|p| Estimate::from_samples(&chi_streaming(&self.gsde, &self.cost, &mu, &self.actions, p)?).ok_or(Error::NoPaths))
            .collect::<Result<Vec<_>>>()?;
        let means: Vec<f64> = per_scenario.iter().map(|e| e.mean).collect();
        let (argmax_scenario, value) = argmax_first(&means).ok_or(Error::EmptyFamily)?;
        Ok(RobustCost {
            value,
            se: per_scenario[argmax_scenario].se,
            argmax_scenario,
            n_paths: self.n_paths(),
            seed: self.seed,
            per_scenario,
        })
    }

    pub fn robust_strict(&self, u: &StrictControl) -> Result<RobustCost> {
        self.robust(&embed_strict(u, &self.actions)?)
    }
}

/// `J^P(mu)`: Monte-Carlo mean of `chi` under one scenario.
pub fn cost_under_scenario(
    cost: &CostSpec,
    gsde: &GsdeSpec,
    mu: &RelaxedControl,
    actions: &ActionSet,
    scenario: &VolatilityScenario,
    noise: &NoiseBundle,
) -> Result<Estimate> {
    let family = ScenarioFamily::new(*scenario.band(), vec![scenario.clone()])?;
    CostEvaluator::new(gsde.clone(), cost.clone(), actions.clone(), &family, noise)?.scenario_cost(0, mu)
}

/// `J(mu) = sup_P J^P(mu)` over the family, on common noise.
pub fn robust_cost(
    cost: &CostSpec,
    gsde: &GsdeSpec,
    mu: &RelaxedControl,
    actions: &ActionSet,
    family: &ScenarioFamily,
    noise: &NoiseBundle,
) -> Result<RobustCost> {
    CostEvaluator::new(gsde.clone(), cost.clone(), actions.clone(), family, noise)?.robust(mu)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostStabilityRow {
    pub n: usize,
    pub value: f64,
    pub se: f64,
    pub argmax_scenario: usize,
    /// `|J(u_n) - J(mu)|`.
    pub diff: f64,
    /// `sqrt(se(J(u_n))^2 + se(J(mu))^2)`.
    pub diff_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostStability {
    pub relaxed: RobustCost,
    pub rows: Vec<CostStabilityRow>,
    /// Smallest `C` with `diff <= 2 diff_se + C / n` on every row.
    pub fitted_c: f64,
}

impl CostStability {
    pub fn envelope_holds(&self) -> bool {
        self.rows.iter().all(|r| r.diff <= 2.0 * r.diff_se + self.fitted_c / r.n as f64 * (1.0 + 1e-12))
    }
}

/// Smallest envelope constant `C` with `diff_n <= 2 se_n + C / n` for all rows.
pub fn envelope_constant(rows: &[(usize, f64, f64)]) -> f64 {
    rows.iter().map(|&(n, diff, se)| (diff - 2.0 * se).max(0.0) * n as f64).fold(0.0, f64::max)
}

/// `J(chatter(mu, n))` against `J(mu)` on the evaluator's noise grid.
pub fn cost_stability_study(evaluator: &CostEvaluator, mu: &RelaxedControl, n_list: &[usize]) -> Result<CostStability> {
    let relaxed = evaluator.robust(mu)?;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let u = chatter_onto(mu, n, *evaluator.grid())?;
        let r = evaluator.robust_strict(&u)?;
        rows.push(CostStabilityRow {
            n,
            value: r.value,
            se: r.se,
            argmax_scenario: r.argmax_scenario,
            diff: (r.value - relaxed.value).abs(),
            diff_se: r.se.hypot(relaxed.se),
        });
    }
    let fitted_c = envelope_constant(&rows.iter().map(|r| (r.n, r.diff, r.diff_se)).collect::<Vec<_>>());
    Ok(CostStability { relaxed, rows, fitted_c })
}
