//! Euler–Maruyama for the controlled G-SDE
//!
//! `dx = sigma(t, x) dB + int b(t, x, a) mu_t(da) dt + int gamma(t, x, a) mu_t(da) d<B>`.
//!
//! Strict controls go through the same code after [`embed_strict`], so the
//! strict and relaxed solvers agree bit for bit on one-hot controls.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::{GPathSet, PathView, TimeGrid};
use crate::relaxed::{chatter_onto, embed_strict, ActionSet, RelaxedControl, StrictControl};
use crate::stats::{argmax_first, Estimate};

/// `(t, x, a) -> value`.
pub type ControlledFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
/// `(t, x) -> value`.
pub type StateFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Coefficients of the controlled G-SDE with their declared bounds.
///
/// Every evaluation is checked against `declared_bound`; a violation aborts
/// the solve. The Lipschitz constant is recorded for reporting only.
#[derive(Clone)]
pub struct GsdeSpec {
    pub drift: ControlledFn,
    pub diffusion: StateFn,
    pub qv_drift: ControlledFn,
    pub x0: f64,
    pub declared_bound: f64,
    pub declared_lipschitz: f64,
}

impl fmt::Debug for GsdeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GsdeSpec")
            .field("x0", &self.x0)
            .field("declared_bound", &self.declared_bound)
            .field("declared_lipschitz", &self.declared_lipschitz)
            .finish_non_exhaustive()
    }
}

impl GsdeSpec {
    /// All coefficients zero.
    pub fn new(x0: f64, declared_bound: f64) -> Self {
        Self {
            drift: Arc::new(|_, _, _| 0.0),
            diffusion: Arc::new(|_, _| 0.0),
            qv_drift: Arc::new(|_, _, _| 0.0),
            x0,
            declared_bound,
            declared_lipschitz: 0.0,
        }
    }

    pub fn with_drift(mut self, f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.drift = Arc::new(f);
        self
    }

    pub fn with_diffusion(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.diffusion = Arc::new(f);
        self
    }

    pub fn with_qv_drift(mut self, f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.qv_drift = Arc::new(f);
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.declared_lipschitz = l;
        self
    }
}

#[inline]
pub(crate) fn checked(what: &'static str, value: f64, bound: f64, t: f64, x: f64) -> Result<f64> {
    if value.is_finite() && value.abs() <= bound {
        Ok(value)
    } else {
        Err(Error::BoundViolated { what, value, bound, t, x })
    }
}

pub(crate) fn check_control(mu: &RelaxedControl, actions: &ActionSet, paths: &GPathSet) -> Result<()> {
    if mu.grid() != paths.grid() {
        return Err(Error::GridMismatch(format!(
            "control has {} steps, paths have {}",
            mu.grid().n_steps(),
            paths.n_steps()
        )));
    }
    if mu.n_actions() != actions.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} actions", actions.len()),
            actual: mu.n_actions().to_string(),
        });
    }
    Ok(())
}

/// Runs one path, calling `visit(k, x_k)` for `k = 0..=n`.
pub(crate) fn simulate_path(
    spec: &GsdeSpec,
    mu: &RelaxedControl,
    actions: &ActionSet,
    grid: &TimeGrid,
    path: &PathView<'_>,
    mut visit: impl FnMut(usize, f64) -> Result<()>,
) -> Result<()> {
    let dt = grid.dt();
    let bound = spec.declared_bound;
    let mut x = spec.x0;
    visit(0, x)?;
    for (k, row) in mu.rows().enumerate() {
        let t = grid.time(k);
        let sigma = checked("sigma", (spec.diffusion)(t, x), bound, t, x)?;
        let (mut drift, mut qv_drift) = (0.0, 0.0);
        for (a, &w) in row.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let value = actions.value(a);
            drift += w * checked("b", (spec.drift)(t, x, value), bound, t, x)?;
            qv_drift += w * checked("gamma", (spec.qv_drift)(t, x, value), bound, t, x)?;
        }
        let db = path.b[k + 1] - path.b[k];
        let dqv = path.qv[k + 1] - path.qv[k];
        x = x + sigma * db + drift * dt + qv_drift * dqv;
        visit(k + 1, x)?;
    }
    Ok(())
}

/// Controlled state paths for one scenario.
#[derive(Debug, Clone)]
pub struct StatePathSet {
    grid: TimeGrid,
    m_paths: usize,
    x_paths: Vec<f64>,
    scenario: String,
    control: RelaxedControl,
}

impl StatePathSet {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn m_paths(&self) -> usize {
        self.m_paths
    }

    /// `x_0..=x_n` of path `i`.
    pub fn path(&self, i: usize) -> &[f64] {
        let w = self.grid.n_steps() + 1;
        &self.x_paths[i * w..(i + 1) * w]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[f64]> {
        self.x_paths.chunks(self.grid.n_steps() + 1)
    }

    pub fn scenario_label(&self) -> &str {
        &self.scenario
    }

    pub fn control(&self) -> &RelaxedControl {
        &self.control
    }

    /// Terminal values `x_T`, one per path.
    pub fn terminal(&self) -> Vec<f64> {
        self.paths().map(|p| p[p.len() - 1]).collect()
    }
}

/// Euler–Maruyama under a relaxed control, left-endpoint coefficients.
pub fn solve_relaxed(spec: &GsdeSpec, mu: &RelaxedControl, actions: &ActionSet, paths: &GPathSet) -> Result<StatePathSet> {
    check_control(mu, actions, paths)?;
    let grid = *paths.grid();
    let w = grid.n_steps() + 1;
    let mut x_paths = vec![0.0; paths.m_paths() * w];
    for (i, row) in x_paths.chunks_mut(w).enumerate() {
        simulate_path(spec, mu, actions, &grid, &paths.path(i), |k, x| {
            row[k] = x;
            Ok(())
        })?;
    }
    Ok(StatePathSet {
        grid,
        m_paths: paths.m_paths(),
        x_paths,
        scenario: paths.scenario().label(),
        control: mu.clone(),
    })
}

/// The strict G-SDE, solved as the relaxed one under the embedded control.
pub fn solve_strict(spec: &GsdeSpec, u: &StrictControl, actions: &ActionSet, paths: &GPathSet) -> Result<StatePathSet> {
    solve_relaxed(spec, &embed_strict(u, actions)?, actions, paths)
}

/// One row of a [`stability_gap`] table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub n: usize,
    /// Sup over scenarios of the mean of `max_k |x^{u_n}_k - x^mu_k|^2`.
    pub value: f64,
    /// Standard error of the attaining scenario.
    pub se: f64,
    pub argmax_scenario: usize,
    pub per_scenario: Vec<Estimate>,
}

/// Sublinear-expectation estimate of `sup_t |x^{u_n}(t) - x^mu(t)|^2` for the
/// chattering approximations `u_n = chatter(mu, n)`.
///
/// `mu` is lifted onto the paths' grid and each `u_n` is built directly on
/// it, so every `n` in `n_list` times `|U|` must divide the number of steps.
pub fn stability_gap(
    spec: &GsdeSpec,
    mu: &RelaxedControl,
    actions: &ActionSet,
    n_list: &[usize],
    family_paths: &[GPathSet],
) -> Result<Vec<StabilityRow>> {
    let first = family_paths.first().ok_or(Error::EmptyFamily)?;
    let fine = *first.grid();
    let lifted = mu.lift(fine)?;
    let reference = family_paths
        .iter()
        .map(|p| solve_relaxed(spec, &lifted, actions, p))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let u = chatter_onto(mu, n, fine)?;
        let mut per_scenario = Vec::with_capacity(family_paths.len());
        for (paths, base) in family_paths.iter().zip(&reference) {
            let states = solve_strict(spec, &u, actions, paths)?;
            let sups: Vec<f64> = states
                .paths()
                .zip(base.paths())
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).fold(0.0, f64::max))
                .collect();
            per_scenario.push(Estimate::from_samples(&sups).ok_or(Error::NoPaths)?);
        }
        let means: Vec<f64> = per_scenario.iter().map(|e| e.mean).collect();
        let (argmax_scenario, value) = argmax_first(&means).ok_or(Error::EmptyFamily)?;
        rows.push(StabilityRow { n, value, se: per_scenario[argmax_scenario].se, argmax_scenario, per_scenario });
    }
    Ok(rows)
}
