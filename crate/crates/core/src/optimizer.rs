//! Minimisation of the robust cost over strict and relaxed controls.
//!
//! Strict controls are enumerated exhaustively. Relaxed controls are found by
//! a derivative-free two-phase search: a row-wise scan of a simplex grid,
//! then single-row moves at successively halved resolution. All evaluations
//! reuse one [`CostEvaluator`], so the objective is a deterministic function
//! of the control and every comparison below is exact.

use serde::{Deserialize, Serialize};

use crate::cost::{cost_stability_study, CostEvaluator, CostStabilityRow};
use crate::error::{invalid, Error, Result};
use crate::paths::TimeGrid;
use crate::relaxed::{embed_strict, RelaxedControl, StrictControl};

/// Largest number of strict controls [`brute_force_strict`] will enumerate.
pub const STRICT_ENUMERATION_LIMIT: u128 = 1_000_000;

/// Value, standard error and attaining scenario of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Scored {
    value: f64,
    se: f64,
    argmax_scenario: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrictOptimum {
    pub control: StrictControl,
    pub value: f64,
    pub se: f64,
    pub argmax_scenario: usize,
    pub evaluated: usize,
}

/// Exhaustive search over all `|U|^n` strict controls on `grid`.
///
/// Index sequences are visited in lexicographic order and only strictly
/// better values replace the incumbent, so ties go to the first sequence.
pub fn brute_force_strict(evaluator: &CostEvaluator, grid: TimeGrid) -> Result<StrictOptimum> {
    let n_actions = evaluator.actions().len();
    let n = grid.n_steps();
    let count = u32::try_from(n)
        .ok()
        .and_then(|n| (n_actions as u128).checked_pow(n))
        .unwrap_or(u128::MAX);
    if count > STRICT_ENUMERATION_LIMIT {
        return Err(Error::InstanceTooLarge { count, limit: STRICT_ENUMERATION_LIMIT });
    }
    let mut index = vec![0usize; n];
    let mut best: Option<(Vec<usize>, Scored)> = None;
    let mut evaluated = 0;
    loop {
        let u = StrictControl::new(grid, index.clone())?;
        let r = evaluator.robust_strict(&u)?;
        evaluated += 1;
        if best.as_ref().is_none_or(|(_, b)| r.value < b.value) {
            best = Some((index.clone(), Scored { value: r.value, se: r.se, argmax_scenario: r.argmax_scenario }));
        }
        // odometer, last step fastest
        let mut k = n;
        loop {
            if k == 0 {
                let (index, s) = best.expect("at least one control is evaluated");
                return Ok(StrictOptimum {
                    control: StrictControl::new(grid, index)?,
                    value: s.value,
                    se: s.se,
                    argmax_scenario: s.argmax_scenario,
                    evaluated,
                });
            }
            k -= 1;
            index[k] += 1;
            if index[k] < n_actions {
                break;
            }
            index[k] = 0;
        }
    }
}

/// Tuning of the relaxed search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Per-row grid resolution `1/r` of the first phase.
    pub resolution: usize,
    /// Number of halvings of the step in the refinement phase.
    pub levels: usize,
    /// A move must improve on the incumbent by more than `rel_tol * |J(start)|`.
    pub rel_tol: f64,
    pub max_evaluations: usize,
    /// Starting control; defaults to uniform weights on every step. Row-wise
    /// moves stall in coupled valleys far from the barycentre, so a vertex
    /// is a poor default.
    pub start: Option<RelaxedControl>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { resolution: 4, levels: 3, rel_tol: 1e-4, max_evaluations: 20_000, start: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedOptimum {
    pub control: RelaxedControl,
    pub value: f64,
    pub se: f64,
    pub argmax_scenario: usize,
    pub evaluations: usize,
    pub budget_exhausted: bool,
    /// Smallest value seen in the first phase, start included.
    pub best_grid_value: f64,
}

/// All rows `c / r` with nonnegative integers `c` summing to `r`, starting
/// from the first vertex and descending in the first coordinate.
fn simplex_grid(n_actions: usize, r: usize) -> Vec<Vec<f64>> {
    fn fill(prefix: &mut Vec<usize>, left: usize, slots: usize, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in (0..=left).rev() {
            prefix.push(c);
            fill(prefix, left - c, slots - 1, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    fill(&mut Vec::with_capacity(n_actions), r, n_actions, &mut out);
    out.into_iter().map(|c| c.into_iter().map(|c| c as f64 / r as f64).collect()).collect()
}

struct Search<'a, F> {
    objective: F,
    options: &'a SearchOptions,
    evaluations: usize,
    exhausted: bool,
}

impl<F: Fn(&RelaxedControl) -> Result<Scored>> Search<'_, F> {
    fn eval(&mut self, mu: &RelaxedControl) -> Result<Option<Scored>> {
        if self.evaluations >= self.options.max_evaluations {
            self.exhausted = true;
            return Ok(None);
        }
        self.evaluations += 1;
        (self.objective)(mu).map(Some)
    }

    fn run(mut self, grid: TimeGrid, n_actions: usize) -> Result<RelaxedOptimum> {
        let opts = self.options;
        if opts.resolution == 0 {
            return Err(invalid("resolution", "must be at least 1"));
        }
        let mut mu = match &opts.start {
            Some(s) if s.grid() != &grid || s.n_actions() != n_actions => {
                return Err(Error::GridMismatch("start control does not match the search grid".into()))
            }
            Some(s) => s.clone(),
            None => RelaxedControl::uniform(grid, n_actions)?,
        };
        let Some(mut best) = self.eval(&mu)? else {
            return Err(invalid("max_evaluations", "budget allows no evaluation"));
        };
        let tol = opts.rel_tol * best.value.abs();
        let mut best_grid_value = best.value;

        let candidates = simplex_grid(n_actions, opts.resolution);
        'phase1: loop {
            let mut improved = false;
            for k in 0..grid.n_steps() {
                for row in &candidates {
                    if row.as_slice() == mu.row(k) {
                        continue;
                    }
                    let trial = mu.with_row(k, row)?;
                    let Some(s) = self.eval(&trial)? else { break 'phase1 };
                    best_grid_value = best_grid_value.min(s.value);
                    if s.value < best.value {
                        (mu, best, improved) = (trial, s, true);
                    }
                }
            }
            if !improved {
                break;
            }
        }

        let mut delta = 0.5 / opts.resolution as f64;
        'phase2: for _ in 0..opts.levels {
            if self.exhausted {
                break;
            }
            loop {
                let mut improved = false;
                for k in 0..grid.n_steps() {
                    let mut step_best: Option<(RelaxedControl, Scored)> = None;
                    for i in 0..n_actions {
                        for j in 0..n_actions {
                            if i == j || mu.row(k)[j] < delta {
                                continue;
                            }
                            let mut row = mu.row(k).to_vec();
                            row[i] += delta;
                            row[j] -= delta;
                            if row[j] < 1e-15 {
                                row[j] = 0.0;
                            }
                            let trial = mu.with_row(k, &row)?;
                            let Some(s) = self.eval(&trial)? else { break 'phase2 };
                            if step_best.as_ref().is_none_or(|(_, b)| s.value < b.value) {
                                step_best = Some((trial, s));
                            }
                        }
                    }
                    if let Some((trial, s)) = step_best {
                        if s.value < best.value - tol {
                            (mu, best, improved) = (trial, s, true);
                        }
                    }
                }
                if !improved {
                    break;
                }
            }
            delta *= 0.5;
        }

        Ok(RelaxedOptimum {
            control: mu,
            value: best.value,
            se: best.se,
            argmax_scenario: best.argmax_scenario,
            evaluations: self.evaluations,
            budget_exhausted: self.exhausted,
            best_grid_value,
        })
    }
}

/// Minimises the robust cost over relaxed controls on `grid`.
///
/// On budget exhaustion the incumbent is returned with `budget_exhausted` set.
pub fn optimize_relaxed(evaluator: &CostEvaluator, grid: TimeGrid, options: &SearchOptions) -> Result<RelaxedOptimum> {
    let objective = |mu: &RelaxedControl| {
        evaluator.robust(mu).map(|r| Scored { value: r.value, se: r.se, argmax_scenario: r.argmax_scenario })
    };
    Search { objective, options, evaluations: 0, exhausted: false }.run(grid, evaluator.actions().len())
}

/// The same search against the cost under scenario `scenario` alone.
pub fn per_scenario_minimizer(
    evaluator: &CostEvaluator,
    scenario: usize,
    grid: TimeGrid,
    options: &SearchOptions,
) -> Result<RelaxedOptimum> {
    if scenario >= evaluator.n_scenarios() {
        return Err(invalid("scenario", "index outside the family"));
    }
    let objective = |mu: &RelaxedControl| {
        evaluator.scenario_cost(scenario, mu).map(|e| Scored { value: e.mean, se: e.se, argmax_scenario: scenario })
    };
    Search { objective, options, evaluations: 0, exhausted: false }.run(grid, evaluator.actions().len())
}

/// `sup_P inf_mu J^P` against `inf_mu sup_P J^P` on the evaluator's estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityCheck {
    pub per_scenario: Vec<RelaxedOptimum>,
    pub sup_inf: f64,
    pub inf_sup: f64,
    pub holds: bool,
}

/// Runs [`per_scenario_minimizer`] for every scenario, each warm-started
/// from `robust.control`, and compares with the robust optimum.
pub fn duality_check(
    evaluator: &CostEvaluator,
    grid: TimeGrid,
    robust: &RelaxedOptimum,
    options: &SearchOptions,
) -> Result<DualityCheck> {
    let opts = SearchOptions { start: Some(robust.control.clone()), ..options.clone() };
    let per_scenario = (0..evaluator.n_scenarios())
        .map(|p| per_scenario_minimizer(evaluator, p, grid, &opts))
        .collect::<Result<Vec<_>>>()?;
    let sup_inf = per_scenario.iter().map(|o| o.value).fold(f64::NEG_INFINITY, f64::max);
    Ok(DualityCheck { per_scenario, sup_inf, inf_sup: robust.value, holds: sup_inf <= robust.value })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub best_strict: StrictOptimum,
    pub best_relaxed: RelaxedOptimum,
    /// `J(chatter(best_relaxed, n))` on the fine evaluator.
    pub chattering_curve: Vec<CostStabilityRow>,
    /// `J(best_relaxed)` on the fine evaluator, the curve's target.
    pub relaxed_on_fine: f64,
    pub relaxed_on_fine_se: f64,
    pub fitted_c: f64,
    /// `best_strict.value - best_relaxed.value`.
    pub gap: f64,
    pub combined_se: f64,
    /// `gap >= -2 combined_se`.
    pub dominance_holds: bool,
    /// Each curve value after the first is at most its predecessor plus two
    /// standard errors.
    pub curve_decreasing: bool,
    pub tolerance_met: bool,
}

impl GapReport {
    /// The chattering curve as CSV with header `n,value,se,diff,diff_se`.
    pub fn curve_csv(&self) -> String {
        let mut s = String::from("n,value,se,diff,diff_se\n");
        for r in &self.chattering_curve {
            s.push_str(&format!("{},{},{},{},{}\n", r.n, r.value, r.se, r.diff, r.diff_se));
        }
        s
    }
}

/// Strict and relaxed optima on `grid` under `coarse`, plus the chattering
/// sequence of the relaxed optimum evaluated under `fine`.
pub fn gap_report(
    coarse: &CostEvaluator,
    fine: &CostEvaluator,
    grid: TimeGrid,
    n_list: &[usize],
    options: &SearchOptions,
) -> Result<GapReport> {
    let best_strict = brute_force_strict(coarse, grid)?;
    let best_relaxed = optimize_relaxed(coarse, grid, options)?;
    let study = cost_stability_study(fine, &best_relaxed.control, n_list)?;
    let gap = best_strict.value - best_relaxed.value;
    let combined_se = best_strict.se.hypot(best_relaxed.se);
    let dominance_holds = gap >= -2.0 * combined_se;
    let curve_decreasing = study
        .rows
        .windows(2)
        .all(|w| w[1].value <= w[0].value + 2.0 * w[0].se.hypot(w[1].se));
    Ok(GapReport {
        best_strict,
        best_relaxed,
        chattering_curve: study.rows,
        relaxed_on_fine: study.relaxed.value,
        relaxed_on_fine_se: study.relaxed.se,
        fitted_c: study.fitted_c,
        gap,
        combined_se,
        dominance_holds,
        curve_decreasing,
        tolerance_met: dominance_holds && curve_decreasing,
    })
}

/// The relaxed cost of a strict control, through the embedding.
pub fn embedded_value(evaluator: &CostEvaluator, u: &StrictControl) -> Result<f64> {
    Ok(evaluator.robust(&embed_strict(u, evaluator.actions())?)?.value)
}
