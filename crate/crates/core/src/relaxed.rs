//! Strict and relaxed open-loop controls on a finite action set.
//!
//! A relaxed control is a row-stochastic matrix: row `k` is the measure
//! `mu_t(da)` used on step `[t_k, t_{k+1})`. Strict controls embed as
//! one-hot rows. [`chatter`] goes the other way, building a strict control
//! whose occupation of each action matches the relaxed weights block by
//! block.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::paths::TimeGrid;
use crate::stats::log_log_slope;

/// Steps per action and block used by [`chatter`] unless stated otherwise.
pub const DEFAULT_REFINEMENT: usize = 8;

/// Rows must sum to one within this tolerance.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Ordered, pairwise distinct scalar actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ActionSet {
    actions: Vec<f64>,
}

impl ActionSet {
    pub fn new(actions: Vec<f64>) -> Result<Self> {
        if actions.is_empty() {
            return Err(invalid("actions", "action set must be non-empty"));
        }
        if actions.iter().any(|a| !a.is_finite()) {
            return Err(invalid("actions", "actions must be finite"));
        }
        for (i, a) in actions.iter().enumerate() {
            if actions[..i].contains(a) {
                return Err(invalid("actions", format!("duplicate action {a}")));
            }
        }
        Ok(Self { actions })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn value(&self, index: usize) -> f64 {
        self.actions[index]
    }

    pub fn values(&self) -> &[f64] {
        &self.actions
    }
}

impl TryFrom<Vec<f64>> for ActionSet {
    type Error = Error;

    fn try_from(actions: Vec<f64>) -> Result<Self> {
        Self::new(actions)
    }
}

impl From<ActionSet> for Vec<f64> {
    fn from(set: ActionSet) -> Self {
        set.actions
    }
}

/// Deterministic relaxed control: `n_steps x n_actions` row-stochastic weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RelaxedControlJson", into = "RelaxedControlJson")]
pub struct RelaxedControl {
    grid: TimeGrid,
    weights: Vec<f64>,
    n_actions: usize,
}

impl RelaxedControl {
    /// Row-major weights, validated against the simplex.
    pub fn new(grid: TimeGrid, n_actions: usize, weights: Vec<f64>) -> Result<Self> {
        if n_actions == 0 {
            return Err(invalid("n_actions", "need at least one action"));
        }
        if weights.len() != grid.n_steps() * n_actions {
            return Err(Error::ShapeMismatch {
                expected: format!("{} x {}", grid.n_steps(), n_actions),
                actual: weights.len().to_string(),
            });
        }
        for (k, row) in weights.chunks(n_actions).enumerate() {
            if row.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return Err(invalid("weights", format!("row {k} has a negative or non-finite weight")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(invalid("weights", format!("row {k} sums to {sum}")));
            }
        }
        Ok(Self { grid, weights, n_actions })
    }

    pub fn from_rows(grid: TimeGrid, rows: &[Vec<f64>]) -> Result<Self> {
        let n_actions = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_actions) {
            return Err(invalid("weights", "rows have different lengths"));
        }
        Self::new(grid, n_actions, rows.concat())
    }

    /// The same measure on every step.
    pub fn constant(grid: TimeGrid, row: &[f64]) -> Result<Self> {
        Self::new(grid, row.len(), row.repeat(grid.n_steps()))
    }

    /// Uniform weights on every step.
    pub fn uniform(grid: TimeGrid, n_actions: usize) -> Result<Self> {
        Self::constant(grid, &vec![1.0 / n_actions as f64; n_actions])
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.weights[k * self.n_actions..(k + 1) * self.n_actions]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.chunks(self.n_actions)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Replaces row `k`; the new row must lie on the simplex.
    pub fn with_row(&self, k: usize, row: &[f64]) -> Result<Self> {
        let mut weights = self.weights.clone();
        weights[k * self.n_actions..(k + 1) * self.n_actions].copy_from_slice(row);
        Self::new(self.grid, self.n_actions, weights)
    }

    /// Same control on a grid that refines this one (each row repeated).
    pub fn lift(&self, fine: TimeGrid) -> Result<Self> {
        let factor = fine.refinement_of(&self.grid).ok_or_else(|| {
            Error::GridMismatch(format!("{} steps do not refine {} steps", fine.n_steps(), self.grid.n_steps()))
        })?;
        let weights = self.rows().flat_map(|r| std::iter::repeat_n(r, factor)).flatten().copied().collect();
        Ok(Self { grid: fine, weights, n_actions: self.n_actions })
    }

    /// Index of the single action when every row is one-hot.
    pub fn as_strict(&self) -> Option<StrictControl> {
        let idx = self
            .rows()
            .map(|r| {
                let pos = r.iter().position(|w| *w == 1.0)?;
                r.iter().enumerate().all(|(a, w)| a == pos || *w == 0.0).then_some(pos)
            })
            .collect::<Option<Vec<_>>>()?;
        Some(StrictControl { grid: self.grid, action_index: idx })
    }

    /// Serializable form with nested rows.
    pub fn to_json_value(&self) -> RelaxedControlJson {
        RelaxedControlJson { grid: self.grid, weights: self.to_rows() }
    }

    /// Occupation weights as CSV: `t,<action values...>`.
    pub fn to_csv(&self, actions: &ActionSet) -> String {
        let mut out = String::from("t");
        for a in actions.values() {
            out.push_str(&format!(",a={a}"));
        }
        out.push('\n');
        for (k, row) in self.rows().enumerate() {
            out.push_str(&format!("{}", self.grid.time(k)));
            for w in row {
                out.push_str(&format!(",{w}"));
            }
            out.push('\n');
        }
        out
    }
}

/// JSON shape of a relaxed control: `{ "grid": {...}, "weights": [[...], ...] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedControlJson {
    pub grid: TimeGrid,
    pub weights: Vec<Vec<f64>>,
}

impl From<RelaxedControl> for RelaxedControlJson {
    fn from(mu: RelaxedControl) -> Self {
        mu.to_json_value()
    }
}

impl TryFrom<RelaxedControlJson> for RelaxedControl {
    type Error = Error;

    fn try_from(json: RelaxedControlJson) -> Result<Self> {
        Self::from_rows(json.grid, &json.weights)
    }
}

/// Piecewise-constant strict control: one action index per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrictControl {
    grid: TimeGrid,
    action_index: Vec<usize>,
}

impl StrictControl {
    pub fn new(grid: TimeGrid, action_index: Vec<usize>) -> Result<Self> {
        if action_index.len() != grid.n_steps() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} action indices", grid.n_steps()),
                actual: action_index.len().to_string(),
            });
        }
        Ok(Self { grid, action_index })
    }

    pub fn constant(grid: TimeGrid, index: usize) -> Self {
        Self { grid, action_index: vec![index; grid.n_steps()] }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn action_index(&self) -> &[usize] {
        &self.action_index
    }

    /// Same control on a refining grid.
    pub fn lift(&self, fine: TimeGrid) -> Result<Self> {
        let factor = fine.refinement_of(&self.grid).ok_or_else(|| {
            Error::GridMismatch(format!("{} steps do not refine {} steps", fine.n_steps(), self.grid.n_steps()))
        })?;
        let action_index = self.action_index.iter().flat_map(|i| std::iter::repeat_n(*i, factor)).collect();
        Ok(Self { grid: fine, action_index })
    }
}

/// One-hot rows: `weights[k][a] = 1` iff `a = u_k`.
pub fn embed_strict(u: &StrictControl, actions: &ActionSet) -> Result<RelaxedControl> {
    let n_actions = actions.len();
    if let Some(bad) = u.action_index.iter().find(|i| **i >= n_actions) {
        return Err(invalid("action_index", format!("index {bad} out of range for {n_actions} actions")));
    }
    let mut weights = vec![0.0; u.grid.n_steps() * n_actions];
    for (k, &a) in u.action_index.iter().enumerate() {
        weights[k * n_actions + a] = 1.0;
    }
    RelaxedControl::new(u.grid, n_actions, weights)
}

/// Time averages of `mu` over `n` equal blocks of `[0, T]`, computed with
/// exact integer overlaps of steps and blocks.
pub fn block_averages(mu: &RelaxedControl, n: usize) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(invalid("n", "number of blocks must be at least 1"));
    }
    let steps = mu.grid.n_steps();
    // step k spans [k n, (k+1) n), block i spans [i steps, (i+1) steps)
    Ok((0..n)
        .map(|i| {
            let (lo, hi) = (i * steps, (i + 1) * steps);
            let mut avg = vec![0.0; mu.n_actions];
            for k in (lo / n)..hi.div_ceil(n).min(steps) {
                let overlap = ((k + 1) * n).min(hi).saturating_sub((k * n).max(lo));
                if overlap == 0 {
                    continue;
                }
                let frac = overlap as f64 / steps as f64;
                for (acc, w) in avg.iter_mut().zip(mu.row(k)) {
                    *acc += frac * w;
                }
            }
            avg
        })
        .collect())
}

/// Largest-remainder apportionment of `slots` among `weights` (sum ~ 1).
/// Ties go to the lower index; zero weights never receive a slot.
fn apportion(weights: &[f64], slots: usize) -> Vec<usize> {
    let quotas: Vec<f64> = weights.iter().map(|w| w * slots as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor().max(0.0) as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).filter(|&a| weights[a] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    if !order.is_empty() {
        for j in 0..slots.saturating_sub(assigned) {
            counts[order[j % order.len()]] += 1;
        }
    }
    counts
}

/// Chattering approximation of `mu` with `n` blocks.
///
/// Each block of length `T/n` is split into one sub-interval per action,
/// in action order, the `a`-th of length `w_i(a) T/n` where `w_i` is the
/// block average of `mu`. The result lives on a grid with
/// `n * |U| * refinement` steps; each block's `|U| * refinement` steps are
/// shared out by largest remainder.
pub fn chatter(mu: &RelaxedControl, n: usize, refinement: usize) -> Result<StrictControl> {
    if n == 0 {
        return Err(invalid("n", "number of blocks must be at least 1"));
    }
    if refinement == 0 {
        return Err(invalid("refinement", "refinement factor must be at least 1"));
    }
    let per_block = mu.n_actions * refinement;
    let grid = TimeGrid::new(mu.grid.horizon(), n * per_block)?;
    let mut action_index = Vec::with_capacity(grid.n_steps());
    for avg in block_averages(mu, n)? {
        for (a, count) in apportion(&avg, per_block).into_iter().enumerate() {
            action_index.extend(std::iter::repeat_n(a, count));
        }
    }
    StrictControl::new(grid, action_index)
}

/// [`chatter`] with the refinement chosen so the result lives on `fine`.
pub fn chatter_onto(mu: &RelaxedControl, n: usize, fine: TimeGrid) -> Result<StrictControl> {
    let unit = n.checked_mul(mu.n_actions).filter(|u| *u > 0).ok_or_else(|| invalid("n", "must be at least 1"))?;
    if fine.n_steps() % unit != 0 || fine.horizon() != mu.grid.horizon() {
        return Err(Error::GridMismatch(format!(
            "{} steps are not a multiple of n * |U| = {unit}",
            fine.n_steps()
        )));
    }
    chatter(mu, n, fine.n_steps() / unit)
}

/// `sum_k sum_a w_k(a) phi(t_k, a) dt`, skipping zero weights.
pub fn stable_pairing(q: &RelaxedControl, actions: &ActionSet, phi: impl Fn(f64, f64) -> f64) -> Result<f64> {
    if q.n_actions != actions.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} actions", actions.len()),
            actual: q.n_actions.to_string(),
        });
    }
    let dt = q.grid.dt();
    Ok(q.rows().enumerate().fold(0.0, |acc, (k, row)| {
        let t = q.grid.time(k);
        let inner = row
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .fold(0.0, |s, (a, w)| s + w * phi(t, actions.value(a)));
        acc + inner * dt
    }))
}

/// Pairing errors at or below this level count as exact.
pub const PAIRING_EXACT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatteringRow {
    pub test_function: String,
    pub n: usize,
    pub pairing: f64,
    pub reference: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatteringStudy {
    pub refined_steps: usize,
    pub rows: Vec<ChatteringRow>,
    /// Fitted log-log slope of error against `n`, per test function, over
    /// errors above [`PAIRING_EXACT_FLOOR`]; `None` when fewer than two remain.
    pub slopes: Vec<(String, Option<f64>)>,
}

impl ChatteringStudy {
    /// Errors for one test function, in `n_list` order.
    pub fn errors(&self, name: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.test_function == name).map(|r| r.error).collect()
    }
}

/// A named test function `phi(t, a)`.
pub type TestFunction<'a> = (&'a str, &'a dyn Fn(f64, f64) -> f64);

/// Pairing error of `chatter(mu, n)` against `mu` for each `n` and test function.
///
/// All controls are compared on one grid of `n_max * |U| * refinement`
/// steps (finer blocks get a proportionally larger refinement), with `mu`
/// lifted onto it, so the errors measure the chattering alone.
pub fn chattering_convergence_study(
    mu: &RelaxedControl,
    actions: &ActionSet,
    test_functions: &[TestFunction<'_>],
    n_list: &[usize],
    refinement: usize,
) -> Result<ChatteringStudy> {
    let n_max = *n_list.iter().max().ok_or_else(|| invalid("n_list", "empty"))?;
    if n_list.iter().any(|n| *n == 0 || n_max % n != 0) {
        return Err(invalid("n_list", "every n must be positive and divide the largest n"));
    }
    let mut steps = n_max * actions.len() * refinement;
    while steps % mu.grid.n_steps() != 0 {
        steps += n_max * actions.len() * refinement;
    }
    let fine = TimeGrid::new(mu.grid.horizon(), steps)?;
    let lifted = mu.lift(fine)?;
    let chattered = n_list
        .iter()
        .map(|&n| embed_strict(&chatter_onto(mu, n, fine)?, actions))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for (name, phi) in test_functions {
        let reference = stable_pairing(&lifted, actions, phi)?;
        let mut errs = Vec::with_capacity(n_list.len());
        for (&n, q) in n_list.iter().zip(&chattered) {
            let pairing = stable_pairing(q, actions, phi)?;
            let error = (pairing - reference).abs();
            errs.push(error);
            rows.push(ChatteringRow { test_function: name.to_string(), n, pairing, reference, error });
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = n_list
            .iter()
            .zip(&errs)
            .filter(|(_, e)| **e > PAIRING_EXACT_FLOOR)
            .map(|(n, e)| (*n as f64, *e))
            .unzip();
        slopes.push((name.to_string(), log_log_slope(&xs, &ys)));
    }
    Ok(ChatteringStudy { refined_steps: steps, rows, slopes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm() -> ActionSet {
        ActionSet::new(vec![-1.0, 1.0]).unwrap()
    }

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(1.0, n).unwrap()
    }

    #[test]
    fn action_set_validation() {
        assert!(ActionSet::new(vec![]).is_err());
        assert!(ActionSet::new(vec![1.0, 1.0]).is_err());
        assert!(ActionSet::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn relaxed_rows_must_be_stochastic() {
        assert!(RelaxedControl::new(grid(2), 2, vec![0.5, 0.5, 0.7, 0.2]).is_err());
        assert!(RelaxedControl::new(grid(2), 2, vec![1.5, -0.5, 0.5, 0.5]).is_err());
        assert!(RelaxedControl::new(grid(2), 2, vec![0.5, 0.5, 1.0]).is_err());
        assert!(RelaxedControl::new(grid(2), 2, vec![0.5, 0.5, 0.0, 1.0]).is_ok());
    }

    #[test]
    fn embed_constant_and_alternating() {
        let u = StrictControl::constant(grid(4), 0);
        let mu = embed_strict(&u, &pm()).unwrap();
        assert!(mu.rows().all(|r| r == [1.0, 0.0]));
        let alt = StrictControl::new(grid(4), vec![0, 1, 0, 1]).unwrap();
        let mu = embed_strict(&alt, &pm()).unwrap();
        assert_eq!(mu.to_rows(), vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(mu.as_strict().unwrap(), alt);
        assert!(embed_strict(&StrictControl::constant(grid(3), 2), &pm()).is_err());
    }

    #[test]
    fn chatter_of_dirac_is_constant() {
        let mu = embed_strict(&StrictControl::constant(grid(5), 1), &pm()).unwrap();
        for n in [1, 2, 3, 7] {
            let u = chatter(&mu, n, DEFAULT_REFINEMENT).unwrap();
            assert!(u.action_index().iter().all(|a| *a == 1));
        }
    }

    #[test]
    fn chatter_half_half_one_block() {
        let mu = RelaxedControl::constant(grid(4), &[0.5, 0.5]).unwrap();
        let u = chatter(&mu, 1, DEFAULT_REFINEMENT).unwrap();
        assert_eq!(u.grid().n_steps(), 16);
        let expected: Vec<usize> = [vec![0; 8], vec![1; 8]].concat();
        assert_eq!(u.action_index(), expected.as_slice());
    }

    #[test]
    fn chatter_half_half_two_blocks() {
        let mu = RelaxedControl::constant(grid(4), &[0.5, 0.5]).unwrap();
        let u = chatter(&mu, 2, DEFAULT_REFINEMENT).unwrap();
        let block: Vec<usize> = [vec![0; 8], vec![1; 8]].concat();
        assert_eq!(u.action_index(), [block.clone(), block].concat().as_slice());
        // -1 on [0, 1/4), +1 on [1/4, 1/2), ...
        let dt = u.grid().dt();
        assert_eq!(8.0 * dt, 0.25);
    }

    #[test]
    fn chatter_rejects_zero_blocks() {
        let mu = RelaxedControl::uniform(grid(2), 2).unwrap();
        assert!(chatter(&mu, 0, 8).is_err());
    }

    #[test]
    fn zero_weight_actions_get_no_steps() {
        let acts = ActionSet::new(vec![0.0, 1.0, 2.0]).unwrap();
        let mu = RelaxedControl::constant(grid(3), &[0.25, 0.0, 0.75]).unwrap();
        let u = chatter(&mu, 3, 4).unwrap();
        assert!(!u.action_index().contains(&1));
        let relaxed = embed_strict(&u, &acts).unwrap();
        assert_eq!(relaxed.n_actions(), 3);
    }

    #[test]
    fn block_averages_of_time_varying_control() {
        let mu = RelaxedControl::from_rows(grid(4), &[vec![1.0, 0.0], vec![0.5, 0.5], vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap();
        let avg = block_averages(&mu, 2).unwrap();
        assert_eq!(avg, vec![vec![0.75, 0.25], vec![0.25, 0.75]]);
        // blocks straddling steps: 3 blocks over 4 steps
        let avg3 = block_averages(&mu, 3).unwrap();
        assert!((avg3[0][0] - (1.0 * 0.75 + 0.5 * 0.25)).abs() < 1e-15);
        assert!((avg3[1][0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pairing_examples() {
        let mu = RelaxedControl::constant(grid(10), &[0.5, 0.5]).unwrap();
        assert!((stable_pairing(&mu, &pm(), |_, _| 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(stable_pairing(&mu, &pm(), |_, a| a).unwrap(), 0.0);
        let u = embed_strict(&chatter(&mu, 4, DEFAULT_REFINEMENT).unwrap(), &pm()).unwrap();
        let p = stable_pairing(&u, &pm(), |t, a| t * a).unwrap();
        // Lipschitz constant 1 in t for |a| <= 1
        assert!(p.abs() <= 1.0 / (2.0 * 4.0), "{p}");
    }

    #[test]
    fn pairing_of_embedded_strict_is_direct_riemann_sum() {
        let acts = ActionSet::new(vec![-1.0, 0.5, 2.0]).unwrap();
        let u = StrictControl::new(grid(6), vec![0, 2, 1, 1, 0, 2]).unwrap();
        let phi = |t: f64, a: f64| (3.0 * t).sin() * a + t * t;
        let direct = u
            .action_index()
            .iter()
            .enumerate()
            .fold(0.0, |acc, (k, &i)| acc + phi(u.grid().time(k), acts.value(i)) * u.grid().dt());
        assert_eq!(stable_pairing(&embed_strict(&u, &acts).unwrap(), &acts, phi).unwrap(), direct);
    }

    #[test]
    fn round_trip_through_chatter_keeps_coarse_step_pairings() {
        let u = StrictControl::new(grid(4), vec![0, 1, 1, 0]).unwrap();
        let mu = embed_strict(&u, &pm()).unwrap();
        let back = embed_strict(&chatter(&mu, 4, DEFAULT_REFINEMENT).unwrap(), &pm()).unwrap();
        let step_phi = |t: f64, a: f64| ((4.0 * t).floor() + 1.0) * a;
        let p0 = stable_pairing(&mu, &pm(), step_phi).unwrap();
        let p1 = stable_pairing(&back, &pm(), step_phi).unwrap();
        assert!((p0 - p1).abs() < 1e-14);
    }

    #[test]
    fn lift_repeats_rows() {
        let mu = RelaxedControl::from_rows(grid(2), &[vec![1.0, 0.0], vec![0.25, 0.75]]).unwrap();
        let fine = mu.lift(grid(6)).unwrap();
        assert_eq!(fine.row(2), &[1.0, 0.0]);
        assert_eq!(fine.row(3), &[0.25, 0.75]);
        assert!(mu.lift(grid(5)).is_err());
    }

    #[test]
    fn json_shapes() {
        let mu = RelaxedControl::from_rows(grid(2), &[vec![1.0, 0.0], vec![0.25, 0.75]]).unwrap();
        let text = serde_json::to_string(&mu).unwrap();
        assert_eq!(text, r#"{"grid":{"T":1.0,"n_steps":2},"weights":[[1.0,0.0],[0.25,0.75]]}"#);
        let back: RelaxedControl = serde_json::from_str(&text).unwrap();
        assert_eq!(back, mu);
        assert!(serde_json::from_str::<RelaxedControl>(r#"{"grid":{"T":1.0,"n_steps":1},"weights":[[0.9,0.0]]}"#).is_err());
        let u = StrictControl::new(grid(3), vec![0, 1, 0]).unwrap();
        let text = serde_json::to_string(&u).unwrap();
        assert_eq!(text, r#"{"grid":{"T":1.0,"n_steps":3},"action_index":[0,1,0]}"#);
    }

    #[test]
    fn csv_export() {
        let mu = RelaxedControl::constant(grid(2), &[0.5, 0.5]).unwrap();
        assert_eq!(mu.to_csv(&pm()), "t,a=-1,a=1\n0,0.5,0.5\n0.5,0.5,0.5\n");
    }

    #[test]
    fn convergence_study_for_linear_in_time_test_function() {
        let mu = RelaxedControl::constant(grid(4), &[0.5, 0.5]).unwrap();
        let phi = |t: f64, a: f64| t * a;
        let study = chattering_convergence_study(&mu, &pm(), &[("t*a", &phi)], &[2, 4, 8, 16, 32], 8).unwrap();
        let errs = study.errors("t*a");
        assert!(errs.windows(2).all(|w| w[1] < w[0]));
        assert!(study.slopes[0].1.unwrap() <= -0.9);
        let constant = |_: f64, a: f64| a;
        let study = chattering_convergence_study(&mu, &pm(), &[("a", &constant)], &[2, 4, 8], 8).unwrap();
        assert!(study.errors("a").iter().all(|e| *e <= PAIRING_EXACT_FLOOR));
    }
}
