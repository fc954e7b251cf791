//! Monotone explicit finite differences for `du/dt - G(D^2 u) = 0`, `u(0, x) = phi(x)`.
//!
//! The solution gives `u(t, x) = E^G[phi(x + sqrt(t) X)]` for a G-normal `X`,
//! and the sign of `D^2 u` gives the worst-case volatility at every node.
//!
//! The solver pads the requested interval by `6 sigma_max sqrt(T)` on each
//! side (same spacing) and applies the zero-second-derivative extension at
//! the padded ends. The returned surface covers only the requested
//! interval, so boundary artefacts stay several standard deviations away
//! from every reported node.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::paths::TimeGrid;
use crate::scenario::{g_operator, StateGrid, StateMap, VolatilityBand, VolatilityScenario};

/// Width of the hidden padding, in units of `sigma_max sqrt(T)`.
pub const PADDING_STD_DEVS: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeGrid {
    pub x_min: f64,
    pub x_max: f64,
    /// Number of space cells; there are `nx + 1` nodes.
    pub nx: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Number of time steps.
    pub nt: usize,
}

impl PdeGrid {
    pub fn new(x_min: f64, x_max: f64, nx: usize, horizon: f64, nt: usize) -> Result<Self> {
        let grid = Self { x_min, x_max, nx, horizon, nt };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid with the smallest `nt` satisfying the stability limit for `band`.
    pub fn stable(x_min: f64, x_max: f64, nx: usize, horizon: f64, band: &VolatilityBand) -> Result<Self> {
        let mut grid = Self { x_min, x_max, nx, horizon, nt: 1 };
        grid.validate()?;
        let limit = grid.dx() * grid.dx() / band.sigma_max().powi(2);
        grid.nt = (horizon / limit).ceil().max(1.0) as usize;
        while grid.dt() > limit {
            grid.nt += 1;
        }
        Ok(grid)
    }

    fn validate(&self) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_min < self.x_max) {
            return Err(invalid("x range", format!("need x_min < x_max, got [{}, {}]", self.x_min, self.x_max)));
        }
        if self.nx == 0 || self.nt == 0 {
            return Err(invalid("grid", "nx and nt must be positive"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(invalid("T", "horizon must be positive"));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.nt as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    /// Errors unless `dt <= dx^2 / sigma_max^2`.
    pub fn check_stability(&self, band: &VolatilityBand) -> Result<()> {
        let limit = self.dx() * self.dx() / band.sigma_max().powi(2);
        if self.dt() > limit {
            return Err(Error::UnstableGrid { dt: self.dt(), limit });
        }
        Ok(())
    }
}

/// Discrete solution `u[k][i] ~ u(k dt, x_i)` and the maximising volatility.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface {
    grid: PdeGrid,
    band: VolatilityBand,
    values: Vec<f64>,
    feedback: Vec<f64>,
}

impl ValueSurface {
    pub fn grid(&self) -> &PdeGrid {
        &self.grid
    }

    pub fn band(&self) -> &VolatilityBand {
        &self.band
    }

    /// `u[k][i]`, `k` in `0..=nt`, `i` in `0..=nx`.
    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.values[k * (self.grid.nx + 1) + i]
    }

    /// Row `k` of the solution.
    pub fn row(&self, k: usize) -> &[f64] {
        let w = self.grid.nx + 1;
        &self.values[k * w..(k + 1) * w]
    }

    /// Volatility attaining `G(D^2 u[k][i])`, `k` in `0..nt`.
    pub fn feedback(&self, k: usize, i: usize) -> f64 {
        self.feedback[k * (self.grid.nx + 1) + i]
    }

    pub fn feedback_row(&self, k: usize) -> &[f64] {
        let w = self.grid.nx + 1;
        &self.feedback[k * w..(k + 1) * w]
    }

    /// Bilinear interpolation at `(t, x)`.
    pub fn interpolate(&self, t: f64, x: f64) -> Result<f64> {
        let g = &self.grid;
        let eps = 1e-12 * g.horizon.max(g.x_max.abs()).max(g.x_min.abs()).max(1.0);
        if !(t >= -eps && t <= g.horizon + eps && x >= g.x_min - eps && x <= g.x_max + eps) {
            return Err(Error::OutOfRange { t, x });
        }
        let (k, wt) = locate(t / g.dt(), g.nt);
        let (i, wx) = locate((x - g.x_min) / g.dx(), g.nx);
        let lerp = |k: usize| (1.0 - wx) * self.value(k, i) + wx * self.value(k, i + 1);
        Ok((1.0 - wt) * lerp(k) + wt * lerp(k + 1))
    }
}

fn locate(pos: f64, cells: usize) -> (usize, f64) {
    let pos = pos.clamp(0.0, cells as f64);
    let idx = (pos.floor() as usize).min(cells - 1);
    (idx, pos - idx as f64)
}

/// Explicit scheme `u[k+1][i] = u[k][i] + dt G(D^2 u[k][i])` with central differences.
///
/// `phi` must be bounded and Lipschitz on the padded interval; non-finite
/// samples are rejected.
pub fn solve_gheat(phi: impl Fn(f64) -> f64, band: &VolatilityBand, grid: &PdeGrid) -> Result<ValueSurface> {
    grid.validate()?;
    grid.check_stability(band)?;
    let dx = grid.dx();
    let dt = grid.dt();
    let pad = (PADDING_STD_DEVS * band.sigma_max() * grid.horizon.sqrt() / dx).ceil() as usize;
    let width = grid.nx + 1;
    let total = width + 2 * pad;

    let mut u = Vec::with_capacity(total);
    for j in 0..total {
        let x = grid.x_min + (j as f64 - pad as f64) * dx;
        let v = phi(x);
        if !v.is_finite() {
            return Err(Error::BadPayoff { x });
        }
        u.push(v);
    }

    let mut values = Vec::with_capacity((grid.nt + 1) * width);
    let mut feedback = Vec::with_capacity(grid.nt * width);
    values.extend_from_slice(&u[pad..pad + width]);
    let mut d2 = vec![0.0; total];
    let inv_dx2 = 1.0 / (dx * dx);
    for _ in 0..grid.nt {
        // end nodes keep D^2 u = 0 (linear extension)
        for j in 1..total - 1 {
            d2[j] = (u[j - 1] - 2.0 * u[j] + u[j + 1]) * inv_dx2;
        }
        feedback.extend(d2[pad..pad + width].iter().map(|&c| {
            if c >= 0.0 {
                band.sigma_max()
            } else {
                band.sigma_min()
            }
        }));
        for (uj, &c) in u.iter_mut().zip(&d2) {
            *uj += dt * g_operator(c, band);
        }
        values.extend_from_slice(&u[pad..pad + width]);
    }
    Ok(ValueSurface { grid: *grid, band: *band, values, feedback })
}

/// `E^G[phi(x + sqrt(t) X)]` read off the solved surface.
pub fn gnormal_expectation(phi: impl Fn(f64) -> f64, t: f64, x: f64, band: &VolatilityBand, grid: &PdeGrid) -> Result<f64> {
    let g = grid;
    if !(t >= 0.0 && t <= g.horizon && x >= g.x_min && x <= g.x_max) {
        return Err(Error::OutOfRange { t, x });
    }
    solve_gheat(phi, band, grid)?.interpolate(t, x)
}

/// Turns the surface's feedback into a state-feedback scenario on `grid`.
///
/// Forward step `k` covers remaining horizons `(T - t_{k+1}, T - t_k]`; it
/// uses the PDE feedback row whose time step contains the midpoint of that
/// range. The simulated state is mapped into PDE coordinates by `map`
/// (identity by default) and snapped to the nearest node.
pub fn extract_worst_case_scenario(surface: &ValueSurface, grid: TimeGrid, map: Option<StateMap>) -> Result<VolatilityScenario> {
    let pde = surface.grid();
    if (grid.horizon() - pde.horizon).abs() > 1e-12 * pde.horizon {
        return Err(Error::GridMismatch(format!(
            "simulation horizon {} differs from PDE horizon {}",
            grid.horizon(),
            pde.horizon
        )));
    }
    let width = pde.nx + 1;
    let mut table = Vec::with_capacity(grid.n_steps() * width);
    for k in 0..grid.n_steps() {
        let remaining = pde.horizon - grid.time(k) - 0.5 * grid.dt();
        let j = ((remaining / pde.dt()).floor().max(0.0) as usize).min(pde.nt - 1);
        table.extend_from_slice(surface.feedback_row(j));
    }
    let states = StateGrid { x_min: pde.x_min, x_max: pde.x_max, nodes: width };
    VolatilityScenario::feedback(*surface.band(), grid, table, states, map.unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band() -> VolatilityBand {
        VolatilityBand::new(0.5, 1.0).unwrap()
    }

    fn grid(nx: usize) -> PdeGrid {
        PdeGrid::stable(-6.0, 6.0, nx, 1.0, &band()).unwrap()
    }

    #[test]
    fn rejects_unstable_grid() {
        let g = PdeGrid::new(-6.0, 6.0, 400, 1.0, 100).unwrap();
        assert!(matches!(solve_gheat(|x| x, &band(), &g), Err(Error::UnstableGrid { .. })));
    }

    #[test]
    fn rejects_bad_payoff() {
        let r = solve_gheat(|x| if x > 1.0 { f64::NAN } else { 0.0 }, &band(), &grid(50));
        assert!(matches!(r, Err(Error::BadPayoff { .. })));
    }

    #[test]
    fn constant_payoff_is_preserved() {
        let s = solve_gheat(|_| 2.5, &band(), &grid(80)).unwrap();
        for k in 0..=s.grid().nt {
            assert!(s.row(k).iter().all(|v| *v == 2.5));
        }
    }

    #[test]
    fn initial_row_samples_payoff() {
        let g = grid(60);
        let s = solve_gheat(|x| x.sin(), &band(), &g).unwrap();
        for i in 0..=g.nx {
            assert_eq!(s.value(0, i), g.x(i).sin());
        }
    }

    #[test]
    fn quadratic_payoffs_match_closed_forms() {
        let g = grid(400);
        let up = gnormal_expectation(|x| x * x, 1.0, 0.0, &band(), &g).unwrap();
        let down = gnormal_expectation(|x| -x * x, 1.0, 0.0, &band(), &g).unwrap();
        assert!((up - 1.0).abs() < 1e-3, "{up}");
        assert!((down + 0.25).abs() < 1e-3, "{down}");
        let quarter = gnormal_expectation(|x| x * x, 0.25, 0.0, &band(), &g).unwrap();
        assert!((quarter - 0.25).abs() < 1e-3, "{quarter}");
    }

    #[test]
    fn linear_payoff_stays_centred() {
        let v = gnormal_expectation(|x| x, 1.0, 0.0, &band(), &grid(200)).unwrap();
        assert!(v.abs() < 1e-9);
    }

    #[test]
    fn out_of_range_queries_fail() {
        let g = grid(40);
        assert!(gnormal_expectation(|x| x, 1.5, 0.0, &band(), &g).is_err());
        assert!(gnormal_expectation(|x| x, 0.5, 7.0, &band(), &g).is_err());
    }

    #[test]
    fn convex_and_concave_feedback_are_bang_bang_constants() {
        let g = grid(100);
        let convex = solve_gheat(|x| x * x, &band(), &g).unwrap();
        let concave = solve_gheat(|x| -x * x, &band(), &g).unwrap();
        let sim = TimeGrid::new(1.0, 25).unwrap();
        let up = extract_worst_case_scenario(&convex, sim, None).unwrap();
        let down = extract_worst_case_scenario(&concave, sim, None).unwrap();
        for k in 0..25 {
            for x in [-6.0, -2.0, 0.0, 3.3, 6.0, 9.0] {
                assert_eq!(up.volatility(k, x), 1.0);
                assert_eq!(down.volatility(k, x), 0.5);
            }
        }
    }

    #[test]
    fn feedback_entries_are_band_endpoints() {
        let s = solve_gheat(|x| (2.0 * x).cos(), &band(), &grid(100)).unwrap();
        for k in 0..s.grid().nt {
            assert!(s.feedback_row(k).iter().all(|v| *v == 0.5 || *v == 1.0));
        }
    }

    #[test]
    fn horizon_mismatch_is_rejected() {
        let s = solve_gheat(|x| x * x, &band(), &grid(40)).unwrap();
        assert!(extract_worst_case_scenario(&s, TimeGrid::new(2.0, 10).unwrap(), None).is_err());
    }
}
