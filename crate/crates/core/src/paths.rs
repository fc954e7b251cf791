//! Shared noise, G-Brownian paths and discrete G-stochastic integrals.
//!
//! A [`NoiseBundle`] holds one matrix of standard-normal draws. Every
//! scenario of a family is simulated from the same bundle (common random
//! numbers), which is what makes the sup-reductions in
//! [`crate::scenario`] satisfy the sublinear-expectation axioms exactly.
//!
//! Generator: path `i` draws its `n_steps` normals from a ChaCha8 stream
//! seeded with `seed` and stream id `i`, so any single path can be
//! regenerated on its own and the bundle is independent of evaluation
//! order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scenario::{ScenarioFamily, VolatilityScenario};
use crate::stats::{argmax_first, Estimate};

/// Uniform partition `0 = t_0 < t_1 < ... < t_n = T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    #[serde(rename = "T")]
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(invalid("T", format!("horizon must be positive, got {horizon}")));
        }
        if n_steps == 0 {
            return Err(invalid("n_steps", "need at least one step"));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Node `t_k = k * dt`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    /// The grid with `factor` times as many steps over the same horizon.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(invalid("factor", "refinement factor must be positive"));
        }
        Self::new(self.horizon, self.n_steps * factor)
    }

    /// Number of `self` steps per step of `coarse`, if `self` refines `coarse` exactly.
    pub fn refinement_of(&self, coarse: &TimeGrid) -> Option<usize> {
        (self.horizon == coarse.horizon && self.n_steps % coarse.n_steps == 0)
            .then(|| self.n_steps / coarse.n_steps)
    }
}

/// Standard-normal driver shared by all scenarios of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBundle {
    seed: u64,
    m_paths: usize,
    grid: TimeGrid,
    increments: Vec<f64>,
}

impl NoiseBundle {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn m_paths(&self) -> usize {
        self.m_paths
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// The `n_steps` draws of path `i`.
    pub fn path(&self, i: usize) -> &[f64] {
        let n = self.grid.n_steps();
        &self.increments[i * n..(i + 1) * n]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }
}

/// Draws `m_paths x n_steps` independent standard normals, path-major.
pub fn generate_noise(seed: u64, m_paths: usize, grid: TimeGrid) -> Result<NoiseBundle> {
    if m_paths == 0 {
        return Err(invalid("m_paths", "need at least one path"));
    }
    let n = grid.n_steps();
    let mut increments = Vec::with_capacity(m_paths * n);
    for i in 0..m_paths {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        increments.extend((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    }
    Ok(NoiseBundle { seed, m_paths, grid, increments })
}

/// Borrowed view of one simulated path.
#[derive(Debug, Clone, Copy)]
pub struct PathView<'a> {
    /// `B_{t_0..=t_n}`.
    pub b: &'a [f64],
    /// `<B>_{t_0..=t_n}`.
    pub qv: &'a [f64],
    /// Volatility used on each step.
    pub sigma: &'a [f64],
}

impl PathView<'_> {
    pub fn terminal(&self) -> f64 {
        *self.b.last().expect("paths have at least one node")
    }
}

/// G-Brownian paths of one scenario, driven by a shared [`NoiseBundle`].
#[derive(Debug, Clone)]
pub struct GPathSet {
    scenario: VolatilityScenario,
    grid: TimeGrid,
    m_paths: usize,
    b_paths: Vec<f64>,
    qv_paths: Vec<f64>,
    sigma_used: Vec<f64>,
}

impl GPathSet {
    pub fn scenario(&self) -> &VolatilityScenario {
        &self.scenario
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn m_paths(&self) -> usize {
        self.m_paths
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps()
    }

    pub fn path(&self, i: usize) -> PathView<'_> {
        let n = self.grid.n_steps();
        PathView {
            b: &self.b_paths[i * (n + 1)..(i + 1) * (n + 1)],
            qv: &self.qv_paths[i * (n + 1)..(i + 1) * (n + 1)],
            sigma: &self.sigma_used[i * n..(i + 1) * n],
        }
    }

    pub fn paths(&self) -> impl Iterator<Item = PathView<'_>> + '_ {
        (0..self.m_paths).map(move |i| self.path(i))
    }

    /// Per-path values of a path functional.
    pub fn map_paths(&self, f: impl Fn(&PathView<'_>) -> f64) -> Vec<f64> {
        self.paths().map(|p| f(&p)).collect()
    }
}

/// Euler accumulation `B_{k+1} = B_k + sigma_k sqrt(dt) Z_k`,
/// `<B>_{k+1} = <B>_k + sigma_k^2 dt`.
///
/// Feedback scenarios read their volatility from `B_k` at the start of each step.
pub fn generate_gbm(noise: &NoiseBundle, scenario: &VolatilityScenario) -> Result<GPathSet> {
    let grid = *noise.grid();
    if scenario.grid() != &grid {
        return Err(Error::GridMismatch(format!(
            "scenario grid {:?} differs from noise grid {:?}",
            scenario.grid(),
            grid
        )));
    }
    let n = grid.n_steps();
    let m = noise.m_paths();
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let band = scenario.band();
    let mut b_paths = Vec::with_capacity(m * (n + 1));
    let mut qv_paths = Vec::with_capacity(m * (n + 1));
    let mut sigma_used = Vec::with_capacity(m * n);
    for i in 0..m {
        let z = noise.path(i);
        let (mut b, mut qv) = (0.0, 0.0);
        b_paths.push(b);
        qv_paths.push(qv);
        for (k, zk) in z.iter().enumerate() {
            let sigma = scenario.volatility(k, b);
            if !band.contains(sigma) {
                return Err(Error::ScenarioOutOfBand {
                    value: sigma,
                    sigma_min: band.sigma_min(),
                    sigma_max: band.sigma_max(),
                });
            }
            b += sigma * sqrt_dt * zk;
            qv += sigma * sigma * dt;
            b_paths.push(b);
            qv_paths.push(qv);
            sigma_used.push(sigma);
        }
    }
    Ok(GPathSet { scenario: scenario.clone(), grid, m_paths: m, b_paths, qv_paths, sigma_used })
}

/// A step process `eta_k`, either shared by all paths or given per path.
///
/// Adaptedness (`eta_k` known at `t_k`) is the caller's responsibility.
#[derive(Debug, Clone, PartialEq)]
pub struct StepProcess {
    rows: usize,
    n_steps: usize,
    values: Vec<f64>,
}

impl StepProcess {
    /// The same deterministic values on every path.
    pub fn deterministic(values: Vec<f64>) -> Self {
        Self { rows: 1, n_steps: values.len(), values }
    }

    /// Path-major `m_paths x n_steps` values.
    pub fn per_path(m_paths: usize, n_steps: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != m_paths * n_steps {
            return Err(Error::ShapeMismatch {
                expected: format!("{m_paths} x {n_steps} = {}", m_paths * n_steps),
                actual: values.len().to_string(),
            });
        }
        Ok(Self { rows: m_paths, n_steps, values })
    }

    /// Builds `eta_k = f(path, k)` on every path of `paths`.
    pub fn adapted(paths: &GPathSet, f: impl Fn(&PathView<'_>, usize) -> f64) -> Self {
        let n = paths.n_steps();
        let values = paths.paths().flat_map(|p| (0..n).map(move |k| (p, k))).map(|(p, k)| f(&p, k)).collect();
        Self { rows: paths.m_paths(), n_steps: n, values }
    }

    fn row(&self, i: usize) -> &[f64] {
        let r = if self.rows == 1 { 0 } else { i };
        &self.values[r * self.n_steps..(r + 1) * self.n_steps]
    }

    fn check_shape(&self, paths: &GPathSet) -> Result<()> {
        if self.n_steps != paths.n_steps() || (self.rows != 1 && self.rows != paths.m_paths()) {
            return Err(Error::ShapeMismatch {
                expected: format!("1 or {} rows x {} steps", paths.m_paths(), paths.n_steps()),
                actual: format!("{} rows x {} steps", self.rows, self.n_steps),
            });
        }
        Ok(())
    }

    fn squared(&self) -> Self {
        Self { rows: self.rows, n_steps: self.n_steps, values: self.values.iter().map(|v| v * v).collect() }
    }
}

fn integrate_against(eta: &StepProcess, paths: &GPathSet, driver: for<'a> fn(&PathView<'a>) -> &'a [f64]) -> Result<Vec<f64>> {
    eta.check_shape(paths)?;
    Ok((0..paths.m_paths())
        .map(|i| {
            let path = paths.path(i);
            let x = driver(&path);
            eta.row(i).iter().zip(x.windows(2)).fold(0.0, |acc, (e, w)| acc + e * (w[1] - w[0]))
        })
        .collect())
}

/// Per-path `sum_k eta_k (B_{k+1} - B_k)`.
pub fn g_integral(eta: &StepProcess, paths: &GPathSet) -> Result<Vec<f64>> {
    integrate_against(eta, paths, |p| p.b)
}

/// Per-path `sum_k eta_k (<B>_{k+1} - <B>_k)`.
pub fn qv_integral(eta: &StepProcess, paths: &GPathSet) -> Result<Vec<f64>> {
    integrate_against(eta, paths, |p| p.qv)
}

/// Running maximum over `k` of `|sum_{j<k} eta_j dB_j|^p`, per path.
fn running_sup_power(eta: &StepProcess, paths: &GPathSet, p: f64) -> Result<Vec<f64>> {
    eta.check_shape(paths)?;
    Ok((0..paths.m_paths())
        .map(|i| {
            let path = paths.path(i);
            let mut acc: f64 = 0.0;
            let mut sup: f64 = 0.0;
            for (e, w) in eta.row(i).iter().zip(path.b.windows(2)) {
                acc += e * (w[1] - w[0]);
                sup = sup.max(acc.abs());
            }
            sup.powf(p)
        })
        .collect())
}

/// Both sides of the isometry `E[(int eta dB)^2] = E[int eta^2 d<B>]`,
/// each estimated as a sup over the family on common noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsometryReport {
    pub lhs: f64,
    pub lhs_se: f64,
    pub lhs_argmax: usize,
    pub rhs: f64,
    pub rhs_se: f64,
    pub rhs_argmax: usize,
    pub rel_err: f64,
}

pub fn check_isometry<F>(eta: F, family: &ScenarioFamily, noise: &NoiseBundle) -> Result<IsometryReport>
where
    F: Fn(&GPathSet) -> Result<StepProcess>,
{
    let mut lhs = Vec::with_capacity(family.len());
    let mut rhs = Vec::with_capacity(family.len());
    for paths in family.generate_paths(noise)? {
        let e = eta(&paths)?;
        let squares: Vec<f64> = g_integral(&e, &paths)?.into_iter().map(|v| v * v).collect();
        lhs.push(Estimate::from_samples(&squares).ok_or(Error::NoPaths)?);
        rhs.push(Estimate::from_samples(&qv_integral(&e.squared(), &paths)?).ok_or(Error::NoPaths)?);
    }
    let (li, l) = sup_of(&lhs)?;
    let (ri, r) = sup_of(&rhs)?;
    Ok(IsometryReport {
        lhs: l,
        lhs_se: lhs[li].se,
        lhs_argmax: li,
        rhs: r,
        rhs_se: rhs[ri].se,
        rhs_argmax: ri,
        rel_err: (l - r).abs() / r.abs().max(f64::MIN_POSITIVE),
    })
}

/// Documented constants for the sup-moment bound, `C_2 = 4` (Doob) and `C_4 = 36`.
pub fn bdg_constant(p: f64) -> Result<f64> {
    if p == 2.0 {
        Ok(4.0)
    } else if p == 4.0 {
        Ok(36.0)
    } else {
        Err(Error::UnsupportedExponent(p))
    }
}

/// `E[sup_k |int_0^{t_k} eta dB|^p]` against `C_p E[(int eta^2 d<B>)^{p/2}]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BdgReport {
    pub p: f64,
    pub constant: f64,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    /// `lhs / rhs`, or 0 when both sides vanish.
    pub ratio: f64,
    /// `lhs <= C_p rhs + 3 SE`, with SE combining both sides.
    pub holds: bool,
}

pub fn check_bdg<F>(eta: F, p: f64, family: &ScenarioFamily, noise: &NoiseBundle) -> Result<BdgReport>
where
    F: Fn(&GPathSet) -> Result<StepProcess>,
{
    let constant = bdg_constant(p)?;
    let mut lhs = Vec::with_capacity(family.len());
    let mut rhs = Vec::with_capacity(family.len());
    for paths in family.generate_paths(noise)? {
        let e = eta(&paths)?;
        lhs.push(Estimate::from_samples(&running_sup_power(&e, &paths, p)?).ok_or(Error::NoPaths)?);
        let brackets: Vec<f64> = qv_integral(&e.squared(), &paths)?.into_iter().map(|v| v.powf(p / 2.0)).collect();
        rhs.push(Estimate::from_samples(&brackets).ok_or(Error::NoPaths)?);
    }
    let (li, l) = sup_of(&lhs)?;
    let (ri, r) = sup_of(&rhs)?;
    let se = lhs[li].se.hypot(constant * rhs[ri].se);
    Ok(BdgReport {
        p,
        constant,
        lhs: l,
        lhs_se: lhs[li].se,
        rhs: r,
        rhs_se: rhs[ri].se,
        ratio: if r > 0.0 { l / r } else { 0.0 },
        holds: l <= constant * r + 3.0 * se,
    })
}

fn sup_of(estimates: &[Estimate]) -> Result<(usize, f64)> {
    let means: Vec<f64> = estimates.iter().map(|e| e.mean).collect();
    argmax_first(&means).ok_or(Error::EmptyFamily)
}
