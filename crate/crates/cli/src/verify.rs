//! The acceptance suite run by `grelax verify`.
//!
//! Each criterion is a function of the seed alone and returns pass/fail with
//! the metrics it was judged on. Criterion `k` draws its noise from
//! `seed + k`. No timings are recorded, so the report is byte-stable.

use std::fmt::Write as _;

use grelax::cost::cost_stability_study;
use grelax::optimizer::{brute_force_strict, duality_check, optimize_relaxed};
use grelax::relaxed::PAIRING_EXACT_FLOOR;
use grelax::{
    check_bdg, check_isometry, extract_worst_case_scenario, gap_report, generate_noise, solve_gheat, stability_gap,
    ActionSet, CostEvaluator, CostSpec, GsdeSpec, PathView, PdeGrid, RelaxedControl, ScenarioFamily, SearchOptions,
    StepProcess, TimeGrid, VolatilityBand, VolatilityScenario,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::commands::chatter_study;
use crate::{to_json, CliError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub summary: String,
    pub metrics: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub criteria: Vec<CriterionResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    /// One line per criterion.
    pub fn table(&self) -> String {
        let mut s = String::new();
        for c in &self.criteria {
            let _ = writeln!(s, "{}", c.line());
        }
        s
    }
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!("[{}] {:>2} {:<28} {}", if self.passed { "PASS" } else { "FAIL" }, self.id, self.name, self.summary)
    }
}

fn result(id: u8, name: &str, passed: bool, summary: String, metrics: Value) -> CriterionResult {
    CriterionResult { id, name: name.to_string(), passed, summary, metrics }
}

fn band() -> VolatilityBand {
    VolatilityBand::new(0.5, 1.0).expect("valid band")
}

fn unit_grid(n: usize) -> TimeGrid {
    TimeGrid::new(1.0, n).expect("valid grid")
}

/// Worst-case feedback scenario for `cos(2x)`, which is neither convex nor
/// concave, so the scenario switches between both volatility levels.
fn cosine_feedback(grid: TimeGrid) -> Result<VolatilityScenario, CliError> {
    let pde = PdeGrid::stable(-5.0, 5.0, 200, grid.horizon(), &band())?;
    let surface = solve_gheat(|x: f64| (2.0 * x).cos(), &band(), &pde)?;
    Ok(extract_worst_case_scenario(&surface, grid, None)?)
}

fn constants_with_feedback(grid: TimeGrid, levels: &[f64]) -> Result<ScenarioFamily, CliError> {
    let mut family = ScenarioFamily::constants(band(), grid, levels)?;
    family.push(cosine_feedback(grid)?)?;
    Ok(family)
}

/// G-heat values at `(1, 0)` for `x^2` and `-x^2` against their closed
/// forms, and Monte-Carlo under the extracted worst-case feedback scenario
/// against the G-heat values.
pub fn oracle_agreement(seed: u64) -> Result<CriterionResult, CliError> {
    let band = band();
    let pde = PdeGrid::stable(-4.0, 4.0, 400, 1.0, &band)?;
    let grid = unit_grid(200);
    let noise = generate_noise(seed.wrapping_add(1), 100_000, grid)?;
    let cases: [(&str, fn(f64) -> f64, f64); 2] = [("x^2", |x| x * x, 1.0), ("-x^2", |x| -x * x, -0.25)];
    let mut passed = true;
    let mut metrics = Vec::new();
    for (name, phi, closed) in cases {
        let surface = solve_gheat(phi, &band, &pde)?;
        let u = surface.interpolate(1.0, 0.0)?;
        let family = ScenarioFamily::new(band, vec![extract_worst_case_scenario(&surface, grid, None)?])?;
        let mc = family.expectation(&noise, |p| phi(p.terminal()))?;
        let pde_ok = (u - closed).abs() <= 1e-3;
        let mc_tol = 3.0 * mc.se + 5e-3;
        let mc_ok = (mc.value - u).abs() <= mc_tol;
        passed &= pde_ok && mc_ok;
        metrics.push(json!({
            "payoff": name, "closed_form": closed, "pde": u, "pde_error": (u - closed).abs(),
            "mc": mc.value, "mc_se": mc.se, "mc_error": (mc.value - u).abs(), "mc_tolerance": mc_tol,
        }));
    }
    let summary = format!(
        "pde {:.5}/{:.5}, mc {:.5}/{:.5}",
        metrics[0]["pde"].as_f64().unwrap_or(f64::NAN),
        metrics[1]["pde"].as_f64().unwrap_or(f64::NAN),
        metrics[0]["mc"].as_f64().unwrap_or(f64::NAN),
        metrics[1]["mc"].as_f64().unwrap_or(f64::NAN),
    );
    Ok(result(1, "G-normal oracle agreement", passed, summary, json!({ "nx": 400, "m_paths": 100_000, "n_steps": 200, "cases": metrics })))
}

/// Random payoff on the lattice `Z / 8` built from the terminal value,
/// quadratic variation and running maximum of the path.
#[derive(Debug, Clone, Copy)]
struct LatticePayoff {
    terminal: i32,
    qv: i32,
    maximum: i32,
    kink: i32,
}

impl LatticePayoff {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        Self {
            terminal: rng.random_range(-8..=8),
            qv: rng.random_range(-8..=8),
            maximum: rng.random_range(-8..=8),
            kink: rng.random_range(-8..=8),
        }
    }

    fn eval(&self, p: &PathView<'_>) -> f64 {
        let bt = p.terminal();
        let max = p.b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw = self.terminal as f64 * bt
            + self.qv as f64 * p.qv[p.qv.len() - 1]
            + self.maximum as f64 * max
            + self.kink as f64 * bt.abs();
        (raw * 8.0).round().clamp(-8192.0, 8192.0) / 8.0
    }
}

/// Sub-additivity, monotonicity, constant preservation and positive
/// homogeneity of the family sup over 1,000 random payoff pairs, compared
/// with `==` and `<=` on the estimates.
pub fn sublinear_axioms(seed: u64) -> Result<CriterionResult, CliError> {
    let grid = unit_grid(8);
    let band = band();
    let family = ScenarioFamily::new(
        band,
        vec![
            VolatilityScenario::constant(band, grid, 0.5)?,
            VolatilityScenario::constant(band, grid, 1.0)?,
            VolatilityScenario::piecewise(band, grid, &[0.5, 1.0, 0.75, 0.6])?,
            VolatilityScenario::piecewise(band, grid, &[1.0, 0.5])?,
            cosine_feedback(grid)?,
        ],
    )?;
    let noise = generate_noise(seed.wrapping_add(2), 1024, grid)?;
    let sets = family.generate_paths(&noise)?;
    let e = |f: &dyn Fn(&PathView<'_>) -> f64| -> Result<f64, CliError> {
        let per: Vec<_> = sets
            .iter()
            .map(|s| grelax::Estimate::from_samples(&s.map_paths(f)).ok_or(grelax::Error::NoPaths))
            .collect::<Result<_, _>>()?;
        Ok(grelax::FamilyEstimate::from_estimates(per)?.value)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    let pairs = 1000;
    let mut violations = [0usize; 4];
    for _ in 0..pairs {
        let (x, y) = (LatticePayoff::random(&mut rng), LatticePayoff::random(&mut rng));
        let c = rng.random_range(-64..=64) as f64 / 8.0;
        let lambda = rng.random_range(1..=16) as f64 / 4.0;
        let (ex, ey) = (e(&|p| x.eval(p))?, e(&|p| y.eval(p))?);
        if e(&|p| x.eval(p) + y.eval(p))? > ex + ey {
            violations[0] += 1;
        }
        if e(&|p| x.eval(p).max(y.eval(p)))? < ex.max(ey) || e(&|p| x.eval(p).min(y.eval(p)))? > ex.min(ey) {
            violations[1] += 1;
        }
        if e(&|_| c)? != c || e(&|p| x.eval(p) + c)? != ex + c {
            violations[2] += 1;
        }
        if e(&|p| lambda * x.eval(p))? != lambda * ex {
            violations[3] += 1;
        }
    }
    let total: usize = violations.iter().sum();
    Ok(result(
        2,
        "sublinear expectation axioms",
        total == 0,
        format!("{pairs} pairs, {total} violations"),
        json!({
            "pairs": pairs, "scenarios": family.len(), "m_paths": 1024,
            "subadditivity_violations": violations[0], "monotonicity_violations": violations[1],
            "constant_violations": violations[2], "homogeneity_violations": violations[3],
        }),
    ))
}

/// `E[(int eta dB)^2]` against `E[int eta^2 d<B>]` for 50 random
/// deterministic step processes, relative error at most `3 / sqrt(m)`.
pub fn isometry(seed: u64) -> Result<CriterionResult, CliError> {
    let m = 100_000;
    let grid = unit_grid(20);
    let family = constants_with_feedback(grid, &[0.5, 0.75, 1.0])?;
    let noise = generate_noise(seed.wrapping_add(3), m, grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(3));
    let tol = 3.0 / (m as f64).sqrt();
    let mut errors = Vec::with_capacity(50);
    for _ in 0..50 {
        let eta: Vec<f64> = (0..grid.n_steps()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let report = check_isometry(|_| Ok(StepProcess::deterministic(eta.clone())), &family, &noise)?;
        errors.push(report.rel_err);
    }
    let worst = errors.iter().copied().fold(0.0, f64::max);
    let failing = errors.iter().filter(|e| **e > tol).count();
    Ok(result(
        3,
        "isometry",
        failing == 0,
        format!("max rel err {worst:.2e} vs {tol:.2e}, {failing}/50 over"),
        json!({ "m_paths": m, "tolerance": tol, "max_rel_err": worst, "failing": failing, "rel_errors": errors }),
    ))
}

/// Sup-moment bound with `p = 2`, `C = 4`, over 20 random step processes,
/// half deterministic and half adapted, on a family with a feedback scenario.
pub fn bdg(seed: u64) -> Result<CriterionResult, CliError> {
    let m = 20_000;
    let grid = unit_grid(50);
    let family = constants_with_feedback(grid, &[0.5, 1.0])?;
    let noise = generate_noise(seed.wrapping_add(4), m, grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(4));
    let mut ratios = Vec::with_capacity(20);
    let mut all_hold = true;
    for j in 0..20 {
        let report = if j % 2 == 0 {
            let eta: Vec<f64> = (0..grid.n_steps()).map(|_| rng.random_range(-2.0..2.0)).collect();
            check_bdg(|_| Ok(StepProcess::deterministic(eta.clone())), 2.0, &family, &noise)?
        } else {
            let (c0, c1) = (rng.random_range(-1.0..1.0), rng.random_range(-2.0..2.0));
            check_bdg(|paths| Ok(StepProcess::adapted(paths, |p, k| c0 + c1 * p.b[k].tanh())), 2.0, &family, &noise)?
        };
        all_hold &= report.holds;
        ratios.push(report.ratio);
    }
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    Ok(result(
        4,
        "sup-moment (BDG) bound, p = 2",
        all_hold,
        format!("max lhs/rhs {worst:.3} vs constant 4"),
        json!({ "m_paths": m, "constant": 4.0, "max_ratio": worst, "ratios": ratios, "scenarios": family.len() }),
    ))
}

/// Pairing errors of the chattering approximations of constant `(1/2, 1/2)`
/// rows, fitted log-log slope at most `-0.9` for every test function.
///
/// A test function whose error stays below the exactness floor for every `n`
/// has nothing to fit and counts as converged; for `sin(2 pi t) a` the block
/// errors cancel over a full period for every `n >= 2`.
pub fn chattering(_seed: u64) -> Result<CriterionResult, CliError> {
    let mu = RelaxedControl::constant(unit_grid(1), &[0.5, 0.5])?;
    let actions = ActionSet::new(vec![-1.0, 1.0])?;
    let study = chatter_study(&mu, &actions, &[2, 4, 8, 16, 32], 8)?;
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, slope) in &study.slopes {
        let max_err = study.errors(name).into_iter().fold(0.0, f64::max);
        match slope {
            Some(s) => {
                passed &= *s <= -0.9;
                parts.push(format!("{name}: {s:.3}"));
            }
            None if max_err <= PAIRING_EXACT_FLOOR => parts.push(format!("{name}: exact ({max_err:.0e})")),
            None => {
                passed = false;
                parts.push(format!("{name}: no fit"));
            }
        }
    }
    Ok(result(5, "chattering convergence", passed, parts.join(", "), serde_json::to_value(&study).expect("serializable")))
}

/// Drift-cancellation dynamics: `b = a`, `sigma = 0.1`, `gamma = 0`, `U = {-1, 1}`, `x0 = 0`.
pub fn drift_cancellation() -> GsdeSpec {
    GsdeSpec::new(0.0, 10.0).with_drift(|_, _, a| a).with_diffusion(|_, _| 0.1).with_lipschitz(0.0)
}

const BENCHMARK_LEVELS: [f64; 3] = [0.5, 0.75, 1.0];

fn benchmark_evaluator(seed: u64, gsde: GsdeSpec, cost: CostSpec, actions: &[f64], steps: usize) -> Result<CostEvaluator, CliError> {
    let grid = unit_grid(steps);
    let family = ScenarioFamily::constants(band(), grid, &BENCHMARK_LEVELS)?;
    let noise = generate_noise(seed, 10_000, grid)?;
    Ok(CostEvaluator::new(gsde, cost, ActionSet::new(actions.to_vec())?, &family, &noise)?)
}

fn half_half() -> RelaxedControl {
    RelaxedControl::constant(unit_grid(1), &[0.5, 0.5]).expect("valid control")
}

/// `E[sup_t |x^{u_n} - x^mu|^2]` on the drift-cancellation benchmark.
pub fn state_stability(seed: u64) -> Result<CriterionResult, CliError> {
    let grid = unit_grid(512);
    let family = ScenarioFamily::constants(band(), grid, &BENCHMARK_LEVELS)?;
    let noise = generate_noise(seed.wrapping_add(6), 10_000, grid)?;
    let sets = family.generate_paths(&noise)?;
    let actions = ActionSet::new(vec![-1.0, 1.0])?;
    let rows = stability_gap(&drift_cancellation(), &half_half(), &actions, &[2, 4, 8, 16], &sets)?;
    let decreasing = rows.windows(2).all(|w| w[1].value <= w[0].value + 2.0 * w[0].se.hypot(w[1].se));
    let last = rows.last().expect("non-empty n list");
    let passed = decreasing && last.value <= 1e-2;
    Ok(result(
        6,
        "state stability",
        passed,
        format!("gap at n = 16: {:.3e}, decreasing: {decreasing}", last.value),
        json!({ "m_paths": 10_000, "n_steps": 512, "rows": rows }),
    ))
}

fn tracking_cost() -> CostSpec {
    CostSpec::new(100.0).with_running(|_, x, _| x * x)
}

/// `|J(u_n) - J(mu)|` on the drift-cancellation benchmark with `f = x^2`.
pub fn cost_stability(seed: u64) -> Result<CriterionResult, CliError> {
    let eval = benchmark_evaluator(seed.wrapping_add(7), drift_cancellation(), tracking_cost(), &[-1.0, 1.0], 512)?;
    let study = cost_stability_study(&eval, &half_half(), &[2, 4, 8, 16, 32])?;
    let last = study.rows.last().expect("non-empty n list");
    let passed = study.envelope_holds() && last.diff <= 5e-3;
    Ok(result(
        7,
        "cost stability",
        passed,
        format!("|J(u_32) - J(mu)| = {:.3e}, fitted C = {:.3e}", last.diff, study.fitted_c),
        serde_json::to_value(&study).expect("serializable"),
    ))
}

/// Strict against relaxed optima on two benchmarks, with weak duality.
pub fn gap_check(seed: u64) -> Result<CriterionResult, CliError> {
    let control = unit_grid(4);
    let opts = SearchOptions::default();

    // (a) the pointwise minimum over actions is attained in U, so relaxing
    // gains nothing: head from 0.5 to 0 at full speed, then hold
    let convex_gsde = GsdeSpec::new(0.5, 10.0).with_drift(|_, _, a| a).with_diffusion(|_, _| 0.3);
    let convex_cost = CostSpec::new(100.0).with_running(|_, x, a| x * x + 0.01 * a * a);
    let convex = benchmark_evaluator(seed.wrapping_add(8), convex_gsde, convex_cost, &[-1.0, 0.0, 1.0], 32)?;
    let strict_a = brute_force_strict(&convex, control)?;
    let relaxed_a = optimize_relaxed(&convex, control, &opts)?;
    let se_a = strict_a.se.hypot(relaxed_a.se);
    let gap_a = strict_a.value - relaxed_a.value;
    let pass_a = gap_a.abs() <= 2.0 * se_a;
    let duality_a = duality_check(&convex, control, &relaxed_a, &opts)?;

    // (b) drift cancellation: relaxed keeps x on the noise alone
    let coarse = benchmark_evaluator(seed.wrapping_add(8), drift_cancellation(), tracking_cost(), &[-1.0, 1.0], 32)?;
    let fine = benchmark_evaluator(seed.wrapping_add(8), drift_cancellation(), tracking_cost(), &[-1.0, 1.0], 512)?;
    let report = gap_report(&coarse, &fine, control, &[2, 4, 8, 16, 32], &opts)?;
    let target = 0.1 * 0.1 * 1.0 / 2.0;
    let relaxed_close = (report.best_relaxed.value - target).abs() <= 0.1 * target;
    let strict_worse = report.gap >= 3.0 * report.combined_se;
    let last = report.chattering_curve.last().expect("non-empty n list");
    let curve_converges = report.curve_decreasing
        && last.diff <= 5e-3
        && last.diff <= 2.0 * last.diff_se + report.fitted_c / last.n as f64 * (1.0 + 1e-12);
    let pass_b = relaxed_close && strict_worse && curve_converges && report.dominance_holds;
    let duality_b = duality_check(&coarse, control, &report.best_relaxed, &opts)?;
    let pass_c = duality_a.holds && duality_b.holds;

    Ok(result(
        8,
        "strict/relaxed infimum gap",
        pass_a && pass_b && pass_c,
        format!(
            "(a) gap {:.1e} <= {:.1e}: {pass_a}; (b) relaxed {:.3e}, strict - relaxed {:.2e} ({:.1} se): {pass_b}; (c) {pass_c}",
            gap_a.abs(),
            2.0 * se_a,
            report.best_relaxed.value,
            report.gap,
            report.gap / report.combined_se,
        ),
        json!({
            "convex": {
                "best_strict": strict_a, "best_relaxed": relaxed_a, "gap": gap_a, "combined_se": se_a, "passed": pass_a,
                "duality": { "sup_inf": duality_a.sup_inf, "inf_sup": duality_a.inf_sup, "holds": duality_a.holds },
            },
            "drift_cancellation": {
                "target": target, "relaxed_within_10_percent": relaxed_close, "strict_worse_by_3_se": strict_worse,
                "curve_converges": curve_converges, "report": report, "passed": pass_b,
                "duality": { "sup_inf": duality_b.sup_inf, "inf_sup": duality_b.inf_sup, "holds": duality_b.holds },
            },
        }),
    ))
}

/// Criteria 1 to 8 in order.
pub fn run_suite(seed: u64) -> Result<Vec<CriterionResult>, CliError> {
    Ok(vec![
        oracle_agreement(seed)?,
        sublinear_axioms(seed)?,
        isometry(seed)?,
        bdg(seed)?,
        chattering(seed)?,
        state_stability(seed)?,
        cost_stability(seed)?,
        gap_check(seed)?,
    ])
}

/// Compares the JSON of two runs byte for byte.
pub fn determinism(first: &[CriterionResult], second: &[CriterionResult]) -> CriterionResult {
    let (a, b) = (to_json(&first), to_json(&second));
    let same = a == b;
    let differing: Vec<u8> = first.iter().zip(second).filter(|(x, y)| to_json(x) != to_json(y)).map(|(x, _)| x.id).collect();
    result(
        9,
        "determinism",
        same,
        format!("{} bytes, identical: {same}", a.len()),
        json!({ "bytes": a.len(), "identical": same, "differing_criteria": differing }),
    )
}

/// Runs criteria 1 to 8 twice and appends the determinism criterion.
pub fn run_with_determinism(seed: u64) -> Result<VerifyReport, CliError> {
    let first = run_suite(seed)?;
    let second = run_suite(seed)?;
    let mut criteria = first.clone();
    criteria.push(determinism(&first, &second));
    Ok(VerifyReport { seed, criteria })
}
