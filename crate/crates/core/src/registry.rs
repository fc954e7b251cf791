//! Named parametric coefficient families, selectable from configuration.
//!
//! Every family is a function of `(t, x, a)`; state-only uses ignore `a`
//! and payoffs ignore `t` and `a` as well.

use serde::{Deserialize, Serialize};

use crate::cost::CostSpec;
use crate::gsde::GsdeSpec;

/// One monomial `coef * t^t * x^x * a^a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    #[serde(default)]
    pub t: u32,
    #[serde(default)]
    pub x: u32,
    #[serde(default)]
    pub a: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Coefficient {
    Zero,
    Constant { value: f64 },
    /// `scale * a`; the drift of the drift-cancellation benchmark.
    Action { scale: f64 },
    /// `intercept + slope * x`.
    Linear { intercept: f64, slope: f64 },
    /// `intercept + action * a + state * x + time * t`.
    AffineInAction {
        #[serde(default)]
        intercept: f64,
        #[serde(default)]
        action: f64,
        #[serde(default)]
        state: f64,
        #[serde(default)]
        time: f64,
    },
    /// `state * (x - target)^2 + action * (a - center)^2`.
    Quadratic {
        #[serde(default)]
        state: f64,
        #[serde(default)]
        target: f64,
        #[serde(default)]
        action: f64,
        #[serde(default)]
        center: f64,
    },
    /// `amplitude * cos(frequency * x)`.
    Cosine { amplitude: f64, frequency: f64 },
    /// `scale * |x|`.
    Abs { scale: f64 },
    Polynomial { terms: Vec<Monomial> },
}

impl Coefficient {
    pub fn eval(&self, t: f64, x: f64, a: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant { value } => *value,
            Self::Action { scale } => scale * a,
            Self::Linear { intercept, slope } => intercept + slope * x,
            Self::AffineInAction { intercept, action, state, time } => intercept + action * a + state * x + time * t,
            Self::Quadratic { state, target, action, center } => {
                state * (x - target) * (x - target) + action * (a - center) * (a - center)
            }
            Self::Cosine { amplitude, frequency } => amplitude * (frequency * x).cos(),
            Self::Abs { scale } => scale * x.abs(),
            Self::Polynomial { terms } => terms
                .iter()
                .map(|m| m.coef * t.powi(m.t as i32) * x.powi(m.x as i32) * a.powi(m.a as i32))
                .sum(),
        }
    }

    /// `(t, x, a) -> value` closure.
    pub fn controlled(&self) -> impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static {
        let c = self.clone();
        move |t, x, a| c.eval(t, x, a)
    }

    /// `(t, x) -> value` closure with `a = 0`.
    pub fn state(&self) -> impl Fn(f64, f64) -> f64 + Send + Sync + 'static {
        let c = self.clone();
        move |t, x| c.eval(t, x, 0.0)
    }

    /// `x -> value` closure with `t = a = 0`.
    pub fn payoff(&self) -> impl Fn(f64) -> f64 + Send + Sync + 'static {
        let c = self.clone();
        move |x| c.eval(0.0, x, 0.0)
    }

    /// Whether the value depends on the action argument.
    pub fn uses_action(&self) -> bool {
        match self {
            Self::Action { scale } => *scale != 0.0,
            Self::AffineInAction { action, .. } | Self::Quadratic { action, .. } => *action != 0.0,
            Self::Polynomial { terms } => terms.iter().any(|m| m.a > 0 && m.coef != 0.0),
            _ => false,
        }
    }
}

/// Coefficient selections for the controlled dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSelection {
    pub drift: Coefficient,
    pub diffusion: Coefficient,
    #[serde(default = "zero")]
    pub qv_drift: Coefficient,
    pub x0: f64,
    pub bound: f64,
    #[serde(default)]
    pub lipschitz: f64,
}

/// Running and terminal cost selections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSelection {
    pub running: Coefficient,
    #[serde(default = "zero")]
    pub terminal: Coefficient,
    pub bound: f64,
}

fn zero() -> Coefficient {
    Coefficient::Zero
}

impl DynamicsSelection {
    pub fn build(&self) -> GsdeSpec {
        GsdeSpec::new(self.x0, self.bound)
            .with_drift(self.drift.controlled())
            .with_diffusion(self.diffusion.state())
            .with_qv_drift(self.qv_drift.controlled())
            .with_lipschitz(self.lipschitz)
    }
}

impl CostSelection {
    pub fn build(&self) -> CostSpec {
        CostSpec::new(self.bound).with_running(self.running.controlled()).with_terminal(self.terminal.payoff())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_evaluate() {
        assert_eq!(Coefficient::Zero.eval(1.0, 2.0, 3.0), 0.0);
        assert_eq!(Coefficient::Action { scale: 2.0 }.eval(0.0, 5.0, -1.0), -2.0);
        assert_eq!(Coefficient::Linear { intercept: 1.0, slope: 2.0 }.eval(0.0, 3.0, 9.0), 7.0);
        let aff = Coefficient::AffineInAction { intercept: 1.0, action: 2.0, state: 3.0, time: 4.0 };
        assert_eq!(aff.eval(1.0, 1.0, 1.0), 10.0);
        let q = Coefficient::Quadratic { state: 1.0, target: 1.0, action: 0.5, center: 0.0 };
        assert_eq!(q.eval(0.0, 3.0, 2.0), 6.0);
        assert_eq!(Coefficient::Cosine { amplitude: 2.0, frequency: 0.0 }.eval(0.0, 1.0, 0.0), 2.0);
        assert_eq!(Coefficient::Abs { scale: 3.0 }.eval(0.0, -2.0, 0.0), 6.0);
        let p = Coefficient::Polynomial {
            terms: vec![Monomial { coef: 1.0, t: 0, x: 2, a: 0 }, Monomial { coef: -2.0, t: 1, x: 0, a: 1 }],
        };
        assert_eq!(p.eval(2.0, 3.0, 1.0), 5.0);
    }

    #[test]
    fn json_selects_family_by_name() {
        let c: Coefficient = serde_json::from_str(r#"{"family": "action", "scale": 1.0}"#).unwrap();
        assert_eq!(c, Coefficient::Action { scale: 1.0 });
        let c: Coefficient = serde_json::from_str(r#"{"family": "polynomial", "terms": [{"coef": 1.0, "x": 2}]}"#).unwrap();
        assert_eq!(c.eval(0.0, 3.0, 0.0), 9.0);
        assert!(serde_json::from_str::<Coefficient>(r#"{"family": "spline"}"#).is_err());
        assert!(serde_json::from_str::<Coefficient>(r#"{"family": "action", "scale": 1.0, "bogus": 2}"#).is_err());
    }

    #[test]
    fn action_dependence() {
        assert!(Coefficient::Action { scale: 1.0 }.uses_action());
        assert!(!Coefficient::Linear { intercept: 0.0, slope: 1.0 }.uses_action());
        assert!(!Coefficient::Quadratic { state: 1.0, target: 0.0, action: 0.0, center: 0.0 }.uses_action());
    }

    #[test]
    fn selections_build_specs() {
        let d: DynamicsSelection = serde_json::from_str(
            r#"{"drift": {"family": "action", "scale": 1.0}, "diffusion": {"family": "constant", "value": 0.1}, "x0": 0.5, "bound": 2.0}"#,
        )
        .unwrap();
        let spec = d.build();
        assert_eq!((spec.drift)(0.0, 0.0, -1.0), -1.0);
        assert_eq!((spec.diffusion)(0.0, 7.0), 0.1);
        assert_eq!((spec.qv_drift)(0.0, 7.0, 1.0), 0.0);
        assert_eq!(spec.x0, 0.5);
        let c: CostSelection = serde_json::from_str(
            r#"{"running": {"family": "quadratic", "state": 1.0}, "terminal": {"family": "constant", "value": 2.0}, "bound": 10.0}"#,
        )
        .unwrap();
        let cost = c.build();
        assert_eq!((cost.running)(0.0, 2.0, 1.0), 4.0);
        assert_eq!((cost.terminal)(5.0), 2.0);
    }
}
