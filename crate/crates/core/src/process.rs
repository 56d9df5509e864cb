//! Coefficient catalog and process specifications.
//!
//! Coefficients are drawn from a closed set of named functional forms so that
//! scenarios stay reproducible and every form carries analytic x-derivatives up
//! to order three (the flow module differentiates the Euler step exactly).
//! Jump maps are of product form `g(t, x, y) = k(t, x) * y`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::measure::LevyMeasureSpec;

/// Deterministic function of time: a constant or `intercept + slope * t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeFn {
    Const(f64),
    Affine(AffineTime),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineTime {
    pub intercept: f64,
    pub slope: f64,
}

impl TimeFn {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            TimeFn::Const(c) => c,
            TimeFn::Affine(AffineTime { intercept, slope }) => intercept + slope * t,
        }
    }

    pub fn is_finite(&self) -> bool {
        match *self {
            TimeFn::Const(c) => c.is_finite(),
            TimeFn::Affine(a) => a.intercept.is_finite() && a.slope.is_finite(),
        }
    }

    /// Smallest value on `[0, horizon]` (attained at an endpoint).
    pub fn min_on(&self, horizon: f64) -> f64 {
        self.at(0.0).min(self.at(horizon))
    }

    pub fn constant(c: f64) -> Self {
        TimeFn::Const(c)
    }
}

impl From<f64> for TimeFn {
    fn from(c: f64) -> Self {
        TimeFn::Const(c)
    }
}

/// Value and first three x-derivatives of a coefficient at `(t, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

/// Named functional forms for `u(t,x)`, `sigma(t,x)` and the jump coefficient `k(t,x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefForm {
    /// `c(t)`
    Constant { value: TimeFn },
    /// `c(t) x`
    Linear { slope: TimeFn },
    /// `a(t) + b(t) x`
    Affine { intercept: TimeFn, slope: TimeFn },
    /// `a(t) + b(t) x + A exp(-(x - c)^2 / (2 w^2))`
    AffineBump {
        intercept: TimeFn,
        slope: TimeFn,
        amplitude: f64,
        center: f64,
        width: f64,
    },
}

impl CoefForm {
    pub fn zero() -> Self {
        CoefForm::Constant {
            value: TimeFn::Const(0.0),
        }
    }

    pub fn constant(c: f64) -> Self {
        CoefForm::Constant {
            value: TimeFn::Const(c),
        }
    }

    pub fn linear(c: f64) -> Self {
        CoefForm::Linear {
            slope: TimeFn::Const(c),
        }
    }

    pub fn affine(a: f64, b: f64) -> Self {
        CoefForm::Affine {
            intercept: TimeFn::Const(a),
            slope: TimeFn::Const(b),
        }
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            CoefForm::Constant { value } => value.at(t),
            CoefForm::Linear { slope } => slope.at(t) * x,
            CoefForm::Affine { intercept, slope } => intercept.at(t) + slope.at(t) * x,
            CoefForm::AffineBump { .. } => self.jet(t, x).value,
        }
    }

    pub fn jet(&self, t: f64, x: f64) -> Jet {
        match self {
            CoefForm::Constant { value } => Jet {
                value: value.at(t),
                ..Jet::default()
            },
            CoefForm::Linear { slope } => {
                let b = slope.at(t);
                Jet {
                    value: b * x,
                    d1: b,
                    ..Jet::default()
                }
            }
            CoefForm::Affine { intercept, slope } => {
                let b = slope.at(t);
                Jet {
                    value: intercept.at(t) + b * x,
                    d1: b,
                    ..Jet::default()
                }
            }
            CoefForm::AffineBump {
                intercept,
                slope,
                amplitude,
                center,
                width,
            } => {
                let b = slope.at(t);
                let z = (x - center) / width;
                let e = amplitude * (-0.5 * z * z).exp();
                Jet {
                    value: intercept.at(t) + b * x + e,
                    d1: b - z / width * e,
                    d2: (z * z - 1.0) / (width * width) * e,
                    d3: (3.0 * z - z * z * z) / (width * width * width) * e,
                }
            }
        }
    }

    /// True when the coefficient does not depend on the state.
    pub fn is_state_independent(&self) -> bool {
        matches!(self, CoefForm::Constant { .. })
    }

    /// True when the coefficient is identically zero.
    pub fn is_zero(&self) -> bool {
        match self {
            CoefForm::Constant { value } => *value == TimeFn::Const(0.0),
            CoefForm::Linear { slope } => *slope == TimeFn::Const(0.0),
            _ => false,
        }
    }

    fn validate(&self, name: &'static str) -> Result<()> {
        let ok = match self {
            CoefForm::Constant { value } => value.is_finite(),
            CoefForm::Linear { slope } => slope.is_finite(),
            CoefForm::Affine { intercept, slope } => intercept.is_finite() && slope.is_finite(),
            CoefForm::AffineBump {
                intercept,
                slope,
                amplitude,
                center,
                width,
            } => {
                if !(*width > 0.0) {
                    return Err(invalid(name, "bump width must be positive"));
                }
                intercept.is_finite()
                    && slope.is_finite()
                    && amplitude.is_finite()
                    && center.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(name, "non-finite coefficient parameter"))
        }
    }
}

/// Coefficients `(u, sigma, k, nu_hat)` and initial value of a jump-diffusion
/// `dX = u dt + sigma dB + \int k(t, X) y (N(dt,dy) - nu_hat(t,dy) dt)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSpec {
    pub x0: f64,
    pub drift: CoefForm,
    pub diffusion: CoefForm,
    pub jump: CoefForm,
    pub levy: LevyMeasureSpec,
}

impl ProcessSpec {
    /// Pure diffusion with no jump component.
    pub fn diffusion(x0: f64, drift: CoefForm, diffusion: CoefForm) -> Self {
        ProcessSpec {
            x0,
            drift,
            diffusion,
            jump: CoefForm::zero(),
            levy: LevyMeasureSpec::FiniteDiscrete { atoms: vec![] },
        }
    }

    /// Geometric jump-diffusion `dX = u X dt + s X dB + eta X (dN - a dt)`.
    pub fn geometric(x0: f64, u: f64, sigma: f64, eta: f64, rate: f64) -> Self {
        ProcessSpec {
            x0,
            drift: CoefForm::linear(u),
            diffusion: CoefForm::linear(sigma),
            jump: CoefForm::linear(eta),
            levy: LevyMeasureSpec::point_mass(rate, 1.0),
        }
    }

    pub fn jump_size(&self, t: f64, x: f64, y: f64) -> f64 {
        self.jump.eval(t, x) * y
    }

    /// Checks parameter sanity on `[0, horizon]`, including a finite-difference spot
    /// check of the analytic x-derivatives on a small state grid.
    pub fn validate(&self, horizon: f64) -> Result<()> {
        if !self.x0.is_finite() {
            return Err(invalid("x0", "initial value must be finite"));
        }
        self.drift.validate("drift")?;
        self.diffusion.validate("diffusion")?;
        self.jump.validate("jump")?;
        self.levy.validate(horizon)?;
        let scale = self.x0.abs().max(1.0);
        for coef in [&self.drift, &self.diffusion, &self.jump] {
            for i in 0..=8 {
                let x = self.x0 + scale * (i as f64 - 4.0) / 2.0;
                let h = 1e-5 * scale;
                let fd = (coef.eval(0.0, x + h) - coef.eval(0.0, x - h)) / (2.0 * h);
                let d1 = coef.jet(0.0, x).d1;
                if !fd.is_finite() || (fd - d1).abs() > 1e-4 * (1.0 + d1.abs()) {
                    return Err(invalid(
                        "coefficient",
                        format!("derivative check failed at x = {x}: analytic {d1}, fd {fd}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_jet_matches_finite_differences() {
        let c = CoefForm::AffineBump {
            intercept: 0.1.into(),
            slope: 0.2.into(),
            amplitude: 0.3,
            center: 1.0,
            width: 0.5,
        };
        let h = 1e-4;
        for &x in &[-0.3, 0.7, 1.0, 1.6] {
            let j = c.jet(0.0, x);
            let jp = c.jet(0.0, x + h);
            let jm = c.jet(0.0, x - h);
            assert!(((jp.value - jm.value) / (2.0 * h) - j.d1).abs() < 1e-7);
            assert!(((jp.d1 - jm.d1) / (2.0 * h) - j.d2).abs() < 1e-7);
            assert!(((jp.d2 - jm.d2) / (2.0 * h) - j.d3).abs() < 1e-6);
        }
    }

    #[test]
    fn time_fn_parses_number_or_affine() {
        let c: TimeFn = serde_json::from_str("0.5").unwrap();
        assert_eq!(c.at(3.0), 0.5);
        let a: TimeFn = serde_json::from_str(r#"{"intercept": 1.0, "slope": 2.0}"#).unwrap();
        assert_eq!(a.at(0.5), 2.0);
        assert!(serde_json::from_str::<TimeFn>(r#"{"intercept": 1.0, "slope": 2.0, "x": 1}"#).is_err());
    }

    #[test]
    fn unknown_coefficient_field_rejected() {
        let bad = r#"{"form": "linear", "slope": 1.0, "offset": 2.0}"#;
        assert!(serde_json::from_str::<CoefForm>(bad).is_err());
        let good = r#"{"form": "affine", "intercept": 1.0, "slope": {"intercept": 0.0, "slope": 1.0}}"#;
        let c: CoefForm = serde_json::from_str(good).unwrap();
        assert_eq!(c.eval(2.0, 3.0), 1.0 + 2.0 * 3.0);
    }
}
