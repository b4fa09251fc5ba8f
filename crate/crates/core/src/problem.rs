use twofloat::TwoFloat;

use crate::error::{Error, Result};

/// A scalar function with an optional double-double implementation. Without
/// one, extended-precision quadrature falls back to the `f64` value.
#[derive(Clone, Copy)]
pub struct ScalarFn {
    pub plain: fn(f64) -> f64,
    pub extended: Option<fn(TwoFloat) -> TwoFloat>,
}

impl ScalarFn {
    pub const fn new(plain: fn(f64) -> f64) -> Self {
        ScalarFn { plain, extended: None }
    }

    pub const fn with_extended(plain: fn(f64) -> f64, extended: fn(TwoFloat) -> TwoFloat) -> Self {
        ScalarFn {
            plain,
            extended: Some(extended),
        }
    }

    pub fn at(&self, x: f64) -> f64 {
        (self.plain)(x)
    }

    pub fn at_extended(&self, x: TwoFloat) -> TwoFloat {
        match self.extended {
            Some(f) => f(x),
            None => TwoFloat::from((self.plain)(x.hi())),
        }
    }
}

/// Scalar plant `dx/dt = f(x) + g(x) u` with running cost `q(x) + R u^2`.
#[derive(Clone, Copy)]
pub struct ProblemSpec {
    pub label: &'static str,
    pub f: ScalarFn,
    pub g: ScalarFn,
    pub q: ScalarFn,
    pub r: f64,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("label", &self.label)
            .field("r", &self.r)
            .finish()
    }
}

const HALF_SQUARE: ScalarFn = ScalarFn::with_extended(|x| 0.5 * x * x, |x| x * x * 0.5);
const ONE: ScalarFn = ScalarFn::with_extended(|_| 1.0, |_| TwoFloat::from(1.0));
const IDENTITY: ScalarFn = ScalarFn::with_extended(|x| x, |x| x);
const SINE: ScalarFn = ScalarFn::with_extended(f64::sin, |x| x.sin());

/// `dx/dt = sin(x) + u`, cost `x^2/2 + u^2/2`.
pub const SIN_SYSTEM: ProblemSpec = ProblemSpec {
    label: "sin-system",
    f: SINE,
    g: ONE,
    q: HALF_SQUARE,
    r: 0.5,
};

/// Linearization of [`SIN_SYSTEM`] at the origin; its value function is
/// `(1 + sqrt 2) x^2 / 2`.
pub const LINEAR: ProblemSpec = ProblemSpec {
    label: "linear",
    f: IDENTITY,
    g: ONE,
    q: HALF_SQUARE,
    r: 0.5,
};

pub const REGISTRY: &[ProblemSpec] = &[SIN_SYSTEM, LINEAR];

impl ProblemSpec {
    pub fn by_label(label: &str) -> Result<ProblemSpec> {
        REGISTRY.iter().find(|p| p.label == label).copied().ok_or_else(|| {
            let known: Vec<&str> = REGISTRY.iter().map(|p| p.label).collect();
            Error::usage(format!("unknown problem {label:?}; known: {known:?}"))
        })
    }

    /// Checks `R > 0` and `q >= 0` on the given sample points.
    pub fn validate(&self, samples: &[f64]) -> Result<()> {
        if !(self.r > 0.0) {
            return Err(Error::usage(format!("{}: R must be positive", self.label)));
        }
        if let Some(x) = samples.iter().find(|&&x| self.q.at(x) < 0.0) {
            return Err(Error::usage(format!("{}: q({x}) is negative", self.label)));
        }
        Ok(())
    }

    /// Gain `p` of the known value function `p x^2 / 2`, if there is one.
    pub fn riccati_gain(&self) -> Option<f64> {
        (self.label == "linear").then(|| 1.0 + 2f64.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lookup() {
        let p = ProblemSpec::by_label("sin-system").unwrap();
        assert_eq!(p.f.at(0.5), 0.5f64.sin());
        assert_eq!(p.q.at(1.0), 0.5);
        assert!(ProblemSpec::by_label("nope").is_err());
    }

    #[test]
    fn extended_agrees_with_plain() {
        for spec in REGISTRY {
            for &x in &[-2.5, -0.1, 0.0, 0.7, 3.3] {
                for func in [spec.f, spec.g, spec.q] {
                    let e = func.at_extended(TwoFloat::from(x));
                    assert!((e.hi() - func.at(x)).abs() <= 1e-15 * func.at(x).abs().max(1.0));
                }
            }
        }
        let plain_only = ScalarFn::new(|x| 3.0 * x);
        assert_eq!(plain_only.at_extended(TwoFloat::from(2.0)).hi(), 6.0);
    }

    #[test]
    fn validation() {
        let nodes = crate::hermite::gauss_hermite(16).unwrap();
        SIN_SYSTEM.validate(nodes.nodes()).unwrap();
        let bad = ProblemSpec { r: 0.0, ..SIN_SYSTEM };
        assert!(bad.validate(&[0.0]).is_err());
        let neg = ProblemSpec {
            q: ScalarFn::new(|x| -x * x),
            ..SIN_SYSTEM
        };
        assert!(neg.validate(&[1.0]).is_err());
    }
}
