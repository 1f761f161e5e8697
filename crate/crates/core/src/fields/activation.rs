use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Scalar nonlinearity applied coordinatewise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Activation {
    Relu,
    NegRelu,
    LeakyRelu {
        slope: f64,
    },
    /// `t ↦ ln(1 + e^{a t})`.
    Softplus {
        sharpness: f64,
    },
    Sin,
    Cos,
    Monomial {
        power: u32,
    },
    /// `t ↦ exp(−((t − c)/w)²)`.
    Gaussian {
        center: f64,
        width: f64,
    },
    /// `t ↦ t²`; the one-dimensional field whose flows are Möbius maps.
    Quadratic1d,
}

impl Activation {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidField(msg.to_string()));
        match *self {
            Activation::LeakyRelu { slope } if !(slope >= 0.0 && slope.is_finite()) => {
                bad("leaky relu slope must be finite and >= 0")
            }
            Activation::Softplus { sharpness } if !(sharpness > 0.0 && sharpness.is_finite()) => {
                bad("softplus sharpness must be finite and > 0")
            }
            Activation::Monomial { power } if power < 2 => bad("monomial power must be >= 2"),
            Activation::Gaussian { center, width }
                if !(width > 0.0 && width.is_finite() && center.is_finite()) =>
            {
                bad("gaussian width must be finite and > 0")
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Activation::Relu => t.max(0.0),
            Activation::NegRelu => -t.max(0.0),
            Activation::LeakyRelu { slope } => {
                if t > 0.0 {
                    t
                } else {
                    slope * t
                }
            }
            Activation::Softplus { sharpness } => softplus(sharpness * t),
            Activation::Sin => t.sin(),
            Activation::Cos => t.cos(),
            Activation::Monomial { power } => t.powi(power as i32),
            Activation::Gaussian { center, width } => {
                let z = (t - center) / width;
                (-z * z).exp()
            }
            Activation::Quadratic1d => t * t,
        }
    }

    /// Derivative; at the ReLU kink `t = 0` this is the left derivative.
    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            Activation::Relu => {
                if t > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::NegRelu => {
                if t > 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if t > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Softplus { sharpness } => sharpness * logistic(sharpness * t),
            Activation::Sin => t.cos(),
            Activation::Cos => -t.sin(),
            Activation::Monomial { power } => power as f64 * t.powi(power as i32 - 1),
            Activation::Gaussian { center, width } => {
                let z = (t - center) / width;
                -2.0 * z / width * (-z * z).exp()
            }
            Activation::Quadratic1d => 2.0 * t,
        }
    }

    /// Points where the derivative jumps.
    pub fn kinks(&self) -> &'static [f64] {
        match self {
            Activation::Relu | Activation::NegRelu | Activation::LeakyRelu { .. } => &[0.0],
            _ => &[],
        }
    }

    pub fn is_piecewise_linear(&self) -> bool {
        matches!(
            self,
            Activation::Relu | Activation::NegRelu | Activation::LeakyRelu { .. }
        )
    }
}

/// Numerically stable `ln(1 + e^z)`.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL_SMOOTH: [Activation; 7] = [
        Activation::Softplus { sharpness: 3.0 },
        Activation::Sin,
        Activation::Cos,
        Activation::Monomial { power: 3 },
        Activation::Gaussian {
            center: 0.4,
            width: 0.8,
        },
        Activation::Quadratic1d,
        Activation::Monomial { power: 2 },
    ];

    #[test]
    fn derivative_matches_central_difference() {
        for act in ALL_SMOOTH {
            for i in 0..41 {
                let t = -2.0 + 0.1 * i as f64;
                let h = 1e-5;
                let fd = (act.eval(t + h) - act.eval(t - h)) / (2.0 * h);
                let err = (fd - act.derivative(t)).abs();
                assert!(err < 1e-7 * (1.0 + fd.abs()), "{act:?} at {t}: {err}");
            }
        }
    }

    #[test]
    fn piecewise_linear_derivatives_off_kink() {
        assert_eq!(Activation::Relu.derivative(2.0), 1.0);
        assert_eq!(Activation::Relu.derivative(-2.0), 0.0);
        assert_eq!(Activation::Relu.derivative(0.0), 0.0);
        assert_eq!(Activation::NegRelu.eval(3.0), -3.0);
        assert_eq!(Activation::LeakyRelu { slope: 0.1 }.eval(-2.0), -0.2);
    }

    #[test]
    fn softplus_is_stable_in_the_tails() {
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0);
        assert_eq!(softplus(0.0), std::f64::consts::LN_2);
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(Activation::Softplus { sharpness: 0.0 }.validate().is_err());
        assert!(Activation::Monomial { power: 1 }.validate().is_err());
        assert!(Activation::LeakyRelu { slope: -0.5 }.validate().is_err());
        assert!(Activation::Relu.validate().is_ok());
    }
}
