//! Closed-form error bounds, evaluated exactly as printed.
//!
//! | kind        | bound                                                   |
//! |-------------|---------------------------------------------------------|
//! | `OStatic`   | `sqrt(c_I/(beta T)) + sqrt(beta mu_g mu_l^2 / 2)`       |
//! | `ODynamic`  | `OStatic + 3 sqrt(eta mu_l^4 / 2)`                      |
//! | `G`         | `8 G sqrt(T/D) + sqrt(V/D)`                             |
//! | `CDynamic`  | `4/(eta T) + 6 sqrt(3 mu_g mu_l^2 beta/eta) + 3 eta mu_l^4` |

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{MopsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    OStatic,
    ODynamic,
    G,
    CDynamic,
}

impl FromStr for BoundKind {
    type Err = MopsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "o_static" | "O-static" => Ok(BoundKind::OStatic),
            "o_dynamic" | "O-dynamic" => Ok(BoundKind::ODynamic),
            "g" | "G" => Ok(BoundKind::G),
            "c_dynamic" | "C-dynamic" => Ok(BoundKind::CDynamic),
            other => Err(MopsError::invalid(format!("unknown bound kind {other:?}"))),
        }
    }
}

/// Problem constants entering the bounds. Zero is accepted and switches the
/// corresponding term off.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c_i: f64,
    pub mu_g: f64,
    pub mu_l: f64,
    pub g: f64,
    pub v: f64,
}

impl BoundConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("c_I", self.c_i),
            ("mu_g", self.mu_g),
            ("mu_l", self.mu_l),
            ("G", self.g),
            ("V", self.v),
        ] {
            if !x.is_finite() || x < 0.0 {
                return Err(MopsError::invalid(format!("constant {name} must be finite and >= 0, got {x}")));
            }
        }
        Ok(())
    }
}

/// Training horizon and step sizes a bound is evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub t: f64,
    pub beta: f64,
    pub eta: f64,
    /// Total number of training samples.
    pub d: f64,
}

pub fn bound_curve(kind: BoundKind, c: &BoundConstants, p: &BoundPoint) -> Result<f64> {
    c.validate()?;
    let positive = |name: &str, x: f64| {
        if x.is_finite() && x > 0.0 {
            Ok(())
        } else {
            Err(MopsError::invalid(format!("{name} must be finite and > 0, got {x}")))
        }
    };
    let nonneg = |name: &str, x: f64| {
        if x.is_finite() && x >= 0.0 {
            Ok(())
        } else {
            Err(MopsError::invalid(format!("{name} must be finite and >= 0, got {x}")))
        }
    };
    positive("T", p.t)?;
    let value = match kind {
        BoundKind::OStatic | BoundKind::ODynamic => {
            positive("beta", p.beta)?;
            let mut v = (c.c_i / (p.beta * p.t)).sqrt() + (p.beta * c.mu_g * c.mu_l.powi(2) / 2.0).sqrt();
            if kind == BoundKind::ODynamic {
                nonneg("eta", p.eta)?;
                v += 3.0 * (p.eta * c.mu_l.powi(4) / 2.0).sqrt();
            }
            v
        }
        BoundKind::G => {
            positive("D", p.d)?;
            8.0 * c.g * (p.t / p.d).sqrt() + (c.v / p.d).sqrt()
        }
        BoundKind::CDynamic => {
            positive("eta", p.eta)?;
            nonneg("beta", p.beta)?;
            4.0 / (p.eta * p.t)
                + 6.0 * (3.0 * c.mu_g * c.mu_l.powi(2) * p.beta / p.eta).sqrt()
                + 3.0 * p.eta * c.mu_l.powi(4)
        }
    };
    Ok(value)
}

/// The extra O-error term paid by dynamic weighting, `3 sqrt(eta mu_l^4 / 2)`.
pub fn dynamic_overhead(mu_l: f64, eta: f64) -> f64 {
    3.0 * (eta * mu_l.powi(4) / 2.0).sqrt()
}
