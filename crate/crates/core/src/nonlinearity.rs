//! Globally Lipschitz scalar nonlinearities applied componentwise to the
//! control vector, with a certified sector deviation `|f(s) - s| <= delta |s|`.
//!
//! Each kind carries its deviation bound `delta` by construction; the bound is
//! cross-checked by a log-spaced grid search in [`certify_sector`]. For a
//! feedback of operator norm `|F|` the sector parameter of the loop is
//! `theta_f = delta * |F|`, since `|f(Fx) - Fx| <= delta |Fx| <= delta |F| |x|`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::certificates::SemigroupCertificate;
use crate::{Error, Result};

/// Scalar sector nonlinearity kinds. All satisfy `f(0) = 0`,
/// `|f(s) - s| <= delta |s|`, and a global Lipschitz constant `<= 1 + delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SectorNonlinearity {
    /// f(s) = s.
    Identity,
    /// f(s) = (1 - delta) s + delta s / (1 + |s|): blends toward a soft
    /// saturation while keeping the global sector bound.
    ScaledSaturation { delta: f64 },
    /// f(s) = s - delta s e^(-s^2): attenuates small signals, exact identity
    /// in the tails.
    SmoothDeadzone { delta: f64 },
    /// f(s) = (1 - delta) s + delta tanh(s).
    TanhBlend { delta: f64 },
}

impl SectorNonlinearity {
    pub fn new(kind: &str, delta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&delta) || !delta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sector deviation must lie in [0, 1), got {delta}"
            )));
        }
        match kind {
            "identity" => Ok(Self::Identity),
            "scaled-saturation" => Ok(Self::ScaledSaturation { delta }),
            "smooth-deadzone" | "smooth-deadzone-perturbation" => {
                Ok(Self::SmoothDeadzone { delta })
            }
            "tanh-blend" => Ok(Self::TanhBlend { delta }),
            other => Err(Error::InvalidConfig(format!(
                "unknown nonlinearity kind '{other}'"
            ))),
        }
    }

    /// Certified deviation bound delta.
    pub fn deviation(&self) -> f64 {
        match *self {
            Self::Identity => 0.0,
            Self::ScaledSaturation { delta }
            | Self::SmoothDeadzone { delta }
            | Self::TanhBlend { delta } => delta,
        }
    }

    /// Scalar evaluation.
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Self::Identity => s,
            Self::ScaledSaturation { delta } => (1.0 - delta) * s + delta * s / (1.0 + s.abs()),
            Self::SmoothDeadzone { delta } => s - delta * s * (-s * s).exp(),
            Self::TanhBlend { delta } => (1.0 - delta) * s + delta * s.tanh(),
        }
    }

    /// Componentwise action on a control vector.
    pub fn apply(&self, u: &DVector<f64>) -> DVector<f64> {
        u.map(|s| self.eval(s))
    }

    /// Global Lipschitz constant bound.
    pub fn lipschitz_bound(&self) -> f64 {
        1.0 + self.deviation()
    }
}

/// Result of certifying the sector parameter against a feedback norm.
#[derive(Debug, Clone, Serialize)]
pub struct SectorCertificate {
    /// theta_f = delta * |F|.
    pub sector_bound: f64,
    pub deviation: f64,
    pub feedback_norm: f64,
    /// Empirical max of |f(s) - s| / |s| over the probe grid.
    pub empirical_ratio: f64,
}

/// Certifies `theta_f = delta * |F|`, validating the deviation bound on a
/// log-spaced grid `s in +-[1e-6, 1e6]` (1e5 points). An empirical ratio above
/// `delta` indicates a construction bug and is returned as an error.
pub fn certify_sector(f: &SectorNonlinearity, feedback_norm: f64) -> Result<SectorCertificate> {
    assert!(feedback_norm >= 0.0, "feedback norm must be nonnegative");
    let delta = f.deviation();
    let points = 100_000usize;
    let (lo, hi) = (1e-6f64, 1e6f64);
    let ratio_at = |s: f64| {
        let d = (f.eval(s) - s).abs();
        d / s.abs()
    };
    let mut worst = 0.0f64;
    for i in 0..points {
        let exp = lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (points - 1) as f64;
        let s = exp.exp();
        worst = worst.max(ratio_at(s)).max(ratio_at(-s));
    }
    if worst > delta + 1e-12 {
        return Err(Error::SectorBoundViolated {
            observed: worst,
            delta,
        });
    }
    Ok(SectorCertificate {
        sector_bound: delta * feedback_norm,
        deviation: delta,
        feedback_norm,
        empirical_ratio: worst,
    })
}

/// Small-gain verdict for the sampled-data loop.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SmallGainCheck {
    pub passed: bool,
    /// xi / beta - theta_f; positive iff passed.
    pub margin: f64,
    pub threshold: f64,
}

/// Checks the strict small-gain condition `theta_f < xi / beta` with
/// `beta = M N |B|` taken from the certificate.
pub fn check_small_gain(sector_bound: f64, cert: &SemigroupCertificate) -> SmallGainCheck {
    let threshold = cert.closed_loop_rate / cert.loop_gain;
    SmallGainCheck {
        passed: sector_bound < threshold,
        margin: threshold - sector_bound,
        threshold,
    }
}
