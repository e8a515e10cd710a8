//! Smoothing kernels for the complexity penalty and the compactly supported
//! bump profiles shared with the partition of unity.

use std::f64::consts::PI;

use crate::{Error, Point, Result};

/// Default clamp for [`KernelSpec::InverseDistance`].
pub const DEFAULT_MIN_DISTANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelSpec {
    /// `1 / max(‖x − x′‖, min_distance)`.
    InverseDistance { min_distance: f64 },
    /// `(2πσ²)^(−n/2) exp(−‖x − x′‖² / 2σ²)`.
    Gaussian { sigma: f64 },
    /// Smooth bump equal to 1 within `r1` and 0 beyond `r2`.
    Bump { r1: f64, r2: f64 },
}

impl KernelSpec {
    pub fn inverse_distance() -> Self {
        KernelSpec::InverseDistance {
            min_distance: DEFAULT_MIN_DISTANCE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::InverseDistance { min_distance } => {
                if !(min_distance > 0.0 && min_distance.is_finite()) {
                    return Err(Error::InvalidKernel(format!(
                        "inverse-distance clamp must be positive, got {min_distance}"
                    )));
                }
            }
            KernelSpec::Gaussian { sigma } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidKernel(format!(
                        "gaussian sigma must be positive, got {sigma}"
                    )));
                }
            }
            KernelSpec::Bump { r1, r2 } => {
                if !(r1 > 0.0 && r2 > r1 && r2.is_finite()) {
                    return Err(Error::InvalidKernel(format!(
                        "bump radii must satisfy 0 < r1 < r2, got r1={r1}, r2={r2}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Short name used in configuration and model files.
    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::InverseDistance { .. } => "inverse-distance",
            KernelSpec::Gaussian { .. } => "gaussian",
            KernelSpec::Bump { .. } => "bump",
        }
    }

    /// Kernel weight as a function of the distance between its arguments,
    /// in ambient dimension `n`.
    pub fn eval_distance(&self, distance: f64, n: usize) -> f64 {
        match *self {
            KernelSpec::InverseDistance { min_distance } => 1.0 / distance.max(min_distance),
            KernelSpec::Gaussian { sigma } => {
                let var = sigma * sigma;
                (2.0 * PI * var).powf(-(n as f64) / 2.0)
                    * (-distance * distance / (2.0 * var)).exp()
            }
            KernelSpec::Bump { r1, r2 } => BumpProfile {
                r_inner: r1,
                r_outer: r2,
            }
            .eval_unchecked(distance),
        }
    }
}

/// `κ(x, x2)`; symmetric in its arguments.
pub fn kernel_eval(spec: &KernelSpec, x: &Point, x2: &Point) -> Result<f64> {
    if x.len() != x2.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: x2.len(),
        });
    }
    let dist = x
        .iter()
        .zip(x2.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(spec.eval_distance(dist, x.len()))
}

/// Radial profile that is 1 on `[0, r_inner]`, 0 on `[r_outer, ∞)` and a
/// C^∞ monotone transition in between.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpProfile {
    pub r_inner: f64,
    pub r_outer: f64,
}

fn mollifier(z: f64) -> f64 {
    if z > 0.0 {
        (-1.0 / z).exp()
    } else {
        0.0
    }
}

impl BumpProfile {
    pub fn new(r_inner: f64, r_outer: f64) -> Result<Self> {
        if !(r_inner >= 0.0 && r_outer > r_inner && r_outer.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bump profile needs 0 <= r_inner < r_outer, got {r_inner}, {r_outer}"
            )));
        }
        Ok(Self { r_inner, r_outer })
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::InvalidArgument(format!(
                "bump profile evaluated at negative radius {t}"
            )));
        }
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> f64 {
        if t <= self.r_inner {
            return 1.0;
        }
        if t >= self.r_outer {
            return 0.0;
        }
        let theta = (t - self.r_inner) / (self.r_outer - self.r_inner);
        let rising = mollifier(1.0 - theta);
        rising / (mollifier(theta) + rising)
    }
}

/// Free-function form of [`BumpProfile::eval`].
pub fn bump_eval(profile: &BumpProfile, t: f64) -> Result<f64> {
    profile.eval(t)
}
