//! Closed-form moments of the plate-axis projections of a direction whose
//! elevation and azimuth are independent Gaussians.
//!
//! Everything is built from the Gaussian characteristic function:
//! `E[cos X] = cos(mu) exp(-s^2/2)`, `E[cos^2 X] = (1 + exp(-2 s^2) cos 2mu) / 2`
//! and so on, with `mu` and `s` in radians.

use serde::{Deserialize, Serialize};

use crate::geometry::Orientation;

/// Gaussian prior on one path's initial-frame angles, in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathPrior {
    /// Elevation mean.
    pub mu: f64,
    /// Elevation standard deviation.
    pub sigma: f64,
    /// Azimuth mean.
    pub xi: f64,
    /// Azimuth standard deviation.
    pub varsigma: f64,
}

impl PathPrior {
    pub fn new(mu: f64, sigma: f64, xi: f64, varsigma: f64) -> Self {
        Self {
            mu,
            sigma,
            xi,
            varsigma,
        }
    }

    /// Same means with both standard deviations replaced by `std`.
    pub fn with_std(self, std: f64) -> Self {
        Self {
            sigma: std,
            varsigma: std,
            ..self
        }
    }

    pub fn is_valid(&self) -> bool {
        self.sigma >= 0.0 && self.varsigma >= 0.0 && self.mu.is_finite() && self.xi.is_finite()
    }
}

/// First and second trigonometric moments of a Gaussian angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrigMoments {
    pub cos: f64,
    pub sin: f64,
    pub cos2: f64,
    pub sin2: f64,
    pub sincos: f64,
}

pub fn gauss_trig_moments(mean_deg: f64, std_deg: f64) -> TrigMoments {
    trig_moments_rad(mean_deg.to_radians(), std_deg.to_radians())
}

fn trig_moments_rad(mu: f64, s: f64) -> TrigMoments {
    let e1 = (-s * s / 2.0).exp();
    let e2 = (-2.0 * s * s).exp();
    let (sin_mu, cos_mu) = mu.sin_cos();
    let (sin_2mu, cos_2mu) = (2.0 * mu).sin_cos();
    TrigMoments {
        cos: cos_mu * e1,
        sin: sin_mu * e1,
        cos2: 0.5 * (1.0 + e2 * cos_2mu),
        sin2: 0.5 * (1.0 - e2 * cos_2mu),
        sincos: 0.5 * e2 * sin_2mu,
    }
}

/// Means and raw second moments of the X, Z and Y (normal) projections of the
/// plate-frame direction `R^T a0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionMoments {
    pub mean_x: f64,
    pub mean_z: f64,
    pub mean_y: f64,
    pub second_x: f64,
    pub second_z: f64,
    pub second_y: f64,
}

impl ProjectionMoments {
    pub fn var_x(&self) -> f64 {
        self.second_x - self.mean_x * self.mean_x
    }

    pub fn var_z(&self) -> f64 {
        self.second_z - self.mean_z * self.mean_z
    }

    pub fn var_y(&self) -> f64 {
        self.second_y - self.mean_y * self.mean_y
    }
}

pub fn projection_moments(prior: &PathPrior, orient: &Orientation) -> ProjectionMoments {
    let [alpha, beta, gamma] = orient.to_radians();
    projection_moments_rad(prior, alpha, beta, gamma)
}

pub(crate) fn projection_moments_rad(
    prior: &PathPrior,
    alpha: f64,
    beta: f64,
    gamma: f64,
) -> ProjectionMoments {
    let mu = prior.mu.to_radians();
    let sigma = prior.sigma.to_radians();
    let xi = prior.xi.to_radians();
    let varsigma = prior.varsigma.to_radians();

    let th = trig_moments_rad(mu, sigma);
    let ph = trig_moments_rad(xi, varsigma);
    // phi - alpha is Gaussian with mean xi - alpha and the same spread.
    let sh = trig_moments_rad(xi - alpha, varsigma);

    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let (sg, cg) = gamma.sin_cos();

    let q = ca * sb * cg + sa * sg;
    let h = sa * sb * cg - ca * sg;
    let p = ca * sb * sg - sa * cg;
    let g = sa * sb * sg + ca * cg;

    let mean_x = cb * th.sin * sh.cos - sb * th.cos;
    let mean_z = th.sin * (q * ph.cos + h * ph.sin) + (cb * cg) * th.cos;
    let mean_y = th.sin * (p * ph.cos + g * ph.sin) + (cb * sg) * th.cos;

    let second_x = cb * cb * th.sin2 * sh.cos2 + sb * sb * th.cos2
        - (2.0 * beta).sin() * th.sincos * sh.cos;
    let second_z = th.sin2 * (q * q * ph.cos2 + h * h * ph.sin2 + 2.0 * q * h * ph.sincos)
        + (cb * cg).powi(2) * th.cos2
        + 2.0 * (cb * cg) * th.sincos * (h * ph.sin + q * ph.cos);
    let second_y = th.sin2 * (p * p * ph.cos2 + g * g * ph.sin2 + 2.0 * p * g * ph.sincos)
        + (cb * sg).powi(2) * th.cos2
        + 2.0 * (cb * sg) * th.sincos * (p * ph.cos + g * ph.sin);

    ProjectionMoments {
        mean_x,
        mean_z,
        mean_y,
        second_x,
        second_z,
        second_y,
    }
}
