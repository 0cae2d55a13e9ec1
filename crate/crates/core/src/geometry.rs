//! Frames, Euler rotations and the angle / direction / spatial-frequency
//! conversions shared by the rest of the crate.
//!
//! The initial frame is the receiver frame before the plate is tilted. The
//! plate frame is obtained by rotating the initial frame by
//! `R = Rz(alpha) * Ry(beta) * Rx(gamma)`; the plate lies in its X-Z plane and
//! its outward normal is +Y. A direction `a0` in the initial frame reads
//! `R^T a0` in the plate frame.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this `sin(theta)` the azimuth is reported as zero.
const POLE_EPS: f64 = 1e-9;
/// Accepted overshoot of `u^2 + v^2` beyond one before the pair is rejected.
pub const SFP_REJECT_TOL: f64 = 1e-6;

/// Wraps an angle in degrees into `(-180, 180]`.
pub fn wrap_deg(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(360.0);
    if a > 180.0 {
        a -= 360.0;
    }
    if a <= -180.0 {
        a += 360.0;
    }
    a
}

/// Elevation / azimuth pair in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnglePair {
    /// Elevation measured from +Z, in `[0, 180]`.
    pub theta: f64,
    /// Azimuth measured from +X towards +Y, in `(-180, 180]`.
    pub phi: f64,
}

impl AnglePair {
    /// Builds a pair, wrapping the azimuth. The elevation is taken as given.
    pub fn new(theta: f64, phi: f64) -> Self {
        Self {
            theta,
            phi: wrap_deg(phi),
        }
    }

    /// Maps arbitrary real angles (e.g. Gaussian draws that leave `[0, 180]`)
    /// onto the canonical pair describing the same direction.
    pub fn canonical(theta: f64, phi: f64) -> Self {
        let t = theta.rem_euclid(360.0);
        if t > 180.0 {
            Self::new(360.0 - t, phi + 180.0)
        } else {
            Self::new(t, phi)
        }
    }
}

/// Unit vector in 3D.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction3(Vector3<f64>);

impl Direction3 {
    /// Normalises `v`; returns `None` for a (near) zero vector.
    pub fn from_vector(v: Vector3<f64>) -> Option<Self> {
        let n = v.norm();
        if n < 1e-300 || !n.is_finite() {
            return None;
        }
        Some(Self(v / n))
    }

    pub fn x(&self) -> f64 {
        self.0.x
    }

    pub fn y(&self) -> f64 {
        self.0.y
    }

    pub fn z(&self) -> f64 {
        self.0.z
    }

    pub fn as_vector(&self) -> &Vector3<f64> {
        &self.0
    }
}

/// Plate orientation as Euler angles in degrees about the initial Z, Y and X
/// axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Orientation {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Orientation {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self {
            alpha: wrap_deg(alpha),
            beta: wrap_deg(beta),
            gamma: wrap_deg(gamma),
        }
    }

    pub fn identity() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn from_radians(angles: [f64; 3]) -> Self {
        Self::new(
            angles[0].to_degrees(),
            angles[1].to_degrees(),
            angles[2].to_degrees(),
        )
    }

    pub fn to_radians(&self) -> [f64; 3] {
        [
            self.alpha.to_radians(),
            self.beta.to_radians(),
            self.gamma.to_radians(),
        ]
    }
}

impl Default for Orientation {
    fn default() -> Self {
        Self::identity()
    }
}

/// Spatial-frequency parameters seen by the X scan (`u`) and Z scan (`v`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SfpPair {
    pub u: f64,
    pub v: f64,
}

pub fn unit_direction(angles: AnglePair) -> Direction3 {
    let (st, ct) = angles.theta.to_radians().sin_cos();
    let (sp, cp) = angles.phi.to_radians().sin_cos();
    Direction3(Vector3::new(st * cp, st * sp, ct))
}

/// Inverse of [`unit_direction`], with `phi = 0` at the poles.
pub fn angles_from_direction(dir: &Direction3) -> AnglePair {
    let z = dir.z().clamp(-1.0, 1.0);
    let theta = z.acos().to_degrees();
    let rho = dir.x().hypot(dir.y());
    let phi = if rho < POLE_EPS {
        0.0
    } else {
        dir.y().atan2(dir.x()).to_degrees()
    };
    AnglePair::new(theta, phi)
}

/// `R = Rz(alpha) Ry(beta) Rx(gamma)`.
pub fn rotation_matrix(orient: &Orientation) -> Matrix3<f64> {
    let [a, b, g] = orient.to_radians();
    rotation_matrix_rad(a, b, g)
}

pub(crate) fn rotation_matrix_rad(alpha: f64, beta: f64, gamma: f64) -> Matrix3<f64> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let (sg, cg) = gamma.sin_cos();
    let rz = Matrix3::new(ca, -sa, 0.0, sa, ca, 0.0, 0.0, 0.0, 1.0);
    let ry = Matrix3::new(cb, 0.0, sb, 0.0, 1.0, 0.0, -sb, 0.0, cb);
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cg, -sg, 0.0, sg, cg);
    rz * ry * rx
}

/// Expresses an initial-frame direction in the plate frame (`R^T dir0`).
pub fn to_plate_frame(orient: &Orientation, dir0: &Direction3) -> Direction3 {
    Direction3(rotation_matrix(orient).transpose() * dir0.0)
}

/// `u = sin(theta) cos(phi)`, `v = cos(theta)` for local (plate-frame) angles.
pub fn sfp_from_local(angles: AnglePair) -> SfpPair {
    sfp_from_direction(&unit_direction(angles))
}

/// Spatial frequencies of a plate-frame direction: its X and Z components.
pub fn sfp_from_direction(dir_local: &Direction3) -> SfpPair {
    SfpPair {
        u: dir_local.x(),
        v: dir_local.z(),
    }
}

/// Rebuilds the plate-frame direction from `(u, v)` assuming arrival from the
/// front of the plate, and returns the corresponding initial-frame angles.
pub fn aoa_from_sfp(sfp: SfpPair, orient: &Orientation) -> Result<AnglePair> {
    let r2 = sfp.u * sfp.u + sfp.v * sfp.v;
    if !r2.is_finite() || r2 > 1.0 + SFP_REJECT_TOL {
        return Err(Error::InfeasibleSfp { u: sfp.u, v: sfp.v });
    }
    let y = (1.0 - r2).max(0.0).sqrt();
    let local = Direction3::from_vector(Vector3::new(sfp.u, y, sfp.v))
        .ok_or(Error::InfeasibleSfp { u: sfp.u, v: sfp.v })?;
    let global = Direction3(rotation_matrix(orient) * local.0);
    Ok(angles_from_direction(&global))
}

/// Smallest absolute difference between two azimuths, wrapped into
/// `(-180, 180]`.
pub fn azimuth_difference(a: f64, b: f64) -> f64 {
    wrap_deg(a - b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn vec_close(d: &Direction3, expected: [f64; 3], tol: f64) {
        assert_abs_diff_eq!(d.x(), expected[0], epsilon = tol);
        assert_abs_diff_eq!(d.y(), expected[1], epsilon = tol);
        assert_abs_diff_eq!(d.z(), expected[2], epsilon = tol);
    }

    #[test]
    fn unit_direction_axes() {
        vec_close(&unit_direction(AnglePair::new(0.0, 0.0)), [0.0, 0.0, 1.0], 1e-15);
        vec_close(&unit_direction(AnglePair::new(90.0, 0.0)), [1.0, 0.0, 0.0], 1e-15);
        vec_close(&unit_direction(AnglePair::new(90.0, 90.0)), [0.0, 1.0, 0.0], 1e-15);
    }

    #[test]
    fn angles_at_pole_and_axis() {
        let pole = Direction3::from_vector(Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(angles_from_direction(&pole), AnglePair::new(0.0, 0.0));
        let south = Direction3::from_vector(Vector3::new(0.0, 0.0, -1.0)).unwrap();
        assert_eq!(angles_from_direction(&south), AnglePair::new(180.0, 0.0));
        let x = Direction3::from_vector(Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let a = angles_from_direction(&x);
        assert_abs_diff_eq!(a.theta, 90.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.phi, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn wrap_rule() {
        assert_eq!(wrap_deg(180.0), 180.0);
        assert_eq!(wrap_deg(-180.0), 180.0);
        assert_abs_diff_eq!(wrap_deg(190.0), -170.0, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_deg(-725.0), -5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(azimuth_difference(179.0, -179.0), -2.0, epsilon = 1e-12);
    }

    #[test]
    fn rotation_identity_and_quarter_turn() {
        let r = rotation_matrix(&Orientation::identity());
        assert_abs_diff_eq!(r, Matrix3::identity(), epsilon = 1e-15);

        // Rz(90) maps +X onto +Y.
        let r = rotation_matrix(&Orientation::new(90.0, 0.0, 0.0));
        let mapped = r * Vector3::new(1.0, 0.0, 0.0);
        assert_abs_diff_eq!(mapped, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn rotation_composes_in_zyx_order() {
        // Oracle: build the elementary rotations from axis-angle and compose.
        let (a, b, g) = (30f64, -50f64, 70f64);
        let rz = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), a.to_radians());
        let ry = nalgebra::Rotation3::from_axis_angle(&Vector3::y_axis(), b.to_radians());
        let rx = nalgebra::Rotation3::from_axis_angle(&Vector3::x_axis(), g.to_radians());
        let expected = (rz * ry * rx).into_inner();
        let r = rotation_matrix(&Orientation::new(a, b, g));
        assert_abs_diff_eq!(r, expected, epsilon = 1e-14);
    }

    #[test]
    fn plate_frame_quarter_turn() {
        let dir0 = Direction3::from_vector(Vector3::new(0.0, 1.0, 0.0)).unwrap();
        let local = to_plate_frame(&Orientation::new(90.0, 0.0, 0.0), &dir0);
        // Explicit product: R^T for Rz(90) is [[0,1,0],[-1,0,0],[0,0,1]].
        vec_close(&local, [1.0, 0.0, 0.0], 1e-15);
        let same = to_plate_frame(&Orientation::identity(), &dir0);
        assert_eq!(same, dir0);
    }

    #[test]
    fn sfp_definition() {
        let s = sfp_from_local(AnglePair::new(90.0, 0.0));
        assert_abs_diff_eq!(s.u, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.v, 0.0, epsilon = 1e-15);
        let s = sfp_from_local(AnglePair::new(0.0, 77.0));
        assert_abs_diff_eq!(s.u, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.v, 1.0, epsilon = 1e-15);
        let s = sfp_from_local(AnglePair::new(60.0, 60.0));
        assert_abs_diff_eq!(s.u, 0.433_012_701_892_219_3, epsilon = 1e-12);
        assert_abs_diff_eq!(s.v, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn aoa_from_sfp_cases() {
        let a = aoa_from_sfp(SfpPair { u: 0.0, v: 1.0 }, &Orientation::identity()).unwrap();
        assert_abs_diff_eq!(a.theta, 0.0, epsilon = 1e-12);
        assert_eq!(a.phi, 0.0);
        match aoa_from_sfp(SfpPair { u: 0.8, v: 0.8 }, &Orientation::identity()) {
            Err(Error::InfeasibleSfp { .. }) => {}
            other => panic!("expected InfeasibleSfp, got {other:?}"),
        }
        // Slight overshoot within tolerance is projected onto the plate.
        let a = aoa_from_sfp(SfpPair { u: 0.6, v: 0.8000001 }, &Orientation::identity()).unwrap();
        assert!(a.theta.is_finite());
    }

    fn orientation_strategy() -> impl Strategy<Value = Orientation> {
        (-180.0..180.0f64, -180.0..180.0f64, -180.0..180.0f64)
            .prop_map(|(a, b, g)| Orientation::new(a, b, g))
    }

    proptest! {
        #[test]
        fn canonical_keeps_direction(t in -400.0f64..400.0, p in -400.0f64..400.0) {
            let c = AnglePair::canonical(t, p);
            prop_assert!((0.0..=180.0).contains(&c.theta));
            let raw = unit_direction(AnglePair { theta: t, phi: p });
            prop_assert!((unit_direction(c).as_vector() - raw.as_vector()).norm() < 1e-9);
        }

        #[test]
        fn rotation_is_special_orthogonal(o in orientation_strategy()) {
            let r = rotation_matrix(&o);
            let rtr = r.transpose() * r;
            prop_assert!((rtr - Matrix3::identity()).abs().max() < 1e-12);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn direction_angle_roundtrip(theta in 0.01..179.99f64, phi in -179.99..180.0f64) {
            let a = AnglePair::new(theta, phi);
            let back = angles_from_direction(&unit_direction(a));
            prop_assert!((back.theta - a.theta).abs() < 1e-9);
            prop_assert!(azimuth_difference(back.phi, a.phi).abs() < 1e-9);
        }

        #[test]
        fn plate_frame_preserves_norm(o in orientation_strategy(), theta in 0.0..180.0f64, phi in -180.0..180.0f64) {
            let d = to_plate_frame(&o, &unit_direction(AnglePair::new(theta, phi)));
            prop_assert!((d.as_vector().norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn sfp_roundtrip_for_front_side(o in orientation_strategy(), theta in 0.5..179.5f64, phi in -180.0..180.0f64) {
            let a0 = AnglePair::new(theta, phi);
            let local = to_plate_frame(&o, &unit_direction(a0));
            prop_assume!(local.y() > 1e-3);
            let back = aoa_from_sfp(sfp_from_direction(&local), &o).unwrap();
            prop_assert!((back.theta - a0.theta).abs() < 1e-6);
            prop_assert!(azimuth_difference(back.phi, a0.phi).abs() < 1e-6);
        }
    }
}
