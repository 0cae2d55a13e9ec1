//! Fisher information of the initial-frame angles of all paths.
//!
//! With `psi = [theta_1, phi_1, ..., theta_L, phi_L]` (radians) the FIM is
//! `2K / (P N0) * Re{Gamma}` where the `(l, u)` block of `Gamma` is
//! `sum_m kappa_lu(p_m) g_l(p_m) g_u(p_m)^T` and `g_l` is the gradient of the
//! extra path length with respect to path `l`'s angles. On the diagonal
//! `kappa_ll` reduces to the position-independent `c_l`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2, Vector2, Vector3};
use num_complex::Complex64;

use crate::geometry::{rotation_matrix, Orientation};
use crate::signal::{Scene, SPEED_OF_LIGHT};

/// Gradient `[d rho / d theta0, d rho / d phi0]` of the extra path length of
/// `path_index` at `position`, per radian.
pub fn aoa_gradient(
    scene: &Scene,
    orient: &Orientation,
    position: &Vector3<f64>,
    path_index: usize,
) -> Vector2<f64> {
    let angles = scene.paths[path_index].angles0;
    let (st, ct) = angles.theta.to_radians().sin_cos();
    let (sp, cp) = angles.phi.to_radians().sin_cos();
    let d_theta = Vector3::new(ct * cp, ct * sp, -st);
    let d_phi = Vector3::new(-st * sp, st * cp, 0.0);
    // rho = p^T R^T a0, so d rho = (R p)^T d a0.
    let rp = rotation_matrix(orient) * position;
    Vector2::new(rp.dot(&d_theta), rp.dot(&d_phi))
}

fn path_delay(scene: &Scene, orient: &Orientation, position: &Vector3<f64>, l: usize) -> f64 {
    let dir = crate::geometry::to_plate_frame(orient, &crate::geometry::unit_direction(scene.paths[l].angles0));
    scene.paths[l].tau + dir.as_vector().dot(position) / SPEED_OF_LIGHT
}

/// `kappa_lu(p) = conj(ups_l) ups_u (P/K)^2 sum_k (2 pi f_k / c)^2 exp(j 2 pi f_k Delta_lu(p))`
/// with `Delta_lu` the delay difference including the position-dependent
/// path-length difference.
pub fn coupling_factor(
    scene: &Scene,
    orient: &Orientation,
    position: &Vector3<f64>,
    l: usize,
    u: usize,
) -> Complex64 {
    let delta = path_delay(scene, orient, position, l) - path_delay(scene, orient, position, u);
    coupling_with_delta(scene, l, u, delta)
}

fn coupling_with_delta(scene: &Scene, l: usize, u: usize, delta: f64) -> Complex64 {
    let cfg = &scene.config;
    let gain = cfg.signal_gain();
    let sum: Complex64 = cfg
        .subcarrier_frequencies()
        .into_iter()
        .map(|fk| {
            let w = 2.0 * PI * fk / SPEED_OF_LIGHT;
            Complex64::from_polar(w * w, 2.0 * PI * fk * delta)
        })
        .sum();
    scene.paths[l].upsilon.conj() * scene.paths[u].upsilon * gain * gain * sum
}

/// Diagonal scaling `c_l = |ups_l|^2 sum_k (2 pi f_k / c * P / K)^2`.
pub fn diagonal_scale(scene: &Scene, l: usize) -> f64 {
    let cfg = &scene.config;
    let gain = cfg.signal_gain();
    let s: f64 = cfg
        .subcarrier_frequencies()
        .into_iter()
        .map(|fk| (2.0 * PI * fk / SPEED_OF_LIGHT * gain).powi(2))
        .sum();
    scene.paths[l].upsilon.norm_sqr() * s
}

#[derive(Clone, Debug)]
pub struct FimResult {
    /// Real symmetric `2L x 2L` matrix. Unscaled `Re{Gamma}` when
    /// `scale` is `None`.
    pub matrix: DMatrix<f64>,
    /// Complex `2 x 2` blocks of `Gamma`, row-major over `(l, u)`.
    pub blocks: Vec<Matrix2<Complex64>>,
    pub num_paths: usize,
    /// `2K / (P N0)`; `None` when the noise level is zero.
    pub scale: Option<f64>,
}

impl FimResult {
    pub fn block(&self, l: usize, u: usize) -> &Matrix2<Complex64> {
        &self.blocks[l * self.num_paths + u]
    }

    pub fn singular_scale(&self) -> bool {
        self.scale.is_none()
    }

    /// Frobenius norm of the real part of every scaled block.
    pub fn block_norms(&self) -> DMatrix<f64> {
        let l = self.num_paths;
        DMatrix::from_fn(l, l, |a, b| {
            self.matrix
                .view((2 * a, 2 * b), (2, 2))
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
        })
    }

    pub fn determinant(&self) -> f64 {
        self.matrix.determinant()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let sym = (&self.matrix + self.matrix.transpose()) * 0.5;
        let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap_or(f64::NAN)
    }
}

pub fn fim(scene: &Scene, orient: &Orientation, positions: &[Vector3<f64>]) -> FimResult {
    let l_count = scene.num_paths();
    let mut blocks = vec![Matrix2::<Complex64>::zeros(); l_count * l_count];
    let grads: Vec<Vec<Vector2<f64>>> = positions
        .iter()
        .map(|p| (0..l_count).map(|l| aoa_gradient(scene, orient, p, l)).collect())
        .collect();
    for l in 0..l_count {
        let cl = diagonal_scale(scene, l);
        for u in 0..l_count {
            let mut acc = Matrix2::<Complex64>::zeros();
            for (m, pos) in positions.iter().enumerate() {
                let outer = grads[m][l] * grads[m][u].transpose();
                let k = if l == u {
                    Complex64::new(cl, 0.0)
                } else {
                    coupling_factor(scene, orient, pos, l, u)
                };
                acc += outer.map(|v| k * v);
            }
            blocks[l * l_count + u] = acc;
        }
    }

    let noise_var = scene.config.noise_variance();
    let scale = (noise_var > 0.0).then(|| 2.0 / noise_var);
    if scale.is_none() {
        log::warn!("noise level is zero; returning the unscaled information");
    }
    let s = scale.unwrap_or(1.0);
    let mut matrix = DMatrix::<f64>::zeros(2 * l_count, 2 * l_count);
    for l in 0..l_count {
        for u in 0..l_count {
            let b = &blocks[l * l_count + u];
            for i in 0..2 {
                for j in 0..2 {
                    matrix[(2 * l + i, 2 * u + j)] = s * b[(i, j)].re;
                }
            }
        }
    }
    FimResult {
        matrix,
        blocks,
        num_paths: l_count,
        scale,
    }
}
