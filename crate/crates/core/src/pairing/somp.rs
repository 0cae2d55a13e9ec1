//! Grid-dictionary simultaneous OMP over joint `(u, v)` atoms.
//!
//! The atom for `(u, v)` on subcarrier `k` has entries
//! `exp(-j 2 pi f_k (x u + z v) / c)`. Every scan position lies on either the
//! X or the Z axis, so the correlation of an atom with a residual splits into
//! an X-scan term depending on `u` only and a Z-scan term depending on `v`
//! only. The atom phasors are tabulated once per call.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ls_path_coefficients, steering_matrix};
use crate::error::Result;
use crate::estimation::search_grid;
use crate::geometry::{aoa_from_sfp, AnglePair, Orientation, SfpPair};
use crate::signal::{ScanMeasurement, SystemConfig, SPEED_OF_LIGHT};

pub const SOMP_GRID_POINTS: usize = 201;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SompResult {
    pub atoms: Vec<SfpPair>,
    pub aoas: Vec<AnglePair>,
    /// Frobenius norm of the residual before the first and after every
    /// iteration.
    pub residual_norms: Vec<f64>,
}

/// Conjugate atom entries of one axis, `[k][g][row]`.
struct AxisPhasors {
    rows: Vec<usize>,
    table: Vec<Vec<Vec<Complex64>>>,
}

impl AxisPhasors {
    fn new(rows: &[(usize, f64)], freqs: &[f64], grid: &[f64]) -> Self {
        let table = freqs
            .iter()
            .map(|&f| {
                grid.iter()
                    .map(|&g| {
                        let step = 2.0 * PI * f * g / SPEED_OF_LIGHT;
                        rows.iter()
                            .map(|&(_, w)| Complex64::from_polar(1.0, step * w))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            rows: rows.iter().map(|r| r.0).collect(),
            table,
        }
    }

    /// `out[k][g] = sum_{m on axis} conj(atom) residual[m, k]`.
    fn correlate(&self, residual: &DMatrix<Complex64>) -> Vec<Vec<Complex64>> {
        self.table
            .iter()
            .enumerate()
            .map(|(k, per_grid)| {
                let col: Vec<Complex64> = self.rows.iter().map(|&m| residual[(m, k)]).collect();
                per_grid
                    .iter()
                    .map(|ph| ph.iter().zip(&col).map(|(a, r)| a * r).sum())
                    .collect()
            })
            .collect()
    }
}

pub fn somp_estimate(
    meas: &ScanMeasurement,
    num_paths: usize,
    orient: &Orientation,
    config: &SystemConfig,
) -> Result<SompResult> {
    somp_with_grid(meas, num_paths, orient, config, SOMP_GRID_POINTS)
}

pub fn somp_with_grid(
    meas: &ScanMeasurement,
    num_paths: usize,
    orient: &Orientation,
    config: &SystemConfig,
    grid_points: usize,
) -> Result<SompResult> {
    let grid = search_grid(grid_points);
    let freqs = config.subcarrier_frequencies();
    let split = meas.axis_split;
    // The shared origin belongs to the X scan's row 0 and the Z scan's row 0;
    // both rows are ordinary samples and are kept on their own axis.
    let x_rows: Vec<(usize, f64)> = (0..split).map(|m| (m, meas.positions[m].x)).collect();
    let z_rows: Vec<(usize, f64)> = (split..meas.positions.len())
        .map(|m| (m, meas.positions[m].z))
        .collect();
    let valid: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|i| (0..grid.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| grid[i] * grid[i] + grid[j] * grid[j] <= 1.0)
        .collect();

    let x_axis = AxisPhasors::new(&x_rows, &freqs, &grid);
    let z_axis = AxisPhasors::new(&z_rows, &freqs, &grid);

    let mut residual = meas.samples.clone();
    let mut residual_norms = vec![residual.norm()];
    let mut chosen: Vec<(usize, usize)> = Vec::with_capacity(num_paths);
    let mut atoms: Vec<SfpPair> = Vec::with_capacity(num_paths);

    for _ in 0..num_paths {
        let a = x_axis.correlate(&residual);
        let b = z_axis.correlate(&residual);
        let mut best = (f64::NEG_INFINITY, (0, 0));
        for &(i, j) in &valid {
            if chosen.contains(&(i, j)) {
                continue;
            }
            let energy: f64 = (0..freqs.len()).map(|k| (a[k][i] + b[k][j]).norm_sqr()).sum();
            if energy > best.0 {
                best = (energy, (i, j));
            }
        }
        let (i, j) = best.1;
        chosen.push((i, j));
        atoms.push(SfpPair {
            u: grid[i],
            v: grid[j],
        });

        for (k, &f) in freqs.iter().enumerate() {
            let dict = steering_matrix(&atoms, &meas.positions, f);
            let col: DVector<Complex64> = meas.samples.column(k).into_owned();
            let fit = ls_path_coefficients(&dict, &col);
            residual.set_column(k, &fit.residual);
        }
        residual_norms.push(residual.norm());
    }

    let aoas = atoms
        .iter()
        .map(|s| aoa_from_sfp(*s, orient))
        .collect::<Result<Vec<_>>>()?;
    Ok(SompResult {
        atoms,
        aoas,
        residual_norms,
    })
}
