//! File formats: sweep CSVs, the JSON measurement dump and SFP/spectrum CSVs.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{SigmaPlan, SweepOutput};
use crate::error::{Error, Result};
use crate::estimation::SfpSets;
use crate::geometry::Orientation;
use crate::signal::{PathTruth, ScanMeasurement, SystemConfig};

pub const TRIALS_CSV: &str = "trials.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const ORIENTATIONS_CSV: &str = "orientations.csv";

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientationRow {
    pub sigma_deg: f64,
    pub alpha_deg: f64,
    pub beta_deg: f64,
    pub gamma_deg: f64,
    pub objective: f64,
    pub feasible: bool,
    pub worst_margin: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
}

impl From<&SigmaPlan> for OrientationRow {
    fn from(p: &SigmaPlan) -> Self {
        let s = &p.solution;
        Self {
            sigma_deg: p.sigma_deg,
            alpha_deg: s.orient.alpha,
            beta_deg: s.orient.beta,
            gamma_deg: s.orient.gamma,
            objective: s.objective_value,
            feasible: s.feasible,
            worst_margin: s.margins.min(),
            eps1: s.eps.eps1,
            eps2: s.eps.eps2,
            eps3: s.eps.eps3,
        }
    }
}

/// Writes `trials.csv`, `summary.csv` and `orientations.csv` into `dir`.
pub fn write_sweep(out: &SweepOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv(&dir.join(TRIALS_CSV), &out.trials)?;
    write_csv(&dir.join(SUMMARY_CSV), &out.summary)?;
    let rows: Vec<OrientationRow> = out.plans.iter().map(OrientationRow::from).collect();
    write_csv(&dir.join(ORIENTATIONS_CSV), &rows)?;
    Ok(())
}

/// Self-contained JSON form of one synthesised measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementDump {
    pub system: SystemConfig,
    pub orientation: Orientation,
    pub num_paths: usize,
    pub axis_split: usize,
    pub positions: Vec<[f64; 3]>,
    /// One row per position, `[re, im]` per subcarrier.
    pub samples: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    pub backside_paths: Vec<usize>,
    /// Ground truth, when known.
    #[serde(default)]
    pub truth: Option<Vec<PathTruth>>,
}

impl MeasurementDump {
    pub fn new(
        meas: &ScanMeasurement,
        system: &SystemConfig,
        orientation: Orientation,
        num_paths: usize,
        truth: Option<Vec<PathTruth>>,
    ) -> Self {
        Self {
            system: system.clone(),
            orientation,
            num_paths,
            axis_split: meas.axis_split,
            positions: meas.positions.iter().map(|p| [p.x, p.y, p.z]).collect(),
            samples: meas
                .samples
                .row_iter()
                .map(|r| r.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
            backside_paths: meas.backside_paths.clone(),
            truth,
        }
    }

    pub fn measurement(&self) -> Result<ScanMeasurement> {
        let rows = self.samples.len();
        let cols = self.samples.first().map_or(0, Vec::len);
        if rows != self.positions.len() || self.samples.iter().any(|r| r.len() != cols) {
            return Err(Error::Config("measurement dump has ragged sample rows".into()));
        }
        if self.axis_split > rows {
            return Err(Error::Config("axis split beyond the sample rows".into()));
        }
        let samples = DMatrix::from_fn(rows, cols, |m, k| {
            let [re, im] = self.samples[m][k];
            Complex64::new(re, im)
        });
        Ok(ScanMeasurement {
            positions: self.positions.iter().map(|p| Vector3::new(p[0], p[1], p[2])).collect(),
            samples,
            axis_split: self.axis_split,
            backside_paths: self.backside_paths.clone(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        serde_json::to_writer(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
    }
}

#[derive(Serialize)]
struct SfpRow {
    axis: char,
    index: usize,
    value: f64,
}

#[derive(Serialize)]
struct SpectrumRow {
    grid: f64,
    x_db: f64,
    z_db: f64,
}

/// Writes `sfps.csv` (axis, index, value) and `spectra.csv` (grid, x_db, z_db).
pub fn write_sfp_sets(sets: &SfpSets, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let sfps: Vec<SfpRow> = sets
        .u_set
        .iter()
        .enumerate()
        .map(|(index, &value)| SfpRow { axis: 'x', index, value })
        .chain(
            sets.v_set
                .iter()
                .enumerate()
                .map(|(index, &value)| SfpRow { axis: 'z', index, value }),
        )
        .collect();
    write_csv(&dir.join("sfps.csv"), &sfps)?;
    let spectra: Vec<SpectrumRow> = sets
        .grid
        .iter()
        .zip(sets.x_spectrum.iter().zip(&sets.z_spectrum))
        .map(|(&grid, (&x, &z))| SpectrumRow {
            grid,
            x_db: 10.0 * x.log10(),
            z_db: 10.0 * z.log10(),
        })
        .collect();
    write_csv(&dir.join("spectra.csv"), &spectra)
}
