//! Scene description and synthesis of the demodulated OFDM samples collected
//! along the two linear scans on the (possibly tilted) plate.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{to_plate_frame, unit_direction, AnglePair, Direction3, Orientation};
use crate::seeds::rng_from_seed;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Placement of the subcarriers around the carrier.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubcarrierGrid {
    /// `f_k = fc + (k - (K+1)/2) * delta` for `k = 1..K`.
    #[default]
    Centered,
    /// `f_k = fc + (k - 1) * delta`.
    OneSided,
}

/// Radio and scan constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemConfigFile", into = "SystemConfigFile")]
pub struct SystemConfig {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub num_subcarriers: usize,
    /// Samples per scan axis.
    pub num_positions: usize,
    pub spacing_m: f64,
    /// Linear transmit power.
    pub power: f64,
    /// Linear noise level; the demodulated noise variance is `P * N0 / K`.
    pub noise_n0: f64,
    pub grid: SubcarrierGrid,
}

/// On-disk form of [`SystemConfig`]: the spacing may be omitted (half a
/// carrier wavelength) and the power defaults to `K` so that `P / K = 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemConfigFile {
    carrier_hz: f64,
    bandwidth_hz: f64,
    num_subcarriers: usize,
    num_positions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spacing_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    power: Option<f64>,
    #[serde(default)]
    noise_n0: f64,
    #[serde(default)]
    grid: SubcarrierGrid,
}

impl TryFrom<SystemConfigFile> for SystemConfig {
    type Error = Error;

    fn try_from(f: SystemConfigFile) -> Result<Self> {
        let spacing = f
            .spacing_m
            .unwrap_or(0.5 * SPEED_OF_LIGHT / f.carrier_hz);
        let cfg = SystemConfig {
            carrier_hz: f.carrier_hz,
            bandwidth_hz: f.bandwidth_hz,
            num_subcarriers: f.num_subcarriers,
            num_positions: f.num_positions,
            spacing_m: spacing,
            power: f.power.unwrap_or(f.num_subcarriers as f64),
            noise_n0: f.noise_n0,
            grid: f.grid,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<SystemConfig> for SystemConfigFile {
    fn from(c: SystemConfig) -> Self {
        SystemConfigFile {
            carrier_hz: c.carrier_hz,
            bandwidth_hz: c.bandwidth_hz,
            num_subcarriers: c.num_subcarriers,
            num_positions: c.num_positions,
            spacing_m: Some(c.spacing_m),
            power: Some(c.power),
            noise_n0: c.noise_n0,
            grid: c.grid,
        }
    }
}

impl SystemConfig {
    /// 28 GHz carrier, 50 MHz over 64 subcarriers, 32 positions per axis at
    /// half-wavelength spacing, `P = K`, noiseless.
    pub fn paper_default() -> Self {
        let carrier = 28e9;
        SystemConfig {
            carrier_hz: carrier,
            bandwidth_hz: 50e6,
            num_subcarriers: 64,
            num_positions: 32,
            spacing_m: 0.5 * SPEED_OF_LIGHT / carrier,
            power: 64.0,
            noise_n0: 0.0,
            grid: SubcarrierGrid::Centered,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.carrier_hz > 0.0) || !(self.bandwidth_hz >= 0.0) {
            return bad("carrier must be positive and bandwidth nonnegative");
        }
        if self.num_subcarriers < 1 {
            return bad("need at least one subcarrier");
        }
        if self.num_positions < 2 {
            return bad("need at least two positions per scan axis");
        }
        if !(self.spacing_m > 0.0) {
            return bad("spacing must be positive");
        }
        if !(self.power > 0.0) {
            return bad("power must be positive");
        }
        if !(self.noise_n0 >= 0.0) {
            return bad("noise level must be nonnegative");
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn subcarrier_spacing(&self) -> f64 {
        self.bandwidth_hz / self.num_subcarriers as f64
    }

    /// Frequency of subcarrier `k`, zero-based.
    pub fn subcarrier_frequency(&self, k: usize) -> f64 {
        let delta = self.subcarrier_spacing();
        let k1 = (k + 1) as f64;
        match self.grid {
            SubcarrierGrid::Centered => {
                self.carrier_hz + (k1 - (self.num_subcarriers as f64 + 1.0) / 2.0) * delta
            }
            SubcarrierGrid::OneSided => self.carrier_hz + (k1 - 1.0) * delta,
        }
    }

    pub fn subcarrier_frequencies(&self) -> Vec<f64> {
        (0..self.num_subcarriers)
            .map(|k| self.subcarrier_frequency(k))
            .collect()
    }

    /// `P / K`, the amplitude factor of every demodulated sample.
    pub fn signal_gain(&self) -> f64 {
        self.power / self.num_subcarriers as f64
    }

    /// `P * N0 / K`, the demodulated noise variance.
    pub fn noise_variance(&self) -> f64 {
        self.power * self.noise_n0 / self.num_subcarriers as f64
    }

    /// Sets `N0` so that `-10 log10(P N0 / K)` equals `snr_db`.
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        let variance = 10f64.powf(-snr_db / 10.0);
        self.noise_n0 = variance * self.num_subcarriers as f64 / self.power;
        self
    }
}

/// Ground truth for one propagation path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathTruth {
    /// Angles in the initial frame.
    pub angles0: AnglePair,
    /// Delay in seconds.
    pub tau: f64,
    pub upsilon: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub paths: Vec<PathTruth>,
    pub config: SystemConfig,
}

impl Scene {
    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }

    /// Checks `1 <= L <= M - 1` and the per-path invariants.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let l = self.paths.len();
        if l == 0 || l + 1 > self.config.num_positions {
            return Err(Error::Config(format!(
                "{l} paths cannot be resolved with {} positions per axis",
                self.config.num_positions
            )));
        }
        for (i, p) in self.paths.iter().enumerate() {
            if !(p.tau >= 0.0) || !(p.upsilon.norm() > 0.0) {
                return Err(Error::Config(format!(
                    "path {i} needs a nonnegative delay and nonzero attenuation"
                )));
            }
        }
        Ok(())
    }

    /// Path directions in the plate frame.
    pub fn local_directions(&self, orient: &Orientation) -> Vec<Direction3> {
        self.paths
            .iter()
            .map(|p| to_plate_frame(orient, &unit_direction(p.angles0)))
            .collect()
    }

    /// Same scene restricted to one path.
    pub fn single_path(&self, index: usize) -> Scene {
        Scene {
            paths: vec![self.paths[index].clone()],
            config: self.config.clone(),
        }
    }
}

/// Samples from the X scan (first `axis_split` rows) and the Z scan.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanMeasurement {
    /// Plate-frame antenna positions in meters.
    pub positions: Vec<Vector3<f64>>,
    /// `2M x K` demodulated samples.
    pub samples: DMatrix<Complex64>,
    pub axis_split: usize,
    /// Paths that arrived from behind the plate when the scan was synthesised.
    pub backside_paths: Vec<usize>,
}

impl ScanMeasurement {
    /// `M x K` rows of the X scan.
    pub fn x_axis(&self) -> DMatrix<Complex64> {
        self.samples.rows(0, self.axis_split).into_owned()
    }

    /// `M x K` rows of the Z scan.
    pub fn z_axis(&self) -> DMatrix<Complex64> {
        let n = self.samples.nrows() - self.axis_split;
        self.samples.rows(self.axis_split, n).into_owned()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.samples.ncols()
    }
}

/// `2M` positions: `(m-1) d` along X for `m = 1..M`, then the same along Z.
pub fn scan_positions(config: &SystemConfig) -> Vec<Vector3<f64>> {
    let m = config.num_positions;
    let d = config.spacing_m;
    let x = (0..m).map(|i| Vector3::new(i as f64 * d, 0.0, 0.0));
    let z = (0..m).map(|i| Vector3::new(0.0, 0.0, i as f64 * d));
    x.chain(z).collect()
}

/// Extra path length `a^T p` seen at an on-plate position.
pub fn propagation_delta(dir_local: &Direction3, position: &Vector3<f64>) -> f64 {
    dir_local.as_vector().dot(position)
}

/// Multi-path channel at `position` on zero-based subcarrier `k`.
pub fn channel_response(
    scene: &Scene,
    orient: &Orientation,
    position: &Vector3<f64>,
    k: usize,
) -> Complex64 {
    let fk = scene.config.subcarrier_frequency(k);
    scene
        .paths
        .iter()
        .map(|p| {
            let local = to_plate_frame(orient, &unit_direction(p.angles0));
            let rho = propagation_delta(&local, position);
            let phase = -2.0 * PI * fk * (p.tau + rho / SPEED_OF_LIGHT);
            p.upsilon * Complex64::from_polar(1.0, phase)
        })
        .sum()
}

/// Noiseless `(P/K) h` over all scan positions and subcarriers.
pub fn noiseless_samples(scene: &Scene, orient: &Orientation) -> DMatrix<Complex64> {
    let cfg = &scene.config;
    let positions = scan_positions(cfg);
    let freqs = cfg.subcarrier_frequencies();
    let locals = scene.local_directions(orient);
    let gain = cfg.signal_gain();
    let mut out = DMatrix::zeros(positions.len(), freqs.len());
    for (m, pos) in positions.iter().enumerate() {
        for (p, dir) in scene.paths.iter().zip(&locals) {
            let delay = p.tau + propagation_delta(dir, pos) / SPEED_OF_LIGHT;
            for (k, fk) in freqs.iter().enumerate() {
                out[(m, k)] += p.upsilon * Complex64::from_polar(gain, -2.0 * PI * fk * delay);
            }
        }
    }
    out
}

/// Synthesises one noisy measurement. Noise is circularly-symmetric complex
/// Gaussian with variance `P N0 / K`, drawn row by row from `rng_seed`.
pub fn synthesize_scan(scene: &Scene, orient: &Orientation, rng_seed: u64) -> ScanMeasurement {
    let backside: Vec<usize> = scene
        .local_directions(orient)
        .iter()
        .enumerate()
        .filter(|(_, d)| d.y() <= 0.0)
        .map(|(i, _)| i)
        .collect();
    if !backside.is_empty() {
        log::warn!("paths {backside:?} arrive from behind the plate");
    }

    let mut samples = noiseless_samples(scene, orient);
    let variance = scene.config.noise_variance();
    if variance > 0.0 {
        let mut rng = rng_from_seed(rng_seed);
        let std = (variance / 2.0).sqrt();
        for m in 0..samples.nrows() {
            for k in 0..samples.ncols() {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                samples[(m, k)] += Complex64::new(std * re, std * im);
            }
        }
    }

    ScanMeasurement {
        positions: scan_positions(&scene.config),
        samples,
        axis_split: scene.config.num_positions,
        backside_paths: backside,
    }
}
