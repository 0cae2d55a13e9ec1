//! Seeded Monte Carlo evaluation.
//!
//! For every prior spread the plate orientation is solved once. Each trial
//! then draws a scene from the priors, synthesises the rotated and unrotated
//! scans, and runs every enabled method on them. All randomness comes from
//! the base seed through [`crate::seeds::derive_seed`]; scene and noise draws
//! depend only on the trial index, so all cells of a sweep share them.

pub mod io;

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{extract_sfps, MusicConfig};
use crate::geometry::{aoa_from_sfp, azimuth_difference, sfp_from_direction, AnglePair, Orientation, SfpPair};
use crate::moments::PathPrior;
use crate::orientation::{
    optimize_orientation, optimize_with_relaxation, EpsilonConfig, OrientationSolution, SolverConfig,
};
use crate::pairing::{map_pair, somp_estimate, Permutation};
use crate::seeds::{derive_seed, rng_from_seed, stream};
use crate::signal::{synthesize_scan, PathTruth, ScanMeasurement, Scene, SystemConfig};

pub const DEFAULT_DELAY_MAX_S: f64 = 200e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MapRot,
    MapNorot,
    SompRot,
    SompNorot,
    SinglePath,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::MapRot,
        Method::MapNorot,
        Method::SompRot,
        Method::SompNorot,
        Method::SinglePath,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::MapRot => "map_rot",
            Method::MapNorot => "map_norot",
            Method::SompRot => "somp_rot",
            Method::SompNorot => "somp_norot",
            Method::SinglePath => "single_path",
        }
    }

    pub fn rotated(&self) -> bool {
        !matches!(self, Method::MapNorot | Method::SompNorot)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

fn default_trials() -> usize {
    200
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_delay() -> f64 {
    DEFAULT_DELAY_MAX_S
}

fn default_true() -> bool {
    true
}

fn default_relaxations() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub snr_grid: Vec<f64>,
    /// Prior standard deviations in degrees; each value replaces both the
    /// elevation and azimuth spread of every prior.
    pub sigma_grid: Vec<f64>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Upper end of the uniform delay draw, seconds.
    #[serde(default = "default_delay")]
    pub delay_max_s: f64,
    /// Relax the epsilons when no feasible orientation exists.
    #[serde(default = "default_true")]
    pub auto_relax_eps: bool,
    #[serde(default = "default_relaxations")]
    pub max_relaxations: usize,
    /// Fill the runtime column. Off by default so that outputs are
    /// reproducible byte for byte.
    #[serde(default)]
    pub record_timing: bool,
    pub system: SystemConfig,
    #[serde(default)]
    pub eps: EpsilonConfig,
    #[serde(default)]
    pub music: MusicConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    pub priors: Vec<PathPrior>,
}

impl ExperimentConfig {
    /// Four-path scenario at 28 GHz with the default grids.
    pub fn paper_default() -> Self {
        Self {
            seed: 1,
            trials: default_trials(),
            snr_grid: vec![0.0, 10.0, 20.0],
            sigma_grid: vec![4.0],
            methods: default_methods(),
            delay_max_s: DEFAULT_DELAY_MAX_S,
            auto_relax_eps: true,
            max_relaxations: default_relaxations(),
            record_timing: false,
            system: SystemConfig::paper_default(),
            eps: EpsilonConfig::default(),
            music: MusicConfig::default(),
            solver: SolverConfig::default(),
            priors: [(115.0, 55.0), (100.0, 115.0), (50.0, 40.0), (50.0, 120.0)]
                .into_iter()
                .map(|(mu, xi)| PathPrior::new(mu, 4.0, xi, 4.0))
                .collect(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn num_paths(&self) -> usize {
        self.priors.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.snr_grid.is_empty() || self.sigma_grid.is_empty() {
            return Err(Error::Config("snr_grid and sigma_grid must be nonempty".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if self.priors.is_empty() {
            return Err(Error::Config("at least one prior is required".into()));
        }
        if let Some(p) = self.priors.iter().find(|p| !p.is_valid()) {
            return Err(Error::Config(format!("invalid prior {p:?}")));
        }
        if self.sigma_grid.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Config("sigma_grid values must be nonnegative".into()));
        }
        if !(self.delay_max_s >= 0.0) {
            return Err(Error::Config("delay_max_s must be nonnegative".into()));
        }
        self.system.validate()?;
        self.eps.validate()?;
        self.music.validate(self.system.num_positions, self.num_paths())?;
        if self.num_paths() >= self.system.num_positions {
            return Err(Error::Config(format!(
                "{} paths need more than {} positions per axis",
                self.num_paths(),
                self.system.num_positions
            )));
        }
        Ok(())
    }

    /// Enabled methods in canonical order, without duplicates.
    pub fn enabled_methods(&self) -> Vec<Method> {
        Method::ALL
            .into_iter()
            .filter(|m| self.methods.contains(m))
            .collect()
    }

    /// Priors with both spreads replaced by `sigma`.
    pub fn priors_at(&self, sigma: f64) -> Vec<PathPrior> {
        self.priors.iter().map(|p| p.with_std(sigma)).collect()
    }
}

/// Orientation and priors shared by every trial of one prior spread.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaPlan {
    pub sigma_deg: f64,
    pub priors: Vec<PathPrior>,
    pub solution: OrientationSolution,
}

pub fn plan_sigma(cfg: &ExperimentConfig, sigma: f64) -> SigmaPlan {
    let priors = cfg.priors_at(sigma);
    let solution = if cfg.auto_relax_eps {
        optimize_with_relaxation(&priors, &cfg.eps, &cfg.solver, cfg.max_relaxations)
    } else {
        optimize_orientation(&priors, &cfg.eps, &cfg.solver)
    };
    if !solution.feasible {
        log::warn!(
            "sigma {sigma}: no feasible orientation, using the least-violating one (worst margin {:.3e})",
            solution.margins.min()
        );
    } else if solution.eps != cfg.eps {
        log::info!("sigma {sigma}: feasible after relaxing eps to {:?}", solution.eps);
    }
    SigmaPlan {
        sigma_deg: sigma,
        priors,
        solution,
    }
}

/// Draws AoAs from the priors, delays uniform on `[0, delay_max_s]` and
/// unit-magnitude attenuations with uniform phase.
pub fn draw_scene(priors: &[PathPrior], config: &SystemConfig, delay_max_s: f64, seed: u64) -> Scene {
    let mut rng = rng_from_seed(seed);
    let paths = priors
        .iter()
        .map(|p| {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            let tau = delay_max_s * rng.random::<f64>();
            let phase = 2.0 * PI * rng.random::<f64>();
            PathTruth {
                angles0: AnglePair::canonical(p.mu + p.sigma * z1, p.xi + p.varsigma * z2),
                tau,
                upsilon: num_complex::Complex64::from_polar(1.0, phase),
            }
        })
        .collect();
    Scene {
        paths,
        config: config.clone(),
    }
}

fn squared_error(a: &AnglePair, b: &AnglePair) -> f64 {
    (a.theta - b.theta).powi(2) + azimuth_difference(a.phi, b.phi).powi(2)
}

/// Joint RMSE in degrees after matching estimates to truth with the
/// assignment of least total squared error.
pub fn joint_rmse(truth: &[AnglePair], estimates: &[AnglePair]) -> f64 {
    assert_eq!(truth.len(), estimates.len(), "truth and estimates differ in length");
    let n = truth.len();
    if n == 0 {
        return 0.0;
    }
    let best = Permutation::all(n)
        .iter()
        .map(|p| (0..n).map(|i| squared_error(&truth[i], &estimates[p.get(i)])).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    (best / n as f64).sqrt()
}

fn best_axis_assignment(truth: &[f64], est: &[f64]) -> Permutation {
    let n = truth.len();
    let mut best = (f64::INFINITY, Permutation::identity(n));
    for p in Permutation::all(n) {
        let cost: f64 = (0..n).map(|i| (est[i] - truth[p.get(i)]).powi(2)).sum();
        if cost < best.0 {
            best = (cost, p);
        }
    }
    best.1
}

/// Whether every estimated pair joins the `u` and `v` of the same true path,
/// with estimates attributed to paths axis by axis.
pub fn pairing_correct(truth: &[SfpPair], est: &[SfpPair]) -> bool {
    let tu: Vec<f64> = truth.iter().map(|s| s.u).collect();
    let tv: Vec<f64> = truth.iter().map(|s| s.v).collect();
    let eu: Vec<f64> = est.iter().map(|s| s.u).collect();
    let ev: Vec<f64> = est.iter().map(|s| s.v).collect();
    best_axis_assignment(&tu, &eu) == best_axis_assignment(&tv, &ev)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub estimates: Option<Vec<AnglePair>>,
    pub rmse_deg: Option<f64>,
    pub pairing_correct: Option<bool>,
    pub failure: Option<String>,
    pub runtime_ms: f64,
}

impl MethodOutcome {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub snr_db: f64,
    pub sigma_deg: f64,
    pub truth: Vec<AnglePair>,
    pub outcomes: Vec<MethodOutcome>,
}

impl TrialResult {
    pub fn outcome(&self, method: Method) -> Option<&MethodOutcome> {
        self.outcomes.iter().find(|o| o.method == method)
    }
}

struct Estimate {
    aoas: Vec<AnglePair>,
    pairs: Option<Vec<SfpPair>>,
}

fn true_sfps(scene: &Scene, orient: &Orientation) -> Vec<SfpPair> {
    scene
        .local_directions(orient)
        .iter()
        .map(sfp_from_direction)
        .collect()
}

/// Lazily synthesised scan shared by the methods that use it.
struct ScanCache<'a> {
    scene: &'a Scene,
    orient: Orientation,
    seed: u64,
    meas: Option<ScanMeasurement>,
}

impl ScanCache<'_> {
    fn get(&mut self) -> &ScanMeasurement {
        let (scene, orient, seed) = (self.scene, self.orient, self.seed);
        self.meas
            .get_or_insert_with(|| synthesize_scan(scene, &orient, seed))
    }
}

fn run_map(
    meas: &ScanMeasurement,
    orient: &Orientation,
    priors: &[PathPrior],
    cfg: &ExperimentConfig,
    system: &SystemConfig,
) -> Result<Estimate> {
    let sets = extract_sfps(meas, priors.len(), &cfg.music, system)?;
    let res = map_pair(meas, &sets, orient, priors, system)?;
    Ok(Estimate {
        aoas: res.aoas,
        pairs: Some(res.sfp_pairs),
    })
}

fn run_somp(meas: &ScanMeasurement, orient: &Orientation, l: usize, system: &SystemConfig) -> Result<Estimate> {
    let res = somp_estimate(meas, l, orient, system)?;
    Ok(Estimate {
        aoas: res.aoas,
        pairs: Some(res.atoms),
    })
}

fn run_single_path(
    scene: &Scene,
    orient: &Orientation,
    cfg: &ExperimentConfig,
    trial: usize,
) -> Result<Estimate> {
    let mut aoas = Vec::with_capacity(scene.num_paths());
    for l in 0..scene.num_paths() {
        let single = scene.single_path(l);
        let seed = derive_seed(cfg.seed, &[stream::SINGLE_PATH, trial as u64, l as u64]);
        let meas = synthesize_scan(&single, orient, seed);
        let sets = extract_sfps(&meas, 1, &cfg.music, &single.config)?;
        aoas.push(aoa_from_sfp(
            SfpPair {
                u: sets.u_set[0],
                v: sets.v_set[0],
            },
            orient,
        )?);
    }
    Ok(Estimate { aoas, pairs: None })
}

/// Runs one trial of one `(snr, sigma)` cell for every enabled method.
/// Stage failures are recorded in the outcome and never abort the trial.
pub fn run_trial(cfg: &ExperimentConfig, plan: &SigmaPlan, snr_db: f64, trial: usize) -> TrialResult {
    let system = cfg.system.clone().with_snr_db(snr_db);
    let scene_seed = derive_seed(cfg.seed, &[stream::SCENE, trial as u64]);
    let scene = draw_scene(&plan.priors, &system, cfg.delay_max_s, scene_seed);
    let truth: Vec<AnglePair> = scene.paths.iter().map(|p| p.angles0).collect();
    let rotated = plan.solution.orient;
    let identity = Orientation::identity();

    let mut rot_scan = ScanCache {
        scene: &scene,
        orient: rotated,
        seed: derive_seed(cfg.seed, &[stream::SCAN_ROTATED, trial as u64]),
        meas: None,
    };
    let mut id_scan = ScanCache {
        scene: &scene,
        orient: identity,
        seed: derive_seed(cfg.seed, &[stream::SCAN_IDENTITY, trial as u64]),
        meas: None,
    };

    let l = scene.num_paths();
    let outcomes = cfg
        .enabled_methods()
        .into_iter()
        .map(|method| {
            let start = Instant::now();
            let orient = if method.rotated() { rotated } else { identity };
            let result = match method {
                Method::MapRot => run_map(rot_scan.get(), &rotated, &plan.priors, cfg, &system),
                Method::MapNorot => run_map(id_scan.get(), &identity, &plan.priors, cfg, &system),
                Method::SompRot => run_somp(rot_scan.get(), &rotated, l, &system),
                Method::SompNorot => run_somp(id_scan.get(), &identity, l, &system),
                Method::SinglePath => run_single_path(&scene, &rotated, cfg, trial),
            };
            let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            match result {
                Ok(est) => MethodOutcome {
                    method,
                    rmse_deg: Some(joint_rmse(&truth, &est.aoas)),
                    pairing_correct: est
                        .pairs
                        .as_ref()
                        .map(|p| pairing_correct(&true_sfps(&scene, &orient), p)),
                    estimates: Some(est.aoas),
                    failure: None,
                    runtime_ms,
                },
                Err(e) => {
                    log::debug!("trial {trial} snr {snr_db} {method}: {e}");
                    MethodOutcome {
                        method,
                        estimates: None,
                        rmse_deg: None,
                        pairing_correct: None,
                        failure: Some(e.to_string()),
                        runtime_ms,
                    }
                }
            }
        })
        .collect();

    TrialResult {
        trial,
        snr_db,
        sigma_deg: plan.sigma_deg,
        truth,
        outcomes,
    }
}

/// Plans the orientation for `sigma` and runs a single trial.
pub fn run_single_trial(cfg: &ExperimentConfig, snr_db: f64, sigma: f64, trial: usize) -> TrialResult {
    run_trial(cfg, &plan_sigma(cfg, sigma), snr_db, trial)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub snr_db: f64,
    pub sigma_deg: f64,
    pub method: Method,
    pub rmse_deg: Option<f64>,
    pub pairing_correct: Option<bool>,
    pub failed: bool,
    pub runtime_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub snr_db: f64,
    pub sigma_deg: f64,
    pub method: Method,
    pub trials: usize,
    pub failed: usize,
    pub mean_rmse_deg: Option<f64>,
    pub se_rmse_deg: Option<f64>,
    pub pairing_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub plans: Vec<SigmaPlan>,
    pub trials: Vec<TrialRow>,
    pub summary: Vec<SummaryRow>,
}

impl SweepOutput {
    pub fn summary_for(&self, snr_db: f64, sigma_deg: f64, method: Method) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.snr_db == snr_db && r.sigma_deg == sigma_deg && r.method == method)
    }
}

/// Mean, standard error and pairing accuracy over the successful rows.
pub fn summarize(rows: &[TrialRow]) -> (Option<f64>, Option<f64>, Option<f64>) {
    let rmse: Vec<f64> = rows.iter().filter_map(|r| r.rmse_deg).collect();
    let n = rmse.len() as f64;
    let mean = (!rmse.is_empty()).then(|| rmse.iter().sum::<f64>() / n);
    let se = mean.filter(|_| rmse.len() > 1).map(|m| {
        let var = rmse.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    });
    let flags: Vec<bool> = rows.iter().filter_map(|r| r.pairing_correct).collect();
    let acc = (!flags.is_empty())
        .then(|| flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64);
    (mean, se, acc)
}

/// Full sweep over `snr x sigma x trial x method`, run sequentially.
pub fn sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let plans: Vec<SigmaPlan> = cfg.sigma_grid.iter().map(|&s| plan_sigma(cfg, s)).collect();
    let methods = cfg.enabled_methods();
    let mut trials = Vec::new();
    let mut summary = Vec::new();
    for &snr in &cfg.snr_grid {
        for plan in &plans {
            let start = trials.len();
            for t in 0..cfg.trials {
                let res = run_trial(cfg, plan, snr, t);
                for o in res.outcomes {
                    trials.push(TrialRow {
                        trial: t,
                        snr_db: snr,
                        sigma_deg: plan.sigma_deg,
                        method: o.method,
                        rmse_deg: o.rmse_deg,
                        pairing_correct: o.pairing_correct,
                        failed: o.failure.is_some(),
                        runtime_ms: cfg.record_timing.then_some(o.runtime_ms),
                    });
                }
            }
            for &method in &methods {
                let rows: Vec<TrialRow> = trials[start..]
                    .iter()
                    .filter(|r| r.method == method)
                    .cloned()
                    .collect();
                let (mean, se, acc) = summarize(&rows);
                summary.push(SummaryRow {
                    snr_db: snr,
                    sigma_deg: plan.sigma_deg,
                    method,
                    trials: rows.len(),
                    failed: rows.iter().filter(|r| r.failed).count(),
                    mean_rmse_deg: mean,
                    se_rmse_deg: se,
                    pairing_accuracy: acc,
                });
            }
            log::info!("snr {snr} dB, sigma {} deg done", plan.sigma_deg);
        }
    }
    Ok(SweepOutput {
        plans,
        trials,
        summary,
    })
}
