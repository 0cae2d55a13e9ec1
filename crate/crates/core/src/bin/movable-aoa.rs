//! Command-line front end: `orient`, `simulate`, `estimate`, `fim`, `montecarlo`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use movable_aoa::estimation::extract_sfps;
use movable_aoa::fisher::fim;
use movable_aoa::harness::io::{write_csv, write_sfp_sets, write_sweep, MeasurementDump, OrientationRow};
use movable_aoa::harness::{draw_scene, plan_sigma, sweep, ExperimentConfig, Method};
use movable_aoa::pairing::map_pair;
use movable_aoa::seeds::{derive_seed, stream};
use movable_aoa::signal::{scan_positions, synthesize_scan};
use movable_aoa::{Orientation, Result};
use serde::Serialize;

#[derive(Parser)]
#[command(version, about = "Prior-guided movable-antenna AoA sensing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Defaults to the built-in four-path scenario.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::paper_default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }

    fn out_dir(&self) -> Result<Option<&Path>> {
        if let Some(d) = &self.out {
            std::fs::create_dir_all(d)?;
        }
        Ok(self.out.as_deref())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the orientation problem for every prior spread in the config.
    Orient {
        #[command(flatten)]
        common: Common,
    },
    /// Draw one scene and write its measurement dump.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// SNR in dB; defaults to the first grid value.
        #[arg(long)]
        snr: Option<f64>,
        /// Prior spread in degrees; defaults to the first grid value.
        #[arg(long)]
        sigma: Option<f64>,
        /// Scan with the plate unrotated.
        #[arg(long)]
        no_rotation: bool,
    },
    /// Extract the two SFP sets from a measurement dump, and pair them when
    /// priors are available from the config.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Prior spread used for pairing; defaults to the config priors as written.
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Fisher information of one drawn scene with and without rotation.
    Fim {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Full Monte Carlo sweep written as CSV.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
        /// Comma-separated subset of map_rot, map_norot, somp_rot, somp_norot, single_path.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
        /// Methods to drop from the config's list.
        #[arg(long, value_delimiter = ',')]
        skip: Vec<Method>,
        #[arg(long)]
        record_timing: bool,
    },
}

fn first(grid: &[f64], pick: Option<f64>) -> f64 {
    pick.unwrap_or(grid[0])
}

fn orient(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let plans: Vec<_> = cfg.sigma_grid.iter().map(|&s| plan_sigma(&cfg, s)).collect();
    for p in &plans {
        let s = &p.solution;
        println!(
            "sigma {:>5.2} deg: alpha {:8.3} beta {:8.3} gamma {:8.3}  objective {:.5}  feasible {}  worst margin {:.3e}  eps {:.3}/{:.3}/{:.3}",
            p.sigma_deg,
            s.orient.alpha,
            s.orient.beta,
            s.orient.gamma,
            s.objective_value,
            s.feasible,
            s.margins.min(),
            s.eps.eps1,
            s.eps.eps2,
            s.eps.eps3
        );
    }
    if let Some(dir) = common.out_dir()? {
        let rows: Vec<OrientationRow> = plans.iter().map(OrientationRow::from).collect();
        write_csv(&dir.join("orientations.csv"), &rows)?;
        std::fs::write(dir.join("orientation.json"), serde_json::to_string_pretty(&plans)?)?;
    }
    Ok(())
}

fn simulate(common: &Common, trial: usize, snr: Option<f64>, sigma: Option<f64>, no_rotation: bool) -> Result<()> {
    let cfg = common.load()?;
    let snr = first(&cfg.snr_grid, snr);
    let plan = plan_sigma(&cfg, first(&cfg.sigma_grid, sigma));
    let system = cfg.system.clone().with_snr_db(snr);
    let scene = draw_scene(
        &plan.priors,
        &system,
        cfg.delay_max_s,
        derive_seed(cfg.seed, &[stream::SCENE, trial as u64]),
    );
    let (orient, tag) = if no_rotation {
        (Orientation::identity(), stream::SCAN_IDENTITY)
    } else {
        (plan.solution.orient, stream::SCAN_ROTATED)
    };
    let meas = synthesize_scan(&scene, &orient, derive_seed(cfg.seed, &[tag, trial as u64]));
    for (i, p) in scene.paths.iter().enumerate() {
        println!(
            "path {i}: theta {:8.3} phi {:8.3} tau {:.3e} s",
            p.angles0.theta, p.angles0.phi, p.tau
        );
    }
    println!(
        "orientation ({:.3}, {:.3}, {:.3}) deg, snr {snr} dB",
        orient.alpha, orient.beta, orient.gamma
    );
    let dump = MeasurementDump::new(&meas, &system, orient, scene.num_paths(), Some(scene.paths));
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("measurement.json");
    dump.save(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct PairRow {
    prior: usize,
    u: f64,
    v: f64,
    theta_deg: f64,
    phi_deg: f64,
}

fn estimate(common: &Common, input: &Path, sigma: Option<f64>) -> Result<()> {
    let dump = MeasurementDump::load(input)?;
    let meas = dump.measurement()?;
    let cfg = common.load()?;
    let sets = extract_sfps(&meas, dump.num_paths, &cfg.music, &dump.system)?;
    println!("u: {:?}", sets.u_set);
    println!("v: {:?}", sets.v_set);
    let dir = common.out_dir()?;
    if let Some(dir) = dir {
        write_sfp_sets(&sets, dir)?;
    }
    if cfg.num_paths() != dump.num_paths {
        println!(
            "config has {} priors for {} paths; skipping pairing",
            cfg.num_paths(),
            dump.num_paths
        );
        return Ok(());
    }
    let priors = match sigma {
        Some(s) => cfg.priors_at(s),
        None => cfg.priors.clone(),
    };
    let res = map_pair(&meas, &sets, &dump.orientation, &priors, &dump.system)?;
    let rows: Vec<PairRow> = res
        .sfp_pairs
        .iter()
        .zip(&res.aoas)
        .enumerate()
        .map(|(prior, (p, a))| PairRow {
            prior,
            u: p.u,
            v: p.v,
            theta_deg: a.theta,
            phi_deg: a.phi,
        })
        .collect();
    for r in &rows {
        println!(
            "prior {}: (u {:.5}, v {:.5}) -> theta {:8.3} phi {:8.3}",
            r.prior, r.u, r.v, r.theta_deg, r.phi_deg
        );
    }
    println!(
        "log-likelihood {:.6e}  log-prior {:.4}  score {:.6e}",
        res.log_likelihood, res.log_prior, res.score
    );
    if let Some(dir) = dir {
        write_csv(&dir.join("pairing.csv"), &rows)?;
    }
    Ok(())
}

fn fim_report(common: &Common, trial: usize, snr: Option<f64>, sigma: Option<f64>) -> Result<()> {
    let cfg = common.load()?;
    let plan = plan_sigma(&cfg, first(&cfg.sigma_grid, sigma));
    let system = cfg.system.clone().with_snr_db(first(&cfg.snr_grid, snr));
    let scene = draw_scene(
        &plan.priors,
        &system,
        cfg.delay_max_s,
        derive_seed(cfg.seed, &[stream::SCENE, trial as u64]),
    );
    let positions = scan_positions(&system);
    let dir = common.out_dir()?;
    for (name, orient) in [("rot", plan.solution.orient), ("norot", Orientation::identity())] {
        let f = fim(&scene, &orient, &positions);
        let ev = f.eigenvalues();
        println!(
            "{name:>5}: log10 det {:.3}  eigenvalues [{:.3e} .. {:.3e}]",
            f.determinant().abs().log10(),
            ev.last().copied().unwrap_or(f64::NAN),
            ev[0]
        );
        println!("       block norms:\n{:.3e}", f.block_norms());
        if let Some(dir) = dir {
            let rows: Vec<Vec<f64>> = f.matrix.row_iter().map(|r| r.iter().copied().collect()).collect();
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_path(dir.join(format!("fim_{name}.csv")))?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn montecarlo(
    common: &Common,
    trials: Option<usize>,
    methods: Option<Vec<Method>>,
    skip: &[Method],
    record_timing: bool,
) -> Result<()> {
    let mut cfg = common.load()?;
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(m) = methods {
        cfg.methods = m;
    }
    cfg.methods.retain(|m| !skip.contains(m));
    cfg.record_timing |= record_timing;
    let out = sweep(&cfg)?;
    for r in &out.summary {
        println!(
            "snr {:>6.1} sigma {:>5.2} {:>12}: mean rmse {:>9} (se {:>8})  failed {}/{}  pairing {}",
            r.snr_db,
            r.sigma_deg,
            r.method.as_str(),
            r.mean_rmse_deg.map_or("-".into(), |v| format!("{v:.4}")),
            r.se_rmse_deg.map_or("-".into(), |v| format!("{v:.4}")),
            r.failed,
            r.trials,
            r.pairing_accuracy.map_or("-".into(), |v| format!("{v:.3}")),
        );
    }
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    write_sweep(&out, &dir)?;
    println!("wrote CSVs to {}", dir.display());
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Orient { common } => orient(common),
        Command::Simulate {
            common,
            trial,
            snr,
            sigma,
            no_rotation,
        } => simulate(common, *trial, *snr, *sigma, *no_rotation),
        Command::Estimate { common, input, sigma } => estimate(common, input, *sigma),
        Command::Fim {
            common,
            trial,
            snr,
            sigma,
        } => fim_report(common, *trial, *snr, *sigma),
        Command::Montecarlo {
            common,
            trials,
            methods,
            skip,
            record_timing,
        } => montecarlo(common, *trials, methods.clone(), skip, *record_timing),
    };
    if let Err(e) = res {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
