//! The grid-dictionary SOMP baseline on the same measurement as MAP pairing.
//!
//! cargo run --release --example somp_baseline

use movable_aoa::harness::{draw_scene, joint_rmse, plan_sigma, ExperimentConfig};
use movable_aoa::pairing::somp_estimate;
use movable_aoa::signal::synthesize_scan;

fn main() -> movable_aoa::Result<()> {
    let cfg = ExperimentConfig::paper_default();
    let plan = plan_sigma(&cfg, 4.0);
    let system = cfg.system.clone().with_snr_db(10.0);
    let scene = draw_scene(&plan.priors, &system, cfg.delay_max_s, 5);
    let orient = plan.solution.orient;
    let meas = synthesize_scan(&scene, &orient, 6);
    let res = somp_estimate(&meas, scene.num_paths(), &orient, &system)?;
    for (atom, aoa) in res.atoms.iter().zip(&res.aoas) {
        println!(
            "atom (u {:6.2}, v {:6.2}) -> theta {:7.3} phi {:8.3}",
            atom.u, atom.v, aoa.theta, aoa.phi
        );
    }
    println!("residual norms {:.3?}", res.residual_norms);
    let truth: Vec<_> = scene.paths.iter().map(|p| p.angles0).collect();
    println!("joint RMSE {:.4} deg", joint_rmse(&truth, &res.aoas));
    Ok(())
}
