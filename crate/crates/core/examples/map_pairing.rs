//! MAP pairing of the two SFP sets, with the exhaustive certificate.
//!
//! cargo run --release --example map_pairing

use movable_aoa::estimation::{extract_sfps, MusicConfig};
use movable_aoa::harness::{draw_scene, joint_rmse, plan_sigma, ExperimentConfig};
use movable_aoa::pairing::map_pair;
use movable_aoa::signal::synthesize_scan;

fn main() -> movable_aoa::Result<()> {
    let cfg = ExperimentConfig::paper_default();
    let plan = plan_sigma(&cfg, 4.0);
    let system = cfg.system.clone().with_snr_db(5.0);
    let scene = draw_scene(&plan.priors, &system, cfg.delay_max_s, 21);
    let orient = plan.solution.orient;
    let meas = synthesize_scan(&scene, &orient, 22);
    let sets = extract_sfps(&meas, scene.num_paths(), &MusicConfig::default(), &system)?;
    let res = map_pair(&meas, &sets, &orient, &plan.priors, &system)?;

    println!("theta perm {:?}, xi perm {:?}", res.theta_perm.as_slice(), res.xi_perm.as_slice());
    for (l, (a, t)) in res.aoas.iter().zip(&scene.paths).enumerate() {
        println!(
            "prior {l}: estimate ({:7.3}, {:8.3})  truth ({:7.3}, {:8.3})",
            a.theta, a.phi, t.angles0.theta, t.angles0.phi
        );
    }
    println!(
        "log-likelihood {:.4e} + log-prior {:.3} = {:.4e}",
        res.log_likelihood, res.log_prior, res.score
    );
    if let Some(c) = &res.certificate {
        println!(
            "certificate over {} candidates: runner-up {:.4e}, holds {}",
            c.candidates, c.best_other_score, c.holds
        );
    }
    let truth: Vec<_> = scene.paths.iter().map(|p| p.angles0).collect();
    println!("joint RMSE {:.4} deg", joint_rmse(&truth, &res.aoas));
    Ok(())
}
