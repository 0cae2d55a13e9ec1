//! Fisher information of one scene under the optimised and the identity
//! orientation, and how the cross-path coupling falls with the delay gap.
//!
//! cargo run --release --example fisher_diagnostics

use movable_aoa::fisher::fim;
use movable_aoa::harness::{draw_scene, plan_sigma, ExperimentConfig};
use movable_aoa::signal::scan_positions;
use movable_aoa::Orientation;

fn main() {
    let cfg = ExperimentConfig::paper_default();
    let plan = plan_sigma(&cfg, 4.0);
    let system = cfg.system.clone().with_snr_db(10.0);
    let mut scene = draw_scene(&plan.priors, &system, cfg.delay_max_s, 11);
    let positions = scan_positions(&system);

    for (name, o) in [("optimised", plan.solution.orient), ("identity", Orientation::identity())] {
        let f = fim(&scene, &o, &positions);
        let bound: f64 = f
            .matrix
            .clone()
            .try_inverse()
            .map_or(f64::NAN, |inv| inv.trace());
        println!(
            "{name:>9}: log10 det {:.3}, smallest eigenvalue {:.3e}, trace of inverse {:.3e} rad^2",
            f.determinant().abs().log10(),
            f.min_eigenvalue(),
            bound
        );
    }

    println!("coupling between paths 0 and 1 against their delay gap:");
    for gap_ns in [0.0, 5.0, 20.0, 50.0, 100.0] {
        scene.paths[1].tau = scene.paths[0].tau + gap_ns * 1e-9;
        let f = fim(&scene, &plan.solution.orient, &positions);
        let n = f.block_norms();
        println!("  {gap_ns:>5.1} ns: |I_01| / |I_00| = {:.3e}", n[(0, 1)] / n[(0, 0)]);
    }
}
