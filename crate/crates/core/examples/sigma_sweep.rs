//! Mean joint RMSE against the prior spread at a fixed SNR, writing the
//! sweep CSVs to a temporary directory.
//!
//! cargo run --release --example sigma_sweep -- [trials]

use movable_aoa::harness::io::write_sweep;
use movable_aoa::harness::{sweep, ExperimentConfig, Method};

fn main() -> movable_aoa::Result<()> {
    env_logger::init();
    let mut cfg = ExperimentConfig::paper_default();
    cfg.trials = std::env::args().nth(1).map_or(50, |s| s.parse().expect("trial count"));
    cfg.snr_grid = vec![10.0];
    cfg.sigma_grid = vec![2.0, 4.0, 6.0, 8.0, 10.0];
    cfg.methods = vec![Method::MapRot, Method::MapNorot, Method::SompRot, Method::SompNorot];

    let out = sweep(&cfg)?;
    for plan in &out.plans {
        let s = &plan.solution;
        print!(
            "sigma {:>4.1}: eps {:.2} feasible {:>5} |",
            plan.sigma_deg, s.eps.eps1, s.feasible
        );
        for &m in &cfg.methods {
            let row = out.summary_for(10.0, plan.sigma_deg, m).unwrap();
            print!(
                " {} {:.3}",
                m.as_str(),
                row.mean_rmse_deg.unwrap_or(f64::NAN)
            );
        }
        println!();
    }
    let dir = std::env::temp_dir().join("movable-aoa-sigma-sweep");
    write_sweep(&out, &dir)?;
    println!("CSVs in {}", dir.display());
    Ok(())
}
