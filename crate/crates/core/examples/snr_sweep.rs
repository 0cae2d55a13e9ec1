//! Mean joint RMSE against SNR for every method on the four-path scenario.
//!
//! cargo run --release --example snr_sweep -- [trials] [sigma_deg]

use movable_aoa::harness::{sweep, ExperimentConfig, Method};

fn main() -> movable_aoa::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let mut cfg = ExperimentConfig::paper_default();
    cfg.trials = args.next().map_or(50, |s| s.parse().expect("trial count"));
    let sigma: f64 = args.next().map_or(4.0, |s| s.parse().expect("sigma in degrees"));
    cfg.sigma_grid = vec![sigma];
    cfg.snr_grid = vec![-10.0, 0.0, 10.0, 20.0, 30.0];
    cfg.record_timing = true;

    let out = sweep(&cfg)?;
    let o = out.plans[0].solution.orient;
    println!(
        "sigma {sigma} deg, orientation ({:.2}, {:.2}, {:.2}) deg, {} trials per cell",
        o.alpha, o.beta, o.gamma, cfg.trials
    );
    print!("{:>8}", "snr_db");
    for m in Method::ALL {
        print!("{:>14}", m.as_str());
    }
    println!();
    for &snr in &cfg.snr_grid {
        print!("{snr:>8.1}");
        for m in Method::ALL {
            let row = out.summary_for(snr, sigma, m).unwrap();
            match row.mean_rmse_deg {
                Some(v) => print!("{:>9.3}{:>5}", v, format!("/{}", row.failed)),
                None => print!("{:>14}", "-"),
            }
        }
        println!();
    }
    println!("entries are mean RMSE in degrees / failed trials");
    for m in Method::ALL {
        let times: Vec<f64> = out
            .trials
            .iter()
            .filter(|r| r.method == m)
            .filter_map(|r| r.runtime_ms)
            .collect();
        println!(
            "{:>12}: {:.1} ms per trial",
            m.as_str(),
            times.iter().sum::<f64>() / times.len() as f64
        );
    }
    Ok(())
}
