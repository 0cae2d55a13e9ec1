//! Solves the plate-orientation problem for the four-path scenario at several
//! prior spreads and prints the chosen Euler angles with their margins.
//!
//! cargo run --example orientation_design

use movable_aoa::orientation::{objective, optimize_orientation, EpsilonConfig, SolverConfig};
use movable_aoa::{Orientation, PathPrior};

fn main() {
    let means = [(115.0, 55.0), (100.0, 115.0), (50.0, 40.0), (50.0, 120.0)];
    let eps = EpsilonConfig::default();
    let solver = SolverConfig::default();
    for std in [2.0, 4.0, 6.0, 10.0] {
        let priors: Vec<PathPrior> = means
            .iter()
            .map(|&(mu, xi)| PathPrior::new(mu, std, xi, std))
            .collect();
        let sol = optimize_orientation(&priors, &eps, &solver);
        let o = sol.orient;
        println!(
            "std {std:>4.1} deg: alpha {:8.3} beta {:8.3} gamma {:8.3}  f {:.4} (identity {:.4})  feasible {}  worst margin {:.3e}  feasible restarts {}/{}",
            o.alpha,
            o.beta,
            o.gamma,
            sol.objective_value,
            objective(&priors, &Orientation::identity()),
            sol.feasible,
            sol.margins.min(),
            sol.trace.feasible_restarts,
            sol.trace.restarts,
        );
    }
}
