//! Closed-form projection moments against a Monte Carlo estimate.
//!
//! cargo run --release --example moment_check

use movable_aoa::geometry::{rotation_matrix, unit_direction};
use movable_aoa::moments::projection_moments;
use movable_aoa::seeds::rng_from_seed;
use movable_aoa::{AnglePair, Orientation, PathPrior};
use rand_distr::{Distribution, Normal};

fn main() {
    let prior = PathPrior::new(100.0, 6.0, 115.0, 8.0);
    let orient = Orientation::new(20.0, -35.0, 10.0);
    let closed = projection_moments(&prior, &orient);

    let draws = 1_000_000;
    let mut rng = rng_from_seed(7);
    let theta = Normal::new(prior.mu, prior.sigma).unwrap();
    let phi = Normal::new(prior.xi, prior.varsigma).unwrap();
    let rt = rotation_matrix(&orient).transpose();
    let mut sums = [0.0; 6];
    for _ in 0..draws {
        let d0 = unit_direction(AnglePair {
            theta: theta.sample(&mut rng),
            phi: phi.sample(&mut rng),
        });
        let a = rt * d0.as_vector();
        for (s, v) in sums.iter_mut().zip([a.x, a.z, a.y, a.x * a.x, a.z * a.z, a.y * a.y]) {
            *s += v;
        }
    }
    let names = ["E[x]", "E[z]", "E[y]", "E[x^2]", "E[z^2]", "E[y^2]"];
    let values = [
        closed.mean_x,
        closed.mean_z,
        closed.mean_y,
        closed.second_x,
        closed.second_z,
        closed.second_y,
    ];
    println!("{:>8} {:>12} {:>12} {:>10}", "moment", "closed", "sampled", "diff");
    for ((n, c), s) in names.iter().zip(values).zip(sums) {
        let m = s / draws as f64;
        println!("{n:>8} {c:>12.6} {m:>12.6} {:>10.2e}", c - m);
    }
}
