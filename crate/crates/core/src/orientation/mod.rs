//! Plate-orientation design.
//!
//! The orientation maximises the pairwise separation of the mean X and Z
//! projections of all paths, subject to two families of moment conditions that
//! are sufficient (via Cantelli's inequality) for
//!
//! * each pair keeping its mean ordering on each axis with probability at
//!   least `1 - eps1` / `1 - eps2`, and
//! * each path arriving from the front of the plate with probability at least
//!   `1 - eps3`.
//!
//! The non-convex problem is solved by multistart SQP over a uniform grid of
//! Euler-angle seeds.

pub mod qp;
pub mod sqp;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Orientation;
use crate::moments::{projection_moments, projection_moments_rad, PathPrior, ProjectionMoments};

/// Allowed order-reversal probabilities on X and Z, and the allowed
/// front-side violation probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonConfig {
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
}

impl Default for EpsilonConfig {
    fn default() -> Self {
        Self::uniform(0.05)
    }
}

impl EpsilonConfig {
    pub fn uniform(eps: f64) -> Self {
        Self {
            eps1: eps,
            eps2: eps,
            eps3: eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for e in [self.eps1, self.eps2, self.eps3] {
            if !(e > 0.0 && e <= 0.5) {
                return Err(Error::Config(format!("epsilon {e} outside (0, 0.5]")));
            }
        }
        Ok(())
    }

    /// Doubles every probability, capped at 0.5.
    pub fn relaxed(&self) -> Self {
        Self {
            eps1: (2.0 * self.eps1).min(0.5),
            eps2: (2.0 * self.eps2).min(0.5),
            eps3: (2.0 * self.eps3).min(0.5),
        }
    }
}

fn cantelli_factor(eps: f64) -> f64 {
    (1.0 - eps) / eps
}

/// Separation margins of one unordered pair `l < u` on the X and Z axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairMargin {
    pub l: usize,
    pub u: usize,
    pub x: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintMargins {
    pub separation: Vec<PairMargin>,
    pub front_side: Vec<f64>,
}

impl ConstraintMargins {
    /// All margins flattened: X and Z separation for every pair, then front side.
    pub fn values(&self) -> Vec<f64> {
        self.separation
            .iter()
            .flat_map(|p| [p.x, p.z])
            .chain(self.front_side.iter().copied())
            .collect()
    }

    pub fn min(&self) -> f64 {
        self.values().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn all_nonnegative(&self, tol: f64) -> bool {
        self.values().into_iter().all(|v| v >= -tol)
    }
}

fn objective_from(moments: &[ProjectionMoments]) -> f64 {
    let mut f = 0.0;
    for a in moments {
        for b in moments {
            f += (a.mean_x - b.mean_x).powi(2) + (a.mean_z - b.mean_z).powi(2);
        }
    }
    f
}

fn separation_from(moments: &[ProjectionMoments], eps: &EpsilonConfig) -> Vec<PairMargin> {
    let kx = cantelli_factor(eps.eps1);
    let kz = cantelli_factor(eps.eps2);
    let mut out = Vec::new();
    for l in 0..moments.len() {
        for u in l + 1..moments.len() {
            let (a, b) = (&moments[l], &moments[u]);
            let x = (a.mean_x - b.mean_x).powi(2)
                - kx * (a.second_x + b.second_x - a.mean_x.powi(2) - b.mean_x.powi(2));
            let z = (a.mean_z - b.mean_z).powi(2)
                - kz * (a.second_z + b.second_z - a.mean_z.powi(2) - b.mean_z.powi(2));
            out.push(PairMargin { l, u, x, z });
        }
    }
    out
}

fn front_side_from(moments: &[ProjectionMoments], eps3: f64) -> Vec<f64> {
    let k = cantelli_factor(eps3);
    moments
        .iter()
        .map(|m| m.mean_y - (k * (m.second_y - m.mean_y * m.mean_y)).max(0.0).sqrt())
        .collect()
}

fn moments_at(priors: &[PathPrior], orient: &Orientation) -> Vec<ProjectionMoments> {
    priors.iter().map(|p| projection_moments(p, orient)).collect()
}

/// Mean-separation objective summed over ordered pairs (every unordered pair
/// contributes twice).
pub fn objective(priors: &[PathPrior], orient: &Orientation) -> f64 {
    objective_from(&moments_at(priors, orient))
}

pub fn separation_margins(
    priors: &[PathPrior],
    orient: &Orientation,
    eps: &EpsilonConfig,
) -> Vec<PairMargin> {
    separation_from(&moments_at(priors, orient), eps)
}

pub fn front_side_margins(priors: &[PathPrior], orient: &Orientation, eps3: f64) -> Vec<f64> {
    front_side_from(&moments_at(priors, orient), eps3)
}

pub fn constraint_margins(
    priors: &[PathPrior],
    orient: &Orientation,
    eps: &EpsilonConfig,
) -> ConstraintMargins {
    let moments = moments_at(priors, orient);
    ConstraintMargins {
        separation: separation_from(&moments, eps),
        front_side: front_side_from(&moments, eps.eps3),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Seeds per Euler axis on `(-90, 90]`; the restart count is its cube.
    pub grid_per_axis: usize,
    pub fd_step_rad: f64,
    pub max_iterations: usize,
    /// Margins at or above `-feasibility_tolerance` count as satisfied.
    pub feasibility_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grid_per_axis: 4,
            fd_step_rad: 1e-5,
            max_iterations: 100,
            feasibility_tolerance: 1e-9,
        }
    }
}

impl SolverConfig {
    /// Seeds `-90 + 180 (i + 1) / n` on each axis, in lexicographic order.
    pub fn seeds(&self) -> Vec<Orientation> {
        let n = self.grid_per_axis.max(1);
        let axis: Vec<f64> = (0..n).map(|i| -90.0 + 180.0 * (i + 1) as f64 / n as f64).collect();
        let mut out = Vec::with_capacity(n * n * n);
        for &a in &axis {
            for &b in &axis {
                for &g in &axis {
                    out.push(Orientation::new(a, b, g));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub restarts: usize,
    pub feasible_restarts: usize,
    /// Restart that produced the returned orientation.
    pub best_restart: usize,
    pub total_iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientationSolution {
    pub orient: Orientation,
    pub objective_value: f64,
    pub margins: ConstraintMargins,
    pub feasible: bool,
    pub eps: EpsilonConfig,
    pub trace: SolverTrace,
}

impl OrientationSolution {
    /// Converts a best-effort (infeasible) solution into an error.
    pub fn require_feasible(self) -> Result<Self> {
        if self.feasible {
            Ok(self)
        } else {
            Err(Error::NoFeasiblePoint {
                worst_margin: self.margins.min(),
            })
        }
    }
}

struct Candidate {
    orient: Orientation,
    objective: f64,
    margins: ConstraintMargins,
    feasible: bool,
}

/// Multistart SQP for the orientation problem. When no restart ends feasible
/// the least-violating orientation is returned with `feasible == false`.
pub fn optimize_orientation(
    priors: &[PathPrior],
    eps: &EpsilonConfig,
    solver: &SolverConfig,
) -> OrientationSolution {
    let opts = sqp::SqpOptions {
        max_iterations: solver.max_iterations,
        fd_step: solver.fd_step_rad,
        feasibility_tolerance: solver.feasibility_tolerance,
        ..sqp::SqpOptions::default()
    };
    let eval = |x: &[f64]| -> Vec<ProjectionMoments> {
        priors
            .iter()
            .map(|p| projection_moments_rad(p, x[0], x[1], x[2]))
            .collect()
    };
    let f = |x: &[f64]| -objective_from(&eval(x));
    let c = |x: &[f64]| {
        let m = eval(x);
        let margins = ConstraintMargins {
            separation: separation_from(&m, eps),
            front_side: front_side_from(&m, eps.eps3),
        };
        margins.values()
    };

    let seeds = solver.seeds();
    let mut total_iterations = 0;
    let candidates: Vec<Candidate> = seeds
        .iter()
        .map(|seed| {
            let out = sqp::minimize(&f, &c, &seed.to_radians(), &opts);
            total_iterations += out.iterations;
            let orient = Orientation::from_radians([out.x[0], out.x[1], out.x[2]]);
            // Re-evaluate at the wrapped angles that are actually reported.
            let margins = constraint_margins(priors, &orient, eps);
            Candidate {
                objective: objective(priors, &orient),
                feasible: margins.all_nonnegative(solver.feasibility_tolerance),
                margins,
                orient,
            }
        })
        .collect();

    let feasible_restarts = candidates.iter().filter(|c| c.feasible).count();
    let mut best = 0;
    for (i, cand) in candidates.iter().enumerate() {
        let incumbent = &candidates[best];
        let better = if feasible_restarts > 0 {
            cand.feasible && (!incumbent.feasible || cand.objective > incumbent.objective)
        } else {
            cand.margins.min() > incumbent.margins.min()
        };
        if better {
            best = i;
        }
    }
    let chosen = &candidates[best];
    OrientationSolution {
        orient: chosen.orient,
        objective_value: chosen.objective,
        margins: chosen.margins.clone(),
        feasible: chosen.feasible,
        eps: *eps,
        trace: SolverTrace {
            restarts: seeds.len(),
            feasible_restarts,
            best_restart: best,
            total_iterations,
        },
    }
}

/// Bisection steps between the last infeasible and first feasible epsilon.
pub const RELAXATION_BISECTIONS: usize = 6;

/// Runs [`optimize_orientation`], doubling every epsilon (up to 0.5) while no
/// feasible orientation is found, at most `max_relaxations` times. Once a
/// feasible epsilon is bracketed it is tightened by bisection, so the
/// returned solution uses close to the smallest feasible uniform scaling.
pub fn optimize_with_relaxation(
    priors: &[PathPrior],
    eps: &EpsilonConfig,
    solver: &SolverConfig,
    max_relaxations: usize,
) -> OrientationSolution {
    let mut current = *eps;
    let mut sol = optimize_orientation(priors, &current, solver);
    if sol.feasible {
        return sol;
    }
    let mut infeasible = current;
    for _ in 0..max_relaxations {
        let next = current.relaxed();
        if next == current {
            break;
        }
        log::info!("no feasible orientation at eps {current:?}; relaxing to {next:?}");
        infeasible = current;
        current = next;
        sol = optimize_orientation(priors, &current, solver);
        if sol.feasible {
            break;
        }
    }
    if !sol.feasible {
        return sol;
    }
    let mut lo = infeasible;
    let mut hi = current;
    for _ in 0..RELAXATION_BISECTIONS {
        let mid = EpsilonConfig {
            eps1: 0.5 * (lo.eps1 + hi.eps1),
            eps2: 0.5 * (lo.eps2 + hi.eps2),
            eps3: 0.5 * (lo.eps3 + hi.eps3),
        };
        let trial = optimize_orientation(priors, &mid, solver);
        if trial.feasible {
            hi = mid;
            sol = trial;
        } else {
            lo = mid;
        }
    }
    sol
}
