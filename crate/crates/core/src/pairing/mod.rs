//! MAP pairing of the unordered X-scan and Z-scan SFP estimates.
//!
//! Prior `l` is given the pair `(u[theta(l)], v[xi(l)])`. The likelihood only
//! sees which `u` goes with which `v` (the matching `xi o theta^-1`), the prior
//! additionally sees which pair is attributed to which prior. [`map_pair`]
//! enumerates the `L!` matchings and, for each, finds the best attribution
//! with a bitmask dynamic program, which gives the same maximum as the full
//! `(theta, xi)` search.

mod somp;

pub use somp::{somp_estimate, somp_with_grid, SompResult, SOMP_GRID_POINTS};

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::SfpSets;
use crate::geometry::{aoa_from_sfp, azimuth_difference, AnglePair, Orientation, SfpPair};
use crate::moments::PathPrior;
use crate::signal::{ScanMeasurement, SystemConfig, SPEED_OF_LIGHT};

/// Largest path count accepted by [`map_pair`].
pub const MAX_PAIRING_PATHS: usize = 8;
/// Largest path count for which the exhaustive certificate is built.
pub const CERTIFICATE_PATHS: usize = 4;
const CONDITION_LIMIT: f64 = 1e10;
const MIN_PRIOR_STD: f64 = 1e-9;

/// A bijection on `0..n`, stored as its image sequence.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; mapping.len()];
        for &i in &mapping {
            if i >= mapping.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Config(format!("{mapping:?} is not a permutation")));
            }
        }
        Ok(Self(mapping))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &j) in self.0.iter().enumerate() {
            inv[j] = i;
        }
        Self(inv)
    }

    /// `self o other`, i.e. `i -> self(other(i))`.
    pub fn compose(&self, other: &Self) -> Self {
        Self(other.0.iter().map(|&i| self.0[i]).collect())
    }

    /// All `n!` permutations in lexicographic order.
    pub fn all(n: usize) -> Vec<Self> {
        let mut cur: Vec<usize> = (0..n).collect();
        let mut out = vec![Self(cur.clone())];
        loop {
            let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
                return out;
            };
            let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
            cur.swap(i - 1, j);
            cur[i..].reverse();
            out.push(Self(cur.clone()));
        }
    }
}

/// Exhaustive check of the MAP winner over every `(theta, xi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub candidates: usize,
    pub best_other_score: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingResult {
    pub theta_perm: Permutation,
    pub xi_perm: Permutation,
    /// Pair attributed to prior `l`.
    pub sfp_pairs: Vec<SfpPair>,
    pub aoas: Vec<AnglePair>,
    pub log_likelihood: f64,
    pub log_prior: f64,
    pub score: f64,
    /// Some subcarrier's least-squares system exceeded the condition limit.
    pub ill_conditioned: bool,
    pub certificate: Option<Certificate>,
}

/// `2M x L` matrix with entries `exp(-j 2 pi f (x u + z v) / c)`.
pub fn steering_matrix(pairs: &[SfpPair], positions: &[nalgebra::Vector3<f64>], freq: f64) -> DMatrix<Complex64> {
    let w = -2.0 * PI * freq / SPEED_OF_LIGHT;
    DMatrix::from_fn(positions.len(), pairs.len(), |m, l| {
        let p = &positions[m];
        Complex64::from_polar(1.0, w * (p.x * pairs[l].u + p.z * pairs[l].v))
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LsFit {
    pub coefficients: DVector<Complex64>,
    pub residual: DVector<Complex64>,
    pub ill_conditioned: bool,
}

/// Ridge-regularised least squares with `lambda = 1e-8 tr(A^H A) / L`.
pub fn ls_path_coefficients(steering: &DMatrix<Complex64>, samples: &DVector<Complex64>) -> LsFit {
    let l = steering.ncols();
    let gram = steering.adjoint() * steering;
    let trace: f64 = (0..l).map(|i| gram[(i, i)].re).sum();
    let ridge = 1e-8 * trace / l.max(1) as f64;
    let eig = gram.clone().symmetric_eigenvalues();
    let (lo, hi) = eig
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    let ill_conditioned = !(lo > 0.0 && hi / lo <= CONDITION_LIMIT);

    let mut reg = gram;
    for i in 0..l {
        reg[(i, i)] += ridge;
    }
    let rhs = steering.adjoint() * samples;
    let coefficients = match reg.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => reg.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(l)),
    };
    let residual = samples - steering * &coefficients;
    LsFit {
        coefficients,
        residual,
        ill_conditioned,
    }
}

/// `-2KM log(pi P N0 / K)`.
pub fn likelihood_constant(config: &SystemConfig) -> f64 {
    let k = config.num_subcarriers as f64;
    let m = config.num_positions as f64;
    -2.0 * k * m * (PI * noise_floor(config)).ln()
}

fn noise_floor(config: &SystemConfig) -> f64 {
    config.noise_variance().max(f64::MIN_POSITIVE)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Likelihood {
    pub value: f64,
    pub ill_conditioned: bool,
}

/// Gaussian log-likelihood of the measurement with per-subcarrier
/// least-squares path coefficients for the given pairs.
pub fn log_likelihood(meas: &ScanMeasurement, pairs: &[SfpPair], config: &SystemConfig) -> Likelihood {
    let mut misfit = 0.0;
    let mut ill = false;
    for k in 0..meas.num_subcarriers() {
        let steering = steering_matrix(pairs, &meas.positions, config.subcarrier_frequency(k));
        let fit = ls_path_coefficients(&steering, &meas.samples.column(k).into_owned());
        misfit += fit.residual.norm_squared();
        ill |= fit.ill_conditioned;
    }
    Likelihood {
        value: -misfit / noise_floor(config) + likelihood_constant(config),
        ill_conditioned: ill,
    }
}

/// Log density of one AoA under one prior (degrees, wrapped azimuth).
pub fn log_prior_term(aoa: &AnglePair, prior: &PathPrior) -> f64 {
    let s1 = prior.sigma.max(MIN_PRIOR_STD);
    let s2 = prior.varsigma.max(MIN_PRIOR_STD);
    let dt = aoa.theta - prior.mu;
    let dp = azimuth_difference(aoa.phi, prior.xi);
    -dt * dt / (2.0 * s1 * s1) - dp * dp / (2.0 * s2 * s2) - (2.0 * PI * s1 * s2).ln()
}

/// Sum of [`log_prior_term`] with `aoas[l]` attributed to `priors[l]`.
pub fn log_prior(aoas: &[AnglePair], priors: &[PathPrior]) -> f64 {
    aoas.iter().zip(priors).map(|(a, p)| log_prior_term(a, p)).sum()
}

/// Pairs `(u[theta(l)], v[xi(l)])` for every prior `l`.
pub fn pair_sfps(sets: &SfpSets, theta: &Permutation, xi: &Permutation) -> Vec<SfpPair> {
    (0..theta.len())
        .map(|l| SfpPair {
            u: sets.u_set[theta.get(l)],
            v: sets.v_set[xi.get(l)],
        })
        .collect()
}

/// Log prior of the `(theta, xi)` candidate; `InfeasibleSfp` when a pair
/// cannot come from the front of the plate.
pub fn log_prior_for(
    sets: &SfpSets,
    theta: &Permutation,
    xi: &Permutation,
    orient: &Orientation,
    priors: &[PathPrior],
) -> Result<f64> {
    let aoas = pair_sfps(sets, theta, xi)
        .into_iter()
        .map(|p| aoa_from_sfp(p, orient))
        .collect::<Result<Vec<_>>>()?;
    Ok(log_prior(&aoas, priors))
}

/// Best attribution of pairs to priors: `table[l][i]` scores prior `l` on
/// pair `i`. Returns `assign[l] = i` and the total.
fn best_assignment(table: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = table.len();
    let full = 1usize << n;
    let mut best = vec![f64::NEG_INFINITY; full];
    let mut choice = vec![usize::MAX; full];
    best[0] = 0.0;
    for mask in 0..full {
        if best[mask] == f64::NEG_INFINITY {
            continue;
        }
        let l = mask.count_ones() as usize;
        if l == n {
            continue;
        }
        for (i, &w) in table[l].iter().enumerate() {
            if mask & (1 << i) != 0 || w == f64::NEG_INFINITY {
                continue;
            }
            let next = mask | (1 << i);
            let cand = best[mask] + w;
            if cand > best[next] {
                best[next] = cand;
                choice[next] = i;
            }
        }
    }
    let total = best[full - 1];
    if total == f64::NEG_INFINITY {
        return (Vec::new(), total);
    }
    let mut assign = vec![0; n];
    let mut mask = full - 1;
    for l in (0..n).rev() {
        let i = choice[mask];
        assign[l] = i;
        mask &= !(1 << i);
    }
    (assign, total)
}

struct MatchingEval {
    sigma: Permutation,
    likelihood: Likelihood,
    /// `aoas[i]` of the pair `(u[i], v[sigma(i)])`, `None` when infeasible.
    aoas: Vec<Option<AnglePair>>,
}

fn evaluate_matchings(
    meas: &ScanMeasurement,
    sets: &SfpSets,
    orient: &Orientation,
    config: &SystemConfig,
) -> Vec<MatchingEval> {
    let n = sets.u_set.len();
    Permutation::all(n)
        .into_iter()
        .map(|sigma| {
            let pairs: Vec<SfpPair> = (0..n)
                .map(|i| SfpPair {
                    u: sets.u_set[i],
                    v: sets.v_set[sigma.get(i)],
                })
                .collect();
            let aoas = pairs.iter().map(|p| aoa_from_sfp(*p, orient).ok()).collect();
            MatchingEval {
                likelihood: log_likelihood(meas, &pairs, config),
                aoas,
                sigma,
            }
        })
        .collect()
}

/// MAP choice of `(theta, xi)` maximising log-likelihood plus log prior.
pub fn map_pair(
    meas: &ScanMeasurement,
    sets: &SfpSets,
    orient: &Orientation,
    priors: &[PathPrior],
    config: &SystemConfig,
) -> Result<PairingResult> {
    let n = priors.len();
    if n > MAX_PAIRING_PATHS {
        return Err(Error::SearchSpaceTooLarge {
            paths: n,
            limit: MAX_PAIRING_PATHS,
        });
    }
    if sets.u_set.len() != n || sets.v_set.len() != n {
        return Err(Error::Config(format!(
            "{} priors but {} / {} SFP estimates",
            n,
            sets.u_set.len(),
            sets.v_set.len()
        )));
    }

    let evals = evaluate_matchings(meas, sets, orient, config);
    let mut winner: Option<(usize, Vec<usize>, f64, f64)> = None;
    for (e_idx, eval) in evals.iter().enumerate() {
        if eval.aoas.iter().any(Option::is_none) {
            continue;
        }
        let table: Vec<Vec<f64>> = priors
            .iter()
            .map(|p| {
                eval.aoas
                    .iter()
                    .map(|a| log_prior_term(a.as_ref().unwrap(), p))
                    .collect()
            })
            .collect();
        let (assign, prior_total) = best_assignment(&table);
        if prior_total == f64::NEG_INFINITY {
            continue;
        }
        let score = eval.likelihood.value + prior_total;
        if winner.as_ref().is_none_or(|w| score > w.3) {
            winner = Some((e_idx, assign, prior_total, score));
        }
    }
    let Some((e_idx, assign, _, _)) = winner else {
        return Err(Error::NoValidPairing);
    };

    let eval = &evals[e_idx];
    let theta = Permutation(assign);
    let xi = eval.sigma.compose(&theta);
    let sfp_pairs = pair_sfps(sets, &theta, &xi);
    let aoas: Vec<AnglePair> = (0..n).map(|l| eval.aoas[theta.get(l)].unwrap()).collect();
    // Recompute the prior at the reported attribution so that the score
    // decomposes exactly.
    let lp = log_prior(&aoas, priors);
    let score = eval.likelihood.value + lp;

    let certificate = (n <= CERTIFICATE_PATHS).then(|| certify(&evals, priors, &theta, &xi, score));

    Ok(PairingResult {
        theta_perm: theta,
        xi_perm: xi,
        sfp_pairs,
        aoas,
        log_likelihood: eval.likelihood.value,
        log_prior: lp,
        score,
        ill_conditioned: eval.likelihood.ill_conditioned,
        certificate,
    })
}

fn certify(
    evals: &[MatchingEval],
    priors: &[PathPrior],
    theta_star: &Permutation,
    xi_star: &Permutation,
    score: f64,
) -> Certificate {
    let n = priors.len();
    let perms = Permutation::all(n);
    let mut best_other = f64::NEG_INFINITY;
    let mut candidates = 0;
    for theta in &perms {
        for xi in &perms {
            candidates += 1;
            if theta == theta_star && xi == xi_star {
                continue;
            }
            let sigma = xi.compose(&theta.inverse());
            let eval = evals.iter().find(|e| e.sigma == sigma).unwrap();
            let mut lp = 0.0;
            for l in 0..n {
                lp += match &eval.aoas[theta.get(l)] {
                    Some(a) => log_prior_term(a, &priors[l]),
                    None => f64::NEG_INFINITY,
                };
            }
            best_other = best_other.max(eval.likelihood.value + lp);
        }
    }
    let tol = 1e-9 * score.abs().max(1.0);
    Certificate {
        candidates,
        best_other_score: best_other,
        holds: score + tol >= best_other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sfp_from_direction, to_plate_frame, unit_direction};
    use crate::seeds::rng_from_seed;
    use crate::signal::{noiseless_samples, scan_positions, synthesize_scan, PathTruth, Scene};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn two_path_scene(n0: f64) -> Scene {
        let mut config = SystemConfig::paper_default();
        config.noise_n0 = n0;
        Scene {
            paths: vec![
                PathTruth {
                    angles0: AnglePair::new(110.0, 60.0),
                    tau: 10e-9,
                    upsilon: Complex64::from_polar(1.0, 0.4),
                },
                PathTruth {
                    angles0: AnglePair::new(65.0, 115.0),
                    tau: 90e-9,
                    upsilon: Complex64::from_polar(1.0, 2.5),
                },
            ],
            config,
        }
    }

    fn true_sets(scene: &Scene, orient: &Orientation, swap_v: bool) -> SfpSets {
        let sfps: Vec<SfpPair> = scene
            .local_directions(orient)
            .iter()
            .map(sfp_from_direction)
            .collect();
        let mut v_set: Vec<f64> = sfps.iter().map(|s| s.v).collect();
        if swap_v {
            v_set.reverse();
        }
        SfpSets {
            u_set: sfps.iter().map(|s| s.u).collect(),
            v_set,
            grid: Vec::new(),
            x_spectrum: Vec::new(),
            z_spectrum: Vec::new(),
        }
    }

    fn priors_of(scene: &Scene, std: f64) -> Vec<PathPrior> {
        scene
            .paths
            .iter()
            .map(|p| PathPrior::new(p.angles0.theta, std, p.angles0.phi, std))
            .collect()
    }

    #[test]
    fn permutation_basics() {
        let all = Permutation::all(3);
        assert_eq!(all.len(), 6);
        assert_eq!(all[0].as_slice(), &[0, 1, 2]);
        assert_eq!(all[1].as_slice(), &[0, 2, 1]);
        assert_eq!(all[5].as_slice(), &[2, 1, 0]);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        assert_eq!(p.compose(&p.inverse()), Permutation::identity(3));
        assert!(Permutation::new(vec![0, 0, 1]).is_err());
        assert_eq!(Permutation::all(1).len(), 1);
    }

    #[test]
    fn steering_matrix_unit_modulus_and_origin_row() {
        let pairs = [SfpPair { u: 0.3, v: -0.2 }, SfpPair { u: -0.7, v: 0.1 }];
        let cfg = SystemConfig::paper_default();
        let a = steering_matrix(&pairs, &scan_positions(&cfg), cfg.carrier_hz);
        assert!(a.iter().all(|z| (z.norm() - 1.0).abs() <= 1e-12));
        assert!(a.row(0).iter().all(|z| *z == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn steering_reproduces_noiseless_synthesis() {
        let mut scene = two_path_scene(0.0);
        for p in &mut scene.paths {
            p.tau = 0.0;
            p.upsilon = Complex64::new(1.0, 0.0);
        }
        let o = Orientation::new(10.0, 20.0, -5.0);
        let sets = true_sets(&scene, &o, false);
        let pairs = pair_sfps(&sets, &Permutation::identity(2), &Permutation::identity(2));
        let samples = noiseless_samples(&scene, &o);
        let cfg = &scene.config;
        for k in [0, 31, 63] {
            let a = steering_matrix(&pairs, &scan_positions(cfg), cfg.subcarrier_frequency(k));
            let predicted = a * DVector::from_element(2, Complex64::new(1.0, 0.0));
            let scaled = samples.column(k) / Complex64::from(cfg.signal_gain());
            assert!((predicted - &scaled).norm() <= 1e-9 * scaled.norm());
        }
    }

    #[test]
    fn single_column_ls_is_matched_filter() {
        let cfg = SystemConfig::paper_default();
        let a = steering_matrix(&[SfpPair { u: 0.4, v: 0.3 }], &scan_positions(&cfg), cfg.carrier_hz);
        let mut rng = rng_from_seed(9);
        let s = DVector::from_fn(a.nrows(), |_, _| Complex64::new(rng.random(), rng.random()));
        let fit = ls_path_coefficients(&a, &s);
        let mf = (a.adjoint() * &s)[0] / (a.adjoint() * &a)[0];
        assert!((fit.coefficients[0] - mf).norm() <= 1e-7 * mf.norm());
    }

    #[test]
    fn ls_recovers_known_coefficients() {
        let cfg = SystemConfig::paper_default();
        let pairs = [
            SfpPair { u: 0.5, v: -0.3 },
            SfpPair { u: -0.4, v: 0.2 },
            SfpPair { u: 0.1, v: 0.7 },
        ];
        let a = steering_matrix(&pairs, &scan_positions(&cfg), cfg.carrier_hz);
        let q = DVector::from_column_slice(&[
            Complex64::new(1.0, -0.5),
            Complex64::new(-0.3, 0.8),
            Complex64::new(0.2, 0.1),
        ]);
        let fit = ls_path_coefficients(&a, &(&a * &q));
        assert!((&fit.coefficients - &q).norm() <= 1e-6 * q.norm());
        assert!(!fit.ill_conditioned);
        let mut rng = rng_from_seed(4);
        let s = DVector::from_fn(a.nrows(), |_, _| Complex64::new(rng.random(), rng.random()));
        let fit = ls_path_coefficients(&a, &s);
        assert!((a.adjoint() * &fit.residual).norm() <= 1e-6 * s.norm());
    }

    #[test]
    fn duplicate_columns_flag_ill_conditioning() {
        let cfg = SystemConfig::paper_default();
        let p = SfpPair { u: 0.2, v: 0.2 };
        let a = steering_matrix(&[p, p], &scan_positions(&cfg), cfg.carrier_hz);
        let s = a.column(0).into_owned();
        let fit = ls_path_coefficients(&a, &s);
        assert!(fit.ill_conditioned);
        assert!(fit.coefficients.iter().all(|c| c.re.is_finite()));
    }

    #[test]
    fn perfect_fit_gives_constant() {
        let scene = two_path_scene(0.01);
        let o = Orientation::identity();
        let mut meas = synthesize_scan(&scene, &o, 0);
        meas.samples = noiseless_samples(&scene, &o);
        let sets = true_sets(&scene, &o, false);
        let pairs = pair_sfps(&sets, &Permutation::identity(2), &Permutation::identity(2));
        let c1 = likelihood_constant(&scene.config);
        let l = log_likelihood(&meas, &pairs, &scene.config).value;
        assert_abs_diff_eq!(l, c1, epsilon = 1e-9 * c1.abs());
        let swapped = pair_sfps(&sets, &Permutation::identity(2), &Permutation::new(vec![1, 0]).unwrap());
        assert!(log_likelihood(&meas, &swapped, &scene.config).value < l);

        meas.samples[(3, 5)] += Complex64::new(0.5, 0.0);
        assert!(log_likelihood(&meas, &pairs, &scene.config).value < l);
    }

    #[test]
    fn prior_at_means_and_away() {
        let priors = [PathPrior::new(100.0, 3.0, 170.0, 5.0), PathPrior::new(60.0, 2.0, -40.0, 4.0)];
        let at_means = [AnglePair::new(100.0, 170.0), AnglePair::new(60.0, -40.0)];
        let expected = -(2.0 * PI * 15.0).ln() - (2.0 * PI * 8.0).ln();
        assert_abs_diff_eq!(log_prior(&at_means, &priors), expected, epsilon = 1e-12);
        let moved = [AnglePair::new(101.0, 170.0), AnglePair::new(60.0, -40.0)];
        assert!(log_prior(&moved, &priors) < expected);
        // 170 deg against -176 deg is a 14 deg residual, not 346.
        let wrapped = [AnglePair::new(100.0, -176.0), AnglePair::new(60.0, -40.0)];
        assert_abs_diff_eq!(
            log_prior(&wrapped, &priors),
            expected - 14.0f64.powi(2) / 50.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn prior_matches_hand_summation_four_paths() {
        let priors: Vec<PathPrior> = [(115.0, 55.0), (100.0, 115.0), (50.0, 40.0), (50.0, 120.0)]
            .into_iter()
            .map(|(m, x)| PathPrior::new(m, 4.0, x, 4.0))
            .collect();
        let est = [
            AnglePair::new(117.5, 52.0),
            AnglePair::new(98.0, 119.0),
            AnglePair::new(51.0, 36.5),
            AnglePair::new(47.0, 121.0),
        ];
        let mut hand = 0.0;
        for (e, p) in est.iter().zip(&priors) {
            let a = (e.theta - p.mu) / 4.0;
            let b = (e.phi - p.xi) / 4.0;
            hand += -0.5 * a * a - 0.5 * b * b - (2.0 * PI * 16.0).ln();
        }
        assert_abs_diff_eq!(log_prior(&est, &priors), hand, epsilon = 1e-12);
    }

    #[test]
    fn single_path_pairs_trivially() {
        let mut scene = two_path_scene(0.01);
        scene.paths.truncate(1);
        let o = Orientation::identity();
        let meas = synthesize_scan(&scene, &o, 1);
        let sets = true_sets(&scene, &o, false);
        let r = map_pair(&meas, &sets, &o, &priors_of(&scene, 4.0), &scene.config).unwrap();
        assert_eq!(r.theta_perm, Permutation::identity(1));
        assert_eq!(r.xi_perm, Permutation::identity(1));
        assert!(r.certificate.unwrap().holds);
    }

    #[test]
    fn map_selects_truth_and_score_decomposes() {
        let scene = two_path_scene(0.0);
        let o = Orientation::new(5.0, 10.0, 0.0);
        let priors = priors_of(&scene, 4.0);
        for swap in [false, true] {
            let meas = synthesize_scan(&scene, &o, 0);
            let sets = true_sets(&scene, &o, swap);
            let r = map_pair(&meas, &sets, &o, &priors, &scene.config).unwrap();
            for (a, p) in r.aoas.iter().zip(&scene.paths) {
                assert_abs_diff_eq!(a.theta, p.angles0.theta, epsilon = 1e-6);
                assert_abs_diff_eq!(a.phi, p.angles0.phi, epsilon = 1e-6);
            }
            let ll = log_likelihood(&meas, &r.sfp_pairs, &scene.config).value;
            let lp = log_prior_for(&sets, &r.theta_perm, &r.xi_perm, &o, &priors).unwrap();
            assert_abs_diff_eq!(r.score, ll + lp, epsilon = 1e-9 * r.score.abs());
            let cert = r.certificate.unwrap();
            assert_eq!(cert.candidates, 4);
            assert!(cert.holds);
        }
    }

    /// Reference: evaluate every `(theta, xi)` directly.
    fn brute_force(
        meas: &ScanMeasurement,
        sets: &SfpSets,
        o: &Orientation,
        priors: &[PathPrior],
        cfg: &SystemConfig,
    ) -> (f64, Vec<(u64, u64)>) {
        let n = priors.len();
        let mut best = f64::NEG_INFINITY;
        let mut best_pairs = Vec::new();
        for theta in Permutation::all(n) {
            for xi in Permutation::all(n) {
                let Ok(lp) = log_prior_for(sets, &theta, &xi, o, priors) else {
                    continue;
                };
                let pairs = pair_sfps(sets, &theta, &xi);
                let s = log_likelihood(meas, &pairs, cfg).value + lp;
                if s > best {
                    best = s;
                    let mut key: Vec<(u64, u64)> =
                        pairs.iter().map(|p| (p.u.to_bits(), p.v.to_bits())).collect();
                    key.sort();
                    best_pairs = key;
                }
            }
        }
        (best, best_pairs)
    }

    #[test]
    fn collapsed_search_equals_double_search() {
        let mut rng = rng_from_seed(77);
        for trial in 0..12 {
            let n = 2 + trial % 3;
            let mut config = SystemConfig::paper_default().with_snr_db(0.0);
            config.num_positions = 16;
            let o = Orientation::new(rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0), 0.0);
            let paths: Vec<PathTruth> = (0..n)
                .map(|_| PathTruth {
                    angles0: AnglePair::new(rng.random_range(60.0..120.0), rng.random_range(40.0..140.0)),
                    tau: rng.random_range(0.0..200e-9),
                    upsilon: Complex64::from_polar(1.0, rng.random_range(0.0..6.28)),
                })
                .collect();
            let scene = Scene { paths, config };
            let meas = synthesize_scan(&scene, &o, trial as u64);
            // Perturbed estimates in arbitrary order.
            let mut sets = true_sets(&scene, &o, false);
            for x in sets.u_set.iter_mut().chain(sets.v_set.iter_mut()) {
                *x = (*x + rng.random_range(-0.02..0.02)).clamp(-0.7, 0.7);
            }
            sets.u_set.rotate_left(1);
            let priors: Vec<PathPrior> = scene
                .paths
                .iter()
                .map(|p| {
                    PathPrior::new(
                        p.angles0.theta + rng.random_range(-5.0..5.0),
                        6.0,
                        p.angles0.phi + rng.random_range(-5.0..5.0),
                        6.0,
                    )
                })
                .collect();
            let r = map_pair(&meas, &sets, &o, &priors, &scene.config).unwrap();
            let (best, best_pairs) = brute_force(&meas, &sets, &o, &priors, &scene.config);
            assert_abs_diff_eq!(r.score, best, epsilon = 1e-9 * best.abs());
            let mut got: Vec<(u64, u64)> =
                r.sfp_pairs.iter().map(|p| (p.u.to_bits(), p.v.to_bits())).collect();
            got.sort();
            assert_eq!(got, best_pairs);
            assert!(r.certificate.unwrap().holds);
        }
    }

    #[test]
    fn flat_priors_reduce_to_maximum_likelihood() {
        let scene = two_path_scene(0.05);
        let o = Orientation::identity();
        let meas = synthesize_scan(&scene, &o, 3);
        let sets = true_sets(&scene, &o, true);
        let flat: Vec<PathPrior> = priors_of(&scene, 1e6);
        let r = map_pair(&meas, &sets, &o, &flat, &scene.config).unwrap();
        let ml = Permutation::all(2)
            .into_iter()
            .max_by(|a, b| {
                let la = log_likelihood(&meas, &pair_sfps(&sets, &Permutation::identity(2), a), &scene.config).value;
                let lb = log_likelihood(&meas, &pair_sfps(&sets, &Permutation::identity(2), b), &scene.config).value;
                la.total_cmp(&lb)
            })
            .unwrap();
        let ml_pairs = pair_sfps(&sets, &Permutation::identity(2), &ml);
        let mut got = r.sfp_pairs.clone();
        got.sort_by(|a, b| a.u.total_cmp(&b.u));
        let mut want = ml_pairs;
        want.sort_by(|a, b| a.u.total_cmp(&b.u));
        assert_eq!(got, want);
    }

    #[test]
    fn infeasible_pairs_are_skipped() {
        let scene = two_path_scene(0.01);
        let o = Orientation::identity();
        let meas = synthesize_scan(&scene, &o, 0);
        let sets = SfpSets {
            u_set: vec![0.9, 0.1],
            v_set: vec![0.9, 0.1],
            grid: Vec::new(),
            x_spectrum: Vec::new(),
            z_spectrum: Vec::new(),
        };
        let r = map_pair(&meas, &sets, &o, &priors_of(&scene, 4.0), &scene.config).unwrap();
        assert!(r.sfp_pairs.iter().all(|p| p.u * p.u + p.v * p.v <= 1.0));

        let bad = SfpSets {
            u_set: vec![0.9, 0.8],
            v_set: vec![0.9, 0.8],
            ..sets
        };
        assert!(matches!(
            map_pair(&meas, &bad, &o, &priors_of(&scene, 4.0), &scene.config),
            Err(Error::NoValidPairing)
        ));
    }

    #[test]
    fn too_many_paths_rejected() {
        let scene = two_path_scene(0.01);
        let meas = synthesize_scan(&scene, &Orientation::identity(), 0);
        let sets = SfpSets {
            u_set: vec![0.0; 9],
            v_set: vec![0.0; 9],
            grid: Vec::new(),
            x_spectrum: Vec::new(),
            z_spectrum: Vec::new(),
        };
        let priors = vec![PathPrior::new(90.0, 1.0, 90.0, 1.0); 9];
        assert!(matches!(
            map_pair(&meas, &sets, &Orientation::identity(), &priors, &scene.config),
            Err(Error::SearchSpaceTooLarge { paths: 9, .. })
        ));
    }

    #[test]
    fn plate_frame_roundtrip_through_pairs() {
        let scene = two_path_scene(0.0);
        let o = Orientation::new(-12.0, 7.0, 30.0);
        let sets = true_sets(&scene, &o, false);
        let pairs = pair_sfps(&sets, &Permutation::identity(2), &Permutation::identity(2));
        for (p, t) in pairs.iter().zip(&scene.paths) {
            let local = to_plate_frame(&o, &unit_direction(t.angles0));
            assert_abs_diff_eq!(p.u, local.x(), epsilon = 1e-12);
        }
    }
}
