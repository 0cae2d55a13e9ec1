//! Line-search SQP for small smooth problems `min f(x) s.t. c_i(x) >= 0`.
//!
//! Each iteration solves an elastic QP built from a damped-BFGS model of the
//! Lagrangian and the linearised constraints, then backtracks on an l1 merit
//! function. Gradients are central finite differences.

use nalgebra::{DMatrix, DVector};

use super::qp;

#[derive(Clone, Debug)]
pub struct SqpOptions {
    pub max_iterations: usize,
    /// Central-difference step.
    pub fd_step: f64,
    /// Bound on each component of a step.
    pub max_step: f64,
    pub step_tolerance: f64,
    pub feasibility_tolerance: f64,
    /// Weight of the elastic slack that keeps every QP feasible.
    pub elastic_penalty: f64,
}

impl Default for SqpOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            fd_step: 1e-5,
            max_step: 0.5,
            step_tolerance: 1e-10,
            feasibility_tolerance: 1e-9,
            elastic_penalty: 1e4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SqpOutcome {
    pub x: Vec<f64>,
    pub objective: f64,
    pub constraints: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

struct Linearisation {
    f: f64,
    c: Vec<f64>,
    grad: DVector<f64>,
    jac: DMatrix<f64>,
}

fn linearise<F, C>(f: &F, c: &C, x: &[f64], fx: f64, cx: Vec<f64>, h: f64) -> Linearisation
where
    F: Fn(&[f64]) -> f64,
    C: Fn(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let m = cx.len();
    let mut grad = DVector::zeros(n);
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        xp[j] = x[j] + h;
        let (fp, cp) = (f(&xp), c(&xp));
        xp[j] = x[j] - h;
        let (fm, cm) = (f(&xp), c(&xp));
        xp[j] = x[j];
        grad[j] = (fp - fm) / (2.0 * h);
        for i in 0..m {
            jac[(i, j)] = (cp[i] - cm[i]) / (2.0 * h);
        }
    }
    Linearisation {
        f: fx,
        c: cx,
        grad,
        jac,
    }
}

fn violation(c: &[f64]) -> f64 {
    c.iter().map(|&v| (-v).max(0.0)).sum()
}

pub fn minimize<F, C>(f: F, c: C, x0: &[f64], opts: &SqpOptions) -> SqpOutcome
where
    F: Fn(&[f64]) -> f64,
    C: Fn(&[f64]) -> Vec<f64>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut lin = linearise(&f, &c, &x, f(&x), c(&x), opts.fd_step);
    let m = lin.c.len();
    let mut hess = DMatrix::<f64>::identity(n, n);
    let mut merit_weight = 1.0;
    let mut converged = false;
    let mut iterations = 0;

    // QP in (p, t): rows J p + t >= -c, t >= 0, |p_j| <= max_step.
    let rows = m + 1 + 2 * n;
    for iter in 0..opts.max_iterations {
        iterations = iter + 1;

        let mut qh = DMatrix::<f64>::zeros(n + 1, n + 1);
        qh.view_mut((0, 0), (n, n)).copy_from(&hess);
        qh[(n, n)] = 1e-8;
        let mut qg = DVector::<f64>::zeros(n + 1);
        qg.rows_mut(0, n).copy_from(&lin.grad);
        qg[n] = opts.elastic_penalty;
        let mut qa = DMatrix::<f64>::zeros(rows, n + 1);
        let mut qb = DVector::<f64>::zeros(rows);
        for i in 0..m {
            for j in 0..n {
                qa[(i, j)] = lin.jac[(i, j)];
            }
            qa[(i, n)] = 1.0;
            qb[i] = -lin.c[i];
        }
        qa[(m, n)] = 1.0;
        for j in 0..n {
            qa[(m + 1 + 2 * j, j)] = 1.0;
            qb[m + 1 + 2 * j] = -opts.max_step;
            qa[(m + 2 + 2 * j, j)] = -1.0;
            qb[m + 2 + 2 * j] = -opts.max_step;
        }
        let mut z0 = DVector::<f64>::zeros(n + 1);
        z0[n] = lin.c.iter().fold(0.0f64, |acc, &v| acc.max(-v));

        let sol = qp::solve(&qh, &qg, &qa, &qb, z0);
        let p = sol.z.rows(0, n).into_owned();
        let lambda = sol.multipliers.rows(0, m).into_owned();

        let viol = violation(&lin.c);
        if p.amax() < opts.step_tolerance && viol <= opts.feasibility_tolerance * m as f64 {
            converged = true;
            break;
        }

        merit_weight = f64::max(merit_weight, 1.5 * lambda.amax() + 1e-3);
        let lin_c: Vec<f64> = (0..m)
            .map(|i| lin.c[i] + lin.jac.row(i).dot(&p.transpose()))
            .collect();
        let slope = lin.grad.dot(&p) + merit_weight * (violation(&lin_c) - viol);
        let merit0 = lin.f + merit_weight * viol;

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(p.iter()).map(|(a, b)| a + alpha * b).collect();
            let ft = f(&trial);
            let ct = c(&trial);
            let merit = ft + merit_weight * violation(&ct);
            if merit.is_finite() && merit <= merit0 + 1e-4 * alpha * slope.min(0.0) {
                accepted = Some((trial, ft, ct));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new, c_new)) = accepted else {
            // No progress along the QP direction: treat as stationary.
            converged = viol <= opts.feasibility_tolerance * m as f64;
            break;
        };

        let new_lin = linearise(&f, &c, &x_new, f_new, c_new, opts.fd_step);
        let s = DVector::from_iterator(n, x_new.iter().zip(&x).map(|(a, b)| a - b));
        let grad_lag_old = &lin.grad - lin.jac.transpose() * &lambda;
        let grad_lag_new = &new_lin.grad - new_lin.jac.transpose() * &lambda;
        let y = grad_lag_new - grad_lag_old;
        damped_bfgs(&mut hess, &s, &y);

        let moved = s.amax();
        x = x_new;
        lin = new_lin;
        if moved < opts.step_tolerance * 1e-2 {
            converged = violation(&lin.c) <= opts.feasibility_tolerance * m as f64;
            break;
        }
    }

    SqpOutcome {
        objective: lin.f,
        constraints: lin.c,
        x,
        iterations,
        converged,
    }
}

/// Powell-damped BFGS update keeping `hess` positive definite.
fn damped_bfgs(hess: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    let bs = &*hess * s;
    let sbs = s.dot(&bs);
    if sbs <= 1e-300 {
        return;
    }
    let sy = s.dot(y);
    let theta = if sy >= 0.2 * sbs {
        1.0
    } else {
        0.8 * sbs / (sbs - sy)
    };
    let r = y * theta + &bs * (1.0 - theta);
    let sr = s.dot(&r);
    if sr <= 1e-300 {
        return;
    }
    *hess -= &bs * bs.transpose() / sbs;
    *hess += &r * r.transpose() / sr;
}
