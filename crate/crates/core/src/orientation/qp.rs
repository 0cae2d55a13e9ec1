//! Primal active-set solver for small dense convex QPs
//! `min 0.5 z'Hz + g'z  s.t.  A z >= b`, started from a feasible point.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub z: DVector<f64>,
    /// One multiplier per row of `A`; zero for inactive rows.
    pub multipliers: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `z0` must satisfy `A z0 >= b`. `H` must be positive definite.
pub fn solve(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    z0: DVector<f64>,
) -> QpSolution {
    let n = h.nrows();
    let m = a.nrows();
    let mut z = z0;
    let mut working: Vec<usize> = Vec::new();
    let max_iter = 50 * (n + m).max(4);
    let scale = 1.0 + g.amax() + h.amax();

    for iter in 0..max_iter {
        let w = working.len();
        let mut kkt = DMatrix::<f64>::zeros(n + w, n + w);
        kkt.view_mut((0, 0), (n, n)).copy_from(h);
        for (r, &i) in working.iter().enumerate() {
            for j in 0..n {
                kkt[(j, n + r)] = -a[(i, j)];
                kkt[(n + r, j)] = a[(i, j)];
            }
        }
        let grad = h * &z + g;
        let mut rhs = DVector::<f64>::zeros(n + w);
        rhs.rows_mut(0, n).copy_from(&(-&grad));

        let sol = match kkt.full_piv_lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => {
                // Dependent working set: drop the newest constraint.
                working.pop();
                continue;
            }
        };
        let p = sol.rows(0, n).into_owned();
        let lambda = sol.rows(n, w).into_owned();

        if p.amax() <= 1e-13 * (1.0 + z.amax()) {
            let most_negative = lambda
                .iter()
                .enumerate()
                .filter(|(_, &l)| l < -1e-12 * scale)
                .min_by(|x, y| x.1.total_cmp(y.1));
            match most_negative {
                None => {
                    let mut multipliers = DVector::zeros(m);
                    for (r, &i) in working.iter().enumerate() {
                        multipliers[i] = lambda[r].max(0.0);
                    }
                    return QpSolution {
                        z,
                        multipliers,
                        iterations: iter + 1,
                        converged: true,
                    };
                }
                Some((r, _)) => {
                    working.remove(r);
                }
            }
            continue;
        }

        let mut step = 1.0;
        let mut blocking = None;
        for i in 0..m {
            if working.contains(&i) {
                continue;
            }
            let ap = a.row(i).dot(&p.transpose());
            if ap < -1e-14 {
                let slack = a.row(i).dot(&z.transpose()) - b[i];
                let ratio = (slack / -ap).max(0.0);
                if ratio < step {
                    step = ratio;
                    blocking = Some(i);
                }
            }
        }
        z += &p * step;
        if let Some(i) = blocking {
            working.push(i);
        }
    }

    QpSolution {
        multipliers: DVector::zeros(m),
        z,
        iterations: max_iter,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unconstrained_minimum_inside() {
        let h = DMatrix::identity(2, 2);
        let g = DVector::from_vec(vec![-1.0, -2.0]);
        let a = DMatrix::from_row_slice(1, 2, &[-1.0, -1.0]);
        let b = DVector::from_vec(vec![-10.0]);
        let s = solve(&h, &g, &a, &b, DVector::zeros(2));
        assert!(s.converged);
        assert_abs_diff_eq!(s.z[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.z[1], 2.0, epsilon = 1e-12);
        assert_eq!(s.multipliers[0], 0.0);
    }

    #[test]
    fn textbook_example() {
        // Nocedal & Wright example 16.4.
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0]));
        let g = DVector::from_vec(vec![-2.0, -5.0]);
        let a = DMatrix::from_row_slice(
            5,
            2,
            &[1.0, -2.0, -1.0, -2.0, -1.0, 2.0, 1.0, 0.0, 0.0, 1.0],
        );
        let b = DVector::from_vec(vec![-2.0, -6.0, -2.0, 0.0, 0.0]);
        let s = solve(&h, &g, &a, &b, DVector::from_vec(vec![2.0, 0.0]));
        assert!(s.converged);
        assert_abs_diff_eq!(s.z[0], 1.4, epsilon = 1e-10);
        assert_abs_diff_eq!(s.z[1], 1.7, epsilon = 1e-10);
        assert_abs_diff_eq!(s.multipliers[0], 0.8, epsilon = 1e-10);
    }
}
