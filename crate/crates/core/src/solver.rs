//! Least squares over the probability simplex:
//! `min ‖C·q − p‖² subject to q ≥ 0, Σq = 1`.
//!
//! Accelerated projected gradient with monotone restarts, started at the
//! uniform vector. Whenever the support of the iterate changes, the
//! equality-constrained problem restricted to that support is solved exactly
//! and accepted if it stays feasible and does not increase the objective.
//! Convergence is certified by the Frank–Wolfe gap
//! `∇f(q)·q − min_i ∇f(q)_i`, an upper bound on `f(q) − f*`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Record the objective of every accepted iterate.
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    pub q: Vec<f64>,
    pub objective: f64,
    /// Frank–Wolfe gap at `q`.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(y: &[f64]) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|&v| (v - theta).max(0.0)).collect()
}

struct Problem<'a> {
    c: &'a [f64],
    p: &'a [f64],
    m: usize,
    k: usize,
}

impl Problem<'_> {
    fn residual(&self, q: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|j| {
                let row = &self.c[j * self.k..(j + 1) * self.k];
                row.iter().zip(q).map(|(a, b)| a * b).sum::<f64>() - self.p[j]
            })
            .collect()
    }

    fn objective(&self, q: &[f64]) -> f64 {
        self.residual(q).iter().map(|r| r * r).sum()
    }

    fn gradient(&self, q: &[f64]) -> Vec<f64> {
        let r = self.residual(q);
        (0..self.k)
            .map(|i| 2.0 * (0..self.m).map(|j| self.c[j * self.k + i] * r[j]).sum::<f64>())
            .collect()
    }

    fn gap(&self, q: &[f64]) -> f64 {
        let g = self.gradient(q);
        let inner: f64 = g.iter().zip(q).map(|(a, b)| a * b).sum();
        let min = g.iter().copied().fold(f64::INFINITY, f64::min);
        (inner - min).max(0.0)
    }

    /// Exact minimizer restricted to `support` with the sum constraint, when
    /// the KKT system is nonsingular.
    fn solve_on_support(&self, support: &[usize]) -> Option<Vec<f64>> {
        let s = support.len();
        let mut kkt = DMatrix::<f64>::zeros(s + 1, s + 1);
        let mut rhs = DVector::<f64>::zeros(s + 1);
        for (a, &ia) in support.iter().enumerate() {
            for (b, &ib) in support.iter().enumerate() {
                kkt[(a, b)] = 2.0 * (0..self.m).map(|j| self.c[j * self.k + ia] * self.c[j * self.k + ib]).sum::<f64>();
            }
            rhs[a] = 2.0 * (0..self.m).map(|j| self.c[j * self.k + ia] * self.p[j]).sum::<f64>();
            kkt[(a, s)] = 1.0;
            kkt[(s, a)] = 1.0;
        }
        rhs[s] = 1.0;
        let scale = kkt.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let lu = kkt.clone().lu();
        let sol = lu.solve(&rhs)?;
        // reject near-singular systems (collinear columns on the support)
        let check = &kkt * &sol - &rhs;
        if !sol.iter().all(|x| x.is_finite()) || check.amax() > 1e-10 * scale.max(1.0) {
            return None;
        }
        let mut q = vec![0.0; self.k];
        for (a, &i) in support.iter().enumerate() {
            q[i] = sol[a];
        }
        Some(q)
    }
}

fn clamp_renormalize(q: &mut [f64]) {
    for x in q.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let s: f64 = q.iter().sum();
    if s > 0.0 {
        for x in q.iter_mut() {
            *x /= s;
        }
    }
}

/// Solves the simplex-constrained least squares problem for a row-major
/// `M × K` matrix `c` and observation `p` of length `M`.
pub fn solve_simplex_lsq(c: &[f64], k: usize, p: &[f64], opts: SolverOptions) -> Result<SimplexSolution> {
    if k == 0 {
        return Err(Error::Parameter("simplex dimension must be positive".into()));
    }
    let m = p.len();
    if c.len() != m * k {
        return Err(Error::Dimension {
            expected: m * k,
            got: c.len(),
        });
    }
    if c.iter().chain(p).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("least squares inputs".into()));
    }
    let prob = Problem { c, p, m, k };

    // Lipschitz constant of the gradient: 2·λ_max(CᵀC).
    let cmat = DMatrix::from_row_slice(m, k, c);
    let gram = cmat.transpose() * &cmat;
    let lmax = SymmetricEigen::new(gram).eigenvalues.iter().copied().fold(0.0f64, f64::max);
    let lipschitz = 2.0 * lmax;

    let mut q = vec![1.0 / k as f64; k];
    let mut f = prob.objective(&q);
    let mut trace = Vec::new();
    if opts.trace {
        trace.push(f);
    }
    if lipschitz <= 0.0 || k == 1 {
        let gap = prob.gap(&q);
        return Ok(SimplexSolution {
            q,
            objective: f,
            gap,
            iterations: 0,
            converged: true,
            trace,
        });
    }
    let step = 1.0 / lipschitz;

    let mut prev = q.clone();
    let mut t = 1.0f64;
    let mut polished_support: Option<Vec<usize>> = None;
    let mut iterations = 0;
    let mut converged = false;
    let mut gap = prob.gap(&q);

    while iterations < opts.max_iter {
        if gap <= opts.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        let y: Vec<f64> = q.iter().zip(&prev).map(|(a, b)| a + beta * (a - b)).collect();
        let gy = prob.gradient(&y);
        let mut z = project_to_simplex(&y.iter().zip(&gy).map(|(a, g)| a - step * g).collect::<Vec<_>>());
        let mut fz = prob.objective(&z);
        t = t_next;
        if fz > f {
            // momentum overshot: restart from a plain gradient step
            let gq = prob.gradient(&q);
            z = project_to_simplex(&q.iter().zip(&gq).map(|(a, g)| a - step * g).collect::<Vec<_>>());
            fz = prob.objective(&z);
            t = 1.0;
            if fz > f {
                z.clone_from(&q);
                fz = f;
            }
        }
        prev = std::mem::replace(&mut q, z);
        f = fz;

        let support: Vec<usize> = (0..k).filter(|&i| q[i] > 0.0).collect();
        if polished_support.as_ref() != Some(&support) {
            if let Some(mut exact) = prob.solve_on_support(&support) {
                if exact.iter().all(|&x| x >= -1e-12) {
                    clamp_renormalize(&mut exact);
                    let fe = prob.objective(&exact);
                    if fe <= f {
                        prev.clone_from(&exact);
                        q = exact;
                        f = fe;
                        t = 1.0;
                    }
                }
            }
            polished_support = Some(support);
        }
        if opts.trace {
            debug_assert!(f <= *trace.last().unwrap());
            trace.push(f);
        }
        gap = prob.gap(&q);
    }
    if !converged && gap <= opts.tol {
        converged = true;
    }

    clamp_renormalize(&mut q);
    let objective = prob.objective(&q);
    Ok(SimplexSolution {
        q,
        objective,
        gap,
        iterations,
        converged,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn solve(c: &[f64], k: usize, p: &[f64]) -> SimplexSolution {
        solve_simplex_lsq(c, k, p, SolverOptions::default()).unwrap()
    }

    #[test]
    fn identity_confusion() {
        let s = solve(&[1.0, 0.0, 0.0, 1.0], 2, &[0.3, 0.7]);
        assert_abs_diff_eq!(s.q[0], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(s.q[1], 0.7, epsilon = 1e-12);
        assert!(s.converged);
    }

    #[test]
    fn interior_solution() {
        let s = solve(&[0.9, 0.2, 0.1, 0.8], 2, &[0.55, 0.45]);
        assert_abs_diff_eq!(s.q[0], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(s.q[1], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn boundary_solution() {
        let s = solve(&[1.0, 0.5, 0.0, 0.5], 2, &[0.0, 1.0]);
        assert_abs_diff_eq!(s.q[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.q[1], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.objective, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn errors() {
        let o = SolverOptions::default();
        assert!(solve_simplex_lsq(&[], 0, &[], o).is_err());
        assert!(solve_simplex_lsq(&[1.0, f64::NAN], 2, &[1.0], o).is_err());
        assert!(solve_simplex_lsq(&[1.0, 0.0], 2, &[f64::INFINITY], o).is_err());
        assert!(solve_simplex_lsq(&[1.0, 0.0, 1.0], 2, &[1.0], o).is_err());
    }

    #[test]
    fn collinear_columns_still_reach_optimum() {
        // columns 1 and 2 identical
        let c = [0.9, 0.1, 0.1, 0.1, 0.9, 0.9];
        let s = solve(&c, 3, &[0.5, 0.5]);
        assert!(s.objective < 1e-12);
        let again = solve(&c, 3, &[0.5, 0.5]);
        assert_eq!(s.q, again.q);
    }

    #[test]
    fn trace_is_monotone() {
        let c = [0.7, 0.2, 0.1, 0.2, 0.6, 0.3, 0.1, 0.2, 0.6];
        let opts = SolverOptions {
            trace: true,
            ..SolverOptions::default()
        };
        let s = solve_simplex_lsq(&c, 3, &[0.9, 0.05, 0.05], opts).unwrap();
        assert!(s.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(!s.trace.is_empty());
    }

    #[test]
    fn projection() {
        assert_eq!(project_to_simplex(&[0.5, 0.5]), vec![0.5, 0.5]);
        assert_eq!(project_to_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let q = project_to_simplex(&[0.2, 0.2, 0.2]);
        for x in q {
            assert_abs_diff_eq!(x, 1.0 / 3.0, epsilon = 1e-15);
        }
    }
}
