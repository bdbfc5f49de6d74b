//! Dense convex QP/LP interface backed by an interior-point conic solver.
//!
//! Problems are assembled row-by-row in dense form (the problems here are
//! small: a handful of variables, tens of rows) and handed to Clarabel.
//! Dual multipliers are part of the contract: the distance layer consumes
//! them as Lagrange multiplier certificates.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::{DMatrix, DVector};

use crate::error::QpError;

/// Solver tolerances. Defaults follow the library-wide accuracy contract:
/// primal/dual feasibility 1e-8, relative gap 1e-9.
#[derive(Debug, Clone, Copy)]
pub struct QpSettings {
    pub tol_feas: f64,
    pub tol_gap_abs: f64,
    pub tol_gap_rel: f64,
    pub max_iter: u32,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            tol_feas: 1e-8,
            tol_gap_abs: 1e-9,
            tol_gap_rel: 1e-9,
            max_iter: 200,
        }
    }
}

impl QpSettings {
    /// Loosened settings for the one retry the filter is allowed.
    pub fn relaxed() -> Self {
        Self {
            tol_feas: 1e-6,
            tol_gap_abs: 1e-7,
            tol_gap_rel: 1e-7,
            max_iter: 500,
        }
    }
}

/// minimize 1/2 x' P x + q' x  subject to  E x = f,  G x <= h.
#[derive(Debug, Clone)]
pub struct DenseQp {
    num_vars: usize,
    p: DMatrix<f64>,
    q: DVector<f64>,
    eq_rows: Vec<(DVector<f64>, f64)>,
    ineq_rows: Vec<(DVector<f64>, f64)>,
}

/// Solution with dual certificates, split by row kind in insertion order.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub eq_duals: DVector<f64>,
    /// Nonnegative multipliers, one per inequality row.
    pub ineq_duals: DVector<f64>,
    pub objective: f64,
    pub iterations: u32,
    /// True when the solver only certified reduced accuracy.
    pub reduced_accuracy: bool,
}

impl DenseQp {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            p: DMatrix::zeros(num_vars, num_vars),
            q: DVector::zeros(num_vars),
            eq_rows: Vec::new(),
            ineq_rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Add s to the quadratic block at (i, j), keeping P symmetric.
    pub fn add_quadratic(&mut self, i: usize, j: usize, s: f64) {
        self.p[(i, j)] += s;
        if i != j {
            self.p[(j, i)] += s;
        }
    }

    pub fn add_linear(&mut self, i: usize, s: f64) {
        self.q[i] += s;
    }

    pub fn push_eq(&mut self, row: DVector<f64>, rhs: f64) {
        debug_assert_eq!(row.len(), self.num_vars);
        self.eq_rows.push((row, rhs));
    }

    /// Row a with  a' x <= rhs.
    pub fn push_ineq(&mut self, row: DVector<f64>, rhs: f64) {
        debug_assert_eq!(row.len(), self.num_vars);
        self.ineq_rows.push((row, rhs));
    }

    pub fn num_eq(&self) -> usize {
        self.eq_rows.len()
    }

    pub fn num_ineq(&self) -> usize {
        self.ineq_rows.len()
    }

    pub fn solve(&self, settings: &QpSettings) -> Result<QpSolution, QpError> {
        let n = self.num_vars;
        if n == 0 {
            return Err(QpError::BadProblem("no decision variables".into()));
        }
        let m_eq = self.eq_rows.len();
        let m_in = self.ineq_rows.len();

        let mut p_dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                p_dense[i][j] = self.p[(i, j)];
            }
        }
        let p_csc = CscMatrix::from(&p_dense);

        let mut a_dense = vec![vec![0.0; n]; m_eq + m_in];
        let mut b = Vec::with_capacity(m_eq + m_in);
        for (k, (row, rhs)) in self.eq_rows.iter().chain(self.ineq_rows.iter()).enumerate() {
            for j in 0..n {
                a_dense[k][j] = row[j];
            }
            b.push(*rhs);
        }
        let a_csc = CscMatrix::from(&a_dense);

        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        if m_eq > 0 {
            cones.push(SupportedConeT::ZeroConeT(m_eq));
        }
        if m_in > 0 {
            cones.push(SupportedConeT::NonnegativeConeT(m_in));
        }

        let clarabel_settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .tol_feas(settings.tol_feas)
            .tol_gap_abs(settings.tol_gap_abs)
            .tol_gap_rel(settings.tol_gap_rel)
            .max_iter(settings.max_iter)
            .build()
            .map_err(|e| QpError::BadProblem(e.to_string()))?;

        let q_vec: Vec<f64> = self.q.iter().copied().collect();
        let mut solver = DefaultSolver::new(&p_csc, &q_vec, &a_csc, &b, &cones, clarabel_settings)
            .map_err(|e| QpError::BadProblem(format!("{e:?}")))?;
        solver.solve();

        let status = solver.solution.status;
        let reduced = match status {
            SolverStatus::Solved => false,
            SolverStatus::AlmostSolved => true,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                return Err(QpError::Infeasible)
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                return Err(QpError::Unbounded)
            }
            other => {
                return Err(QpError::Numerical {
                    status: format!("{other:?}"),
                })
            }
        };

        let x = DVector::from_iterator(n, solver.solution.x.iter().copied());
        let z = &solver.solution.z;
        let eq_duals = DVector::from_iterator(m_eq, z[..m_eq].iter().copied());
        let ineq_duals = DVector::from_iterator(m_in, z[m_eq..].iter().copied());

        Ok(QpSolution {
            x,
            eq_duals,
            ineq_duals,
            objective: solver.solution.obj_val,
            iterations: solver.info.iterations,
            reduced_accuracy: reduced,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn box_constrained_projection() {
        // min ||x - (2, -3)||^2 over [-1, 1]^2 -> (1, -1)
        let mut qp = DenseQp::new(2);
        qp.add_quadratic(0, 0, 2.0);
        qp.add_quadratic(1, 1, 2.0);
        qp.add_linear(0, -4.0);
        qp.add_linear(1, 6.0);
        for i in 0..2 {
            let mut up = DVector::zeros(2);
            up[i] = 1.0;
            qp.push_ineq(up.clone(), 1.0);
            qp.push_ineq(-up, 1.0);
        }
        let sol = qp.solve(&QpSettings::default()).unwrap();
        assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(sol.x[1], -1.0, epsilon = 1e-7);
        assert!(!sol.reduced_accuracy);
    }

    #[test]
    fn equality_constrained_minimum() {
        // min x^2 + y^2 s.t. x + y = 2 -> (1, 1), eq dual = -2 or 2 by convention
        let mut qp = DenseQp::new(2);
        qp.add_quadratic(0, 0, 2.0);
        qp.add_quadratic(1, 1, 2.0);
        qp.push_eq(DVector::from_vec(vec![1.0, 1.0]), 2.0);
        let sol = qp.solve(&QpSettings::default()).unwrap();
        assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.x[1], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.eq_duals[0].abs(), 2.0, epsilon = 1e-6);
    }

    #[test]
    fn infeasible_reported() {
        // x <= -1 and -x <= -1 cannot both hold.
        let mut qp = DenseQp::new(1);
        qp.add_quadratic(0, 0, 2.0);
        qp.push_ineq(DVector::from_vec(vec![1.0]), -1.0);
        qp.push_ineq(DVector::from_vec(vec![-1.0]), -1.0);
        match qp.solve(&QpSettings::default()) {
            Err(QpError::Infeasible) => {}
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn unbounded_lp_reported() {
        // min -x with x >= 0 only.
        let mut qp = DenseQp::new(1);
        qp.add_linear(0, -1.0);
        qp.push_ineq(DVector::from_vec(vec![-1.0]), 0.0);
        match qp.solve(&QpSettings::default()) {
            Err(QpError::Unbounded) => {}
            other => panic!("expected unbounded, got {other:?}"),
        }
    }

    #[test]
    fn ineq_duals_certify_active_rows() {
        // min (x-3)^2 s.t. x <= 1: active, dual = 2*(3-1) = 4.
        let mut qp = DenseQp::new(1);
        qp.add_quadratic(0, 0, 2.0);
        qp.add_linear(0, -6.0);
        qp.push_ineq(DVector::from_vec(vec![1.0]), 1.0);
        let sol = qp.solve(&QpSettings::default()).unwrap();
        assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(sol.ineq_duals[0], 4.0, epsilon = 1e-6);
    }
}
