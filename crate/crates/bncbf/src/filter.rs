//! The safety-filter QP: minimally modify the nominal input subject to
//! gradient rows for almost-active smooth leaves and dual-derivative rows
//! for almost-active distance leaves.
//!
//! Decision variables are the stacked agent inputs plus, per active distance
//! leaf, the rates of its dual multipliers. The dual rates carry no cost;
//! they exist so the affine derivative bound can certify the constraint.

use nalgebra::{DMatrix, DVector};

use crate::composition::ActiveLeaf;
use crate::distance::DerivativeBoundTerms;
use crate::dynamics::{ActuationMask, InputVector, VelocityTransform};
use crate::error::{FilterError, QpError};
use crate::qp::{DenseQp, QpSettings};

/// Per-agent data the assembler needs: the velocity transform at the current
/// pose, the actuation mask, and the input box.
#[derive(Debug, Clone)]
pub struct AgentChannel {
    pub transform: VelocityTransform,
    pub mask: ActuationMask,
    pub input_limit: f64,
}

/// An active smooth leaf: its sign in the composition and its gradients.
#[derive(Debug, Clone)]
pub struct SmoothRow {
    pub leaf: ActiveLeaf,
    pub gradients: Vec<(usize, [f64; 5])>,
}

/// An active distance leaf: its derivative-bound blocks plus the step the
/// distance solve was produced on.
#[derive(Debug, Clone)]
pub struct NonsmoothRow {
    pub leaf: ActiveLeaf,
    pub terms: DerivativeBoundTerms,
    pub cache_step: u64,
}

/// Filter parameters. `q` defaults to the identity of the stacked input
/// dimension; a custom weight must be symmetric positive definite.
#[derive(Debug, Clone)]
pub struct FilterParams {
    pub alpha_slope: f64,
    pub q: Option<DMatrix<f64>>,
    pub settings: QpSettings,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            alpha_slope: 0.2,
            q: None,
            settings: QpSettings::default(),
        }
    }
}

/// Assembled QP, ready to solve.
#[derive(Debug, Clone)]
pub struct FilterProblem {
    qp: DenseQp,
    dim_u: usize,
    lam_blocks: Vec<(usize, usize, usize)>,
    nominal: DVector<f64>,
    settings: QpSettings,
    pub h_g: f64,
}

/// Solved safe input with the dual-rate certificates.
#[derive(Debug, Clone)]
pub struct FilterSolution {
    pub inputs: Vec<InputVector>,
    pub stacked: DVector<f64>,
    pub lambda_rates: Vec<(DVector<f64>, DVector<f64>)>,
    pub objective: f64,
    pub deviation: f64,
    pub reduced_accuracy: bool,
}

/// Class-K right-hand side: alpha(h_g) with the linear slope.
fn alpha(slope: f64, h_g: f64) -> f64 {
    slope * h_g
}

/// Build the filter QP for one control step.
///
/// `current_step` must match the cache step of every nonsmooth row; results
/// computed on an earlier step are rejected.
#[allow(clippy::too_many_arguments)]
pub fn assemble(
    channels: &[AgentChannel],
    nominal: &[InputVector],
    h_g: f64,
    smooth_rows: &[SmoothRow],
    nonsmooth_rows: &[NonsmoothRow],
    params: &FilterParams,
    current_step: u64,
) -> Result<FilterProblem, FilterError> {
    let num_agents = channels.len();
    assert_eq!(nominal.len(), num_agents);
    let dim_u = 5 * num_agents;

    for row in nonsmooth_rows {
        if row.cache_step != current_step {
            return Err(FilterError::StaleCache {
                cache_step: row.cache_step,
                current_step,
            });
        }
    }

    let mut num_vars = dim_u;
    let mut lam_blocks = Vec::with_capacity(nonsmooth_rows.len());
    for row in nonsmooth_rows {
        let (ma, mb) = row.terms.num_faces();
        lam_blocks.push((num_vars, ma, mb));
        num_vars += ma + mb;
    }

    let mut qp = DenseQp::new(num_vars);

    // The dual rates are certificates, not controls: free variables with no
    // cost admit near-null directions of the stationarity rows, and at large
    // magnitude those harvest solver tolerance as fake derivative margin.
    // A tiny quadratic cost selects the minimum-norm certificate and a wide
    // box keeps any residual exploit below the constraint tolerances;
    // legitimate certificates sit far inside both.
    const RATE_REGULARIZATION: f64 = 1e-9;
    const RATE_BOX: f64 = 1e6;
    for idx in dim_u..num_vars {
        qp.add_quadratic(idx, idx, 2.0 * RATE_REGULARIZATION);
        let mut up = DVector::zeros(num_vars);
        up[idx] = 1.0;
        qp.push_ineq(up.clone(), RATE_BOX);
        up[idx] = -1.0;
        qp.push_ineq(up, RATE_BOX);
    }

    // Objective ||u - u_r||_Q^2.
    let nominal_stacked = DVector::from_fn(dim_u, |i, _| nominal[i / 5][i % 5]);
    match &params.q {
        None => {
            for i in 0..dim_u {
                qp.add_quadratic(i, i, 2.0);
                qp.add_linear(i, -2.0 * nominal_stacked[i]);
            }
        }
        Some(q) => {
            if q.nrows() != dim_u || q.ncols() != dim_u {
                return Err(FilterError::IndefiniteWeight);
            }
            let sym = (q + q.transpose()) * 0.5;
            if sym.clone().cholesky().is_none() {
                return Err(FilterError::IndefiniteWeight);
            }
            for i in 0..dim_u {
                for j in i..dim_u {
                    let s = sym[(i, j)];
                    if s != 0.0 {
                        qp.add_quadratic(i, j, if i == j { 2.0 * s } else { 2.0 * s });
                    }
                }
                qp.add_linear(i, -2.0 * sym.row(i).transpose().dot(&nominal_stacked));
            }
        }
    }

    let rhs = alpha(params.alpha_slope, h_g);

    // Input box and masked components.
    for (slot, ch) in channels.iter().enumerate() {
        for k in 0..5 {
            let idx = 5 * slot + k;
            if ch.mask.enabled[k] {
                let mut up = DVector::zeros(num_vars);
                up[idx] = 1.0;
                qp.push_ineq(up.clone(), ch.input_limit);
                up[idx] = -1.0;
                qp.push_ineq(up, ch.input_limit);
            } else {
                let mut row = DVector::zeros(num_vars);
                row[idx] = 1.0;
                qp.push_eq(row, 0.0);
            }
        }
    }

    // Smooth rows: <grad h, J nu> >= -alpha(h_g), with the effective sign.
    for row in smooth_rows {
        let sign = if row.leaf.negated { -1.0 } else { 1.0 };
        let mut coeffs = DVector::zeros(num_vars);
        for (slot, grad) in &row.gradients {
            let j = &channels[*slot].transform;
            for col in 0..5 {
                let mut acc = 0.0;
                for r in 0..5 {
                    acc += grad[r] * j[(r, col)];
                }
                coeffs[5 * slot + col] += sign * acc;
            }
        }
        // coeffs . u >= -rhs  ->  -coeffs . u <= rhs
        qp.push_ineq(-coeffs, rhs);
    }

    // Nonsmooth rows: derivative bound, differentiated stationarity, signs.
    for (row, (offset, ma, mb)) in nonsmooth_rows.iter().zip(&lam_blocks) {
        let terms = &row.terms;
        let mut bound = DVector::zeros(num_vars);
        for k in 0..*ma {
            bound[offset + k] = terms.lam_dot_a[k];
        }
        for k in 0..*mb {
            bound[offset + ma + k] = terms.lam_dot_b[k];
        }
        for (slot, coeff) in &terms.state_rate {
            let j = &channels[*slot].transform;
            for col in 0..5 {
                let mut acc = 0.0;
                for r in 0..5 {
                    acc += coeff[r] * j[(r, col)];
                }
                bound[5 * slot + col] += acc;
            }
        }
        qp.push_ineq(-bound, rhs);

        for r in 0..3 {
            let mut eq = DVector::zeros(num_vars);
            for k in 0..*ma {
                eq[offset + k] = terms.eq_lam_a[(r, k)];
            }
            for k in 0..*mb {
                eq[offset + ma + k] = terms.eq_lam_b[(r, k)];
            }
            for (slot, block) in &terms.eq_state {
                let j = &channels[*slot].transform;
                for col in 0..5 {
                    let mut acc = 0.0;
                    for rr in 0..5 {
                        acc += block[(r, rr)] * j[(rr, col)];
                    }
                    eq[5 * slot + col] += acc;
                }
            }
            qp.push_eq(eq, 0.0);
        }

        for &k in &terms.sign_a {
            let mut sr = DVector::zeros(num_vars);
            sr[offset + k] = -1.0;
            qp.push_ineq(sr, 0.0);
        }
        for &k in &terms.sign_b {
            let mut sr = DVector::zeros(num_vars);
            sr[offset + ma + k] = -1.0;
            qp.push_ineq(sr, 0.0);
        }
    }

    Ok(FilterProblem {
        qp,
        dim_u,
        lam_blocks,
        nominal: nominal_stacked,
        settings: params.settings,
        h_g,
    })
}

impl FilterProblem {
    /// Solve the assembled QP. A numerical failure is retried once with
    /// relaxed tolerances; infeasibility is passed through for the caller to
    /// turn into a safety-fault event.
    pub fn solve(&self) -> Result<FilterSolution, FilterError> {
        let sol = match self.qp.solve(&self.settings) {
            Ok(s) => s,
            Err(QpError::Numerical { .. }) => self.qp.solve(&QpSettings::relaxed())?,
            Err(e) => return Err(e.into()),
        };
        let stacked = DVector::from_iterator(self.dim_u, sol.x.iter().take(self.dim_u).copied());
        let num_agents = self.dim_u / 5;
        let inputs = (0..num_agents)
            .map(|a| InputVector::from_fn(|k, _| stacked[5 * a + k]))
            .collect();
        let lambda_rates = self
            .lam_blocks
            .iter()
            .map(|(offset, ma, mb)| {
                let la = DVector::from_fn(*ma, |k, _| sol.x[offset + k]);
                let lb = DVector::from_fn(*mb, |k, _| sol.x[offset + ma + k]);
                (la, lb)
            })
            .collect();
        let deviation = (&stacked - &self.nominal).norm();
        Ok(FilterSolution {
            inputs,
            stacked,
            lambda_rates,
            objective: sol.objective,
            deviation,
            reduced_accuracy: sol.reduced_accuracy,
        })
    }
}

/// One-step decrease report: checks h_g(next) against the discrete barrier
/// decay h_g(now) - alpha(h_g(now)) dt - tol. Logged by the engine, never
/// enforced.
#[derive(Debug, Clone, Copy)]
pub struct DecreaseReport {
    pub h_now: f64,
    pub h_next: f64,
    pub floor: f64,
    pub satisfied: bool,
}

pub fn verify_decrease(h_now: f64, h_next: f64, alpha_slope: f64, dt: f64, tol: f64) -> DecreaseReport {
    let floor = h_now - alpha(alpha_slope, h_now) * dt - tol;
    DecreaseReport {
        h_now,
        h_next,
        floor,
        satisfied: h_next >= floor,
    }
}
