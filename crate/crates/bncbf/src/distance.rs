//! Minimum distance between convex polytopes with dual-multiplier
//! certificates, and the dual-based lower bound on the distance derivative
//! used by the safety filter.
//!
//! The primal solve is the smooth squared-distance QP; the reported value is
//! its square root minus the safety offset. Multipliers are rescaled from the
//! squared problem to the distance normalization (divide by twice the
//! distance), under which the dual objective -lambda_a.b_a - lambda_b.b_b
//! equals the distance itself and the derivative bound lands in the same
//! units as the barrier value. The quadratic dual-rate blocks then carry a
//! weight of twice the distance; evaluated along the true dual trajectory
//! they cancel, and the bound reproduces the derivative of the distance.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{DistanceError, QpError};
use crate::geometry::{BodyJacobian, Polytope, Pose, PolytopeTemplate};
use crate::qp::{DenseQp, QpSettings};

/// Distance below which two bodies are treated as touching; dual rescaling
/// is skipped there (multipliers of the squared problem vanish).
pub const TOUCHING_TOL: f64 = 1e-9;

/// Outcome of a polytope minimum-distance solve.
#[derive(Debug, Clone)]
pub struct DistanceResult {
    /// Barrier value: distance minus offset. Negative on overlap.
    pub h: f64,
    /// Offset subtracted from the distance (safe distance).
    pub offset: f64,
    /// Raw minimum distance between the bodies.
    pub distance: f64,
    /// Closest point on body a.
    pub witness_a: Vector3<f64>,
    /// Closest point on body b.
    pub witness_b: Vector3<f64>,
    /// Distance-normalized multipliers, one per face of body a.
    pub lambda_a: DVector<f64>,
    /// Distance-normalized multipliers, one per face of body b.
    pub lambda_b: DVector<f64>,
}

impl DistanceResult {
    /// Index pairs of almost-inactive hyperplanes: both multipliers <= eps2.
    pub fn active_dual_set(&self, eps2: f64) -> Vec<(usize, usize)> {
        active_dual_set(self, eps2)
    }
}

/// K^eps2: all (k_a, k_b) with lambda_a[k_a] <= eps2 and lambda_b[k_b] <= eps2.
pub fn active_dual_set(result: &DistanceResult, eps2: f64) -> Vec<(usize, usize)> {
    let low_a: Vec<usize> = (0..result.lambda_a.len())
        .filter(|&k| result.lambda_a[k] <= eps2)
        .collect();
    let low_b: Vec<usize> = (0..result.lambda_b.len())
        .filter(|&k| result.lambda_b[k] <= eps2)
        .collect();
    let mut pairs = Vec::with_capacity(low_a.len() * low_b.len());
    for &ka in &low_a {
        for &kb in &low_b {
            pairs.push((ka, kb));
        }
    }
    pairs
}

/// Minimum distance between two polytopes, offset by a safe distance.
///
/// Overlapping bodies return h = -offset with witnesses in the intersection;
/// that is a valid result, not an error.
pub fn min_distance(
    pa: &Polytope,
    pb: &Polytope,
    offset: f64,
) -> Result<DistanceResult, DistanceError> {
    let ma = pa.num_faces();
    let mb = pb.num_faces();
    // The solver sees row-normalized half-spaces (the corridor rows carry a
    // mu L factor that otherwise wrecks the conditioning); multipliers are
    // rescaled back to the caller's row normalization afterwards.
    let row_scale = |m: &DMatrix<f64>, i: usize| -> f64 {
        (m[(i, 0)].powi(2) + m[(i, 1)].powi(2) + m[(i, 2)].powi(2))
            .sqrt()
            .max(1e-12)
    };
    let mut qp = DenseQp::new(6);
    // 1/2 x' P x = ||p - p'||^2
    for k in 0..3 {
        qp.add_quadratic(k, k, 2.0);
        qp.add_quadratic(3 + k, 3 + k, 2.0);
        qp.add_quadratic(k, 3 + k, -2.0);
    }
    let mut scales_a = Vec::with_capacity(ma);
    for i in 0..ma {
        let s = row_scale(pa.matrix(), i);
        scales_a.push(s);
        let mut row = DVector::zeros(6);
        for c in 0..3 {
            row[c] = pa.matrix()[(i, c)] / s;
        }
        qp.push_ineq(row, pa.offsets()[i] / s);
    }
    let mut scales_b = Vec::with_capacity(mb);
    for i in 0..mb {
        let s = row_scale(pb.matrix(), i);
        scales_b.push(s);
        let mut row = DVector::zeros(6);
        for c in 0..3 {
            row[3 + c] = pb.matrix()[(i, c)] / s;
        }
        qp.push_ineq(row, pb.offsets()[i] / s);
    }
    // Touching or sliver configurations can stall the interior point at the
    // default tolerances; one relaxed retry resolves them.
    let sol = match qp.solve(&QpSettings::default()) {
        Ok(s) => s,
        Err(QpError::Numerical { .. }) => qp.solve(&QpSettings::relaxed())?,
        Err(e) => return Err(e.into()),
    };

    let witness_a = Vector3::new(sol.x[0], sol.x[1], sol.x[2]);
    let witness_b = Vector3::new(sol.x[3], sol.x[4], sol.x[5]);
    let z = witness_a - witness_b;
    let distance = z.norm();

    let mut lam_a = DVector::from_fn(ma, |i, _| sol.ineq_duals[i] / scales_a[i]);
    let mut lam_b = DVector::from_fn(mb, |i, _| sol.ineq_duals[ma + i] / scales_b[i]);
    polish_duals(pa.matrix(), &mut lam_a, &(-2.0 * z));
    polish_duals(pb.matrix(), &mut lam_b, &(2.0 * z));

    if distance > TOUCHING_TOL {
        lam_a /= 2.0 * distance;
        lam_b /= 2.0 * distance;
    }

    Ok(DistanceResult {
        h: distance - offset,
        offset,
        distance,
        witness_a,
        witness_b,
        lambda_a: lam_a,
        lambda_b: lam_b,
    })
}

/// Refine solver multipliers against the exact stationarity target
/// A_active' lambda = target, zeroing the inactive entries. Falls back to the
/// raw multipliers whenever refinement does not strictly help.
fn polish_duals(a: &DMatrix<f64>, lam: &mut DVector<f64>, target: &Vector3<f64>) {
    for v in lam.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let lam_max = lam.max();
    let thresh = 1e-7 * lam_max.max(1.0);
    let act: Vec<usize> = (0..lam.len()).filter(|&i| lam[i] > thresh).collect();
    if act.is_empty() {
        return;
    }
    let mut at = DMatrix::zeros(3, act.len());
    for (c, &i) in act.iter().enumerate() {
        for r in 0..3 {
            at[(r, c)] = a[(i, r)];
        }
    }
    let old_res = {
        let cur = DVector::from_iterator(act.len(), act.iter().map(|&i| lam[i]));
        (&at * cur - target).norm()
    };
    let svd = at.clone().svd(true, true);
    let rhs = DVector::from_column_slice(target.as_slice());
    if let Ok(refined) = svd.solve(&rhs, 1e-12) {
        if refined.iter().all(|&v| v >= -1e-9) {
            let new_res = (&at * &refined - &rhs).norm();
            if new_res <= old_res {
                lam.fill(0.0);
                for (c, &i) in act.iter().enumerate() {
                    lam[i] = refined[c].max(0.0);
                }
            }
        }
    }
}

/// A polytope whose half-spaces depend on agent poses. `owners` lists, per
/// involved agent slot, the derivative of (A, b) in that agent's pose.
/// Static obstacles have no owners.
#[derive(Debug, Clone)]
pub struct MovingBody {
    pub poly: Polytope,
    pub owners: Vec<(usize, BodyJacobian)>,
}

impl MovingBody {
    pub fn fixed(poly: Polytope) -> Self {
        Self {
            poly,
            owners: Vec::new(),
        }
    }

    pub fn from_template(
        template: &PolytopeTemplate,
        pose: &Pose,
        agent_slot: usize,
    ) -> Result<Self, DistanceError> {
        let poly = template.instantiate(pose).map_err(DistanceError::from)?;
        let jac = template.pose_jacobian(pose).map_err(DistanceError::from)?;
        Ok(Self {
            poly,
            owners: vec![(agent_slot, jac)],
        })
    }
}

/// Affine coefficient blocks of the dual derivative bound for one distance
/// constraint: the bound objective as a function of the dual rates and the
/// involved agents' pose rates, the differentiated stationarity equalities,
/// and the sign-constrained dual-rate index sets.
#[derive(Debug, Clone)]
pub struct DerivativeBoundTerms {
    /// Objective coefficient of each dual rate on body a.
    pub lam_dot_a: DVector<f64>,
    /// Objective coefficient of each dual rate on body b.
    pub lam_dot_b: DVector<f64>,
    /// Objective coefficient of agent pose rates, keyed by agent slot.
    pub state_rate: Vec<(usize, [f64; 5])>,
    /// Equality rows (3): coefficients of dual rates on body a (3 x m_a).
    pub eq_lam_a: DMatrix<f64>,
    /// Equality rows (3): coefficients of dual rates on body b (3 x m_b).
    pub eq_lam_b: DMatrix<f64>,
    /// Equality rows: coefficients of agent pose rates (3 x 5 per agent slot).
    pub eq_state: Vec<(usize, DMatrix<f64>)>,
    /// Dual-rate indices on body a that must stay nonnegative.
    pub sign_a: Vec<usize>,
    /// Dual-rate indices on body b that must stay nonnegative.
    pub sign_b: Vec<usize>,
    faces_a: usize,
    faces_b: usize,
}

/// Assemble the derivative-bound blocks at the current poses and multipliers.
///
/// `eps2` selects the almost-active hyperplane pairs whose dual rates are
/// sign-constrained. For the driftless kinematic model every coefficient is
/// exactly zero at zero pose rate, so zero input and zero dual rates are
/// always feasible for the filter.
pub fn derivative_bound_terms(
    body_a: &MovingBody,
    body_b: &MovingBody,
    result: &DistanceResult,
    eps2: f64,
) -> DerivativeBoundTerms {
    let a_mat = body_a.poly.matrix();
    let b_mat = body_b.poly.matrix();
    let ma = body_a.poly.num_faces();
    let mb = body_b.poly.num_faces();
    let lam_a = &result.lambda_a;
    let lam_b = &result.lambda_b;
    let w = 2.0 * result.distance;

    // d(bound)/d(lam_dot_a) = -w/2 A_a A_a' lam_a - b_a; on body b only -b_b.
    let lam_a_a = a_mat.transpose() * lam_a; // A' lam, 3-vector
    let lam_dot_a = -0.5 * w * (a_mat * &lam_a_a) - body_a.poly.offsets();
    let lam_dot_b = -body_b.poly.offsets().clone();

    let mut state_rate: BTreeMap<usize, [f64; 5]> = BTreeMap::new();
    let mut eq_state: BTreeMap<usize, DMatrix<f64>> = BTreeMap::new();

    for (slot, jac) in &body_a.owners {
        let entry = state_rate.entry(*slot).or_insert([0.0; 5]);
        let eq_entry = eq_state
            .entry(*slot)
            .or_insert_with(|| DMatrix::zeros(3, 5));
        for c in 0..5 {
            let da = &jac.d_a[c];
            // -w/2 lam_a A_a dA_a' lam_a - lam_a . db_a
            let quad = (da.transpose() * lam_a).dot(&lam_a_a);
            entry[c] += -0.5 * w * quad - lam_a.dot(&jac.d_b[c]);
            let contrib = da.transpose() * lam_a;
            for r in 0..3 {
                eq_entry[(r, c)] += contrib[r];
            }
        }
    }
    for (slot, jac) in &body_b.owners {
        let entry = state_rate.entry(*slot).or_insert([0.0; 5]);
        let eq_entry = eq_state
            .entry(*slot)
            .or_insert_with(|| DMatrix::zeros(3, 5));
        for c in 0..5 {
            entry[c] += -lam_b.dot(&jac.d_b[c]);
            let contrib = jac.d_a[c].transpose() * lam_b;
            for r in 0..3 {
                eq_entry[(r, c)] += contrib[r];
            }
        }
    }

    let pairs = active_dual_set(result, eps2);
    let mut sign_a: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let mut sign_b: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    sign_a.sort_unstable();
    sign_a.dedup();
    sign_b.sort_unstable();
    sign_b.dedup();

    DerivativeBoundTerms {
        lam_dot_a,
        lam_dot_b,
        state_rate: state_rate.into_iter().collect(),
        eq_lam_a: a_mat.transpose().clone_owned(),
        eq_lam_b: b_mat.transpose().clone_owned(),
        eq_state: eq_state.into_iter().collect(),
        sign_a,
        sign_b,
        faces_a: ma,
        faces_b: mb,
    }
}

impl DerivativeBoundTerms {
    pub fn num_faces(&self) -> (usize, usize) {
        (self.faces_a, self.faces_b)
    }

    /// Evaluate the bound objective at given pose rates and dual rates.
    pub fn evaluate(
        &self,
        rates: &BTreeMap<usize, [f64; 5]>,
        lam_dot_a: &DVector<f64>,
        lam_dot_b: &DVector<f64>,
    ) -> f64 {
        let mut v = self.lam_dot_a.dot(lam_dot_a) + self.lam_dot_b.dot(lam_dot_b);
        for (slot, coeff) in &self.state_rate {
            if let Some(rate) = rates.get(slot) {
                for c in 0..5 {
                    v += coeff[c] * rate[c];
                }
            }
        }
        v
    }

    /// Residual of the differentiated stationarity equalities.
    pub fn equality_residual(
        &self,
        rates: &BTreeMap<usize, [f64; 5]>,
        lam_dot_a: &DVector<f64>,
        lam_dot_b: &DVector<f64>,
    ) -> Vector3<f64> {
        let res = &self.eq_lam_a * lam_dot_a + &self.eq_lam_b * lam_dot_b;
        let mut out = Vector3::new(res[0], res[1], res[2]);
        for (slot, block) in &self.eq_state {
            if let Some(rate) = rates.get(slot) {
                for r in 0..3 {
                    for c in 0..5 {
                        out[r] += block[(r, c)] * rate[c];
                    }
                }
            }
        }
        out
    }
}

/// The LP value g(x, u): maximize the bound objective over the dual rates
/// subject to the differentiated stationarity equalities and the sign
/// constraints, at fixed pose rates. `rate_box` bounds the dual rates so
/// that degenerate instants cannot report unbounded values; legitimate dual
/// rates sit far inside it.
pub fn derivative_lower_bound(
    terms: &DerivativeBoundTerms,
    rates: &BTreeMap<usize, [f64; 5]>,
    rate_box: f64,
) -> Result<f64, QpError> {
    let (ma, mb) = terms.num_faces();
    let n = ma + mb;
    let mut qp = DenseQp::new(n);
    // maximize c . lam_dot  ->  minimize -c . lam_dot
    for k in 0..ma {
        qp.add_linear(k, -terms.lam_dot_a[k]);
    }
    for k in 0..mb {
        qp.add_linear(ma + k, -terms.lam_dot_b[k]);
    }
    // constant part of the equality rows from the fixed pose rates
    let mut rhs = Vector3::zeros();
    for (slot, block) in &terms.eq_state {
        if let Some(rate) = rates.get(slot) {
            for r in 0..3 {
                for c in 0..5 {
                    rhs[r] -= block[(r, c)] * rate[c];
                }
            }
        }
    }
    for r in 0..3 {
        let mut row = DVector::zeros(n);
        for k in 0..ma {
            row[k] = terms.eq_lam_a[(r, k)];
        }
        for k in 0..mb {
            row[ma + k] = terms.eq_lam_b[(r, k)];
        }
        qp.push_eq(row, rhs[r]);
    }
    for &k in &terms.sign_a {
        let mut row = DVector::zeros(n);
        row[k] = -1.0;
        qp.push_ineq(row, 0.0);
    }
    for &k in &terms.sign_b {
        let mut row = DVector::zeros(n);
        row[ma + k] = -1.0;
        qp.push_ineq(row, 0.0);
    }
    for k in 0..n {
        let mut up = DVector::zeros(n);
        up[k] = 1.0;
        qp.push_ineq(up.clone(), rate_box);
        qp.push_ineq(-up, rate_box);
    }
    let sol = qp.solve(&QpSettings::default())?;
    // add the pose-rate constant of the objective
    let mut g = -sol.objective;
    for (slot, coeff) in &terms.state_rate {
        if let Some(rate) = rates.get(slot) {
            for c in 0..5 {
                g += coeff[c] * rate[c];
            }
        }
    }
    Ok(g)
}
