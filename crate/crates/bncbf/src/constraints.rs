//! Relative-pose constraint encoders. Each smooth encoder returns a barrier
//! value with analytic gradients in the involved agents' poses; the
//! distance-backed encoders (collision avoidance, line of sight) delegate to
//! the polytope distance layer.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::distance::{min_distance, DistanceResult, MovingBody};
use crate::error::ConstraintError;
use crate::geometry::{BodyJacobian, Polytope, Pose, PolytopeTemplate, Rotation};

/// Yaw bound of the admissible state set: |psi| < 0.3 pi.
pub const PSI_LIMIT: f64 = 0.3 * std::f64::consts::PI;

/// Threshold of the corridor regularity guard on squared horizontal separation.
pub const REGULARITY_MARGIN: f64 = 0.001;

/// A scalar barrier value with gradients per involved agent slot, laid out as
/// d h / d [x, y, z, theta, psi].
#[derive(Debug, Clone)]
pub struct SmoothValue {
    pub value: f64,
    pub gradients: Vec<(usize, [f64; 5])>,
}

impl SmoothValue {
    pub fn gradient_for(&self, slot: usize) -> Option<&[f64; 5]> {
        self.gradients
            .iter()
            .find(|(s, _)| *s == slot)
            .map(|(_, g)| g)
    }
}

/// Second-order-cone field of view: h = -||A p + b|| + c . p + d, with p the
/// target position expressed in the sensor frame of the observing agent.
#[derive(Debug, Clone)]
pub struct FovCone {
    pub a: Matrix3<f64>,
    pub b: Vector3<f64>,
    pub c: Vector3<f64>,
    pub d: f64,
}

impl FovCone {
    /// Circular cone about the sensor's forward axis with the given half
    /// angle: h = -||(y, z)|| + tan(phi) x.
    pub fn ellipsoidal(half_angle: f64) -> Self {
        Self {
            a: Matrix3::new(0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0),
            b: Vector3::zeros(),
            c: Vector3::new(half_angle.tan(), 0.0, 0.0),
            d: 0.0,
        }
    }

    /// One affine face of a polyhedral cone: h = c . p.
    pub fn affine_face(c: Vector3<f64>) -> Self {
        Self {
            a: Matrix3::zeros(),
            b: Vector3::zeros(),
            c,
            d: 0.0,
        }
    }

    /// Face normals of the stock camera cone: a four-sided pyramid about the
    /// sensor's -z axis, wide across y and narrower across x.
    pub fn camera_cone_faces() -> [Vector3<f64>; 4] {
        [
            Vector3::new(0.0, -0.64, -0.77),
            Vector3::new(0.83, -0.00, -0.56),
            Vector3::new(-0.83, 0.00, -0.56),
            Vector3::new(0.0, 0.64, -0.77),
        ]
    }
}

/// Admissible separation band between two agents.
#[derive(Debug, Clone, Copy)]
pub struct RangeBand {
    pub r_min: f64,
    pub r_max: f64,
}

impl RangeBand {
    pub fn new(r_min: f64, r_max: f64) -> Result<Self, ConstraintError> {
        if !(r_min > 0.0 && r_max >= r_min) {
            return Err(ConstraintError::Geometry(
                crate::error::GeometryError::Dimension(format!(
                    "range band must satisfy r_max >= r_min > 0, got [{r_min}, {r_max}]"
                )),
            ));
        }
        Ok(Self { r_min, r_max })
    }
}

fn separation(eta_i: &Pose, eta_j: &Pose) -> Result<(Vector3<f64>, f64), ConstraintError> {
    let rel = eta_j.position - eta_i.position;
    let n = rel.norm();
    if n < 1e-9 {
        return Err(ConstraintError::DegenerateSeparation { separation: n });
    }
    Ok((rel, n))
}

/// Field-of-view barrier for agent j seen from agent i, with gradients.
pub fn fov_value(
    cone: &FovCone,
    slot_i: usize,
    eta_i: &Pose,
    slot_j: usize,
    eta_j: &Pose,
) -> Result<SmoothValue, ConstraintError> {
    let (rel, _) = separation(eta_i, eta_j)?;
    let rot = eta_i.rotation()?;
    let pij = rot.matrix() * rel;
    let s = cone.a * pij + cone.b;
    let ns = s.norm();
    let value = -ns + cone.c.dot(&pij) + cone.d;
    // dh/dp_ij; the norm term drops out at its (measure-zero) kink.
    let ghat = if ns > 1e-12 {
        cone.c - cone.a.transpose() * (s / ns)
    } else {
        cone.c
    };
    let g_pos_j = rot.matrix().transpose() * ghat;
    let d_theta = rot.d_theta() * rel;
    let d_psi = rot.d_psi() * rel;
    let mut grad_i = [0.0; 5];
    let mut grad_j = [0.0; 5];
    for c in 0..3 {
        grad_i[c] = -g_pos_j[c];
        grad_j[c] = g_pos_j[c];
    }
    grad_i[3] = ghat.dot(&d_theta);
    grad_i[4] = ghat.dot(&d_psi);
    Ok(SmoothValue {
        value,
        gradients: vec![(slot_i, grad_i), (slot_j, grad_j)],
    })
}

/// Range barriers (min, max) with gradients.
pub fn range_values(
    band: &RangeBand,
    slot_i: usize,
    eta_i: &Pose,
    slot_j: usize,
    eta_j: &Pose,
) -> Result<(SmoothValue, SmoothValue), ConstraintError> {
    let (rel, n) = separation(eta_i, eta_j)?;
    let u = rel / n;
    let mut grad_min_i = [0.0; 5];
    let mut grad_min_j = [0.0; 5];
    for c in 0..3 {
        grad_min_i[c] = -u[c];
        grad_min_j[c] = u[c];
    }
    let min_v = SmoothValue {
        value: n - band.r_min,
        gradients: vec![(slot_i, grad_min_i), (slot_j, grad_min_j)],
    };
    let mut grad_max_i = [0.0; 5];
    let mut grad_max_j = [0.0; 5];
    for c in 0..3 {
        grad_max_i[c] = u[c];
        grad_max_j[c] = -u[c];
    }
    let max_v = SmoothValue {
        value: band.r_max - n,
        gradients: vec![(slot_i, grad_max_i), (slot_j, grad_max_j)],
    };
    Ok((min_v, max_v))
}

/// State barrier keeping yaw inside the admissible set: h = (0.3 pi)^2 - psi^2.
pub fn state_value(slot_i: usize, eta_i: &Pose) -> SmoothValue {
    let mut grad = [0.0; 5];
    grad[4] = -2.0 * eta_i.psi;
    SmoothValue {
        value: PSI_LIMIT * PSI_LIMIT - eta_i.psi * eta_i.psi,
        gradients: vec![(slot_i, grad)],
    }
}

/// Regularity barrier keeping the corridor frame well defined:
/// h = (x_i - x_j)^2 + (y_i - y_j)^2 - 0.001.
pub fn regularity_value(slot_i: usize, eta_i: &Pose, slot_j: usize, eta_j: &Pose) -> SmoothValue {
    let dx = eta_i.position.x - eta_j.position.x;
    let dy = eta_i.position.y - eta_j.position.y;
    let mut grad_i = [0.0; 5];
    let mut grad_j = [0.0; 5];
    grad_i[0] = 2.0 * dx;
    grad_i[1] = 2.0 * dy;
    grad_j[0] = -2.0 * dx;
    grad_j[1] = -2.0 * dy;
    SmoothValue {
        value: dx * dx + dy * dy - REGULARITY_MARGIN,
        gradients: vec![(slot_i, grad_i), (slot_j, grad_j)],
    }
}

/// Collision-avoidance barrier: polytope distance offset by a safe distance.
pub fn collision_value(
    pa: &Polytope,
    pb: &Polytope,
    r_ca: f64,
) -> Result<DistanceResult, ConstraintError> {
    Ok(min_distance(pa, pb, r_ca)?)
}

/// Slim tetrahedral over-bound of the sight segment between two agents.
///
/// The segment from p_i to p_j is an edge of the tetrahedron; the
/// cross-section transverse to it is an isosceles right triangle whose
/// hypotenuse is 1/mu, so a large mu makes the bound tight.
#[derive(Debug, Clone, Copy)]
pub struct LosCorridor {
    pub mu: f64,
    pub r_los: f64,
}

impl LosCorridor {
    pub fn new(mu: f64, r_los: f64) -> Self {
        Self { mu, r_los }
    }

    fn frame(
        &self,
        eta_i: &Pose,
        eta_j: &Pose,
    ) -> Result<(Vector3<f64>, f64, f64, Rotation), ConstraintError> {
        let d = eta_i.position - eta_j.position;
        let l = d.norm();
        if l < 1e-9 {
            return Err(ConstraintError::DegenerateSeparation { separation: l });
        }
        let rho_sq = d.x * d.x + d.y * d.y;
        if rho_sq <= 1e-12 {
            return Err(ConstraintError::Regularity { rho_sq });
        }
        let azimuth = d.y.atan2(d.x);
        let elevation = -d.z.atan2(rho_sq.sqrt());
        let rot = Rotation::new(elevation, azimuth)?;
        Ok((d, l, rho_sq.sqrt(), rot))
    }

    fn base_rows(&self, l: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(
            4,
            3,
            &[
                -1.0, 0.0, self.mu * l, //
                1.0, 0.0, self.mu * l, //
                0.0, -1.0, -1.0, //
                0.0, 1.0, -1.0,
            ],
        )
    }

    /// Instantiate the over-bounding polytope at the given agent poses.
    pub fn over_bound(&self, eta_i: &Pose, eta_j: &Pose) -> Result<Polytope, ConstraintError> {
        let (_, l, _, rot) = self.frame(eta_i, eta_j)?;
        let a = self.base_rows(l) * crate::geometry::dmatrix_from3(rot.matrix());
        let mid = eta_i.position + eta_j.position;
        let mut b = DVector::zeros(4);
        for r in 0..4 {
            b[r] = 0.5 * (a[(r, 0)] * mid.x + a[(r, 1)] * mid.y + a[(r, 2)] * mid.z);
        }
        b[0] += 0.5 * l;
        b[1] += 0.5 * l;
        Polytope::new(a, b).map_err(ConstraintError::Geometry)
    }

    /// Over-bound with analytic derivatives of (A, b) in both agents' poses.
    /// The corridor depends on positions only; angle derivatives are zero.
    pub fn moving_body(
        &self,
        slot_i: usize,
        eta_i: &Pose,
        slot_j: usize,
        eta_j: &Pose,
    ) -> Result<MovingBody, ConstraintError> {
        let (d, l, rho, rot) = self.frame(eta_i, eta_j)?;
        let w = crate::geometry::dmatrix_from3(rot.matrix());
        let base = self.base_rows(l);
        let a = &base * &w;
        let mid = eta_i.position + eta_j.position;
        let mut b = DVector::zeros(4);
        for r in 0..4 {
            b[r] = 0.5 * (a[(r, 0)] * mid.x + a[(r, 1)] * mid.y + a[(r, 2)] * mid.z);
        }
        b[0] += 0.5 * l;
        b[1] += 0.5 * l;
        let poly = Polytope::new(a.clone(), b).map_err(ConstraintError::Geometry)?;

        let d_hat = d / l;
        let l_sq = l * l;
        // Angle gradients of the corridor frame in the separation vector.
        let d_azimuth = Vector3::new(-d.y / (rho * rho), d.x / (rho * rho), 0.0);
        let d_elevation = Vector3::new(
            d.z * d.x / (rho * l_sq),
            d.z * d.y / (rho * l_sq),
            -rho / l_sq,
        );
        let w_elev = crate::geometry::dmatrix_from3(&rot.d_theta());
        let w_azim = crate::geometry::dmatrix_from3(&rot.d_psi());

        let mut jac_i = BodyJacobian::zeros(4);
        let mut jac_j = BodyJacobian::zeros(4);
        for c in 0..3 {
            // dA/dd_c: the mu L entries ride on dL, the frame on the angles.
            let mut dbase = DMatrix::zeros(4, 3);
            dbase[(0, 2)] = self.mu * d_hat[c];
            dbase[(1, 2)] = self.mu * d_hat[c];
            let dw = &w_elev * d_elevation[c] + &w_azim * d_azimuth[c];
            let da_dd = &dbase * &w + &base * dw;

            // b = 1/2 A (p_i + p_j) + [1/2, 1/2, 0, 0] L
            let mut db_i = DVector::zeros(4);
            let mut db_j = DVector::zeros(4);
            for r in 0..4 {
                let common =
                    0.5 * (da_dd[(r, 0)] * mid.x + da_dd[(r, 1)] * mid.y + da_dd[(r, 2)] * mid.z);
                db_i[r] = common + 0.5 * a[(r, c)];
                db_j[r] = -common + 0.5 * a[(r, c)];
            }
            db_i[0] += 0.5 * d_hat[c];
            db_i[1] += 0.5 * d_hat[c];
            db_j[0] -= 0.5 * d_hat[c];
            db_j[1] -= 0.5 * d_hat[c];

            jac_i.d_a[c] = da_dd.clone();
            jac_j.d_a[c] = -da_dd;
            jac_i.d_b[c] = db_i;
            jac_j.d_b[c] = db_j;
        }
        Ok(MovingBody {
            poly,
            owners: vec![(slot_i, jac_i), (slot_j, jac_j)],
        })
    }

    /// Line-of-sight barrier: distance from the over-bound corridor between
    /// agents i and j to a third body, offset by r_los. Nonnegativity implies
    /// the true sight segment clears the body by at least r_los.
    pub fn los_value(
        &self,
        eta_i: &Pose,
        eta_j: &Pose,
        body_k: &Polytope,
    ) -> Result<DistanceResult, ConstraintError> {
        let corridor = self.over_bound(eta_i, eta_j)?;
        Ok(min_distance(&corridor, body_k, self.r_los)?)
    }
}

/// Agent polytope at a pose; convenience wrapper used by leaf evaluation.
pub fn agent_body(template: &PolytopeTemplate, pose: &Pose) -> Result<Polytope, ConstraintError> {
    Ok(template.instantiate(pose)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn grad_close(analytic: &[f64; 5], fd: &[f64; 5], tol: f64) {
        let mut diff = 0.0;
        let mut scale = 1.0_f64;
        for c in 0..5 {
            diff += (analytic[c] - fd[c]).powi(2);
            scale += fd[c] * fd[c];
        }
        let rel = diff.sqrt() / scale.sqrt();
        assert!(
            rel <= tol,
            "gradient mismatch: {analytic:?} vs {fd:?} (rel {rel})"
        );
    }

    fn fd_gradient<F: Fn(&Pose, &Pose) -> f64>(
        f: &F,
        eta_i: &Pose,
        eta_j: &Pose,
        which: usize,
    ) -> [f64; 5] {
        let h = 1e-6;
        let mut out = [0.0; 5];
        for c in 0..5 {
            let perturb = |sign: f64| {
                let mut vi = eta_i.to_vector();
                let mut vj = eta_j.to_vector();
                if which == 0 {
                    vi[c] += sign * h;
                } else {
                    vj[c] += sign * h;
                }
                f(&Pose::from_vector(&vi), &Pose::from_vector(&vj))
            };
            out[c] = (perturb(1.0) - perturb(-1.0)) / (2.0 * h);
        }
        out
    }

    fn random_pair(rng: &mut StdRng) -> (Pose, Pose) {
        let eta_i = Pose::new(
            Vector3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ),
            rng.random_range(-0.8..0.8),
            rng.random_range(-2.5..2.5),
        );
        let eta_j = Pose::new(
            eta_i.position
                + Vector3::new(
                    rng.random_range(0.8..3.0),
                    rng.random_range(-1.5..1.5),
                    rng.random_range(-1.0..1.0),
                ),
            rng.random_range(-0.8..0.8),
            rng.random_range(-2.5..2.5),
        );
        (eta_i, eta_j)
    }

    #[test]
    fn fov_on_axis_target() {
        let cone = FovCone::ellipsoidal(15f64.to_radians());
        let eta_i = Pose::origin();
        let eta_j = Pose::new(Vector3::new(1.0, 0.0, 0.0), 0.0, 0.0);
        let v = fov_value(&cone, 0, &eta_i, 1, &eta_j).unwrap();
        assert_abs_diff_eq!(v.value, 15f64.to_radians().tan(), epsilon = 1e-12);
    }

    #[test]
    fn fov_cone_boundary_is_zero() {
        let cone = FovCone::ellipsoidal(15f64.to_radians());
        let eta_i = Pose::origin();
        let eta_j = Pose::new(Vector3::new(1.0, 15f64.to_radians().tan(), 0.0), 0.0, 0.0);
        let v = fov_value(&cone, 0, &eta_i, 1, &eta_j).unwrap();
        assert_abs_diff_eq!(v.value, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn fov_mount_convention_faces_heading() {
        // An observer yawed to +pi/2 sees a target at +y dead ahead.
        let cone = FovCone::ellipsoidal(15f64.to_radians());
        let eta_i = Pose::new(Vector3::zeros(), 0.0, std::f64::consts::FRAC_PI_2);
        let eta_j = Pose::new(Vector3::new(0.0, 2.0, 0.0), 0.0, 0.0);
        let v = fov_value(&cone, 0, &eta_i, 1, &eta_j).unwrap();
        assert_abs_diff_eq!(v.value, 2.0 * 15f64.to_radians().tan(), epsilon = 1e-12);
        // Behind the observer the value is negative.
        let eta_back = Pose::new(Vector3::new(0.0, -2.0, 0.0), 0.0, 0.0);
        let vb = fov_value(&cone, 0, &eta_i, 1, &eta_back).unwrap();
        assert!(vb.value < 0.0);
    }

    #[test]
    fn fov_gradients_match_finite_differences() {
        let cone = FovCone::ellipsoidal(15f64.to_radians());
        let mut rng = StdRng::seed_from_u64(23);
        let f = |pi: &Pose, pj: &Pose| fov_value(&cone, 0, pi, 1, pj).unwrap().value;
        for _ in 0..60 {
            let (eta_i, eta_j) = random_pair(&mut rng);
            let v = fov_value(&cone, 0, &eta_i, 1, &eta_j).unwrap();
            grad_close(
                v.gradient_for(0).unwrap(),
                &fd_gradient(&f, &eta_i, &eta_j, 0),
                1e-5,
            );
            grad_close(
                v.gradient_for(1).unwrap(),
                &fd_gradient(&f, &eta_i, &eta_j, 1),
                1e-5,
            );
        }
    }

    #[test]
    fn fov_invariant_under_joint_rotation() {
        // Rotating the observer and moving the target so the relative sensor
        // frame vector is unchanged leaves the value unchanged.
        let cone = FovCone::ellipsoidal(15f64.to_radians());
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..50 {
            let (eta_i, eta_j) = random_pair(&mut rng);
            let v0 = fov_value(&cone, 0, &eta_i, 1, &eta_j).unwrap().value;
            let delta = rng.random_range(-0.5..0.5);
            let rot0 = eta_i.rotation().unwrap();
            let eta_i2 = Pose::new(eta_i.position, eta_i.theta, eta_i.psi + delta);
            let rot2 = eta_i2.rotation().unwrap();
            // Choose the new offset so R2 (p_j' - p_i) = R0 (p_j - p_i).
            let rel2 =
                rot2.matrix().transpose() * (rot0.matrix() * (eta_j.position - eta_i.position));
            let eta_j2 = Pose::new(eta_i.position + rel2, eta_j.theta, eta_j.psi);
            let v1 = fov_value(&cone, 0, &eta_i2, 1, &eta_j2).unwrap().value;
            assert!(
                (v0 - v1).abs() <= 1e-9,
                "joint rotation changed fov: {v0} vs {v1}"
            );
        }
    }

    #[test]
    fn polyhedral_faces_unit_norm_and_downward() {
        for c in FovCone::camera_cone_faces() {
            assert!((c.norm() - 1.0).abs() <= 1e-2, "face {c:?} not unit");
        }
        // A target straight below the sensor satisfies all four faces.
        let below = Vector3::new(0.0, 0.0, -1.0);
        for c in FovCone::camera_cone_faces() {
            let face = FovCone::affine_face(c);
            let v = fov_value(&face, 0, &Pose::origin(), 1, &Pose::new(below, 0.0, 0.0)).unwrap();
            assert!(v.value > 0.0, "face {c:?} rejected on-axis target");
        }
    }

    #[test]
    fn range_example_values() {
        let band = RangeBand::new(0.5, 8.0).unwrap();
        let eta_i = Pose::origin();
        let eta_j = Pose::new(Vector3::new(1.0, 0.0, 0.0), 0.0, 0.0);
        let (lo, hi) = range_values(&band, 0, &eta_i, 1, &eta_j).unwrap();
        assert_abs_diff_eq!(lo.value, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(hi.value, 7.0, epsilon = 1e-12);
        let eta_bound = Pose::new(Vector3::new(0.5, 0.0, 0.0), 0.0, 0.0);
        let (lo_b, _) = range_values(&band, 0, &eta_i, 1, &eta_bound).unwrap();
        assert_abs_diff_eq!(lo_b.value, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn range_gradients_match_finite_differences() {
        let band = RangeBand::new(0.5, 8.0).unwrap();
        let mut rng = StdRng::seed_from_u64(29);
        let f_lo = |pi: &Pose, pj: &Pose| range_values(&band, 0, pi, 1, pj).unwrap().0.value;
        let f_hi = |pi: &Pose, pj: &Pose| range_values(&band, 0, pi, 1, pj).unwrap().1.value;
        for _ in 0..60 {
            let (eta_i, eta_j) = random_pair(&mut rng);
            let (lo, hi) = range_values(&band, 0, &eta_i, 1, &eta_j).unwrap();
            grad_close(
                lo.gradient_for(0).unwrap(),
                &fd_gradient(&f_lo, &eta_i, &eta_j, 0),
                1e-5,
            );
            grad_close(
                hi.gradient_for(1).unwrap(),
                &fd_gradient(&f_hi, &eta_i, &eta_j, 1),
                1e-5,
            );
        }
    }

    #[test]
    fn degenerate_separation_rejected() {
        let cone = FovCone::ellipsoidal(0.3);
        let eta = Pose::origin();
        assert!(matches!(
            fov_value(&cone, 0, &eta, 1, &eta),
            Err(ConstraintError::DegenerateSeparation { .. })
        ));
    }

    #[test]
    fn state_value_examples() {
        let v0 = state_value(0, &Pose::origin());
        assert_abs_diff_eq!(v0.value, PSI_LIMIT * PSI_LIMIT, epsilon = 1e-12);
        let v_edge = state_value(0, &Pose::new(Vector3::zeros(), 0.0, PSI_LIMIT));
        assert_abs_diff_eq!(v_edge.value, 0.0, epsilon = 1e-12);
        let psi = 0.4;
        let v = state_value(0, &Pose::new(Vector3::zeros(), 0.0, psi));
        assert_abs_diff_eq!(v.gradient_for(0).unwrap()[4], -2.0 * psi, epsilon = 1e-12);
        let h = 1e-6;
        let fd = (state_value(0, &Pose::new(Vector3::zeros(), 0.0, psi + h)).value
            - state_value(0, &Pose::new(Vector3::zeros(), 0.0, psi - h)).value)
            / (2.0 * h);
        assert_abs_diff_eq!(fd, -2.0 * psi, epsilon = 1e-6);
    }

    #[test]
    fn regularity_value_examples() {
        let eta_i = Pose::new(Vector3::new(1.0, 0.0, 0.0), 0.0, 0.0);
        let eta_j = Pose::origin();
        let v = regularity_value(0, &eta_i, 1, &eta_j);
        assert_abs_diff_eq!(v.value, 0.999, epsilon = 1e-12);
        let vert_i = Pose::new(Vector3::new(0.0, 0.0, 2.0), 0.0, 0.0);
        let v2 = regularity_value(0, &vert_i, 1, &eta_j);
        assert_abs_diff_eq!(v2.value, -0.001, epsilon = 1e-12);
        let mut rng = StdRng::seed_from_u64(41);
        let f = |pi: &Pose, pj: &Pose| regularity_value(0, pi, 1, pj).value;
        for _ in 0..30 {
            let (eta_i, eta_j) = random_pair(&mut rng);
            let v = regularity_value(0, &eta_i, 1, &eta_j);
            grad_close(
                v.gradient_for(0).unwrap(),
                &fd_gradient(&f, &eta_i, &eta_j, 0),
                1e-5,
            );
        }
    }

    #[test]
    fn corridor_contains_sight_segment() {
        let corridor = LosCorridor::new(100.0, 0.0);
        let mut rng = StdRng::seed_from_u64(53);
        for _ in 0..100 {
            let (eta_i, eta_j) = random_pair(&mut rng);
            let poly = corridor.over_bound(&eta_i, &eta_j).unwrap();
            for k in 0..50 {
                let alpha = k as f64 / 49.0;
                let p = eta_j.position * alpha + eta_i.position * (1.0 - alpha);
                assert!(
                    poly.contains(&p, 1e-9),
                    "segment point alpha={alpha} escaped the corridor"
                );
            }
        }
    }

    #[test]
    fn corridor_cross_section_width_bounded() {
        let mu = 100.0;
        let corridor = LosCorridor::new(mu, 0.0);
        let mut rng = StdRng::seed_from_u64(59);
        for _ in 0..40 {
            let (eta_i, eta_j) = random_pair(&mut rng);
            let poly = corridor.over_bound(&eta_i, &eta_j).unwrap();
            let verts = poly.vertices();
            assert_eq!(verts.len(), 4, "corridor must be a tetrahedron");
            let axis = (eta_j.position - eta_i.position).normalize();
            for a in 0..verts.len() {
                for b in (a + 1)..verts.len() {
                    let d = verts[a] - verts[b];
                    let transverse = (d - axis * d.dot(&axis)).norm();
                    assert!(
                        transverse <= 2.0f64.sqrt() / mu + 1e-9,
                        "transverse width {transverse} exceeds bound"
                    );
                }
            }
        }
    }

    #[test]
    fn corridor_distance_matches_segment_oracle() {
        // Obstacle well to the side: corridor distance approximates the
        // segment distance from below, within the corridor thickness.
        let corridor = LosCorridor::new(100.0, 0.0);
        let eta_i = Pose::origin();
        let eta_j = Pose::new(Vector3::new(4.0, 0.0, 0.0), 0.0, 0.0);
        let cube = PolytopeTemplate::cuboid(Vector3::new(0.5, 0.5, 0.5))
            .unwrap()
            .instantiate(&Pose::new(Vector3::new(2.0, 3.0, 0.0), 0.0, 0.0))
            .unwrap();
        let r = corridor.los_value(&eta_i, &eta_j, &cube).unwrap();
        assert!(r.h <= 2.5 + 1e-9);
        assert_abs_diff_eq!(r.h, 2.5, epsilon = 1e-2);
    }

    #[test]
    fn corridor_occluded_is_negative() {
        // Overlap reports distance zero, so h = -r_los with a positive offset.
        let corridor = LosCorridor::new(100.0, 0.1);
        let eta_i = Pose::origin();
        let eta_j = Pose::new(Vector3::new(4.0, 0.0, 0.0), 0.0, 0.0);
        let cube = PolytopeTemplate::cuboid(Vector3::new(0.5, 0.5, 0.5))
            .unwrap()
            .instantiate(&Pose::new(Vector3::new(2.0, 0.0, 0.0), 0.0, 0.0))
            .unwrap();
        let r = corridor.los_value(&eta_i, &eta_j, &cube).unwrap();
        assert_abs_diff_eq!(r.h, -0.1, epsilon = 1e-4);
        // With zero offset the occluded value collapses to zero.
        let r0 = LosCorridor::new(100.0, 0.0)
            .los_value(&eta_i, &eta_j, &cube)
            .unwrap();
        assert!(r0.h.abs() < 1e-4);
    }

    #[test]
    fn corridor_regularity_guard() {
        let corridor = LosCorridor::new(100.0, 0.0);
        let eta_i = Pose::origin();
        let eta_j = Pose::new(Vector3::new(0.0, 0.0, 3.0), 0.0, 0.0);
        assert!(matches!(
            corridor.over_bound(&eta_i, &eta_j),
            Err(ConstraintError::Regularity { .. })
        ));
    }

    #[test]
    fn corridor_jacobians_match_finite_differences() {
        let corridor = LosCorridor::new(100.0, 0.0);
        let mut rng = StdRng::seed_from_u64(61);
        let h = 1e-6;
        for _ in 0..30 {
            let (eta_i, eta_j) = random_pair(&mut rng);
            let body = corridor.moving_body(0, &eta_i, 1, &eta_j).unwrap();
            for (slot, jac) in &body.owners {
                for c in 0..3 {
                    let shift = |sign: f64| {
                        let mut pi = eta_i;
                        let mut pj = eta_j;
                        let target = if *slot == 0 { &mut pi } else { &mut pj };
                        target.position[c] += sign * h;
                        corridor.over_bound(&pi, &pj).unwrap()
                    };
                    let plus = shift(1.0);
                    let minus = shift(-1.0);
                    let fd_a = (plus.matrix() - minus.matrix()) / (2.0 * h);
                    let fd_b = (plus.offsets() - minus.offsets()) / (2.0 * h);
                    assert!(
                        (&jac.d_a[c] - fd_a).norm() < 1e-6,
                        "dA mismatch slot {slot} comp {c}"
                    );
                    assert!(
                        (&jac.d_b[c] - fd_b).norm() < 1e-6,
                        "db mismatch slot {slot} comp {c}"
                    );
                }
                for c in 3..5 {
                    assert_abs_diff_eq!(jac.d_a[c].norm(), 0.0);
                    assert_abs_diff_eq!(jac.d_b[c].norm(), 0.0);
                }
            }
        }
    }
}
