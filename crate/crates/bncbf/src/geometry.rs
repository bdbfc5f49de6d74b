//! Convex polytope geometry: rigid-body rotations, H-polytopes, and
//! pose-dependent instantiation of body-frame templates.
//!
//! Conventions:
//! - A pose is (position, pitch theta, yaw psi); roll is ignored.
//! - `Rotation::matrix` returns R(theta, psi), the world-to-body map. Its
//!   transpose Rz(psi) Ry(theta) is the vehicle attitude.
//! - A template instantiates as A(eta) = A0 R', b(eta) = b0 + A(eta) p, so a
//!   world point p lies in the body iff R'(p - position) lies in the template.

use nalgebra::{DMatrix, DVector, Matrix3, SVector, Vector3};

use crate::error::GeometryError;
use crate::qp::{DenseQp, QpSettings};

/// Absolute tolerance for half-space membership checks. Stricter than the
/// QP solver residuals by design: geometry predicates must not be the
/// weakest link in the safety argument.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Wrap an angle to (-pi, pi]. In-range values pass through unchanged.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -std::f64::consts::PI && a <= std::f64::consts::PI {
        return a;
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w - two_pi
    } else {
        w
    }
}

/// Pitch/yaw rotation with cached matrix and analytic partials.
#[derive(Debug, Clone, Copy)]
pub struct Rotation {
    theta: f64,
    psi: f64,
    m: Matrix3<f64>,
}

impl Rotation {
    /// Build R(theta, psi). Fails when cos(theta) is numerically zero,
    /// because the velocity transform needs 1/cos(theta).
    pub fn new(theta: f64, psi: f64) -> Result<Self, GeometryError> {
        if theta.cos().abs() < 1e-9 {
            return Err(GeometryError::PitchSingularity { theta });
        }
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = psi.sin_cos();
        // World-to-body map; transpose equals Rz(psi) Ry(theta).
        let m = Matrix3::new(
            cp * ct,
            sp * ct,
            -st, //
            -sp,
            cp,
            0.0, //
            cp * st,
            sp * st,
            ct,
        );
        Ok(Self { theta, psi, m })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    /// dR/dtheta.
    pub fn d_theta(&self) -> Matrix3<f64> {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.psi.sin_cos();
        Matrix3::new(
            -cp * st,
            -sp * st,
            -ct, //
            0.0,
            0.0,
            0.0, //
            cp * ct,
            sp * ct,
            -st,
        )
    }

    /// dR/dpsi.
    pub fn d_psi(&self) -> Matrix3<f64> {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.psi.sin_cos();
        Matrix3::new(
            -sp * ct,
            cp * ct,
            0.0, //
            -cp,
            -sp,
            0.0, //
            -sp * st,
            cp * st,
            0.0,
        )
    }
}

/// Agent pose: position in meters, pitch and yaw in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub theta: f64,
    pub psi: f64,
}

impl Pose {
    pub fn new(position: Vector3<f64>, theta: f64, psi: f64) -> Self {
        Self {
            position,
            theta,
            psi,
        }
    }

    pub fn origin() -> Self {
        Self::new(Vector3::zeros(), 0.0, 0.0)
    }

    pub fn rotation(&self) -> Result<Rotation, GeometryError> {
        Rotation::new(self.theta, self.psi)
    }

    /// State vector layout [x, y, z, theta, psi].
    pub fn to_vector(self) -> SVector<f64, 5> {
        SVector::<f64, 5>::new(
            self.position.x,
            self.position.y,
            self.position.z,
            self.theta,
            self.psi,
        )
    }

    pub fn from_vector(v: &SVector<f64, 5>) -> Self {
        Self::new(Vector3::new(v[0], v[1], v[2]), v[3], v[4])
    }
}

/// H-polytope { p | A p <= b } with rows as outward normals in world frame.
#[derive(Debug, Clone)]
pub struct Polytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl Polytope {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, GeometryError> {
        if a.ncols() != 3 {
            return Err(GeometryError::Dimension(format!(
                "expected 3 columns, got {}",
                a.ncols()
            )));
        }
        if a.nrows() != b.len() {
            return Err(GeometryError::Dimension(format!(
                "{} rows vs {} offsets",
                a.nrows(),
                b.len()
            )));
        }
        Ok(Self { a, b })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn offsets(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn num_faces(&self) -> usize {
        self.a.nrows()
    }

    pub fn contains(&self, p: &Vector3<f64>, tol: f64) -> bool {
        (0..self.num_faces()).all(|i| {
            self.a[(i, 0)] * p.x + self.a[(i, 1)] * p.y + self.a[(i, 2)] * p.z <= self.b[i] + tol
        })
    }

    /// Translate the polytope by t (b shifts by A t).
    pub fn translated(&self, t: &Vector3<f64>) -> Self {
        let shift = DVector::from_fn(self.num_faces(), |i, _| {
            self.a[(i, 0)] * t.x + self.a[(i, 1)] * t.y + self.a[(i, 2)] * t.z
        });
        Self {
            a: self.a.clone(),
            b: &self.b + shift,
        }
    }

    /// Largest inscribed ball. Radius > 0 iff the interior is nonempty.
    pub fn chebyshev_center(&self) -> Result<(Vector3<f64>, f64), GeometryError> {
        let m = self.num_faces();
        // Variables (c, r): maximize r with a_i . c + ||a_i|| r <= b_i, r >= 0.
        let mut qp = DenseQp::new(4);
        qp.add_linear(3, -1.0);
        for i in 0..m {
            let norm = (self.a[(i, 0)].powi(2) + self.a[(i, 1)].powi(2) + self.a[(i, 2)].powi(2))
                .sqrt();
            let row = DVector::from_vec(vec![self.a[(i, 0)], self.a[(i, 1)], self.a[(i, 2)], norm]);
            qp.push_ineq(row, self.b[i]);
        }
        qp.push_ineq(DVector::from_vec(vec![0.0, 0.0, 0.0, -1.0]), 0.0);
        match qp.solve(&QpSettings::default()) {
            Ok(sol) => Ok((Vector3::new(sol.x[0], sol.x[1], sol.x[2]), sol.x[3])),
            Err(crate::error::QpError::Infeasible) => Err(GeometryError::EmptyPolytope),
            Err(crate::error::QpError::Unbounded) => {
                Err(GeometryError::Unbounded { direction: usize::MAX })
            }
            Err(e) => Err(GeometryError::Dimension(format!("chebyshev LP failed: {e}"))),
        }
    }

    /// Support value max { d . p | p in polytope }.
    pub fn support(&self, dir: &Vector3<f64>) -> Result<f64, GeometryError> {
        let mut qp = DenseQp::new(3);
        qp.add_linear(0, -dir.x);
        qp.add_linear(1, -dir.y);
        qp.add_linear(2, -dir.z);
        for i in 0..self.num_faces() {
            let row = DVector::from_vec(vec![self.a[(i, 0)], self.a[(i, 1)], self.a[(i, 2)]]);
            qp.push_ineq(row, self.b[i]);
        }
        match qp.solve(&QpSettings::default()) {
            Ok(sol) => Ok(-sol.objective),
            Err(crate::error::QpError::Infeasible) => Err(GeometryError::EmptyPolytope),
            Err(crate::error::QpError::Unbounded) => {
                Err(GeometryError::Unbounded { direction: usize::MAX })
            }
            Err(e) => Err(GeometryError::Dimension(format!("support LP failed: {e}"))),
        }
    }

    /// Vertex enumeration by exhaustive 3-subset hyperplane intersection with
    /// feasibility filtering. Intended for small face counts.
    pub fn vertices(&self) -> Vec<Vector3<f64>> {
        let m = self.num_faces();
        let mut verts: Vec<Vector3<f64>> = Vec::new();
        for i in 0..m {
            for j in (i + 1)..m {
                for k in (j + 1)..m {
                    let rows = Matrix3::new(
                        self.a[(i, 0)],
                        self.a[(i, 1)],
                        self.a[(i, 2)],
                        self.a[(j, 0)],
                        self.a[(j, 1)],
                        self.a[(j, 2)],
                        self.a[(k, 0)],
                        self.a[(k, 1)],
                        self.a[(k, 2)],
                    );
                    let rhs = Vector3::new(self.b[i], self.b[j], self.b[k]);
                    if rows.determinant().abs() < 1e-12 {
                        continue;
                    }
                    let lu = rows.full_piv_lu();
                    let Some(v) = lu.solve(&rhs) else { continue };
                    if !self.contains(&v, MEMBERSHIP_TOL) {
                        continue;
                    }
                    if verts.iter().all(|w| (w - v).norm() > 1e-9) {
                        verts.push(v);
                    }
                }
            }
        }
        verts
    }

    /// Indices of hyperplanes active at p within tol.
    pub fn active_rows(&self, p: &Vector3<f64>, tol: f64) -> Vec<usize> {
        (0..self.num_faces())
            .filter(|&i| {
                (self.a[(i, 0)] * p.x + self.a[(i, 1)] * p.y + self.a[(i, 2)] * p.z - self.b[i])
                    .abs()
                    <= tol
            })
            .collect()
    }
}

/// Derivatives of a pose-dependent body (A(eta), b(eta)) with respect to the
/// five pose components [x, y, z, theta, psi] of one agent.
#[derive(Debug, Clone)]
pub struct BodyJacobian {
    pub d_a: Vec<DMatrix<f64>>,
    pub d_b: Vec<DVector<f64>>,
}

impl BodyJacobian {
    pub fn zeros(faces: usize) -> Self {
        Self {
            d_a: (0..5).map(|_| DMatrix::zeros(faces, 3)).collect(),
            d_b: (0..5).map(|_| DVector::zeros(faces)).collect(),
        }
    }
}

/// Body-frame polytope template with the instantiation rule
/// A(eta) = A0 R(theta, psi)', b(eta) = b0 + A(eta) p.
///
/// Construction validates the standing regularity requirements: nonempty
/// interior, boundedness, and linearly independent active sets at vertices.
#[derive(Debug, Clone)]
pub struct PolytopeTemplate {
    a0: DMatrix<f64>,
    b0: DVector<f64>,
    vertices0: Vec<Vector3<f64>>,
    centroid0: Vector3<f64>,
    bound_radius: f64,
}

impl PolytopeTemplate {
    pub fn new(a0: DMatrix<f64>, b0: DVector<f64>) -> Result<Self, GeometryError> {
        let body = Polytope::new(a0.clone(), b0.clone())?;
        let (_, radius) = body.chebyshev_center()?;
        if radius <= 1e-9 {
            return Err(GeometryError::DegenerateInterior { radius });
        }
        for (dir_idx, dir) in [
            Vector3::x(),
            Vector3::y(),
            Vector3::z(),
            -Vector3::x(),
            -Vector3::y(),
            -Vector3::z(),
        ]
        .iter()
        .enumerate()
        {
            match body.support(dir) {
                Ok(_) => {}
                Err(GeometryError::Unbounded { .. }) => {
                    return Err(GeometryError::Unbounded { direction: dir_idx })
                }
                Err(e) => return Err(e),
            }
        }
        let vertices0 = body.vertices();
        for (idx, v) in vertices0.iter().enumerate() {
            let active = body.active_rows(v, 1e-7);
            if active.len() > 3 {
                return Err(GeometryError::DegenerateVertex {
                    index: idx,
                    active: active.len(),
                });
            }
        }
        let n = vertices0.len().max(1) as f64;
        let centroid0 = vertices0.iter().sum::<Vector3<f64>>() / n;
        let bound_radius = vertices0
            .iter()
            .map(|v| (v - centroid0).norm())
            .fold(0.0, f64::max);
        Ok(Self {
            a0,
            b0,
            vertices0,
            centroid0,
            bound_radius,
        })
    }

    /// Tetrahedral vehicle hull used by the stock scenarios. Rows are kept
    /// exactly as configured upstream; they are not renormalized.
    pub fn tetrahedron() -> Self {
        let a0 = DMatrix::from_row_slice(
            4,
            3,
            &[
                0.24, 0.84, 0.48, //
                0.24, -0.84, 0.48, //
                -0.97, 0.00, 0.00, //
                0.24, 0.00, -0.97,
            ],
        );
        let b0 = DVector::from_vec(vec![0.06, 0.06, 0.24, 0.06]);
        Self::new(a0, b0).expect("stock tetrahedron is regular")
    }

    /// Axis-aligned box with the given half extents, centered at the origin.
    pub fn cuboid(half: Vector3<f64>) -> Result<Self, GeometryError> {
        let a0 = DMatrix::from_row_slice(
            6,
            3,
            &[
                1.0, 0.0, 0.0, //
                -1.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, //
                0.0, -1.0, 0.0, //
                0.0, 0.0, 1.0, //
                0.0, 0.0, -1.0,
            ],
        );
        let b0 = DVector::from_vec(vec![half.x, half.x, half.y, half.y, half.z, half.z]);
        Self::new(a0, b0)
    }

    /// Uniformly scale the body about its frame origin.
    pub fn scaled(&self, s: f64) -> Result<Self, GeometryError> {
        Self::new(self.a0.clone(), &self.b0 * s)
    }

    pub fn body_matrix(&self) -> &DMatrix<f64> {
        &self.a0
    }

    pub fn body_offsets(&self) -> &DVector<f64> {
        &self.b0
    }

    pub fn num_faces(&self) -> usize {
        self.a0.nrows()
    }

    pub fn body_vertices(&self) -> &[Vector3<f64>] {
        &self.vertices0
    }

    /// Conservative bounding-sphere radius about the instantiated center.
    pub fn bound_radius(&self) -> f64 {
        self.bound_radius
    }

    /// Bounding-sphere center in world frame for the given pose.
    pub fn bound_center(&self, rot: &Rotation, position: &Vector3<f64>) -> Vector3<f64> {
        rot.matrix() * self.centroid0 + position
    }

    pub fn instantiate(&self, pose: &Pose) -> Result<Polytope, GeometryError> {
        let rot = pose.rotation()?;
        Ok(self.instantiate_rotated(&rot, &pose.position))
    }

    pub fn instantiate_rotated(&self, rot: &Rotation, position: &Vector3<f64>) -> Polytope {
        let rt = dmatrix_from3(&rot.matrix().transpose());
        let a = &self.a0 * rt;
        let b = &self.b0
            + DVector::from_fn(self.a0.nrows(), |i, _| {
                a[(i, 0)] * position.x + a[(i, 1)] * position.y + a[(i, 2)] * position.z
            });
        Polytope { a, b }
    }

    /// World-frame vertices at the given pose: v -> R v + p.
    pub fn vertices_at(&self, pose: &Pose) -> Result<Vec<Vector3<f64>>, GeometryError> {
        let rot = pose.rotation()?;
        Ok(self
            .vertices0
            .iter()
            .map(|v| rot.matrix() * v + pose.position)
            .collect())
    }

    /// Analytic derivatives of (A(eta), b(eta)) in the agent's pose.
    pub fn pose_jacobian(&self, pose: &Pose) -> Result<BodyJacobian, GeometryError> {
        let rot = pose.rotation()?;
        let body = self.instantiate_rotated(&rot, &pose.position);
        let m = self.num_faces();
        let da_theta = &self.a0 * dmatrix_from3(&rot.d_theta().transpose());
        let da_psi = &self.a0 * dmatrix_from3(&rot.d_psi().transpose());
        let p = pose.position;
        let mut jac = BodyJacobian::zeros(m);
        // b = b0 + A p: position derivatives pick out columns of A,
        // angle derivatives ride on dA.
        for c in 0..3 {
            jac.d_b[c] = body.a.column(c).clone_owned();
        }
        jac.d_b[3] = DVector::from_fn(m, |i, _| {
            da_theta[(i, 0)] * p.x + da_theta[(i, 1)] * p.y + da_theta[(i, 2)] * p.z
        });
        jac.d_b[4] = DVector::from_fn(m, |i, _| {
            da_psi[(i, 0)] * p.x + da_psi[(i, 1)] * p.y + da_psi[(i, 2)] * p.z
        });
        jac.d_a[3] = da_theta;
        jac.d_a[4] = da_psi;
        Ok(jac)
    }
}

pub(crate) fn dmatrix_from3(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(3, 3, |i, j| m[(i, j)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_pose(rng: &mut StdRng) -> Pose {
        Pose::new(
            Vector3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            ),
            rng.random_range(-1.2..1.2),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        )
    }

    #[test]
    fn rotation_zero_is_identity() {
        let r = Rotation::new(0.0, 0.0).unwrap();
        assert_abs_diff_eq!(r.matrix(), &Matrix3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn rotation_transpose_matches_quarter_yaw() {
        // At (theta, psi) = (0, pi/2) the transpose's first row is [0, -1, 0].
        let r = Rotation::new(0.0, std::f64::consts::FRAC_PI_2).unwrap();
        let rt = r.matrix().transpose();
        assert_abs_diff_eq!(rt[(0, 0)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rt[(0, 1)], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rt[(0, 2)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rotation_orthonormal() {
        let r = Rotation::new(0.3, -0.7).unwrap();
        let prod = r.matrix() * r.matrix().transpose();
        assert_abs_diff_eq!(prod, Matrix3::identity(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.matrix().determinant(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rotation_pitch_domain_error() {
        assert!(matches!(
            Rotation::new(std::f64::consts::FRAC_PI_2, 0.0),
            Err(GeometryError::PitchSingularity { .. })
        ));
        assert!(Rotation::new(std::f64::consts::FRAC_PI_2 - 1e-3, 0.0).is_ok());
    }

    #[test]
    fn rotation_partials_match_finite_differences() {
        let mut rng = StdRng::seed_from_u64(11);
        let h = 1e-6;
        for _ in 0..50 {
            let theta = rng.random_range(-1.3..1.3);
            let psi = rng.random_range(-3.0..3.0);
            let r = Rotation::new(theta, psi).unwrap();
            let fd_t = (Rotation::new(theta + h, psi).unwrap().matrix()
                - Rotation::new(theta - h, psi).unwrap().matrix())
                / (2.0 * h);
            let fd_p = (Rotation::new(theta, psi + h).unwrap().matrix()
                - Rotation::new(theta, psi - h).unwrap().matrix())
                / (2.0 * h);
            assert_abs_diff_eq!(r.d_theta(), fd_t, epsilon = 1e-8);
            assert_abs_diff_eq!(r.d_psi(), fd_p, epsilon = 1e-8);
        }
    }

    #[test]
    fn instantiate_at_origin_returns_template() {
        let t = PolytopeTemplate::tetrahedron();
        let body = t.instantiate(&Pose::origin()).unwrap();
        assert_abs_diff_eq!(body.matrix(), t.body_matrix(), epsilon = 1e-15);
        let expect = DVector::from_vec(vec![0.06, 0.06, 0.24, 0.06]);
        assert_abs_diff_eq!(body.offsets(), &expect, epsilon = 1e-15);
    }

    #[test]
    fn instantiate_translation_shifts_offsets() {
        let t = PolytopeTemplate::tetrahedron();
        let shift = Vector3::new(1.5, -2.0, 0.25);
        let body = t
            .instantiate(&Pose::new(shift, 0.0, 0.0))
            .unwrap();
        let base = t.instantiate(&Pose::origin()).unwrap();
        assert_abs_diff_eq!(body.matrix(), base.matrix(), epsilon = 1e-15);
        let expect = base.translated(&shift);
        assert_abs_diff_eq!(body.offsets(), expect.offsets(), epsilon = 1e-12);
    }

    #[test]
    fn instantiate_quarter_turn_matches_vertex_oracle() {
        // Vertex-enumeration oracle: instantiated vertices must equal the
        // rotated + translated template vertices.
        let t = PolytopeTemplate::tetrahedron();
        let pose = Pose::new(Vector3::new(0.4, -0.3, 1.1), 0.0, std::f64::consts::FRAC_PI_4);
        let body = t.instantiate(&pose).unwrap();
        let mut enumerated = body.vertices();
        let expected = t.vertices_at(&pose).unwrap();
        assert_eq!(enumerated.len(), expected.len());
        for e in &expected {
            let idx = enumerated
                .iter()
                .position(|v| (v - e).norm() < 1e-9)
                .unwrap_or_else(|| panic!("missing vertex {e:?}"));
            enumerated.remove(idx);
        }
    }

    #[test]
    fn rigid_transform_preserves_vertex_distances() {
        let t = PolytopeTemplate::tetrahedron();
        let base = t.body_vertices().to_vec();
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..40 {
            let pose = random_pose(&mut rng);
            let moved = t.vertices_at(&pose).unwrap();
            for i in 0..base.len() {
                for j in (i + 1)..base.len() {
                    let d0 = (base[i] - base[j]).norm();
                    let d1 = (moved[i] - moved[j]).norm();
                    assert!((d0 - d1).abs() < 1e-9, "vertex pair distance drifted");
                }
            }
        }
    }

    #[test]
    fn membership_consistency_with_body_frame() {
        let t = PolytopeTemplate::tetrahedron();
        let template_body = t.instantiate(&Pose::origin()).unwrap();
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..50 {
            let pose = random_pose(&mut rng);
            let body = t.instantiate(&pose).unwrap();
            let rot = pose.rotation().unwrap();
            for _ in 0..20 {
                let p = pose.position
                    + Vector3::new(
                        rng.random_range(-0.6..0.6),
                        rng.random_range(-0.6..0.6),
                        rng.random_range(-0.6..0.6),
                    );
                let q = rot.matrix().transpose() * (p - pose.position);
                assert_eq!(
                    body.contains(&p, 1e-9),
                    template_body.contains(&q, 1e-9),
                    "membership disagreed between world and body frames"
                );
            }
        }
    }

    #[test]
    fn chebyshev_center_unit_cube() {
        let cube = Polytope::new(
            DMatrix::from_row_slice(
                6,
                3,
                &[
                    1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0,
                    0.0, 0.0, -1.0,
                ],
            ),
            DVector::from_vec(vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]),
        )
        .unwrap();
        let (c, r) = cube.chebyshev_center().unwrap();
        assert_abs_diff_eq!(c, Vector3::new(0.5, 0.5, 0.5), epsilon = 1e-6);
        assert_abs_diff_eq!(r, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn chebyshev_center_tetrahedron_positive() {
        let t = PolytopeTemplate::tetrahedron();
        let body = t.instantiate(&Pose::origin()).unwrap();
        let (_, r) = body.chebyshev_center().unwrap();
        assert!(r > 0.01, "tetrahedron interior radius {r}");
    }

    #[test]
    fn chebyshev_center_empty_polytope() {
        // x <= -1 and x >= 1 padded to a box in y, z.
        let poly = Polytope::new(
            DMatrix::from_row_slice(
                6,
                3,
                &[
                    1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0,
                    0.0, 0.0, -1.0,
                ],
            ),
            DVector::from_vec(vec![-1.0, -1.0, 1.0, 1.0, 1.0, 1.0]),
        )
        .unwrap();
        assert!(matches!(
            poly.chebyshev_center(),
            Err(GeometryError::EmptyPolytope)
        ));
    }

    #[test]
    fn template_rejects_unbounded_slab() {
        let a0 = DMatrix::from_row_slice(2, 3, &[0.0, 0.0, 1.0, 0.0, 0.0, -1.0]);
        let b0 = DVector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(
            PolytopeTemplate::new(a0, b0),
            Err(GeometryError::Unbounded { .. })
        ));
    }

    #[test]
    fn template_rejects_degenerate_apex() {
        // Square pyramid: four side planes meet at the apex.
        let a0 = DMatrix::from_row_slice(
            5,
            3,
            &[
                1.0, 0.0, 1.0, //
                -1.0, 0.0, 1.0, //
                0.0, 1.0, 1.0, //
                0.0, -1.0, 1.0, //
                0.0, 0.0, -1.0,
            ],
        );
        let b0 = DVector::from_vec(vec![1.0, 1.0, 1.0, 1.0, 0.0]);
        assert!(matches!(
            PolytopeTemplate::new(a0, b0),
            Err(GeometryError::DegenerateVertex { .. })
        ));
    }

    #[test]
    fn tetrahedron_vertices_enumerated() {
        let t = PolytopeTemplate::tetrahedron();
        assert_eq!(t.body_vertices().len(), 4);
        // Forward apex sits on the +x axis at 0.06 / 0.24.
        let apex = t
            .body_vertices()
            .iter()
            .find(|v| v.x > 0.2)
            .expect("apex vertex");
        assert_abs_diff_eq!(*apex, Vector3::new(0.25, 0.0, 0.0), epsilon = 1e-9);
    }

    #[test]
    fn cube_vertices_enumerated() {
        let t = PolytopeTemplate::cuboid(Vector3::new(0.5, 0.5, 0.5)).unwrap();
        assert_eq!(t.body_vertices().len(), 8);
    }

    #[test]
    fn wrap_angle_range() {
        assert_abs_diff_eq!(wrap_angle(3.0 * std::f64::consts::PI), std::f64::consts::PI);
        assert_abs_diff_eq!(wrap_angle(-0.5), -0.5);
        assert_abs_diff_eq!(
            wrap_angle(2.0 * std::f64::consts::PI + 0.25),
            0.25,
            epsilon = 1e-12
        );
        assert!(wrap_angle(-std::f64::consts::PI) > 0.0);
    }
}
