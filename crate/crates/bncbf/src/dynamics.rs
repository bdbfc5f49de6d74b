//! Driftless kinematic vehicle model: pose rates are the body velocities
//! mapped through the pose-dependent velocity transform. Includes the RK4
//! integrator and the proportional inverse-kinematics nominal controller.

use nalgebra::{SMatrix, SVector};

use crate::error::DynamicsError;
use crate::geometry::{wrap_angle, Pose, Rotation};

pub type StateVector = SVector<f64, 5>;
pub type InputVector = SVector<f64, 5>;
pub type VelocityTransform = SMatrix<f64, 5, 5>;

/// Componentwise input bound of the stock scenarios (m/s and rad/s).
pub const INPUT_LIMIT: f64 = 0.2;

/// Which input components an agent can actuate. Masked components are
/// forced to zero before integration and inside the filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActuationMask {
    pub enabled: [bool; 5],
}

impl ActuationMask {
    /// Fully actuated in all five components.
    pub fn full() -> Self {
        Self {
            enabled: [true; 5],
        }
    }

    /// Surface vessel with two thrusters: surge and yaw only. Depth and
    /// pitch stay frozen because w, q are unavailable and theta starts at 0.
    pub fn surface_vessel() -> Self {
        Self {
            enabled: [true, false, false, false, true],
        }
    }

    /// Submerged vehicle at constant depth: planar translation plus yaw.
    pub fn submerged_vessel() -> Self {
        Self {
            enabled: [true, true, false, false, true],
        }
    }

    pub fn apply(&self, nu: &InputVector) -> InputVector {
        InputVector::from_fn(|i, _| if self.enabled[i] { nu[i] } else { 0.0 })
    }
}

/// Velocity transform J(eta): block diagonal of the pose rotation and
/// diag(1, 1/cos theta). Invertible away from the pitch singularity.
pub fn velocity_transform(pose: &Pose) -> Result<VelocityTransform, DynamicsError> {
    let rot = Rotation::new(pose.theta, pose.psi)?;
    Ok(transform_from_rotation(&rot, pose.theta))
}

fn transform_from_rotation(rot: &Rotation, theta: f64) -> VelocityTransform {
    let mut j = VelocityTransform::zeros();
    let r = rot.matrix();
    for i in 0..3 {
        for k in 0..3 {
            j[(i, k)] = r[(i, k)];
        }
    }
    j[(3, 3)] = 1.0;
    j[(4, 4)] = 1.0 / theta.cos();
    j
}

/// Pose rate eta-dot = J(eta) nu.
pub fn pose_rate(pose: &Pose, nu: &InputVector) -> Result<StateVector, DynamicsError> {
    Ok(velocity_transform(pose)? * nu)
}

/// One RK4 step with the input held constant (zero-order hold). Yaw is
/// wrapped to (-pi, pi] after the combination step, never inside it.
pub fn step(pose: &Pose, nu: &InputVector, dt: f64) -> Result<Pose, DynamicsError> {
    let y0 = pose.to_vector();
    let f = |y: &StateVector| -> Result<StateVector, DynamicsError> {
        pose_rate(&Pose::from_vector(y), nu)
    };
    let k1 = f(&y0)?;
    let k2 = f(&(y0 + k1 * (dt / 2.0)))?;
    let k3 = f(&(y0 + k2 * (dt / 2.0)))?;
    let k4 = f(&(y0 + k3 * dt))?;
    let mut y = y0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    y[4] = wrap_angle(y[4]);
    Ok(Pose::from_vector(&y))
}

/// Proportional inverse-kinematics nominal input: the pose error mapped
/// through the velocity-transform block, masked, then saturated to the
/// input box. Yaw error is wrapped before multiplication.
pub fn nominal_input(
    pose: &Pose,
    goal: &Pose,
    mask: &ActuationMask,
    limit: f64,
) -> Result<InputVector, DynamicsError> {
    let j = velocity_transform(pose)?;
    let mut err = goal.to_vector() - pose.to_vector();
    err[3] = wrap_angle(err[3]);
    err[4] = wrap_angle(err[4]);
    let raw = j * err;
    let masked = mask.apply(&raw);
    Ok(InputVector::from_fn(|i, _| masked[i].clamp(-limit, limit)))
}
