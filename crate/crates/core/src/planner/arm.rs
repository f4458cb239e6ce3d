//! Planar two-link arm: maps the planner's Cartesian force into joint torques.

use nalgebra::{Matrix2, Vector2};
use thiserror::Error;

use crate::geometry::{Point2, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArmError {
    #[error("link lengths must be positive")]
    BadLinks,
    #[error("configuration is near-singular (|det J| = {det:e})")]
    Singular { det: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmModel2R {
    pub l1: f64,
    pub l2: f64,
    pub q: [f64; 2],
}

/// Below this `|sin q2|` the Jacobian is treated as singular.
pub const SINGULAR_SIN: f64 = 1e-6;

impl ArmModel2R {
    pub fn new(l1: f64, l2: f64, q: [f64; 2]) -> Result<Self, ArmError> {
        if !(l1 > 0.0 && l2 > 0.0) {
            return Err(ArmError::BadLinks);
        }
        Ok(Self { l1, l2, q })
    }

    pub fn forward(&self) -> Point2 {
        let [q1, q2] = self.q;
        Point2::new(
            self.l1 * q1.cos() + self.l2 * (q1 + q2).cos(),
            self.l1 * q1.sin() + self.l2 * (q1 + q2).sin(),
        )
    }

    pub fn jacobian(&self) -> Matrix2<f64> {
        let [q1, q2] = self.q;
        let (s1, c1) = q1.sin_cos();
        let (s12, c12) = (q1 + q2).sin_cos();
        Matrix2::new(
            -self.l1 * s1 - self.l2 * s12,
            -self.l2 * s12,
            self.l1 * c1 + self.l2 * c12,
            self.l2 * c12,
        )
    }

    pub fn det(&self) -> f64 {
        self.l1 * self.l2 * self.q[1].sin()
    }
}

/// `tau = J(q)^-1 F`, the Cartesian-to-joint mapping of the commanded force.
pub fn joint_space_map(f: Vec2, arm: &ArmModel2R) -> Result<[f64; 2], ArmError> {
    if arm.q[1].sin().abs() <= SINGULAR_SIN {
        return Err(ArmError::Singular { det: arm.det().abs() });
    }
    let j = arm.jacobian();
    let inv = j.try_inverse().ok_or(ArmError::Singular { det: arm.det().abs() })?;
    let tau = inv * Vector2::new(f.x, f.y);
    Ok([tau[0], tau[1]])
}

/// Joint torques produced by an external Cartesian force, `J^T F_ext`.
pub fn external_torque(f_ext: Vec2, arm: &ArmModel2R) -> [f64; 2] {
    let t = arm.jacobian().transpose() * Vector2::new(f_ext.x, f_ext.y);
    [t[0], t[1]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn fd_jacobian(arm: &ArmModel2R) -> Matrix2<f64> {
        let h = 1e-7;
        let mut j = Matrix2::zeros();
        for k in 0..2 {
            let mut plus = *arm;
            let mut minus = *arm;
            plus.q[k] += h;
            minus.q[k] -= h;
            let d = (plus.forward() - minus.forward()) / (2.0 * h);
            j[(0, k)] = d.x;
            j[(1, k)] = d.y;
        }
        j
    }

    #[test]
    fn zero_force_zero_torque() {
        let arm = ArmModel2R::new(1.0, 1.0, [0.3, 1.0]).unwrap();
        assert_eq!(joint_space_map(Vec2::ZERO, &arm).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn elbow_right_angle() {
        let arm = ArmModel2R::new(1.0, 1.0, [0.0, FRAC_PI_2]).unwrap();
        let j = arm.jacobian();
        assert!((j - fd_jacobian(&arm)).abs().max() < 1e-7);
        let tau = joint_space_map(Vec2::new(1.0, 0.0), &arm).unwrap();
        // J = [[-1, -1], [1, 0]] so J^-1 (1, 0) = (0, -1)
        assert!(tau[0].abs() < 1e-12 && (tau[1] + 1.0).abs() < 1e-12, "{tau:?}");
    }

    #[test]
    fn singular_rejected() {
        let arm = ArmModel2R::new(1.0, 1.0, [0.4, 0.0]).unwrap();
        assert!(matches!(joint_space_map(Vec2::new(1.0, 0.0), &arm), Err(ArmError::Singular { .. })));
        assert!(ArmModel2R::new(0.0, 1.0, [0.0, 1.0]).is_err());
    }

    #[test]
    fn round_trip_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        while checked < 1000 {
            let arm = ArmModel2R::new(
                rng.gen_range(0.2..1.5),
                rng.gen_range(0.2..1.5),
                [rng.gen_range(-3.1..3.1), rng.gen_range(-3.1..3.1)],
            )
            .unwrap();
            if arm.q[1].sin().abs() < 0.05 {
                continue;
            }
            let f = Vec2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
            let tau = joint_space_map(f, &arm).unwrap();
            let back = arm.jacobian() * Vector2::new(tau[0], tau[1]);
            assert!((back[0] - f.x).abs() < 1e-9 && (back[1] - f.y).abs() < 1e-9);
            assert!((arm.jacobian() - fd_jacobian(&arm)).abs().max() < 1e-6);
            checked += 1;
        }
    }

    #[test]
    fn external_torque_is_transpose() {
        let arm = ArmModel2R::new(0.5, 0.4, [0.2, 0.9]).unwrap();
        let f = Vec2::new(1.5, -2.0);
        let t = external_torque(f, &arm);
        let j = arm.jacobian();
        assert!((t[0] - (j[(0, 0)] * f.x + j[(1, 0)] * f.y)).abs() < 1e-12);
        assert!((t[1] - (j[(0, 1)] * f.x + j[(1, 1)] * f.y)).abs() < 1e-12);
    }
}
