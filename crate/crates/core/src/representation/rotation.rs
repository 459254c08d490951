//! Continuous 6D rotation parameterization: the first two columns of a
//! rotation matrix, re-orthonormalized by Gram–Schmidt on the way back.

use nalgebra::{Matrix3, Unit, UnitQuaternion};

use super::skeleton::Vec3;
use crate::error::{Error, Result};

pub type Rot6 = [f64; 6];
pub type Mat3 = Matrix3<f64>;

const DEGENERATE_EPS: f64 = 1e-9;

pub const IDENTITY_6D: Rot6 = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];

pub fn to_6d(m: &Mat3) -> Rot6 {
    [m[(0, 0)], m[(1, 0)], m[(2, 0)], m[(0, 1)], m[(1, 1)], m[(2, 1)]]
}

/// Gram–Schmidt reconstruction. Fails when either column vanishes or the
/// two columns are collinear.
pub fn from_6d(r: &Rot6) -> Result<Mat3> {
    let a1 = Vec3::new(r[0], r[1], r[2]);
    let a2 = Vec3::new(r[3], r[4], r[5]);
    let n1 = a1.norm();
    if !(n1 > DEGENERATE_EPS) {
        return Err(Error::DegenerateRotation(format!("first column has norm {n1}")));
    }
    let b1 = a1 / n1;
    let u2 = a2 - b1 * b1.dot(&a2);
    let n2 = u2.norm();
    if !(n2 > DEGENERATE_EPS * a2.norm().max(1.0)) {
        return Err(Error::DegenerateRotation("columns are collinear".into()));
    }
    let b2 = u2 / n2;
    let b3 = b1.cross(&b2);
    Ok(Mat3::from_columns(&[b1, b2, b3]))
}

pub fn axis_angle(axis: Vec3, angle: f64) -> Mat3 {
    if angle == 0.0 {
        return Mat3::identity();
    }
    UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), angle).to_rotation_matrix().into_inner()
}

/// Rotation about the vertical axis.
pub fn yaw(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Conjugation by the `x → −x` reflection, which mirrors a rotation
/// across the body's sagittal plane.
pub fn mirror_6d(r: &Rot6) -> Rot6 {
    [r[0], -r[1], -r[2], -r[3], r[4], r[5]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn collinear_columns_are_rejected() {
        assert!(from_6d(&[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]).is_err());
        assert!(from_6d(&[0.0; 6]).is_err());
    }

    #[test]
    fn yaw_quarter_turn() {
        let m = yaw(std::f64::consts::FRAC_PI_2);
        let v = m * Vec3::new(1.0, 0.0, 0.0);
        assert!((v - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-15);
    }

    proptest! {
        #[test]
        fn matrix_6d_round_trip(ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in 0.1f64..1.0, angle in -3.1f64..3.1) {
            let m = axis_angle(Vec3::new(ax, ay, az), angle);
            let back = from_6d(&to_6d(&m)).unwrap();
            prop_assert!((back - m).norm() < 1e-10);
        }

        #[test]
        fn from_6d_is_special_orthogonal(r in proptest::array::uniform6(-2.0f64..2.0)) {
            if let Ok(m) = from_6d(&r) {
                prop_assert!((m.determinant() - 1.0).abs() < 1e-8);
                prop_assert!((m.transpose() * m - Mat3::identity()).norm() < 1e-8);
            }
        }

        #[test]
        fn mirror_is_reflection_conjugate(ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in 0.1f64..1.0, angle in -3.1f64..3.1) {
            let m = axis_angle(Vec3::new(ax, ay, az), angle);
            let reflect = Mat3::from_diagonal(&Vec3::new(-1.0, 1.0, 1.0));
            let expected = to_6d(&(reflect * m * reflect));
            let got = mirror_6d(&to_6d(&m));
            for k in 0..6 {
                prop_assert!((expected[k] - got[k]).abs() < 1e-14);
            }
        }
    }
}
