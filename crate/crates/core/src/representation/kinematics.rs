//! Forward kinematics, the local-to-global transform, and the kinematic
//! group decomposition with its inverse.

use std::collections::BTreeMap;

use super::motion::{place, MotionSequence, Pose, RootState};
use super::rotation::{self, Mat3, Rot6};
use super::skeleton::{GroupConnectivity, GroupPair, JointSkeleton, KinematicGroup, Vec3, JOINT_COUNT};
use crate::error::{Error, Result};

/// Forward kinematics with the root at the origin and unrotated.
/// `rotations[k]` is the local rotation of joint `k + 1`.
pub fn local_fk(rotations: &[Rot6; JOINT_COUNT - 1], skeleton: &JointSkeleton) -> Result<Pose> {
    let mut global = [Mat3::identity(); JOINT_COUNT];
    let mut pos = [Vec3::zeros(); JOINT_COUNT];
    for j in 1..JOINT_COUNT {
        let p = skeleton.parent[j].ok_or_else(|| Error::InvalidMotion(format!("joint {j} has no parent")))?;
        pos[j] = pos[p] + global[p] * skeleton.rest_offsets[j];
        let local = rotation::from_6d(&rotations[j - 1])
            .map_err(|e| Error::DegenerateRotation(format!("joint {j}: {e}")))?;
        global[j] = global[p] * local;
    }
    Ok(pos)
}

/// World joint positions from local rotations and root channels.
///
/// Joint `j` sits at its parent's position plus the parent's global
/// rotation applied to its rest offset; the root follows the integrated
/// root trajectory and carries its yaw.
pub fn forward_kinematics(rotations: &[[Rot6; JOINT_COUNT - 1]], root: &RootState, skeleton: &JointSkeleton) -> Result<Vec<Pose>> {
    if rotations.len() != root.frames() {
        return Err(Error::InvalidMotion(format!("{} rotation frames for {} root frames", rotations.len(), root.frames())));
    }
    let trajectory = root.integrate();
    rotations
        .iter()
        .enumerate()
        .map(|(f, frame)| {
            let pose = local_fk(frame, skeleton)?;
            let local: [Vec3; JOINT_COUNT - 1] = std::array::from_fn(|k| pose[k + 1]);
            Ok(place(&local, &trajectory, f))
        })
        .collect()
}

/// Stored local positions transformed into world coordinates through the
/// integrated root trajectory.
pub fn local_to_global(motion: &MotionSequence) -> Vec<Pose> {
    let trajectory = motion.root_state().integrate();
    (0..motion.frames())
        .map(|f| {
            let local: [Vec3; JOINT_COUNT - 1] = std::array::from_fn(|k| motion.local_position(f, k + 1));
            place(&local, &trajectory, f)
        })
        .collect()
}

/// Per-group aggregate features.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupFeatures {
    pub group: KinematicGroup,
    /// Member joints, ascending; `limb_angles[t][k]` belongs to `joints[k]`.
    pub joints: Vec<usize>,
    /// Mean member position per frame (root-relative, height restored).
    pub position: Vec<Vec3>,
    /// Member rotations per frame. The root's entry is its facing yaw.
    pub limb_angles: Vec<Vec<Rot6>>,
    /// Mean member velocity per frame.
    pub velocity: Vec<Vec3>,
}

impl GroupFeatures {
    pub fn frames(&self) -> usize {
        self.position.len()
    }

    fn rotation_of(&self, joint: usize) -> Option<Vec<Rot6>> {
        let k = self.joints.iter().position(|&j| j == joint)?;
        Some(self.limb_angles.iter().map(|frame| frame[k]).collect())
    }
}

/// Relative features of an ordered group pair `(g, h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairFeatures {
    pub from: KinematicGroup,
    pub to: KinematicGroup,
    /// `P_h − P_g`.
    pub delta_position: Vec<Vec3>,
    /// Rotation of the connecting joint; connected pairs only.
    pub delta_angles: Option<Vec<Rot6>>,
    /// `V_h − V_g`; connected pairs only.
    pub delta_velocity: Option<Vec<Vec3>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub groups: BTreeMap<KinematicGroup, GroupFeatures>,
    /// Keyed by canonical pair; features point from `pair.first` to `pair.second`.
    pub pairs: BTreeMap<GroupPair, PairFeatures>,
}

fn mean(points: impl Iterator<Item = Vec3>) -> Vec3 {
    let mut sum = Vec3::zeros();
    let mut n = 0usize;
    for p in points {
        sum += p;
        n += 1;
    }
    sum / n as f64
}

/// Group aggregates for one group.
pub fn group_features(motion: &MotionSequence, skeleton: &JointSkeleton, group: KinematicGroup) -> GroupFeatures {
    let joints = skeleton.members(group);
    let body = motion.body_positions();
    let yaw = motion.root_state().integrate().yaw;
    let t = motion.frames();
    GroupFeatures {
        group,
        position: (0..t).map(|f| mean(joints.iter().map(|&j| body[f][j]))).collect(),
        limb_angles: (0..t)
            .map(|f| {
                joints
                    .iter()
                    .map(|&j| if j == 0 { rotation::to_6d(&rotation::yaw(yaw[f])) } else { motion.rotation_6d(f, j) })
                    .collect()
            })
            .collect(),
        velocity: (0..t).map(|f| mean(joints.iter().map(|&j| motion.joint_velocity(f, j)))).collect(),
        joints,
    }
}

/// Interaction features from `g` to `h`. Works for either orientation.
pub fn pair_features(
    groups: &BTreeMap<KinematicGroup, GroupFeatures>,
    from: KinematicGroup,
    to: KinematicGroup,
    connectivity: &GroupConnectivity,
) -> Result<PairFeatures> {
    let missing = |g: KinematicGroup| Error::IncompleteDecomposition(format!("group {g} missing"));
    let a = groups.get(&from).ok_or_else(|| missing(from))?;
    let b = groups.get(&to).ok_or_else(|| missing(to))?;
    let delta_position = a.position.iter().zip(&b.position).map(|(pg, ph)| ph - pg).collect();
    let (delta_angles, delta_velocity) = match connectivity.connecting_joint.get(&GroupPair::new(from, to)) {
        Some(&joint) => {
            let angles = a
                .rotation_of(joint)
                .or_else(|| b.rotation_of(joint))
                .ok_or_else(|| Error::IncompleteDecomposition(format!("connecting joint {joint} not in {from} or {to}")))?;
            let vel = a.velocity.iter().zip(&b.velocity).map(|(vg, vh)| vh - vg).collect();
            (Some(angles), Some(vel))
        }
        None => (None, None),
    };
    Ok(PairFeatures { from, to, delta_position, delta_angles, delta_velocity })
}

/// Six group aggregates and fifteen pair features.
pub fn decompose(motion: &MotionSequence, skeleton: &JointSkeleton, connectivity: &GroupConnectivity) -> Result<Decomposition> {
    skeleton.validate()?;
    if motion.features().cols() != super::motion::FEATURE_DIM {
        return Err(Error::InvalidMotion("feature width mismatch".into()));
    }
    let groups: BTreeMap<_, _> =
        KinematicGroup::ALL.iter().map(|&g| (g, group_features(motion, skeleton, g))).collect();
    let pairs = GroupPair::all()
        .into_iter()
        .map(|p| Ok((p, pair_features(&groups, p.first, p.second, connectivity)?)))
        .collect::<Result<_>>()?;
    Ok(Decomposition { groups, pairs })
}

/// Rebuilds a motion from group rotations and root channels.
///
/// Rotations and root channels are copied; positions are regenerated by
/// forward kinematics and velocities by finite differences.
pub fn recompose(
    groups: &BTreeMap<KinematicGroup, GroupFeatures>,
    root: &RootState,
    skeleton: &JointSkeleton,
) -> Result<MotionSequence> {
    let t = root.frames();
    let mut rotations: Vec<[Option<Rot6>; JOINT_COUNT - 1]> = vec![[None; JOINT_COUNT - 1]; t];
    for g in KinematicGroup::ALL {
        let gf = groups.get(&g).ok_or_else(|| Error::IncompleteDecomposition(format!("group {g} missing")))?;
        if gf.limb_angles.len() != t {
            return Err(Error::InvalidMotion(format!("group {g} has {} frames, root has {t}", gf.limb_angles.len())));
        }
        for (f, frame) in gf.limb_angles.iter().enumerate() {
            if frame.len() != gf.joints.len() {
                return Err(Error::IncompleteDecomposition(format!("group {g} frame {f} has {} angles", frame.len())));
            }
            for (&j, r) in gf.joints.iter().zip(frame) {
                if j > 0 {
                    rotations[f][j - 1] = Some(*r);
                }
            }
        }
    }
    let rotations = rotations
        .into_iter()
        .map(|frame| {
            let mut out = [[0.0; 6]; JOINT_COUNT - 1];
            for (k, r) in frame.into_iter().enumerate() {
                out[k] = r.ok_or_else(|| Error::IncompleteDecomposition(format!("no rotation for joint {}", k + 1)))?;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    MotionSequence::from_kinematics(&rotations, root, skeleton)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::representation::motion::RootState;
    use crate::representation::rotation::{axis_angle, to_6d, IDENTITY_6D};
    use std::f64::consts::FRAC_PI_2;

    fn toy_motion(frames: usize) -> MotionSequence {
        let s = JointSkeleton::smpl();
        let rotations: Vec<[Rot6; 21]> = (0..frames)
            .map(|t| {
                std::array::from_fn(|k| {
                    to_6d(&axis_angle(Vec3::new(0.3 * k as f64, 1.0, 0.5), 0.05 * (t * (k + 1)) as f64))
                })
            })
            .collect();
        let mut root = RootState::still(frames, 0.92);
        root.angular_velocity = (0..frames).map(|t| 0.02 * t as f64).collect();
        root.linear_velocity = (0..frames).map(|t| [0.01, 0.03 - 0.001 * t as f64]).collect();
        MotionSequence::from_kinematics(&rotations, &root, &s).unwrap()
    }

    #[test]
    fn identity_rotations_give_rest_pose_at_root_height() {
        let s = JointSkeleton::smpl();
        let rotations = vec![[IDENTITY_6D; 21]; 3];
        let root = RootState::still(3, 0.9);
        let world = forward_kinematics(&rotations, &root, &s).unwrap();
        let rest = s.rest_positions();
        for pose in &world {
            for j in 0..JOINT_COUNT {
                assert!((pose[j] - (rest[j] + Vec3::new(0.0, 0.9, 0.0))).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn degenerate_rotation_is_an_error() {
        let s = JointSkeleton::smpl();
        let mut rotations = vec![[IDENTITY_6D; 21]; 1];
        rotations[0][3] = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let err = forward_kinematics(&rotations, &RootState::still(1, 0.9), &s).unwrap_err();
        assert!(matches!(err, Error::DegenerateRotation(_)));
    }

    #[test]
    fn two_joint_chain_quarter_turn() {
        // Left hip rotated 90° about +z swings the knee offset (0,-0.38,0) to (0.38,0,0).
        let s = JointSkeleton::smpl();
        let mut rot = [IDENTITY_6D; 21];
        rot[0] = to_6d(&axis_angle(Vec3::z(), FRAC_PI_2));
        let pose = local_fk(&rot, &s).unwrap();
        let hip = Vec3::new(0.06, -0.09, 0.0);
        assert!((pose[1] - hip).norm() < 1e-15);
        assert!((pose[4] - (hip + Vec3::new(0.38, 0.0, 0.0))).norm() < 1e-12);
    }

    #[test]
    fn local_to_global_static_adds_height() {
        let s = JointSkeleton::smpl();
        let m = MotionSequence::rest(3, &s).unwrap();
        let g = local_to_global(&m);
        let h = s.rest_pelvis_height();
        for t in 0..3 {
            assert_eq!(g[t][0], Vec3::new(0.0, h, 0.0));
            for j in 1..JOINT_COUNT {
                assert!((g[t][j] - (m.local_position(t, j) + Vec3::new(0.0, h, 0.0))).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn local_to_global_matches_forward_kinematics() {
        let s = JointSkeleton::smpl();
        let m = toy_motion(7);
        let v = m.views();
        let fk = forward_kinematics(&v.rotations_6d, &v.root, &s).unwrap();
        let g = local_to_global(&m);
        for t in 0..7 {
            for j in 0..JOINT_COUNT {
                assert!((fk[t][j] - g[t][j]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn decompose_counts_and_connectivity() {
        let s = JointSkeleton::smpl();
        let d = decompose(&toy_motion(4), &s, &GroupConnectivity::default()).unwrap();
        assert_eq!(d.groups.len(), 6);
        assert_eq!(d.pairs.len(), 15);
        let connected = d.pairs.values().filter(|p| p.delta_angles.is_some()).count();
        assert_eq!(connected, 5);
        for p in d.pairs.values() {
            assert_eq!(p.delta_angles.is_some(), p.delta_velocity.is_some());
        }
        for gf in d.groups.values() {
            assert!(gf.limb_angles.iter().all(|f| f.len() == gf.joints.len()));
        }
    }

    #[test]
    fn missing_group_is_incomplete() {
        let s = JointSkeleton::smpl();
        let m = toy_motion(3);
        let mut d = decompose(&m, &s, &GroupConnectivity::default()).unwrap();
        d.groups.remove(&KinematicGroup::Neck);
        assert!(matches!(recompose(&d.groups, &m.root_state(), &s), Err(Error::IncompleteDecomposition(_))));
    }

    #[test]
    fn recompose_round_trip() {
        let s = JointSkeleton::smpl();
        let m = toy_motion(8);
        let d = decompose(&m, &s, &GroupConnectivity::default()).unwrap();
        let back = recompose(&d.groups, &m.root_state(), &s).unwrap();
        assert!(back.features().max_abs_diff(m.features()) < 1e-4);
        for t in 0..8 {
            for j in 1..JOINT_COUNT {
                assert_eq!(back.rotation_6d(t, j), m.rotation_6d(t, j));
            }
        }
        assert_eq!(back.root_state(), m.root_state());
    }
}
