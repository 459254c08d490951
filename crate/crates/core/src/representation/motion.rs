//! The 263-dimensional per-frame motion encoding.
//!
//! | Columns   | Channel                     | Unit        |
//! |-----------|-----------------------------|-------------|
//! | 0         | root angular velocity (yaw) | rad/frame   |
//! | 1..3      | root linear velocity (x, z) | m/frame     |
//! | 3         | root height                 | m           |
//! | 4..67     | local positions, joints 1–21| m           |
//! | 67..193   | local 6D rotations, 1–21    | unitless    |
//! | 193..259  | joint velocities, 0–21      | m/frame     |
//! | 259..263  | foot contacts               | probability |
//!
//! Local positions are root-relative and expressed in the root's facing
//! frame. Root velocities and joint velocities are forward differences
//! expressed in the facing frame of the current frame; the last frame
//! repeats the previous frame's values.

use super::rotation::{self, Rot6, IDENTITY_6D};
use super::skeleton::{JointSkeleton, Vec3, JOINT_COUNT, MIRROR_PAIRS};
use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const FEATURE_DIM: usize = 263;
pub const ROOT_ANG_VEL: usize = 0;
pub const ROOT_LIN_VEL: usize = 1;
pub const ROOT_HEIGHT: usize = 3;
pub const LOCAL_POS: usize = 4;
pub const ROT_6D: usize = 4 + 63;
pub const JOINT_VEL: usize = ROT_6D + 126;
pub const FOOT_CONTACT: usize = JOINT_VEL + 66;

/// Frame rate the velocity units refer to.
pub const FRAME_RATE: f64 = 20.0;

/// Foot joints whose contacts are recorded: left ankle, left foot,
/// right ankle, right foot.
pub const FOOT_JOINTS: [usize; 4] = [7, 10, 8, 11];

/// Squared per-frame displacement below which a foot joint counts as planted.
pub const CONTACT_SPEED_SQ: f64 = 0.002;

pub type Pose = [Vec3; JOINT_COUNT];

/// Per-frame root channels.
#[derive(Clone, Debug, PartialEq)]
pub struct RootState {
    pub angular_velocity: Vec<f64>,
    pub linear_velocity: Vec<[f64; 2]>,
    pub height: Vec<f64>,
}

impl RootState {
    pub fn frames(&self) -> usize {
        self.height.len()
    }

    pub fn still(frames: usize, height: f64) -> Self {
        Self { angular_velocity: vec![0.0; frames], linear_velocity: vec![[0.0; 2]; frames], height: vec![height; frames] }
    }

    fn validate(&self) -> Result<()> {
        let t = self.height.len();
        if t == 0 || self.angular_velocity.len() != t || self.linear_velocity.len() != t {
            return Err(Error::InvalidMotion("root channels disagree on frame count".into()));
        }
        Ok(())
    }

    /// Integrated world trajectory: yaw angle and root position per frame.
    ///
    /// `yaw(0) = 0` and `root(0) = (0, h₀, 0)`; each frame's velocities move
    /// the root into the next frame.
    pub fn integrate(&self) -> RootTrajectory {
        let t = self.frames();
        let mut yaw = Vec::with_capacity(t);
        let mut position = Vec::with_capacity(t);
        let (mut angle, mut x, mut z) = (0.0, 0.0, 0.0);
        for f in 0..t {
            yaw.push(angle);
            position.push(Vec3::new(x, self.height[f], z));
            let [vx, vz] = self.linear_velocity[f];
            let world = rotation::yaw(angle) * Vec3::new(vx, 0.0, vz);
            x += world.x;
            z += world.z;
            angle += self.angular_velocity[f];
        }
        RootTrajectory { yaw, position }
    }
}

/// World-frame root path.
#[derive(Clone, Debug, PartialEq)]
pub struct RootTrajectory {
    pub yaw: Vec<f64>,
    pub position: Vec<Vec3>,
}

impl RootTrajectory {
    /// Inverse of [`RootState::integrate`]; root heights are taken from the positions.
    pub fn to_root_state(&self) -> RootState {
        let t = self.position.len();
        let mut out = RootState::still(t, 0.0);
        for f in 0..t {
            out.height[f] = self.position[f].y;
            if f + 1 < t {
                out.angular_velocity[f] = self.yaw[f + 1] - self.yaw[f];
                let d = self.position[f + 1] - self.position[f];
                let local = rotation::yaw(-self.yaw[f]) * Vec3::new(d.x, 0.0, d.z);
                out.linear_velocity[f] = [local.x, local.z];
            } else if f > 0 {
                out.angular_velocity[f] = out.angular_velocity[f - 1];
                out.linear_velocity[f] = out.linear_velocity[f - 1];
            }
        }
        out
    }
}

/// Typed views of every channel of a [`MotionSequence`].
#[derive(Clone, Debug, PartialEq)]
pub struct MotionViews {
    pub root: RootState,
    /// `T × 21` root-relative positions of joints 1–21.
    pub local_positions: Vec<[Vec3; JOINT_COUNT - 1]>,
    /// `T × 21` local rotations of joints 1–21.
    pub rotations_6d: Vec<[Rot6; JOINT_COUNT - 1]>,
    /// `T × 22` joint velocities.
    pub joint_velocities: Vec<Pose>,
    pub foot_contacts: Vec<[f64; 4]>,
}

/// A `T × 263` motion.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionSequence {
    features: Tensor,
}

impl MotionSequence {
    /// Validates shape, finiteness and contact ranges.
    pub fn new(features: Tensor) -> Result<Self> {
        if features.cols() != FEATURE_DIM {
            return Err(Error::InvalidMotion(format!("feature width {} != {FEATURE_DIM}", features.cols())));
        }
        if features.rows() == 0 {
            return Err(Error::InvalidMotion("motion has no frames".into()));
        }
        if !features.is_finite() {
            return Err(Error::InvalidMotion("non-finite feature value".into()));
        }
        for t in 0..features.rows() {
            for c in FOOT_CONTACT..FEATURE_DIM {
                let v = features.get(t, c);
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidMotion(format!("foot contact {v} at frame {t} outside [0,1]")));
                }
            }
        }
        Ok(Self { features })
    }

    /// Skips validation; foot contacts are clamped into `[0, 1]`.
    /// Used for network outputs.
    pub fn from_network_output(mut features: Tensor) -> Result<Self> {
        if features.cols() != FEATURE_DIM || features.rows() == 0 {
            return Err(Error::InvalidMotion(format!("network output shape {:?}", features.shape())));
        }
        for t in 0..features.rows() {
            for c in FOOT_CONTACT..FEATURE_DIM {
                let v = features.get(t, c);
                features.set(t, c, if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) });
            }
        }
        Self::new(features)
    }

    pub fn frames(&self) -> usize {
        self.features.rows()
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn into_features(self) -> Tensor {
        self.features
    }

    pub fn root_state(&self) -> RootState {
        let t = self.frames();
        let f = &self.features;
        RootState {
            angular_velocity: (0..t).map(|i| f.get(i, ROOT_ANG_VEL)).collect(),
            linear_velocity: (0..t).map(|i| [f.get(i, ROOT_LIN_VEL), f.get(i, ROOT_LIN_VEL + 1)]).collect(),
            height: (0..t).map(|i| f.get(i, ROOT_HEIGHT)).collect(),
        }
    }

    /// Position of joint `j ∈ 1..22` relative to the root, facing frame.
    pub fn local_position(&self, t: usize, j: usize) -> Vec3 {
        assert!((1..JOINT_COUNT).contains(&j), "joint {j} has no stored local position");
        let c = LOCAL_POS + 3 * (j - 1);
        let r = self.features.row(t);
        Vec3::new(r[c], r[c + 1], r[c + 2])
    }

    /// Local rotation of joint `j ∈ 1..22`.
    pub fn rotation_6d(&self, t: usize, j: usize) -> Rot6 {
        assert!((1..JOINT_COUNT).contains(&j), "joint {j} has no stored rotation");
        let c = ROT_6D + 6 * (j - 1);
        let mut out = [0.0; 6];
        out.copy_from_slice(&self.features.row(t)[c..c + 6]);
        out
    }

    pub fn joint_velocity(&self, t: usize, j: usize) -> Vec3 {
        let c = JOINT_VEL + 3 * j;
        let r = self.features.row(t);
        Vec3::new(r[c], r[c + 1], r[c + 2])
    }

    pub fn foot_contacts(&self, t: usize) -> [f64; 4] {
        let r = self.features.row(t);
        [r[FOOT_CONTACT], r[FOOT_CONTACT + 1], r[FOOT_CONTACT + 2], r[FOOT_CONTACT + 3]]
    }

    /// Root-relative positions of all 22 joints with the root height
    /// restored on the vertical axis. The root itself sits at `(0, h, 0)`.
    pub fn body_positions(&self) -> Vec<Pose> {
        (0..self.frames())
            .map(|t| {
                let h = self.features.get(t, ROOT_HEIGHT);
                let lift = Vec3::new(0.0, h, 0.0);
                let mut pose = [lift; JOINT_COUNT];
                for (j, p) in pose.iter_mut().enumerate().skip(1) {
                    *p = self.local_position(t, j) + lift;
                }
                pose
            })
            .collect()
    }

    pub fn views(&self) -> MotionViews {
        let t = self.frames();
        MotionViews {
            root: self.root_state(),
            local_positions: (0..t).map(|i| std::array::from_fn(|k| self.local_position(i, k + 1))).collect(),
            rotations_6d: (0..t).map(|i| std::array::from_fn(|k| self.rotation_6d(i, k + 1))).collect(),
            joint_velocities: (0..t).map(|i| std::array::from_fn(|j| self.joint_velocity(i, j))).collect(),
            foot_contacts: (0..t).map(|i| self.foot_contacts(i)).collect(),
        }
    }

    /// Packs typed views back into the feature matrix.
    pub fn from_views(v: &MotionViews) -> Result<Self> {
        v.root.validate()?;
        let t = v.root.frames();
        if v.local_positions.len() != t
            || v.rotations_6d.len() != t
            || v.joint_velocities.len() != t
            || v.foot_contacts.len() != t
        {
            return Err(Error::InvalidMotion("views disagree on frame count".into()));
        }
        let mut f = Tensor::zeros(t, FEATURE_DIM);
        for i in 0..t {
            let row = f.row_mut(i);
            row[ROOT_ANG_VEL] = v.root.angular_velocity[i];
            row[ROOT_LIN_VEL] = v.root.linear_velocity[i][0];
            row[ROOT_LIN_VEL + 1] = v.root.linear_velocity[i][1];
            row[ROOT_HEIGHT] = v.root.height[i];
            for (k, p) in v.local_positions[i].iter().enumerate() {
                row[LOCAL_POS + 3 * k..LOCAL_POS + 3 * k + 3].copy_from_slice(p.as_slice());
            }
            for (k, r) in v.rotations_6d[i].iter().enumerate() {
                row[ROT_6D + 6 * k..ROT_6D + 6 * k + 6].copy_from_slice(r);
            }
            for (j, vel) in v.joint_velocities[i].iter().enumerate() {
                row[JOINT_VEL + 3 * j..JOINT_VEL + 3 * j + 3].copy_from_slice(vel.as_slice());
            }
            row[FOOT_CONTACT..FEATURE_DIM].copy_from_slice(&v.foot_contacts[i]);
        }
        Self::new(f)
    }

    /// Builds a kinematically consistent motion from local joint rotations
    /// and root channels: positions by forward kinematics, velocities by
    /// forward differences of world positions, contacts by a speed threshold.
    pub fn from_kinematics(rotations: &[[Rot6; JOINT_COUNT - 1]], root: &RootState, skeleton: &JointSkeleton) -> Result<Self> {
        root.validate()?;
        let t = root.frames();
        if rotations.len() != t {
            return Err(Error::InvalidMotion(format!("{} rotation frames for {t} root frames", rotations.len())));
        }
        let mut local = Vec::with_capacity(t);
        for frame in rotations {
            let pose = super::kinematics::local_fk(frame, skeleton)?;
            local.push(std::array::from_fn(|k| pose[k + 1]));
        }
        let trajectory = root.integrate();
        let world: Vec<Pose> = (0..t).map(|f| place(&local[f], &trajectory, f)).collect();
        let mut velocities = vec![[Vec3::zeros(); JOINT_COUNT]; t];
        for f in 0..t.saturating_sub(1) {
            let inv = rotation::yaw(-trajectory.yaw[f]);
            velocities[f] = std::array::from_fn(|j| inv * (world[f + 1][j] - world[f][j]));
        }
        if t > 1 {
            velocities[t - 1] = velocities[t - 2];
        }
        let foot_contacts = velocities
            .iter()
            .map(|v| FOOT_JOINTS.map(|j| if v[j].norm_squared() < CONTACT_SPEED_SQ { 1.0 } else { 0.0 }))
            .collect();
        Self::from_views(&MotionViews {
            root: root.clone(),
            local_positions: local,
            rotations_6d: rotations.to_vec(),
            joint_velocities: velocities,
            foot_contacts,
        })
    }

    /// Rest pose held for `frames` frames at standing height.
    pub fn rest(frames: usize, skeleton: &JointSkeleton) -> Result<Self> {
        let rotations = vec![[IDENTITY_6D; JOINT_COUNT - 1]; frames];
        Self::from_kinematics(&rotations, &RootState::still(frames, skeleton.rest_pelvis_height()), skeleton)
    }

    /// Left/right reflection across the sagittal plane.
    pub fn mirrored(&self) -> Self {
        let mut v = self.views();
        for a in &mut v.root.angular_velocity {
            *a = -*a;
        }
        for l in &mut v.root.linear_velocity {
            l[0] = -l[0];
        }
        let reflect = |p: Vec3| Vec3::new(-p.x, p.y, p.z);
        for t in 0..self.frames() {
            let mut pos = v.local_positions[t].map(reflect);
            let mut rot = v.rotations_6d[t].map(|r| rotation::mirror_6d(&r));
            let mut vel = v.joint_velocities[t].map(reflect);
            for (a, b) in MIRROR_PAIRS {
                pos.swap(a - 1, b - 1);
                rot.swap(a - 1, b - 1);
                vel.swap(a, b);
            }
            v.local_positions[t] = pos;
            v.rotations_6d[t] = rot;
            v.joint_velocities[t] = vel;
            let c = v.foot_contacts[t];
            v.foot_contacts[t] = [c[2], c[3], c[0], c[1]];
        }
        Self::from_views(&v).expect("mirroring preserves validity")
    }
}

/// World positions for frame `f`: root-relative pose rotated by the root
/// yaw and translated to the root position.
pub(crate) fn place(local: &[Vec3; JOINT_COUNT - 1], trajectory: &RootTrajectory, f: usize) -> Pose {
    let r = rotation::yaw(trajectory.yaw[f]);
    let root = trajectory.position[f];
    let mut out = [root; JOINT_COUNT];
    for (j, p) in local.iter().enumerate() {
        out[j + 1] = root + r * p;
    }
    out
}
