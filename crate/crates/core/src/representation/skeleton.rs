use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Joints in the 22-joint SMPL body ordering.
pub const JOINT_COUNT: usize = 22;

pub const JOINT_NAMES: [&str; JOINT_COUNT] = [
    "pelvis",
    "left_hip",
    "right_hip",
    "spine1",
    "left_knee",
    "right_knee",
    "spine2",
    "left_ankle",
    "right_ankle",
    "spine3",
    "left_foot",
    "right_foot",
    "neck",
    "left_collar",
    "right_collar",
    "head",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
];

/// Left/right joint pairs swapped by mirroring.
pub const MIRROR_PAIRS: [(usize, usize); 8] =
    [(1, 2), (4, 5), (7, 8), (10, 11), (13, 14), (16, 17), (18, 19), (20, 21)];

/// The six kinematic groups, in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KinematicGroup {
    Torso,
    Neck,
    LeftArm,
    RightArm,
    LeftLeg,
    RightLeg,
}

impl KinematicGroup {
    pub const ALL: [KinematicGroup; 6] = [
        KinematicGroup::Torso,
        KinematicGroup::Neck,
        KinematicGroup::LeftArm,
        KinematicGroup::RightArm,
        KinematicGroup::LeftLeg,
        KinematicGroup::RightLeg,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            KinematicGroup::Torso => "Torso",
            KinematicGroup::Neck => "Neck",
            KinematicGroup::LeftArm => "LeftArm",
            KinematicGroup::RightArm => "RightArm",
            KinematicGroup::LeftLeg => "LeftLeg",
            KinematicGroup::RightLeg => "RightLeg",
        }
    }

    /// Lower-case phrase used in generated texts ("the left arm").
    pub fn phrase(self) -> &'static str {
        match self {
            KinematicGroup::Torso => "the torso",
            KinematicGroup::Neck => "the head",
            KinematicGroup::LeftArm => "the left arm",
            KinematicGroup::RightArm => "the right arm",
            KinematicGroup::LeftLeg => "the left leg",
            KinematicGroup::RightLeg => "the right leg",
        }
    }

    /// Left/right counterpart; central groups map to themselves.
    pub fn mirrored(self) -> Self {
        match self {
            KinematicGroup::LeftArm => KinematicGroup::RightArm,
            KinematicGroup::RightArm => KinematicGroup::LeftArm,
            KinematicGroup::LeftLeg => KinematicGroup::RightLeg,
            KinematicGroup::RightLeg => KinematicGroup::LeftLeg,
            g => g,
        }
    }
}

impl fmt::Display for KinematicGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KinematicGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KinematicGroup::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::format("kinematic group", format!("unknown group {s:?}")))
    }
}

/// Unordered group pair, stored with `first < second`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupPair {
    pub first: KinematicGroup,
    pub second: KinematicGroup,
}

impl GroupPair {
    /// Panics if `a == b`.
    pub fn new(a: KinematicGroup, b: KinematicGroup) -> Self {
        assert_ne!(a, b, "a group pair needs two distinct groups");
        if a < b {
            Self { first: a, second: b }
        } else {
            Self { first: b, second: a }
        }
    }

    /// All C(6,2) = 15 pairs in lexicographic order.
    pub fn all() -> Vec<GroupPair> {
        let mut out = Vec::with_capacity(15);
        for (i, &a) in KinematicGroup::ALL.iter().enumerate() {
            for &b in &KinematicGroup::ALL[i + 1..] {
                out.push(GroupPair { first: a, second: b });
            }
        }
        out
    }

    pub fn index(self) -> usize {
        GroupPair::all().iter().position(|p| *p == self).expect("pair is canonical")
    }

    pub fn mirrored(self) -> Self {
        GroupPair::new(self.first.mirrored(), self.second.mirrored())
    }
}

impl fmt::Display for GroupPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.first, self.second)
    }
}

/// Tree-structured 22-joint skeleton with a group assignment per joint.
#[derive(Clone, Debug, PartialEq)]
pub struct JointSkeleton {
    pub parent: [Option<usize>; JOINT_COUNT],
    /// Rest-pose offset of each joint from its parent, meters.
    pub rest_offsets: [Vec3; JOINT_COUNT],
    pub group_of: [KinematicGroup; JOINT_COUNT],
}

impl JointSkeleton {
    /// SMPL kinematic chain with a T-pose rest configuration.
    /// `+x` is the body's left, `+y` up, `+z` forward.
    pub fn smpl() -> Self {
        use KinematicGroup::*;
        let parents: [i32; JOINT_COUNT] = [-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19];
        let offsets: [[f64; 3]; JOINT_COUNT] = [
            [0.0, 0.0, 0.0],
            [0.06, -0.09, 0.0],
            [-0.06, -0.09, 0.0],
            [0.0, 0.11, 0.0],
            [0.0, -0.38, 0.0],
            [0.0, -0.38, 0.0],
            [0.0, 0.13, 0.0],
            [0.0, -0.40, 0.0],
            [0.0, -0.40, 0.0],
            [0.0, 0.05, 0.0],
            [0.0, -0.05, 0.12],
            [0.0, -0.05, 0.12],
            [0.0, 0.21, 0.0],
            [0.08, 0.12, 0.0],
            [-0.08, 0.12, 0.0],
            [0.0, 0.09, 0.05],
            [0.12, 0.04, 0.0],
            [-0.12, 0.04, 0.0],
            [0.25, 0.0, 0.0],
            [-0.25, 0.0, 0.0],
            [0.25, 0.0, 0.0],
            [-0.25, 0.0, 0.0],
        ];
        let mut group_of = [Torso; JOINT_COUNT];
        for (groups, joints) in [
            (Torso, &[0usize, 3, 6, 9][..]),
            (Neck, &[12, 15][..]),
            (LeftArm, &[13, 16, 18, 20][..]),
            (RightArm, &[14, 17, 19, 21][..]),
            (LeftLeg, &[1, 4, 7, 10][..]),
            (RightLeg, &[2, 5, 8, 11][..]),
        ] {
            for &j in joints {
                group_of[j] = groups;
            }
        }
        let parent = parents.map(|p| usize::try_from(p).ok());
        let rest_offsets = offsets.map(|o| Vec3::new(o[0], o[1], o[2]));
        Self { parent, rest_offsets, group_of }
    }

    pub fn members(&self, group: KinematicGroup) -> Vec<usize> {
        (0..JOINT_COUNT).filter(|&j| self.group_of[j] == group).collect()
    }

    /// Height of the pelvis above the lowest rest-pose joint.
    pub fn rest_pelvis_height(&self) -> f64 {
        let pose = self.rest_positions();
        -pose.iter().map(|p| p.y).fold(f64::INFINITY, f64::min)
    }

    /// Rest-pose joint positions with the pelvis at the origin.
    pub fn rest_positions(&self) -> [Vec3; JOINT_COUNT] {
        let mut out = [Vec3::zeros(); JOINT_COUNT];
        for j in 1..JOINT_COUNT {
            let p = self.parent[j].expect("non-root joint has a parent");
            out[j] = out[p] + self.rest_offsets[j];
        }
        out
    }

    /// Checks the tree and group invariants.
    pub fn validate(&self) -> Result<()> {
        if self.parent[0].is_some() {
            return Err(Error::InvalidMotion("joint 0 must be the root".into()));
        }
        for j in 1..JOINT_COUNT {
            match self.parent[j] {
                // Parents precede children, which rules out cycles.
                Some(p) if p < j => {}
                _ => return Err(Error::InvalidMotion(format!("joint {j} has an invalid parent"))),
            }
        }
        for g in KinematicGroup::ALL {
            if self.members(g).is_empty() {
                return Err(Error::InvalidMotion(format!("group {g} has no joints")));
            }
        }
        Ok(())
    }
}

impl Default for JointSkeleton {
    fn default() -> Self {
        Self::smpl()
    }
}

/// Which group pairs are physically connected, and through which joint.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupConnectivity {
    pub connecting_joint: BTreeMap<GroupPair, usize>,
}

impl GroupConnectivity {
    pub fn is_connected(&self, pair: GroupPair) -> bool {
        self.connecting_joint.contains_key(&pair)
    }

    pub fn connected_pairs(&self) -> impl Iterator<Item = GroupPair> + '_ {
        self.connecting_joint.keys().copied()
    }
}

impl Default for GroupConnectivity {
    /// The torso connects to every other group through the first joint of
    /// that group's chain; no other pair touches.
    fn default() -> Self {
        use KinematicGroup::*;
        let connecting_joint = [(Neck, 12), (LeftArm, 13), (RightArm, 14), (LeftLeg, 1), (RightLeg, 2)]
            .into_iter()
            .map(|(g, j)| (GroupPair::new(Torso, g), j))
            .collect();
        Self { connecting_joint }
    }
}
