//! Skeleton, rotation math, the 263-dimensional motion encoding and the
//! kinematic-group decomposition.

pub mod kinematics;
pub mod motion;
pub mod normalize;
pub mod rotation;
pub mod skeleton;

pub use kinematics::{
    decompose, forward_kinematics, local_to_global, pair_features, recompose, Decomposition, GroupFeatures,
    PairFeatures,
};
pub use normalize::FeatureNormalizer;
pub use motion::{MotionSequence, MotionViews, Pose, RootState, RootTrajectory, FEATURE_DIM, FRAME_RATE};
pub use rotation::Rot6;
pub use skeleton::{GroupConnectivity, GroupPair, JointSkeleton, KinematicGroup, Vec3, JOINT_COUNT};
