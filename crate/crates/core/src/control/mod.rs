//! Sparse joint-trajectory constraints, the control loss, the spatial
//! encoder and the trainable control branch attached to a frozen generator.

pub mod branch;
pub mod constraint;
pub mod loss;

pub use branch::{
    controlled_generate, train_control, trajectory_input, ControlExample, ControlModel, ControlledGenerator,
    SpatialEncoder,
};
pub use constraint::{parse_joint, parse_joint_list, TrajectoryConstraint};
pub use loss::{control_loss, control_loss_poses, control_loss_var, local_to_global_var};
