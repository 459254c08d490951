use crate::error::{Error, Result};
use crate::representation::kinematics::{group_features, GroupFeatures, PairFeatures};
use crate::representation::{JointSkeleton, KinematicGroup, MotionSequence, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    /// Largest-magnitude component; ties resolve x, then y, then z.
    pub fn dominant(v: &Vec3) -> Axis {
        let (ax, ay, az) = (v.x.abs(), v.y.abs(), v.z.abs());
        if ax >= ay && ax >= az {
            Axis::X
        } else if ay >= az {
            Axis::Y
        } else {
            Axis::Z
        }
    }

    pub fn component(self, v: &Vec3) -> f64 {
        match self {
            Axis::X => v.x,
            Axis::Y => v.y,
            Axis::Z => v.z,
        }
    }
}

/// Local motion of one group over a time window.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSummary {
    pub window: (usize, usize),
    /// `P_g(t1) − P_g(t0)`, meters.
    pub displacement: Vec3,
    /// Mean `‖V_g(t)‖` for `t0 ≤ t < t1`, meters per frame.
    pub mean_speed: f64,
    pub dominant_axis: Axis,
}

impl WindowSummary {
    pub fn zero(frame: usize) -> Self {
        Self { window: (frame, frame), displacement: Vec3::zeros(), mean_speed: 0.0, dominant_axis: Axis::X }
    }
}

/// Change in relative placement of two groups over a time window.
#[derive(Clone, Debug, PartialEq)]
pub struct PairWindowSummary {
    pub window: (usize, usize),
    pub distance_start: f64,
    pub distance_end: f64,
    /// `ΔP(t1) − ΔP(t0)`.
    pub displacement: Vec3,
}

fn check_window(window: (usize, usize), frames: usize) -> Result<()> {
    let (t0, t1) = window;
    if t0 >= t1 || t1 >= frames {
        return Err(Error::InvalidWindow { t0, t1, frames });
    }
    Ok(())
}

/// Summary from precomputed group features.
pub fn summarize_group(features: &GroupFeatures, window: (usize, usize)) -> Result<WindowSummary> {
    check_window(window, features.frames())?;
    let (t0, t1) = window;
    let displacement = features.position[t1] - features.position[t0];
    let mean_speed = features.velocity[t0..t1].iter().map(|v| v.norm()).sum::<f64>() / (t1 - t0) as f64;
    Ok(WindowSummary { window, displacement, mean_speed, dominant_axis: Axis::dominant(&displacement) })
}

pub fn summarize_pair(features: &PairFeatures, window: (usize, usize)) -> Result<PairWindowSummary> {
    check_window(window, features.delta_position.len())?;
    let (t0, t1) = window;
    let (a, b) = (features.delta_position[t0], features.delta_position[t1]);
    Ok(PairWindowSummary { window, distance_start: a.norm(), distance_end: b.norm(), displacement: b - a })
}

/// Windowed estimate of a group's local motion between frames `t0 < t1`.
pub fn window_motion_estimate(
    motion: &MotionSequence,
    group: KinematicGroup,
    window: (usize, usize),
    skeleton: &JointSkeleton,
) -> Result<WindowSummary> {
    check_window(window, motion.frames())?;
    summarize_group(&group_features(motion, skeleton, group), window)
}
