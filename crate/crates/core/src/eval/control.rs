use crate::control::TrajectoryConstraint;
use crate::error::{Error, Result};
use crate::representation::{local_to_global, MotionSequence, Pose, JOINT_COUNT};

/// Trajectory-control errors at a distance threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlReport {
    /// Fraction of samples with any active entry beyond the threshold.
    pub traj_err_50cm: f64,
    /// Fraction of active entries beyond the threshold.
    pub loc_err_50cm: f64,
    /// Mean position error over active entries, in meters.
    pub avg_err: f64,
}

/// Per-sample world-position errors at active entries, pooled into a report.
pub fn control_metrics(
    pred: &[Vec<Pose>],
    target: &[Vec<Pose>],
    masks: &[Vec<[bool; JOINT_COUNT]>],
    threshold: f64,
) -> Result<ControlReport> {
    if pred.len() != target.len() || pred.len() != masks.len() {
        return Err(Error::Dim("control metrics need one target and mask per prediction".into()));
    }
    let errors: Vec<Vec<f64>> = pred
        .iter()
        .zip(target)
        .zip(masks)
        .map(|((p, t), m)| {
            if p.len() != m.len() || t.len() != m.len() {
                return Err(Error::Dim("prediction, target and mask disagree on frames".into()));
            }
            Ok(m.iter()
                .enumerate()
                .flat_map(|(f, row)| row.iter().enumerate().filter(|(_, &a)| a).map(move |(j, _)| (p[f][j] - t[f][j]).norm()))
                .collect())
        })
        .collect::<Result<_>>()?;
    report_from_errors(&errors, threshold)
}

/// Errors of each motion against the targets of its constraint.
pub fn constraint_metrics(
    motions: &[MotionSequence],
    constraints: &[TrajectoryConstraint],
    threshold: f64,
) -> Result<ControlReport> {
    if motions.len() != constraints.len() {
        return Err(Error::Dim("one constraint per motion".into()));
    }
    let errors: Vec<Vec<f64>> = motions
        .iter()
        .zip(constraints)
        .map(|(m, c)| {
            if m.frames() != c.frames() {
                return Err(Error::Dim(format!("{}-frame motion against a {}-frame constraint", m.frames(), c.frames())));
            }
            let world = local_to_global(m);
            Ok(c.active().map(|(t, j, p)| (world[t][j] - p).norm()).collect())
        })
        .collect::<Result<_>>()?;
    report_from_errors(&errors, threshold)
}

fn report_from_errors(errors: &[Vec<f64>], threshold: f64) -> Result<ControlReport> {
    let n: usize = errors.iter().map(Vec::len).sum();
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    let failed = errors.iter().filter(|e| e.iter().any(|&d| d > threshold)).count();
    let over = errors.iter().flatten().filter(|&&d| d > threshold).count();
    let sum: f64 = errors.iter().flatten().sum();
    Ok(ControlReport {
        traj_err_50cm: failed as f64 / errors.len() as f64,
        loc_err_50cm: over as f64 / n as f64,
        avg_err: sum / n as f64,
    })
}
