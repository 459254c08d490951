use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::representation::{Pose, Vec3, JOINT_COUNT};

#[derive(Clone, Debug, PartialEq)]
pub struct KeypointFrame {
    pub frame: usize,
    pub joints: Pose,
}

/// One line per frame: the frame index followed by 22 × (x y z) global
/// positions in meters.
pub fn write_keypoints(poses: &[Pose]) -> String {
    let mut out = String::new();
    for (t, pose) in poses.iter().enumerate() {
        let _ = write!(out, "{t}");
        for p in pose {
            let _ = write!(out, " {} {} {}", p.x as f32, p.y as f32, p.z as f32);
        }
        out.push('\n');
    }
    out
}

pub fn parse_keypoints(text: &str) -> Result<Vec<KeypointFrame>> {
    let bad = |n: usize, m: String| Error::format("keypoints", format!("line {}: {m}", n + 1));
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 1 + 3 * JOINT_COUNT {
                return Err(bad(n, format!("expected {} fields, found {}", 1 + 3 * JOINT_COUNT, fields.len())));
            }
            let frame = fields[0].parse().map_err(|e| bad(n, format!("frame index: {e}")))?;
            let values = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| bad(n, format!("{f:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            let mut joints = [Vec3::zeros(); JOINT_COUNT];
            for (j, c) in values.chunks_exact(3).enumerate() {
                joints[j] = Vec3::new(c[0], c[1], c[2]);
            }
            Ok(KeypointFrame { frame, joints })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::representation::{local_to_global, JointSkeleton, MotionSequence};

    #[test]
    fn round_trip_matches_global_positions() {
        let s = JointSkeleton::smpl();
        let poses = local_to_global(&MotionSequence::rest(3, &s).unwrap());
        let parsed = parse_keypoints(&write_keypoints(&poses)).unwrap();
        assert_eq!(parsed.len(), 3);
        for (k, pose) in parsed.iter().zip(&poses) {
            for j in 0..JOINT_COUNT {
                assert!((k.joints[j] - pose[j]).norm() < 1e-6);
            }
        }
        assert_eq!(parsed[2].frame, 2);
        assert!(parse_keypoints("0 1 2 3\n").is_err());
    }
}
