use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::representation::kinematics::local_to_global;
use crate::representation::skeleton::JOINT_NAMES;
use crate::representation::{MotionSequence, Vec3, JOINT_COUNT};

/// Sparse global-position targets: `mask[t][j]` marks joint `j` at frame `t`
/// as controlled. Targets at inactive entries are always zero.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryConstraint {
    pub mask: Vec<[bool; JOINT_COUNT]>,
    pub targets: Vec<[Vec3; JOINT_COUNT]>,
}

/// Joint index from a name (`left_wrist`) or a number.
pub fn parse_joint(s: &str) -> Result<usize> {
    let s = s.trim();
    if let Ok(j) = s.parse::<usize>() {
        if j < JOINT_COUNT {
            return Ok(j);
        }
    }
    JOINT_NAMES
        .iter()
        .position(|n| n.eq_ignore_ascii_case(s))
        .ok_or_else(|| Error::InvalidArgument(format!("unknown joint {s:?}")))
}

/// Comma-separated joint list, e.g. `pelvis,left_wrist`.
pub fn parse_joint_list(s: &str) -> Result<Vec<usize>> {
    let joints: Vec<usize> = s.split(',').filter(|p| !p.trim().is_empty()).map(parse_joint).collect::<Result<_>>()?;
    if joints.is_empty() {
        return Err(Error::InvalidArgument("empty joint list".into()));
    }
    Ok(joints)
}

impl TrajectoryConstraint {
    /// No active entries.
    pub fn empty(frames: usize) -> Self {
        Self { mask: vec![[false; JOINT_COUNT]; frames], targets: vec![[Vec3::zeros(); JOINT_COUNT]; frames] }
    }

    pub fn frames(&self) -> usize {
        self.mask.len()
    }

    pub fn set(&mut self, frame: usize, joint: usize, target: Vec3) -> Result<()> {
        if frame >= self.frames() || joint >= JOINT_COUNT {
            return Err(Error::InvalidArgument(format!("entry ({frame}, {joint}) outside {} frames", self.frames())));
        }
        if !target.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite target at ({frame}, {joint})")));
        }
        self.mask[frame][joint] = true;
        self.targets[frame][joint] = target;
        Ok(())
    }

    pub fn active_count(&self) -> usize {
        self.mask.iter().flatten().filter(|&&m| m).count()
    }

    /// Active `(frame, joint, target)` entries in frame-major order.
    pub fn active(&self) -> impl Iterator<Item = (usize, usize, Vec3)> + '_ {
        (0..self.frames()).flat_map(move |t| {
            (0..JOINT_COUNT).filter(move |&j| self.mask[t][j]).map(move |j| (t, j, self.targets[t][j]))
        })
    }

    /// Global positions of `joints` on every `stride`-th frame of `motion`,
    /// always including the last frame.
    pub fn from_motion(motion: &MotionSequence, joints: &[usize], stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidArgument("constraint stride must be positive".into()));
        }
        let global = local_to_global(motion);
        let t = motion.frames();
        let mut c = Self::empty(t);
        for f in (0..t).filter(|f| f % stride == 0 || f + 1 == t) {
            for &j in joints {
                c.set(f, j, global[f][j])?;
            }
        }
        Ok(c)
    }

    /// `# frames N` header, then one `frame joint x y z` line per active entry.
    pub fn to_text(&self) -> String {
        let mut out = format!("# frames {}\n", self.frames());
        for (t, j, p) in self.active() {
            let _ = writeln!(out, "{t} {j} {} {} {}", p.x as f32, p.y as f32, p.z as f32);
        }
        out
    }

    /// Parses [`to_text`](Self::to_text) output. Without a header the frame
    /// count is one past the largest frame index, or `frames` when given.
    pub fn parse(text: &str, frames: Option<usize>) -> Result<Self> {
        let bad = |n: usize, m: String| Error::format("constraint", format!("line {}: {m}", n + 1));
        let mut header = None;
        let mut entries = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("frames") {
                    header = Some(v.trim().parse::<usize>().map_err(|e| bad(n, e.to_string()))?);
                }
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 5 {
                return Err(bad(n, format!("expected 5 fields, found {}", parts.len())));
            }
            let frame: usize = parts[0].parse().map_err(|_| bad(n, format!("bad frame {:?}", parts[0])))?;
            let joint = parse_joint(parts[1]).map_err(|e| bad(n, e.to_string()))?;
            let mut xyz = [0.0; 3];
            for (k, p) in parts[2..].iter().enumerate() {
                xyz[k] = p.parse::<f64>().map_err(|_| bad(n, format!("bad coordinate {p:?}")))?;
            }
            entries.push((n, frame, joint, Vec3::new(xyz[0], xyz[1], xyz[2])));
        }
        let needed = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
        let t = header.or(frames).unwrap_or(needed);
        if needed > t {
            return Err(Error::format("constraint", format!("frame {} outside {t} frames", needed - 1)));
        }
        let mut c = Self::empty(t);
        for (n, frame, joint, p) in entries {
            c.set(frame, joint, p).map_err(|e| bad(n, e.to_string()))?;
        }
        Ok(c)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, None)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::representation::{JointSkeleton, RootState};

    #[test]
    fn text_round_trip() {
        let mut c = TrajectoryConstraint::empty(6);
        c.set(0, 0, Vec3::new(0.0, 0.9, 0.0)).unwrap();
        c.set(5, 20, Vec3::new(0.5, 1.25, -0.75)).unwrap();
        let back = TrajectoryConstraint::parse(&c.to_text(), None).unwrap();
        assert_eq!(back, c);
        let named = TrajectoryConstraint::parse("2 left_wrist 1 2 3\n", Some(4)).unwrap();
        assert_eq!(named.frames(), 4);
        assert_eq!(named.active().collect::<Vec<_>>(), vec![(2, 20, Vec3::new(1.0, 2.0, 3.0))]);
        assert!(TrajectoryConstraint::parse("0 0 1 2\n", None).is_err());
        assert!(TrajectoryConstraint::parse("# frames 2\n3 0 1 2 3\n", None).is_err());
    }

    #[test]
    fn pelvis_constraint_from_walking_motion() {
        let s = JointSkeleton::smpl();
        let mut root = RootState::still(9, 0.9);
        root.linear_velocity = vec![[0.0, 0.1]; 9];
        let m = MotionSequence::from_kinematics(&vec![[crate::representation::rotation::IDENTITY_6D; 21]; 9], &root, &s).unwrap();
        let c = TrajectoryConstraint::from_motion(&m, &[0], 4).unwrap();
        let frames: Vec<usize> = c.active().map(|e| e.0).collect();
        assert_eq!(frames, vec![0, 4, 8]);
        let (_, _, p) = c.active().nth(2).unwrap();
        assert!((p - Vec3::new(0.0, 0.9, 0.8)).norm() < 1e-9);
    }

    #[test]
    fn joint_names() {
        assert_eq!(parse_joint("pelvis").unwrap(), 0);
        assert_eq!(parse_joint("21").unwrap(), 21);
        assert_eq!(parse_joint_list("pelvis, left_wrist").unwrap(), vec![0, 20]);
        assert!(parse_joint("tail").is_err());
    }
}
