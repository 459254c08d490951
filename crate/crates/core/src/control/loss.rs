use crate::error::{Error, Result};
use crate::nn::{Graph, Tensor, Var};
use crate::representation::motion::{LOCAL_POS, ROOT_ANG_VEL, ROOT_HEIGHT, ROOT_LIN_VEL};
use crate::representation::{local_to_global, MotionSequence, Pose, JOINT_COUNT};

use super::constraint::TrajectoryConstraint;

/// Mean squared world-position error over active `(frame, joint)` entries, in m².
pub fn control_loss(pred: &MotionSequence, target: &MotionSequence, mask: &[[bool; JOINT_COUNT]]) -> Result<f64> {
    if pred.frames() != target.frames() || mask.len() != pred.frames() {
        return Err(Error::Dim(format!(
            "control loss over {} / {} frames with a {}-frame mask",
            pred.frames(),
            target.frames(),
            mask.len()
        )));
    }
    control_loss_poses(&local_to_global(pred), &local_to_global(target), mask)
}

/// [`control_loss`] on world poses that are already computed.
pub fn control_loss_poses(pred: &[Pose], target: &[Pose], mask: &[[bool; JOINT_COUNT]]) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (t, row) in mask.iter().enumerate() {
        for (j, _) in row.iter().enumerate().filter(|(_, &m)| m) {
            sum += (pred[t][j] - target[t][j]).norm_squared();
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(sum / n as f64)
}

/// World positions of all 22 joints as a `T × 66` node, built from the root
/// channels and local positions of a `T × 263` feature node so that gradients
/// reach every channel it reads.
pub fn local_to_global_var(g: &Graph, features: Var) -> Var {
    let col = |c: usize| g.slice_cols(features, c, 1);
    let yaw = g.cumsum_rows_exclusive(col(ROOT_ANG_VEL));
    let (s, c) = (g.sin(yaw), g.cos(yaw));
    // Rotation about +y: (x, z) → (c·x + s·z, −s·x + c·z).
    let rot_x = |x: Var, z: Var| g.add(g.mul(c, x), g.mul(s, z));
    let rot_z = |x: Var, z: Var| g.sub(g.mul(c, z), g.mul(s, x));
    let (vx, vz) = (col(ROOT_LIN_VEL), col(ROOT_LIN_VEL + 1));
    let root_x = g.cumsum_rows_exclusive(rot_x(vx, vz));
    let root_z = g.cumsum_rows_exclusive(rot_z(vx, vz));
    let root_y = col(ROOT_HEIGHT);
    let mut parts = vec![root_x, root_y, root_z];
    for j in 1..JOINT_COUNT {
        let base = LOCAL_POS + 3 * (j - 1);
        let (px, py, pz) = (col(base), col(base + 1), col(base + 2));
        parts.push(g.add(root_x, rot_x(px, pz)));
        parts.push(g.add(root_y, py));
        parts.push(g.add(root_z, rot_z(px, pz)));
    }
    g.concat_cols(&parts)
}

/// Control loss against constraint targets on a `T × 66` world-position node.
pub fn control_loss_var(g: &Graph, positions: Var, constraint: &TrajectoryConstraint) -> Result<Var> {
    if g.shape(positions) != (constraint.frames(), 3 * JOINT_COUNT) {
        return Err(Error::Dim(format!(
            "positions {:?} against a {}-frame constraint",
            g.shape(positions),
            constraint.frames()
        )));
    }
    let mut entries = Vec::new();
    let mut targets = Vec::new();
    for (t, j, p) in constraint.active() {
        for k in 0..3 {
            entries.push((t, 3 * j + k));
            targets.push(p[k]);
        }
    }
    if entries.is_empty() {
        return Err(Error::EmptyMask);
    }
    let n = (entries.len() / 3) as f64;
    let diff = g.sub(g.pick(positions, &entries), g.leaf(Tensor::from_vec(targets.len(), 1, targets)));
    Ok(g.scale(g.sum(g.square(diff)), 1.0 / n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_toy_corpus, ToyCorpusSpec};
    use crate::nn::gradient_check;
    use crate::representation::Vec3;
    use proptest::prelude::*;

    fn walking() -> MotionSequence {
        let spec = ToyCorpusSpec { n_pairs: 5, min_frames: 12, max_frames: 16, ..ToyCorpusSpec::default() };
        let c = make_toy_corpus(&spec, 3).unwrap();
        c.entries.iter().find(|e| e.id.ends_with("turn")).unwrap().motion.clone()
    }

    fn shifted(m: &MotionSequence, t: usize, j: usize, d: Vec3) -> MotionSequence {
        // Frame 0 has zero yaw, so a local offset is also a world offset.
        assert_eq!(t, 0);
        let mut f = m.features().clone();
        let c = LOCAL_POS + 3 * (j - 1);
        for k in 0..3 {
            f.set(t, c + k, f.get(t, c + k) + d[k]);
        }
        MotionSequence::new(f).unwrap()
    }

    #[test]
    fn hand_examples() {
        let m = walking();
        let mut mask = vec![[false; JOINT_COUNT]; m.frames()];
        mask[0][5] = true;
        assert_eq!(control_loss(&m, &m, &mask).unwrap(), 0.0);
        let p = shifted(&m, 0, 5, Vec3::new(0.3, 0.0, 0.4));
        assert!((control_loss(&p, &m, &mask).unwrap() - 0.25).abs() < 1e-12);
        mask[0][9] = true;
        assert!((control_loss(&p, &m, &mask).unwrap() - 0.125).abs() < 1e-12);
        let empty = vec![[false; JOINT_COUNT]; m.frames()];
        assert!(matches!(control_loss(&p, &m, &empty), Err(Error::EmptyMask)));
    }

    #[test]
    fn graph_positions_match_local_to_global() {
        let m = walking();
        let g = Graph::new();
        let pos = g.tensor(local_to_global_var(&g, g.leaf(m.features().clone())));
        for (t, pose) in local_to_global(&m).iter().enumerate() {
            for (j, p) in pose.iter().enumerate() {
                for k in 0..3 {
                    assert!((pos.get(t, 3 * j + k) - p[k]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = walking();
        let x = m.features().slice_rows(0, 6);
        let short = MotionSequence::new(x.clone()).unwrap();
        let mut c = TrajectoryConstraint::from_motion(&short, &[0, 15, 20], 2).unwrap();
        for row in &mut c.targets {
            for p in row.iter_mut() {
                *p += Vec3::new(0.05, -0.02, 0.1);
            }
        }
        let err = gradient_check(&x, 1e-5, |g, v| {
            let pos = local_to_global_var(g, v);
            control_loss_var(g, pos, &c).unwrap()
        });
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn empty_constraint_is_rejected() {
        let g = Graph::new();
        let pos = g.leaf(Tensor::zeros(4, 66));
        assert!(matches!(control_loss_var(&g, pos, &TrajectoryConstraint::empty(4)), Err(Error::EmptyMask)));
    }

    proptest! {
        #[test]
        fn order_invariant_and_quadratic(
            errs in proptest::collection::vec((0usize..4, 0usize..22, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 1..12),
            scale in 0.1..3.0f64,
        ) {
            let zero = [Vec3::zeros(); JOINT_COUNT];
            let mut target = vec![zero; 4];
            let mut pred = vec![zero; 4];
            let mut mask = vec![[false; JOINT_COUNT]; 4];
            for &(t, j, x, y, z) in &errs {
                mask[t][j] = true;
                pred[t][j] = Vec3::new(x, y, z);
                target[t][j] = Vec3::zeros();
            }
            let base = control_loss_poses(&pred, &target, &mask).unwrap();
            // Reversing frame order enumerates the same entries differently.
            let rev = |v: &Vec<Pose>| v.iter().rev().cloned().collect::<Vec<_>>();
            let rmask: Vec<_> = mask.iter().rev().cloned().collect();
            let back = control_loss_poses(&rev(&pred), &rev(&target), &rmask).unwrap();
            prop_assert!((base - back).abs() <= 1e-12 * base.max(1.0));
            let scaled: Vec<Pose> = pred.iter().map(|p| p.map(|v| v * scale)).collect();
            let s = control_loss_poses(&scaled, &target, &mask).unwrap();
            prop_assert!((s - scale * scale * base).abs() <= 1e-9 * s.max(1.0));
        }
    }
}
