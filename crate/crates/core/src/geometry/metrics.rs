use nalgebra::{Matrix3, Vector3};

use super::pose::{Pose2D, Pose3D};
use crate::error::{Error, Result};

/// Similarity transform `x ↦ scale · rotation · x + translation`.
#[derive(Debug, Clone, PartialEq)]
pub struct Similarity {
    pub rotation: Matrix3<f64>,
    pub scale: f64,
    pub translation: Vector3<f64>,
}

impl Similarity {
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p * self.scale + self.translation
    }

    pub fn apply_pose(&self, pose: &Pose3D) -> Pose3D {
        Pose3D {
            joints: pose.joints.iter().map(|p| self.apply(p)).collect(),
        }
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            actual: b,
        });
    }
    Ok(())
}

/// Root-relative mean per-joint position error.
pub fn mpjpe(gt: &Pose3D, est: &Pose3D, root_index: usize) -> Result<f64> {
    check_lengths(gt.len(), est.len())?;
    if root_index >= gt.len() {
        return Err(Error::InvalidArgument(format!(
            "root index {root_index} out of range for {} joints",
            gt.len()
        )));
    }
    let gt_root = gt.joints[root_index];
    let est_root = est.joints[root_index];
    let total: f64 = gt
        .joints
        .iter()
        .zip(&est.joints)
        .map(|(g, e)| ((g - gt_root) - (e - est_root)).norm())
        .sum();
    Ok(total / gt.len() as f64)
}

/// Least-squares similarity taking `source` onto `target`, reflections excluded.
pub fn procrustes_align(target: &Pose3D, source: &Pose3D) -> Result<Similarity> {
    check_lengths(target.len(), source.len())?;
    if target.len() < 3 {
        return Err(Error::DegenerateConfiguration(format!(
            "need at least 3 joints, got {}",
            target.len()
        )));
    }
    let n = target.len() as f64;
    let mu_t = target.centroid();
    let mu_s = source.centroid();
    let var_t = target
        .joints
        .iter()
        .map(|p| (p - mu_t).norm_squared())
        .sum::<f64>()
        / n;
    let var_s = source
        .joints
        .iter()
        .map(|p| (p - mu_s).norm_squared())
        .sum::<f64>()
        / n;
    let tiny = f64::EPSILON * (1.0 + mu_t.norm_squared().max(mu_s.norm_squared()));
    if var_t <= tiny || var_s <= tiny {
        return Err(Error::DegenerateConfiguration(
            "point set has zero variance".into(),
        ));
    }

    let mut cov = Matrix3::zeros();
    for (t, s) in target.joints.iter().zip(&source.joints) {
        cov += (t - mu_t) * (s - mu_s).transpose();
    }
    cov /= n;

    let svd = cov.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut signs = Vector3::new(1.0, 1.0, 1.0);
    if (u * v_t).determinant() < 0.0 {
        // Smallest singular value is last in nalgebra's ordering.
        let (idx, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        signs[idx] = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&signs) * v_t;
    let scale = svd.singular_values.component_mul(&signs).sum() / var_s;
    let translation = mu_t - rotation * mu_s * scale;
    Ok(Similarity {
        rotation,
        scale,
        translation,
    })
}

/// Mean per-joint distance after optimal similarity alignment of `est` onto `gt`.
pub fn procrustes_error(gt: &Pose3D, est: &Pose3D) -> Result<f64> {
    let transform = procrustes_align(gt, est)?;
    let aligned = transform.apply_pose(est);
    Ok(gt
        .joints
        .iter()
        .zip(&aligned.joints)
        .map(|(g, e)| (g - e).norm())
        .sum::<f64>()
        / gt.len() as f64)
}

/// Mean per-joint Euclidean distance between two 2D poses (crop pixels).
pub fn error_2d(gt: &Pose2D, est: &Pose2D) -> Result<f64> {
    check_lengths(gt.len(), est.len())?;
    if gt.is_empty() {
        return Ok(0.0);
    }
    Ok(gt
        .joints
        .iter()
        .zip(&est.joints)
        .map(|(g, e)| (g - e).norm())
        .sum::<f64>()
        / gt.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Vector2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pose(rng: &mut ChaCha8Rng, m: usize) -> Pose3D {
        Pose3D::new(
            (0..m)
                .map(|_| {
                    Vector3::new(
                        rng.random_range(-500.0..500.0),
                        rng.random_range(-900.0..900.0),
                        rng.random_range(-300.0..300.0),
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    fn random_similarity(rng: &mut ChaCha8Rng) -> Similarity {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        Similarity {
            rotation: Rotation3::new(axis * 2.5).into_inner(),
            scale: rng.random_range(0.2..5.0),
            translation: Vector3::new(
                rng.random_range(-3000.0..3000.0),
                rng.random_range(-3000.0..3000.0),
                rng.random_range(-3000.0..3000.0),
            ),
        }
    }

    #[test]
    fn mpjpe_identity_and_translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gt = random_pose(&mut rng, 17);
        assert_eq!(mpjpe(&gt, &gt, 0).unwrap(), 0.0);
        let shifted = gt.translated(&Vector3::new(120.0, -40.0, 3000.0));
        assert!(mpjpe(&gt, &shifted, 0).unwrap() < 1e-9);
    }

    #[test]
    fn mpjpe_two_joint_example() {
        let gt = Pose3D::from_xyz(&[[0.0, 0.0, 0.0], [0.0, 0.0, 100.0]]).unwrap();
        let est = Pose3D::from_xyz(&[[0.0, 0.0, 0.0], [0.0, 0.0, 130.0]]).unwrap();
        assert_eq!(mpjpe(&gt, &est, 0).unwrap(), 15.0);
    }

    #[test]
    fn mpjpe_rejects_bad_root() {
        let gt = Pose3D::from_xyz(&[[0.0; 3]; 2]).unwrap();
        assert!(mpjpe(&gt, &gt, 2).is_err());
    }

    #[test]
    fn procrustes_recovers_exact_similarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let gt = random_pose(&mut rng, 17);
            let t = random_similarity(&mut rng);
            let est = t.apply_pose(&gt);
            assert!(procrustes_error(&gt, &est).unwrap() < 1e-6);
        }
        let gt = random_pose(&mut rng, 5);
        assert!(procrustes_error(&gt, &gt).unwrap() < 1e-9);
    }

    #[test]
    fn procrustes_excludes_reflection() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gt = random_pose(&mut rng, 10);
        let mirrored = Pose3D {
            joints: gt
                .joints
                .iter()
                .map(|p| Vector3::new(-p.x, p.y, p.z))
                .collect(),
        };
        let t = procrustes_align(&gt, &mirrored).unwrap();
        assert!((t.rotation.determinant() - 1.0).abs() < 1e-9);
        assert!(procrustes_error(&gt, &mirrored).unwrap() > 1.0);
    }

    #[test]
    fn procrustes_rejects_collapsed_sets() {
        let gt = Pose3D::from_xyz(&[[1.0, 2.0, 3.0]; 4]).unwrap();
        let est = Pose3D::from_xyz(&[
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!(matches!(
            procrustes_error(&gt, &est),
            Err(Error::DegenerateConfiguration(_))
        ));
        assert!(matches!(
            procrustes_error(&est, &gt),
            Err(Error::DegenerateConfiguration(_))
        ));
    }

    #[test]
    fn error_2d_examples() {
        let gt = Pose2D::new(
            (0..17)
                .map(|i| Vector2::new(i as f64, 2.0 * i as f64))
                .collect(),
        )
        .unwrap();
        assert_eq!(error_2d(&gt, &gt).unwrap(), 0.0);
        let mut one_off = gt.clone();
        one_off.joints[4] += Vector2::new(3.0, 4.0);
        assert!((error_2d(&gt, &one_off).unwrap() - 5.0 / 17.0).abs() < 1e-15);
        let shifted = gt.map(|p| p + Vector2::new(1.0, 0.0));
        assert!((error_2d(&gt, &shifted).unwrap() - 1.0).abs() < 1e-15);
    }
}
