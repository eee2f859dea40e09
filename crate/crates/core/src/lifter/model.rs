use nalgebra::Vector3;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_pose, NormalizedPose2D, Pose2D, Pose3D};

/// Which features of the normalized 2D pose are fed to the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LifterInput {
    /// `[x̃₁x, x̃₁y, …, x̃Mx, x̃My, m_x, m_y, σ]`, length `2M + 3`.
    #[default]
    Full,
    /// `x̃` only, length `2M`.
    NormalizedOnly,
}

impl LifterInput {
    pub fn dim(self, joint_count: usize) -> usize {
        match self {
            LifterInput::Full => 2 * joint_count + 3,
            LifterInput::NormalizedOnly => 2 * joint_count,
        }
    }

    pub fn code(self) -> u32 {
        match self {
            LifterInput::Full => 0,
            LifterInput::NormalizedOnly => 1,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(LifterInput::Full),
            1 => Ok(LifterInput::NormalizedOnly),
            other => Err(Error::Corrupt(format!(
                "unknown lifter input layout {other}"
            ))),
        }
    }

    /// Writes the feature vector for `pose` into `out`.
    pub fn encode(self, pose: &NormalizedPose2D, out: &mut [f64]) {
        for (i, p) in pose.joints.iter().enumerate() {
            out[2 * i] = p.x;
            out[2 * i + 1] = p.y;
        }
        if self == LifterInput::Full {
            let base = 2 * pose.joints.len();
            out[base] = pose.mean.x;
            out[base + 1] = pose.mean.y;
            out[base + 2] = pose.scale;
        }
    }
}

/// Fully connected layer, `weights` is `outputs × inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    /// `rows · Wᵀ + b` for a batch laid out one sample per row.
    pub(crate) fn affine(&self, rows: ArrayView2<f64>) -> Array2<f64> {
        let mut out = rows.dot(&self.weights.t());
        out += &self.bias.view().insert_axis(Axis(0));
        out
    }
}

/// MLP from a normalized 2D pose to a zero-mean 3D pose.
///
/// Hidden layers use ReLU; the output layer is linear. `mean_offset` is the
/// average subject position in the training data and turns a zero-mean lift
/// into an approximate absolute pose.
#[derive(Debug, Clone, PartialEq)]
pub struct LifterModel {
    pub joint_count: usize,
    pub input: LifterInput,
    pub layers: Vec<Layer>,
    pub mean_offset: Vector3<f64>,
}

impl LifterModel {
    /// All-zero parameters with the given hidden widths.
    pub fn zeros(joint_count: usize, input: LifterInput, hidden: &[usize]) -> Self {
        let mut sizes = vec![input.dim(joint_count)];
        sizes.extend_from_slice(hidden);
        sizes.push(3 * joint_count);
        Self {
            joint_count,
            input,
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
            mean_offset: Vector3::zeros(),
        }
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].inputs()];
        sizes.extend(self.layers.iter().map(|l| l.outputs()));
        sizes
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidArgument(
                "lifter needs at least one layer".into(),
            ));
        }
        let expected_in = self.input.dim(self.joint_count);
        if self.layers[0].inputs() != expected_in {
            return Err(Error::DimensionMismatch {
                expected: expected_in,
                actual: self.layers[0].inputs(),
            });
        }
        for w in self.layers.windows(2) {
            if w[0].outputs() != w[1].inputs() {
                return Err(Error::DimensionMismatch {
                    expected: w[0].outputs(),
                    actual: w[1].inputs(),
                });
            }
        }
        for l in &self.layers {
            if l.bias.len() != l.outputs() {
                return Err(Error::DimensionMismatch {
                    expected: l.outputs(),
                    actual: l.bias.len(),
                });
            }
        }
        let out = self.layers.last().unwrap().outputs();
        if out != 3 * self.joint_count {
            return Err(Error::DimensionMismatch {
                expected: 3 * self.joint_count,
                actual: out,
            });
        }
        if !self.parameters().iter().all(|v| v.is_finite())
            || !self.mean_offset.iter().all(|v| v.is_finite())
        {
            return Err(Error::InvalidArgument(
                "lifter has non-finite parameters".into(),
            ));
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Layer by layer: weights row-major, then biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameter_count() {
            return Err(Error::DimensionMismatch {
                expected: self.parameter_count(),
                actual: values.len(),
            });
        }
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }

    /// Forward pass over a batch (one sample per row).
    pub fn forward_batch(&self, inputs: ArrayView2<f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut act = self.layers[0].affine(inputs);
        if last > 0 {
            act.mapv_inplace(relu);
        }
        for (i, layer) in self.layers.iter().enumerate().skip(1) {
            act = layer.affine(act.view());
            if i < last {
                act.mapv_inplace(relu);
            }
        }
        act
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let row = ArrayView2::from_shape((1, input.len()), input).expect("row view");
        self.forward_batch(row).into_raw_vec_and_offset().0
    }

    pub fn input_vector(&self, pose: &NormalizedPose2D) -> Vec<f64> {
        let mut v = vec![0.0; self.input.dim(self.joint_count)];
        self.input.encode(pose, &mut v);
        v
    }

    fn check_pose(&self, pose: &Pose2D) -> Result<()> {
        if pose.len() != self.joint_count {
            return Err(Error::DimensionMismatch {
                expected: self.joint_count,
                actual: pose.len(),
            });
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

pub(crate) fn output_to_pose(out: &[f64]) -> Pose3D {
    Pose3D {
        joints: out
            .chunks_exact(3)
            .map(|c| Vector3::new(c[0], c[1], c[2]))
            .collect(),
    }
}

/// Anything that turns a 2D pose (image pixels) into a zero-mean 3D pose.
pub trait PoseLifter {
    fn joint_count(&self) -> usize;

    fn lift(&self, pose: &Pose2D) -> Result<Pose3D>;

    /// Offset added to a zero-mean lift to place it in the camera frame.
    fn mean_offset(&self) -> Vector3<f64> {
        Vector3::zeros()
    }

    fn lift_absolute(&self, pose: &Pose2D) -> Result<Pose3D> {
        Ok(self.lift(pose)?.translated(&self.mean_offset()))
    }

    /// Lifts many poses at once; the default just loops.
    fn lift_many(&self, poses: &[Pose2D]) -> Vec<Result<Pose3D>> {
        poses.iter().map(|p| self.lift(p)).collect()
    }
}

impl PoseLifter for LifterModel {
    fn joint_count(&self) -> usize {
        self.joint_count
    }

    fn lift(&self, pose: &Pose2D) -> Result<Pose3D> {
        self.check_pose(pose)?;
        let normalized = normalize_pose(pose)?;
        Ok(output_to_pose(
            &self.forward(&self.input_vector(&normalized)),
        ))
    }

    fn mean_offset(&self) -> Vector3<f64> {
        self.mean_offset
    }

    fn lift_many(&self, poses: &[Pose2D]) -> Vec<Result<Pose3D>> {
        let dim = self.input.dim(self.joint_count);
        let mut rows = Array2::zeros((poses.len(), dim));
        let mut status: Vec<Result<()>> = Vec::with_capacity(poses.len());
        for (pose, mut row) in poses.iter().zip(rows.rows_mut()) {
            let encoded = self
                .check_pose(pose)
                .and_then(|_| normalize_pose(pose))
                .map(|n| {
                    self.input
                        .encode(&n, row.as_slice_mut().expect("contiguous row"));
                });
            status.push(encoded);
        }
        let out = self.forward_batch(rows.view());
        status
            .into_iter()
            .zip(out.rows())
            .map(|(s, row)| s.map(|_| output_to_pose(row.as_slice().expect("contiguous row"))))
            .collect()
    }
}
