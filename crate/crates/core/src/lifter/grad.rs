//! Mean-squared-error loss and its gradient by backpropagation.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

use super::model::{relu, LifterModel};

/// Per-layer parameter gradients, shaped like the model's layers.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    /// Same ordering as [`LifterModel::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

/// Squared Euclidean error of each output pose vector, averaged over the batch.
pub fn mse_loss(model: &LifterModel, inputs: ArrayView2<f64>, targets: ArrayView2<f64>) -> f64 {
    let out = model.forward_batch(inputs);
    let rows = out.nrows().max(1) as f64;
    (&out - &targets).mapv(|d| d * d).sum() / rows
}

/// Loss and exact gradient for one batch.
pub fn loss_and_gradient(
    model: &LifterModel,
    inputs: ArrayView2<f64>,
    targets: ArrayView2<f64>,
) -> (f64, Gradients) {
    let last = model.layers.len() - 1;
    // Pre-activations of each layer, and the activations feeding each layer.
    let mut pre: Vec<Array2<f64>> = Vec::with_capacity(model.layers.len());
    let mut acts: Vec<Array2<f64>> = Vec::with_capacity(model.layers.len());
    let mut current = inputs.to_owned();
    for (i, layer) in model.layers.iter().enumerate() {
        let z = layer.affine(current.view());
        let next = if i < last { z.mapv(relu) } else { z.clone() };
        acts.push(std::mem::replace(&mut current, next));
        pre.push(z);
    }
    let output = current;

    let count = output.nrows().max(1) as f64;
    let diff = &output - &targets;
    let loss = diff.mapv(|d| d * d).sum() / count;
    let mut delta = diff * (2.0 / count);

    let mut weights = vec![Array2::zeros((0, 0)); model.layers.len()];
    let mut biases = vec![Array1::zeros(0); model.layers.len()];
    for i in (0..model.layers.len()).rev() {
        weights[i] = delta.t().dot(&acts[i]);
        biases[i] = delta.sum_axis(Axis(0));
        if i > 0 {
            let mut back = delta.dot(&model.layers[i].weights);
            Zip::from(&mut back).and(&pre[i - 1]).for_each(|g, &z| {
                if z <= 0.0 {
                    *g = 0.0;
                }
            });
            delta = back;
        }
    }
    (loss, Gradients { weights, biases })
}
