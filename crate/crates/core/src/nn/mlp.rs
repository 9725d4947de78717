use super::layers::{relu, relu_backward, DropoutMask, Linear};
use super::{Matrix, Parameter, Parameterized};
use crate::error::{Error, Result};
use crate::rng::RngState;

/// Feed-forward network: `Linear -> ReLU -> Dropout` for every hidden layer,
/// then a linear output layer producing logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub dropout: f64,
}

/// Activations recorded by a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    /// Input to each linear layer.
    inputs: Vec<Matrix>,
    /// Pre-activation of each hidden layer.
    pre: Vec<Matrix>,
    masks: Vec<Option<DropoutMask>>,
    pub logits: Matrix,
}

impl MlpTrace {
    /// Distance of the closest hidden pre-activation to the ReLU kink.
    pub fn relu_margin(&self) -> f64 {
        self.pre
            .iter()
            .flat_map(|p| p.data().iter())
            .fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }
}

impl Mlp {
    /// `dims` lists every width from input to output, e.g. `[10, 20, 20, 2]`.
    pub fn new(dims: &[usize], dropout: f64, rng: &mut RngState) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least input and output widths");
        let layers = dims.windows(2).map(|w| Linear::new(w[0], w[1], rng)).collect();
        Self { layers, dropout }
    }

    pub fn zeros(dims: &[usize], dropout: f64) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least input and output widths");
        let layers = dims.windows(2).map(|w| Linear::zeros(w[0], w[1])).collect();
        Self { layers, dropout }
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].d_in()];
        d.extend(self.layers.iter().map(|l| l.d_out()));
        d
    }

    pub fn d_in(&self) -> usize {
        self.layers[0].d_in()
    }

    pub fn d_out(&self) -> usize {
        self.layers.last().map_or(0, |l| l.d_out())
    }

    /// Inference pass (dropout disabled).
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.d_in() {
            return Err(Error::Dimension {
                op: "mlp input",
                left: x.shape(),
                right: self.layers[0].weight.shape(),
            });
        }
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h)?;
            if i < last {
                h = relu(&h);
            }
        }
        Ok(h)
    }

    /// Forward pass keeping what the backward pass needs. With `rng` set,
    /// dropout masks are sampled; with `None` the pass is deterministic.
    pub fn forward_train(&self, x: &Matrix, mut rng: Option<&mut RngState>) -> Result<MlpTrace> {
        if x.cols() != self.d_in() {
            return Err(Error::Dimension {
                op: "mlp input",
                left: x.shape(),
                right: self.layers[0].weight.shape(),
            });
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut masks = Vec::with_capacity(last);
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let out = layer.forward(&h)?;
            inputs.push(h);
            if i == last {
                return Ok(MlpTrace {
                    inputs,
                    pre,
                    masks,
                    logits: out,
                });
            }
            let act = relu(&out);
            let mask = match rng.as_deref_mut() {
                Some(r) if self.dropout > 0.0 => {
                    Some(DropoutMask::sample(act.rows(), act.cols(), self.dropout, r)?)
                }
                _ => None,
            };
            h = match &mask {
                Some(m) => m.apply(&act),
                None => act,
            };
            pre.push(out);
            masks.push(mask);
        }
        unreachable!("loop returns at the output layer")
    }

    /// Accumulates parameter gradients given `d logits`; returns `d input`.
    pub fn backward(&mut self, trace: &MlpTrace, dlogits: &Matrix) -> Result<Matrix> {
        let mut d = dlogits.clone();
        for i in (0..self.layers.len()).rev() {
            d = self.layers[i].backward(&trace.inputs[i], &d)?;
            if i > 0 {
                if let Some(m) = &trace.masks[i - 1] {
                    d = m.apply(&d);
                }
                d = relu_backward(&trace.pre[i - 1], &d);
            }
        }
        Ok(d)
    }
}

impl Parameterized for Mlp {
    fn parameters(&self) -> Vec<&Parameter> {
        self.layers.iter().flat_map(|l| l.parameters()).collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        self.layers.iter_mut().flat_map(|l| l.parameters_mut()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, softmax_cross_entropy, GradCheckOptions};

    #[test]
    fn train_trace_without_dropout_matches_inference() {
        let mut rng = RngState::new(9);
        let mlp = Mlp::new(&[5, 7, 3], 0.5, &mut rng);
        let x = Matrix::from_rows(&[&[0.1, 0.2, -0.3, 0.4, 0.5]]);
        let a = mlp.forward(&x).unwrap();
        let b = mlp.forward_train(&x, None).unwrap().logits;
        assert_eq!(a, b);
    }

    #[test]
    fn relu_margin_is_smallest_hidden_magnitude() {
        let mut mlp = Mlp::zeros(&[2, 2, 1], 0.0);
        mlp.layers[0].bias.value = Matrix::from_rows(&[&[0.5, -0.25]]);
        let tr = mlp.forward_train(&Matrix::from_rows(&[&[1.0, 1.0]]), None).unwrap();
        assert_eq!(tr.relu_margin(), 0.25);
        let linear = Mlp::zeros(&[2, 1], 0.0);
        assert_eq!(linear.forward_train(&Matrix::zeros(1, 2), None).unwrap().relu_margin(), f64::INFINITY);
    }

    #[test]
    fn gradients_with_fixed_dropout_masks() {
        let mut rng = RngState::new(21);
        let mut mlp = Mlp::new(&[4, 6, 5, 3], 0.5, &mut rng);
        let mut x = Matrix::zeros(3, 4);
        x.data_mut().iter_mut().for_each(|v| *v = rng.uniform(-1.0, 1.0));
        let targets = [0, 2, 1];
        let err = grad_check(&mut mlp, GradCheckOptions::default(), |m, backprop| {
            let mut mask_rng = RngState::new(77);
            let trace = m.forward_train(&x, Some(&mut mask_rng))?;
            let (loss, dl) = softmax_cross_entropy(&trace.logits, &targets)?;
            if backprop {
                m.backward(&trace, &dl)?;
            }
            Ok(loss)
        })
        .unwrap();
        assert!(err < 1e-3, "{err}");
    }
}
