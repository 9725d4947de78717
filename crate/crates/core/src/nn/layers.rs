use super::{Matrix, Parameter, Parameterized};
use crate::error::{Error, Result};
use crate::rng::RngState;

/// `x · w + b`, with `b` broadcast over rows.
pub fn linear_forward(x: &Matrix, w: &Parameter, b: &Parameter) -> Result<Matrix> {
    if b.value.rows() != 1 || b.value.cols() != w.value.cols() {
        return Err(Error::Dimension {
            op: "linear bias",
            left: w.shape(),
            right: b.shape(),
        });
    }
    if x.cols() != w.value.rows() {
        return Err(Error::Dimension {
            op: "linear",
            left: x.shape(),
            right: w.shape(),
        });
    }
    let mut out = x.matmul(&w.value)?;
    let bias = b.value.row(0);
    for r in 0..out.rows() {
        for (o, bi) in out.row_mut(r).iter_mut().zip(bias) {
            *o += bi;
        }
    }
    Ok(out)
}

/// Accumulates `w.grad` and `b.grad` and returns the gradient w.r.t. `x`.
pub fn linear_backward(
    x: &Matrix,
    w: &mut Parameter,
    b: &mut Parameter,
    dout: &Matrix,
) -> Result<Matrix> {
    let dw = x.t_matmul(dout)?;
    w.grad.add_assign(&dw)?;
    let bg = b.grad.row_mut(0);
    for r in 0..dout.rows() {
        for (g, d) in bg.iter_mut().zip(dout.row(r)) {
            *g += d;
        }
    }
    dout.matmul_t(&w.value)
}

/// Fully connected layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Parameter,
    pub bias: Parameter,
}

impl Linear {
    pub fn new(d_in: usize, d_out: usize, rng: &mut RngState) -> Self {
        Self {
            weight: Parameter::uniform(d_in, d_out, d_in, rng),
            bias: Parameter::zeros(1, d_out),
        }
    }

    pub fn zeros(d_in: usize, d_out: usize) -> Self {
        Self {
            weight: Parameter::zeros(d_in, d_out),
            bias: Parameter::zeros(1, d_out),
        }
    }

    pub fn d_in(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn d_out(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        linear_forward(x, &self.weight, &self.bias)
    }

    pub fn backward(&mut self, x: &Matrix, dout: &Matrix) -> Result<Matrix> {
        linear_backward(x, &mut self.weight, &mut self.bias, dout)
    }
}

impl Parameterized for Linear {
    fn parameters(&self) -> Vec<&Parameter> {
        vec![&self.weight, &self.bias]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn relu(x: &Matrix) -> Matrix {
    x.map(|v| v.max(0.0))
}

/// Gradient through ReLU given the pre-activation.
pub fn relu_backward(pre: &Matrix, dout: &Matrix) -> Matrix {
    let mut out = dout.clone();
    for (d, &p) in out.data_mut().iter_mut().zip(pre.data()) {
        if p <= 0.0 {
            *d = 0.0;
        }
    }
    out
}

/// Inverted-dropout keep mask; entries are `0` or `1/(1-rate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask(pub Matrix);

impl DropoutMask {
    pub fn sample(rows: usize, cols: usize, rate: f64, rng: &mut RngState) -> Result<Self> {
        check_rate(rate)?;
        let scale = 1.0 / (1.0 - rate);
        let mut m = Matrix::zeros(rows, cols);
        for v in m.data_mut() {
            *v = if rate > 0.0 && rng.bernoulli(rate) {
                0.0
            } else {
                scale
            };
        }
        Ok(Self(m))
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for (o, m) in out.data_mut().iter_mut().zip(self.0.data()) {
            *o *= m;
        }
        out
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::arg(format!("dropout rate {rate} not in [0, 1)")));
    }
    Ok(())
}

/// Inverted dropout. Identity when `training` is false.
pub fn dropout(x: &Matrix, rate: f64, rng: &mut RngState, training: bool) -> Result<Matrix> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = DropoutMask::sample(x.rows(), x.cols(), rate, rng)?;
    Ok(mask.apply(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    #[test]
    fn linear_identity_weights() {
        let x = Matrix::from_rows(&[&[1.0, 2.0]]);
        let w = Parameter::new(Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]));
        let b = Parameter::zeros(1, 2);
        assert_eq!(linear_forward(&x, &w, &b).unwrap(), x);
    }

    #[test]
    fn linear_with_bias() {
        let x = Matrix::from_rows(&[&[1.0, 1.0]]);
        let w = Parameter::new(Matrix::from_rows(&[&[2.0], &[3.0]]));
        let b = Parameter::new(Matrix::from_rows(&[&[1.0]]));
        assert_eq!(linear_forward(&x, &w, &b).unwrap().data(), &[6.0]);
    }

    #[test]
    fn linear_matches_naive_triple_loop() {
        let mut rng = RngState::new(11);
        let mut x = Matrix::zeros(3, 4);
        x.data_mut().iter_mut().for_each(|v| *v = rng.uniform(-1.0, 1.0));
        let w = Parameter::uniform(4, 2, 1, &mut rng);
        let b = Parameter::uniform(1, 2, 1, &mut rng);
        let out = linear_forward(&x, &w, &b).unwrap();
        let mut expected = naive_matmul(&x, &w.value);
        for r in 0..3 {
            for c in 0..2 {
                expected.set(r, c, expected.get(r, c) + b.value.get(0, c));
            }
        }
        for (a, e) in out.data().iter().zip(expected.data()) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_shape_error_names_both_shapes() {
        let x = Matrix::zeros(1, 3);
        let w = Parameter::zeros(2, 2);
        let b = Parameter::zeros(1, 2);
        let msg = linear_forward(&x, &w, &b).unwrap_err().to_string();
        assert!(msg.contains("(1, 3)") && msg.contains("(2, 2)"), "{msg}");
    }

    #[test]
    fn dropout_rate_zero_and_inference_are_identity() {
        let mut rng = RngState::new(1);
        let x = Matrix::from_rows(&[&[1.0, -2.0, 3.0]]);
        assert_eq!(dropout(&x, 0.0, &mut rng, true).unwrap(), x);
        assert_eq!(dropout(&x, 0.5, &mut rng, false).unwrap(), x);
        assert!(dropout(&x, 1.0, &mut rng, true).is_err());
    }

    #[test]
    fn dropout_half_statistics() {
        let mut rng = RngState::new(2024);
        let mut x = Matrix::zeros(100, 100);
        x.data_mut()
            .iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = 1.0 + i as f64);
        let y = dropout(&x, 0.5, &mut rng, true).unwrap();
        let zeros = y.data().iter().filter(|&&v| v == 0.0).count();
        let frac = zeros as f64 / 10_000.0;
        assert!((0.47..=0.53).contains(&frac), "zero fraction {frac}");
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!(*a == 0.0 || *a == 2.0 * b);
        }
    }
}
