//! Gated recurrent unit with manual backpropagation through time.
//!
//! Update convention: `h' = z * h_prev + (1 - z) * h_cand`.

use super::layers::sigmoid;
use super::matrix::{mat_vec_acc, outer_acc, vec_mat_acc};
use super::{Matrix, Parameter, Parameterized};
use crate::error::{Error, Result};
use crate::rng::RngState;

/// Input, recurrent and bias weights for the update (z), reset (r) and
/// candidate (h) gates.
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub w_z: Parameter,
    pub w_r: Parameter,
    pub w_h: Parameter,
    pub u_z: Parameter,
    pub u_r: Parameter,
    pub u_h: Parameter,
    pub b_z: Parameter,
    pub b_r: Parameter,
    pub b_h: Parameter,
}

/// Intermediate values of one step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct GruStep {
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub cand: Vec<f64>,
    pub h: Vec<f64>,
}

impl GruCell {
    pub fn new(d_in: usize, d_h: usize, rng: &mut RngState) -> Self {
        Self {
            w_z: Parameter::uniform(d_in, d_h, d_in, rng),
            w_r: Parameter::uniform(d_in, d_h, d_in, rng),
            w_h: Parameter::uniform(d_in, d_h, d_in, rng),
            u_z: Parameter::uniform(d_h, d_h, d_h, rng),
            u_r: Parameter::uniform(d_h, d_h, d_h, rng),
            u_h: Parameter::uniform(d_h, d_h, d_h, rng),
            b_z: Parameter::zeros(1, d_h),
            b_r: Parameter::zeros(1, d_h),
            b_h: Parameter::zeros(1, d_h),
        }
    }

    pub fn zeros(d_in: usize, d_h: usize) -> Self {
        Self {
            w_z: Parameter::zeros(d_in, d_h),
            w_r: Parameter::zeros(d_in, d_h),
            w_h: Parameter::zeros(d_in, d_h),
            u_z: Parameter::zeros(d_h, d_h),
            u_r: Parameter::zeros(d_h, d_h),
            u_h: Parameter::zeros(d_h, d_h),
            b_z: Parameter::zeros(1, d_h),
            b_r: Parameter::zeros(1, d_h),
            b_h: Parameter::zeros(1, d_h),
        }
    }

    pub fn d_in(&self) -> usize {
        self.w_z.value.rows()
    }

    pub fn d_h(&self) -> usize {
        self.w_z.value.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let (d_in, d_h) = (self.d_in(), self.d_h());
        let expect = [
            (&self.w_z, (d_in, d_h)),
            (&self.w_r, (d_in, d_h)),
            (&self.w_h, (d_in, d_h)),
            (&self.u_z, (d_h, d_h)),
            (&self.u_r, (d_h, d_h)),
            (&self.u_h, (d_h, d_h)),
            (&self.b_z, (1, d_h)),
            (&self.b_r, (1, d_h)),
            (&self.b_h, (1, d_h)),
        ];
        for (p, shape) in expect {
            if p.shape() != shape {
                return Err(Error::Dimension {
                    op: "gru parameters",
                    left: shape,
                    right: p.shape(),
                });
            }
        }
        Ok(())
    }

    /// One forward step on slices.
    pub fn step(&self, x: &[f64], h_prev: &[f64]) -> GruStep {
        let d_h = self.d_h();
        let mut z = self.b_z.value.row(0).to_vec();
        let mut r = self.b_r.value.row(0).to_vec();
        let mut cand = self.b_h.value.row(0).to_vec();
        vec_mat_acc(x, &self.w_z.value, &mut z);
        vec_mat_acc(h_prev, &self.u_z.value, &mut z);
        vec_mat_acc(x, &self.w_r.value, &mut r);
        vec_mat_acc(h_prev, &self.u_r.value, &mut r);
        z.iter_mut().for_each(|v| *v = sigmoid(*v));
        r.iter_mut().for_each(|v| *v = sigmoid(*v));
        let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
        vec_mat_acc(x, &self.w_h.value, &mut cand);
        vec_mat_acc(&rh, &self.u_h.value, &mut cand);
        cand.iter_mut().for_each(|v| *v = v.tanh());
        let mut h = vec![0.0; d_h];
        for j in 0..d_h {
            h[j] = z[j] * h_prev[j] + (1.0 - z[j]) * cand[j];
        }
        GruStep {
            h_prev: h_prev.to_vec(),
            z,
            r,
            cand,
            h,
        }
    }

    /// Backward through one step. Accumulates parameter gradients, adds the
    /// input gradient into `dx`, and returns the gradient for `h_prev`.
    pub fn step_backward(&mut self, x: &[f64], s: &GruStep, dh: &[f64], dx: &mut [f64]) -> Vec<f64> {
        let d_h = self.d_h();
        let mut dh_prev = vec![0.0; d_h];
        let mut da_z = vec![0.0; d_h];
        let mut da_h = vec![0.0; d_h];
        for j in 0..d_h {
            let dz = dh[j] * (s.h_prev[j] - s.cand[j]);
            let dcand = dh[j] * (1.0 - s.z[j]);
            dh_prev[j] = dh[j] * s.z[j];
            da_z[j] = dz * s.z[j] * (1.0 - s.z[j]);
            da_h[j] = dcand * (1.0 - s.cand[j] * s.cand[j]);
        }

        // candidate gate
        let rh: Vec<f64> = s.r.iter().zip(&s.h_prev).map(|(a, b)| a * b).collect();
        outer_acc(x, &da_h, &mut self.w_h.grad);
        outer_acc(&rh, &da_h, &mut self.u_h.grad);
        add_into(self.b_h.grad.row_mut(0), &da_h);
        mat_vec_acc(&self.w_h.value, &da_h, dx);
        let mut d_rh = vec![0.0; d_h];
        mat_vec_acc(&self.u_h.value, &da_h, &mut d_rh);
        let mut da_r = vec![0.0; d_h];
        for j in 0..d_h {
            dh_prev[j] += d_rh[j] * s.r[j];
            let dr = d_rh[j] * s.h_prev[j];
            da_r[j] = dr * s.r[j] * (1.0 - s.r[j]);
        }

        // update gate
        outer_acc(x, &da_z, &mut self.w_z.grad);
        outer_acc(&s.h_prev, &da_z, &mut self.u_z.grad);
        add_into(self.b_z.grad.row_mut(0), &da_z);
        mat_vec_acc(&self.w_z.value, &da_z, dx);
        mat_vec_acc(&self.u_z.value, &da_z, &mut dh_prev);

        // reset gate
        outer_acc(x, &da_r, &mut self.w_r.grad);
        outer_acc(&s.h_prev, &da_r, &mut self.u_r.grad);
        add_into(self.b_r.grad.row_mut(0), &da_r);
        mat_vec_acc(&self.w_r.value, &da_r, dx);
        mat_vec_acc(&self.u_r.value, &da_r, &mut dh_prev);

        dh_prev
    }

    /// Runs the cell over `inputs` (one row per time step), forwards or in
    /// reverse. Returned caches are in processing order.
    pub fn run(&self, inputs: &Matrix, reverse: bool) -> Vec<GruStep> {
        let t_len = inputs.rows();
        let mut h = vec![0.0; self.d_h()];
        let mut steps = Vec::with_capacity(t_len);
        for k in 0..t_len {
            let t = if reverse { t_len - 1 - k } else { k };
            let s = self.step(inputs.row(t), &h);
            h.clone_from(&s.h);
            steps.push(s);
        }
        steps
    }

    /// BPTT for [`run`](Self::run). `d_outputs` is indexed by time step (not
    /// processing order); the returned input gradients likewise.
    pub fn run_backward(
        &mut self,
        inputs: &Matrix,
        steps: &[GruStep],
        d_outputs: &Matrix,
        reverse: bool,
    ) -> Matrix {
        let t_len = inputs.rows();
        let mut d_inputs = Matrix::zeros(t_len, inputs.cols());
        let mut carry = vec![0.0; self.d_h()];
        for k in (0..t_len).rev() {
            let t = if reverse { t_len - 1 - k } else { k };
            let mut dh = d_outputs.row(t).to_vec();
            add_into(&mut dh, &carry);
            carry = self.step_backward(inputs.row(t), &steps[k], &dh, d_inputs.row_mut(t));
        }
        d_inputs
    }
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

impl Parameterized for GruCell {
    fn parameters(&self) -> Vec<&Parameter> {
        vec![
            &self.w_z, &self.w_r, &self.w_h, &self.u_z, &self.u_r, &self.u_h, &self.b_z,
            &self.b_r, &self.b_h,
        ]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![
            &mut self.w_z,
            &mut self.w_r,
            &mut self.w_h,
            &mut self.u_z,
            &mut self.u_r,
            &mut self.u_h,
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_h,
        ]
    }
}

/// Single GRU step on `1 x d` row matrices.
pub fn gru_cell_step(x_t: &Matrix, h_prev: &Matrix, cell: &GruCell) -> Result<Matrix> {
    cell.validate()?;
    if x_t.rows() != 1 || x_t.cols() != cell.d_in() {
        return Err(Error::Dimension {
            op: "gru input",
            left: x_t.shape(),
            right: cell.w_z.shape(),
        });
    }
    if h_prev.rows() != 1 || h_prev.cols() != cell.d_h() {
        return Err(Error::Dimension {
            op: "gru hidden",
            left: h_prev.shape(),
            right: cell.u_z.shape(),
        });
    }
    Ok(Matrix::row_vector(&cell.step(x_t.row(0), h_prev.row(0)).h))
}
