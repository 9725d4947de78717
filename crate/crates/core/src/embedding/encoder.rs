//! Two-layer bidirectional GRU sentence encoder.
//!
//! Token embeddings feed a first biGRU; its per-step `[forward, backward]`
//! states feed a second biGRU. Each layer's per-step states are averaged
//! over time and the two averages are concatenated, giving `4 * d_hidden`
//! values (300 with the default widths).

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::nn::{GruCell, GruStep, Matrix, Parameter, Parameterized};
use crate::rng::RngState;

pub const SENTENCE_DIM: usize = 300;

/// A sentence embedding in the shared space.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceVector(pub Vec<f64>);

impl SentenceVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderDims {
    pub vocab: usize,
    pub d_emb: usize,
    pub d_hidden: usize,
    pub max_len: usize,
}

impl EncoderDims {
    pub fn new(vocab: usize) -> Self {
        Self {
            vocab,
            d_emb: 128,
            d_hidden: 75,
            max_len: 64,
        }
    }

    pub fn output_dim(&self) -> usize {
        4 * self.d_hidden
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub dims: EncoderDims,
    pub embedding: Parameter,
    pub l1_fwd: GruCell,
    pub l1_bwd: GruCell,
    pub l2_fwd: GruCell,
    pub l2_bwd: GruCell,
}

/// Everything the backward pass needs from one encoding.
#[derive(Debug, Clone)]
pub struct EncodeTrace {
    ids: Vec<usize>,
    emb: Matrix,
    l1: Matrix,
    l1_f: Vec<GruStep>,
    l1_b: Vec<GruStep>,
    l2_f: Vec<GruStep>,
    l2_b: Vec<GruStep>,
    pub output: SentenceVector,
}

fn states(steps: &[GruStep], reverse: bool) -> impl Iterator<Item = (usize, &[f64])> {
    let n = steps.len();
    steps
        .iter()
        .enumerate()
        .map(move |(k, s)| (if reverse { n - 1 - k } else { k }, s.h.as_slice()))
}

impl EncoderParams {
    /// Uniform `±1/sqrt(fan_in)` weights, zero biases. The embedding table is
    /// looked up by a one-hot input, so its fan-in is 1.
    pub fn init(dims: EncoderDims, rng: &mut RngState) -> Self {
        let EncoderDims {
            vocab,
            d_emb,
            d_hidden,
            ..
        } = dims;
        Self {
            dims,
            embedding: Parameter::uniform(vocab, d_emb, 1, rng),
            l1_fwd: GruCell::new(d_emb, d_hidden, rng),
            l1_bwd: GruCell::new(d_emb, d_hidden, rng),
            l2_fwd: GruCell::new(2 * d_hidden, d_hidden, rng),
            l2_bwd: GruCell::new(2 * d_hidden, d_hidden, rng),
        }
    }

    pub fn zeros(dims: EncoderDims) -> Self {
        let EncoderDims {
            vocab,
            d_emb,
            d_hidden,
            ..
        } = dims;
        Self {
            dims,
            embedding: Parameter::zeros(vocab, d_emb),
            l1_fwd: GruCell::zeros(d_emb, d_hidden),
            l1_bwd: GruCell::zeros(d_emb, d_hidden),
            l2_fwd: GruCell::zeros(2 * d_hidden, d_hidden),
            l2_bwd: GruCell::zeros(2 * d_hidden, d_hidden),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.dims.output_dim()
    }

    fn prepare(&self, ids: &[usize]) -> Result<Vec<usize>> {
        if let Some(&bad) = ids.iter().find(|&&id| id >= self.dims.vocab) {
            return Err(Error::arg(format!(
                "token id {bad} outside vocabulary of {}",
                self.dims.vocab
            )));
        }
        let mut ids: Vec<usize> = ids.iter().copied().take(self.dims.max_len).collect();
        if ids.is_empty() {
            ids.push(super::vocab::UNK_ID.min(self.dims.vocab.saturating_sub(1)));
        }
        Ok(ids)
    }

    pub fn forward(&self, ids: &[usize]) -> Result<EncodeTrace> {
        let ids = self.prepare(ids)?;
        let t_len = ids.len();
        let d_h = self.dims.d_hidden;
        let mut emb = Matrix::zeros(t_len, self.dims.d_emb);
        for (t, &id) in ids.iter().enumerate() {
            emb.row_mut(t).copy_from_slice(self.embedding.value.row(id));
        }

        let l1_f = self.l1_fwd.run(&emb, false);
        let l1_b = self.l1_bwd.run(&emb, true);
        let mut l1 = Matrix::zeros(t_len, 2 * d_h);
        for (t, h) in states(&l1_f, false) {
            l1.row_mut(t)[..d_h].copy_from_slice(h);
        }
        for (t, h) in states(&l1_b, true) {
            l1.row_mut(t)[d_h..].copy_from_slice(h);
        }
        let l2_f = self.l2_fwd.run(&l1, false);
        let l2_b = self.l2_bwd.run(&l1, true);

        let inv = 1.0 / t_len as f64;
        let mut out = vec![0.0; 4 * d_h];
        for t in 0..t_len {
            for (o, v) in out[..2 * d_h].iter_mut().zip(l1.row(t)) {
                *o += v;
            }
        }
        for (_, h) in states(&l2_f, false) {
            for (o, v) in out[2 * d_h..3 * d_h].iter_mut().zip(h) {
                *o += v;
            }
        }
        for (_, h) in states(&l2_b, true) {
            for (o, v) in out[3 * d_h..].iter_mut().zip(h) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|v| *v *= inv);

        Ok(EncodeTrace {
            ids,
            emb,
            l1,
            l1_f,
            l1_b,
            l2_f,
            l2_b,
            output: SentenceVector(out),
        })
    }

    pub fn encode(&self, ids: &[usize]) -> Result<SentenceVector> {
        Ok(self.forward(ids)?.output)
    }

    /// Accumulates parameter gradients for `d output`.
    pub fn backward(&mut self, trace: &EncodeTrace, d_out: &[f64]) -> Result<()> {
        let d_h = self.dims.d_hidden;
        if d_out.len() != 4 * d_h {
            return Err(Error::Dimension {
                op: "encoder backward",
                left: (1, d_out.len()),
                right: (1, 4 * d_h),
            });
        }
        let t_len = trace.ids.len();
        let inv = 1.0 / t_len as f64;

        let mut d_l2f = Matrix::zeros(t_len, d_h);
        let mut d_l2b = Matrix::zeros(t_len, d_h);
        let mut d_l1 = Matrix::zeros(t_len, 2 * d_h);
        for t in 0..t_len {
            for (d, g) in d_l1.row_mut(t).iter_mut().zip(&d_out[..2 * d_h]) {
                *d = g * inv;
            }
            for (d, g) in d_l2f.row_mut(t).iter_mut().zip(&d_out[2 * d_h..3 * d_h]) {
                *d = g * inv;
            }
            for (d, g) in d_l2b.row_mut(t).iter_mut().zip(&d_out[3 * d_h..]) {
                *d = g * inv;
            }
        }

        let from_f = self.l2_fwd.run_backward(&trace.l1, &trace.l2_f, &d_l2f, false);
        let from_b = self.l2_bwd.run_backward(&trace.l1, &trace.l2_b, &d_l2b, true);
        d_l1.add_assign(&from_f)?;
        d_l1.add_assign(&from_b)?;

        let mut d_l1f = Matrix::zeros(t_len, d_h);
        let mut d_l1b = Matrix::zeros(t_len, d_h);
        for t in 0..t_len {
            let row = d_l1.row(t);
            d_l1f.row_mut(t).copy_from_slice(&row[..d_h]);
            d_l1b.row_mut(t).copy_from_slice(&row[d_h..]);
        }
        let mut d_emb = self.l1_fwd.run_backward(&trace.emb, &trace.l1_f, &d_l1f, false);
        d_emb.add_assign(&self.l1_bwd.run_backward(&trace.emb, &trace.l1_b, &d_l1b, true))?;

        for (t, &id) in trace.ids.iter().enumerate() {
            for (g, d) in self.embedding.grad.row_mut(id).iter_mut().zip(d_emb.row(t)) {
                *g += d;
            }
        }
        Ok(())
    }

    pub fn to_checkpoint(&self, seed: u64, config_digest: String) -> Checkpoint {
        let mut ck = Checkpoint::new("encoder", seed, config_digest)
            .with_meta("vocab", self.dims.vocab)
            .with_meta("d_emb", self.dims.d_emb)
            .with_meta("d_hidden", self.dims.d_hidden)
            .with_meta("max_len", self.dims.max_len);
        ck.push("embedding", &self.embedding.value);
        for (prefix, cell) in [
            ("l1_fwd", &self.l1_fwd),
            ("l1_bwd", &self.l1_bwd),
            ("l2_fwd", &self.l2_fwd),
            ("l2_bwd", &self.l2_bwd),
        ] {
            for (name, p) in GATE_NAMES.iter().zip(cell.parameters()) {
                ck.push(format!("{prefix}.{name}"), &p.value);
            }
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_kind("encoder")?;
        let dims = EncoderDims {
            vocab: ck.meta_parse("vocab")?,
            d_emb: ck.meta_parse("d_emb")?,
            d_hidden: ck.meta_parse("d_hidden")?,
            max_len: ck.meta_parse("max_len")?,
        };
        let mut enc = Self::zeros(dims);
        enc.embedding = Parameter::new(ck.tensor("embedding")?.clone());
        for (prefix, cell) in [
            ("l1_fwd", &mut enc.l1_fwd),
            ("l1_bwd", &mut enc.l1_bwd),
            ("l2_fwd", &mut enc.l2_fwd),
            ("l2_bwd", &mut enc.l2_bwd),
        ] {
            for (name, p) in GATE_NAMES.iter().zip(cell.parameters_mut()) {
                *p = Parameter::new(ck.tensor(&format!("{prefix}.{name}"))?.clone());
            }
            cell.validate()?;
        }
        if enc.embedding.shape() != (dims.vocab, dims.d_emb) {
            return Err(Error::data("embedding table shape disagrees with meta"));
        }
        Ok(enc)
    }
}

const GATE_NAMES: [&str; 9] = ["w_z", "w_r", "w_h", "u_z", "u_r", "u_h", "b_z", "b_r", "b_h"];

impl Parameterized for EncoderParams {
    fn parameters(&self) -> Vec<&Parameter> {
        let mut v = vec![&self.embedding];
        for cell in [&self.l1_fwd, &self.l1_bwd, &self.l2_fwd, &self.l2_bwd] {
            v.extend(cell.parameters());
        }
        v
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut v = vec![&mut self.embedding];
        for cell in [
            &mut self.l1_fwd,
            &mut self.l1_bwd,
            &mut self.l2_fwd,
            &mut self.l2_bwd,
        ] {
            v.extend(cell.parameters_mut());
        }
        v
    }
}

/// Embeds a token-id sequence.
pub fn encode_sentence(ids: &[usize], params: &EncoderParams) -> Result<SentenceVector> {
    params.encode(ids)
}
