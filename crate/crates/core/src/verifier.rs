//! Real/fake classifier over standardized [`CcpFeatures`].

use crate::checkpoint::Checkpoint;
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::features::{CcpFeatures, NUM_FEATURES};
use crate::nn::{softmax, softmax_cross_entropy, Adam, AdamConfig, Matrix, Mlp, Parameterized};
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Veracity {
    Real = 0,
    Fake = 1,
}

impl Veracity {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Veracity::Real => "real",
            Veracity::Fake => "fake",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub label: Veracity,
    pub p_fake: f64,
}

impl Verdict {
    /// `p_fake >= 0.5` is fake.
    pub fn from_p_fake(p_fake: f64) -> Self {
        let label = if p_fake >= 0.5 {
            Veracity::Fake
        } else {
            Veracity::Real
        };
        Self { label, p_fake }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifierConfig {
    pub epochs: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub adam: AdamConfig,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            hidden: 20,
            dropout: 0.5,
            adam: AdamConfig::default(),
        }
    }
}

impl VerifierConfig {
    pub fn canonical(&self) -> String {
        format!(
            "verifier epochs={} hidden={} dropout={} lr={} beta1={} beta2={} eps={}",
            self.epochs,
            self.hidden,
            self.dropout,
            self.adam.lr,
            self.adam.beta1,
            self.adam.beta2,
            self.adam.eps
        )
    }
}

/// MLP weights plus the training-set standardization constants.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifierParams {
    pub mlp: Mlp,
    pub mean: [f64; NUM_FEATURES],
    pub std: [f64; NUM_FEATURES],
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifierTrace {
    pub epoch_loss: Vec<f64>,
}

impl VerifierParams {
    pub fn init(config: &VerifierConfig, rng: &mut RngState) -> Self {
        Self {
            mlp: Mlp::new(
                &[NUM_FEATURES, config.hidden, config.hidden, 2],
                config.dropout,
                rng,
            ),
            mean: [0.0; NUM_FEATURES],
            std: [1.0; NUM_FEATURES],
        }
    }

    pub fn zeros() -> Self {
        Self {
            mlp: Mlp::zeros(&[NUM_FEATURES, 20, 20, 2], 0.5),
            mean: [0.0; NUM_FEATURES],
            std: [1.0; NUM_FEATURES],
        }
    }

    pub fn standardize(&self, f: &CcpFeatures) -> [f64; NUM_FEATURES] {
        let mut out = [0.0; NUM_FEATURES];
        for k in 0..NUM_FEATURES {
            out[k] = (f.0[k] - self.mean[k]) / self.std[k];
        }
        out
    }

    pub fn to_checkpoint(&self, seed: u64, config_digest: String, source: &str) -> Checkpoint {
        let mut ck = Checkpoint::new("verifier", seed, config_digest).with_meta("source", source);
        crate::mlp_io::push_mlp(&mut ck, &self.mlp);
        ck.push("standardize.mean", &Matrix::row_vector(&self.mean));
        ck.push("standardize.std", &Matrix::row_vector(&self.std));
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_kind("verifier")?;
        let mlp = crate::mlp_io::read_mlp(ck)?;
        if mlp.d_in() != NUM_FEATURES || mlp.d_out() != 2 {
            return Err(Error::data("verifier must map 10 features to 2 classes"));
        }
        let row = |name: &str| -> Result<[f64; NUM_FEATURES]> {
            let m = ck.tensor(name)?;
            m.data()
                .try_into()
                .map_err(|_| Error::data(format!("{name} must hold {NUM_FEATURES} values")))
        };
        Ok(Self {
            mlp,
            mean: row("standardize.mean")?,
            std: row("standardize.std")?,
        })
    }
}

fn standardization(rows: &[(CcpFeatures, Veracity)]) -> ([f64; NUM_FEATURES], [f64; NUM_FEATURES]) {
    let n = rows.len() as f64;
    let mut mean = [0.0; NUM_FEATURES];
    let mut std = [0.0; NUM_FEATURES];
    for (f, _) in rows {
        for k in 0..NUM_FEATURES {
            mean[k] += f.0[k] / n;
        }
    }
    for (f, _) in rows {
        for k in 0..NUM_FEATURES {
            std[k] += (f.0[k] - mean[k]).powi(2) / n;
        }
    }
    for s in &mut std {
        *s = s.sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    (mean, std)
}

/// Full-batch Adam training for a fixed number of epochs.
pub fn train_verifier(
    rows: &[(CcpFeatures, Veracity)],
    config: &VerifierConfig,
    rng: &mut RngState,
) -> Result<(VerifierParams, VerifierTrace)> {
    let fakes = rows.iter().filter(|(_, l)| *l == Veracity::Fake).count();
    if fakes == 0 || fakes == rows.len() {
        return Err(Error::data(
            "verifier training data must contain both real and fake rows",
        ));
    }
    let mut params = VerifierParams::init(config, rng);
    (params.mean, params.std) = standardization(rows);
    let mut x = Matrix::zeros(rows.len(), NUM_FEATURES);
    for (r, (f, _)) in rows.iter().enumerate() {
        x.row_mut(r).copy_from_slice(&params.standardize(f));
    }
    let targets: Vec<usize> = rows.iter().map(|(_, l)| l.index()).collect();
    let mut adam = Adam::new(config.adam);
    let mut epoch_loss = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut erng = rng.derive(epoch as u64);
        let trace = params.mlp.forward_train(&x, Some(&mut erng))?;
        let (loss, dl) = softmax_cross_entropy(&trace.logits, &targets)?;
        params.mlp.zero_grad();
        params.mlp.backward(&trace, &dl)?;
        adam.step(params.mlp.parameters_mut())?;
        epoch_loss.push(loss);
    }
    Ok((params, VerifierTrace { epoch_loss }))
}

/// Dropout-free forward pass on standardized features.
pub fn predict_verifier(features: &CcpFeatures, params: &VerifierParams) -> Result<Verdict> {
    let x = Matrix::row_vector(&params.standardize(features));
    let logits = params.mlp.forward(&x)?;
    let p = softmax(logits.row(0))?;
    Ok(Verdict::from_p_fake(p[Veracity::Fake.index()]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferOutput {
    /// Input positions that were scored.
    pub kept: Vec<usize>,
    pub verdicts: Vec<Verdict>,
    /// Rows skipped for carrying the "others" label.
    pub filtered: usize,
}

/// Scores rows from another domain with an already-trained verifier, keeping
/// its standardization untouched. "others" rows are skipped and counted.
pub fn transfer_predict(rows: &[(CcpFeatures, Label)], pretrained: &VerifierParams) -> Result<TransferOutput> {
    let mut out = TransferOutput {
        kept: Vec::new(),
        verdicts: Vec::new(),
        filtered: 0,
    };
    for (i, (f, label)) in rows.iter().enumerate() {
        if label.veracity().is_none() {
            out.filtered += 1;
            continue;
        }
        out.kept.push(i);
        out.verdicts.push(predict_verifier(f, pretrained)?);
    }
    Ok(out)
}

pub fn predict_many(features: &[CcpFeatures], params: &VerifierParams) -> Result<Vec<Verdict>> {
    features.iter().map(|f| predict_verifier(f, params)).collect()
}
