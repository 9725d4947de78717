//! Four-way agreement classifier over `(rumor, title)` embedding pairs.
//!
//! The classifier is pre-trained on headline/body stance pairs with a frozen
//! encoder and later scores rumor/evidence-title pairs.

use std::path::Path;

use crate::checkpoint::{digest, Checkpoint};
use crate::embedding::{EncoderParams, SentenceVector, Vocabulary};
use crate::error::{Error, Result};
use crate::nn::{softmax, softmax_cross_entropy, Adam, AdamConfig, Matrix, Mlp, Parameterized};
use crate::rng::RngState;

/// Stance classes in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stance {
    Agree = 0,
    Disagree = 1,
    Discuss = 2,
    Unrelated = 3,
}

impl Stance {
    pub const ALL: [Stance; 4] = [
        Stance::Agree,
        Stance::Disagree,
        Stance::Discuss,
        Stance::Unrelated,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stance::Agree => "agree",
            Stance::Disagree => "disagree",
            Stance::Discuss => "discuss",
            Stance::Unrelated => "unrelated",
        }
    }
}

impl std::str::FromStr for Stance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Stance::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::data(format!("unknown stance label `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StancePair {
    pub headline: String,
    pub body: String,
    pub label: Stance,
}

/// Reads a stance file with `headline`, `body`, `label` columns. `.tsv`
/// files are tab-separated, anything else comma-separated (quoted fields
/// allowed).
pub fn load_stance(path: &Path) -> Result<Vec<StancePair>> {
    let delimiter = if path.extension().is_some_and(|e| e == "tsv") {
        b'\t'
    } else {
        b','
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(1, format!("missing column `{name}`")))
    };
    let (h, b, l) = (col("headline")?, col("body")?, col("label")?);
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let label = rec[l].parse::<Stance>().map_err(|e| parse_err(line, e.to_string()))?;
        out.push(StancePair {
            headline: rec[h].to_string(),
            body: rec[b].to_string(),
            label,
        });
    }
    Ok(out)
}

pub fn write_stance(path: &Path, pairs: &[StancePair]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["headline", "body", "label"]).map_err(io)?;
    for p in pairs {
        w.write_record([p.headline.as_str(), p.body.as_str(), p.label.as_str()])
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Seeded balanced dev split: `per_label` pairs of every class go to dev,
/// the rest (in original order) to train.
pub fn split_stance_data_with(
    dataset: &[StancePair],
    per_label: usize,
    rng: &mut RngState,
) -> Result<(Vec<StancePair>, Vec<StancePair>)> {
    let mut in_dev = vec![false; dataset.len()];
    for class in Stance::ALL {
        let mut idx: Vec<usize> = dataset
            .iter()
            .enumerate()
            .filter(|(_, p)| p.label == class)
            .map(|(i, _)| i)
            .collect();
        if idx.len() < per_label {
            return Err(Error::data(format!(
                "label `{}` has {} pairs, dev split needs {per_label}",
                class.as_str(),
                idx.len()
            )));
        }
        rng.shuffle(&mut idx);
        for &i in &idx[..per_label] {
            in_dev[i] = true;
        }
    }
    let (mut train, mut dev) = (Vec::new(), Vec::new());
    for (p, dev_side) in dataset.iter().zip(in_dev) {
        if dev_side {
            dev.push(p.clone());
        } else {
            train.push(p.clone());
        }
    }
    Ok((train, dev))
}

pub fn split_stance_data(
    dataset: &[StancePair],
    rng: &mut RngState,
) -> Result<(Vec<StancePair>, Vec<StancePair>)> {
    split_stance_data_with(dataset, 250, rng)
}

/// Probabilities over (agree, disagree, discuss, unrelated).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgreementDistribution(pub [f64; 4]);

impl AgreementDistribution {
    pub fn get(&self, s: Stance) -> f64 {
        self.0[s.index()]
    }

    pub fn argmax(&self) -> Stance {
        let mut best = 0;
        for i in 1..4 {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        Stance::ALL[best]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub adam: AdamConfig,
}

impl Default for AgreementConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            hidden: 100,
            dropout: 0.3,
            adam: AdamConfig::default(),
        }
    }
}

impl AgreementConfig {
    pub fn canonical(&self) -> String {
        format!(
            "agreement epochs={} batch_size={} hidden={} dropout={} lr={} beta1={} beta2={} eps={}",
            self.epochs,
            self.batch_size,
            self.hidden,
            self.dropout,
            self.adam.lr,
            self.adam.beta1,
            self.adam.beta2,
            self.adam.eps
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementParams {
    pub mlp: Mlp,
}

impl AgreementParams {
    pub fn init(vector_dim: usize, config: &AgreementConfig, rng: &mut RngState) -> Self {
        Self {
            mlp: Mlp::new(&[2 * vector_dim, config.hidden, 4], config.dropout, rng),
        }
    }

    pub fn zeros(vector_dim: usize, hidden: usize) -> Self {
        Self {
            mlp: Mlp::zeros(&[2 * vector_dim, hidden, 4], 0.0),
        }
    }

    pub fn vector_dim(&self) -> usize {
        self.mlp.d_in() / 2
    }

    pub fn to_checkpoint(&self, seed: u64, config_digest: String) -> Checkpoint {
        let mut ck = Checkpoint::new("agreement", seed, config_digest);
        crate::mlp_io::push_mlp(&mut ck, &self.mlp);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_kind("agreement")?;
        let mlp = crate::mlp_io::read_mlp(ck)?;
        if mlp.d_out() != 4 || mlp.d_in() % 2 != 0 {
            return Err(Error::data("agreement model must map 2d inputs to 4 classes"));
        }
        Ok(Self { mlp })
    }
}

fn pair_input(rumor: &SentenceVector, title: &SentenceVector, dim: usize) -> Result<Vec<f64>> {
    if rumor.dim() != dim || title.dim() != dim {
        return Err(Error::arg(format!(
            "agreement model expects {dim}-dim vectors, got {} and {}",
            rumor.dim(),
            title.dim()
        )));
    }
    Ok([rumor.as_slice(), title.as_slice()].concat())
}

/// Agreement probabilities for `concat(rumor, title)`, dropout off.
pub fn predict_agreement(
    rumor: &SentenceVector,
    title: &SentenceVector,
    params: &AgreementParams,
) -> Result<AgreementDistribution> {
    let x = pair_input(rumor, title, params.vector_dim())?;
    let logits = params.mlp.forward(&Matrix::row_vector(&x))?;
    let p = softmax(logits.row(0))?;
    Ok(AgreementDistribution([p[0], p[1], p[2], p[3]]))
}

/// Unweighted mean of per-class F1. A class absent from both predictions and
/// gold scores 1; any other zero denominator inside a class scores 0.
pub fn macro_f1(predictions: &[Stance], gold: &[Stance]) -> Result<f64> {
    if predictions.len() != gold.len() {
        return Err(Error::arg(format!(
            "{} predictions for {} gold labels",
            predictions.len(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::arg("macro F1 of empty sequences"));
    }
    let mut sum = 0.0;
    for class in Stance::ALL {
        let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
        for (&p, &g) in predictions.iter().zip(gold) {
            match (p == class, g == class) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fnn += 1,
                _ => {}
            }
        }
        sum += if tp + fp + fnn == 0 {
            1.0
        } else {
            let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
            let recall = if tp + fnn == 0 { 0.0 } else { tp as f64 / (tp + fnn) as f64 };
            if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            }
        };
    }
    Ok(sum / 4.0)
}

/// An encoded training example.
#[derive(Debug, Clone)]
pub struct EncodedStance {
    pub headline: SentenceVector,
    pub body: SentenceVector,
    pub label: Stance,
}

pub fn encode_stance(
    pairs: &[StancePair],
    encoder: &EncoderParams,
    vocab: &Vocabulary,
) -> Result<Vec<EncodedStance>> {
    pairs
        .iter()
        .map(|p| {
            Ok(EncodedStance {
                headline: encoder.encode(&vocab.encode_text(&p.headline))?,
                body: encoder.encode(&vocab.encode_text(&p.body))?,
                label: p.label,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementTrace {
    pub epoch_loss: Vec<f64>,
    pub dev_macro_f1: Vec<f64>,
    /// Epoch (1-based) whose parameters were kept; 0 means the initialization.
    pub best_epoch: usize,
}

fn dev_f1(params: &AgreementParams, dev: &[EncodedStance]) -> Result<f64> {
    let preds: Vec<Stance> = dev
        .iter()
        .map(|e| Ok(predict_agreement(&e.headline, &e.body, params)?.argmax()))
        .collect::<Result<_>>()?;
    let gold: Vec<Stance> = dev.iter().map(|e| e.label).collect();
    macro_f1(&preds, &gold)
}

/// Mini-batch training on pre-encoded pairs, keeping the epoch with the best
/// dev macro-F1 (earliest on ties).
pub fn train_agreement_encoded(
    train: &[EncodedStance],
    dev: &[EncodedStance],
    config: &AgreementConfig,
    rng: &mut RngState,
) -> Result<(AgreementParams, AgreementTrace)> {
    let first = train
        .first()
        .ok_or_else(|| Error::arg("agreement training set is empty"))?;
    if dev.is_empty() {
        return Err(Error::arg("agreement dev set is empty"));
    }
    let dim = first.headline.dim();
    let mut params = AgreementParams::init(dim, config, rng);
    let mut best = params.clone();
    let mut best_f1 = dev_f1(&params, dev)?;
    let mut trace = AgreementTrace {
        epoch_loss: Vec::new(),
        dev_macro_f1: Vec::new(),
        best_epoch: 0,
    };
    let inputs: Vec<Vec<f64>> = train
        .iter()
        .map(|e| pair_input(&e.headline, &e.body, dim))
        .collect::<Result<_>>()?;
    let mut adam = Adam::new(config.adam);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let batch_size = config.batch_size.max(1);
    for epoch in 0..config.epochs {
        let mut erng = rng.derive(epoch as u64);
        erng.shuffle(&mut order);
        let (mut sum, mut n) = (0.0, 0usize);
        for chunk in order.chunks(batch_size) {
            let mut x = Matrix::zeros(chunk.len(), 2 * dim);
            for (r, &i) in chunk.iter().enumerate() {
                x.row_mut(r).copy_from_slice(&inputs[i]);
            }
            let targets: Vec<usize> = chunk.iter().map(|&i| train[i].label.index()).collect();
            let tr = params.mlp.forward_train(&x, Some(&mut erng))?;
            let (loss, dl) = softmax_cross_entropy(&tr.logits, &targets)?;
            params.mlp.zero_grad();
            params.mlp.backward(&tr, &dl)?;
            adam.step(params.mlp.parameters_mut())?;
            sum += loss;
            n += 1;
        }
        trace.epoch_loss.push(sum / n.max(1) as f64);
        let f1 = dev_f1(&params, dev)?;
        trace.dev_macro_f1.push(f1);
        if f1 > best_f1 {
            best_f1 = f1;
            best = params.clone();
            trace.best_epoch = epoch + 1;
        }
    }
    Ok((best, trace))
}

/// Encodes with the frozen encoder and trains the classifier.
pub fn train_agreement(
    train: &[StancePair],
    dev: &[StancePair],
    encoder: &EncoderParams,
    vocab: &Vocabulary,
    config: &AgreementConfig,
    rng: &mut RngState,
) -> Result<(AgreementParams, AgreementTrace)> {
    if train.is_empty() {
        return Err(Error::arg("agreement training set is empty"));
    }
    let train = encode_stance(train, encoder, vocab)?;
    let dev = encode_stance(dev, encoder, vocab)?;
    train_agreement_encoded(&train, &dev, config, rng)
}

pub fn config_digest(config: &AgreementConfig) -> String {
    digest(&config.canonical())
}
