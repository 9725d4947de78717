use std::path::Path;

use serde::{Deserialize, Serialize};

use super::encoder::{EncoderDims, EncoderParams, SentenceVector};
use super::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::nn::{cosine_similarity, ranking_loss_grad, Adam, AdamConfig, Parameterized};
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Zh,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Zh => "zh",
        }
    }
}

impl std::str::FromStr for Language {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "en" => Ok(Language::En),
            "zh" => Ok(Language::Zh),
            other => Err(Error::data(format!("unknown language `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParallelPair {
    pub source: String,
    pub target: String,
    pub source_lang: Language,
    pub target_lang: Language,
}

impl ParallelPair {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Result<Self> {
        let (source, target) = (source.into(), target.into());
        if source.trim().is_empty() || target.trim().is_empty() {
            return Err(Error::arg("parallel pair sides must be non-empty"));
        }
        Ok(Self {
            source,
            target,
            source_lang: Language::En,
            target_lang: Language::Zh,
        })
    }
}

/// Reads `source<TAB>target` lines. Blank lines are skipped.
pub fn load_parallel(path: &Path) -> Result<Vec<ParallelPair>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (s, t) = line.split_once('\t').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: "expected source<TAB>target".into(),
        })?;
        pairs.push(ParallelPair::new(s, t).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub margin: f64,
    pub adam: AdamConfig,
    pub d_emb: usize,
    pub d_hidden: usize,
    pub max_len: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            margin: 0.5,
            adam: AdamConfig::default(),
            d_emb: 128,
            d_hidden: 75,
            max_len: 64,
        }
    }
}

impl EmbeddingConfig {
    pub fn canonical(&self) -> String {
        format!(
            "embedding epochs={} batch_size={} margin={} lr={} beta1={} beta2={} eps={} d_emb={} d_hidden={} max_len={}",
            self.epochs,
            self.batch_size,
            self.margin,
            self.adam.lr,
            self.adam.beta1,
            self.adam.beta2,
            self.adam.eps,
            self.d_emb,
            self.d_hidden,
            self.max_len
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTrace {
    /// Mean batch loss per epoch.
    pub epoch_loss: Vec<f64>,
    pub probe_start: f64,
    pub probe_end: f64,
}

/// Mean hinge loss over all in-batch triplets `(src_i, tgt_i, tgt_j)`, `j != i`,
/// with gradients for every source and target vector.
pub fn in_batch_ranking_loss(
    sources: &[SentenceVector],
    targets: &[SentenceVector],
    margin: f64,
) -> Result<(f64, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let b = sources.len();
    if b < 2 || targets.len() != b {
        return Err(Error::arg("in-batch ranking needs at least 2 aligned pairs"));
    }
    let d = sources[0].dim();
    let mut d_src = vec![vec![0.0; d]; b];
    let mut d_tgt = vec![vec![0.0; d]; b];
    let scale = 1.0 / (b * (b - 1)) as f64;
    let mut total = 0.0;
    for i in 0..b {
        for j in 0..b {
            if i == j {
                continue;
            }
            let g = ranking_loss_grad(&sources[i].0, &targets[i].0, &targets[j].0, margin)?;
            if g.loss == 0.0 {
                continue;
            }
            total += g.loss;
            for k in 0..d {
                d_src[i][k] += scale * g.anchor[k];
                d_tgt[i][k] += scale * g.positive[k];
                d_tgt[j][k] += scale * g.negative[k];
            }
        }
    }
    Ok((total * scale, d_src, d_tgt))
}

fn batch_loss(enc: &EncoderParams, batch: &[(Vec<usize>, Vec<usize>)], margin: f64) -> Result<f64> {
    let src: Vec<SentenceVector> = batch.iter().map(|(s, _)| enc.encode(s)).collect::<Result<_>>()?;
    let tgt: Vec<SentenceVector> = batch.iter().map(|(_, t)| enc.encode(t)).collect::<Result<_>>()?;
    Ok(in_batch_ranking_loss(&src, &tgt, margin)?.0)
}

/// Forward, backward and one Adam update on a batch. Returns the batch loss.
pub fn train_step(
    enc: &mut EncoderParams,
    adam: &mut Adam,
    batch: &[(Vec<usize>, Vec<usize>)],
    margin: f64,
) -> Result<f64> {
    let src: Vec<_> = batch.iter().map(|(s, _)| enc.forward(s)).collect::<Result<_>>()?;
    let tgt: Vec<_> = batch.iter().map(|(_, t)| enc.forward(t)).collect::<Result<_>>()?;
    let sv: Vec<SentenceVector> = src.iter().map(|t| t.output.clone()).collect();
    let tv: Vec<SentenceVector> = tgt.iter().map(|t| t.output.clone()).collect();
    let (loss, d_src, d_tgt) = in_batch_ranking_loss(&sv, &tv, margin)?;
    enc.zero_grad();
    for (trace, d) in src.iter().zip(&d_src).chain(tgt.iter().zip(&d_tgt)) {
        enc.backward(trace, d)?;
    }
    adam.step(enc.parameters_mut())?;
    Ok(loss)
}

/// Trains the shared encoder with in-batch negatives.
pub fn train_embedding(
    pairs: &[ParallelPair],
    vocab: &Vocabulary,
    config: &EmbeddingConfig,
    rng: &mut RngState,
) -> Result<(EncoderParams, EmbeddingTrace)> {
    let dims = EncoderDims {
        vocab: vocab.len(),
        d_emb: config.d_emb,
        d_hidden: config.d_hidden,
        max_len: config.max_len,
    };
    let init = EncoderParams::init(dims, rng);
    train_embedding_from(init, pairs, vocab, config, rng)
}

/// Continues training from given parameters.
pub fn train_embedding_from(
    mut enc: EncoderParams,
    pairs: &[ParallelPair],
    vocab: &Vocabulary,
    config: &EmbeddingConfig,
    rng: &mut RngState,
) -> Result<(EncoderParams, EmbeddingTrace)> {
    if pairs.len() < 2 {
        return Err(Error::arg("embedding training needs at least 2 pairs"));
    }
    if config.batch_size < 2 {
        return Err(Error::arg("batch size must be at least 2"));
    }
    let ids: Vec<(Vec<usize>, Vec<usize>)> = pairs
        .iter()
        .map(|p| (vocab.encode_text(&p.source), vocab.encode_text(&p.target)))
        .collect();
    let probe: Vec<_> = ids.iter().take(config.batch_size).cloned().collect();
    let probe_start = batch_loss(&enc, &probe, config.margin)?;

    let mut adam = Adam::new(config.adam);
    let mut order: Vec<usize> = (0..ids.len()).collect();
    let mut epoch_loss = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut epoch_rng = rng.derive(epoch as u64);
        epoch_rng.shuffle(&mut order);
        let (mut sum, mut batches) = (0.0, 0usize);
        for chunk in order.chunks(config.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let batch: Vec<_> = chunk.iter().map(|&i| ids[i].clone()).collect();
            sum += train_step(&mut enc, &mut adam, &batch, config.margin)?;
            batches += 1;
        }
        epoch_loss.push(sum / batches.max(1) as f64);
    }
    let probe_end = batch_loss(&enc, &probe, config.margin)?;
    Ok((
        enc,
        EmbeddingTrace {
            epoch_loss,
            probe_start,
            probe_end,
        },
    ))
}

fn similarity(u: &SentenceVector, v: &SentenceVector) -> f64 {
    cosine_similarity(&u.0, &v.0).unwrap_or(0.0)
}

/// Fraction of sources whose own target is the most cosine-similar among all
/// targets. Ties go to the lower index; zero vectors score similarity 0.
pub fn retrieval_at_1(sources: &[SentenceVector], targets: &[SentenceVector]) -> Result<f64> {
    if sources.len() < 2 || sources.len() != targets.len() {
        return Err(Error::arg("retrieval needs at least 2 aligned pairs"));
    }
    let hits = sources
        .iter()
        .enumerate()
        .filter(|(i, s)| {
            let mut best = 0;
            let mut best_sim = f64::NEG_INFINITY;
            for (j, t) in targets.iter().enumerate() {
                let sim = similarity(s, t);
                if sim > best_sim {
                    best_sim = sim;
                    best = j;
                }
            }
            best == *i
        })
        .count();
    Ok(hits as f64 / sources.len() as f64)
}

pub fn eval_pair_retrieval(
    pairs: &[ParallelPair],
    encoder: &EncoderParams,
    vocab: &Vocabulary,
) -> Result<f64> {
    let src: Vec<_> = pairs
        .iter()
        .map(|p| encoder.encode(&vocab.encode_text(&p.source)))
        .collect::<Result<_>>()?;
    let tgt: Vec<_> = pairs
        .iter()
        .map(|p| encoder.encode(&vocab.encode_text(&p.target)))
        .collect::<Result<_>>()?;
    retrieval_at_1(&src, &tgt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{build_vocabulary, CipherLexicon};
    use crate::nn::{grad_check, GradCheckOptions, Parameter};

    fn tiny_config() -> EmbeddingConfig {
        EmbeddingConfig {
            epochs: 1,
            batch_size: 4,
            d_emb: 6,
            d_hidden: 4,
            ..Default::default()
        }
    }

    fn cipher_pairs(n: usize, seed: u64) -> (Vec<ParallelPair>, Vocabulary) {
        let mut rng = RngState::new(seed);
        let lex = CipherLexicon::generate(20, &mut rng);
        let pairs: Vec<_> = (0..n)
            .map(|_| {
                let s = lex.sentence(3, 5, &mut rng);
                ParallelPair::new(lex.encipher(&s), s).unwrap()
            })
            .collect();
        let vocab = build_vocabulary(pairs.iter().flat_map(|p| [&p.source, &p.target]), 1);
        (pairs, vocab)
    }

    #[test]
    fn needs_two_pairs() {
        let (pairs, vocab) = cipher_pairs(1, 0);
        let res = train_embedding(&pairs, &vocab, &tiny_config(), &mut RngState::new(0));
        assert!(matches!(res, Err(Error::Argument(_))));
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let (pairs, vocab) = cipher_pairs(6, 1);
        let cfg = EmbeddingConfig {
            epochs: 0,
            ..tiny_config()
        };
        let mut rng = RngState::new(9);
        let (enc, trace) = train_embedding(&pairs, &vocab, &cfg, &mut rng.clone()).unwrap();
        let dims = EncoderDims {
            vocab: vocab.len(),
            d_emb: 6,
            d_hidden: 4,
            max_len: 64,
        };
        assert_eq!(enc, EncoderParams::init(dims, &mut rng));
        assert!(trace.epoch_loss.is_empty());
        assert_eq!(trace.probe_start, trace.probe_end);
    }

    #[test]
    fn one_step_reduces_probe_loss() {
        let (pairs, vocab) = cipher_pairs(4, 2);
        let cfg = EmbeddingConfig {
            adam: AdamConfig {
                lr: 1e-2,
                ..Default::default()
            },
            ..tiny_config()
        };
        let (_, trace) = train_embedding(&pairs, &vocab, &cfg, &mut RngState::new(3)).unwrap();
        assert!(trace.probe_end < trace.probe_start, "{trace:?}");
    }

    #[test]
    fn training_is_deterministic() {
        let (pairs, vocab) = cipher_pairs(10, 4);
        let a = train_embedding(&pairs, &vocab, &tiny_config(), &mut RngState::new(5)).unwrap();
        let b = train_embedding(&pairs, &vocab, &tiny_config(), &mut RngState::new(5)).unwrap();
        assert_eq!(a.0.to_checkpoint(5, "x".into()).to_text(), b.0.to_checkpoint(5, "x".into()).to_text());
    }

    #[test]
    fn in_batch_loss_gradients() {
        // wrap the batch vectors as parameters so the checker can perturb them
        let mut rng = RngState::new(8);
        let mut params: Vec<Parameter> = (0..6)
            .map(|_| Parameter::uniform(1, 5, 1, &mut rng))
            .collect();
        let err = grad_check(&mut params, GradCheckOptions::default(), |ps, backprop| {
            let src: Vec<_> = ps[..3].iter().map(|p| SentenceVector(p.value.data().to_vec())).collect();
            let tgt: Vec<_> = ps[3..].iter().map(|p| SentenceVector(p.value.data().to_vec())).collect();
            let (loss, ds, dt) = in_batch_ranking_loss(&src, &tgt, 2.5)?;
            if backprop {
                for (p, g) in ps.iter_mut().zip(ds.iter().chain(&dt)) {
                    p.grad.data_mut().iter_mut().zip(g).for_each(|(a, b)| *a += b);
                }
            }
            Ok(loss)
        })
        .unwrap();
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn retrieval_edge_cases() {
        let v = |a: f64, b: f64| SentenceVector(vec![a, b]);
        let src = vec![v(1.0, 0.0), v(0.0, 1.0)];
        assert_eq!(retrieval_at_1(&src, &src).unwrap(), 1.0);
        let swapped = vec![v(0.0, 1.0), v(1.0, 0.0)];
        assert_eq!(retrieval_at_1(&src, &swapped).unwrap(), 0.0);
        // identical targets tie → lower index wins
        let same = vec![v(1.0, 1.0), v(1.0, 1.0)];
        assert_eq!(retrieval_at_1(&src, &same).unwrap(), 0.5);
    }

    #[test]
    fn random_encoder_retrieval_near_chance() {
        let mut total = 0.0;
        let seeds = 20;
        for seed in 0..seeds {
            let mut rng = RngState::new(seed);
            let src: Vec<_> = (0..10)
                .map(|_| SentenceVector((0..8).map(|_| rng.normal()).collect()))
                .collect();
            let tgt: Vec<_> = (0..10)
                .map(|_| SentenceVector((0..8).map(|_| rng.normal()).collect()))
                .collect();
            total += retrieval_at_1(&src, &tgt).unwrap();
        }
        let mean = total / seeds as f64;
        assert!((mean - 0.1).abs() < 0.06, "{mean}");
    }

    #[test]
    fn parallel_file_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pairs.tsv");
        std::fs::write(&p, "hello world\t你好 世界\n\nbad line\n").unwrap();
        let err = load_parallel(&p).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        std::fs::write(&p, "hello world\t你好 世界\n").unwrap();
        assert_eq!(load_parallel(&p).unwrap().len(), 1);
    }
}
