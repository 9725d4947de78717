//! The 10 cross-platform features of one rumor: mean and variance of the
//! cosine distance to each evidence title, then mean and variance of each
//! agreement class probability.

use serde::{Deserialize, Serialize};

use crate::agreement::{predict_agreement, AgreementDistribution, AgreementParams, Stance};
use crate::embedding::{EncoderParams, SentenceVector, Vocabulary};
use crate::error::{Error, Result};

pub const NUM_FEATURES: usize = 10;

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "dist_mean",
    "dist_var",
    "agree_mean",
    "agree_var",
    "disagree_mean",
    "disagree_var",
    "discuss_mean",
    "discuss_var",
    "unrelated_mean",
    "unrelated_var",
];

/// Distance assumed for an unusable (zero-norm) embedding.
pub const NEUTRAL_DISTANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Google,
    Baidu,
}

impl Engine {
    pub fn as_str(self) -> &'static str {
        match self {
            Engine::Google => "google",
            Engine::Baidu => "baidu",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceItem {
    pub title: String,
    pub engine: Engine,
    pub media_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceSet {
    pub rumor: String,
    pub items: Vec<EvidenceItem>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcpFeatures(pub [f64; NUM_FEATURES]);

impl CcpFeatures {
    /// Vector used when no evidence was retrieved.
    pub const IMPUTED: CcpFeatures =
        CcpFeatures([NEUTRAL_DISTANCE, 0.0, 0.25, 0.0, 0.25, 0.0, 0.25, 0.0, 0.25, 0.0]);

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dist_mean(&self) -> f64 {
        self.0[0]
    }

    pub fn dist_var(&self) -> f64 {
        self.0[1]
    }

    pub fn class_mean(&self, s: Stance) -> f64 {
        self.0[2 + 2 * s.index()]
    }

    pub fn class_var(&self, s: Stance) -> f64 {
        self.0[3 + 2 * s.index()]
    }
}

/// `1 - cos(u, v)`, clamped to [0, 2].
pub fn cosine_distance(u: &SentenceVector, v: &SentenceVector) -> Result<f64> {
    let sim = crate::nn::cosine_similarity(&u.0, &v.0)?;
    Ok((1.0 - sim).clamp(0.0, 2.0))
}

/// Arithmetic mean and population variance.
pub fn mean_var(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.is_empty() {
        return Err(Error::arg("mean/variance of an empty sequence"));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Ok((mean, var))
}

fn sorted_mean_var(mut xs: Vec<f64>) -> Result<(f64, f64)> {
    xs.sort_by(f64::total_cmp);
    mean_var(&xs)
}

/// Aggregates per-item distances and agreement distributions. Empty input
/// yields [`CcpFeatures::IMPUTED`]. Each statistic is summed in sorted order,
/// so any permutation of the items gives bit-identical output.
pub fn aggregate(distances: &[f64], agreements: &[AgreementDistribution]) -> Result<CcpFeatures> {
    if distances.len() != agreements.len() {
        return Err(Error::arg("one distance per agreement distribution required"));
    }
    if distances.is_empty() {
        return Ok(CcpFeatures::IMPUTED);
    }
    let mut out = [0.0; NUM_FEATURES];
    (out[0], out[1]) = sorted_mean_var(distances.to_vec())?;
    for s in Stance::ALL {
        let (m, v) = sorted_mean_var(agreements.iter().map(|a| a.get(s)).collect())?;
        out[2 + 2 * s.index()] = m;
        out[3 + 2 * s.index()] = v;
    }
    Ok(CcpFeatures(out))
}

fn distance_or_neutral(u: &SentenceVector, v: &SentenceVector) -> Result<f64> {
    match cosine_distance(u, v) {
        Err(Error::Degenerate(_)) => Ok(NEUTRAL_DISTANCE),
        other => other,
    }
}

/// Features from an already-embedded rumor and titles.
pub fn features_from_vectors(
    rumor: &SentenceVector,
    titles: &[SentenceVector],
    agreement: &AgreementParams,
) -> Result<CcpFeatures> {
    let distances: Vec<f64> = titles
        .iter()
        .map(|t| distance_or_neutral(rumor, t))
        .collect::<Result<_>>()?;
    let agreements: Vec<AgreementDistribution> = titles
        .iter()
        .map(|t| predict_agreement(rumor, t, agreement))
        .collect::<Result<_>>()?;
    aggregate(&distances, &agreements)
}

/// Unique titles in first-seen order.
pub fn unique_titles(items: &[EvidenceItem]) -> Vec<&str> {
    let mut seen = std::collections::HashSet::new();
    items
        .iter()
        .map(|i| i.title.as_str())
        .filter(|t| seen.insert(*t))
        .collect()
}

/// Embeds the rumor and every distinct title, then aggregates.
pub fn extract_features(
    evidence: &EvidenceSet,
    encoder: &EncoderParams,
    vocab: &Vocabulary,
    agreement: &AgreementParams,
) -> Result<CcpFeatures> {
    let titles = unique_titles(&evidence.items);
    if titles.is_empty() {
        return Ok(CcpFeatures::IMPUTED);
    }
    let rumor = encoder.encode(&vocab.encode_text(&evidence.rumor))?;
    let vecs: Vec<SentenceVector> = titles
        .iter()
        .map(|t| encoder.encode(&vocab.encode_text(t)))
        .collect::<Result<_>>()?;
    features_from_vectors(&rumor, &vecs, agreement)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agreement::AgreementConfig;
    use crate::rng::RngState;
    use proptest::prelude::*;

    #[test]
    fn cosine_distance_examples() {
        let u = SentenceVector(vec![1.0, 0.0]);
        assert_eq!(cosine_distance(&u, &u).unwrap(), 0.0);
        assert_eq!(cosine_distance(&u, &SentenceVector(vec![-1.0, 0.0])).unwrap(), 2.0);
        let d = cosine_distance(&u, &SentenceVector(vec![1.0, 1.0])).unwrap();
        assert!((d - 0.29289).abs() < 1e-5);
        assert!(matches!(
            cosine_distance(&u, &SentenceVector(vec![0.0, 0.0])),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn mean_var_examples() {
        assert_eq!(mean_var(&[0.5]).unwrap(), (0.5, 0.0));
        assert_eq!(mean_var(&[0.0, 1.0]).unwrap(), (0.5, 0.25));
        assert_eq!(mean_var(&[0.3; 5]).unwrap().1, 0.0);
        assert!(mean_var(&[]).is_err());
    }

    #[test]
    fn fixture_aggregation() {
        let a = AgreementDistribution([0.7, 0.1, 0.1, 0.1]);
        let b = AgreementDistribution([0.1, 0.1, 0.1, 0.7]);
        let f = aggregate(&[0.0, 1.0], &[a, b]).unwrap();
        let expected = [0.5, 0.25, 0.4, 0.09, 0.1, 0.0, 0.1, 0.0, 0.4, 0.09];
        for (g, e) in f.0.iter().zip(expected) {
            assert!((g - e).abs() < 1e-12, "{f:?}");
        }
    }

    #[test]
    fn empty_evidence_is_imputed() {
        let f = aggregate(&[], &[]).unwrap();
        assert_eq!(f.0, [1.0, 0.0, 0.25, 0.0, 0.25, 0.0, 0.25, 0.0, 0.25, 0.0]);
    }

    #[test]
    fn identical_titles_have_zero_distance_and_variance() {
        let mut rng = RngState::new(3);
        let agr = AgreementParams::init(4, &AgreementConfig { hidden: 5, ..Default::default() }, &mut rng);
        let r = SentenceVector(vec![0.2, -0.5, 0.9, 0.1]);
        let f = features_from_vectors(&r, &[r.clone(), r.clone(), r.clone()], &agr).unwrap();
        assert!(f.dist_mean().abs() < 1e-12 && f.dist_var().abs() < 1e-24);
        for s in Stance::ALL {
            assert!(f.class_var(s).abs() < 1e-24);
        }
    }

    fn random_case(seed: u64) -> (Vec<f64>, Vec<AgreementDistribution>) {
        let mut rng = RngState::new(seed);
        let n = rng.below(6);
        let d = (0..n).map(|_| rng.uniform(0.0, 2.0)).collect();
        let a = (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..4).map(|_| rng.uniform(0.01, 1.0)).collect();
                let s: f64 = raw.iter().sum();
                AgreementDistribution([raw[0] / s, raw[1] / s, raw[2] / s, raw[3] / s])
            })
            .collect();
        (d, a)
    }

    proptest! {
        #[test]
        fn order_and_duplication_invariance(seed in any::<u64>(), rot in 0usize..6) {
            let (d, a) = random_case(seed);
            let base = aggregate(&d, &a).unwrap();
            prop_assert_eq!(base.0.len(), NUM_FEATURES);
            let k = if d.is_empty() { 0 } else { rot % d.len() };
            let (mut d2, mut a2) = (d.clone(), a.clone());
            d2.rotate_left(k);
            a2.rotate_left(k);
            d2.reverse();
            a2.reverse();
            let permuted = aggregate(&d2, &a2).unwrap();
            for (x, y) in base.0.iter().zip(permuted.0) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
            let dd: Vec<f64> = d.iter().chain(&d).copied().collect();
            let aa: Vec<_> = a.iter().chain(&a).copied().collect();
            let doubled = aggregate(&dd, &aa).unwrap();
            for (x, y) in base.0.iter().zip(doubled.0) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let mean_sum: f64 = Stance::ALL.iter().map(|&s| base.class_mean(s)).sum();
            prop_assert!((mean_sum - 1.0).abs() < 1e-9);
            prop_assert!((0.0..=2.0).contains(&base.dist_mean()));
            prop_assert!(base.0.iter().skip(1).step_by(2).all(|&v| v >= 0.0));
        }
    }
}
