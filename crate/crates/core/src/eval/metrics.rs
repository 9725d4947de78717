use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::verifier::{Veracity, Verdict};

pub const MIN_PERMUTATIONS: usize = 1000;

/// F1 with fake as the positive class. Zero denominators give 0.
pub fn f1_fake(predictions: &[Verdict], gold: &[Veracity]) -> Result<f64> {
    if predictions.len() != gold.len() {
        return Err(Error::arg(format!(
            "{} predictions for {} gold labels",
            predictions.len(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::arg("F1 needs at least one item"));
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (p, g) in predictions.iter().zip(gold) {
        match (p.label, g) {
            (Veracity::Fake, Veracity::Fake) => tp += 1,
            (Veracity::Fake, Veracity::Real) => fp += 1,
            (Veracity::Real, Veracity::Fake) => fn_ += 1,
            _ => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Pearson r between a feature column and the label coded fake=1, real=0.
/// `None` when either side is constant.
pub fn pearson_correlation(values: &[f64], labels: &[Veracity]) -> Result<Option<f64>> {
    if values.len() != labels.len() {
        return Err(Error::arg("feature and label columns differ in length"));
    }
    if values.len() < 2 {
        return Err(Error::arg("correlation needs at least 2 rows"));
    }
    let y: Vec<f64> = labels.iter().map(|l| l.index() as f64).collect();
    let n = values.len() as f64;
    let mx = values.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in values.iter().zip(&y) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if sxx <= (1e-12 * scale).powi(2) * n || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)))
}

/// Every column ranked by |r| descending; ties and undefined columns keep the
/// given order, undefined ones last.
pub fn top_features_report(
    names: &[&str],
    columns: &[Vec<f64>],
    labels: &[Veracity],
) -> Result<Vec<(String, Option<f64>)>> {
    if names.len() != columns.len() {
        return Err(Error::arg("one name per feature column required"));
    }
    let mut out: Vec<(usize, String, Option<f64>)> = names
        .iter()
        .zip(columns)
        .enumerate()
        .map(|(i, (n, c))| Ok((i, n.to_string(), pearson_correlation(c, labels)?)))
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| {
        let key = |r: Option<f64>| r.map(f64::abs).unwrap_or(-1.0);
        key(b.2).total_cmp(&key(a.2)).then(a.0.cmp(&b.0))
    });
    Ok(out.into_iter().map(|(_, n, r)| (n, r)).collect())
}

/// Paired approximate randomization on the mean difference. Each iteration
/// swaps every pair with probability 1/2; the p-value is add-one smoothed.
pub fn permutation_test(a: &[f64], b: &[f64], iterations: usize, rng: &mut RngState) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::arg(format!("paired scores differ in length: {} vs {}", a.len(), b.len())));
    }
    if iterations < MIN_PERMUTATIONS {
        return Err(Error::arg(format!("at least {MIN_PERMUTATIONS} iterations required, got {iterations}")));
    }
    if a.is_empty() {
        return Ok(1.0);
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let observed = diffs.iter().sum::<f64>().abs();
    let tolerance = 1e-9 * observed.max(1.0);
    let mut hits = 0usize;
    for _ in 0..iterations {
        let s: f64 = diffs
            .iter()
            .map(|d| if rng.bernoulli(0.5) { -d } else { *d })
            .sum();
        if s.abs() >= observed - tolerance {
            hits += 1;
        }
    }
    Ok((hits + 1) as f64 / (iterations + 1) as f64)
}

/// Fair coin per item.
pub fn random_baseline(n: usize, rng: &mut RngState) -> Vec<Verdict> {
    (0..n)
        .map(|_| Verdict::from_p_fake(if rng.bernoulli(0.5) { 1.0 } else { 0.0 }))
        .collect()
}
