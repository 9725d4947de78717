use super::matrix::{dot, norm};
use crate::error::{Error, Result};

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::arg("softmax of empty input"));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("softmax input contains non-finite values"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

pub const PROB_FLOOR: f64 = 1e-12;

/// `-ln p[target]` with `p` clipped to `[1e-12, 1]`.
pub fn cross_entropy_loss(probs: &[f64], target: usize) -> Result<f64> {
    let p = *probs.get(target).ok_or_else(|| {
        Error::arg(format!(
            "target index {target} out of range for {} classes",
            probs.len()
        ))
    })?;
    Ok(-p.clamp(PROB_FLOOR, 1.0).ln())
}

/// Mean softmax cross-entropy over rows of `logits` and the gradient with
/// respect to the logits.
pub fn softmax_cross_entropy(
    logits: &super::Matrix,
    targets: &[usize],
) -> Result<(f64, super::Matrix)> {
    if logits.rows() != targets.len() {
        return Err(Error::arg(format!(
            "{} logit rows but {} targets",
            logits.rows(),
            targets.len()
        )));
    }
    let n = logits.rows().max(1) as f64;
    let mut grad = super::Matrix::zeros(logits.rows(), logits.cols());
    let mut total = 0.0;
    for (r, &t) in targets.iter().enumerate() {
        let probs = softmax(logits.row(r))?;
        total += cross_entropy_loss(&probs, t)?;
        let g = grad.row_mut(r);
        for (k, p) in probs.iter().enumerate() {
            g[k] = (p - if k == t { 1.0 } else { 0.0 }) / n;
        }
    }
    Ok((total / n, grad))
}

/// Cosine similarity; zero-norm inputs are rejected.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Dimension {
            op: "cosine",
            left: (1, u.len()),
            right: (1, v.len()),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Degenerate("zero-norm vector in cosine".into()));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Gradients of `cos(u, v)` with respect to `u` and `v`.
pub fn cosine_similarity_grad(u: &[f64], v: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let cos = cosine_similarity(u, v)?;
    let (nu, nv) = (norm(u), norm(v));
    let inv = 1.0 / (nu * nv);
    let gu = u
        .iter()
        .zip(v)
        .map(|(&a, &b)| b * inv - cos * a / (nu * nu))
        .collect();
    let gv = u
        .iter()
        .zip(v)
        .map(|(&a, &b)| a * inv - cos * b / (nv * nv))
        .collect();
    Ok((cos, gu, gv))
}

/// Hinge ranking loss `max(0, margin - cos(a, p) + cos(a, n))`.
pub fn ranking_loss(anchor: &[f64], positive: &[f64], negative: &[f64], margin: f64) -> Result<f64> {
    if !(margin > 0.0) {
        return Err(Error::arg(format!("margin must be positive, got {margin}")));
    }
    let pos = cosine_similarity(anchor, positive)?;
    let neg = cosine_similarity(anchor, negative)?;
    Ok((margin - pos + neg).max(0.0))
}

/// Gradients of the ranking loss for a single triplet.
pub struct TripletGrad {
    pub loss: f64,
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

pub fn ranking_loss_grad(
    anchor: &[f64],
    positive: &[f64],
    negative: &[f64],
    margin: f64,
) -> Result<TripletGrad> {
    let loss = ranking_loss(anchor, positive, negative, margin)?;
    let d = anchor.len();
    if loss <= 0.0 {
        return Ok(TripletGrad {
            loss,
            anchor: vec![0.0; d],
            positive: vec![0.0; d],
            negative: vec![0.0; d],
        });
    }
    let (_, ga_p, gp) = cosine_similarity_grad(anchor, positive)?;
    let (_, ga_n, gn) = cosine_similarity_grad(anchor, negative)?;
    Ok(TripletGrad {
        loss,
        anchor: ga_n.iter().zip(&ga_p).map(|(n, p)| n - p).collect(),
        positive: gp.into_iter().map(|g| -g).collect(),
        negative: gn,
    })
}
