use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;

use crate::agreement::AgreementParams;
use crate::corpus::{build_evidence, Corpus, FeatureSource, Label, Post};
use crate::embedding::{EncoderParams, SentenceVector, Vocabulary};
use crate::error::{Error, Result};
use crate::features::{features_from_vectors, unique_titles, CcpFeatures, FEATURE_NAMES, NUM_FEATURES};
use crate::verifier::{Veracity, Verdict};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub post_id: String,
    pub event_id: u32,
    pub source: FeatureSource,
    pub features: CcpFeatures,
    /// Distinct evidence titles behind the features; 0 means imputed.
    pub evidence: usize,
    pub label: Label,
}

impl FeatureRow {
    pub fn veracity(&self) -> Option<Veracity> {
        self.label.veracity()
    }
}

fn header() -> Vec<&'static str> {
    let mut h = vec!["post_id", "event_id", "source"];
    h.extend(FEATURE_NAMES);
    h.extend(["evidence", "label"]);
    h
}

pub fn write_feature_table(path: &Path, rows: &[FeatureRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .from_path(path)
        .map_err(|e| Error::Data(e.to_string()))?;
    let csv_err = |e: csv::Error| Error::Data(e.to_string());
    w.write_record(header()).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![r.post_id.clone(), r.event_id.to_string(), r.source.to_string()];
        rec.extend(r.features.0.iter().map(|v| v.to_string()));
        rec.push(r.evidence.to_string());
        rec.push(r.label.as_str().to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_table(path: &Path) -> Result<Vec<FeatureRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let head: Vec<String> = reader
        .headers()
        .map_err(|e| Error::data(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    if head != header() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "unexpected feature table header".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse()
                .map_err(|_| parse_err(format!("bad number `{}` in {}", &rec[k], header()[k])))
        };
        let mut f = [0.0; NUM_FEATURES];
        for (k, v) in f.iter_mut().enumerate() {
            *v = num(3 + k)?;
        }
        rows.push(FeatureRow {
            post_id: rec[0].to_string(),
            event_id: rec[1].parse().map_err(|_| parse_err(format!("bad event id `{}`", &rec[1])))?,
            source: rec[2].parse().map_err(|e: Error| parse_err(e.to_string()))?,
            features: CcpFeatures(f),
            evidence: rec[3 + NUM_FEATURES]
                .parse()
                .map_err(|_| parse_err("bad evidence count".into()))?,
            label: rec[4 + NUM_FEATURES].parse().map_err(|e: Error| parse_err(e.to_string()))?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub post_id: String,
    pub event_id: u32,
    pub verdict: Verdict,
    pub gold: Veracity,
}

pub fn write_predictions(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .from_path(path)
        .map_err(|e| Error::Data(e.to_string()))?;
    let csv_err = |e: csv::Error| Error::Data(e.to_string());
    w.write_record(["post_id", "event_id", "p_fake", "label", "gold"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.post_id.clone(),
            r.event_id.to_string(),
            r.verdict.p_fake.to_string(),
            r.verdict.label.as_str().to_string(),
            r.gold.as_str().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Features for every post the source applies to, in corpus order. Each
/// distinct text is embedded once.
pub fn extract_corpus_features(
    corpus: &Corpus,
    source: FeatureSource,
    encoder: &EncoderParams,
    vocab: &Vocabulary,
    agreement: &AgreementParams,
) -> Result<Vec<FeatureRow>> {
    let posts: Vec<&Post> = corpus.posts_on(source.post_platform());
    let evidence = posts
        .iter()
        .map(|p| build_evidence(p, source, &corpus.evidence))
        .collect::<Result<Vec<_>>>()?;
    let mut texts = BTreeSet::new();
    for e in &evidence {
        if !e.items.is_empty() {
            texts.insert(e.rumor.as_str());
            texts.extend(e.items.iter().map(|i| i.title.as_str()));
        }
    }
    let texts: Vec<&str> = texts.into_iter().collect();
    let vectors: Vec<SentenceVector> = texts
        .par_iter()
        .map(|t| encoder.encode(&vocab.encode_text(t)))
        .collect::<Result<_>>()?;
    let cache: HashMap<&str, &SentenceVector> = texts.iter().copied().zip(&vectors).collect();
    posts
        .iter()
        .zip(&evidence)
        .map(|(p, e)| {
            let titles = unique_titles(&e.items);
            let features = if titles.is_empty() {
                CcpFeatures::IMPUTED
            } else {
                let vs: Vec<SentenceVector> = titles.iter().map(|t| cache[t].clone()).collect();
                features_from_vectors(cache[e.rumor.as_str()], &vs, agreement)?
            };
            Ok(FeatureRow {
                post_id: p.post_id.clone(),
                event_id: p.event_id,
                source,
                features,
                evidence: titles.len(),
                label: p.label,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_table_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.tsv");
        let rows = vec![
            FeatureRow {
                post_id: "a".into(),
                event_id: 3,
                source: FeatureSource::Tfg,
                features: CcpFeatures(std::array::from_fn(|k| (k as f64 + 0.1) / 3.0)),
                evidence: 4,
                label: Label::Fake,
            },
            FeatureRow {
                post_id: "https://x/1".into(),
                event_id: 1,
                source: FeatureSource::Bfg,
                features: CcpFeatures::IMPUTED,
                evidence: 0,
                label: Label::Others,
            },
        ];
        write_feature_table(&path, &rows).unwrap();
        assert_eq!(read_feature_table(&path).unwrap(), rows);
    }

    #[test]
    fn bad_number_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.tsv");
        let mut text = header().join("\t");
        text.push_str("\na\t1\tTFG\t0\t0\t0\t0\t0\t0\t0\t0\t0\tzz\t1\treal\n");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(read_feature_table(&path), Err(Error::Parse { line: 2, .. })));
    }
}
