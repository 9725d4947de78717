use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::metrics::{f1_fake, permutation_test, random_baseline};
use super::table::{
    extract_corpus_features, read_feature_table, write_feature_table, write_predictions, FeatureRow,
    PredictionRow,
};
use crate::agreement::AgreementParams;
use crate::checkpoint::Checkpoint;
use crate::corpus::{load_corpus, loeo_splits, task_split, Corpus, FeatureSource, Post};
use crate::embedding::{EncoderParams, Vocabulary};
use crate::error::{Error, Result};
use crate::manifest::write_manifest;
use crate::rng::RngState;
use crate::verifier::{
    predict_verifier, train_verifier, transfer_predict, Veracity, Verdict, VerifierConfig, VerifierParams,
};

pub const REPORT_TSV: &str = "report.tsv";
pub const REPORT_TXT: &str = "report.txt";
pub const PREDICTIONS_FILE: &str = "predictions.tsv";
pub const SIGNIFICANCE_TSV: &str = "significance.tsv";

/// Published per-event F1 of the three reference systems (UoS, MCG, CER).
/// Shown next to our numbers only; never recomputed.
pub const BASELINE_F1: [(u32, [f64; 3]); 17] = [
    (1, [0.658, 0.594, 0.718]),
    (2, [0.007, 0.494, 0.745]),
    (3, [0.057, 0.882, 0.595]),
    (4, [0.538, 0.826, 0.717]),
    (5, [0.000, 0.988, 0.947]),
    (6, [0.555, 0.949, 0.916]),
    (7, [0.000, 1.000, 0.475]),
    (8, [0.000, 0.870, 1.000]),
    (9, [0.000, 0.772, 0.996]),
    (10, [0.000, 0.615, 0.821]),
    (11, [0.000, 0.963, 0.000]),
    (12, [0.000, 0.655, 0.754]),
    (13, [0.000, 0.954, 0.795]),
    (14, [0.000, 0.330, 0.419]),
    (15, [0.000, 0.130, 0.156]),
    (16, [1.000, 0.990, 0.999]),
    (17, [1.000, 0.827, 1.000]),
];
pub const BASELINE_NAMES: [&str; 3] = ["UoS", "MCG", "CER"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    Task,
    Event,
    Transfer,
}

impl Setting {
    pub fn as_str(self) -> &'static str {
        match self {
            Setting::Task => "task",
            Setting::Event => "event",
            Setting::Transfer => "transfer",
        }
    }
}

impl std::str::FromStr for Setting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "task" => Ok(Setting::Task),
            "event" => Ok(Setting::Event),
            "transfer" => Ok(Setting::Transfer),
            other => Err(Error::Config(format!("unknown setting `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub setting: Setting,
    pub source: FeatureSource,
    pub seed: u64,
    pub corpus: PathBuf,
    /// Precomputed feature table; when absent features are extracted with
    /// the encoder, vocabulary and agreement checkpoints.
    pub features: Option<PathBuf>,
    pub encoder: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub agreement: Option<PathBuf>,
    /// TFG-trained verifier, transfer setting only.
    pub verifier: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub verifier_config: VerifierConfig,
    pub iterations: usize,
    pub show_baselines: bool,
}

impl ExperimentConfig {
    pub fn new(setting: Setting, source: FeatureSource, corpus: PathBuf, out_dir: PathBuf) -> Self {
        Self {
            setting,
            source,
            seed: 0,
            corpus,
            features: None,
            encoder: None,
            vocab: None,
            agreement: None,
            verifier: None,
            out_dir,
            verifier_config: VerifierConfig::default(),
            iterations: 10_000,
            show_baselines: false,
        }
    }

    /// Everything that affects the outputs, without the output directory.
    pub fn canonical(&self) -> String {
        let p = |o: &Option<PathBuf>| o.as_ref().map(|p| p.display().to_string()).unwrap_or("-".into());
        format!(
            "setting={}\nsource={}\nseed={}\ncorpus={}\nfeatures={}\nencoder={}\nvocab={}\nagreement={}\nverifier={}\niterations={}\nshow_baselines={}\n{}",
            self.setting.as_str(),
            self.source,
            self.seed,
            self.corpus.display(),
            p(&self.features),
            p(&self.encoder),
            p(&self.vocab),
            p(&self.agreement),
            p(&self.verifier),
            self.iterations,
            self.show_baselines,
            self.verifier_config.canonical()
        )
    }

    /// Checks the setting/source pairing and that every input exists.
    pub fn validate(&self) -> Result<()> {
        match (self.setting, self.source) {
            (Setting::Transfer, FeatureSource::Bfg) => {
                if self.verifier.is_none() {
                    return Err(Error::Config("transfer needs a TFG-trained verifier checkpoint".into()));
                }
            }
            (Setting::Transfer, s) => {
                return Err(Error::Config(format!("transfer scores BFG features, not {s}")));
            }
            (_, FeatureSource::Bfg) => {
                return Err(Error::Config("BFG features are only used by the transfer setting".into()));
            }
            _ => {}
        }
        let mut required: Vec<(&str, &Path)> = vec![("corpus", &self.corpus)];
        match &self.features {
            Some(f) => required.push(("features", f)),
            None => {
                for (name, p) in [("encoder", &self.encoder), ("vocab", &self.vocab), ("agreement", &self.agreement)] {
                    match p {
                        Some(p) => required.push((name, p)),
                        None => {
                            return Err(Error::Config(format!(
                                "{name} checkpoint required when no feature table is given"
                            )))
                        }
                    }
                }
            }
        }
        if let Some(v) = &self.verifier {
            required.push(("verifier", v));
        }
        for (name, p) in required {
            if !p.exists() {
                return Err(Error::Config(format!("{name} input {} not found", p.display())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    /// `None` on summary rows.
    pub event_id: Option<u32>,
    pub name: String,
    /// `None` is the no-data marker.
    pub scores: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub setting: Setting,
    pub source: FeatureSource,
    pub columns: Vec<String>,
    pub rows: Vec<ReportRow>,
    /// Fake-F1 over all scored posts pooled, per column.
    pub pooled: Vec<Option<f64>>,
    /// Paired test on per-post correctness, ours vs the random baseline.
    pub p_value: Option<f64>,
    /// Same test on per-event F1.
    pub p_value_events: Option<f64>,
    pub filtered_others: usize,
}

impl Report {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Unweighted mean over event rows that have a score.
    pub fn average(&self, column: usize) -> Option<f64> {
        let xs: Vec<f64> = self.rows.iter().filter_map(|r| r.scores[column]).collect();
        (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
    }

    pub fn score(&self, column: usize, event_id: u32) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.event_id == Some(event_id))
            .and_then(|r| r.scores[column])
    }

    fn cell(v: Option<f64>) -> String {
        v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("id\tevent\t{}\n", self.columns.join("\t"));
        let mut line = |id: &str, name: &str, cells: Vec<Option<f64>>| {
            let cells: Vec<String> = cells.into_iter().map(Self::cell).collect();
            let _ = writeln!(out, "{id}\t{name}\t{}", cells.join("\t"));
        };
        for r in &self.rows {
            line(&format!("{:02}", r.event_id.unwrap_or(0)), &r.name, r.scores.clone());
        }
        line("", "Avg", (0..self.columns.len()).map(|c| self.average(c)).collect());
        line("", "Pooled", self.pooled.clone());
        out
    }

    /// Permutation-test p-values of our column against Random.
    pub fn significance_tsv(&self) -> String {
        format!(
            "test\tp_value\nper_post\t{}\nper_event\t{}\n",
            Self::cell(self.p_value),
            Self::cell(self.p_value_events)
        )
    }

    pub fn to_text(&self) -> String {
        let fmt3 = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
        let mut table: Vec<Vec<String>> = vec![["ID", "Event"]
            .iter()
            .map(|s| s.to_string())
            .chain(self.columns.iter().cloned())
            .collect()];
        for r in &self.rows {
            let mut row = vec![format!("{:02}", r.event_id.unwrap_or(0)), r.name.clone()];
            row.extend(r.scores.iter().map(|&s| fmt3(s)));
            table.push(row);
        }
        let mut avg = vec![String::new(), "Avg".to_string()];
        avg.extend((0..self.columns.len()).map(|c| fmt3(self.average(c))));
        table.push(avg);
        let widths: Vec<usize> = (0..table[0].len())
            .map(|c| table.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = format!("{} setting, {} features\n\n", self.setting.as_str(), self.source);
        for (i, row) in table.iter().enumerate() {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (s, w))| {
                    let pad = w - s.chars().count();
                    if c == 1 { format!("{s}{}", " ".repeat(pad)) } else { format!("{}{s}", " ".repeat(pad)) }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
            if i == 0 || i + 2 == table.len() {
                let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            }
        }
        let _ = writeln!(out);
        for (c, name) in self.columns.iter().enumerate() {
            let _ = writeln!(out, "pooled F1 {name}: {}", fmt3(self.pooled[c]));
        }
        let p = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(out, "p-value vs Random, per post: {}", p(self.p_value));
        let _ = writeln!(out, "p-value vs Random, per event: {}", p(self.p_value_events));
        if self.filtered_others > 0 {
            let _ = writeln!(out, "rows labeled others skipped: {}", self.filtered_others);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: Report,
    pub rows: Vec<FeatureRow>,
    pub predictions: Vec<PredictionRow>,
    /// Output file names relative to the output directory.
    pub files: Vec<String>,
}

pub fn load_features(cfg: &ExperimentConfig, corpus: &Corpus) -> Result<Vec<FeatureRow>> {
    if let Some(path) = &cfg.features {
        let rows = read_feature_table(path)?;
        if let Some(r) = rows.iter().find(|r| r.source != cfg.source) {
            return Err(Error::Config(format!(
                "feature table holds {} rows, {} requested",
                r.source, cfg.source
            )));
        }
        return Ok(rows);
    }
    let (encoder, vocab, agreement) = load_models(
        cfg.encoder.as_deref().unwrap_or(Path::new("")),
        cfg.vocab.as_deref().unwrap_or(Path::new("")),
        cfg.agreement.as_deref().unwrap_or(Path::new("")),
    )?;
    extract_corpus_features(corpus, cfg.source, &encoder, &vocab, &agreement)
}

/// Encoder, vocabulary and agreement classifier, checked for consistency.
pub fn load_models(encoder: &Path, vocab: &Path, agreement: &Path) -> Result<(EncoderParams, Vocabulary, AgreementParams)> {
    let enc = EncoderParams::from_checkpoint(&Checkpoint::load(encoder)?)?;
    let voc = Vocabulary::load(vocab)?;
    let agr = AgreementParams::from_checkpoint(&Checkpoint::load(agreement)?)?;
    if voc.len() != enc.dims.vocab {
        return Err(Error::data(format!(
            "vocabulary has {} tokens, encoder expects {}",
            voc.len(),
            enc.dims.vocab
        )));
    }
    if agr.vector_dim() != enc.output_dim() {
        return Err(Error::data(format!(
            "agreement classifier takes {}-d vectors, encoder gives {}",
            agr.vector_dim(),
            enc.output_dim()
        )));
    }
    Ok((enc, voc, agr))
}

struct Scored {
    event_id: u32,
    has_data: bool,
    ours: Vec<Verdict>,
    random: Vec<Verdict>,
    gold: Vec<Veracity>,
    post_ids: Vec<String>,
}

fn labeled<'a>(rows: &[&'a FeatureRow]) -> Vec<(&'a FeatureRow, Veracity)> {
    rows.iter().filter_map(|r| Some((*r, r.veracity()?))).collect()
}

fn fit(rows: &[&FeatureRow], cfg: &VerifierConfig, rng: &mut RngState) -> Result<VerifierParams> {
    let train: Vec<_> = labeled(rows).into_iter().map(|(r, v)| (r.features, v)).collect();
    Ok(train_verifier(&train, cfg, rng)?.0)
}

fn score_rows(event_id: u32, rows: &[&FeatureRow], params: &VerifierParams, rng: &mut RngState) -> Result<Scored> {
    let test = labeled(rows);
    let ours = test
        .iter()
        .map(|(r, _)| predict_verifier(&r.features, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(Scored {
        event_id,
        has_data: test.iter().any(|(r, _)| r.evidence > 0),
        random: random_baseline(test.len(), rng),
        ours,
        gold: test.iter().map(|(_, v)| *v).collect(),
        post_ids: test.iter().map(|(r, _)| r.post_id.clone()).collect(),
    })
}

fn rows_for<'a>(posts: &[&Post], by_id: &HashMap<&str, &'a FeatureRow>) -> Result<Vec<&'a FeatureRow>> {
    posts
        .iter()
        .map(|p| {
            by_id
                .get(p.post_id.as_str())
                .copied()
                .ok_or_else(|| Error::data(format!("no feature row for post {}", p.post_id)))
        })
        .collect()
}

fn run_event(cfg: &ExperimentConfig, posts: &[Post], by_id: &HashMap<&str, &FeatureRow>) -> Result<Vec<Scored>> {
    let master = RngState::new(cfg.seed);
    let folds = loeo_splits(posts)?;
    folds
        .par_iter()
        .enumerate()
        .map(|(k, fold)| {
            let test_ids: HashSet<&str> = fold.test.iter().map(|p| p.post_id.as_str()).collect();
            if fold
                .train
                .iter()
                .any(|p| p.event_id == fold.held_out || test_ids.contains(p.post_id.as_str()))
            {
                return Err(Error::Invariant(format!(
                    "fold for event {} trains on held-out posts",
                    fold.held_out
                )));
            }
            let fold_rng = master.derive(k as u64);
            let params = fit(&rows_for(&fold.train, by_id)?, &cfg.verifier_config, &mut fold_rng.derive(0))?;
            score_rows(fold.held_out, &rows_for(&fold.test, by_id)?, &params, &mut fold_rng.derive(1))
        })
        .collect()
}

fn run_task(cfg: &ExperimentConfig, posts: &[Post], by_id: &HashMap<&str, &FeatureRow>) -> Result<Vec<Scored>> {
    let master = RngState::new(cfg.seed);
    let (train, test) = task_split(posts)?;
    let params = fit(&rows_for(&train, by_id)?, &cfg.verifier_config, &mut master.derive(0))?;
    let mut by_event: BTreeMap<u32, Vec<&Post>> = BTreeMap::new();
    for p in test {
        by_event.entry(p.event_id).or_default().push(p);
    }
    by_event
        .into_iter()
        .map(|(e, ps)| score_rows(e, &rows_for(&ps, by_id)?, &params, &mut master.derive(1000 + e as u64)))
        .collect()
}

fn run_transfer(cfg: &ExperimentConfig, rows: &[FeatureRow]) -> Result<(Vec<Scored>, usize)> {
    let master = RngState::new(cfg.seed);
    let path = cfg.verifier.as_deref().unwrap_or(Path::new(""));
    let ck = Checkpoint::load(path)?;
    if ck.meta("source").ok() != Some(FeatureSource::Tfg.as_str()) {
        return Err(Error::Config(format!("{} was not trained on TFG features", path.display())));
    }
    let params = VerifierParams::from_checkpoint(&ck)?;
    let input: Vec<_> = rows.iter().map(|r| (r.features, r.label)).collect();
    let out = transfer_predict(&input, &params)?;
    let mut by_event: BTreeMap<u32, Scored> = BTreeMap::new();
    for (k, &i) in out.kept.iter().enumerate() {
        let r = &rows[i];
        let s = by_event.entry(r.event_id).or_insert_with(|| Scored {
            event_id: r.event_id,
            has_data: false,
            ours: vec![],
            random: vec![],
            gold: vec![],
            post_ids: vec![],
        });
        s.has_data |= r.evidence > 0;
        s.ours.push(out.verdicts[k]);
        s.gold.push(r.veracity().expect("others rows were filtered"));
        s.post_ids.push(r.post_id.clone());
    }
    let mut scored: Vec<Scored> = by_event.into_values().collect();
    for s in &mut scored {
        s.random = random_baseline(s.ours.len(), &mut master.derive(1000 + s.event_id as u64));
    }
    Ok((scored, out.filtered))
}

fn correctness(v: &[Verdict], gold: &[Veracity]) -> Vec<f64> {
    v.iter().zip(gold).map(|(v, g)| f64::from(u8::from(v.label == *g))).collect()
}

fn build_report(cfg: &ExperimentConfig, corpus: &Corpus, scored: &[Scored], filtered: usize) -> Result<Report> {
    let ours_name = match cfg.setting {
        Setting::Transfer => "Transfer".to_string(),
        _ => cfg.source.to_string(),
    };
    let baselines = cfg.show_baselines && cfg.setting == Setting::Event;
    let mut columns: Vec<String> = Vec::new();
    if baselines {
        columns.extend(BASELINE_NAMES.iter().map(|s| s.to_string()));
    }
    columns.push("Random".into());
    columns.push(ours_name);
    let by_event: HashMap<u32, &Scored> = scored.iter().map(|s| (s.event_id, s)).collect();
    let mut events: Vec<(u32, String)> = corpus.events.iter().map(|e| (e.id, e.name.clone())).collect();
    events.sort();
    if cfg.setting == Setting::Task {
        events.retain(|(id, _)| *id > crate::corpus::TASK_TRAIN_LAST_EVENT);
    }
    let mut rows = Vec::new();
    for (id, name) in events {
        let mut scores = Vec::new();
        if baselines {
            let b = BASELINE_F1.iter().find(|(e, _)| *e == id).map(|(_, v)| *v);
            scores.extend((0..3).map(|k| b.map(|v| v[k])));
        }
        match by_event.get(&id).filter(|s| s.has_data && !s.gold.is_empty()) {
            Some(s) => {
                scores.push(Some(f1_fake(&s.random, &s.gold)?));
                scores.push(Some(f1_fake(&s.ours, &s.gold)?));
            }
            None => scores.extend([None, None]),
        }
        rows.push(ReportRow { event_id: Some(id), name, scores });
    }

    let with_data: Vec<&Scored> = scored.iter().filter(|s| s.has_data && !s.gold.is_empty()).collect();
    let cat = |f: fn(&Scored) -> &Vec<Verdict>| -> Vec<Verdict> { with_data.iter().flat_map(|s| f(s).iter().copied()).collect() };
    let gold: Vec<Veracity> = with_data.iter().flat_map(|s| s.gold.iter().copied()).collect();
    let ours = cat(|s| &s.ours);
    let random = cat(|s| &s.random);
    let mut pooled = vec![None; columns.len()];
    let (mut p_value, mut p_value_events) = (None, None);
    if !gold.is_empty() {
        let n = columns.len();
        pooled[n - 2] = Some(f1_fake(&random, &gold)?);
        pooled[n - 1] = Some(f1_fake(&ours, &gold)?);
        let master = RngState::new(cfg.seed);
        p_value = Some(permutation_test(
            &correctness(&ours, &gold),
            &correctness(&random, &gold),
            cfg.iterations,
            &mut master.derive(9000),
        )?);
        let a: Vec<f64> = with_data.iter().map(|s| f1_fake(&s.ours, &s.gold)).collect::<Result<_>>()?;
        let b: Vec<f64> = with_data.iter().map(|s| f1_fake(&s.random, &s.gold)).collect::<Result<_>>()?;
        p_value_events = Some(permutation_test(&a, &b, cfg.iterations, &mut master.derive(9001))?);
    }
    Ok(Report {
        setting: cfg.setting,
        source: cfg.source,
        columns,
        rows,
        pooled,
        p_value,
        p_value_events,
        filtered_others: filtered,
    })
}

/// Runs one evaluation setting end to end and writes the feature table,
/// predictions, reports and manifest under `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let corpus = load_corpus(&cfg.corpus)?;
    let rows = load_features(cfg, &corpus)?;
    let by_id: HashMap<&str, &FeatureRow> = rows.iter().map(|r| (r.post_id.as_str(), r)).collect();
    let posts: Vec<Post> = corpus
        .posts_on(cfg.source.post_platform())
        .into_iter()
        .filter(|p| p.label.veracity().is_some())
        .cloned()
        .collect();
    let (scored, filtered) = match cfg.setting {
        Setting::Event => (run_event(cfg, &posts, &by_id)?, 0),
        Setting::Task => (run_task(cfg, &posts, &by_id)?, 0),
        Setting::Transfer => run_transfer(cfg, &rows)?,
    };
    let report = build_report(cfg, &corpus, &scored, filtered)?;
    let predictions: Vec<PredictionRow> = scored
        .iter()
        .flat_map(|s| {
            (0..s.ours.len()).map(move |i| PredictionRow {
                post_id: s.post_ids[i].clone(),
                event_id: s.event_id,
                verdict: s.ours[i],
                gold: s.gold[i],
            })
        })
        .collect();

    fs::create_dir_all(&cfg.out_dir)?;
    let features_name = format!("features_{}.tsv", cfg.source);
    write_feature_table(&cfg.out_dir.join(&features_name), &rows)?;
    write_predictions(&cfg.out_dir.join(PREDICTIONS_FILE), &predictions)?;
    fs::write(cfg.out_dir.join(REPORT_TSV), report.to_tsv())?;
    fs::write(cfg.out_dir.join(REPORT_TXT), report.to_text())?;
    fs::write(cfg.out_dir.join(SIGNIFICANCE_TSV), report.significance_tsv())?;
    let files = vec![
        features_name,
        PREDICTIONS_FILE.to_string(),
        REPORT_TSV.to_string(),
        REPORT_TXT.to_string(),
        SIGNIFICANCE_TSV.to_string(),
    ];
    write_manifest(&cfg.out_dir, &files, &cfg.canonical(), cfg.seed)?;
    Ok(ExperimentOutcome {
        report,
        rows,
        predictions,
        files,
    })
}
