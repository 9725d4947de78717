//! Posts, events and the media-keyed evidence index, stored as
//! newline-delimited JSON. See the README for the field-by-field layout.

mod evidence;
mod split;
mod stats;
mod synthetic;

pub use evidence::{build_evidence, FeatureSource};
pub use split::{loeo_splits, task_split, Fold, TASK_TRAIN_LAST_EVENT};
pub use stats::{
    count_posts, load_stats, published_stats, validate_against_stats, write_stats, ExpectedCount,
    Mismatch, CCMR_EVENTS,
};
pub use synthetic::{
    borrowed_origins, generate_synthetic_corpus, SyntheticConfig, SyntheticManifest, PARALLEL_FILE,
    STANCE_FILE, STATS_FILE,
};

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embedding::Language;
use crate::error::{Error, Offender, Result};
use crate::features::Engine;
use crate::verifier::Veracity;

pub const EVENTS_FILE: &str = "events.jsonl";
pub const POSTS_FILE: &str = "posts.jsonl";
pub const EVIDENCE_FILE: &str = "evidence.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    Twitter,
    Google,
    Baidu,
}

impl Platform {
    pub const ALL: [Platform; 3] = [Platform::Twitter, Platform::Google, Platform::Baidu];

    pub fn as_str(self) -> &'static str {
        match self {
            Platform::Twitter => "twitter",
            Platform::Google => "google",
            Platform::Baidu => "baidu",
        }
    }
}

impl std::str::FromStr for Platform {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Platform::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::data(format!("unknown platform `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real,
    Fake,
    Others,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Real, Label::Fake, Label::Others];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Real => "real",
            Label::Fake => "fake",
            Label::Others => "others",
        }
    }

    /// `None` for "others".
    pub fn veracity(self) -> Option<Veracity> {
        match self {
            Label::Real => Some(Veracity::Real),
            Label::Fake => Some(Veracity::Fake),
            Label::Others => None,
        }
    }
}

impl std::str::FromStr for Label {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Label::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::data(format!("unknown label `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub id: u32,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub post_id: String,
    pub event_id: u32,
    pub platform: Platform,
    pub language: Language,
    pub text: String,
    #[serde(default)]
    pub media_ids: Vec<String>,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WebPage {
    pub title: String,
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

#[derive(Serialize, Deserialize)]
struct EvidenceRecord {
    media_id: String,
    engine: Engine,
    #[serde(flatten)]
    page: WebPage,
}

/// Webpages found by searching one media item on one engine.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvidenceIndex {
    table: BTreeMap<(String, Engine), Vec<WebPage>>,
}

impl EvidenceIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, media_id: impl Into<String>, engine: Engine, page: WebPage) {
        self.table
            .entry((media_id.into(), engine))
            .or_default()
            .push(page);
    }

    /// Unknown keys give an empty slice.
    pub fn lookup(&self, media_id: &str, engine: Engine) -> &[WebPage] {
        self.table
            .get(&(media_id.to_string(), engine))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.table.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Engine, &WebPage)> {
        self.table
            .iter()
            .flat_map(|((m, e), pages)| pages.iter().map(move |p| (m.as_str(), *e, p)))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub events: Vec<Event>,
    pub posts: Vec<Post>,
    pub evidence: EvidenceIndex,
    pub warnings: Vec<String>,
}

impl Corpus {
    pub fn event_name(&self, id: u32) -> Option<&str> {
        self.events
            .iter()
            .find(|e| e.id == id)
            .map(|e| e.name.as_str())
    }

    pub fn posts_on(&self, platform: Platform) -> Vec<&Post> {
        self.posts.iter().filter(|p| p.platform == platform).collect()
    }
}

fn read_jsonl<T: serde::de::DeserializeOwned>(
    path: &Path,
    offenders: &mut Vec<Offender>,
    warnings: &mut Vec<String>,
) -> Result<Vec<(usize, T)>> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => {
            Error::Config(format!("missing corpus file {}", path.display()))
        }
        _ => Error::Io(e),
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => out.push((i + 1, v)),
            Err(e) => offenders.push(Offender {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            }),
        }
    }
    if out.is_empty() && offenders.is_empty() {
        warnings.push(format!("{} holds no records", path.display()));
    }
    Ok(out)
}

/// Reads `events.jsonl`, `posts.jsonl` and `evidence.jsonl` from `dir`.
/// Every malformed or inconsistent row is reported, not just the first.
pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    let mut offenders = Vec::new();
    let mut warnings = Vec::new();
    let events_path = dir.join(EVENTS_FILE);
    let posts_path = dir.join(POSTS_FILE);
    let evidence_path = dir.join(EVIDENCE_FILE);
    let events: Vec<(usize, Event)> = read_jsonl(&events_path, &mut offenders, &mut warnings)?;
    let posts: Vec<(usize, Post)> = read_jsonl(&posts_path, &mut offenders, &mut warnings)?;
    let records: Vec<(usize, EvidenceRecord)> =
        read_jsonl(&evidence_path, &mut offenders, &mut warnings)?;

    let mut bad = |path: &PathBuf, line: usize, message: String| {
        offenders.push(Offender {
            path: path.clone(),
            line,
            message,
        })
    };
    let mut event_ids = BTreeSet::new();
    for (line, e) in &events {
        if !(1..=17).contains(&e.id) {
            bad(&events_path, *line, format!("event id {} outside 1..17", e.id));
        } else if !event_ids.insert(e.id) {
            bad(&events_path, *line, format!("duplicate event id {}", e.id));
        }
    }
    let mut post_ids = HashSet::new();
    for (line, p) in &posts {
        if !event_ids.contains(&p.event_id) {
            bad(&posts_path, *line, format!("post {} references unknown event {}", p.post_id, p.event_id));
        }
        if p.platform == Platform::Twitter && p.label == Label::Others {
            bad(&posts_path, *line, format!("twitter post {} labeled others", p.post_id));
        }
        if !post_ids.insert((p.platform, p.post_id.clone())) {
            bad(&posts_path, *line, format!("duplicate {} post id {}", p.platform.as_str(), p.post_id));
        }
    }
    if !offenders.is_empty() {
        return Err(Error::Load(offenders));
    }
    let mut evidence = EvidenceIndex::new();
    for (_, r) in records {
        evidence.insert(r.media_id, r.engine, r.page);
    }
    Ok(Corpus {
        events: events.into_iter().map(|(_, e)| e).collect(),
        posts: posts.into_iter().map(|(_, p)| p).collect(),
        evidence,
        warnings,
    })
}

fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut out, &r).map_err(|e| Error::Data(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_corpus(dir: &Path, corpus: &Corpus) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_jsonl(&dir.join(EVENTS_FILE), &corpus.events)?;
    write_jsonl(&dir.join(POSTS_FILE), &corpus.posts)?;
    write_jsonl(
        &dir.join(EVIDENCE_FILE),
        corpus.evidence.iter().map(|(m, e, p)| EvidenceRecord {
            media_id: m.to_string(),
            engine: e,
            page: p.clone(),
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn post(id: &str, event: u32, platform: Platform, label: Label, media: &[&str]) -> Post {
        Post {
            post_id: id.to_string(),
            event_id: event,
            platform,
            language: if platform == Platform::Baidu { Language::Zh } else { Language::En },
            text: format!("text of {id}"),
            media_ids: media.iter().map(|m| m.to_string()).collect(),
            label,
        }
    }

    fn sample() -> Corpus {
        let mut evidence = EvidenceIndex::new();
        evidence.insert("m1", Engine::Google, WebPage { title: "storm hits coast".into(), url: "g/1".into(), label: Some(Label::Real) });
        evidence.insert("m1", Engine::Baidu, WebPage { title: "风暴".into(), url: "b/1".into(), label: None });
        Corpus {
            events: vec![Event { id: 1, name: "Hurricane Sandy".into() }, Event { id: 2, name: "Boston Marathon bombing".into() }],
            posts: vec![
                post("t1", 1, Platform::Twitter, Label::Real, &["m1"]),
                post("t2", 2, Platform::Twitter, Label::Fake, &[]),
                post("b/1", 1, Platform::Baidu, Label::Others, &["m1"]),
            ],
            evidence,
            warnings: vec![],
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = sample();
        save_corpus(dir.path(), &c).unwrap();
        let back = load_corpus(dir.path()).unwrap();
        assert_eq!(back, c);
        save_corpus(dir.path(), &back).unwrap();
        assert_eq!(load_corpus(dir.path()).unwrap(), c);
    }

    #[test]
    fn unknown_label_reported_with_line() {
        let dir = tempfile::tempdir().unwrap();
        save_corpus(dir.path(), &sample()).unwrap();
        let posts = fs::read_to_string(dir.path().join(POSTS_FILE)).unwrap();
        let broken = posts.replacen("\"fake\"", "\"unknown\"", 1);
        fs::write(dir.path().join(POSTS_FILE), broken).unwrap();
        match load_corpus(dir.path()) {
            Err(Error::Load(offenders)) => {
                assert_eq!(offenders.len(), 1);
                assert_eq!(offenders[0].line, 2);
                assert!(offenders[0].message.contains("unknown"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn collects_all_offenders() {
        let mut c = sample();
        c.posts.push(post("t3", 9, Platform::Twitter, Label::Others, &[]));
        c.posts.push(post("t1", 1, Platform::Twitter, Label::Real, &[]));
        let dir = tempfile::tempdir().unwrap();
        save_corpus(dir.path(), &c).unwrap();
        let text = fs::read_to_string(dir.path().join(POSTS_FILE)).unwrap();
        fs::write(dir.path().join(POSTS_FILE), text.replace("\"twitter\",\"language\":\"en\",\"text\":\"text of t1\",\"media_ids\":[],", "\"tiktok\",\"language\":\"en\",\"text\":\"x\",\"media_ids\":[],")).unwrap();
        let Err(Error::Load(offenders)) = load_corpus(dir.path()) else { panic!() };
        let lines: Vec<usize> = offenders.iter().map(|o| o.line).collect();
        assert_eq!(lines, vec![5, 4, 4]);
    }

    #[test]
    fn empty_files_give_empty_corpus_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        for f in [EVENTS_FILE, POSTS_FILE, EVIDENCE_FILE] {
            fs::write(dir.path().join(f), "").unwrap();
        }
        let c = load_corpus(dir.path()).unwrap();
        assert!(c.posts.is_empty() && c.events.is_empty() && c.evidence.is_empty());
        assert_eq!(c.warnings.len(), 3);
    }

    #[test]
    fn missing_file_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_corpus(dir.path()), Err(Error::Config(_))));
    }

    #[test]
    fn index_lookup_never_fails() {
        let c = sample();
        assert!(c.evidence.lookup("nope", Engine::Google).is_empty());
        assert_eq!(c.evidence.lookup("m1", Engine::Google).len(), 1);
        assert_eq!(c.evidence.lookup("m1", Engine::Google), c.evidence.lookup("m1", Engine::Google));
    }
}
