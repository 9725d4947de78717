use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Corpus, Label, Platform};
use crate::error::{Error, Result};

/// The 17 CCMR events by id.
pub const CCMR_EVENTS: [(u32, &str); 17] = [
    (1, "Hurricane Sandy"),
    (2, "Boston Marathon bombing"),
    (3, "Sochi Olympics"),
    (4, "MH flight 370"),
    (5, "Bring Back Our Girls"),
    (6, "Columbian Chemicals"),
    (7, "Passport hoax"),
    (8, "Rock Elephant"),
    (9, "Underwater bedroom"),
    (10, "Livr mobile app"),
    (11, "Pig fish"),
    (12, "Solar Eclipse"),
    (13, "Girl with Samurai boots"),
    (14, "Nepal Earthquake"),
    (15, "Garissa Attack"),
    (16, "Syrian boy"),
    (17, "Varoufakis and zdf"),
];

// twitter real/fake, google real/fake/others, baidu real/fake/others
const CCMR_COUNTS: [[u64; 8]; 17] = [
    [4664, 5558, 1836, 165, 203, 693, 134, 291],
    [344, 189, 619, 54, 49, 317, 55, 16],
    [0, 274, 139, 132, 76, 64, 124, 53],
    [0, 310, 143, 65, 115, 80, 59, 31],
    [0, 131, 29, 42, 37, 2, 6, 4],
    [0, 185, 35, 2, 26, 19, 1, 0],
    [0, 44, 24, 0, 2, 16, 0, 4],
    [0, 13, 3, 17, 0, 4, 2, 14],
    [0, 113, 1, 58, 0, 0, 37, 13],
    [0, 9, 0, 4, 11, 0, 0, 0],
    [0, 14, 3, 13, 4, 1, 12, 7],
    [140, 137, 40, 64, 39, 0, 10, 91],
    [0, 218, 2, 52, 6, 2, 48, 0],
    [1004, 356, 257, 60, 107, 159, 19, 81],
    [73, 6, 60, 0, 3, 36, 1, 0],
    [0, 1786, 4, 1, 3, 0, 0, 0],
    [0, 61, 2, 0, 18, 0, 0, 0],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedCount {
    pub event_id: u32,
    pub platform: Platform,
    pub label: Label,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mismatch {
    pub event_id: u32,
    pub platform: Platform,
    pub label: Label,
    pub expected: u64,
    pub actual: u64,
}

impl std::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "event {} {} {}: expected {}, found {}",
            self.event_id,
            self.platform.as_str(),
            self.label.as_str(),
            self.expected,
            self.actual
        )
    }
}

/// Published per-event counts of the full dataset.
pub fn published_stats() -> Vec<ExpectedCount> {
    let columns = [
        (Platform::Twitter, Label::Real),
        (Platform::Twitter, Label::Fake),
        (Platform::Google, Label::Real),
        (Platform::Google, Label::Fake),
        (Platform::Google, Label::Others),
        (Platform::Baidu, Label::Real),
        (Platform::Baidu, Label::Fake),
        (Platform::Baidu, Label::Others),
    ];
    let mut out = Vec::new();
    for (i, row) in CCMR_COUNTS.iter().enumerate() {
        for ((platform, label), &count) in columns.iter().zip(row) {
            out.push(ExpectedCount {
                event_id: i as u32 + 1,
                platform: *platform,
                label: *label,
                count,
            });
        }
    }
    out
}

pub fn count_posts(corpus: &Corpus) -> BTreeMap<(u32, Platform, Label), u64> {
    let mut counts = BTreeMap::new();
    for p in &corpus.posts {
        *counts.entry((p.event_id, p.platform, p.label)).or_insert(0) += 1;
    }
    counts
}

/// Compares only the cells listed in `expected`.
pub fn validate_against_stats(corpus: &Corpus, expected: &[ExpectedCount]) -> Vec<Mismatch> {
    let counts = count_posts(corpus);
    expected
        .iter()
        .filter_map(|e| {
            let actual = counts
                .get(&(e.event_id, e.platform, e.label))
                .copied()
                .unwrap_or(0);
            (actual != e.count).then_some(Mismatch {
                event_id: e.event_id,
                platform: e.platform,
                label: e.label,
                expected: e.count,
                actual,
            })
        })
        .collect()
}

/// Tab-separated with header `event_id platform label count`.
pub fn load_stats(path: &Path) -> Result<Vec<ExpectedCount>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, row) in reader.deserialize().enumerate() {
        out.push(row.map_err(|e: csv::Error| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_stats(path: &Path, rows: &[ExpectedCount]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .from_path(path)
        .map_err(|e| Error::Data(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Data(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Event, Post};
    use crate::embedding::Language;

    fn total(platform: Platform, label: Label) -> u64 {
        published_stats()
            .iter()
            .filter(|e| e.platform == platform && e.label == label)
            .map(|e| e.count)
            .sum()
    }

    #[test]
    fn table_totals() {
        assert_eq!(total(Platform::Twitter, Label::Real), 6225);
        assert_eq!(total(Platform::Twitter, Label::Fake), 9404);
        assert_eq!(total(Platform::Google, Label::Real), 3197);
        assert_eq!(total(Platform::Google, Label::Fake), 729);
        assert_eq!(total(Platform::Google, Label::Others), 699);
        assert_eq!(total(Platform::Baidu, Label::Real), 1393);
        assert_eq!(total(Platform::Baidu, Label::Fake), 508);
        assert_eq!(total(Platform::Baidu, Label::Others), 605);
        assert_eq!(published_stats().len(), 17 * 8);
    }

    fn tiny() -> Corpus {
        let posts = (0..4)
            .map(|i| Post {
                post_id: format!("t{i}"),
                event_id: 1,
                platform: Platform::Twitter,
                language: Language::En,
                text: "x".into(),
                media_ids: vec![],
                label: if i % 2 == 0 { Label::Real } else { Label::Fake },
            })
            .collect();
        Corpus {
            events: vec![Event { id: 1, name: "a".into() }],
            posts,
            ..Default::default()
        }
    }

    #[test]
    fn one_removed_post_is_one_mismatch() {
        let mut c = tiny();
        let expected: Vec<ExpectedCount> = count_posts(&c)
            .into_iter()
            .map(|((event_id, platform, label), count)| ExpectedCount { event_id, platform, label, count })
            .collect();
        assert!(validate_against_stats(&c, &expected).is_empty());
        c.posts.pop();
        let report = validate_against_stats(&c, &expected);
        assert_eq!(report.len(), 1);
        assert_eq!((report[0].expected, report[0].actual), (2, 1));
        assert!(validate_against_stats(&c, &[]).is_empty());
    }

    #[test]
    fn stats_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("stats.tsv");
        write_stats(&p, &published_stats()).unwrap();
        assert_eq!(load_stats(&p).unwrap(), published_stats());
    }
}
