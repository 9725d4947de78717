use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EvidenceIndex, Platform, Post};
use crate::error::{Error, Result};
use crate::features::{Engine, EvidenceItem, EvidenceSet};

/// Which posts are verified against which engine's pages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureSource {
    #[serde(rename = "TFG")]
    Tfg,
    #[serde(rename = "TFB")]
    Tfb,
    #[serde(rename = "BFG")]
    Bfg,
    #[serde(rename = "COMBO")]
    Combo,
}

impl FeatureSource {
    pub const ALL: [FeatureSource; 4] = [
        FeatureSource::Tfg,
        FeatureSource::Tfb,
        FeatureSource::Bfg,
        FeatureSource::Combo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSource::Tfg => "TFG",
            FeatureSource::Tfb => "TFB",
            FeatureSource::Bfg => "BFG",
            FeatureSource::Combo => "COMBO",
        }
    }

    pub fn post_platform(self) -> Platform {
        match self {
            FeatureSource::Bfg => Platform::Baidu,
            _ => Platform::Twitter,
        }
    }

    pub fn engines(self) -> &'static [Engine] {
        match self {
            FeatureSource::Tfg | FeatureSource::Bfg => &[Engine::Google],
            FeatureSource::Tfb => &[Engine::Baidu],
            FeatureSource::Combo => &[Engine::Google, Engine::Baidu],
        }
    }
}

impl std::fmt::Display for FeatureSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FeatureSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FeatureSource::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown feature source `{s}`")))
    }
}

/// Union of the pages found for every media id of `post`, one item per
/// distinct title, sorted by title. A page whose url is the post's own id is
/// skipped.
pub fn build_evidence(post: &Post, source: FeatureSource, index: &EvidenceIndex) -> Result<EvidenceSet> {
    if post.platform != source.post_platform() {
        return Err(Error::arg(format!(
            "{source} expects {} posts, {} is a {} post",
            source.post_platform().as_str(),
            post.post_id,
            post.platform.as_str()
        )));
    }
    let mut by_title: BTreeMap<&str, EvidenceItem> = BTreeMap::new();
    for media in &post.media_ids {
        for &engine in source.engines() {
            for page in index.lookup(media, engine) {
                if page.url == post.post_id {
                    continue;
                }
                by_title.entry(&page.title).or_insert_with(|| EvidenceItem {
                    title: page.title.clone(),
                    engine,
                    media_id: media.clone(),
                });
            }
        }
    }
    Ok(EvidenceSet {
        rumor: post.text.clone(),
        items: by_title.into_values().collect(),
    })
}
