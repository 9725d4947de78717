//! Plain `key = value` settings files. Blank lines and `#` comments are
//! ignored; later assignments win. Every key can also be set from the
//! command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::agreement::AgreementConfig;
use crate::corpus::SyntheticConfig;
use crate::embedding::EmbeddingConfig;
use crate::error::{Error, Result};
use crate::verifier::VerifierConfig;

pub const KNOWN_KEYS: &[&str] = &[
    "corpus",
    "parallel",
    "stance",
    "stats",
    "encoder",
    "vocab",
    "agreement",
    "verifier",
    "features",
    "synthetic.events",
    "synthetic.posts_per_event",
    "synthetic.fake_fraction",
    "synthetic.borrowed_rate",
    "synthetic.baidu_posts_per_event",
    "synthetic.events_without_baidu",
    "synthetic.media_per_event",
    "synthetic.no_media_rate",
    "synthetic.min_titles",
    "synthetic.max_titles",
    "synthetic.noise_rate",
    "synthetic.debunk_share",
    "synthetic.baidu_others_rate",
    "synthetic.lexicon_size",
    "synthetic.topic_words",
    "synthetic.parallel_pairs",
    "synthetic.stance_per_label",
    "embedding.epochs",
    "embedding.batch_size",
    "embedding.margin",
    "embedding.lr",
    "embedding.d_emb",
    "embedding.d_hidden",
    "embedding.max_len",
    "embedding.min_count",
    "embedding.holdout",
    "agreement.epochs",
    "agreement.batch_size",
    "agreement.hidden",
    "agreement.dropout",
    "agreement.lr",
    "agreement.dev_per_label",
    "verifier.epochs",
    "verifier.hidden",
    "verifier.dropout",
    "verifier.lr",
    "eval.setting",
    "eval.source",
    "eval.iterations",
    "eval.show_baselines",
];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{origin}:{}: expected key = value", i + 1)))?;
            s.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("{origin}:{}: {e}", i + 1)))?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown setting `{key}`")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get_opt(key)?.unwrap_or(default))
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
            })
            .transpose()
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(PathBuf::from)
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        self.path(key)
            .ok_or_else(|| Error::Config(format!("`{key}` is required")))
    }

    /// Sorted `key=value` lines.
    pub fn canonical(&self) -> String {
        self.values
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn synthetic(&self) -> Result<SyntheticConfig> {
        let d = SyntheticConfig::default();
        Ok(SyntheticConfig {
            events: self.get("synthetic.events", d.events)?,
            posts_per_event: self.get("synthetic.posts_per_event", d.posts_per_event)?,
            fake_fraction: self.get("synthetic.fake_fraction", d.fake_fraction)?,
            borrowed_rate: self.get("synthetic.borrowed_rate", d.borrowed_rate)?,
            baidu_posts_per_event: self.get("synthetic.baidu_posts_per_event", d.baidu_posts_per_event)?,
            events_without_baidu: self.get("synthetic.events_without_baidu", d.events_without_baidu)?,
            media_per_event: self.get("synthetic.media_per_event", d.media_per_event)?,
            no_media_rate: self.get("synthetic.no_media_rate", d.no_media_rate)?,
            min_titles: self.get("synthetic.min_titles", d.min_titles)?,
            max_titles: self.get("synthetic.max_titles", d.max_titles)?,
            noise_rate: self.get("synthetic.noise_rate", d.noise_rate)?,
            debunk_share: self.get("synthetic.debunk_share", d.debunk_share)?,
            baidu_others_rate: self.get("synthetic.baidu_others_rate", d.baidu_others_rate)?,
            lexicon_size: self.get("synthetic.lexicon_size", d.lexicon_size)?,
            topic_words: self.get("synthetic.topic_words", d.topic_words)?,
            parallel_pairs: self.get("synthetic.parallel_pairs", d.parallel_pairs)?,
            stance_per_label: self.get("synthetic.stance_per_label", d.stance_per_label)?,
        })
    }

    pub fn embedding(&self) -> Result<EmbeddingConfig> {
        let d = EmbeddingConfig::default();
        Ok(EmbeddingConfig {
            epochs: self.get("embedding.epochs", d.epochs)?,
            batch_size: self.get("embedding.batch_size", d.batch_size)?,
            margin: self.get("embedding.margin", d.margin)?,
            adam: crate::nn::AdamConfig {
                lr: self.get("embedding.lr", d.adam.lr)?,
                ..d.adam
            },
            d_emb: self.get("embedding.d_emb", d.d_emb)?,
            d_hidden: self.get("embedding.d_hidden", d.d_hidden)?,
            max_len: self.get("embedding.max_len", d.max_len)?,
        })
    }

    pub fn agreement(&self) -> Result<AgreementConfig> {
        let d = AgreementConfig::default();
        Ok(AgreementConfig {
            epochs: self.get("agreement.epochs", d.epochs)?,
            batch_size: self.get("agreement.batch_size", d.batch_size)?,
            hidden: self.get("agreement.hidden", d.hidden)?,
            dropout: self.get("agreement.dropout", d.dropout)?,
            adam: crate::nn::AdamConfig {
                lr: self.get("agreement.lr", d.adam.lr)?,
                ..d.adam
            },
        })
    }

    pub fn verifier(&self) -> Result<VerifierConfig> {
        let d = VerifierConfig::default();
        Ok(VerifierConfig {
            epochs: self.get("verifier.epochs", d.epochs)?,
            hidden: self.get("verifier.hidden", d.hidden)?,
            dropout: self.get("verifier.dropout", d.dropout)?,
            adam: crate::nn::AdamConfig {
                lr: self.get("verifier.lr", d.adam.lr)?,
                ..d.adam
            },
        })
    }
}
