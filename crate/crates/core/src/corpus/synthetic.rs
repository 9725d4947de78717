//! Desk-scale corpus where fake posts mostly reuse media from another event.
//! Evidence for such media mixes pages about the origin event with pages
//! debunking the claim, so it disagrees with itself; real posts get pages that
//! consistently restate their own event.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::stats::{write_stats, CCMR_EVENTS};
use super::{count_posts, save_corpus, Corpus, Event, EvidenceIndex, ExpectedCount, Label, Platform, Post, WebPage};
use crate::agreement::{write_stance, Stance, StancePair};
use crate::embedding::{CipherLexicon, Language};
use crate::error::{Error, Result};
use crate::features::Engine;
use crate::rng::RngState;

pub const PARALLEL_FILE: &str = "parallel.tsv";
pub const STANCE_FILE: &str = "stance.tsv";
pub const STATS_FILE: &str = "stats.tsv";

const MARKERS_PER_STANCE: usize = 6;
const FILLER_WORDS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub events: usize,
    pub posts_per_event: usize,
    pub fake_fraction: f64,
    pub borrowed_rate: f64,
    pub baidu_posts_per_event: usize,
    /// The last this-many events get no Baidu posts or pages.
    pub events_without_baidu: usize,
    pub media_per_event: usize,
    pub no_media_rate: f64,
    pub min_titles: usize,
    pub max_titles: usize,
    pub noise_rate: f64,
    pub debunk_share: f64,
    pub baidu_others_rate: f64,
    pub lexicon_size: usize,
    pub topic_words: usize,
    pub parallel_pairs: usize,
    pub stance_per_label: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            events: 10,
            posts_per_event: 100,
            fake_fraction: 0.5,
            borrowed_rate: 0.9,
            baidu_posts_per_event: 40,
            events_without_baidu: 2,
            media_per_event: 12,
            no_media_rate: 0.05,
            min_titles: 3,
            max_titles: 6,
            noise_rate: 0.1,
            debunk_share: 0.5,
            baidu_others_rate: 0.1,
            lexicon_size: 400,
            topic_words: 3,
            parallel_pairs: 2000,
            stance_per_label: 500,
        }
    }
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.events == 0 || self.events > CCMR_EVENTS.len() {
            return bad(format!("events must be in 1..=17, got {}", self.events));
        }
        for (name, v) in [
            ("fake_fraction", self.fake_fraction),
            ("borrowed_rate", self.borrowed_rate),
            ("no_media_rate", self.no_media_rate),
            ("noise_rate", self.noise_rate),
            ("debunk_share", self.debunk_share),
            ("baidu_others_rate", self.baidu_others_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if self.min_titles == 0 || self.min_titles > self.max_titles {
            return bad("need 1 <= min_titles <= max_titles".into());
        }
        if self.media_per_event == 0 || self.topic_words < 3 {
            return bad("media_per_event must be positive and topic_words at least 3".into());
        }
        if self.borrowed_rate > 0.0 && self.events < 2 {
            return bad("borrowed media needs at least 2 events".into());
        }
        let needed = 3 * MARKERS_PER_STANCE + FILLER_WORDS + self.events * self.topic_words;
        if self.lexicon_size < needed {
            return bad(format!("lexicon_size must be at least {needed}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticManifest {
    pub files: Vec<PathBuf>,
    pub twitter_posts: usize,
    pub baidu_posts: usize,
    pub evidence_pages: usize,
}

struct Words<'a> {
    lex: &'a CipherLexicon,
    markers: [Vec<usize>; 3],
    filler: Vec<usize>,
    topics: Vec<Vec<usize>>,
}

impl<'a> Words<'a> {
    fn new(lex: &'a CipherLexicon, events: usize, topic_words: usize) -> Self {
        let mut next = 0;
        let mut take = |n: usize| {
            let v: Vec<usize> = (next..next + n).collect();
            next += n;
            v
        };
        let markers = [
            take(MARKERS_PER_STANCE),
            take(MARKERS_PER_STANCE),
            take(MARKERS_PER_STANCE),
        ];
        let filler = take(FILLER_WORDS);
        let topics = (0..events).map(|_| take(topic_words)).collect();
        Self {
            lex,
            markers,
            filler,
            topics,
        }
    }

    fn pick(&self, pool: &[usize], n: usize, rng: &mut RngState, out: &mut Vec<usize>) {
        for _ in 0..n {
            out.push(*rng.choose(pool));
        }
    }

    fn render(&self, mut ids: Vec<usize>, rng: &mut RngState) -> String {
        rng.shuffle(&mut ids);
        ids.iter()
            .map(|&i| self.lex.words()[i].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn rumor(&self, event: usize, rng: &mut RngState) -> String {
        let mut ids = Vec::new();
        self.pick(&self.topics[event], 3, rng, &mut ids);
        self.pick(&self.filler, 2, rng, &mut ids);
        self.render(ids, rng)
    }

    /// Agree, disagree or discuss marker plus topic words of `event`.
    fn title(&self, event: usize, stance: Stance, rng: &mut RngState) -> String {
        let mut ids = Vec::new();
        self.pick(&self.topics[event], 3, rng, &mut ids);
        self.pick(&self.markers[stance.index().min(2)], 1, rng, &mut ids);
        self.pick(&self.filler, 1, rng, &mut ids);
        self.render(ids, rng)
    }

    fn noise(&self, rng: &mut RngState) -> String {
        let mut ids = Vec::new();
        self.pick(&self.filler, 5, rng, &mut ids);
        self.render(ids, rng)
    }
}

struct Media {
    id: String,
    google: Vec<String>,
    baidu: Vec<String>,
}

fn own_media(w: &Words, event: usize, k: usize, cfg: &SyntheticConfig, with_baidu: bool, rng: &mut RngState) -> Media {
    let titles = |lo: usize, hi: usize, rng: &mut RngState| -> Vec<String> {
        let n = lo + rng.below(hi - lo + 1);
        (0..n)
            .map(|_| {
                if rng.bernoulli(cfg.noise_rate) {
                    w.noise(rng)
                } else if rng.bernoulli(0.6) {
                    w.title(event, Stance::Agree, rng)
                } else {
                    w.title(event, Stance::Discuss, rng)
                }
            })
            .collect()
    };
    let google = titles(cfg.min_titles, cfg.max_titles, rng);
    let baidu = if with_baidu {
        titles(1, cfg.max_titles.div_ceil(2).max(1), rng)
            .iter()
            .map(|t| w.lex.encipher(t))
            .collect()
    } else {
        Vec::new()
    };
    Media {
        id: format!("e{:02}-m{k:02}", event + 1),
        google,
        baidu,
    }
}

fn borrowed_media(w: &Words, event: usize, k: usize, cfg: &SyntheticConfig, with_baidu: bool, rng: &mut RngState) -> Media {
    let mut origin = rng.below(cfg.events - 1);
    if origin >= event {
        origin += 1;
    }
    let titles = |lo: usize, hi: usize, rng: &mut RngState| -> Vec<String> {
        let n = lo + rng.below(hi - lo + 1);
        (0..n)
            .map(|i| {
                // first page always describes the origin event
                if i > 0 && rng.bernoulli(cfg.debunk_share) {
                    w.title(event, Stance::Disagree, rng)
                } else if rng.bernoulli(cfg.noise_rate) {
                    w.noise(rng)
                } else {
                    w.title(origin, Stance::Agree, rng)
                }
            })
            .collect()
    };
    let google = titles(cfg.min_titles.max(2), cfg.max_titles.max(2), rng);
    let baidu = if with_baidu {
        titles(1, cfg.max_titles.div_ceil(2).max(1), rng)
            .iter()
            .map(|t| w.lex.encipher(t))
            .collect()
    } else {
        Vec::new()
    };
    Media {
        id: format!("e{:02}-b{k:02}-from{:02}", event + 1, origin + 1),
        google,
        baidu,
    }
}

fn choose_media(
    label: Label,
    own: &[Media],
    borrowed: &[Media],
    cfg: &SyntheticConfig,
    rng: &mut RngState,
) -> Vec<String> {
    if rng.bernoulli(cfg.no_media_rate) {
        return Vec::new();
    }
    if label == Label::Fake && !borrowed.is_empty() && rng.bernoulli(cfg.borrowed_rate) {
        return vec![rng.choose(borrowed).id.clone()];
    }
    let n = 1 + rng.below(2);
    let mut ids: Vec<String> = (0..n).map(|_| rng.choose(own).id.clone()).collect();
    ids.dedup();
    ids
}

/// Writes the corpus files plus a parallel corpus, stance data and a stats
/// table into `dir`. The same seed always gives the same bytes.
pub fn generate_synthetic_corpus(
    dir: &Path,
    cfg: &SyntheticConfig,
    rng: &RngState,
) -> Result<SyntheticManifest> {
    cfg.validate()?;
    let lex = CipherLexicon::generate(cfg.lexicon_size, &mut rng.derive(0));
    let w = Words::new(&lex, cfg.events, cfg.topic_words);
    let mut corpus = Corpus {
        events: CCMR_EVENTS[..cfg.events]
            .iter()
            .map(|&(id, name)| Event {
                id,
                name: name.to_string(),
            })
            .collect(),
        ..Default::default()
    };
    let mut index = EvidenceIndex::new();
    let mut twitter = Vec::new();
    let mut baidu = Vec::new();
    for e in 0..cfg.events {
        let mut r = rng.derive(100 + e as u64);
        let event_id = e as u32 + 1;
        let with_baidu = e + cfg.events_without_baidu < cfg.events;
        let own: Vec<Media> = (0..cfg.media_per_event)
            .map(|k| own_media(&w, e, k, cfg, with_baidu, &mut r))
            .collect();
        let borrowed: Vec<Media> = if cfg.borrowed_rate > 0.0 {
            (0..cfg.media_per_event.div_ceil(2))
                .map(|k| borrowed_media(&w, e, k, cfg, with_baidu, &mut r))
                .collect()
        } else {
            Vec::new()
        };
        for (m, media) in own.iter().chain(&borrowed).enumerate() {
            for (i, t) in media.google.iter().enumerate() {
                index.insert(&media.id, Engine::Google, WebPage {
                    title: t.clone(),
                    url: format!("https://google.example/e{event_id:02}/{m}/{i}"),
                    label: None,
                });
            }
            for (i, t) in media.baidu.iter().enumerate() {
                index.insert(&media.id, Engine::Baidu, WebPage {
                    title: t.clone(),
                    url: format!("https://baidu.example/e{event_id:02}/{m}/{i}"),
                    label: None,
                });
            }
        }
        for i in 0..cfg.posts_per_event {
            let label = if r.bernoulli(cfg.fake_fraction) { Label::Fake } else { Label::Real };
            twitter.push(Post {
                post_id: format!("tw-{event_id:02}-{i:04}"),
                event_id,
                platform: Platform::Twitter,
                language: Language::En,
                text: w.rumor(e, &mut r),
                media_ids: choose_media(label, &own, &borrowed, cfg, &mut r),
                label,
            });
        }
        if with_baidu {
            for i in 0..cfg.baidu_posts_per_event {
                let label = if r.bernoulli(cfg.baidu_others_rate) {
                    Label::Others
                } else if r.bernoulli(cfg.fake_fraction) {
                    Label::Fake
                } else {
                    Label::Real
                };
                let text = if label == Label::Others { w.noise(&mut r) } else { w.rumor(e, &mut r) };
                baidu.push(Post {
                    post_id: format!("https://baidu.example/post/e{event_id:02}/{i:04}"),
                    event_id,
                    platform: Platform::Baidu,
                    language: Language::Zh,
                    text: lex.encipher(&text),
                    media_ids: choose_media(label, &own, &borrowed, cfg, &mut r),
                    label,
                });
            }
        }
    }
    let manifest = SyntheticManifest {
        files: [
            super::EVENTS_FILE,
            super::POSTS_FILE,
            super::EVIDENCE_FILE,
            STATS_FILE,
            PARALLEL_FILE,
            STANCE_FILE,
        ]
        .iter()
        .map(|f| dir.join(f))
        .collect(),
        twitter_posts: twitter.len(),
        baidu_posts: baidu.len(),
        evidence_pages: index.len(),
    };
    corpus.posts = twitter;
    corpus.posts.extend(baidu);
    corpus.evidence = index;
    save_corpus(dir, &corpus)?;

    let stats: Vec<ExpectedCount> = count_posts(&corpus)
        .into_iter()
        .map(|((event_id, platform, label), count)| ExpectedCount {
            event_id,
            platform,
            label,
            count,
        })
        .collect();
    write_stats(&dir.join(STATS_FILE), &stats)?;

    let mut pr = rng.derive(2);
    let mut out = std::io::BufWriter::new(fs::File::create(dir.join(PARALLEL_FILE))?);
    for _ in 0..cfg.parallel_pairs {
        let s = lex.sentence(5, 9, &mut pr);
        writeln!(out, "{}\t{}", s, lex.encipher(&s))?;
    }
    out.flush()?;

    write_stance(&dir.join(STANCE_FILE), &stance_pairs(&w, cfg, &mut rng.derive(3)))?;
    Ok(manifest)
}

fn stance_pairs(w: &Words, cfg: &SyntheticConfig, rng: &mut RngState) -> Vec<StancePair> {
    let mut out = Vec::new();
    for _ in 0..cfg.stance_per_label {
        for label in Stance::ALL {
            let e = rng.below(cfg.events);
            let body = match label {
                Stance::Unrelated if cfg.events > 1 && !rng.bernoulli(0.2) => {
                    let mut other = rng.below(cfg.events - 1);
                    if other >= e {
                        other += 1;
                    }
                    let s = if rng.bernoulli(0.5) { Stance::Agree } else { Stance::Discuss };
                    w.title(other, s, rng)
                }
                Stance::Unrelated => w.noise(rng),
                s => w.title(e, s, rng),
            };
            out.push(StancePair {
                headline: w.rumor(e, rng),
                body,
                label,
            });
        }
    }
    out
}

/// Source event of every borrowed media id, keyed by media id.
pub fn borrowed_origins(index: &EvidenceIndex) -> BTreeMap<String, u32> {
    index
        .iter()
        .filter_map(|(m, _, _)| {
            let (_, origin) = m.split_once("-from")?;
            Some((m.to_string(), origin.parse().ok()?))
        })
        .collect()
}
