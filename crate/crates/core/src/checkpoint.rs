//! Self-describing text checkpoints.
//!
//! ```text
//! ccrv-checkpoint 1
//! kind verifier
//! seed 42
//! config-digest 3f2a…
//! meta source TFG
//! tensor layer0.weight 10 20
//! -1.2345678901234567e-1 …      (one line per row, 17 significant digits)
//! end
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::Matrix;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "ccrv-checkpoint";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub seed: u64,
    pub config_digest: String,
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<(String, Matrix)>,
}

/// Hex SHA-256 of `text`.
pub fn digest(text: &str) -> String {
    digest_bytes(text.as_bytes())
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Checkpoint {
    pub fn new(kind: &str, seed: u64, config_digest: String) -> Self {
        Self {
            kind: kind.to_string(),
            seed,
            config_digest,
            meta: BTreeMap::new(),
            tensors: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn push(&mut self, name: impl Into<String>, m: &Matrix) {
        self.tensors.push((name.into(), m.clone()));
    }

    pub fn tensor(&self, name: &str) -> Result<&Matrix> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::data(format!("checkpoint has no tensor `{name}`")))
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::data(format!("checkpoint has no meta key `{key}`")))
    }

    pub fn meta_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.meta(key)?
            .parse()
            .map_err(|_| Error::data(format!("checkpoint meta `{key}` is malformed")))
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::data(format!(
                "expected a {kind} checkpoint, found {}",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC} {FORMAT_VERSION}");
        let _ = writeln!(s, "kind {}", self.kind);
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(s, "config-digest {}", self.config_digest);
        for (k, v) in &self.meta {
            let _ = writeln!(s, "meta {k} {v}");
        }
        for (name, m) in &self.tensors {
            let _ = writeln!(s, "tensor {name} {} {}", m.rows(), m.cols());
            for r in 0..m.rows() {
                let row: Vec<String> = m.row(r).iter().map(|v| format!("{v:.16e}")).collect();
                let _ = writeln!(s, "{}", row.join(" "));
            }
        }
        s.push_str("end\n");
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (ln, header) = lines.next().ok_or_else(|| err(1, "empty checkpoint".into()))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(MAGIC) {
            return Err(err(ln, "not a ccrv checkpoint".into()));
        }
        let version: u32 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| err(ln, "missing format version".into()))?;
        if version != FORMAT_VERSION {
            return Err(err(ln, format!("unsupported format version {version}")));
        }

        let mut ck = Checkpoint::new("", 0, String::new());
        let mut ended = false;
        while let Some((ln, line)) = lines.next() {
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            match key {
                "kind" => ck.kind = rest.to_string(),
                "seed" => {
                    ck.seed = rest
                        .parse()
                        .map_err(|_| err(ln, format!("bad seed `{rest}`")))?
                }
                "config-digest" => ck.config_digest = rest.to_string(),
                "meta" => {
                    let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                    ck.meta.insert(k.to_string(), v.to_string());
                }
                "tensor" => {
                    let f: Vec<&str> = rest.split_whitespace().collect();
                    if f.len() != 3 {
                        return Err(err(ln, "tensor header needs name rows cols".into()));
                    }
                    let rows: usize = f[1].parse().map_err(|_| err(ln, "bad rows".into()))?;
                    let cols: usize = f[2].parse().map_err(|_| err(ln, "bad cols".into()))?;
                    let mut data = Vec::with_capacity(rows * cols);
                    for _ in 0..rows {
                        let (rl, row) = lines
                            .next()
                            .ok_or_else(|| err(ln, format!("tensor {} truncated", f[0])))?;
                        let before = data.len();
                        for tok in row.split_whitespace() {
                            data.push(
                                tok.parse::<f64>()
                                    .map_err(|_| err(rl, format!("bad value `{tok}`")))?,
                            );
                        }
                        if data.len() - before != cols {
                            return Err(err(rl, format!("expected {cols} values")));
                        }
                    }
                    ck.tensors
                        .push((f[0].to_string(), Matrix::from_vec(rows, cols, data)?));
                }
                "end" => {
                    ended = true;
                    break;
                }
                "" => {}
                other => return Err(err(ln, format!("unknown record `{other}`"))),
            }
        }
        if !ended {
            return Err(err(text.lines().count(), "missing `end`".into()));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read checkpoint {}: {e}", path.display()))
        })?;
        Self::parse(&text, path)
    }
}

#[cfg(test)]
pub(crate) fn no_path() -> std::path::PathBuf {
    std::path::PathBuf::from("<memory>")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RngState;
    use proptest::prelude::*;

    #[test]
    fn rejects_foreign_files() {
        assert!(Checkpoint::parse("hello\n", &no_path()).is_err());
        assert!(Checkpoint::parse("ccrv-checkpoint 9\nend\n", &no_path()).is_err());
        assert!(Checkpoint::parse("ccrv-checkpoint 1\nkind x\n", &no_path()).is_err());
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            digest("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    proptest! {
        #[test]
        fn write_then_reload_is_exact(seed in any::<u64>(), rows in 1usize..5, cols in 1usize..5) {
            let mut rng = RngState::new(seed);
            let mut m = Matrix::zeros(rows, cols);
            for v in m.data_mut() {
                *v = rng.normal() * 10f64.powi(rng.below(40) as i32 - 20);
            }
            let mut ck = Checkpoint::new("test", seed, digest("cfg")).with_meta("note", "two words");
            ck.push("w", &m);
            let back = Checkpoint::parse(&ck.to_text(), &no_path()).unwrap();
            prop_assert_eq!(back, ck);
        }
    }
}
