//! `manifest.tsv`: digest of every output file plus the seed and settings
//! that produced them.

use std::fs;
use std::path::Path;

use crate::checkpoint::digest_bytes;
use crate::error::Result;

pub const MANIFEST_FILE: &str = "manifest.tsv";

/// `files` are names relative to `out_dir`; they are listed sorted.
pub fn write_manifest(out_dir: &Path, files: &[String], config: &str, seed: u64) -> Result<()> {
    let mut names = files.to_vec();
    names.sort();
    names.dedup();
    let mut text = format!("seed\t{seed}\n");
    for line in config.lines() {
        text.push_str(&format!("config\t{line}\n"));
    }
    for name in &names {
        let bytes = fs::read(out_dir.join(name))?;
        text.push_str(&format!("file\t{name}\t{}\n", digest_bytes(&bytes)));
    }
    fs::write(out_dir.join(MANIFEST_FILE), text)?;
    Ok(())
}

/// `(name, digest)` pairs of a manifest.
pub fn read_manifest(out_dir: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(out_dir.join(MANIFEST_FILE))?;
    Ok(text
        .lines()
        .filter_map(|l| {
            let mut parts = l.split('\t');
            (parts.next() == Some("file")).then(|| {
                let name = parts.next().unwrap_or_default().to_string();
                (name, parts.next().unwrap_or_default().to_string())
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_sorted_digests() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.txt"), "abc").unwrap();
        fs::write(dir.path().join("a.txt"), "").unwrap();
        write_manifest(dir.path(), &["b.txt".into(), "a.txt".into()], "k=v", 9).unwrap();
        let m = read_manifest(dir.path()).unwrap();
        assert_eq!(m[0].0, "a.txt");
        assert_eq!(m[1].1, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        let text = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        assert!(text.starts_with("seed\t9\nconfig\tk=v\n"));
    }
}
