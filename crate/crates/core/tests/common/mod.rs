#![allow(dead_code)]

use std::path::{Path, PathBuf};

use monoscribe::RefScore;

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("data")
}

/// Every reference melody, sorted by file name.
pub fn corpus() -> Vec<(String, RefScore)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(data_dir().join("corpus"))
        .expect("corpus directory")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            let score = RefScore::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            (name, score)
        })
        .collect()
}

pub fn corpus_score(name: &str) -> RefScore {
    RefScore::load(data_dir().join("corpus").join(format!("{name}.json"))).expect("corpus score")
}
