//! Loading bundles, ground truth and predictions from files or directories.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use avparse::formats::read_document;
use avparse::{load_bundle, load_ground_truth, GroundTruth, PredictionDoc, ScoreBundle};

use crate::error::{CliError, CliResult};

/// Files named directly, plus every `*.json` inside named directories
/// (sorted, non-recursive).
pub fn expand(paths: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for path in paths {
        if path.is_dir() {
            let entries = std::fs::read_dir(path)
                .map_err(|e| CliError::Invalid(format!("cannot list {}: {e}", path.display())))?;
            let mut files: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
                .collect();
            files.sort();
            out.extend(files);
        } else if path.is_file() {
            out.push(path.clone());
        } else {
            return Err(CliError::Invalid(format!("no such file or directory: {}", path.display())));
        }
    }
    Ok(out)
}

/// Loads every bundle it can; failures are returned alongside, one message per file.
pub fn load_bundles(paths: &[PathBuf]) -> CliResult<(Vec<ScoreBundle>, Vec<String>)> {
    let mut bundles = Vec::new();
    let mut errors = Vec::new();
    for path in expand(paths)? {
        match load_bundle(&path) {
            Ok(b) => bundles.push(b),
            Err(e) => errors.push(format!("{}: {e}", path.display())),
        }
    }
    Ok((bundles, errors))
}

fn keyed<T>(paths: &[PathBuf], what: &str, load: impl Fn(&Path) -> avparse::Result<T>, id: impl Fn(&T) -> &str) -> CliResult<BTreeMap<String, T>> {
    let mut out = BTreeMap::new();
    for path in expand(paths)? {
        let item = load(&path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        let key = id(&item).to_owned();
        if out.insert(key.clone(), item).is_some() {
            return Err(CliError::Invalid(format!("duplicate {what} for video {key:?}")));
        }
    }
    Ok(out)
}

pub fn load_ground_truths(paths: &[PathBuf]) -> CliResult<BTreeMap<String, GroundTruth>> {
    keyed(paths, "ground truth", load_ground_truth, |g| g.video_id())
}

pub fn load_predictions(paths: &[PathBuf]) -> CliResult<BTreeMap<String, PredictionDoc>> {
    keyed(paths, "prediction", read_document::<PredictionDoc>, |p| p.video_id.as_str())
}

/// Joins two id-keyed collections, failing with every unmatched id.
pub fn pair<A, B>(left: BTreeMap<String, A>, mut right: BTreeMap<String, B>, names: [&str; 2]) -> CliResult<Vec<(A, B)>> {
    let missing_right: Vec<&String> = left.keys().filter(|k| !right.contains_key(*k)).collect();
    let missing_left: Vec<&String> = right.keys().filter(|k| !left.contains_key(*k)).collect();
    if !missing_right.is_empty() || !missing_left.is_empty() {
        let mut msg = String::from("video ids do not align");
        if !missing_right.is_empty() {
            msg += &format!("; no {} for {missing_right:?}", names[1]);
        }
        if !missing_left.is_empty() {
            msg += &format!("; no {} for {missing_left:?}", names[0]);
        }
        return Err(CliError::Invalid(msg));
    }
    Ok(left
        .into_iter()
        .map(|(k, a)| {
            let b = right.remove(&k).expect("checked above");
            (a, b)
        })
        .collect())
}

/// Bundles and their ground truth, in video id order. Any unreadable file is an error.
pub fn labelled_corpus(bundles: &[PathBuf], gt: &[PathBuf]) -> CliResult<Vec<(ScoreBundle, GroundTruth)>> {
    let (loaded, errors) = load_bundles(bundles)?;
    if !errors.is_empty() {
        return Err(CliError::Invalid(errors.join("\n")));
    }
    let mut by_id = BTreeMap::new();
    for b in loaded {
        let id = b.video_id().to_owned();
        if by_id.insert(id.clone(), b).is_some() {
            return Err(CliError::Invalid(format!("duplicate bundle for video {id:?}")));
        }
    }
    pair(by_id, load_ground_truths(gt)?, ["bundle", "ground truth"])
}
