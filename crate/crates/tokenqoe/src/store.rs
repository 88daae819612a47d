//! Append-only JSON Lines store of a rating study.
//!
//! The store directory holds one file per event kind. Each event is written
//! as a single line and synced before the caller proceeds, so a crash can
//! at worst leave a torn final line, which [`Store::open`] discards.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use tokenqoe_core::assign::SessionPlan;
use tokenqoe_core::model::{RaterProfile, RatingRecord};

use crate::error::{Error, Result};

pub const RATERS: &str = "raters.jsonl";
pub const PLANS: &str = "plans.jsonl";
pub const STREAMED: &str = "streamed.jsonl";
pub const RATINGS: &str = "ratings.jsonl";

/// An item whose stream ran to completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamedItem {
    pub session_id: String,
    pub item_index: usize,
}

/// Everything read back from a store, in append order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Snapshot {
    pub raters: Vec<RaterProfile>,
    pub plans: Vec<SessionPlan>,
    pub streamed: Vec<StreamedItem>,
    pub ratings: Vec<RatingRecord>,
}

#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
}

impl Store {
    pub fn open(dir: &Path) -> Result<(Self, Snapshot)> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let snapshot = Snapshot {
            raters: replay(&dir.join(RATERS))?,
            plans: replay(&dir.join(PLANS))?,
            streamed: replay(&dir.join(STREAMED))?,
            ratings: replay(&dir.join(RATINGS))?,
        };
        Ok((Self { dir: dir.to_path_buf() }, snapshot))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn append_rater(&self, p: &RaterProfile) -> Result<()> {
        self.append(RATERS, p)
    }

    pub fn append_plan(&self, p: &SessionPlan) -> Result<()> {
        self.append(PLANS, p)
    }

    pub fn append_streamed(&self, s: &StreamedItem) -> Result<()> {
        self.append(STREAMED, s)
    }

    pub fn append_rating(&self, r: &RatingRecord) -> Result<()> {
        self.append(RATINGS, r)
    }

    fn append<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let path = self.dir.join(name);
        let mut line = serde_json::to_vec(value).map_err(|e| Error::new("io-error", e.to_string()))?;
        line.push(b'\n');
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| Error::io(&path, e))?;
        f.write_all(&line).map_err(|e| Error::io(&path, e))?;
        f.sync_data().map_err(|e| Error::io(&path, e))
    }
}

/// Reads all complete lines of `path`; a torn last line is dropped and
/// truncated away so later appends start on a fresh line.
fn replay<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut good_len = 0u64;
    let mut buf = String::new();
    let mut lineno = 0;
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        lineno += 1;
        if !buf.ends_with('\n') {
            log::warn!("{}: dropping torn final line {lineno}", path.display());
            let f = OpenOptions::new().write(true).open(path).map_err(|e| Error::io(path, e))?;
            f.set_len(good_len).map_err(|e| Error::io(path, e))?;
            break;
        }
        if !buf.trim().is_empty() {
            let v = serde_json::from_str(&buf)
                .map_err(|e| Error::new("bad-record", format!("{}:{lineno}: {e}", path.display())))?;
            out.push(v);
        }
        good_len += n as u64;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tokenqoe_core::model::Language;

    fn profile(id: &str) -> RaterProfile {
        RaterProfile { rater_id: id.into(), language: Language::Zh, mbti: "ENFP".into(), patience: 2, sessions_completed: 0 }
    }

    #[test]
    fn append_and_replay() {
        let dir = tempfile::tempdir().unwrap();
        let (store, snap) = Store::open(dir.path()).unwrap();
        assert!(snap.raters.is_empty());
        store.append_rater(&profile("a")).unwrap();
        store.append_rater(&profile("b")).unwrap();
        let (_, snap) = Store::open(dir.path()).unwrap();
        assert_eq!(snap.raters, vec![profile("a"), profile("b")]);
    }

    #[test]
    fn torn_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let (store, _) = Store::open(dir.path()).unwrap();
        store.append_rater(&profile("a")).unwrap();
        let mut f = OpenOptions::new().append(true).open(dir.path().join(RATERS)).unwrap();
        f.write_all(br#"{"rater_id":"b","lang"#).unwrap();
        drop(f);
        let (store, snap) = Store::open(dir.path()).unwrap();
        assert_eq!(snap.raters, vec![profile("a")]);
        store.append_rater(&profile("c")).unwrap();
        let (_, snap) = Store::open(dir.path()).unwrap();
        assert_eq!(snap.raters, vec![profile("a"), profile("c")]);
    }
}
