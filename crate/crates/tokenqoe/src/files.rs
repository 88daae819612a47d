//! On-disk formats: JSON, JSON Lines, the MOS and ablation CSV tables and
//! the binary model file.
//!
//! CSV outputs start with `#` comment lines carrying run metadata (the
//! seed, the producing command); readers skip them.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use tokenqoe_core::model::{ConditionId, ContentConfig, ContentFixture, ContentItem, Dimension, Grid, QosConfig};
use tokenqoe_core::pipeline::{Anchors, MosEntry, MosTable};
use tokenqoe_core::predictor::{AblationRow, PredictorModel};

use crate::error::{Error, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::new("bad-json", format!("{}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::new("io-error", e.to_string()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line)
            .map_err(|e| Error::new("bad-record", format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| Error::new("io-error", e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    finish(path, w)
}

pub fn load_fixture(path: &Path) -> Result<ContentFixture> {
    let items: Vec<ContentItem> = read_json(path)?;
    Ok(ContentFixture::new(items)?)
}

pub fn load_grid(path: Option<&Path>) -> Result<Grid> {
    let grid = match path {
        Some(p) => read_json(p)?,
        None => Grid::standard(),
    };
    grid.validate()?;
    Ok(grid)
}

/// Accepts either a bare anchors map or a `report.json` carrying one under
/// `anchors`.
pub fn load_anchors(path: &Path) -> Result<Anchors> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Shape {
        Report { anchors: Anchors },
        Bare(Anchors),
    }
    Ok(match read_json::<Shape>(path)? {
        Shape::Report { anchors } | Shape::Bare(anchors) => anchors,
    })
}

fn comment_header(w: &mut impl Write, path: &Path, meta: &[(&str, String)]) -> Result<()> {
    if meta.is_empty() {
        return Ok(());
    }
    let line: Vec<String> = meta.iter().map(|(k, v)| format!("{k}={v}")).collect();
    writeln!(w, "# {}", line.join(" ")).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::new("bad-csv", format!("{}: {e}", path.display()))
}

fn csv_writer(path: &Path, meta: &[(&str, String)]) -> Result<csv::Writer<BufWriter<File>>> {
    let mut w = create(path)?;
    comment_header(&mut w, path, meta)?;
    Ok(csv::Writer::from_writer(w))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file))
}

/// One line of `mos.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosRow {
    pub question_id: String,
    pub density: u8,
    pub accuracy: u8,
    pub speed: f64,
    pub pause_pos: f64,
    pub pause_dur: f64,
    pub dimension: Dimension,
    pub mos_z: f64,
    pub mos_scaled: f64,
    pub n_valid: usize,
}

pub fn write_mos_csv(path: &Path, table: &MosTable, meta: &[(&str, String)]) -> Result<()> {
    let mut w = csv_writer(path, meta)?;
    for (c, dim, e) in table.iter() {
        let row = MosRow {
            question_id: c.question_id.clone(),
            density: c.content.density,
            accuracy: c.content.accuracy,
            speed: c.qos.speed_s_per_token,
            pause_pos: c.qos.pause_pos,
            pause_dur: c.qos.pause_dur_s,
            dimension: dim,
            mos_z: e.mos_z,
            mos_scaled: e.mos_scaled,
            n_valid: e.n_valid,
        };
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads `mos.csv` back into a table. Anchors are not part of the file and
/// are left empty.
pub fn read_mos_csv(path: &Path) -> Result<MosTable> {
    let mut table = MosTable::default();
    for row in csv_reader(path)?.deserialize::<MosRow>() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let content = ContentConfig::new(row.density, row.accuracy)?;
        let qos = QosConfig::new(row.speed, row.pause_pos, row.pause_dur)?;
        let cond = ConditionId { question_id: row.question_id, content, qos };
        table.entries.entry(cond).or_default().insert(
            row.dimension,
            MosEntry { mos_z: row.mos_z, mos_scaled: row.mos_scaled, n_valid: row.n_valid },
        );
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCsvRow {
    pub dropped_feature: String,
    pub srcc: f64,
    pub plcc: f64,
    pub krcc: f64,
    pub rmse: f64,
}

pub fn write_ablation_csv(path: &Path, rows: &[AblationRow], meta: &[(&str, String)]) -> Result<()> {
    let mut w = csv_writer(path, meta)?;
    for r in rows {
        let m = r.metrics;
        let row = AblationCsvRow { dropped_feature: r.label(), srcc: m.srcc, plcc: m.plcc, krcc: m.krcc, rmse: m.rmse };
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_ablation_csv(path: &Path) -> Result<Vec<AblationCsvRow>> {
    csv_reader(path)?
        .deserialize()
        .map(|r| r.map_err(|e| csv_error(path, e)))
        .collect()
}

/// Writes any serializable rows as CSV with a metadata comment line.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], meta: &[(&str, String)]) -> Result<()> {
    let mut w = csv_writer(path, meta)?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_model(path: &Path, model: &PredictorModel) -> Result<()> {
    let mut w = create(path)?;
    ciborium::into_writer(model, &mut w).map_err(|e| Error::new("io-error", format!("{}: {e}", path.display())))?;
    finish(path, w)
}

pub fn read_model(path: &Path) -> Result<PredictorModel> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ciborium::from_reader(BufReader::new(file)).map_err(|e| Error::new("bad-model", format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tokenqoe_core::predictor::{FeatureMask, MetricsBundle};
    use tokenqoe_core::Feature;

    fn table() -> MosTable {
        let mut t = MosTable::default();
        for (i, (content, qos)) in Grid::standard().combinations().into_iter().take(7).enumerate() {
            let cond = ConditionId { question_id: format!("q{i}"), content, qos };
            for dim in Dimension::ALL {
                let e = MosEntry { mos_z: 0.1 * i as f64 - 0.3, mos_scaled: 0.7 * i as f64, n_valid: i + 1 };
                t.entries.entry(cond.clone()).or_default().insert(dim, e);
            }
        }
        t
    }

    #[test]
    fn mos_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("mos.csv");
        write_mos_csv(&p, &table(), &[("seed", "7".into())]).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# seed=7"));
        assert_eq!(
            lines.next(),
            Some("question_id,density,accuracy,speed,pause_pos,pause_dur,dimension,mos_z,mos_scaled,n_valid")
        );
        assert_eq!(read_mos_csv(&p).unwrap().entries, table().entries);
    }

    #[test]
    fn ablation_csv_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ablation.csv");
        let m = MetricsBundle { srcc: 0.9, plcc: 0.8, krcc: 0.7, rmse: 0.25 };
        let rows = [AblationRow { dropped: None, metrics: m }, AblationRow { dropped: Some(Feature::Accuracy), metrics: m }];
        write_ablation_csv(&p, &rows, &[]).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("dropped_feature,srcc,plcc,krcc,rmse\nnone,"));
        let back = read_ablation_csv(&p).unwrap();
        assert_eq!(back[1].dropped_feature, "accuracy");
    }

    #[test]
    fn model_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        let model = PredictorModel::linear(vec![0.1, 1.0 / 3.0, -7.25, 1e-300, 2.0], 0.123456789, FeatureMask::all());
        write_model(&p, &model).unwrap();
        assert_eq!(read_model(&p).unwrap(), model);
    }

    #[test]
    fn missing_file_code() {
        let err = read_text(Path::new("/nonexistent/x.jsonl")).unwrap_err();
        assert_eq!(err.code, "file-not-found");
    }

    #[test]
    fn anchors_from_report_or_bare() {
        let dir = tempfile::tempdir().unwrap();
        let bare = dir.path().join("a.json");
        fs::write(&bare, r#"{"overall":{"min":-1.0,"max":2.0}}"#).unwrap();
        let report = dir.path().join("r.json");
        fs::write(&report, r#"{"records_in":3,"anchors":{"overall":{"min":-1.0,"max":2.0}}}"#).unwrap();
        assert_eq!(load_anchors(&bare).unwrap(), load_anchors(&report).unwrap());
    }
}
