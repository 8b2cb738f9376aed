//! File formats and atomic output.

use std::io::Write;
use std::path::{Path, PathBuf};

use ragkit::classify::{Prediction, PredictionSet, RocPoint};
use ragkit::embedding::LikelihoodEmbedding;
use ragkit::GraphDataset;
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io_err(&dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(io_err(path))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse_dataset(path: &Path, bytes: &[u8]) -> CliResult<GraphDataset> {
    GraphDataset::read_jsonl(bytes).map_err(|e| CliError::data(path, e.to_string()))
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable value");
    out.push(b'\n');
    out
}

pub fn parse_json<T: DeserializeOwned>(path: &Path, bytes: &[u8]) -> CliResult<T> {
    serde_json::from_slice(bytes).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn parse_f64(path: &Path, row: usize, field: &str) -> CliResult<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| CliError::data(path, format!("row {row}: `{field}` is not a number")))
}

/// Sibling path with the extension replaced, e.g. `a/emb.csv` -> `a/emb.std.csv`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub fn embeddings_csv(embeddings: &[LikelihoodEmbedding], width: usize) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["graph_id".to_string(), "label".to_string()];
    header.extend((0..width).map(|j| format!("f{j}")));
    w.write_record(&header).expect("in-memory csv");
    for e in embeddings {
        let mut row = vec![e.graph_id.clone(), e.label.clone().unwrap_or_default()];
        row.extend(e.features.iter().map(|&x| fmt_f64(x)));
        w.write_record(&row).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

pub fn parse_embeddings_csv(path: &Path, bytes: &[u8]) -> CliResult<Vec<LikelihoodEmbedding>> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.len() < 2 || &header[0] != "graph_id" || &header[1] != "label" {
        return Err(CliError::data(path, "expected header `graph_id,label,f0,...`"));
    }
    let width = header.len() - 2;
    let mut out = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let features = (0..width)
            .map(|j| parse_f64(path, i + 2, &record[j + 2]))
            .collect::<CliResult<Vec<_>>>()?;
        out.push(LikelihoodEmbedding {
            graph_id: record[0].to_string(),
            label: Some(record[1].to_string()).filter(|l| !l.is_empty()),
            features,
        });
    }
    Ok(out)
}

pub fn predictions_csv(set: &PredictionSet) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["graph_id", "true_label", "pred_label", "score"])
        .expect("in-memory csv");
    for p in &set.items {
        w.write_record([
            p.graph_id.as_str(),
            p.true_label.as_deref().unwrap_or(""),
            p.pred.as_str(),
            &fmt_f64(p.score),
        ])
        .expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

pub fn parse_predictions_csv(path: &Path, bytes: &[u8]) -> CliResult<Vec<Prediction>> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.iter().collect::<Vec<_>>() != ["graph_id", "true_label", "pred_label", "score"] {
        return Err(CliError::data(path, "expected header `graph_id,true_label,pred_label,score`"));
    }
    let mut out = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        out.push(Prediction {
            graph_id: record[0].to_string(),
            true_label: Some(record[1].to_string()).filter(|l| !l.is_empty()),
            pred: record[2].to_string(),
            score: parse_f64(path, i + 2, &record[3])?,
        });
    }
    Ok(out)
}

pub fn roc_csv(points: &[RocPoint]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["threshold", "fpr", "tpr"]).expect("in-memory csv");
    for p in points {
        w.write_record([fmt_f64(p.threshold), fmt_f64(p.fpr), fmt_f64(p.tpr)])
            .expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}
