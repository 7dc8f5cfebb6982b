//! On-disk dataset directory format:
//!
//! - `edges.csv`    two integer columns, one undirected edge per line, no duplicates
//! - `features.bin` two little-endian u64 (rows, cols) followed by row-major
//!   little-endian f64 values
//! - `labels.csv`   one integer class id per line
//! - `masks.json`   `{"train": [..], "val": [..], "test": [..]}` index arrays
//! - `meta.json`    `{"num_classes": C}`

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::mat::Mat;

#[derive(Debug, Serialize, Deserialize)]
struct Masks {
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    num_classes: usize,
}

fn dataset_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Dataset {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read_features(path: &Path) -> Result<Mat> {
    let mut file = fs::File::open(path)?;
    let mut header = [0u8; 16];
    file.read_exact(&mut header)
        .map_err(|_| dataset_err(path, "truncated feature header"))?;
    let rows = u64::from_le_bytes(header[0..8].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let mut payload = Vec::new();
    file.read_to_end(&mut payload)?;
    if payload.len() != rows * cols * 8 {
        return Err(dataset_err(
            path,
            format!(
                "feature payload is {} bytes, expected {} for {rows}x{cols}",
                payload.len(),
                rows * cols * 8
            ),
        ));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Mat::from_vec(rows, cols, data))
}

fn write_features(path: &Path, features: &Mat) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&(features.rows() as u64).to_le_bytes())?;
    file.write_all(&(features.cols() as u64).to_le_bytes())?;
    for v in features.data() {
        file.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn mask_from_indices(path: &Path, name: &str, indices: &[usize], n: usize) -> Result<Vec<bool>> {
    let mut mask = vec![false; n];
    for &i in indices {
        if i >= n {
            return Err(dataset_err(
                path,
                format!("{name} mask index {i} out of range for {n} nodes"),
            ));
        }
        mask[i] = true;
    }
    Ok(mask)
}

/// Load a node-classification dataset directory into a validated [`Graph`].
pub fn load_node_classification_dataset(dir: &Path) -> Result<Graph> {
    let features = read_features(&dir.join("features.bin"))?;
    let n = features.rows();

    let labels_path = dir.join("labels.csv");
    let labels_text = fs::read_to_string(&labels_path)?;
    let mut labels = Vec::new();
    for (lineno, line) in labels_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let l: usize = line
            .parse()
            .map_err(|_| dataset_err(&labels_path, format!("bad label on line {}", lineno + 1)))?;
        labels.push(l);
    }
    if labels.len() != n {
        return Err(dataset_err(
            &labels_path,
            format!("{} labels but {} feature rows", labels.len(), n),
        ));
    }

    let edges_path = dir.join("edges.csv");
    let edges_text = fs::read_to_string(&edges_path)?;
    let mut edges = Vec::new();
    for (lineno, line) in edges_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let parse = |s: Option<&str>| -> Result<usize> {
            s.and_then(|v| v.trim().parse().ok()).ok_or_else(|| {
                dataset_err(&edges_path, format!("bad edge on line {}", lineno + 1))
            })
        };
        let u = parse(parts.next())?;
        let v = parse(parts.next())?;
        edges.push((u, v));
    }

    let masks_path = dir.join("masks.json");
    let masks: Masks = serde_json::from_str(&fs::read_to_string(&masks_path)?)?;
    let train_mask = mask_from_indices(&masks_path, "train", &masks.train, n)?;
    let val_mask = mask_from_indices(&masks_path, "val", &masks.val, n)?;
    let test_mask = mask_from_indices(&masks_path, "test", &masks.test, n)?;

    let meta_path = dir.join("meta.json");
    let meta: Meta = serde_json::from_str(&fs::read_to_string(&meta_path)?)?;

    Graph::from_undirected_edges(
        n,
        &edges,
        features,
        labels,
        train_mask,
        val_mask,
        test_mask,
        meta.num_classes,
    )
}

/// Write a graph back out in the dataset directory format. Round-trips
/// bit-exactly through [`load_node_classification_dataset`].
pub fn write_dataset_dir(g: &Graph, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_features(&dir.join("features.bin"), &g.features)?;

    let mut labels = String::new();
    for &l in &g.labels {
        labels.push_str(&l.to_string());
        labels.push('\n');
    }
    fs::write(dir.join("labels.csv"), labels)?;

    let mut edges = String::new();
    for (u, v) in g.undirected_edges() {
        edges.push_str(&format!("{u},{v}\n"));
    }
    fs::write(dir.join("edges.csv"), edges)?;

    let indices = |mask: &[bool]| -> Vec<usize> {
        mask.iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    };
    let masks = Masks {
        train: indices(&g.train_mask),
        val: indices(&g.val_mask),
        test: indices(&g.test_mask),
    };
    fs::write(dir.join("masks.json"), serde_json::to_string_pretty(&masks)?)?;
    fs::write(
        dir.join("meta.json"),
        serde_json::to_string_pretty(&Meta {
            num_classes: g.num_classes,
        })?,
    )?;
    Ok(())
}
