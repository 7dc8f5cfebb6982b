//! Binary snapshot container: magic "LLSNAP01", little-endian u64 pair
//! (n, d), then n·d little-endian f64 row-major, with a JSON manifest
//! sidecar at `<path>.json`. Directions reuse the same container with n = 2.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ParamLayout, Segment};
use crate::projection::{DirectionPair, FitStats, ProjectionMethod};
use crate::train::TrainRecord;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"LLSNAP01";

#[derive(Debug, Serialize, Deserialize)]
pub struct SnapshotManifest {
    pub segments: Vec<Segment>,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub train_acc: Vec<f64>,
    pub val_acc: Vec<f64>,
    pub theta_star_row: usize,
    pub seed: u64,
    pub config_hash: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DirectionManifest {
    pub method: ProjectionMethod,
    pub orthonormality_defect: f64,
    pub fit_stats: Option<FitStats>,
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

fn write_payload(path: &Path, rows: &[&[f64]], dim: usize) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(SNAPSHOT_MAGIC)?;
    file.write_all(&(rows.len() as u64).to_le_bytes())?;
    file.write_all(&(dim as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(rows.len() * dim * 8);
    for row in rows {
        debug_assert_eq!(row.len(), dim);
        for v in *row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    file.write_all(&buf)?;
    Ok(())
}

fn read_payload(path: &Path) -> Result<(usize, usize, Vec<Vec<f64>>)> {
    let mut file = fs::File::open(path)?;
    let mut header = [0u8; 24];
    file.read_exact(&mut header)
        .map_err(|_| Error::BadSnapshotFile("truncated header".into()))?;
    if &header[0..8] != SNAPSHOT_MAGIC {
        return Err(Error::BadSnapshotFile(format!(
            "bad magic {:?}",
            &header[0..8]
        )));
    }
    let n = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let d = u64::from_le_bytes(header[16..24].try_into().unwrap()) as usize;
    let mut payload = Vec::new();
    file.read_to_end(&mut payload)?;
    if payload.len() != n * d * 8 {
        return Err(Error::BadSnapshotFile(format!(
            "payload is {} bytes, expected {} for {n}x{d}",
            payload.len(),
            n * d * 8
        )));
    }
    let rows = (0..n)
        .map(|i| {
            payload[i * d * 8..(i + 1) * d * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect()
        })
        .collect();
    Ok((n, d, rows))
}

/// Persist all snapshots plus the manifest sidecar; lossless round trip.
pub fn write_snapshots(record: &TrainRecord, path: &Path) -> Result<()> {
    let rows: Vec<&[f64]> = record.snapshots.iter().map(|s| s.as_slice()).collect();
    write_payload(path, &rows, record.dim())?;
    let manifest = SnapshotManifest {
        segments: record.layout.segments.clone(),
        train_loss: record.train_loss.clone(),
        val_loss: record.val_loss.clone(),
        train_acc: record.train_acc.clone(),
        val_acc: record.val_acc.clone(),
        theta_star_row: record.best_epoch,
        seed: record.seed,
        config_hash: record.config_hash,
    };
    fs::write(
        manifest_path(path),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

pub fn read_snapshots(path: &Path) -> Result<TrainRecord> {
    let (n, d, snapshots) = read_payload(path)?;
    let manifest: SnapshotManifest =
        serde_json::from_str(&fs::read_to_string(manifest_path(path))?)?;
    let layout_dim: usize = manifest.segments.iter().map(|s| s.len()).sum();
    if layout_dim != d {
        return Err(Error::BadSnapshotFile(format!(
            "manifest layout dim {layout_dim} != payload dim {d}"
        )));
    }
    if manifest.train_loss.len() != n || manifest.theta_star_row >= n.max(1) {
        return Err(Error::BadSnapshotFile(
            "manifest rows inconsistent with payload".into(),
        ));
    }
    let layout = Arc::new(ParamLayout {
        segments: manifest.segments,
        total_dim: d,
    });
    Ok(TrainRecord {
        layout,
        snapshots,
        train_loss: manifest.train_loss,
        val_loss: manifest.val_loss,
        train_acc: manifest.train_acc,
        val_acc: manifest.val_acc,
        best_epoch: manifest.theta_star_row,
        seed: manifest.seed,
        config_hash: manifest.config_hash,
    })
}

/// Directions use the same container (rows b¹, b²) plus a JSON sidecar with
/// method, defect, and fit stats.
pub fn write_directions(dirs: &DirectionPair, path: &Path) -> Result<()> {
    write_payload(path, &[&dirs.b1, &dirs.b2], dirs.dim())?;
    let manifest = DirectionManifest {
        method: dirs.method,
        orthonormality_defect: dirs.orthonormality_defect,
        fit_stats: dirs.fit_stats,
    };
    fs::write(
        manifest_path(path),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

pub fn read_directions(path: &Path) -> Result<DirectionPair> {
    let (n, _d, mut rows) = read_payload(path)?;
    if n != 2 {
        return Err(Error::BadSnapshotFile(format!(
            "direction file must hold exactly 2 rows, found {n}"
        )));
    }
    let manifest: DirectionManifest =
        serde_json::from_str(&fs::read_to_string(manifest_path(path))?)?;
    let b2 = rows.pop().unwrap();
    let b1 = rows.pop().unwrap();
    Ok(DirectionPair {
        b1,
        b2,
        method: manifest.method,
        orthonormality_defect: manifest.orthonormality_defect,
        fit_stats: manifest.fit_stats,
    })
}
