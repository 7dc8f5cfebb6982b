//! Loss grids Ψ(x,y) = L(Θ* + x·b¹ + y·b²) and trajectory projection into
//! the visualization plane.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{cross_entropy_loss, model_forward, ModelConfig};
use crate::params::FlatParams;
use crate::projection::{project_point, DirectionPair, ProjectionMethod};
use crate::train::TrainRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for MaskKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(MaskKind::Train),
            "val" => Ok(MaskKind::Val),
            "test" => Ok(MaskKind::Test),
            other => Err(Error::InvalidArgument(format!("unknown mask '{other}'"))),
        }
    }
}

impl MaskKind {
    pub fn select<'a>(&self, g: &'a Graph) -> &'a [bool] {
        match self {
            MaskKind::Train => &g.train_mask,
            MaskKind::Val => &g.val_mask,
            MaskKind::Test => &g.test_mask,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridProvenance {
    pub config_hash: u64,
    pub dataset_id: String,
    pub direction_method: ProjectionMethod,
    pub mask: MaskKind,
}

/// Loss values over an (x, y) lattice, row-major with y varying last
/// (values[iy * resolution + ix]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeGrid {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub resolution: usize,
    pub values: Vec<f64>,
    pub provenance: GridProvenance,
}

impl LandscapeGrid {
    pub fn x_at(&self, ix: usize) -> f64 {
        lattice_coord(self.x_range, self.resolution, ix)
    }

    pub fn y_at(&self, iy: usize) -> f64 {
        lattice_coord(self.y_range, self.resolution, iy)
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.resolution + ix]
    }
}

fn lattice_coord(range: (f64, f64), resolution: usize, i: usize) -> f64 {
    if resolution == 1 {
        return range.0;
    }
    range.0 + (range.1 - range.0) * i as f64 / (resolution - 1) as f64
}

/// Eq. of the plane: (x, y) ↦ Θ* + x·b¹ + y·b².
pub fn map_to_parameters(
    x: f64,
    y: f64,
    theta_star: &FlatParams,
    dirs: &DirectionPair,
) -> Result<FlatParams> {
    if theta_star.dim() != dirs.dim() {
        return Err(Error::DimensionMismatch(
            "map_to_parameters: origin/basis dims differ".into(),
        ));
    }
    let values: Vec<f64> = theta_star
        .values
        .iter()
        .zip(dirs.b1.iter().zip(&dirs.b2))
        .map(|(t, (b1, b2))| t + x * b1 + y * b2)
        .collect();
    Ok(FlatParams {
        values,
        layout: theta_star.layout.clone(),
    })
}

/// Evaluate the masked loss at every lattice point. Cells are evaluated
/// independently (parallel, each writing only its own slot), so the grid is
/// bit-identical across runs and thread schedules.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_landscape_grid(
    config: &ModelConfig,
    g: &Graph,
    theta_star: &FlatParams,
    dirs: &DirectionPair,
    x_range: (f64, f64),
    y_range: (f64, f64),
    resolution: usize,
    mask: MaskKind,
    dataset_id: &str,
) -> Result<LandscapeGrid> {
    if resolution < 2 {
        return Err(Error::InvalidArgument("resolution must be >= 2".into()));
    }
    for v in [x_range.0, x_range.1, y_range.0, y_range.1] {
        if !v.is_finite() {
            return Err(Error::InvalidArgument("grid ranges must be finite".into()));
        }
    }
    let mask_slice = mask.select(g);
    let cells: Vec<(usize, usize)> = (0..resolution)
        .flat_map(|iy| (0..resolution).map(move |ix| (ix, iy)))
        .collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(ix, iy)| {
            let x = lattice_coord(x_range, resolution, ix);
            let y = lattice_coord(y_range, resolution, iy);
            let params = map_to_parameters(x, y, theta_star, dirs)?;
            let (logits, _) = model_forward(config, g, &params)?;
            cross_entropy_loss(&logits, &g.labels, mask_slice)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(LandscapeGrid {
        x_range,
        y_range,
        resolution,
        values,
        provenance: GridProvenance {
            config_hash: config.hash(),
            dataset_id: dataset_id.to_string(),
            direction_method: dirs.method,
            mask,
        },
    })
}

/// Per-epoch (x, y, ‖r‖₁, train loss) points.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory2D {
    pub points: Vec<TrajectoryPoint>,
    pub method: ProjectionMethod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub epoch: usize,
    pub x: f64,
    pub y: f64,
    pub residual_l1: f64,
    pub train_loss: f64,
}

/// Project every snapshot of a training record into the basis.
pub fn project_trajectory(record: &TrainRecord, dirs: &DirectionPair) -> Result<Trajectory2D> {
    if record.dim() != dirs.dim() {
        return Err(Error::DimensionMismatch(
            "trajectory: record/basis dims differ".into(),
        ));
    }
    let star = record.theta_star();
    let mut points = Vec::with_capacity(record.num_snapshots());
    for epoch in 0..record.num_snapshots() {
        let snap = record.snapshot(epoch);
        let proj = project_point(&snap, &star, dirs)?;
        points.push(TrajectoryPoint {
            epoch,
            x: proj.x,
            y: proj.y,
            residual_l1: proj.residual_l1,
            train_loss: record.train_loss[epoch],
        });
    }
    Ok(Trajectory2D {
        points,
        method: dirs.method,
    })
}

/// Strict local minima of the grid under the 8-neighbor definition (every
/// existing neighbor strictly larger). Used for ruggedness comparisons.
pub fn count_strict_local_minima(grid: &LandscapeGrid) -> usize {
    let r = grid.resolution as isize;
    let mut count = 0;
    for iy in 0..r {
        for ix in 0..r {
            let v = grid.value(ix as usize, iy as usize);
            let mut strict = true;
            'nbrs: for dy in -1..=1 {
                for dx in -1..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (ix + dx, iy + dy);
                    if nx < 0 || ny < 0 || nx >= r || ny >= r {
                        continue;
                    }
                    if grid.value(nx as usize, ny as usize) <= v {
                        strict = false;
                        break 'nbrs;
                    }
                }
            }
            if strict {
                count += 1;
            }
        }
    }
    count
}
