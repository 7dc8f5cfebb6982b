//! 2D bases for the parameter space: filter-normalized random directions,
//! PCA of the snapshot difference matrix (Gram-trick or naive covariance),
//! and a learnable 2×d projection fit by gradient descent on the
//! reconstruction MSE. Also the encoder from points to (x, y) coordinates
//! with per-point l1 reconstruction error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::gaussian;
use crate::mat::{dot, norm2, Mat};
use crate::params::{FlatParams, ParamLayout};
use crate::train::TrainRecord;

/// Row-stack of Θ_i − Θ* across epochs.
#[derive(Debug, Clone)]
pub struct DifferenceMatrix {
    pub data: Mat,
    pub origin: Vec<f64>,
}

impl DifferenceMatrix {
    pub fn rows(&self) -> usize {
        self.data.rows()
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }
}

/// Build the difference matrix from a training record, one row per epoch
/// snapshot in epoch order.
pub fn build_difference_matrix(record: &TrainRecord) -> Result<DifferenceMatrix> {
    if record.snapshots.is_empty() {
        return Err(Error::EmptyRecord);
    }
    let star = &record.snapshots[record.best_epoch];
    let d = record.dim();
    let mut data = Mat::zeros(record.num_snapshots(), d);
    for (i, snap) in record.snapshots.iter().enumerate() {
        let row = data.row_mut(i);
        for ((r, s), o) in row.iter_mut().zip(snap).zip(star) {
            *r = s - o;
        }
    }
    Ok(DifferenceMatrix {
        data,
        origin: star.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionMethod {
    Random,
    PcaGram,
    PcaNaive,
    Learnable,
}

impl std::fmt::Display for ProjectionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ProjectionMethod::Random => "random",
            ProjectionMethod::PcaGram => "pca-gram",
            ProjectionMethod::PcaNaive => "pca-naive",
            ProjectionMethod::Learnable => "learnable",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ProjectionMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(ProjectionMethod::Random),
            "pca-gram" => Ok(ProjectionMethod::PcaGram),
            "pca-naive" => Ok(ProjectionMethod::PcaNaive),
            "learnable" => Ok(ProjectionMethod::Learnable),
            other => Err(Error::InvalidArgument(format!(
                "unknown projection method '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    pub epochs: usize,
    pub final_objective: f64,
}

/// A 2D basis (b¹, b²) with provenance metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionPair {
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub method: ProjectionMethod,
    pub orthonormality_defect: f64,
    pub fit_stats: Option<FitStats>,
}

impl DirectionPair {
    pub fn new(
        b1: Vec<f64>,
        b2: Vec<f64>,
        method: ProjectionMethod,
        fit_stats: Option<FitStats>,
    ) -> Self {
        let defect = orthonormality_defect(&b1, &b2);
        DirectionPair {
            b1,
            b2,
            method,
            orthonormality_defect: defect,
            fit_stats,
        }
    }

    pub fn dim(&self) -> usize {
        self.b1.len()
    }
}

/// ‖I₂ − P Pᵀ‖_F for P = (b¹ b²)ᵀ.
pub fn orthonormality_defect(b1: &[f64], b2: &[f64]) -> f64 {
    let g11 = dot(b1, b1);
    let g12 = dot(b1, b2);
    let g22 = dot(b2, b2);
    ((1.0 - g11).powi(2) + 2.0 * g12 * g12 + (1.0 - g22).powi(2)).sqrt()
}

/// Coordinates of a point in the visualization plane plus the l1 norm of the
/// reconstruction residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection2D {
    pub x: f64,
    pub y: f64,
    pub residual_l1: f64,
}

/// Two seeded Gaussian directions with every layout segment rescaled so its
/// norm matches the corresponding segment of Θ*.
pub fn random_directions_filter_normalized(
    layout: &ParamLayout,
    theta_star: &FlatParams,
    seed: u64,
) -> Result<DirectionPair> {
    if theta_star.dim() != layout.total_dim {
        return Err(Error::LayoutMismatch(format!(
            "theta_star dim {} != layout dim {}",
            theta_star.dim(),
            layout.total_dim
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut b: Vec<f64> = (0..layout.total_dim).map(|_| gaussian(rng)).collect();
        for seg in &layout.segments {
            let range = layout.range(seg);
            let target = norm2(&theta_star.values[range.clone()]);
            let raw = norm2(&b[range.clone()]);
            let scale = if target == 0.0 || raw == 0.0 {
                0.0
            } else {
                target / raw
            };
            for v in &mut b[range] {
                *v *= scale;
            }
        }
        b
    };
    let b1 = draw(&mut rng);
    let b2 = draw(&mut rng);
    Ok(DirectionPair::new(b1, b2, ProjectionMethod::Random, None))
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// (eigenvalues, eigenvectors as columns), sorted by descending eigenvalue.
fn jacobi_eigen_sym(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.rows();
    assert_eq!(n, a.cols(), "matrix must be square");
    let mut a = a.clone();
    let mut v = Mat::identity(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + a.frobenius_norm()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[(row, col)] = v[(row, src)];
        }
    }
    (values, vectors)
}

/// Flip so the first component above threshold is positive; makes gram and
/// naive modes comparable.
fn fix_sign(v: &mut [f64]) {
    if let Some(&lead) = v.iter().find(|x| x.abs() > 1e-12) {
        if lead < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcaMode {
    /// Eigenvectors of the n×n Gram matrix D Dᵀ, mapped back through Dᵀ.
    Gram,
    /// Materializes the d×d covariance; exists to demonstrate the memory
    /// cost, use gram for real work.
    Naive,
}

/// Top-2 principal directions of D (unit norm, orthogonal, sign-fixed).
pub fn pca_directions(diff: &DifferenceMatrix, mode: PcaMode) -> Result<DirectionPair> {
    let n = diff.rows();
    let d = diff.dim();
    if n < 2 {
        return Err(Error::DegenerateBasis(
            "PCA needs at least 2 snapshot rows".into(),
        ));
    }
    let (mut b1, mut b2, l1, l2) = match mode {
        PcaMode::Gram => {
            let gram = diff.data.matmul_t(&diff.data);
            let (vals, vecs) = jacobi_eigen_sym(&gram);
            let back = |col: usize| -> Vec<f64> {
                let mut b = vec![0.0; d];
                for i in 0..n {
                    let w = vecs[(i, col)];
                    if w == 0.0 {
                        continue;
                    }
                    for (bv, dv) in b.iter_mut().zip(diff.data.row(i)) {
                        *bv += w * dv;
                    }
                }
                let nrm = norm2(&b);
                if nrm > 0.0 {
                    for v in &mut b {
                        *v /= nrm;
                    }
                }
                b
            };
            (back(0), back(1), vals[0], vals[1])
        }
        PcaMode::Naive => {
            let cov = diff.data.t_matmul(&diff.data);
            let (vals, vecs) = jacobi_eigen_sym(&cov);
            let col = |c: usize| -> Vec<f64> { (0..d).map(|r| vecs[(r, c)]).collect() };
            (col(0), col(1), vals[0], vals[1])
        }
    };
    let scale = l1.abs().max(1.0);
    if l1 <= 0.0 || l2 <= 1e-12 * scale {
        return Err(Error::DegenerateBasis(format!(
            "fewer than 2 nonzero singular values (eigenvalues {l1}, {l2})"
        )));
    }
    fix_sign(&mut b1);
    fix_sign(&mut b2);
    Ok(DirectionPair::new(b1, b2, mode_method(mode), None))
}

fn mode_method(mode: PcaMode) -> ProjectionMethod {
    match mode {
        PcaMode::Gram => ProjectionMethod::PcaGram,
        PcaMode::Naive => ProjectionMethod::PcaNaive,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub lr: f64,
    pub tol: f64,
    pub seed: u64,
}

impl FitOptions {
    pub fn defaults_for(n: usize) -> Self {
        FitOptions {
            batch_size: n.min(16).max(1),
            max_epochs: 500,
            lr: 1e-3,
            tol: 1e-9,
            seed: 0,
        }
    }
}

/// Mean squared entry error of reconstructing D through P.
pub fn projection_mse(diff: &Mat, p: &Mat) -> f64 {
    let z = diff.matmul_t(p);
    let recon = z.matmul(p);
    let r = diff.sub(&recon);
    let f = r.frobenius_norm();
    f * f / (diff.rows() * diff.cols()) as f64
}

/// ∇_P MSE(D_b, D_b PᵀP) = −2/(B·d) · P (RᵀD_b + D_bᵀR), computed without
/// forming any d×d intermediate.
fn projection_grad(batch: &Mat, p: &Mat) -> Mat {
    let z = batch.matmul_t(p); // B×2
    let recon = z.matmul(p); // B×d
    let r = batch.sub(&recon);
    let mut term = p.matmul_t(&r).matmul(batch); // (2×B)(B×d)
    term.add_assign(&p.matmul_t(batch).matmul(&r));
    term.scale(-2.0 / (batch.rows() * batch.cols()) as f64);
    term
}

fn orthonormalize_rows(p: &mut Mat) {
    let n1 = norm2(p.row(0));
    if n1 > 0.0 {
        for v in p.row_mut(0) {
            *v /= n1;
        }
    }
    let proj = dot(p.row(0), p.row(1));
    let row0: Vec<f64> = p.row(0).to_vec();
    for (v, r0) in p.row_mut(1).iter_mut().zip(&row0) {
        *v -= proj * r0;
    }
    let n2 = norm2(p.row(1));
    if n2 > 0.0 {
        for v in p.row_mut(1) {
            *v /= n2;
        }
    }
}

/// Fit the learnable 2×d projection by gradient descent on the batched
/// reconstruction MSE. The step size adapts per epoch (grown on improvement,
/// halved and the epoch reverted otherwise), so the full-data objective is
/// non-increasing across epochs. Rows of the returned P are re-orthonormalized.
pub fn fit_learnable_projection(diff: &DifferenceMatrix, opts: &FitOptions) -> Result<DirectionPair> {
    let n = diff.rows();
    let d = diff.dim();
    if n == 0 {
        return Err(Error::EmptyRecord);
    }
    if opts.batch_size == 0 || opts.batch_size > n {
        return Err(Error::InvalidArgument(format!(
            "batch size {} not in 1..={n}",
            opts.batch_size
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut p = Mat::zeros(2, d);
    for v in p.data_mut() {
        *v = gaussian(&mut rng);
    }
    orthonormalize_rows(&mut p);

    let mut lr = opts.lr;
    let mut obj = projection_mse(&diff.data, &p);
    let mut epochs_run = 0;
    let mut overshot = false;
    let order: Vec<usize> = (0..n).collect();
    for _epoch in 0..opts.max_epochs {
        epochs_run += 1;
        // Stream batches of B rows, accumulating the row-weighted gradient so
        // one exact full-data step is applied per epoch; working set stays
        // O(B·d) regardless of n.
        let mut grad = Mat::zeros(2, d);
        for chunk in order.chunks(opts.batch_size) {
            let mut batch = Mat::zeros(chunk.len(), d);
            for (bi, &row) in chunk.iter().enumerate() {
                batch.row_mut(bi).copy_from_slice(diff.data.row(row));
            }
            let mut part = projection_grad(&batch, &p);
            part.scale(chunk.len() as f64 / n as f64);
            grad.add_assign(&part);
        }
        let backup = p.clone();
        {
            let step = lr;
            let (pd, gd) = (p.data_mut(), grad.data());
            for (pv, gv) in pd.iter_mut().zip(gd) {
                *pv -= step * gv;
            }
        }
        let new_obj = projection_mse(&diff.data, &p);
        if new_obj > obj {
            // bold driver: revert and retry smaller
            p = backup;
            lr *= 0.5;
            overshot = true;
            if lr < 1e-18 {
                break;
            }
            continue;
        }
        let improvement = obj - new_obj;
        obj = new_obj;
        lr *= 1.1;
        // Relative stall only signals convergence once lr has overshot at
        // least once; during the initial growth phase tiny improvements just
        // mean the step is still too small.
        if improvement <= opts.tol * obj && (overshot || improvement == 0.0) {
            break;
        }
    }

    orthonormalize_rows(&mut p);
    let final_obj = projection_mse(&diff.data, &p);
    let b1 = p.row(0).to_vec();
    let b2 = p.row(1).to_vec();
    Ok(DirectionPair::new(
        b1,
        b2,
        ProjectionMethod::Learnable,
        Some(FitStats {
            epochs: epochs_run,
            final_objective: final_obj,
        }),
    ))
}

/// Project p into the plane through Θ*: inner products when the basis is
/// orthonormal (defect < 1e−10), otherwise the 2×2 normal equations.
pub fn project_point(
    p: &FlatParams,
    theta_star: &FlatParams,
    dirs: &DirectionPair,
) -> Result<Projection2D> {
    if p.dim() != theta_star.dim() || p.dim() != dirs.dim() {
        return Err(Error::DimensionMismatch(
            "project_point: point/origin/basis dims differ".into(),
        ));
    }
    let diff: Vec<f64> = p
        .values
        .iter()
        .zip(&theta_star.values)
        .map(|(a, b)| a - b)
        .collect();
    project_difference(&diff, dirs)
}

pub(crate) fn project_difference(diff: &[f64], dirs: &DirectionPair) -> Result<Projection2D> {
    let (x, y) = if dirs.orthonormality_defect < 1e-10 {
        (dot(diff, &dirs.b1), dot(diff, &dirs.b2))
    } else {
        let g11 = dot(&dirs.b1, &dirs.b1);
        let g12 = dot(&dirs.b1, &dirs.b2);
        let g22 = dot(&dirs.b2, &dirs.b2);
        let det = g11 * g22 - g12 * g12;
        if det.abs() <= 1e-15 * (g11 * g22).max(1e-300) {
            return Err(Error::DegenerateBasis(
                "b1 and b2 are parallel (singular Gram matrix)".into(),
            ));
        }
        let r1 = dot(&dirs.b1, diff);
        let r2 = dot(&dirs.b2, diff);
        ((g22 * r1 - g12 * r2) / det, (g11 * r2 - g12 * r1) / det)
    };
    let mut residual = 0.0;
    for i in 0..diff.len() {
        residual += (diff[i] - x * dirs.b1[i] - y * dirs.b2[i]).abs();
    }
    Ok(Projection2D {
        x,
        y,
        residual_l1: residual,
    })
}

/// Per-row and total l1 reconstruction error of projecting every snapshot
/// difference onto the basis.
pub fn reconstruction_error_l1(
    diff: &DifferenceMatrix,
    dirs: &DirectionPair,
) -> Result<(Vec<f64>, f64)> {
    let mut per_row = Vec::with_capacity(diff.rows());
    for i in 0..diff.rows() {
        per_row.push(project_difference(diff.data.row(i), dirs)?.residual_l1);
    }
    let total = per_row.iter().sum();
    Ok((per_row, total))
}
