//! Projection-method benchmarking: mean wall-time, total ‖r‖₁, and analytic
//! peak-memory estimates (working-set arithmetic, not RSS).

use std::fmt::Write as _;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::projection::{
    fit_learnable_projection, pca_directions, reconstruction_error_l1, DifferenceMatrix,
    FitOptions, PcaMode, ProjectionMethod,
};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: ProjectionMethod,
    pub mean_wall_time_s: f64,
    pub total_residual_l1: f64,
    pub peak_memory_estimate_bytes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub n: usize,
    pub dim: usize,
    pub batch_size: usize,
    pub repeats: usize,
}

/// Dominant working-set size in bytes: the d×d covariance for naive PCA, the
/// n×n Gram matrix for gram PCA, and one B×d batch for the learnable fit.
pub fn memory_estimate_bytes(
    method: ProjectionMethod,
    n: usize,
    d: usize,
    batch_size: usize,
) -> u64 {
    match method {
        ProjectionMethod::PcaNaive => 8 * (d as u64) * (d as u64),
        ProjectionMethod::PcaGram => 8 * (n as u64) * (n as u64),
        ProjectionMethod::Learnable => 8 * (batch_size as u64) * (d as u64),
        ProjectionMethod::Random => 8 * 2 * (d as u64),
    }
}

fn run_method(
    method: ProjectionMethod,
    diff: &DifferenceMatrix,
    batch_size: usize,
) -> Result<f64> {
    let dirs = match method {
        ProjectionMethod::PcaGram => pca_directions(diff, PcaMode::Gram)?,
        ProjectionMethod::PcaNaive => pca_directions(diff, PcaMode::Naive)?,
        ProjectionMethod::Learnable => {
            let opts = FitOptions {
                batch_size,
                ..FitOptions::defaults_for(diff.rows())
            };
            fit_learnable_projection(diff, &opts)?
        }
        ProjectionMethod::Random => {
            return Err(Error::InvalidArgument(
                "random directions are not data-fitted; nothing to bench".into(),
            ))
        }
    };
    let (_, total) = reconstruction_error_l1(diff, &dirs)?;
    Ok(total)
}

/// Time each requested method `repeats` times on the same difference matrix.
/// All methods are deterministic, so ‖r‖₁ is identical across repeats; the
/// wall time is averaged.
pub fn bench_projection_methods(
    diff: &DifferenceMatrix,
    methods: &[ProjectionMethod],
    batch_size: usize,
    repeats: usize,
) -> Result<BenchReport> {
    if repeats < 1 {
        return Err(Error::InvalidArgument("repeats must be >= 1".into()));
    }
    if batch_size < 1 {
        return Err(Error::InvalidArgument("batch size must be >= 1".into()));
    }
    let mut rows = Vec::with_capacity(methods.len());
    for &method in methods {
        let mut total_time = 0.0;
        let mut residual = 0.0;
        for _ in 0..repeats {
            let start = Instant::now();
            residual = run_method(method, diff, batch_size)?;
            total_time += start.elapsed().as_secs_f64();
        }
        rows.push(BenchRow {
            method,
            mean_wall_time_s: total_time / repeats as f64,
            total_residual_l1: residual,
            peak_memory_estimate_bytes: memory_estimate_bytes(
                method,
                diff.rows(),
                diff.dim(),
                batch_size,
            ),
        });
    }
    Ok(BenchReport {
        rows,
        n: diff.rows(),
        dim: diff.dim(),
        batch_size,
        repeats,
    })
}

impl BenchReport {
    /// Locale-independent CSV: `,` separators, `.` decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "method,mean_wall_time_s,total_residual_l1,peak_memory_estimate_bytes\n",
        );
        for row in &self.rows {
            writeln!(
                out,
                "{},{:.9},{:.9},{}",
                row.method,
                row.mean_wall_time_s,
                row.total_residual_l1,
                row.peak_memory_estimate_bytes
            )
            .unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::Mat;

    fn sample_diff() -> DifferenceMatrix {
        // rank-2 synthetic differences
        let n = 8;
        let d = 12;
        let mut data = Vec::new();
        for i in 0..n {
            for j in 0..d {
                let a = (i as f64 + 1.0) * (j as f64 * 0.3).sin();
                let b = (i as f64 * 0.7).cos() * (j as f64 + 1.0) * 0.1;
                data.push(a + b);
            }
        }
        DifferenceMatrix {
            data: Mat::from_vec(n, d, data),
            origin: vec![0.0; d],
        }
    }

    #[test]
    fn report_contains_exactly_requested_methods() {
        let diff = sample_diff();
        let methods = [ProjectionMethod::PcaGram, ProjectionMethod::Learnable];
        let report = bench_projection_methods(&diff, &methods, 4, 2).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.rows[0].method, ProjectionMethod::PcaGram);
        assert_eq!(report.rows[1].method, ProjectionMethod::Learnable);
    }

    #[test]
    fn memory_ratio_is_d_over_b() {
        for (d, b) in [(10_000usize, 16usize), (10_000, 64)] {
            let naive = memory_estimate_bytes(ProjectionMethod::PcaNaive, 50, d, b);
            let learnable = memory_estimate_bytes(ProjectionMethod::Learnable, 50, d, b);
            // ratio d/B need not be an integer (10^4/64 = 156.25); exact in f64
            assert_eq!(naive as f64 / learnable as f64, d as f64 / b as f64);
        }
    }

    #[test]
    fn gram_estimate_uses_n() {
        assert_eq!(
            memory_estimate_bytes(ProjectionMethod::PcaGram, 30, 10_000, 16),
            8 * 30 * 30
        );
    }

    #[test]
    fn csv_has_header_and_rows() {
        let diff = sample_diff();
        let report =
            bench_projection_methods(&diff, &[ProjectionMethod::PcaNaive], 4, 1).unwrap();
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("method,"));
        assert!(lines[1].starts_with("pca-naive,"));
        assert!(!csv.contains(';'), "no locale-dependent separators");
    }

    #[test]
    fn zero_repeats_rejected() {
        let diff = sample_diff();
        assert!(bench_projection_methods(&diff, &[ProjectionMethod::PcaGram], 4, 0).is_err());
    }
}
