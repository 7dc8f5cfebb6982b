//! Flattened parameter vectors with named segment boundaries. The layout is
//! the contract between model code (which reads segment views), filter
//! normalization (which rescales per segment), and the snapshot file format.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mat::Mat;

/// One named contiguous segment of the flat vector. `cols == 0` marks a plain
/// vector (or scalar when `rows == 1`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        if self.cols == 0 {
            self.rows
        } else {
            self.rows * self.cols
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub segments: Vec<Segment>,
    pub total_dim: usize,
}

impl ParamLayout {
    /// Build from ordered (name, rows, cols) triples; offsets are assigned
    /// contiguously.
    pub fn from_shapes(shapes: &[(String, usize, usize)]) -> Self {
        let mut segments = Vec::with_capacity(shapes.len());
        let mut offset = 0;
        for (name, rows, cols) in shapes {
            let seg = Segment {
                name: name.clone(),
                offset,
                rows: *rows,
                cols: *cols,
            };
            offset += seg.len();
            segments.push(seg);
        }
        ParamLayout {
            segments,
            total_dim: offset,
        }
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    pub fn range(&self, seg: &Segment) -> std::ops::Range<usize> {
        seg.offset..seg.offset + seg.len()
    }
}

/// A point Θ in parameter space, tied to its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatParams {
    pub values: Vec<f64>,
    pub layout: Arc<ParamLayout>,
}

impl FlatParams {
    pub fn zeros(layout: Arc<ParamLayout>) -> Self {
        FlatParams {
            values: vec![0.0; layout.total_dim],
            layout,
        }
    }

    pub fn new(values: Vec<f64>, layout: Arc<ParamLayout>) -> Result<Self> {
        if values.len() != layout.total_dim {
            return Err(Error::LayoutMismatch(format!(
                "vector length {} != layout dim {}",
                values.len(),
                layout.total_dim
            )));
        }
        Ok(FlatParams { values, layout })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Segment view as a matrix (for named weight segments).
    pub fn segment_mat(&self, name: &str) -> Mat {
        let seg = self
            .layout
            .segment(name)
            .unwrap_or_else(|| panic!("no segment named {name}"));
        assert!(seg.cols > 0, "segment {name} is not a matrix");
        Mat::from_vec(
            seg.rows,
            seg.cols,
            self.values[self.layout.range(seg)].to_vec(),
        )
    }

    pub fn segment_slice(&self, name: &str) -> &[f64] {
        let seg = self
            .layout
            .segment(name)
            .unwrap_or_else(|| panic!("no segment named {name}"));
        &self.values[self.layout.range(seg)]
    }

    pub fn segment_scalar(&self, name: &str) -> f64 {
        let s = self.segment_slice(name);
        assert_eq!(s.len(), 1, "segment {name} is not a scalar");
        s[0]
    }
}

/// A named tensor in structured (per-layer) form.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// Flatten structured per-layer tensors in order (layer order, weights before
/// biases, as produced by the model layout builders).
pub fn flatten_params(tensors: &[NamedTensor]) -> FlatParams {
    let shapes: Vec<(String, usize, usize)> = tensors
        .iter()
        .map(|t| (t.name.clone(), t.rows, t.cols))
        .collect();
    let layout = Arc::new(ParamLayout::from_shapes(&shapes));
    let mut values = Vec::with_capacity(layout.total_dim);
    for t in tensors {
        values.extend_from_slice(&t.data);
    }
    FlatParams { values, layout }
}

/// Inverse of [`flatten_params`]: split a flat vector back into named tensors
/// according to a layout.
pub fn unflatten_params(values: &[f64], layout: &ParamLayout) -> Result<Vec<NamedTensor>> {
    if values.len() != layout.total_dim {
        return Err(Error::LayoutMismatch(format!(
            "vector length {} != layout dim {}",
            values.len(),
            layout.total_dim
        )));
    }
    Ok(layout
        .segments
        .iter()
        .map(|seg| NamedTensor {
            name: seg.name.clone(),
            rows: seg.rows,
            cols: seg.cols,
            data: values[layout.range(seg)].to_vec(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_tensors() -> Vec<NamedTensor> {
        vec![
            NamedTensor {
                name: "layer0.weight".into(),
                rows: 2,
                cols: 3,
                data: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            },
            NamedTensor {
                name: "layer0.bias".into(),
                rows: 3,
                cols: 0,
                data: vec![-1.0, 0.0, 1.0],
            },
        ]
    }

    #[test]
    fn round_trip() {
        let tensors = sample_tensors();
        let flat = flatten_params(&tensors);
        assert_eq!(flat.dim(), 9);
        let back = unflatten_params(&flat.values, &flat.layout).unwrap();
        assert_eq!(back, tensors);
    }

    #[test]
    fn offsets_cover_total_dim() {
        let flat = flatten_params(&sample_tensors());
        let sum: usize = flat.layout.segments.iter().map(|s| s.len()).sum();
        assert_eq!(sum, flat.layout.total_dim);
        let mut expected = 0;
        for seg in &flat.layout.segments {
            assert_eq!(seg.offset, expected);
            expected += seg.len();
        }
    }

    #[test]
    fn unflatten_length_mismatch_errors() {
        let flat = flatten_params(&sample_tensors());
        let short = &flat.values[..flat.dim() - 1];
        assert!(unflatten_params(short, &flat.layout).is_err());
    }
}
