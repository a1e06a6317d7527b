//! Unencrypted shaped tensors bridging host data to encryption. Row-major,
//! plain copies; no zero-copy contract with host frameworks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real-valued tensor with row-major layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlainTensor {
    pub data: Vec<f64>,
    pub shape: Vec<usize>,
}

impl PlainTensor {
    pub fn new(data: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if expect != data.len() || shape.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "shape {:?} does not describe {} elements",
                shape,
                data.len()
            )));
        }
        Ok(PlainTensor { data, shape })
    }

    /// Rank-1 tensor.
    pub fn vector(data: Vec<f64>) -> Self {
        let shape = vec![data.len()];
        PlainTensor { data, shape }
    }

    /// Rank-2 tensor from row-major data.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(data, vec![rows, cols])
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        PlainTensor {
            data: vec![0.0; len],
            shape,
        }
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Element of a rank-2 tensor.
    pub fn at2(&self, row: usize, col: usize) -> f64 {
        debug_assert_eq!(self.rank(), 2);
        self.data[row * self.shape[1] + col]
    }

    pub fn require_rank(&self, rank: usize) -> Result<()> {
        if self.rank() != rank {
            return Err(Error::ShapeMismatch(format!(
                "expected rank {rank}, got shape {:?}",
                self.shape
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_must_match_data() {
        assert!(PlainTensor::new(vec![1.0, 2.0, 3.0], vec![2, 2]).is_err());
        let t = PlainTensor::new(vec![1.0, 2.0, 3.0, 4.0], vec![2, 2]).unwrap();
        assert_eq!(t.at2(1, 0), 3.0);
    }

    #[test]
    fn json_round_trip() {
        let t = PlainTensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        let back: PlainTensor = serde_json::from_str(&s).unwrap();
        assert_eq!(t, back);
    }
}
