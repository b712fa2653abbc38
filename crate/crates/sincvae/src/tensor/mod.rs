//! Dense tensors and reverse-mode automatic differentiation.
//!
//! The scope is deliberately small: contiguous row-major tensors, the
//! operation set needed by 1-D convolutional VAEs, and the Adam
//! optimizer. Graphs are define-by-run and rebuilt per minibatch
//! ([`Graph`]); parameters live outside the graph in a [`ParamSet`]
//! and are bound as leaves each step.
//!
//! Everything computes in [`Real`], which is `f64` unless the `f32`
//! feature is enabled. Artifacts on disk are always 64-bit.

mod adam;
mod graph;

pub use adam::{Adam, AdamConfig, ParamSet};
pub use graph::{Graph, NormAxis, Pad, Var};

use crate::error::{Error, Result};

/// Element type for all tensor computation.
#[cfg(not(feature = "f32"))]
pub type Real = f64;
/// Element type for all tensor computation.
#[cfg(feature = "f32")]
pub type Real = f32;

/// Contiguous row-major dense tensor.
///
/// Invariant: `shape.iter().product() == data.len()`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<Real>,
}

impl Tensor {
    /// Builds a tensor, rejecting shape/length disagreement.
    pub fn new(shape: Vec<usize>, data: Vec<Real>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Config(format!(
                "tensor shape {shape:?} implies {expected} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![0.0; n] }
    }

    pub fn full(shape: &[usize], value: Real) -> Self {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![value; n] }
    }

    /// Rank-1 tensor from a vector.
    pub fn from_vec(data: Vec<Real>) -> Self {
        Tensor { shape: vec![data.len()], data }
    }

    /// Shape `[1]` scalar.
    pub fn scalar(value: Real) -> Self {
        Tensor { shape: vec![1], data: vec![value] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
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

    pub fn data(&self) -> &[Real] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Real] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Real> {
        self.data
    }

    /// Sole element of a scalar tensor.
    ///
    /// Panics if `len() != 1`; scalar-ness is a static property at
    /// every call site.
    pub fn item(&self) -> Real {
        assert_eq!(self.data.len(), 1, "item() on non-scalar tensor");
        self.data[0]
    }

    /// Same data under a new shape.
    pub fn reshaped(&self, shape: &[usize]) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(Error::shape("reshape", shape, &self.shape));
        }
        Ok(Tensor { shape: shape.to_vec(), data: self.data.clone() })
    }

    /// Elementwise map into a new tensor.
    pub fn map(&self, f: impl Fn(Real) -> Real) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Rejects NaN/Inf anywhere in the tensor; `context` names the
    /// producing operation for the error message.
    pub fn assert_finite(&self, context: &str) -> Result<()> {
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "{context}: non-finite value {} at flat index {i} (shape {:?})",
                self.data[i], self.shape
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_shape_length_disagreement() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn reshape_preserves_data() {
        let t = Tensor::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let r = t.reshaped(&[2, 2]).unwrap();
        assert_eq!(r.shape(), &[2, 2]);
        assert_eq!(r.data(), t.data());
        assert!(t.reshaped(&[3, 2]).is_err());
    }

    #[test]
    fn assert_finite_reports_index() {
        let mut t = Tensor::zeros(&[4]);
        t.data_mut()[2] = Real::NAN;
        let err = t.assert_finite("unit").unwrap_err();
        assert!(err.to_string().contains("index 2"), "{err}");
    }
}
