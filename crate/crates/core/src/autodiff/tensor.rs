use num_complex::Complex64;

use crate::error::{Error, Result};

/// Element storage of a [`Tensor`].
#[derive(Clone, Debug, PartialEq)]
pub enum Data {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dtype {
    Real,
    Complex,
}

/// Dense row-major tensor of `f64` or `Complex64` values.
///
/// Tensors are immutable once built; every graph op produces a new one.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Data,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    /// Builds a real tensor from external data, rejecting NaN/Inf.
    pub fn real(shape: &[usize], values: Vec<f64>) -> Result<Self> {
        if numel(shape) != values.len() {
            return Err(Error::Shape { op: "tensor", left: shape.to_vec(), right: vec![values.len()] });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor"));
        }
        Ok(Self { shape: shape.to_vec(), data: Data::Real(values) })
    }

    /// Builds a complex tensor from external data, rejecting NaN/Inf.
    pub fn complex(shape: &[usize], values: Vec<Complex64>) -> Result<Self> {
        if numel(shape) != values.len() {
            return Err(Error::Shape { op: "tensor", left: shape.to_vec(), right: vec![values.len()] });
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("tensor"));
        }
        Ok(Self { shape: shape.to_vec(), data: Data::Complex(values) })
    }

    /// Internal constructor for op results; values are not screened so the
    /// graph can report the first op that produced a non-finite value.
    pub(crate) fn from_real(shape: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(numel(&shape), values.len());
        Self { shape, data: Data::Real(values) }
    }

    pub(crate) fn from_complex(shape: Vec<usize>, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(numel(&shape), values.len());
        Self { shape, data: Data::Complex(values) }
    }

    pub fn scalar(value: f64) -> Self {
        Self::from_real(Vec::new(), vec![value])
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::from_real(shape.to_vec(), vec![0.0; numel(shape)])
    }

    pub fn complex_zeros(shape: &[usize]) -> Self {
        Self::from_complex(shape.to_vec(), vec![Complex64::new(0.0, 0.0); numel(shape)])
    }

    pub(crate) fn zeros_like(&self) -> Self {
        match self.data {
            Data::Real(_) => Self::zeros(&self.shape),
            Data::Complex(_) => Self::complex_zeros(&self.shape),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        numel(&self.shape)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> Dtype {
        match self.data {
            Data::Real(_) => Dtype::Real,
            Data::Complex(_) => Dtype::Complex,
        }
    }

    pub fn data(&self) -> &Data {
        &self.data
    }

    /// Real values; panics on a complex tensor.
    pub fn re(&self) -> &[f64] {
        match &self.data {
            Data::Real(v) => v,
            Data::Complex(_) => panic!("expected a real tensor"),
        }
    }

    /// Complex values; panics on a real tensor.
    pub fn cx(&self) -> &[Complex64] {
        match &self.data {
            Data::Complex(v) => v,
            Data::Real(_) => panic!("expected a complex tensor"),
        }
    }

    pub fn as_real(&self) -> Option<&[f64]> {
        match &self.data {
            Data::Real(v) => Some(v),
            Data::Complex(_) => None,
        }
    }

    pub fn as_complex(&self) -> Option<&[Complex64]> {
        match &self.data {
            Data::Complex(v) => Some(v),
            Data::Real(_) => None,
        }
    }

    pub(crate) fn re_mut(&mut self) -> &mut [f64] {
        match &mut self.data {
            Data::Real(v) => v,
            Data::Complex(_) => panic!("expected a real tensor"),
        }
    }

    pub(crate) fn cx_mut(&mut self) -> &mut [Complex64] {
        match &mut self.data {
            Data::Complex(v) => v,
            Data::Real(_) => panic!("expected a complex tensor"),
        }
    }

    pub fn into_real(self) -> Vec<f64> {
        match self.data {
            Data::Real(v) => v,
            Data::Complex(_) => panic!("expected a real tensor"),
        }
    }

    pub fn into_complex(self) -> Vec<Complex64> {
        match self.data {
            Data::Complex(v) => v,
            Data::Real(_) => panic!("expected a complex tensor"),
        }
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f64 {
        self.re()[0]
    }

    pub fn reshaped(&self, shape: &[usize]) -> Result<Self> {
        if numel(shape) != self.len() {
            return Err(Error::Shape { op: "reshape", left: self.shape.clone(), right: shape.to_vec() });
        }
        Ok(Self { shape: shape.to_vec(), data: self.data.clone() })
    }

    pub fn is_finite(&self) -> bool {
        match &self.data {
            Data::Real(v) => v.iter().all(|x| x.is_finite()),
            Data::Complex(v) => v.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
        }
    }

    /// In-place accumulation used by the backward pass.
    pub(crate) fn accumulate(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        match (&mut self.data, &other.data) {
            (Data::Real(a), Data::Real(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
            (Data::Complex(a), Data::Complex(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
            _ => panic!("gradient dtype mismatch"),
        }
    }
}

/// Splits `shape` around `axis` into (outer, extent, inner) block sizes.
pub(crate) fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_bad_length() {
        assert!(Tensor::real(&[2], vec![1.0, f64::NAN]).is_err());
        assert!(Tensor::real(&[3], vec![1.0, 2.0]).is_err());
        assert!(Tensor::complex(&[1], vec![Complex64::new(f64::INFINITY, 0.0)]).is_err());
        let t = Tensor::real(&[2, 3], vec![0.0; 6]).unwrap();
        assert_eq!(t.len(), 6);
    }

    #[test]
    fn split_axis_blocks() {
        assert_eq!(split_axis(&[2, 3, 4], 1), (2, 3, 4));
        assert_eq!(split_axis(&[5], 0), (1, 5, 1));
    }
}
