//! Dense tensors and the reverse-mode tape used to train the network.
//!
//! Everything is generic over [`Real`] so the exact same graph code can be
//! replayed in `f64` when verifying gradients against finite differences.
//! Training and inference run in `f32`.

mod kernels;
mod tape;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use crate::error::{Error, Result};

pub use kernels::{conv1d_backward, conv1d_forward, gemm, linear_backward, linear_forward};
pub use tape::{Gradients, NodeId, Tape};

/// Scalar type usable by the tensor core.
pub trait Real:
    num_traits::Float
    + rustfft::FftNum
    + Default
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// `c ← alpha·a·b + beta·c` over strided row/column layouts.
    ///
    /// # Safety
    /// The strides and dimensions must address memory inside the pointed-to
    /// buffers (see `matrixmultiply::sgemm`).
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn lit(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("literal fits the scalar type")
    }

    fn as_f64(self) -> f64 {
        <Self as num_traits::ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

impl Real for f64 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

/// Maximum rank a [`Tensor`] may have: features × channels × sequence.
pub const MAX_RANK: usize = 3;

/// Row-major array of up to three dimensions with an optional gradient slot.
///
/// For 1-D convolution the layout is `(features, channels)`, i.e. each row
/// holds all channels of one time sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
    grad: Option<Vec<T>>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if shape.is_empty() || shape.len() > MAX_RANK {
            return Err(Error::Shape(format!("rank {} not in 1..={MAX_RANK}", shape.len())));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!("shape {shape:?} needs {expected} values, got {}", data.len())));
        }
        Ok(Self { shape: shape.to_vec(), data, grad: None })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self::new(shape, vec![T::zero(); len]).expect("zeros shape is valid")
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        let len = shape.iter().product();
        Self::new(shape, vec![value; len]).expect("full shape is valid")
    }

    /// 1-D tensor.
    pub fn vector(data: Vec<T>) -> Self {
        let n = data.len();
        Self { shape: vec![n], data, grad: None }
    }

    /// `(features, 1)` column, the layout of a mono audio frame.
    pub fn column(data: Vec<T>) -> Self {
        let n = data.len();
        Self { shape: vec![n, 1], data, grad: None }
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

    /// Leading dimension (number of features / time samples).
    pub fn features(&self) -> usize {
        self.shape[0]
    }

    /// Channel count; 1 for vectors.
    pub fn channels(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    pub fn grad_mut(&mut self) -> &mut [T] {
        let len = self.data.len();
        self.grad.get_or_insert_with(|| vec![T::zero(); len])
    }

    /// Adds `g` into the gradient slot, creating it if absent.
    pub fn accumulate_grad(&mut self, g: &[T]) -> Result<()> {
        if g.len() != self.data.len() {
            return Err(Error::Shape(format!("gradient of {} values for tensor {:?}", g.len(), self.shape)));
        }
        for (slot, v) in self.grad_mut().iter_mut().zip(g) {
            *slot += *v;
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    pub fn reshaped(mut self, shape: &[usize]) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != self.data.len() || shape.is_empty() || shape.len() > MAX_RANK {
            return Err(Error::Shape(format!("cannot view {:?} as {shape:?}", self.shape)));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect(), grad: None }
    }

    /// Converts to another scalar type, dropping any gradient.
    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(), grad: None }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::NonFinite(format!("{what}: element {i} is {}", self.data[i]))),
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Filter bank of one 1-D convolution layer: weights `(K, C_in, C_out)`,
/// bias `(C_out)` and a dilation rate.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvKernel<T = f32> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
    pub dilation: usize,
}

impl<T: Real> ConvKernel<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>, dilation: usize) -> Result<Self> {
        if weights.rank() != 3 {
            return Err(Error::Shape(format!("conv weights must be (K, C_in, C_out), got {:?}", weights.shape())));
        }
        let (k, _, c_out) = (weights.shape[0], weights.shape[1], weights.shape[2]);
        if k % 2 == 0 {
            return Err(Error::InvalidConfig(format!("kernel size {k} must be odd")));
        }
        if dilation == 0 {
            return Err(Error::InvalidConfig("dilation must be >= 1".into()));
        }
        if bias.shape() != [c_out] {
            return Err(Error::Shape(format!("bias {:?} does not match C_out={c_out}", bias.shape())));
        }
        Ok(Self { weights, bias, dilation })
    }

    pub fn zeros(k: usize, c_in: usize, c_out: usize, dilation: usize) -> Result<Self> {
        Self::new(Tensor::zeros(&[k, c_in, c_out]), Tensor::zeros(&[c_out]), dilation)
    }

    pub fn kernel_size(&self) -> usize {
        self.weights.shape[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape[2]
    }

    /// Number of input samples one output sample depends on.
    pub fn receptive_field(&self) -> usize {
        (self.kernel_size() - 1) * self.dilation + 1
    }

    pub fn cast<U: Real>(&self) -> ConvKernel<U> {
        ConvKernel { weights: self.weights.cast(), bias: self.bias.cast(), dilation: self.dilation }
    }
}
