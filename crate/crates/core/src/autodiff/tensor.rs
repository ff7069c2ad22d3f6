use super::Real;
use crate::{Error, Result};

/// Dense row-major array with optional gradient storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
    grad: Option<Vec<T>>,
    requires_grad: bool,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {numel} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            shape,
            data,
            grad: None,
            requires_grad: false,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![T::zero(); n],
            grad: None,
            requires_grad: false,
        }
    }

    pub fn scalar(v: T) -> Self {
        Self {
            shape: vec![1],
            data: vec![v],
            grad: None,
            requires_grad: false,
        }
    }

    /// A trainable tensor (`requires_grad` set).
    pub fn parameter(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        Ok(Self::new(shape, data)?.requiring_grad(true))
    }

    pub fn requiring_grad(mut self, flag: bool) -> Self {
        self.requires_grad = flag;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
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

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    /// Adds `g` into the gradient buffer, allocating it on first use.
    pub fn accumulate_grad(&mut self, g: &[T]) -> Result<()> {
        if g.len() != self.data.len() {
            return Err(Error::Shape(format!(
                "gradient of {} values for tensor of shape {:?}",
                g.len(),
                self.shape
            )));
        }
        let buf = self.grad.get_or_insert_with(|| vec![T::zero(); g.len()]);
        for (a, &b) in buf.iter_mut().zip(g) {
            *a += b;
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = &mut self.grad {
            g.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    pub(crate) fn data_and_grad_mut(&mut self) -> (&mut [T], Option<&mut Vec<T>>) {
        (&mut self.data, self.grad.as_mut())
    }

    /// Converts element type, keeping shape, gradient and flag.
    pub fn cast<U: Real>(&self) -> Tensor<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::from_f64(x.as_f64())).collect::<Vec<U>>();
        Tensor {
            shape: self.shape.clone(),
            data: conv(&self.data),
            grad: self.grad.as_deref().map(conv),
            requires_grad: self.requires_grad,
        }
    }
}
