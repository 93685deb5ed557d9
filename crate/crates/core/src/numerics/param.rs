use super::{Matrix, Real};

/// A trainable tensor together with its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T = f32> {
    pub value: Matrix<T>,
    pub grad: Matrix<T>,
}

impl<T: Real> Param<T> {
    pub fn new(value: Matrix<T>) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Self { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::ZERO);
    }
}

/// Anything that owns named parameters.
///
/// Visit order is fixed for a given structure, which is what optimizers and
/// checkpoints key on.
pub trait Parameterized<T: Real> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<T>));
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>));

    fn zero_grads(&mut self) {
        self.visit_params_mut(&mut |_, p| p.zero_grad());
    }

    /// Copy of every parameter value, in visit order.
    fn snapshot(&self) -> Vec<Matrix<T>> {
        let mut out = Vec::new();
        self.visit_params(&mut |_, p| out.push(p.value.clone()));
        out
    }

    /// Restore values taken by [`Parameterized::snapshot`].
    fn restore(&mut self, values: &[Matrix<T>]) {
        let mut it = values.iter();
        self.visit_params_mut(&mut |_, p| {
            let v = it.next().expect("snapshot matches the parameter layout");
            p.value.as_mut_slice().copy_from_slice(v.as_slice());
        });
    }

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, p| n += p.value.len());
        n
    }
}
