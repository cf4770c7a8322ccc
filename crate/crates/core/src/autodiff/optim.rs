use super::tensor::Tensor;
use crate::error::{domain, Result};

/// A trainable tensor with its gradient accumulator and optimizer moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor<f32>,
    pub grad: Tensor<f32>,
    pub m: Tensor<f32>,
    pub v: Tensor<f32>,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor<f32>) -> Self {
        let z = Tensor::zeros(value.shape());
        Self {
            name: name.into(),
            grad: z.clone(),
            m: z.clone(),
            v: z,
            value,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().fill(0.0);
    }

    pub fn reset_moments(&mut self) {
        self.m.data_mut().fill(0.0);
        self.v.data_mut().fill(0.0);
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OptimizerKind {
    /// Bias-corrected adaptive moments.
    #[default]
    Adam,
    /// Plain gradient descent.
    Sgd,
}

/// Update rule shared by all parameters of a network.
///
/// Adam: `m ← β₁m + (1−β₁)g`, `v ← β₂v + (1−β₂)g²`,
/// `θ ← θ − lr · (m / (1−β₁ᵗ)) / (√(v / (1−β₂ᵗ)) + ε)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub steps: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        Self {
            kind,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
            steps: 0,
        }
    }

    /// Applies one update from the accumulated gradients.
    pub fn step(&mut self, params: &mut [Parameter], lr: f64) -> Result<()> {
        if !(lr > 0.0) {
            return domain(format!("learning rate {lr} must be > 0"));
        }
        self.steps += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for p in params.iter_mut() {
                    for (w, &g) in p.value.data_mut().iter_mut().zip(p.grad.data()) {
                        *w -= (lr * f64::from(g)) as f32;
                    }
                }
            }
            OptimizerKind::Adam => {
                let t = self.steps as i32;
                let c1 = 1.0 - self.beta1.powi(t);
                let c2 = 1.0 - self.beta2.powi(t);
                let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
                let step = (lr / c1) as f32;
                let c2_sqrt = c2.sqrt() as f32;
                let eps = self.eps as f32;
                for p in params.iter_mut() {
                    let Parameter { value, grad, m, v, .. } = p;
                    for (((w, &g), mi), vi) in value
                        .data_mut()
                        .iter_mut()
                        .zip(grad.data())
                        .zip(m.data_mut())
                        .zip(v.data_mut())
                    {
                        *mi = b1 * *mi + (1.0 - b1) * g;
                        *vi = b2 * *vi + (1.0 - b2) * g * g;
                        *w -= step * *mi / (vi.sqrt() / c2_sqrt + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(v: &[f32]) -> Parameter {
        Parameter::new("p", Tensor::new(vec![v.len()], v.to_vec()).unwrap())
    }

    #[test]
    fn zero_gradient_leaves_fresh_parameters() {
        for kind in [OptimizerKind::Adam, OptimizerKind::Sgd] {
            let mut ps = vec![param(&[1.0, -2.0])];
            let mut opt = Optimizer::new(kind);
            opt.step(&mut ps, 1e-3).unwrap();
            assert_eq!(ps[0].value.data(), &[1.0, -2.0]);
        }
    }

    #[test]
    fn one_step_descends_square() {
        for kind in [OptimizerKind::Adam, OptimizerKind::Sgd] {
            let mut ps = vec![param(&[1.0])];
            ps[0].grad.data_mut()[0] = 2.0; // d(θ²)/dθ at 1
            Optimizer::new(kind).step(&mut ps, 1e-2).unwrap();
            let th = ps[0].value.data()[0];
            assert!(th * th < 1.0);
        }
    }

    #[test]
    fn rejects_bad_lr() {
        let mut ps = vec![param(&[1.0])];
        assert!(Optimizer::new(OptimizerKind::Adam).step(&mut ps, 0.0).is_err());
    }
}
