use rand::Rng;

use super::params::{join, ParamKind, Parameters};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Affine map `y = xW + b` with `W: Din×Dout`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    /// Glorot-normal weights, zero bias.
    pub fn new<R: Rng + ?Sized>(din: usize, dout: usize, rng: &mut R) -> Self {
        let std = (2.0 / (din + dout) as f64).sqrt();
        Self {
            weight: Tensor::randn(&[din, dout], std, rng),
            bias: Tensor::zeros(&[dout]),
        }
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Result<Self> {
        if weight.shape().len() != 2 || bias.len() != weight.cols() {
            return Err(Error::Shape {
                left: weight.shape().to_vec(),
                right: bias.shape().to_vec(),
                context: "linear weight vs bias",
            });
        }
        Ok(Self { weight, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        linear_forward(x, &self.weight, &self.bias)
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &Tensor, d_out: &Tensor, grad: &mut Linear) -> Tensor {
        let (dx, dw, db) = linear_backward(x, &self.weight, d_out);
        grad.weight.add_assign(&dw);
        grad.bias.add_assign(&db);
        dx
    }
}

impl Parameters for Linear {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor, ParamKind)) {
        f(&join(prefix, "weight"), &self.weight, ParamKind::Trainable);
        f(&join(prefix, "bias"), &self.bias, ParamKind::Trainable);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, ParamKind)) {
        f(
            &join(prefix, "weight"),
            &mut self.weight,
            ParamKind::Trainable,
        );
        f(&join(prefix, "bias"), &mut self.bias, ParamKind::Trainable);
    }
}

pub fn linear_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    if x.cols() != w.rows() {
        return Err(Error::Shape {
            left: x.shape().to_vec(),
            right: w.shape().to_vec(),
            context: "linear input vs weight",
        });
    }
    if b.len() != w.cols() {
        return Err(Error::Shape {
            left: w.shape().to_vec(),
            right: b.shape().to_vec(),
            context: "linear weight vs bias",
        });
    }
    let mut y = x.matmul(w);
    let bias = b.data();
    for i in 0..y.rows() {
        for (v, bb) in y.row_mut(i).iter_mut().zip(bias) {
            *v += bb;
        }
    }
    Ok(y)
}

/// Returns `(dx, dW, db)`.
pub fn linear_backward(x: &Tensor, w: &Tensor, d_out: &Tensor) -> (Tensor, Tensor, Tensor) {
    let dx = d_out.matmul_t(w);
    let dw = x.t_matmul(d_out);
    let db = {
        let mut s = d_out.mean_rows();
        s.scale(d_out.rows() as f64);
        s
    };
    (dx, dw, db)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weight_passes_input_through() {
        let x = Tensor::matrix(1, 2, vec![1., 2.]);
        let w = Tensor::matrix(2, 2, vec![1., 0., 0., 1.]);
        let y = linear_forward(&x, &w, &Tensor::zeros(&[2])).unwrap();
        assert_eq!(y.data(), &[1., 2.]);
    }

    #[test]
    fn hand_product_with_bias() {
        let x = Tensor::matrix(1, 2, vec![1., 1.]);
        let w = Tensor::matrix(2, 2, vec![2., 3., 4., 5.]);
        let y = linear_forward(&x, &w, &Tensor::vector(vec![1., 1.])).unwrap();
        assert_eq!(y.data(), &[7., 9.]);
    }

    #[test]
    fn mismatch_names_both_shapes() {
        let x = Tensor::zeros(&[1, 3]);
        let w = Tensor::zeros(&[2, 2]);
        let err = linear_forward(&x, &w, &Tensor::zeros(&[2])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[1, 3]") && msg.contains("[2, 2]"), "{msg}");
    }
}
