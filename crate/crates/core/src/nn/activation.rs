use crate::tensor::Tensor;

pub fn relu_forward(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Subgradient at exactly zero is taken as 0.
pub fn relu_backward(x: &Tensor, d_out: &Tensor) -> Tensor {
    let data = x
        .data()
        .iter()
        .zip(d_out.data())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::from_vec(x.shape().to_vec(), data).expect("same shape")
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_forward_clamps_negatives() {
        let y = relu_forward(&Tensor::vector(vec![-1., 0., 2.]));
        assert_eq!(y.data(), &[0., 0., 2.]);
    }

    #[test]
    fn relu_backward_zero_at_zero() {
        let x = Tensor::vector(vec![-1., 0., 2.]);
        let g = relu_backward(&x, &Tensor::vector(vec![1., 1., 1.]));
        assert_eq!(g.data(), &[0., 0., 1.]);
    }

    #[test]
    fn sigmoid_is_stable_for_large_inputs() {
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }
}
