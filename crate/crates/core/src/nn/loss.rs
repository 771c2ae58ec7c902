use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(scores: &Tensor) -> Tensor {
    let mut out = scores.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        row.iter_mut().for_each(|v| *v /= z);
    }
    out
}

/// `log Σ exp(row)` computed stably.
pub fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Mean over rows of `−log softmax(scores)[target]`, and its gradient
/// `(softmax − onehot) / B`.
pub fn softmax_cross_entropy(scores: &Tensor, targets: &[usize]) -> Result<(f64, Tensor)> {
    let (b, c) = (scores.rows(), scores.cols());
    if targets.len() != b {
        return Err(Error::Shape {
            left: scores.shape().to_vec(),
            right: vec![targets.len()],
            context: "scores vs targets",
        });
    }
    if !scores.all_finite() {
        return Err(Error::Numeric("non-finite scores".into()));
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= c) {
        return Err(Error::Config(format!("target {t} outside [0, {c})")));
    }
    let mut grad = softmax_rows(scores);
    let mut loss = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        let row = scores.row(i);
        loss += log_sum_exp(row) - row[t];
        grad.row_mut(i)[t] -= 1.0;
    }
    let bf = b as f64;
    grad.scale(1.0 / bf);
    Ok((loss / bf, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_two_class_is_ln2() {
        let (l, _) = softmax_cross_entropy(&Tensor::matrix(1, 2, vec![0.3, 0.3]), &[1]).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn hand_value() {
        let (l, _) = softmax_cross_entropy(&Tensor::matrix(1, 2, vec![1.0, 0.0]), &[0]).unwrap();
        assert!((l - (1.0 + (-1f64).exp()).ln()).abs() < 1e-15);
        assert!((l - 0.3133).abs() < 1e-4);
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let s = Tensor::matrix(2, 3, vec![0.1, -2.0, 3.0, 1.0, 1.0, 0.5]);
        let (_, g) = softmax_cross_entropy(&s, &[2, 0]).unwrap();
        for i in 0..2 {
            assert!(g.row(i).iter().sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_scores_rejected() {
        let s = Tensor::matrix(1, 2, vec![f64::NAN, 0.0]);
        assert!(softmax_cross_entropy(&s, &[0]).is_err());
    }

    #[test]
    fn large_scores_do_not_overflow() {
        let s = Tensor::matrix(1, 2, vec![1000.0, 0.0]);
        let (l, g) = softmax_cross_entropy(&s, &[0]).unwrap();
        assert!(l.is_finite() && l >= 0.0);
        assert!(g.all_finite());
    }
}
