use crate::error::{MopsError, Result};

/// Mean squared error and its gradient `2 (pred - label) / dim`.
pub fn mse_loss_and_grad(pred: &[f64], label: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != label.len() || pred.is_empty() {
        return Err(MopsError::invalid(format!(
            "prediction has {} entries, label has {}",
            pred.len(),
            label.len()
        )));
    }
    let n = pred.len() as f64;
    let diff: Vec<f64> = pred.iter().zip(label).map(|(p, y)| p - y).collect();
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    let grad = diff.iter().map(|d| 2.0 * d / n).collect();
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{finite_diff_grad, RngState};

    #[test]
    fn perfect_prediction() {
        let (l, g) = mse_loss_and_grad(&[0.5, -2.0], &[0.5, -2.0]).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn hand_computed() {
        let (l, g) = mse_loss_and_grad(&[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(l, 1.0);
        assert_eq!(g, vec![1.0, 1.0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RngState::new(11, 0);
        for _ in 0..20 {
            let pred: Vec<f64> = (0..5).map(|_| rng.gaussian()).collect();
            let label: Vec<f64> = (0..5).map(|_| rng.gaussian()).collect();
            let (_, g) = mse_loss_and_grad(&pred, &label).unwrap();
            let fd = finite_diff_grad(|p| mse_loss_and_grad(p, &label).unwrap().0, &pred, 1e-5).unwrap();
            for (a, b) in g.iter().zip(&fd) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn mismatch() {
        assert!(mse_loss_and_grad(&[1.0], &[1.0, 2.0]).is_err());
    }
}
