use crate::error::{MopsError, Result};

/// Central-difference gradient estimate `(f(x + h e_j) - f(x - h e_j)) / 2h`.
pub fn finite_diff_grad<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(MopsError::invalid(format!("step h must be positive, got {h}")));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let orig = probe[j];
        probe[j] = orig + h;
        let fp = f(&probe);
        probe[j] = orig - h;
        let fm = f(&probe);
        probe[j] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(MopsError::numeric(format!(
                "non-finite function value around coordinate {j}"
            )));
        }
        grad.push((fp - fm) / (2.0 * h));
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squared_norm() {
        let g = finite_diff_grad(|x| x.iter().map(|v| v * v).sum(), &[1.0, 2.0], 1e-5).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-6 && (g[1] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn constant() {
        let g = finite_diff_grad(|_| 7.0, &[0.3, -9.0, 2.0], 1e-3).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn product() {
        let g = finite_diff_grad(|x| x[0] * x[1], &[3.0, 5.0], 1e-5).unwrap();
        assert!((g[0] - 5.0).abs() < 1e-6 && (g[1] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            finite_diff_grad(|_| 0.0, &[1.0], 0.0),
            Err(MopsError::InvalidArgument(_))
        ));
        assert!(matches!(
            finite_diff_grad(|x| if x[0] > 1.0 { f64::NAN } else { x[0] }, &[1.0], 1e-3),
            Err(MopsError::NumericFailure(_))
        ));
    }
}
