//! Fitting bound constants and rate exponents to measured errors.
//!
//! The O- and G-bounds are linear in the square roots of their constants,
//! so both fits are nonnegative least squares over at most three columns:
//!
//! - O: `y = a (beta T)^(-1/2) + b beta^(1/2) + c [dynamic] eta^(1/2)`
//!   with `a = sqrt(c_I)`, `b = sqrt(mu_g mu_l^2 / 2)`, `c = 3 mu_l^2 / sqrt(2)`.
//! - G: `y = 8 G sqrt(T/D) + sqrt(V) D^(-1/2)`.
//! - C (dynamic runs): `y = p/(eta T) + q sqrt(beta/eta) + r eta` with
//!   `r = 3 mu_l^4`, an estimate of `mu_l` that does not go through the O fit.

use serde::{Deserialize, Serialize};

use super::bounds::BoundConstants;
use crate::error::{MopsError, Result};

/// Time-averaged errors of one training run and the settings it ran at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunObservation {
    pub dynamic: bool,
    pub t: f64,
    pub beta: f64,
    pub eta: f64,
    pub d: f64,
    pub o_err: Option<f64>,
    pub g_err: Option<f64>,
    #[serde(default)]
    pub c_err: Option<f64>,
}

/// Raw NNLS coefficients behind a [`ConstantsFit`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FitCoefficients {
    pub sqrt_c_i: f64,
    pub b: f64,
    pub c: f64,
    pub eight_g: f64,
    pub sqrt_v: f64,
    /// C fit: `1/(eta T)`, `sqrt(beta/eta)` and `eta` coefficients.
    pub c_inv: f64,
    pub c_ratio: f64,
    pub c_eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsFit {
    pub constants: BoundConstants,
    pub coefficients: FitCoefficients,
    /// Whether `mu_l` (and hence the split of `b` into `mu_g`, `mu_l`) was identified.
    pub mu_l_identified: bool,
    pub g_identified: bool,
    /// `mu_l` implied by the C fit, when dynamic runs carry C-errors.
    pub mu_l_from_c: Option<f64>,
    /// Root of the summed squared residuals of the O fit.
    pub residual_o: f64,
    pub residual_g: f64,
    pub residual_c: f64,
}

/// Fits [`BoundConstants`] to observed run averages.
///
/// Needs at least three O observations whose design has full column rank.
/// `mu_l` is only identifiable when dynamic runs are present; without them it
/// is reported as 0 and `mu_l_identified` is false. G constants are fitted
/// when at least two G observations with full-rank design are present.
pub fn fit_constants(runs: &[RunObservation]) -> Result<ConstantsFit> {
    let o_runs: Vec<&RunObservation> = runs.iter().filter(|r| r.o_err.is_some()).collect();
    if o_runs.len() < 3 {
        return Err(MopsError::invalid(format!(
            "need at least 3 runs with O-error, got {}",
            o_runs.len()
        )));
    }
    for r in runs {
        for (name, x) in [("T", r.t), ("beta", r.beta), ("D", r.d)] {
            if !(x.is_finite() && x > 0.0) {
                return Err(MopsError::invalid(format!("{name} must be > 0 in every run")));
            }
        }
        if !(r.eta.is_finite() && r.eta >= 0.0) {
            return Err(MopsError::invalid("eta must be >= 0 in every run"));
        }
        for y in [r.o_err, r.g_err, r.c_err].into_iter().flatten() {
            if !(y.is_finite() && y >= 0.0) {
                return Err(MopsError::invalid("observed errors must be finite and >= 0"));
            }
        }
    }
    let any_dynamic = o_runs.iter().any(|r| r.dynamic && r.eta > 0.0);
    let mut cols = vec![
        o_runs.iter().map(|r| (r.beta * r.t).powf(-0.5)).collect::<Vec<_>>(),
        o_runs.iter().map(|r| r.beta.sqrt()).collect(),
    ];
    if any_dynamic {
        cols.push(
            o_runs
                .iter()
                .map(|r| if r.dynamic { r.eta.sqrt() } else { 0.0 })
                .collect(),
        );
    }
    let y: Vec<f64> = o_runs.iter().map(|r| r.o_err.unwrap()).collect();
    check_rank(&cols).map_err(|e| MopsError::invalid(format!("O fit under-determined: {e}")))?;
    let (coef, residual_o) = nnls(&cols, &y)?;

    let mut co = FitCoefficients {
        sqrt_c_i: coef[0],
        b: coef[1],
        c: if any_dynamic { coef[2] } else { 0.0 },
        ..Default::default()
    };
    let mu_l = (co.c * std::f64::consts::SQRT_2 / 3.0).sqrt();
    let mu_g = if mu_l > 0.0 { 2.0 * co.b * co.b / (mu_l * mu_l) } else { 0.0 };

    let g_runs: Vec<&RunObservation> = runs.iter().filter(|r| r.g_err.is_some()).collect();
    let g_cols = vec![
        g_runs.iter().map(|r| (r.t / r.d).sqrt()).collect::<Vec<_>>(),
        g_runs.iter().map(|r| r.d.powf(-0.5)).collect(),
    ];
    let (g_identified, residual_g) = if g_runs.len() >= 2 && check_rank(&g_cols).is_ok() {
        let gy: Vec<f64> = g_runs.iter().map(|r| r.g_err.unwrap()).collect();
        let (gc, res) = nnls(&g_cols, &gy)?;
        co.eight_g = gc[0];
        co.sqrt_v = gc[1];
        (true, res)
    } else {
        (false, 0.0)
    };

    let c_runs: Vec<&RunObservation> = runs
        .iter()
        .filter(|r| r.dynamic && r.eta > 0.0 && r.c_err.is_some())
        .collect();
    let c_cols = vec![
        c_runs.iter().map(|r| 1.0 / (r.eta * r.t)).collect::<Vec<_>>(),
        c_runs.iter().map(|r| (r.beta / r.eta).sqrt()).collect(),
        c_runs.iter().map(|r| r.eta).collect(),
    ];
    let (mu_l_from_c, residual_c) = if c_runs.len() >= 3 && check_rank(&c_cols).is_ok() {
        let cy: Vec<f64> = c_runs.iter().map(|r| r.c_err.unwrap()).collect();
        let (cc, res) = nnls(&c_cols, &cy)?;
        co.c_inv = cc[0];
        co.c_ratio = cc[1];
        co.c_eta = cc[2];
        (Some((cc[2] / 3.0).powf(0.25)), res)
    } else {
        (None, 0.0)
    };

    Ok(ConstantsFit {
        constants: BoundConstants {
            c_i: co.sqrt_c_i * co.sqrt_c_i,
            mu_g,
            mu_l,
            g: co.eight_g / 8.0,
            v: co.sqrt_v * co.sqrt_v,
        },
        coefficients: co,
        mu_l_identified: any_dynamic,
        g_identified,
        mu_l_from_c,
        residual_o,
        residual_g,
        residual_c,
    })
}

/// Least-squares slope of `ln(error)` against `ln(T)`.
pub fn fit_rate_slope(series: &[(f64, f64)]) -> Result<f64> {
    Ok(fit_power_law(series)?.0)
}

/// Least-squares `(slope, intercept)` of `ln(error) = intercept + slope ln(T)`.
pub fn fit_power_law(series: &[(f64, f64)]) -> Result<(f64, f64)> {
    if series.len() < 4 {
        return Err(MopsError::invalid(format!("need at least 4 points, got {}", series.len())));
    }
    if series
        .iter()
        .any(|&(t, e)| !(t.is_finite() && e.is_finite() && t > 0.0 && e > 0.0))
    {
        return Err(MopsError::invalid("rate fit needs positive finite T and error values"));
    }
    let n = series.len() as f64;
    let xs: Vec<f64> = series.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = series.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(MopsError::invalid("rate fit needs at least two distinct T values"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Errors when the columns are numerically linearly dependent.
fn check_rank(cols: &[Vec<f64>]) -> Result<()> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for (k, c) in cols.iter().enumerate() {
        let n0 = norm(c);
        if n0 == 0.0 {
            return Err(MopsError::invalid(format!("column {k} is identically zero")));
        }
        let mut v: Vec<f64> = c.iter().map(|x| x / n0).collect();
        for q in &basis {
            let p = dot(&v, q);
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= p * qi;
            }
        }
        let r = norm(&v);
        if r < 1e-9 {
            return Err(MopsError::invalid(format!("column {k} is collinear with earlier columns")));
        }
        basis.push(v.iter().map(|x| x / r).collect());
    }
    Ok(())
}

/// Nonnegative least squares by enumerating active column subsets.
/// Returns coefficients and the residual norm.
fn nnls(cols: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let k = cols.len();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 0u32..(1 << k) {
        let active: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let mut coef = vec![0.0; k];
        if !active.is_empty() {
            let sub: Vec<Vec<f64>> = active.iter().map(|&i| cols[i].clone()).collect();
            let Some(x) = lstsq(&sub, y) else { continue };
            if x.iter().any(|&v| v < 0.0) {
                continue;
            }
            for (&i, v) in active.iter().zip(x) {
                coef[i] = v;
            }
        }
        let res = residual(cols, &coef, y);
        if best.as_ref().is_none_or(|b| res < b.1) {
            best = Some((coef, res));
        }
    }
    best.ok_or_else(|| MopsError::numeric("nonnegative least squares found no solution"))
}

/// Unconstrained least squares by modified Gram-Schmidt QR.
fn lstsq(cols: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let k = cols.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut r = vec![vec![0.0; k]; k];
    for j in 0..k {
        let mut v = cols[j].clone();
        for i in 0..j {
            r[i][j] = dot(&q[i], &v);
            for (vv, qq) in v.iter_mut().zip(&q[i]) {
                *vv -= r[i][j] * qq;
            }
        }
        r[j][j] = norm(&v);
        if r[j][j] <= 1e-12 * norm(&cols[j]).max(f64::MIN_POSITIVE) {
            return None;
        }
        q.push(v.iter().map(|x| x / r[j][j]).collect());
    }
    let qty: Vec<f64> = q.iter().map(|qi| dot(qi, y)).collect();
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| r[i][j] * x[j]).sum();
        x[i] = (qty[i] - s) / r[i][i];
    }
    Some(x)
}

fn residual(cols: &[Vec<f64>], coef: &[f64], y: &[f64]) -> f64 {
    y.iter()
        .enumerate()
        .map(|(n, yn)| {
            let pred: f64 = cols.iter().zip(coef).map(|(c, a)| c[n] * a).sum();
            (yn - pred).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    crate::math::dot(a, b)
}

fn norm(a: &[f64]) -> f64 {
    crate::math::norm(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::RngState;
    use crate::metrics::bounds::{bound_curve, BoundKind, BoundPoint};

    fn synth(c: &BoundConstants) -> Vec<RunObservation> {
        let mut runs = Vec::new();
        for &(t, beta) in &[(200.0, 1e-3), (1000.0, 5e-4), (4000.0, 2e-3), (500.0, 1e-2)] {
            for &(dynamic, eta) in &[(false, 0.0), (true, 0.05), (true, 0.2)] {
                let p = BoundPoint { t, beta, eta, d: 500.0 };
                let kind = if dynamic { BoundKind::ODynamic } else { BoundKind::OStatic };
                runs.push(RunObservation {
                    dynamic,
                    t,
                    beta,
                    eta,
                    d: 500.0,
                    o_err: Some(bound_curve(kind, c, &p).unwrap()),
                    g_err: None,
                    c_err: dynamic.then(|| bound_curve(BoundKind::CDynamic, c, &p).unwrap()),
                });
            }
        }
        for &(t, d) in &[(100.0, 500.0), (1000.0, 500.0), (500.0, 200.0), (500.0, 3200.0)] {
            let p = BoundPoint { t, beta: 1e-3, eta: 0.0, d };
            runs.push(RunObservation {
                dynamic: false,
                t,
                beta: 1e-3,
                eta: 0.0,
                d,
                o_err: None,
                g_err: Some(bound_curve(BoundKind::G, c, &p).unwrap()),
                c_err: None,
            });
        }
        runs
    }

    #[test]
    fn recovers_formula_generated_constants() {
        let truth = BoundConstants { c_i: 2.0, mu_g: 1.5, mu_l: 0.8, g: 0.3, v: 4.0 };
        let fit = fit_constants(&synth(&truth)).unwrap();
        let got = fit.constants;
        for (a, b) in [
            (got.c_i, truth.c_i),
            (got.mu_g, truth.mu_g),
            (got.mu_l, truth.mu_l),
            (got.g, truth.g),
            (got.v, truth.v),
        ] {
            assert!((a - b).abs() <= 0.05 * b, "{a} vs {b}");
        }
        assert!(fit.residual_o >= 0.0 && fit.residual_o < 1e-9);
        assert!(fit.residual_g >= 0.0 && fit.residual_g < 1e-9);
        assert!(fit.mu_l_identified && fit.g_identified);
        let from_c = fit.mu_l_from_c.unwrap();
        assert!((from_c - truth.mu_l).abs() <= 0.05 * truth.mu_l, "{from_c}");
        assert!(fit.residual_c < 1e-9);
    }

    #[test]
    fn zero_errors_fit_zero_constants() {
        let mut runs = synth(&BoundConstants::default());
        for r in &mut runs {
            r.o_err = r.o_err.map(|_| 0.0);
        }
        let fit = fit_constants(&runs).unwrap();
        assert_eq!(fit.constants, BoundConstants::default());
        assert_eq!(fit.residual_o, 0.0);
    }

    #[test]
    fn underdetermined_fits_are_rejected() {
        let runs = synth(&BoundConstants { c_i: 1.0, ..Default::default() });
        assert!(fit_constants(&runs[..2]).is_err());
        // beta = T^(-1/2) makes the two static columns collinear
        let sched: Vec<RunObservation> = [100.0, 400.0, 1600.0, 6400.0]
            .iter()
            .map(|&t: &f64| RunObservation {
                dynamic: false,
                t,
                beta: t.powf(-0.5),
                eta: 0.0,
                d: 1.0,
                o_err: Some(t.powf(-0.25)),
                g_err: None,
                c_err: None,
            })
            .collect();
        assert!(fit_constants(&sched).is_err());
    }

    #[test]
    fn slope_exact_power_law() {
        let s: Vec<(f64, f64)> = [250.0, 500.0, 1000.0, 2000.0, 4000.0]
            .iter()
            .map(|&t: &f64| (t, t.powf(-0.25)))
            .collect();
        assert!((fit_rate_slope(&s).unwrap() + 0.25).abs() < 1e-6);
        let flat: Vec<(f64, f64)> = s.iter().map(|&(t, _)| (t, 0.3)).collect();
        assert!(fit_rate_slope(&flat).unwrap().abs() < 1e-12);
    }

    #[test]
    fn slope_noisy_power_law() {
        let mut rng = RngState::new(5, 0);
        let s: Vec<(f64, f64)> = (1..=10)
            .map(|k| {
                let t = 100.0 * k as f64;
                (t, 3.0 * t.powf(-0.5) * (1.0 + 0.01 * rng.gaussian()))
            })
            .collect();
        assert!((fit_rate_slope(&s).unwrap() + 0.5).abs() < 0.02);
    }

    #[test]
    fn slope_rejects_bad_series() {
        assert!(fit_rate_slope(&[(1.0, 1.0), (2.0, 1.0), (3.0, 1.0)]).is_err());
        assert!(fit_rate_slope(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0), (4.0, 1.0)]).is_err());
        assert!(fit_rate_slope(&[(2.0, 1.0); 4]).is_err());
    }
}
