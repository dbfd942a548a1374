//! Ordinary and weighted least squares with an intercept.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::num::sqrt;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitResult {
    /// `[intercept, b_1, ..., b_k]`.
    pub coefficients: Vec<f64>,
    /// Weighted coefficient of determination; 0 when the response has no
    /// variance.
    pub r_squared: f64,
    /// Unweighted residuals `y - X b`, one per observation.
    pub residuals: Vec<f64>,
}

impl FitResult {
    pub fn intercept(&self) -> f64 {
        self.coefficients[0]
    }

    /// First non-intercept coefficient.
    pub fn slope(&self) -> f64 {
        self.coefficients[1]
    }
}

/// Fits `y ≈ b0 + Σ b_j x_j` by (weighted) least squares.
///
/// Solved through a Householder QR of the weighted design so that nearly
/// collinear predictors are detected rather than amplified.
pub fn linear_fit(predictors: &[&[f64]], y: &[f64], weights: Option<&[f64]>) -> Result<FitResult> {
    let n = y.len();
    let k = predictors.len() + 1;
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} observations, need at least 2")));
    }
    if let Some(j) = predictors.iter().position(|x| x.len() != n) {
        return Err(invalid!("predictor {j} has {} values, response has {n}", predictors[j].len()));
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(invalid!("{} weights for {n} observations", w.len()));
        }
        if w.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(invalid!("weights must be finite and non-negative"));
        }
    }
    if y.iter().chain(predictors.iter().flat_map(|x| x.iter())).any(|v| !v.is_finite()) {
        return Err(invalid!("non-finite observation"));
    }
    if n < k {
        return Err(Error::RankDeficient(format!("{k} coefficients from {n} observations")));
    }

    let sw: Vec<f64> = match weights {
        Some(w) => w.iter().map(|&x| sqrt(x)).collect(),
        None => vec![1.0; n],
    };

    // Column-major weighted design and response.
    let mut a: Vec<Vec<f64>> = Vec::with_capacity(k);
    a.push(sw.clone());
    for x in predictors {
        a.push(x.iter().zip(&sw).map(|(v, s)| v * s).collect());
    }
    let mut b: Vec<f64> = y.iter().zip(&sw).map(|(v, s)| v * s).collect();
    let scales: Vec<f64> = a.iter().map(|c| norm(c)).collect();

    let mut r = vec![vec![0.0; k]; k];
    for j in 0..k {
        let col_norm = norm(&a[j][j..]);
        if col_norm <= 1e-10 * scales[j].max(f64::MIN_POSITIVE) {
            return Err(Error::RankDeficient(if j == 0 {
                "all weights are zero".into()
            } else {
                format!("predictor {} is constant or collinear with earlier columns", j - 1)
            }));
        }
        let alpha = if a[j][j] > 0.0 { -col_norm } else { col_norm };
        let mut v: Vec<f64> = a[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        let apply = |col: &mut [f64]| {
            let dot: f64 = col.iter().zip(&v).map(|(c, vv)| c * vv).sum();
            let f = 2.0 * dot / vnorm2;
            for (c, vv) in col.iter_mut().zip(&v) {
                *c -= f * vv;
            }
        };
        for jj in j..k {
            apply(&mut a[jj][j..]);
        }
        apply(&mut b[j..]);
        for jj in j..k {
            r[j][jj] = a[jj][j];
        }
    }

    let mut coef = vec![0.0; k];
    for j in (0..k).rev() {
        let mut acc = b[j];
        for jj in (j + 1)..k {
            acc -= r[j][jj] * coef[jj];
        }
        coef[j] = acc / r[j][j];
    }

    let residuals: Vec<f64> = (0..n)
        .map(|i| {
            let fitted = coef[0] + predictors.iter().zip(&coef[1..]).map(|(x, c)| x[i] * c).sum::<f64>();
            y[i] - fitted
        })
        .collect();

    let w_of = |i: usize| weights.map_or(1.0, |w| w[i]);
    let w_sum: f64 = (0..n).map(w_of).sum();
    let mean = (0..n).map(|i| w_of(i) * y[i]).sum::<f64>() / w_sum;
    let ss_tot: f64 = (0..n).map(|i| w_of(i) * (y[i] - mean) * (y[i] - mean)).sum();
    let ss_res: f64 = (0..n).map(|i| w_of(i) * residuals[i] * residuals[i]).sum();
    let r_squared = if ss_tot <= 0.0 {
        0.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };

    Ok(FitResult {
        coefficients: coef,
        r_squared,
        residuals,
    })
}

/// Single-predictor convenience wrapper.
pub fn simple_fit(x: &[f64], y: &[f64]) -> Result<FitResult> {
    linear_fit(&[x], y, None)
}

fn norm(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|x| x * x).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let f = simple_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((f.slope() - 2.0).abs() < 1e-12);
        assert!((f.intercept() - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(f.residuals.len(), 3);
    }

    #[test]
    fn constant_response_reports_zero_r2() {
        let f = simple_fit(&[0.0, 1.0, 2.0, 3.0], &[4.0; 4]).unwrap();
        assert!(f.slope().abs() < 1e-12);
        assert_eq!(f.r_squared, 0.0);
    }

    #[test]
    fn constant_predictor_is_rank_deficient() {
        let e = simple_fit(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap_err();
        assert!(matches!(e, Error::RankDeficient(_)));
    }

    #[test]
    fn too_few_observations() {
        assert!(matches!(simple_fit(&[1.0], &[1.0]), Err(Error::InsufficientData(_))));
        assert!(simple_fit(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn weights_pull_towards_heavy_points() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [0.0, 1.0, 2.0, 10.0];
        let plain = simple_fit(&x, &y).unwrap();
        let w = linear_fit(&[&x], &y, Some(&[1.0, 1.0, 1.0, 1e-9])).unwrap();
        assert!((w.slope() - 1.0).abs() < 1e-6);
        assert!(plain.slope() > 2.0);
    }

    #[test]
    fn two_predictors_exact() {
        let x1 = [0.0, 1.0, 0.0, 1.0, 2.0];
        let x2 = [0.0, 0.0, 1.0, 1.0, 3.0];
        let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| 0.5 + 2.0 * a - 3.0 * b).collect();
        let f = linear_fit(&[&x1, &x2], &y, None).unwrap();
        assert!((f.coefficients[0] - 0.5).abs() < 1e-12);
        assert!((f.coefficients[1] - 2.0).abs() < 1e-12);
        assert!((f.coefficients[2] + 3.0).abs() < 1e-12);
    }
}
