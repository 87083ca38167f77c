use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{adjusted_r2, aic, centered_ss, gaussian_loglik, ArimaSpec, Coefficient, Design, ModelFit, ModelKind, OptimizerSummary, INTERCEPT};
use crate::error::{Error, Result};

/// Indices of columns that lie (numerically) in the span of the columns
/// before them, found by modified Gram-Schmidt.
pub(crate) fn dependent_columns(columns: &[Vec<f64>]) -> Vec<usize> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for (j, col) in columns.iter().enumerate() {
        let norm0 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut v = col.clone();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= dot * bi;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm0 == 0.0 || norm <= 1e-10 * norm0 {
            dependent.push(j);
        } else {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    dependent
}

pub(crate) fn to_matrix(design: &Design) -> DMatrix<f64> {
    let n = design.n_rows();
    DMatrix::from_fn(n, design.n_cols(), |i, j| design.columns[j][i])
}

/// Least-squares coefficients and the unscaled covariance `(X'X)^-1`.
pub(crate) fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let qr = x.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * y;
    let beta = r.solve_upper_triangular(&qty)?;
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(r.nrows(), r.ncols()))?;
    let cov = &r_inv * r_inv.transpose();
    Some((beta, cov))
}

/// Ordinary least squares of `y` on every column of `x` (include an
/// intercept column explicitly via [`Design::with_intercept`]).
pub fn ols(y: &[f64], x: &Design) -> Result<ModelFit> {
    let n = y.len();
    let k = x.n_cols();
    if x.n_rows() != n && k > 0 {
        return Err(Error::InvalidInput(format!("ols: {} design rows for {} observations", x.n_rows(), n)));
    }
    if n <= k {
        return Err(Error::InvalidInput(format!("ols: need more observations ({n}) than columns ({k})")));
    }
    let dependent = dependent_columns(&x.columns);
    if !dependent.is_empty() {
        return Err(Error::RankDeficient { columns: dependent });
    }
    let xm = to_matrix(x);
    let yv = DVector::from_column_slice(y);
    let (beta, cov) = least_squares(&xm, &yv).ok_or(Error::RankDeficient { columns: vec![] })?;
    let fitted = &xm * &beta;
    let residuals: Vec<f64> = (0..n).map(|i| y[i] - fitted[i]).collect();
    let sse: f64 = residuals.iter().map(|e| e * e).sum();
    let s2 = sse / (n - k) as f64;
    let dof = (n - k) as f64;
    let t = StudentsT::new(0.0, 1.0, dof).expect("positive dof");
    let coefficients = (0..k)
        .map(|j| {
            let se = (s2 * cov[(j, j)]).sqrt();
            let stat = beta[j] / se;
            let p_value = if se > 0.0 { 2.0 * (1.0 - t.cdf(stat.abs())) } else { 0.0 };
            Coefficient {
                name: x.names[j].clone(),
                estimate: beta[j],
                std_error: se,
                p_value,
            }
        })
        .collect();
    let loglik = gaussian_loglik(sse, n);
    let n_params = k + 1;
    let exog: Vec<String> = x.names.iter().filter(|n| *n != INTERCEPT).cloned().collect();
    Ok(ModelFit {
        kind: ModelKind::Ols,
        spec: ArimaSpec::arima(0, 0, 0).with_exog(&exog),
        ar: vec![],
        ma: vec![],
        sar: vec![],
        sma: vec![],
        beta: beta.iter().copied().collect(),
        beta_names: x.names.clone(),
        sigma2: sse / n as f64,
        loglik,
        aic: aic(n_params, loglik),
        rmse: (sse / n as f64).sqrt(),
        adj_r2: adjusted_r2(sse, centered_ss(y), n, k),
        residuals,
        coefficients,
        n_params,
        n_obs: n,
        optimizer: OptimizerSummary {
            evaluations: 0,
            best_by_restart: vec![loglik],
            converged: true,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(cols: Vec<Vec<f64>>) -> Design {
        let names = (0..cols.len()).map(|i| format!("x{i}")).collect();
        Design::new(names, cols).unwrap()
    }

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 + 3.0 * v).collect();
        let fit = ols(&y, &design(vec![x]).with_intercept(10)).unwrap();
        assert!((fit.beta[0] - 2.0).abs() < 1e-12);
        assert!((fit.beta[1] - 3.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|e| e.abs() < 1e-12));
        assert!((fit.adj_r2 - 1.0).abs() < 1e-12);
        assert_eq!(fit.beta_names, vec!["intercept", "x0"]);
    }

    #[test]
    fn orthogonal_response() {
        // y is +-1 alternating, x is a centred ramp repeated so that x.y = 0
        let x = vec![-1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0];
        let y = vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let fit = ols(&y, &design(vec![x]).with_intercept(8)).unwrap();
        assert!(fit.beta[1].abs() < 1e-12);
        assert!(fit.adj_r2 <= 0.0);
    }

    #[test]
    fn collinear_columns_listed() {
        let a: Vec<f64> = (0..6).map(f64::from).collect();
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        let c = vec![1.0, 0.0, 3.0, 1.0, 2.0, 5.0];
        let err = ols(&[1.0, 2.0, 3.0, 4.0, 5.0, 7.0], &design(vec![a, c, b])).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { ref columns } if columns == &vec![2]), "{err}");
    }

    #[test]
    fn aic_consistency() {
        let x: Vec<f64> = (0..20).map(|i| ((i * 37) % 11) as f64).collect();
        let y: Vec<f64> = (0..20).map(|i| ((i * 13) % 7) as f64 + 0.5 * x[i]).collect();
        let fit = ols(&y, &design(vec![x]).with_intercept(20)).unwrap();
        assert_eq!(fit.aic, 2.0 * fit.n_params as f64 - 2.0 * fit.loglik);
        assert_eq!(fit.n_params, 3);
    }
}
