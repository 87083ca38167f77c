//! Regression with multiplicative seasonal ARMA errors on the differenced
//! series, fitted by exact Gaussian maximum likelihood.
//!
//! For fixed ARMA parameters the likelihood is profiled over the
//! regression coefficients (GLS on the filtered innovations) and the
//! innovation variance, so the simplex only searches the ARMA part, in the
//! unconstrained partial-autocorrelation parameterization.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use super::kalman::{filter, FilterOutput};
use super::ols::{dependent_columns, least_squares};
use super::optim::{nelder_mead, NelderMeadOptions};
use super::poly::{
    constrain_invertible, constrain_stationary, difference, expand_ar, expand_ma, is_invertible, is_stationary,
};
use super::{adjusted_r2, aic, centered_ss, ArimaSpec, Coefficient, Design, ModelFit, ModelKind, OptimizerSummary, TimeSeries, INTERCEPT};
use crate::error::{Error, Result};
use crate::rng::substream;

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Simplex runs: the first from the zero point, the rest jittered
    /// around the best point so far.
    pub restarts: usize,
    pub jitter: f64,
    pub seed: u64,
    pub simplex: NelderMeadOptions,
    /// Compute asymptotic standard errors from a numerical Hessian.
    pub std_errors: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restarts: 5,
            jitter: 0.5,
            seed: 0,
            simplex: NelderMeadOptions::default(),
            std_errors: true,
        }
    }
}

struct ArmaParams {
    ar: Vec<f64>,
    ma: Vec<f64>,
    sar: Vec<f64>,
    sma: Vec<f64>,
}

impl ArmaParams {
    fn flat(&self) -> Vec<f64> {
        [&self.ar[..], &self.ma, &self.sar, &self.sma].concat()
    }
}

struct Profiled {
    loglik: f64,
    beta: Vec<f64>,
    sigma2: f64,
    residuals: Vec<f64>,
}

struct Problem<'a> {
    spec: &'a ArimaSpec,
    w: Vec<f64>,
    regressors: Vec<Vec<f64>>,
}

fn loglik_from(sum_sq_scaled: f64, sum_log_f: f64, m: usize) -> (f64, f64) {
    let sigma2 = sum_sq_scaled / m as f64;
    let ll = -0.5 * m as f64 * ((2.0 * std::f64::consts::PI).ln() + sigma2.ln() + 1.0) - 0.5 * sum_log_f;
    (ll, sigma2)
}

impl Problem<'_> {
    fn unpack(&self, u: &[f64]) -> ArmaParams {
        let s = self.spec;
        let (a, rest) = u.split_at(s.p);
        let (b, rest) = rest.split_at(s.q);
        let (c, d) = rest.split_at(s.seasonal_p);
        ArmaParams {
            ar: constrain_stationary(a),
            ma: constrain_invertible(b),
            sar: constrain_stationary(c),
            sma: constrain_invertible(d),
        }
    }

    fn split_natural<'b>(&self, theta: &'b [f64]) -> (ArmaParams, &'b [f64]) {
        let s = self.spec;
        let (a, rest) = theta.split_at(s.p);
        let (b, rest) = rest.split_at(s.q);
        let (c, rest) = rest.split_at(s.seasonal_p);
        let (d, beta) = rest.split_at(s.seasonal_q);
        (
            ArmaParams {
                ar: a.to_vec(),
                ma: b.to_vec(),
                sar: c.to_vec(),
                sma: d.to_vec(),
            },
            beta,
        )
    }

    fn run_filter(&self, params: &ArmaParams, series: &[&[f64]]) -> Option<FilterOutput> {
        let period = self.spec.period;
        let ar = expand_ar(&params.ar, &params.sar, period);
        let ma = expand_ma(&params.ma, &params.sma, period);
        filter(&ar, &ma, series)
    }

    /// Likelihood maximized over beta and sigma2 for given ARMA parameters.
    fn profile(&self, params: &ArmaParams) -> Option<Profiled> {
        let mut series: Vec<&[f64]> = vec![&self.w];
        series.extend(self.regressors.iter().map(Vec::as_slice));
        let out = self.run_filter(params, &series)?;
        let m = self.w.len();
        let k = self.regressors.len();
        let scale: Vec<f64> = out.f.iter().map(|f| 1.0 / f.sqrt()).collect();
        let beta = if k > 0 {
            let x = DMatrix::from_fn(m, k, |i, j| out.innovations[j + 1][i] * scale[i]);
            let y = DVector::from_fn(m, |i, _| out.innovations[0][i] * scale[i]);
            least_squares(&x, &y)?.0.iter().copied().collect()
        } else {
            vec![]
        };
        let residuals: Vec<f64> = (0..m)
            .map(|i| out.innovations[0][i] - (0..k).map(|j| beta[j] * out.innovations[j + 1][i]).sum::<f64>())
            .collect();
        let ssq: f64 = residuals.iter().zip(&out.f).map(|(e, f)| e * e / f).sum();
        let (loglik, sigma2) = loglik_from(ssq, out.sum_log_f(), m);
        loglik.is_finite().then_some(Profiled {
            loglik,
            beta,
            sigma2,
            residuals,
        })
    }

    /// Likelihood at fixed natural ARMA parameters and beta, profiled over
    /// sigma2 only. Used for the observed information matrix.
    fn loglik_at(&self, theta: &[f64]) -> Option<f64> {
        let (params, beta) = self.split_natural(theta);
        if !(is_stationary(&params.ar) && is_stationary(&params.sar) && is_invertible(&params.ma) && is_invertible(&params.sma)) {
            return None;
        }
        let e: Vec<f64> = (0..self.w.len())
            .map(|i| self.w[i] - self.regressors.iter().zip(beta).map(|(x, b)| b * x[i]).sum::<f64>())
            .collect();
        let out = self.run_filter(&params, &[&e])?;
        let ssq: f64 = out.innovations[0].iter().zip(&out.f).map(|(v, f)| v * v / f).sum();
        let (ll, _) = loglik_from(ssq, out.sum_log_f(), e.len());
        ll.is_finite().then_some(ll)
    }
}

/// Central-difference Hessian.
fn numerical_hessian<F: Fn(&[f64]) -> Option<f64>>(f: F, x: &[f64]) -> Option<DMatrix<f64>> {
    let n = x.len();
    let f0 = f(x)?;
    let h: Vec<f64> = x.iter().map(|v| 1e-4 * v.abs().max(1.0)).collect();
    let mut hess = DMatrix::zeros(n, n);
    let at = |shifts: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(i, s) in shifts {
            y[i] += s;
        }
        f(&y)
    };
    for i in 0..n {
        let fp = at(&[(i, h[i])])?;
        let fm = at(&[(i, -h[i])])?;
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let fpp = at(&[(i, h[i]), (j, h[j])])?;
            let fpm = at(&[(i, h[i]), (j, -h[j])])?;
            let fmp = at(&[(i, -h[i]), (j, h[j])])?;
            let fmm = at(&[(i, -h[i]), (j, -h[j])])?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Some(hess)
}

fn coefficient_names(spec: &ArimaSpec, beta_names: &[String]) -> Vec<String> {
    let mut names = Vec::new();
    names.extend((1..=spec.p).map(|i| format!("ar.L{i}")));
    names.extend((1..=spec.q).map(|i| format!("ma.L{i}")));
    names.extend((1..=spec.seasonal_p).map(|i| format!("ar.S.L{}", i * spec.period)));
    names.extend((1..=spec.seasonal_q).map(|i| format!("ma.S.L{}", i * spec.period)));
    names.extend(beta_names.iter().cloned());
    names
}

/// Fits `y_t = x_t' beta + u_t` where the differenced `u_t` follows the
/// seasonal ARMA model given by `spec`. `exog` columns must align with
/// `series`; an intercept is added automatically when the model is not
/// differenced.
pub fn sarimax_fit(series: &TimeSeries, exog: &Design, spec: &ArimaSpec, opts: &FitOptions) -> Result<ModelFit> {
    spec.validate()?;
    series.validate()?;
    let y = &series.values;
    let n = y.len();
    if exog.n_cols() > 0 && exog.n_rows() != n {
        return Err(Error::InvalidInput(format!("exog has {} rows, series has {n}", exog.n_rows())));
    }
    let spec = spec.clone().with_exog(&exog.names);
    let n_params = spec.n_params();
    if n <= 10 + n_params {
        return Err(Error::InvalidInput(format!(
            "{spec}: series length {n} must exceed 10 + {n_params} parameters"
        )));
    }
    let lost = spec.lost();
    if n <= lost + n_params {
        return Err(Error::InvalidInput(format!("{spec}: too few observations after differencing")));
    }
    let (d, sd, s) = (spec.d, spec.seasonal_d, spec.period);
    let w = difference(y, d, sd, s);
    let mut beta_names = Vec::new();
    let mut regressors = Vec::new();
    if spec.has_intercept() {
        beta_names.push(INTERCEPT.to_string());
        regressors.push(vec![1.0; w.len()]);
    }
    for (name, col) in exog.names.iter().zip(&exog.columns) {
        beta_names.push(name.clone());
        regressors.push(difference(col, d, sd, s));
    }
    let dependent = dependent_columns(&regressors);
    if !dependent.is_empty() {
        return Err(Error::RankDeficient { columns: dependent });
    }
    let problem = Problem {
        spec: &spec,
        w,
        regressors,
    };

    let dim = spec.n_arma();
    let objective = |u: &[f64]| problem.profile(&problem.unpack(u)).map_or(f64::INFINITY, |p| -p.loglik);
    let mut best_u = vec![0.0; dim];
    let mut best_f = f64::INFINITY;
    let mut summary = OptimizerSummary::default();
    let runs = if dim == 0 { 1 } else { opts.restarts.max(1) };
    let mut rng = substream(opts.seed, &format!("sarimax:{spec}"), 0);
    for run in 0..runs {
        let start: Vec<f64> = if run == 0 {
            vec![0.0; dim]
        } else {
            best_u
                .iter()
                .map(|b| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    b + opts.jitter * z
                })
                .collect()
        };
        let res = nelder_mead(objective, &start, &opts.simplex);
        summary.evaluations += res.evaluations;
        summary.converged |= res.converged;
        if res.fx < best_f {
            best_f = res.fx;
            best_u = res.x;
        }
        summary.best_by_restart.push(-best_f);
    }
    if !summary.converged || !best_f.is_finite() {
        return Err(Error::NonConvergence {
            spec: spec.to_string(),
            restarts: runs,
            best_loglik: -best_f,
            best_params: problem.unpack(&best_u).flat(),
            evaluations: summary.evaluations,
        });
    }

    let params = problem.unpack(&best_u);
    let prof = problem
        .profile(&params)
        .expect("best point has a finite likelihood");
    let names = coefficient_names(&spec, &beta_names);
    let theta: Vec<f64> = params.flat().into_iter().chain(prof.beta.iter().copied()).collect();
    let std_errors: Vec<f64> = if opts.std_errors {
        numerical_hessian(|t| problem.loglik_at(t), &theta)
            .and_then(|h| (-h).try_inverse())
            .map(|cov| (0..theta.len()).map(|i| if cov[(i, i)] > 0.0 { cov[(i, i)].sqrt() } else { f64::NAN }).collect())
            .unwrap_or_else(|| vec![f64::NAN; theta.len()])
    } else {
        vec![f64::NAN; theta.len()]
    };
    let normal = Normal::standard();
    let coefficients = names
        .into_iter()
        .zip(theta.iter().zip(&std_errors))
        .map(|(name, (&estimate, &se))| Coefficient {
            name,
            estimate,
            std_error: se,
            p_value: if se.is_finite() && se > 0.0 {
                2.0 * (1.0 - normal.cdf((estimate / se).abs()))
            } else {
                f64::NAN
            },
        })
        .collect();

    let m = problem.w.len();
    let sse: f64 = prof.residuals.iter().map(|e| e * e).sum();
    let k_mean = dim + beta_names.len();
    Ok(ModelFit {
        kind: ModelKind::Sarimax,
        ar: params.ar,
        ma: params.ma,
        sar: params.sar,
        sma: params.sma,
        beta: prof.beta,
        beta_names,
        sigma2: prof.sigma2,
        loglik: prof.loglik,
        aic: aic(n_params, prof.loglik),
        rmse: (sse / m as f64).sqrt(),
        adj_r2: adjusted_r2(sse, centered_ss(&problem.w), m, k_mean),
        residuals: prof.residuals,
        coefficients,
        n_params,
        n_obs: m,
        optimizer: summary,
        spec,
    })
}

/// Exact Gaussian log-likelihood of a zero-mean seasonal ARMA series with
/// the innovation variance concentrated out. `None` if the parameters are
/// not stationary and invertible.
pub fn arma_loglik(y: &[f64], ar: &[f64], ma: &[f64], sar: &[f64], sma: &[f64], period: usize) -> Option<f64> {
    if !(is_stationary(ar) && is_stationary(sar) && is_invertible(ma) && is_invertible(sma)) {
        return None;
    }
    let out = filter(&expand_ar(ar, sar, period), &expand_ma(ma, sma, period), &[y])?;
    let ssq: f64 = out.innovations[0].iter().zip(&out.f).map(|(v, f)| v * v / f).sum();
    Some(loglik_from(ssq, out.sum_log_f(), y.len()).0)
}
