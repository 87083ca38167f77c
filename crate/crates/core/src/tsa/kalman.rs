//! Innovations-form Kalman filter for a zero-mean ARMA process in
//! companion (Harvey) state-space form, with unit innovation variance.
//!
//! State dimension is `r = max(p, q + 1)` over the expanded polynomials.
//! The transition matrix is a companion matrix, so the covariance
//! prediction `T P T' + R R'` is done in O(r^2) per step, and the filter
//! stops updating `P` once it has reached its steady state.

use nalgebra::{DMatrix, DVector};

const STEADY_TOL: f64 = 1e-11;

pub(crate) struct StateSpace {
    r: usize,
    /// Transition first column (AR coefficients, zero padded).
    a: Vec<f64>,
    /// Disturbance loading `[1, theta_1, ..]`, zero padded.
    rvec: Vec<f64>,
}

impl StateSpace {
    pub(crate) fn new(ar: &[f64], ma: &[f64]) -> Self {
        let r = ar.len().max(ma.len() + 1);
        let mut a = vec![0.0; r];
        a[..ar.len()].copy_from_slice(ar);
        let mut rvec = vec![0.0; r];
        rvec[0] = 1.0;
        rvec[1..=ma.len()].copy_from_slice(ma);
        StateSpace { r, a, rvec }
    }

    /// `T P T' + R R'` for a symmetric row-major `p`.
    fn predict_cov(&self, p: &[f64], out: &mut [f64]) {
        let r = self.r;
        let p00 = p[0];
        let first = |m: usize| if m < r { p[m] } else { 0.0 };
        for i in 0..r {
            for j in i..r {
                let inner = if i + 1 < r && j + 1 < r { p[(i + 1) * r + j + 1] } else { 0.0 };
                let v = self.a[i] * self.a[j] * p00
                    + self.a[i] * first(j + 1)
                    + self.a[j] * first(i + 1)
                    + inner
                    + self.rvec[i] * self.rvec[j];
                out[i * r + j] = v;
                out[j * r + i] = v;
            }
        }
    }

    /// Stationary state covariance solving `P = T P T' + R R'`.
    ///
    /// Unrolling the companion structure along diagonals expresses every
    /// entry through the first row, which is found from an r x r linear
    /// system.
    pub(crate) fn stationary_cov(&self) -> Option<Vec<f64>> {
        let r = self.r;
        let a = &self.a;
        let q = |i: usize, j: usize| self.rvec[i] * self.rvec[j];
        let mut m = DMatrix::<f64>::zeros(r, r);
        let mut c = DVector::<f64>::zeros(r);
        for j in 0..r {
            m[(j, j)] += 1.0;
            for k in 0..(r - j) {
                m[(j, 0)] -= a[k] * a[j + k];
                if j + k + 1 < r {
                    m[(j, j + k + 1)] -= a[k];
                }
                if k + 1 < r {
                    m[(j, k + 1)] -= a[j + k];
                }
                c[j] += q(k, j + k);
            }
        }
        let f = m.lu().solve(&c)?;
        let mut p = vec![0.0; r * r];
        for i in (0..r).rev() {
            for j in (i..r).rev() {
                let inner = if j + 1 < r { p[(i + 1) * r + j + 1] } else { 0.0 };
                let fj = if j + 1 < r { f[j + 1] } else { 0.0 };
                let fi = if i + 1 < r { f[i + 1] } else { 0.0 };
                let v = a[i] * a[j] * f[0] + a[i] * fj + a[j] * fi + inner + q(i, j);
                p[i * r + j] = v;
                p[j * r + i] = v;
            }
        }
        if !(p[0].is_finite() && p[0] > 0.0) {
            return None;
        }
        Some(p)
    }
}

pub(crate) struct FilterOutput {
    /// One-step prediction errors for each input series.
    pub(crate) innovations: Vec<Vec<f64>>,
    /// Innovation variances (in units of sigma2).
    pub(crate) f: Vec<f64>,
}

impl FilterOutput {
    pub(crate) fn sum_log_f(&self) -> f64 {
        self.f.iter().map(|f| f.ln()).sum()
    }
}

/// Runs the filter over several series sharing one ARMA structure. The
/// innovation variances and gains depend only on the model, so they are
/// computed once and applied to every series.
pub(crate) fn filter(ar: &[f64], ma: &[f64], series: &[&[f64]]) -> Option<FilterOutput> {
    let ss = StateSpace::new(ar, ma);
    let r = ss.r;
    let n = series.first().map_or(0, |s| s.len());
    let mut p = ss.stationary_cov()?;
    let mut p_upd = vec![0.0; r * r];
    let mut p_next = vec![0.0; r * r];
    let mut gain = vec![0.0; r];
    let mut states = vec![vec![0.0; r]; series.len()];
    let mut innovations = vec![Vec::with_capacity(n); series.len()];
    let mut fs = Vec::with_capacity(n);
    let mut steady = false;
    let mut f = p[0];

    for t in 0..n {
        if !steady {
            f = p[0];
            if !(f.is_finite() && f > 1e-12) {
                return None;
            }
            for i in 0..r {
                gain[i] = p[i * r] / f;
            }
        }
        fs.push(f);
        for (k, s) in series.iter().enumerate() {
            let a = &mut states[k];
            let v = s[t] - a[0];
            innovations[k].push(v);
            // update then predict: a <- T (a + K v)
            let a0 = a[0] + gain[0] * v;
            for i in 0..r {
                let next = if i + 1 < r { a[i + 1] + gain[i + 1] * v } else { 0.0 };
                a[i] = ss.a[i] * a0 + next;
            }
        }
        if !steady {
            for i in 0..r {
                for j in 0..r {
                    p_upd[i * r + j] = p[i * r + j] - p[i * r] * p[j * r] / f;
                }
            }
            ss.predict_cov(&p_upd, &mut p_next);
            let delta = p.iter().zip(&p_next).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            std::mem::swap(&mut p, &mut p_next);
            if delta < STEADY_TOL {
                steady = true;
                f = p[0];
                for i in 0..r {
                    gain[i] = p[i * r] / f;
                }
            }
        }
    }
    Some(FilterOutput { innovations, f: fs })
}
