//! Lag-polynomial helpers and the partial-autocorrelation
//! reparameterization that keeps AR parts stationary and MA parts
//! invertible during unconstrained optimization.

/// Maps unconstrained reals to coefficients of a stationary AR polynomial
/// `1 - phi_1 L - ... - phi_p L^p`.
pub fn constrain_stationary(unconstrained: &[f64]) -> Vec<f64> {
    let p = unconstrained.len();
    let mut phi = vec![0.0; p];
    let mut prev = vec![0.0; p];
    for k in 0..p {
        let x = unconstrained[k];
        let r = x / (1.0 + x * x).sqrt();
        prev[..k].copy_from_slice(&phi[..k]);
        phi[k] = r;
        for j in 0..k {
            phi[j] = prev[j] - r * prev[k - 1 - j];
        }
    }
    phi
}

/// Partial autocorrelations of an AR polynomial by the step-down
/// recursion, or `None` if the polynomial is not stationary.
pub fn partial_autocorrelations(phi: &[f64]) -> Option<Vec<f64>> {
    let p = phi.len();
    let mut cur = phi.to_vec();
    let mut r = vec![0.0; p];
    for k in (0..p).rev() {
        let rk = cur[k];
        if !(rk.abs() < 1.0) {
            return None;
        }
        r[k] = rk;
        let denom = 1.0 - rk * rk;
        let prev: Vec<f64> = (0..k).map(|j| (cur[j] + rk * cur[k - 1 - j]) / denom).collect();
        cur[..k].copy_from_slice(&prev);
    }
    Some(r)
}

/// Inverse of [`constrain_stationary`].
pub fn unconstrain_stationary(phi: &[f64]) -> Option<Vec<f64>> {
    partial_autocorrelations(phi).map(|r| r.iter().map(|&r| r / (1.0 - r * r).sqrt()).collect())
}

pub fn is_stationary(phi: &[f64]) -> bool {
    partial_autocorrelations(phi).is_some()
}

/// MA polynomial `1 + theta_1 L + ...` is invertible iff `-theta` is a
/// stationary AR coefficient vector.
pub fn is_invertible(theta: &[f64]) -> bool {
    let neg: Vec<f64> = theta.iter().map(|t| -t).collect();
    is_stationary(&neg)
}

pub fn constrain_invertible(unconstrained: &[f64]) -> Vec<f64> {
    constrain_stationary(unconstrained).into_iter().map(|v| -v).collect()
}

pub fn unconstrain_invertible(theta: &[f64]) -> Option<Vec<f64>> {
    let neg: Vec<f64> = theta.iter().map(|t| -t).collect();
    unconstrain_stationary(&neg)
}

fn multiply(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn lag_poly(coefs: &[f64], stride: usize, sign: f64) -> Vec<f64> {
    let mut p = vec![0.0; coefs.len() * stride + 1];
    p[0] = 1.0;
    for (i, c) in coefs.iter().enumerate() {
        p[(i + 1) * stride] = sign * c;
    }
    p
}

/// Expanded AR coefficients `a` of `(1 - sum phi L^i)(1 - sum Phi L^{s i})`
/// written as `u_t = sum a_i u_{t-i} + ...`.
pub fn expand_ar(ar: &[f64], sar: &[f64], period: usize) -> Vec<f64> {
    let prod = multiply(&lag_poly(ar, 1, -1.0), &lag_poly(sar, period.max(1), -1.0));
    trim(prod[1..].iter().map(|c| -c).collect())
}

/// Expanded MA coefficients of `(1 + sum theta L^j)(1 + sum Theta L^{s j})`.
pub fn expand_ma(ma: &[f64], sma: &[f64], period: usize) -> Vec<f64> {
    let prod = multiply(&lag_poly(ma, 1, 1.0), &lag_poly(sma, period.max(1), 1.0));
    trim(prod[1..].to_vec())
}

fn trim(mut v: Vec<f64>) -> Vec<f64> {
    while v.last() == Some(&0.0) {
        v.pop();
    }
    v
}

/// Applies `(1 - L)^d (1 - L^s)^D`.
pub fn difference(x: &[f64], d: usize, seasonal_d: usize, period: usize) -> Vec<f64> {
    let mut out = x.to_vec();
    for _ in 0..seasonal_d {
        out = (period..out.len()).map(|t| out[t] - out[t - period]).collect();
    }
    for _ in 0..d {
        out = (1..out.len()).map(|t| out[t] - out[t - 1]).collect();
    }
    out
}
