//! Central-difference Hessians and their spectra.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};

/// Central-difference Hessian of `f` at `x` with per-coordinate steps `h`,
/// symmetrized by averaging with its transpose.
pub fn numerical_hessian<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: &[f64]) -> Result<DMatrix<f64>> {
    let n = x.len();
    if h.len() != n {
        return Err(Error::Domain("step vector length differs from the point".into()));
    }
    if h.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain("finite-difference steps must be > 0".into()));
    }
    let eval = |p: &[f64]| -> Result<f64> {
        let v = f(p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { point: p.to_vec() })
        }
    };
    let f0 = eval(x)?;
    let mut hm = DMatrix::zeros(n, n);
    let mut p = x.to_vec();
    for i in 0..n {
        p[i] = x[i] + h[i];
        let fp = eval(&p)?;
        p[i] = x[i] - h[i];
        let fm = eval(&p)?;
        p[i] = x[i];
        hm[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| -> Result<f64> {
                p[i] = x[i] + si * h[i];
                p[j] = x[j] + sj * h[j];
                let v = eval(&p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)?
                + corner(-1.0, -1.0)?)
                / (4.0 * h[i] * h[j]);
            hm[(i, j)] = v;
            hm[(j, i)] = v;
        }
    }
    Ok((&hm + hm.transpose()) * 0.5)
}

/// Steps `1e-4 × scale` per coordinate.
pub fn default_steps(scale: &[f64]) -> Vec<f64> {
    scale.iter().map(|s| 1e-4 * s).collect()
}

pub fn eigenvalues(h: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn max_eigenvalue(h: &DMatrix<f64>) -> f64 {
    eigenvalues(h).last().copied().unwrap_or(f64::NEG_INFINITY)
}
