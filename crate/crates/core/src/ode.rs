//! Adaptive Dormand–Prince 5(4) integrator for matrix-valued ODEs.

use crate::error::{Error, Result};
use crate::scalar::CMatrix;

/// Step-size control settings.
#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen from the first output interval when `None`.
    pub h_init: Option<f64>,
    /// Smallest admissible step before giving up.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, h_init: None, h_min: 1e-12, max_steps: 5_000_000 }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(y: &CMatrix<f64>, terms: &[(f64, &CMatrix<f64>)], h: f64) -> CMatrix<f64> {
    let mut out = y.clone();
    for (c, k) in terms {
        if *c != 0.0 {
            out += *k * num_complex::Complex64::new(h * c, 0.0);
        }
    }
    out
}

fn error_norm(err: &CMatrix<f64>, y0: &CMatrix<f64>, y1: &CMatrix<f64>, rtol: f64, atol: f64) -> f64 {
    let n = err.len() as f64;
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1.iter()))
        .map(|(e, (a, b))| {
            let sc = atol + rtol * a.norm().max(b.norm());
            (e.norm() / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

/// Integrates `dy/dt = f(t, y)` from `(t0, y0)` and returns `y` at each of
/// `t_out`, which must be non-decreasing and not before `t0`. Steps are
/// clipped to land exactly on output times.
pub fn integrate<F>(mut f: F, t0: f64, y0: CMatrix<f64>, t_out: &[f64], opts: OdeOptions) -> Result<Vec<CMatrix<f64>>>
where
    F: FnMut(f64, &CMatrix<f64>) -> Result<CMatrix<f64>>,
{
    if t_out.first().is_some_and(|&t| t < t0) || t_out.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidGrid("output times must be non-decreasing and start at or after t0".into()));
    }
    let mut out = Vec::with_capacity(t_out.len());
    let mut t = t0;
    let mut y = y0;
    let span = t_out.last().map(|&e| e - t0).unwrap_or(0.0);
    let mut h = opts.h_init.unwrap_or_else(|| {
        let first = t_out.iter().find(|&&s| s > t0).map(|&s| s - t0).unwrap_or(span);
        (first.min(span) * 0.1).clamp(1e-6, 0.01)
    });
    let mut k1 = f(t, &y)?;
    let mut steps = 0usize;
    for &target in t_out {
        while t < target {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::StiffnessFailure { t, h });
            }
            let last = target - t <= h * (1.0 + 1e-12);
            let hs = if last { target - t } else { h };
            let k2 = f(t + C2 * hs, &axpy(&y, &[(A21, &k1)], hs))?;
            let k3 = f(t + C3 * hs, &axpy(&y, &[(A31, &k1), (A32, &k2)], hs))?;
            let k4 = f(t + C4 * hs, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], hs))?;
            let k5 = f(t + C5 * hs, &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], hs))?;
            let k6 = f(t + hs, &axpy(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], hs))?;
            let y_new = axpy(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], hs);
            let k7 = f(t + hs, &y_new)?;
            let zero = CMatrix::<f64>::zeros(y.nrows(), y.ncols());
            let err = axpy(&zero, &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)], hs);
            let en = error_norm(&err, &y, &y_new, opts.rtol, opts.atol);
            if !en.is_finite() {
                h = hs * 0.1;
                if h < opts.h_min {
                    return Err(Error::StiffnessFailure { t, h });
                }
                continue;
            }
            let factor = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
            if en <= 1.0 {
                t = if last { target } else { t + hs };
                y = y_new;
                k1 = k7;
                if !last || factor < 1.0 {
                    h = hs * factor;
                }
            } else {
                h = hs * factor.min(1.0);
                if h < opts.h_min {
                    return Err(Error::StiffnessFailure { t, h });
                }
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn exponential_decay() {
        let y0 = CMatrix::<f64>::from_element(1, 1, Complex64::new(1.0, 0.0));
        let ts: Vec<f64> = (0..=10).map(|k| k as f64 * 0.5).collect();
        let ys = integrate(|_, y| Ok(y * Complex64::new(-1.3, 2.0)), 0.0, y0, &ts, OdeOptions::default()).unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            let exact = (Complex64::new(-1.3, 2.0) * t).exp();
            assert!((y[(0, 0)] - exact).norm() < 1e-9);
        }
    }

    #[test]
    fn time_dependent_rhs() {
        // y' = cos(t) y, y = exp(sin t).
        let y0 = CMatrix::<f64>::from_element(1, 1, Complex64::new(1.0, 0.0));
        let ys = integrate(|t, y| Ok(y * Complex64::new(t.cos(), 0.0)), 0.0, y0, &[3.0], OdeOptions::default()).unwrap();
        assert!((ys[0][(0, 0)].re - 3.0f64.sin().exp()).abs() < 1e-9);
    }

    #[test]
    fn blow_up_is_reported() {
        // y' = y², finite-time singularity at t = 1.
        let y0 = CMatrix::<f64>::from_element(1, 1, Complex64::new(1.0, 0.0));
        let r = integrate(|_, y| Ok(y.component_mul(y)), 0.0, y0, &[2.0], OdeOptions::default());
        assert!(matches!(r, Err(Error::StiffnessFailure { .. })));
    }
}
