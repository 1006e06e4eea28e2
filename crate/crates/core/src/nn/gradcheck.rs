//! Central finite differences for checking back-propagated gradients.

use super::network::{Gradients, Network};
use crate::error::Result;
use crate::scalar::Scalar;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_REL_TOL: f64 = 1e-4;
/// Absolute slack for gradients that are zero up to rounding.
pub const DEFAULT_ABS_FLOOR: f64 = 1e-9;

/// Central-difference estimate of every parameter gradient of `loss`.
pub fn numerical_gradients<T, F>(net: &mut Network<T>, step: f64, mut loss: F) -> Result<Gradients<T>>
where
    T: Scalar,
    F: FnMut(&Network<T>) -> Result<T>,
{
    let h = T::lit(step);
    let two_h = T::lit(2.0 * step);
    let shapes = net.param_shapes();
    let mut tensors = Vec::with_capacity(shapes.len());
    for (t, &len) in shapes.iter().enumerate() {
        let mut g = Vec::with_capacity(len);
        for j in 0..len {
            let orig = net.params()[t][j];
            net.params_mut()[t][j] = orig + h;
            let plus = loss(net)?;
            net.params_mut()[t][j] = orig - h;
            let minus = loss(net)?;
            net.params_mut()[t][j] = orig;
            g.push((plus - minus) / two_h);
        }
        tensors.push(g);
    }
    Ok(Gradients { tensors })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub failures: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// `(tensor, index, analytic, numeric)` of the worst entry.
    pub worst: Option<(usize, usize, f64, f64)>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Relative error `|a - n| / max(|a|, |n|)`, or zero when both sides agree
/// within `abs_floor`.
pub fn relative_error(analytic: f64, numeric: f64, abs_floor: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff <= abs_floor {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs())
}

pub fn compare<T: Scalar>(analytic: &Gradients<T>, numeric: &Gradients<T>, rel_tol: f64, abs_floor: f64) -> GradCheckReport {
    let mut report = GradCheckReport {
        checked: 0,
        failures: 0,
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst: None,
    };
    for (t, (a, n)) in analytic.tensors.iter().zip(&numeric.tensors).enumerate() {
        for (j, (&a, &n)) in a.iter().zip(n).enumerate() {
            let (a, n) = (a.as_f64(), n.as_f64());
            let err = relative_error(a, n, abs_floor);
            report.checked += 1;
            report.max_abs_error = report.max_abs_error.max((a - n).abs());
            if !(err <= rel_tol) {
                report.failures += 1;
            }
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((t, j, a, n));
            }
        }
    }
    report
}
