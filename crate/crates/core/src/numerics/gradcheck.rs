//! Central finite differences for checking analytic gradients.

use crate::error::Result;
use crate::numerics::tensor::Tensor;

pub const DEFAULT_STEP: f64 = 1e-5;

/// Denominator floor; only guards the both-zero case.
const FLOOR: f64 = 1e-8;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// Coordinate `(tensor index, flat element index)` into a parameter list.
pub type Coord = (usize, usize);

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for each requested coordinate.
/// `params` is restored exactly after every probe.
pub fn central_differences<F>(mut f: F, params: &mut [Tensor], coords: &[Coord], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[Tensor]) -> Result<f64>,
{
    let mut out = Vec::with_capacity(coords.len());
    for &(t, i) in coords {
        let orig = params[t].data()[i];
        params[t].data_mut()[i] = orig + h;
        let plus = f(params)?;
        params[t].data_mut()[i] = orig - h;
        let minus = f(params)?;
        params[t].data_mut()[i] = orig;
        out.push((plus - minus) / (2.0 * h));
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_relative_error: f64,
    /// Coordinate and values at the worst error.
    pub worst: Option<(Coord, f64, f64)>,
}

/// Compares `analytic` gradients against central differences of `f` on `coords`.
pub fn check<F>(f: F, params: &mut [Tensor], analytic: &[Tensor], coords: &[Coord], h: f64) -> Result<GradCheckReport>
where
    F: FnMut(&[Tensor]) -> Result<f64>,
{
    let numeric = central_differences(f, params, coords, h)?;
    let mut report = GradCheckReport {
        checked: coords.len(),
        max_relative_error: 0.0,
        worst: None,
    };
    for (&(t, i), &n) in coords.iter().zip(&numeric) {
        let a = analytic[t].data()[i];
        let err = relative_error(a, n);
        if err > report.max_relative_error || report.worst.is_none() {
            report.max_relative_error = report.max_relative_error.max(err);
            report.worst = Some(((t, i), a, n));
        }
    }
    Ok(report)
}
