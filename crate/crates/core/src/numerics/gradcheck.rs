//! Central finite-difference gradient checks.

use super::rng::SeededRng;

/// Smallest denominator of the relative error, so coordinates whose true
/// gradient is numerically zero are judged on absolute error.
pub const REL_ERR_FLOOR: f64 = 1e-6;

/// Rounding error of one loss evaluation, in units of `eps * |loss|`.
const ROUNDING_ULPS: f64 = 64.0;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Coordinate with the largest error.
    pub worst_index: usize,
    pub checked: usize,
    /// Denominator floor actually used.
    pub floor: f64,
    pub pass: bool,
}

/// `|a - n| / max(|a|, |n|, REL_ERR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    relative_error_floored(analytic, numeric, REL_ERR_FLOOR)
}

pub fn relative_error_floored(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(floor);
    (analytic - numeric).abs() / denom
}

/// Compares `analytic` against central differences of `loss` at `params`.
///
/// Checks every coordinate when there are at most `max_coords` of them,
/// otherwise a uniform random subset of `max_coords` (at least 100).
///
/// The denominator floor is raised to `noise / tol`, where `noise` is the
/// difference quotient's rounding error `64 eps max(1, |loss|) / h`: a
/// coordinate whose gradient is below what the quotient can resolve is
/// judged on absolute error at the rounding level instead.
pub fn finite_diff_check<F>(
    mut loss: F,
    params: &[f64],
    analytic: &[f64],
    h: f64,
    tol: f64,
    max_coords: usize,
    rng: &mut SeededRng,
) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    let n = params.len();
    let max_coords = max_coords.max(100);
    let coords: Vec<usize> = if n <= max_coords {
        (0..n).collect()
    } else {
        rng.choose(n, max_coords)
    };

    let base = loss(params);
    let noise = ROUNDING_ULPS * f64::EPSILON * base.abs().max(1.0) / h;
    let floor = REL_ERR_FLOOR.max(noise / tol);
    let mut work = params.to_vec();
    let mut max_rel_err = 0.0f64;
    let mut worst_index = 0;
    for &i in &coords {
        let orig = work[i];
        work[i] = orig + h;
        let plus = loss(&work);
        work[i] = orig - h;
        let minus = loss(&work);
        work[i] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let err = relative_error_floored(analytic[i], numeric, floor);
        if err > max_rel_err || err.is_nan() {
            max_rel_err = err;
            worst_index = i;
        }
    }
    GradCheckReport {
        max_rel_err,
        worst_index,
        checked: coords.len(),
        floor,
        pass: max_rel_err <= tol,
    }
}
