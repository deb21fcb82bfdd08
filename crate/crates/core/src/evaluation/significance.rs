//! Paired t-tests with Bonferroni correction.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTTest {
    pub n: usize,
    pub mean_diff: f64,
    /// `None` when the differences have zero variance.
    pub t: Option<f64>,
    pub p: f64,
    pub p_corrected: f64,
    pub significant: bool,
    /// Zero variance of the differences: reported as `p = 1` whatever the
    /// mean difference.
    pub degenerate: bool,
}

/// Two-sided paired t-test of `a - b`. The corrected p-value is
/// `min(1, p * n_comparisons)`; significance is at 0.05 after correction.
pub fn paired_t_test(a: &[f64], b: &[f64], n_comparisons: usize) -> Result<PairedTTest> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            actual: b.len(),
            context: "paired samples".into(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::invalid("paired t-test needs at least two pairs"));
    }
    if n_comparisons < 1 {
        return Err(Error::invalid("n_comparisons must be at least 1"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    // spread at rounding level counts as none
    let scale = diffs.iter().fold(1.0f64, |m, d| m.max(d.abs()));
    let spread = diffs.iter().fold(0.0f64, |m, d| m.max((d - mean).abs()));
    if !(var > 0.0) || spread <= 1e-12 * scale {
        return Ok(PairedTTest {
            n,
            mean_diff: mean,
            t: None,
            p: 1.0,
            p_corrected: 1.0,
            significant: false,
            degenerate: true,
        });
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .map_err(|e| Error::invalid(format!("t distribution: {e}")))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    let p_corrected = (p * n_comparisons as f64).min(1.0);
    Ok(PairedTTest {
        n,
        mean_diff: mean,
        t: Some(t),
        p,
        p_corrected,
        significant: p_corrected < 0.05,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples() {
        let a = [0.1, 0.5, 0.3];
        let r = paired_t_test(&a, &a, 3).unwrap();
        assert!(r.degenerate);
        assert_eq!((r.p, r.significant), (1.0, false));
    }

    #[test]
    fn constant_shift_is_degenerate() {
        let b: Vec<f64> = (0..30).map(|i| i as f64 * 0.01).collect();
        let a: Vec<f64> = b.iter().map(|x| x + 1.0).collect();
        let r = paired_t_test(&a, &b, 1).unwrap();
        assert!(r.degenerate && r.t.is_none());
        assert!((r.mean_diff - 1.0).abs() < 1e-12);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn textbook_pairs() {
        // differences 1, 2, 3, 4, 5: mean 3, sd sqrt(2.5), t = 3 / sqrt(0.5)
        let a = [2.0, 4.0, 6.0, 8.0, 10.0];
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = paired_t_test(&a, &b, 1).unwrap();
        let t = r.t.unwrap();
        assert!((t - 3.0 / 0.5f64.sqrt()).abs() < 1e-9);
        // two-sided p for t = 4.2426 on 4 dof is about 0.01324
        assert!((r.p - 0.013237).abs() < 1e-4, "{}", r.p);
        let r3 = paired_t_test(&a, &b, 3).unwrap();
        assert!((r3.p_corrected - 3.0 * r.p).abs() < 1e-15);
        let big = paired_t_test(&a, &b, 1000).unwrap();
        assert_eq!(big.p_corrected, 1.0);
    }

    #[test]
    fn errors() {
        assert!(paired_t_test(&[1.0], &[2.0], 1).is_err());
        assert!(paired_t_test(&[1.0, 2.0], &[2.0], 1).is_err());
    }
}
