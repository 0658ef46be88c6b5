//! Sample statistics for replicated runs.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean and sample standard deviation; 0 spread for fewer than two values.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    /// Two-sided 95% Student-t interval for the mean; absent below two
    /// samples.
    pub ci95: Option<[f64; 2]>,
}

impl Aggregate {
    pub fn of(xs: &[f64]) -> Self {
        let (mean, std) = mean_std(xs);
        let ci95 = (xs.len() >= 2).then(|| {
            let t = StudentsT::new(0.0, 1.0, (xs.len() - 1) as f64)
                .expect("positive degrees of freedom")
                .inverse_cdf(0.975);
            let half = t * std / (xs.len() as f64).sqrt();
            [mean - half, mean + half]
        });
        Aggregate {
            count: xs.len(),
            mean,
            std,
            ci95,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_interval() {
        let a = Aggregate::of(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(a.mean, 3.0);
        assert!((a.std - 2.5f64.sqrt()).abs() < 1e-12);
        // t(0.975, 4) = 2.7764451...
        let [lo, hi] = a.ci95.unwrap();
        let half = 2.776_445_105_197_8 * a.std / 5f64.sqrt();
        assert!((lo - (3.0 - half)).abs() < 1e-9);
        assert!((hi - (3.0 + half)).abs() < 1e-9);
    }

    #[test]
    fn single_sample_has_no_interval() {
        let a = Aggregate::of(&[7.0]);
        assert_eq!((a.mean, a.std, a.ci95), (7.0, 0.0, None));
    }
}
