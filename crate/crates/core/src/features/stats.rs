use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Eight-number summary of a series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StatSummary<T> {
    pub total: T,
    pub min: T,
    pub max: T,
    pub mean: T,
    /// Population standard deviation.
    pub std: T,
    pub q25: T,
    pub q50: T,
    pub q75: T,
}

impl<T: Scalar> StatSummary<T> {
    pub fn zero() -> Self {
        let z = T::zero();
        StatSummary {
            total: z,
            min: z,
            max: z,
            mean: z,
            std: z,
            q25: z,
            q50: z,
            q75: z,
        }
    }
}

/// Linear-interpolation quantile of an ascending, non-empty slice.
pub(crate) fn quantile_sorted<T: Scalar>(sorted: &[T], q: f64) -> T {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::of(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Summarizes a series; the empty series summarizes to all zeros.
pub fn stat_summary<T: Scalar>(series: &[T]) -> StatSummary<T> {
    if series.is_empty() {
        return StatSummary::zero();
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = T::of(series.len() as f64);
    let total: T = series.iter().copied().sum();
    let mean = total / n;
    let var = series.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    StatSummary {
        total,
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        mean,
        std: var.sqrt(),
        q25: quantile_sorted(&sorted, 0.25),
        q50: quantile_sorted(&sorted, 0.5),
        q75: quantile_sorted(&sorted, 0.75),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn three_values() {
        let s = stat_summary(&[100.0, 200.0, 300.0]);
        assert_eq!(s.total, 600.0);
        assert_eq!((s.min, s.max, s.mean, s.q50), (100.0, 300.0, 200.0, 200.0));
        assert_relative_eq!(s.std, (20000.0f64 / 3.0).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(s.std, 81.6497, epsilon = 1e-4);
        assert_eq!((s.q25, s.q75), (150.0, 250.0));
    }

    #[test]
    fn singleton_and_empty() {
        let s = stat_summary(&[5.0f32]);
        for v in [s.total, s.min, s.max, s.mean, s.q25, s.q50, s.q75] {
            assert_eq!(v, 5.0);
        }
        assert_eq!(s.std, 0.0);
        assert_eq!(stat_summary::<f64>(&[]), StatSummary::zero());
    }

    proptest! {
        #[test]
        fn ordered_fields(xs in prop::collection::vec(-1e6f64..1e6, 1..50)) {
            let s = stat_summary(&xs);
            prop_assert!(s.min <= s.q25 && s.q25 <= s.q50 && s.q50 <= s.q75 && s.q75 <= s.max);
            prop_assert!(s.std >= 0.0);
        }
    }
}
