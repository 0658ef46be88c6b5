//! Latency scalar abstraction.
//!
//! Every latency value carries an explicit infinity used for "never
//! arrives" or "unreachable". Integer types use their maximum value as the
//! sentinel, floats use `INFINITY`. Addition saturates at the sentinel.

use num_traits::{Bounded, Float, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt::{Debug, Display};
use std::str::FromStr;

/// Scalar used for latencies, timeouts and scores.
pub trait LatencyScalar:
    Copy + PartialOrd + Debug + Display + FromStr + Zero + Send + Sync + 'static
{
    fn infinity() -> Self;
    fn is_infinite(self) -> bool;
    /// INF-absorbing, saturating addition.
    fn plus(self, other: Self) -> Self;
    fn to_f64(self) -> f64;
    /// Rounds toward zero for integer types; negative inputs clamp to zero.
    fn from_f64(v: f64) -> Self;
    /// `observed > delta * expected`, evaluated exactly for integers.
    fn exceeds(observed: Self, expected: Self, slack: Slack) -> bool;
    fn write_le(self, out: &mut Vec<u8>);

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn total_cmp(&self, other: &Self) -> Ordering {
        self.partial_cmp(other).unwrap_or(Ordering::Equal)
    }
}

/// The delta factor as parts per million, so integer comparisons stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Slack(u64);

impl Slack {
    pub const ONE: Slack = Slack(1_000_000);

    pub fn from_delta(delta: f64) -> Self {
        Slack((delta * 1e6).round().max(0.0) as u64)
    }

    pub fn ppm(self) -> u64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    /// `floor(value * delta)` for integer microseconds; saturates.
    pub fn scale_micros(self, value: u64) -> u64 {
        if value == u64::MAX {
            return u64::MAX;
        }
        let v = value as u128 * self.0 as u128 / 1_000_000;
        u64::try_from(v).unwrap_or(u64::MAX)
    }
}

macro_rules! impl_int_scalar {
    ($($t:ty),*) => {$(
        impl LatencyScalar for $t {
            fn infinity() -> Self {
                <$t as Bounded>::max_value()
            }
            fn is_infinite(self) -> bool {
                self == <$t as Bounded>::max_value()
            }
            fn plus(self, other: Self) -> Self {
                self.saturating_add(other)
            }
            fn to_f64(self) -> f64 {
                if self.is_infinite() {
                    f64::INFINITY
                } else {
                    ToPrimitive::to_f64(&self).unwrap_or(f64::INFINITY)
                }
            }
            fn from_f64(v: f64) -> Self {
                if !v.is_finite() && v > 0.0 {
                    return Self::infinity();
                }
                num_traits::cast::<f64, $t>(v.max(0.0).trunc()).unwrap_or(Self::infinity())
            }
            fn exceeds(observed: Self, expected: Self, slack: Slack) -> bool {
                if expected.is_infinite() {
                    return false;
                }
                if observed.is_infinite() {
                    return true;
                }
                observed as u128 * 1_000_000 > slack.ppm() as u128 * expected as u128
            }
            fn write_le(self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }
        }
    )*};
}

macro_rules! impl_float_scalar {
    ($($t:ty),*) => {$(
        impl LatencyScalar for $t {
            fn infinity() -> Self {
                <$t as Float>::infinity()
            }
            fn is_infinite(self) -> bool {
                Float::is_infinite(self)
            }
            fn plus(self, other: Self) -> Self {
                self + other
            }
            fn to_f64(self) -> f64 {
                self as f64
            }
            fn from_f64(v: f64) -> Self {
                v.max(0.0) as $t
            }
            fn exceeds(observed: Self, expected: Self, slack: Slack) -> bool {
                if Float::is_infinite(expected) {
                    return false;
                }
                observed as f64 > expected as f64 * slack.as_f64()
            }
            fn write_le(self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }
        }
    )*};
}

impl_int_scalar!(u32, u64);
impl_float_scalar!(f32, f64);

/// Parses a latency cell, accepting `inf` for the sentinel.
pub fn parse_latency<T: LatencyScalar>(s: &str) -> Option<T> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("inf") {
        Some(T::infinity())
    } else {
        s.parse().ok()
    }
}

/// Formats a latency cell, writing `inf` for the sentinel.
pub fn format_latency<T: LatencyScalar>(v: T) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        v.to_string()
    }
}

/// The `k`-th smallest value (1-based); INF when fewer than `k` values exist.
pub fn kth_smallest<T: LatencyScalar>(values: &mut [T], k: usize) -> T {
    if k == 0 {
        return T::zero();
    }
    if k > values.len() {
        return T::infinity();
    }
    values.sort_by(|a, b| a.total_cmp(b));
    values[k - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_infinity_absorbs() {
        assert_eq!(u64::infinity().plus(5), u64::infinity());
        assert_eq!(7u64.plus(u64::MAX - 3), u64::MAX);
        assert!(u64::infinity().is_infinite());
        assert!(!u64::MAX.saturating_sub(1).is_infinite());
    }

    #[test]
    fn slack_is_exact_for_integers() {
        let s = Slack::from_delta(1.1);
        assert!(!u64::exceeds(11, 10, s));
        assert!(u64::exceeds(12, 10, s));
        assert!(!u64::exceeds(33, 30, s));
        assert!(u64::exceeds(u64::MAX, 30, s));
        assert!(!u64::exceeds(u64::MAX, u64::MAX, s));
        assert_eq!(s.scale_micros(30), 33);
    }

    #[test]
    fn float_scalar_matches_integer_on_whole_values() {
        let s = Slack::from_delta(1.2);
        for (o, e) in [(12u64, 10u64), (13, 10), (0, 0), (1, 0)] {
            assert_eq!(u64::exceeds(o, e, s), f64::exceeds(o as f64, e as f64, s));
        }
    }

    #[test]
    fn kth_smallest_handles_short_input() {
        let mut v = vec![30u64, 10, 20];
        assert_eq!(kth_smallest(&mut v, 2), 20);
        assert_eq!(kth_smallest(&mut v, 4), u64::MAX);
        assert_eq!(kth_smallest(&mut v, 0), 0);
    }

    #[test]
    fn parse_and_format_round_trip() {
        assert_eq!(parse_latency::<u64>("inf"), Some(u64::MAX));
        assert_eq!(parse_latency::<u64>(" 42 "), Some(42));
        assert_eq!(format_latency(u64::MAX), "inf");
        assert_eq!(format_latency(f64::INFINITY), "inf");
        assert_eq!(parse_latency::<f64>("1.5"), Some(1.5));
    }
}
