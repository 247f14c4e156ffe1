//! Scalar types used for shares and transition probabilities.
//!
//! Statistics are count ratios, so any field that can represent `num / den`
//! works. `f64` is the everyday choice; [`Exact`] keeps fractions such as 16/23
//! unrounded.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{Num, ToPrimitive};

/// Exact rational probability.
pub type Exact = Ratio<u64>;

/// A scalar that can hold the ratio of two counts.
pub trait Probability: Num + ToPrimitive + Copy + PartialOrd + Debug {
    /// `num / den`; callers guarantee `den > 0`.
    fn ratio(num: u64, den: u64) -> Self;

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Probability for f64 {
    fn ratio(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }
}

impl Probability for f32 {
    fn ratio(num: u64, den: u64) -> Self {
        (num as f64 / den as f64) as f32
    }
}

impl Probability for Ratio<u64> {
    fn ratio(num: u64, den: u64) -> Self {
        Ratio::new(num, den)
    }
}

/// Renders `num / den` as a percentage with one decimal, rounding half up.
///
/// Integer arithmetic throughout, so `37/194` always prints `19.1%`.
/// A zero denominator renders as `0.0%`.
pub fn percent_display(num: u64, den: u64) -> String {
    if den == 0 {
        return "0.0%".to_string();
    }
    let (num, den) = (num as u128, den as u128);
    let tenths = (2000 * num + den) / (2 * den);
    format!("{}.{}%", tenths / 10, tenths % 10)
}

/// Renders a floating-point fraction as a one-decimal percentage, half up.
pub fn percent_display_f64(fraction: f64) -> String {
    if !fraction.is_finite() {
        return "0.0%".to_string();
    }
    // nudge so values like 0.6955 that land a hair under the half still round up
    let tenths = (fraction * 1000.0 + 0.5 + 1e-9).floor() as i64;
    let sign = if tenths < 0 { "-" } else { "" };
    let tenths = tenths.abs();
    format!("{sign}{}.{}%", tenths / 10, tenths % 10)
}
