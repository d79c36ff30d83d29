//! Decimal rounding of `f64` coordinates, half away from zero.
//!
//! The result is the `f64` nearest to the exactly-rounded decimal, so it is
//! identical on every platform and formats back to at most `decimals`
//! fractional digits.

use thiserror::Error;

pub const MAX_DECIMALS: u32 = 15;
pub const DEFAULT_DECIMALS: u32 = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("decimals must be between 0 and {MAX_DECIMALS}, got {0}")]
pub struct DecimalsOutOfRange(pub u32);

/// Number of fractional digits kept when writing coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrecisionPolicy {
    decimals: u32,
}

impl PrecisionPolicy {
    pub fn new(decimals: u32) -> Result<Self, DecimalsOutOfRange> {
        if decimals > MAX_DECIMALS {
            return Err(DecimalsOutOfRange(decimals));
        }
        Ok(PrecisionPolicy { decimals })
    }

    pub fn decimals(&self) -> u32 {
        self.decimals
    }
}

impl Default for PrecisionPolicy {
    fn default() -> Self {
        PrecisionPolicy {
            decimals: DEFAULT_DECIMALS,
        }
    }
}

const POW10: [f64; 16] = [
    1e0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8, 1e9, 1e10, 1e11, 1e12, 1e13, 1e14, 1e15,
];

/// Rounds `x` to `decimals` fractional digits, ties away from zero.
///
/// `decimals` must be at most [`MAX_DECIMALS`].
pub fn round_half_away(x: f64, decimals: u32) -> f64 {
    assert!(decimals <= MAX_DECIMALS);
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    let p = POW10[decimals as usize];
    let scaled = x * p;
    // Fast path: the scaled product is an exact-enough integer candidate and
    // not near a tie, so `round` cannot be misled by the multiplication error.
    if scaled.abs() < 4_503_599_627_370_496.0 {
        let frac = scaled.abs().fract();
        let slack = 4.0 * f64::EPSILON * scaled.abs().max(1.0);
        if (frac - 0.5).abs() > slack {
            let r = scaled.round() / p;
            return if r == 0.0 { 0.0 } else { r };
        }
    }
    round_exact(x, decimals)
}

/// Slow path on the exact binary expansion of `x`.
fn round_exact(x: f64, decimals: u32) -> f64 {
    // 1074 fractional digits represent any f64 exactly.
    let exact = format!("{:.1074}", x.abs());
    let dot = exact.find('.').expect("fixed notation has a point");
    let keep = dot + 1 + decimals as usize;
    let round_up = exact.as_bytes()[keep] >= b'5';
    let mut digits: Vec<u8> = exact.as_bytes()[..keep]
        .iter()
        .copied()
        .filter(|b| *b != b'.')
        .collect();
    if round_up {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, b'1');
                break;
            }
            i -= 1;
            if digits[i] == b'9' {
                digits[i] = b'0';
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let int_len = digits.len() - decimals as usize;
    let mut text = String::with_capacity(digits.len() + 2);
    if x < 0.0 {
        text.push('-');
    }
    text.push_str(std::str::from_utf8(&digits[..int_len]).unwrap());
    text.push('.');
    text.push_str(std::str::from_utf8(&digits[int_len..]).unwrap());
    let r: f64 = text.parse().expect("decimal text parses");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}
