//! Exact-arithmetic workbench for the work function algorithm (WFA) on the
//! k-server problem over small finite metric spaces.
//!
//! Everything is computed with scaled integer arithmetic: a space carries a
//! positive `scale`, and all distances, work function values and potentials
//! are integers equal to `scale` times the reported quantity. This makes
//! support sets, minimizer sets and potential comparisons exact.

pub mod metric;
pub mod potential;
pub mod taxi;
pub mod wfa;
pub mod workfn;

pub use metric::{Configuration, MetricSpace, PointId, SpaceKind, WeightedTree};
pub use workfn::{ConfigSpace, SupportSet, WorkFunction};

/// Scaled exact value (distance, work function value, potential).
pub type Dist = i64;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("inexact value under scale {scale}: {what} (try a scale divisible by {hint})")]
    InexactScale { what: String, scale: i64, hint: i64 },
    #[error("configuration size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("point {0} is not on the space")]
    UnknownPoint(String),
    #[error("operation unsupported for k = {k}: {why}")]
    UnsupportedK { k: usize, why: String },
    #[error("space has no total antipode map; apply the antipodal extension first")]
    NeedsAntipodes,
    #[error("operation requires a circle space")]
    NotACircle,
    #[error("step budget of {bound} exceeded")]
    BudgetExceeded { bound: u64 },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn binom(n: i64, k: i64) -> i64 {
    if k < 0 || k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut num = 1i64;
    for i in 0..k {
        num = num * (n - i) / (i + 1);
    }
    num
}

/// Formats a scaled value as a decimal in original units, e.g. 13/2 -> "6.5".
pub fn fmt_scaled(value: Dist, scale: i64) -> String {
    debug_assert!(scale > 0);
    let neg = value < 0;
    let v = value.abs();
    let whole = v / scale;
    let rem = v % scale;
    let sign = if neg { "-" } else { "" };
    if rem == 0 {
        return format!("{sign}{whole}");
    }
    // Render the fractional part with enough digits to be exact when the
    // scale divides a power of ten, falling back to a rational otherwise.
    let mut digits = String::new();
    let mut r = rem;
    for _ in 0..9 {
        r *= 10;
        digits.push(char::from(b'0' + (r / scale) as u8));
        r %= scale;
        if r == 0 {
            return format!("{sign}{whole}.{digits}");
        }
    }
    format!("{sign}{value}/{scale}")
}

/// Parses a decimal like "6.5" into a scaled integer, rejecting values that
/// are not exactly representable under the scale.
pub fn parse_scaled(text: &str, scale: i64) -> Result<Dist> {
    let err = |_| Error::UnknownPoint(text.to_string());
    let (sign, body) = match text.strip_prefix('-') {
        Some(rest) => (-1i64, rest),
        None => (1i64, text),
    };
    let (whole, frac) = match body.split_once('.') {
        Some((w, f)) => (w, f),
        None => (body, ""),
    };
    let whole: i64 = if whole.is_empty() {
        0
    } else {
        whole.parse().map_err(err)?
    };
    if frac.is_empty() {
        return Ok(sign * whole * scale);
    }
    if frac.len() > 9 || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::UnknownPoint(text.to_string()));
    }
    let den = 10i64.pow(frac.len() as u32);
    let num: i64 = frac.parse().map_err(err)?;
    let scaled_num = (whole * den + num) * scale;
    if scaled_num % den != 0 {
        return Err(Error::InexactScale {
            what: text.to_string(),
            scale,
            hint: den / gcd(den, scale.max(1)),
        });
    }
    Ok(sign * scaled_num / den)
}

pub(crate) fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binom_small_values() {
        assert_eq!(binom(5, 2), 10);
        assert_eq!(binom(10, 3), 120);
        assert_eq!(binom(3, 0), 1);
        assert_eq!(binom(2, 3), 0);
    }

    #[test]
    fn scaled_roundtrip() {
        assert_eq!(fmt_scaled(13, 2), "6.5");
        assert_eq!(fmt_scaled(-13, 2), "-6.5");
        assert_eq!(fmt_scaled(8, 2), "4");
        assert_eq!(parse_scaled("6.5", 2).unwrap(), 13);
        assert_eq!(parse_scaled("4", 2).unwrap(), 8);
        assert!(parse_scaled("6.5", 1).is_err());
        assert_eq!(parse_scaled("0.25", 4).unwrap(), 1);
    }
}
