//! Ordering of dotted version strings as they occur for kernels, distributions
//! and packages (`4.18.0-305.el8`, `11.4`, `2021.3.0`, `rc1`).
//!
//! A version splits on `.` and `-` into segments. Two all-digit segments
//! compare numerically; any other pair of segments compares byte-wise, except
//! that an all-digit segment always sorts before a non-digit one, which keeps
//! the order transitive. When one segment list is a strict prefix of the
//! other, the shorter version is less.

use std::cmp::Ordering;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("version string must not be empty")]
pub struct FormatError;

pub fn compare_versions(a: &str, b: &str) -> Result<Ordering, FormatError> {
    if a.is_empty() || b.is_empty() {
        return Err(FormatError);
    }
    let mut left = segments(a);
    let mut right = segments(b);
    loop {
        match (left.next(), right.next()) {
            (None, None) => return Ok(Ordering::Equal),
            (None, Some(_)) => return Ok(Ordering::Less),
            (Some(_), None) => return Ok(Ordering::Greater),
            (Some(x), Some(y)) => match compare_segment(x, y) {
                Ordering::Equal => continue,
                other => return Ok(other),
            },
        }
    }
}

/// Well-formed version strings are non-empty and free of whitespace.
pub fn is_valid(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || c.is_control())
}

fn segments(s: &str) -> impl Iterator<Item = &str> {
    s.split(['.', '-'])
}

fn is_numeric(seg: &str) -> bool {
    !seg.is_empty() && seg.bytes().all(|b| b.is_ascii_digit())
}

fn compare_segment(x: &str, y: &str) -> Ordering {
    match (is_numeric(x), is_numeric(y)) {
        (true, true) => compare_digits(x, y),
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (false, false) => x.as_bytes().cmp(y.as_bytes()),
    }
}

/// Numeric comparison of arbitrarily long digit runs.
fn compare_digits(x: &str, y: &str) -> Ordering {
    let x = x.trim_start_matches('0');
    let y = y.trim_start_matches('0');
    x.len().cmp(&y.len()).then_with(|| x.cmp(y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_segments_are_not_lexicographic() {
        assert_eq!(compare_versions("4.18.0", "4.9.2"), Ok(Ordering::Greater));
        assert_eq!(compare_versions("10.1", "10.1"), Ok(Ordering::Equal));
        assert_eq!(compare_versions("11.4", "11.0"), Ok(Ordering::Greater));
    }

    #[test]
    fn prefix_is_less() {
        assert_eq!(compare_versions("4.18", "4.18.0"), Ok(Ordering::Less));
        assert_eq!(compare_versions("4.18.0", "4.18.0-305"), Ok(Ordering::Less));
    }

    #[test]
    fn mixed_segments() {
        assert_eq!(compare_versions("1.0-rc1", "1.0-rc2"), Ok(Ordering::Less));
        assert_eq!(compare_versions("2.el8", "10.el8"), Ok(Ordering::Less));
        assert_eq!(compare_versions("1.10", "1.9a"), Ok(Ordering::Less));
        assert_eq!(compare_versions("1.007", "1.7"), Ok(Ordering::Equal));
        assert_eq!(
            compare_versions("99999999999999999999999", "100000000000000000000000"),
            Ok(Ordering::Less)
        );
    }

    #[test]
    fn digit_and_text_ordering_is_transitive() {
        // 9 < 10 numerically; both sort before any text segment.
        assert_eq!(compare_versions("9", "10"), Ok(Ordering::Less));
        assert_eq!(compare_versions("10", "5a"), Ok(Ordering::Less));
        assert_eq!(compare_versions("9", "5a"), Ok(Ordering::Less));
    }

    #[test]
    fn empty_is_format_error() {
        assert_eq!(compare_versions("", "1"), Err(FormatError));
        assert_eq!(compare_versions("1", ""), Err(FormatError));
    }
}
