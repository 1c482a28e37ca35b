//! Reference version ordering and a corpus of version strings.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Seg {
    // Declared first so that digits sort before text.
    Num(u128),
    Text(Vec<u8>),
}

fn parse(s: &str) -> Vec<Seg> {
    s.split(['.', '-'])
        .map(|seg| {
            if !seg.is_empty() && seg.bytes().all(|b| b.is_ascii_digit()) {
                Seg::Num(seg.parse().expect("corpus numbers fit in u128"))
            } else {
                Seg::Text(seg.as_bytes().to_vec())
            }
        })
        .collect()
}

/// Segment-list comparison via derived orderings.
pub fn reference_compare(a: &str, b: &str) -> Ordering {
    parse(a).cmp(&parse(b))
}

const WORDS: &[&str] = &["rc", "rc1", "rc2", "beta", "alpha", "el8", "el9", "post", "dev", "a", "b", "x86"];

pub fn random_version<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(1..=5);
    let mut out = String::new();
    for i in 0..n {
        if i > 0 {
            out.push(if rng.gen_bool(0.8) { '.' } else { '-' });
        }
        match rng.gen_range(0..10) {
            0..=5 => out.push_str(&rng.gen_range(0..20u32).to_string()),
            6 => out.push_str(&format!("{:03}", rng.gen_range(0..20u32))),
            7 => out.push_str(&rng.gen_range(0..u64::MAX).to_string()),
            8 => out.push_str(WORDS.choose(rng).unwrap()),
            _ => out.push_str(&format!("{}{}", rng.gen_range(0..10), WORDS.choose(rng).unwrap())),
        }
    }
    out
}

/// `n` version strings; a few fixed edge cases first, then random ones.
pub fn corpus<R: Rng>(rng: &mut R, n: usize) -> Vec<String> {
    let mut out: Vec<String> = [
        "1", "1.0", "1.0.0", "1-0", "01", "1.007", "9", "10", "5a", "1.10", "1.9a", "4.18.0-305.el8",
        "4.18.0", "4.9.2", "2.el8", "10.el8", "1.0-rc1", "1.0-rc2", "11.4", "11.0",
        "99999999999999999999999", "100000000000000000000000", "1..2", "1.", "-1",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    while out.len() < n {
        out.push(random_version(rng));
    }
    out.truncate(n);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_examples() {
        assert_eq!(reference_compare("4.18.0", "4.9.2"), Ordering::Greater);
        assert_eq!(reference_compare("4.18", "4.18.0"), Ordering::Less);
        assert_eq!(reference_compare("1.007", "1.7"), Ordering::Equal);
        assert_eq!(reference_compare("10", "5a"), Ordering::Less);
    }
}
