//! Mean, median, mode and standard deviation.

use serde::Serialize;

/// Which standard deviation to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Sd {
    /// Divide by n.
    #[default]
    Population,
    /// Divide by n - 1.
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    /// Smallest of the most frequent values.
    pub mode: f64,
    pub sd: f64,
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn sd(xs: &[f64], kind: Sd) -> Option<f64> {
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    match kind {
        Sd::Population => Some((ss / xs.len() as f64).sqrt()),
        Sd::Sample if xs.len() > 1 => Some((ss / (xs.len() - 1) as f64).sqrt()),
        Sd::Sample => Some(0.0),
    }
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Middle value, or the mean of the two middle values.
pub fn median(xs: &[f64]) -> Option<f64> {
    let v = sorted(xs);
    let n = v.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(v[n / 2]),
        _ => Some((v[n / 2 - 1] + v[n / 2]) / 2.0),
    }
}

pub fn mode(xs: &[f64]) -> Option<f64> {
    let v = sorted(xs);
    let mut best: Option<(f64, usize)> = None;
    let mut i = 0;
    while i < v.len() {
        let run = v[i..].iter().take_while(|x| **x == v[i]).count();
        if best.is_none_or(|(_, c)| run > c) {
            best = Some((v[i], run));
        }
        i += run;
    }
    best.map(|(x, _)| x)
}

impl Summary {
    pub fn of(xs: &[f64], kind: Sd) -> Option<Summary> {
        Some(Summary { n: xs.len(), mean: mean(xs)?, median: median(xs)?, mode: mode(xs)?, sd: sd(xs, kind)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_values() {
        let s = Summary::of(&[20.0, 30.0], Sd::Population).unwrap();
        assert_eq!((s.mean, s.sd, s.median, s.mode), (25.0, 5.0, 25.0, 20.0));
        let s = Summary::of(&[20.0, 30.0], Sd::Sample).unwrap();
        assert!((s.sd - 50f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_value_has_zero_spread() {
        let s = Summary::of(&[10.0], Sd::Sample).unwrap();
        assert_eq!((s.mean, s.sd), (10.0, 0.0));
    }

    #[test]
    fn mode_prefers_smallest() {
        assert_eq!(mode(&[5.0, 1.0, 5.0, 1.0, 3.0]), Some(1.0));
        assert_eq!(mode(&[2.0, 7.0, 7.0]), Some(7.0));
        assert_eq!(median(&[4.0, 1.0, 3.0]), Some(3.0));
        assert_eq!(Summary::of(&[], Sd::Population), None);
    }
}
