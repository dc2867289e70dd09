//! Mann-Whitney U rank test, one-tailed.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// The first sample tends to be larger.
    Greater,
    /// The first sample tends to be smaller.
    Less,
}

impl Alternative {
    pub fn flip(self) -> Alternative {
        match self {
            Alternative::Greater => Alternative::Less,
            Alternative::Less => Alternative::Greater,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MwuMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MwuResult {
    /// U counted for the first sample: pairs where it wins, ties as half.
    pub u_a: f64,
    /// U for the second sample; `u_a + u_b = |a| |b|`.
    pub u_b: f64,
    pub p: f64,
    pub method: MwuMethod,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MwuError {
    #[error("both samples need at least one value")]
    EmptySample,
    #[error("samples must be finite")]
    NotFinite,
    #[error("the exact distribution needs tie-free samples")]
    TiesInExact,
}

/// Largest smaller sample for which the exact null distribution is used.
pub const EXACT_MAX: usize = 8;

/// 1-based ranks of `xs`, ties sharing the mean of their positions.
pub fn midranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Tie group sizes of `xs`.
fn ties(xs: &[f64]) -> Vec<usize> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let mut groups = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let run = v[i..].iter().take_while(|x| **x == v[i]).count();
        groups.push(run);
        i += run;
    }
    groups
}

/// Number of arrangements giving each U for samples of sizes n and m: the
/// coefficients of the Gaussian binomial `[n+m choose n]` in q.
pub fn u_counts(n: usize, m: usize) -> Vec<f64> {
    let (k, other) = if n <= m { (n, m) } else { (m, n) };
    let len = k * other + 1;
    let mut poly = vec![0i128; len];
    poly[0] = 1;
    for j in 1..=k {
        // times (1 - q^(other + j)), then divided by (1 - q^j)
        let shift = other + j;
        for u in (shift..len).rev() {
            poly[u] -= poly[u - shift];
        }
        for u in j..len {
            poly[u] += poly[u - j];
        }
    }
    poly.into_iter().map(|c| c as f64).collect()
}

/// Exact when the smaller sample has at most [`EXACT_MAX`] values and there
/// are no ties; normal approximation otherwise.
pub fn mann_whitney_u(a: &[f64], b: &[f64], alternative: Alternative) -> Result<MwuResult, MwuError> {
    mann_whitney_u_with(a, b, alternative, None)
}

/// As [`mann_whitney_u`], optionally forcing the method.
pub fn mann_whitney_u_with(
    a: &[f64],
    b: &[f64],
    alternative: Alternative,
    method: Option<MwuMethod>,
) -> Result<MwuResult, MwuError> {
    if a.is_empty() || b.is_empty() {
        return Err(MwuError::EmptySample);
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(MwuError::NotFinite);
    }
    let (n, m) = (a.len(), b.len());
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&all);
    let rank_sum_a: f64 = ranks[..n].iter().sum();
    let u_a = rank_sum_a - (n * (n + 1)) as f64 / 2.0;
    let u_b = (n * m) as f64 - u_a;
    // The statistic whose large values support the alternative.
    let u = match alternative {
        Alternative::Greater => u_a,
        Alternative::Less => u_b,
    };
    let groups = ties(&all);
    let tied = groups.iter().any(|&t| t > 1);

    let exact = match method {
        Some(MwuMethod::Exact) if tied => return Err(MwuError::TiesInExact),
        Some(MwuMethod::Exact) => true,
        Some(MwuMethod::Normal) => false,
        None => n.min(m) <= EXACT_MAX && !tied,
    };
    if exact {
        let counts = u_counts(n, m);
        let total: f64 = counts.iter().sum();
        let from = u.round() as usize;
        let tail: f64 = counts[from.min(counts.len())..].iter().sum();
        return Ok(MwuResult { u_a, u_b, p: (tail / total).min(1.0), method: MwuMethod::Exact });
    }

    let big_n = (n + m) as f64;
    let mu = (n * m) as f64 / 2.0;
    let tie_term: f64 = groups.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (big_n * (big_n - 1.0));
    let var = (n * m) as f64 / 12.0 * ((big_n + 1.0) - tie_term);
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = (u - mu - 0.5) / var.sqrt();
        Normal::standard().sf(z)
    };
    Ok(MwuResult { u_a, u_b, p: p.clamp(0.0, 1.0), method: MwuMethod::Normal })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let r = mann_whitney_u(&[3.0, 4.0], &[1.0, 2.0], Alternative::Greater).unwrap();
        assert_eq!((r.u_a, r.u_b), (4.0, 0.0));
        assert_eq!(r.method, MwuMethod::Exact);
        assert!((r.p - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn single_tie() {
        let r = mann_whitney_u(&[5.0], &[5.0], Alternative::Greater).unwrap();
        assert_eq!((r.u_a, r.u_b), (0.5, 0.5));
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn gaussian_binomial() {
        assert_eq!(u_counts(2, 2), vec![1.0, 1.0, 2.0, 1.0, 1.0]);
        assert_eq!(u_counts(1, 3), vec![1.0; 4]);
        assert_eq!(u_counts(3, 5).iter().sum::<f64>(), 56.0);
    }

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn empty() {
        assert_eq!(mann_whitney_u(&[], &[1.0], Alternative::Less), Err(MwuError::EmptySample));
    }
}
