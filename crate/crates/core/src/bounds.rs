//! Closed-form latent-dimension bounds and the table of known results.
//!
//! Everything here is exact integer arithmetic; the grid size
//! `s = ceil((d(n-k)+1)^{1/k})` is found by searching for the smallest `s`
//! with `s^k >= d(n-k)+1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_dnk(d: u64, n: u64, k: u64) -> Result<()> {
    if d == 0 || k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "need d >= 1 and 1 <= k < n, got d={d}, n={n}, k={k}"
        )));
    }
    Ok(())
}

fn pow_u128(base: u128, exp: u64) -> Option<u128> {
    base.checked_pow(u32::try_from(exp).ok()?)
}

/// Smallest `s >= 1` with `s^k >= target`.
pub fn smallest_root_ceiling(target: u64, k: u64) -> Result<u64> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let target = u128::from(target);
    // s^k overflowing u128 certainly exceeds any u64 target
    let reaches = |s: u64| pow_u128(u128::from(s), k).is_none_or(|p| p >= target);
    let (mut lo, mut hi) = (1u64, 1u64);
    while !reaches(hi) {
        lo = hi + 1;
        hi = hi.saturating_mul(2);
    }
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if reaches(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(hi)
}

/// Grid size `|G| = ceil((d(n-k)+1)^{1/k})`.
pub fn grid_size(d: u64, n: u64, k: u64) -> Result<u64> {
    check_dnk(d, n, k)?;
    smallest_root_ceiling(tail_dim(d, n, k)? + 1, k)
}

fn tail_dim(d: u64, n: u64, k: u64) -> Result<u64> {
    d.checked_mul(n - k)
        .ok_or_else(|| Error::InvalidParameter("d(n-k) overflows".into()))
}

/// Number of `k`-tuples over an `s`-point grid with at least one zero slot.
pub fn axis_cardinality(s: u64, k: u64) -> Result<u64> {
    if s == 0 {
        return Ok(0);
    }
    let overflow = || Error::InvalidParameter(format!("{s}^{k} overflows"));
    let full = pow_u128(u128::from(s), k).ok_or_else(overflow)?;
    let inner = pow_u128(u128::from(s - 1), k).ok_or_else(overflow)?;
    u64::try_from(full - inner).map_err(|_| overflow())
}

/// Indexed lower bound `ceil(d(n-k) / (s^k - (s-1)^k))`.
pub fn indexed_lower_bound(d: u64, n: u64, k: u64) -> Result<u64> {
    let s = grid_size(d, n, k)?;
    let axis = axis_cardinality(s, k)?;
    Ok(tail_dim(d, n, k)?.div_ceil(axis))
}

/// `min{p, nd}`; `p = None` is the fixed-feature setting, which gives `nd`.
pub fn trivial_bound(d: u64, n: u64, p: Option<u64>) -> Result<u64> {
    if d == 0 || n == 0 || p == Some(0) {
        return Err(Error::InvalidParameter(
            "d, n and p must be positive".into(),
        ));
    }
    let nd = n
        .checked_mul(d)
        .ok_or_else(|| Error::InvalidParameter("nd overflows".into()))?;
    Ok(p.map_or(nd, |p| p.min(nd)))
}

/// Literature source of a known upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpperSource {
    /// `M <= n` for `d = 1, k = 1` (Wagstaff et al.).
    WagstaffD1K1,
    /// `M <= 2nd+1` for `k = 1` (Dym and Gortler).
    DymGortlerK1,
    /// `M = 1` for `k = n` (Murphy et al.).
    MurphyKEqN,
}

impl UpperSource {
    pub fn tag(self) -> &'static str {
        match self {
            UpperSource::WagstaffD1K1 => "wagstaff_d1_k1",
            UpperSource::DymGortlerK1 => "dym_gortler_k1",
            UpperSource::MurphyKEqN => "murphy_k_eq_n",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub d: u64,
    pub n: u64,
    pub k: u64,
    pub p: u64,
    /// Indexed lower bound; `1` on the `k = n` row where the formula does not apply.
    pub lower_bound_indexed: u64,
    /// `d(n-1)` on Deep Sets rows.
    pub lower_bound_deepsets: Option<u64>,
    pub trivial_bound: u64,
    pub known_upper: Option<u64>,
    pub source: Option<UpperSource>,
}

impl BoundsRow {
    pub fn new(d: u64, n: u64, k: u64) -> Result<Self> {
        if d == 0 || n < 2 || k == 0 || k > n {
            return Err(Error::InvalidParameter(format!(
                "need d >= 1, n >= 2 and 1 <= k <= n, got d={d}, n={n}, k={k}"
            )));
        }
        let p = 1;
        let (lower, deepsets) = if k == n {
            (1, None)
        } else {
            let lb = indexed_lower_bound(d, n, k)?;
            (lb, (k == 1).then(|| d * (n - 1)))
        };
        let (known_upper, source) = if k == n {
            (Some(1), Some(UpperSource::MurphyKEqN))
        } else if k == 1 && d == 1 {
            (Some(n), Some(UpperSource::WagstaffD1K1))
        } else if k == 1 {
            (Some(2 * n * d + 1), Some(UpperSource::DymGortlerK1))
        } else {
            (None, None)
        };
        Ok(Self {
            d,
            n,
            k,
            p,
            lower_bound_indexed: lower,
            lower_bound_deepsets: deepsets,
            trivial_bound: trivial_bound(d, n, Some(p))?,
            known_upper,
            source,
        })
    }

    pub fn is_consistent(&self) -> bool {
        self.known_upper
            .is_none_or(|u| self.lower_bound_indexed <= u)
            && self.lower_bound_indexed >= 1
            && self.trivial_bound >= 1
    }
}

/// Inclusive integer range used to sweep the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub start: u64,
    pub end: u64,
}

impl IntRange {
    pub fn new(start: u64, end: u64) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidParameter(format!(
                "empty range {start}..{end}"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn iter(self) -> std::ops::RangeInclusive<u64> {
        self.start..=self.end
    }
}

impl std::str::FromStr for IntRange {
    type Err = Error;

    /// Accepts `a..b` (inclusive) or a single integer.
    fn from_str(s: &str) -> Result<Self> {
        let parse = |t: &str| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| Error::InvalidParameter(format!("bad range `{s}`")))
        };
        match s.split_once("..") {
            Some((a, b)) => Self::new(parse(a)?, parse(b.trim_start_matches('='))?),
            None => {
                let v = parse(s)?;
                Self::new(v, v)
            }
        }
    }
}

/// Rows for every `(d, n, k)` in the ranges with `n >= 2` and `k <= n`.
pub fn bounds_table(d: IntRange, n: IntRange, k: IntRange) -> Result<Vec<BoundsRow>> {
    let mut rows = Vec::new();
    for dd in d.iter().filter(|&x| x >= 1) {
        for nn in n.iter().filter(|&x| x >= 2) {
            for kk in k.iter().filter(|&x| x >= 1 && x <= nn) {
                rows.push(BoundsRow::new(dd, nn, kk)?);
            }
        }
    }
    Ok(rows)
}

pub const CSV_HEADER: &str = "d,n,k,lower_indexed,trivial_p1,upper_known,source";

pub fn write_csv<W: std::io::Write>(rows: &[BoundsRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.d,
            r.n,
            r.k,
            r.lower_bound_indexed,
            r.trivial_bound,
            r.known_upper.map(|u| u.to_string()).unwrap_or_default(),
            r.source.map(UpperSource::tag).unwrap_or("none"),
        )?;
    }
    Ok(())
}

/// Ratio of the indexed bound to `(d(n-k))^{1/k}` over a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub k: u64,
    pub points: usize,
    pub min_ratio: f64,
    pub argmin: (u64, u64),
    pub max_ratio: f64,
    /// Constant from `s^k - (s-1)^k <= k s^{k-1}` and `s <= 2 (d(n-k)+1)^{1/k}`:
    /// `1 / (k 2^{k-1} 2^{(k-1)/k})`.
    pub analytic_constant: f64,
    pub bounded_below: bool,
}

pub fn analytic_constant(k: u64) -> f64 {
    let kf = k as f64;
    1.0 / (kf * 2f64.powf(kf - 1.0) * 2f64.powf((kf - 1.0) / kf))
}

pub fn asymptotic_constant_check(k: u64, d: IntRange, n: IntRange) -> Result<AsymptoticReport> {
    let mut report = AsymptoticReport {
        k,
        points: 0,
        min_ratio: f64::INFINITY,
        argmin: (0, 0),
        max_ratio: 0.0,
        analytic_constant: analytic_constant(k),
        bounded_below: false,
    };
    for dd in d.iter().filter(|&x| x >= 1) {
        for nn in n.iter().filter(|&x| x > k) {
            let lb = indexed_lower_bound(dd, nn, k)? as f64;
            let ratio = lb / ((dd * (nn - k)) as f64).powf(1.0 / k as f64);
            report.points += 1;
            if ratio < report.min_ratio {
                report.min_ratio = ratio;
                report.argmin = (dd, nn);
            }
            report.max_ratio = report.max_ratio.max(ratio);
        }
    }
    if report.points == 0 {
        return Err(Error::InvalidParameter(
            "empty sweep for the asymptotic check".into(),
        ));
    }
    report.bounded_below = report.min_ratio >= report.analytic_constant;
    Ok(report)
}

/// Rows where increasing `d` or `n` by one decreases the indexed bound.
pub fn monotonicity_violations(
    k: u64,
    d: IntRange,
    n: IntRange,
) -> Result<Vec<(u64, u64, &'static str)>> {
    let mut out = Vec::new();
    for dd in d.iter().filter(|&x| x >= 1) {
        for nn in n.iter().filter(|&x| x > k) {
            let here = indexed_lower_bound(dd, nn, k)?;
            if indexed_lower_bound(dd + 1, nn, k)? < here {
                out.push((dd, nn, "d"));
            }
            if indexed_lower_bound(dd, nn + 1, k)? < here {
                out.push((dd, nn, "n"));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_bound_examples() {
        assert_eq!(indexed_lower_bound(3, 5, 1).unwrap(), 12);
        assert_eq!(indexed_lower_bound(2, 10, 2).unwrap(), 2);
        assert_eq!(indexed_lower_bound(1, 2, 1).unwrap(), 1);
        assert!(indexed_lower_bound(1, 3, 3).is_err());
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(grid_size(1, 3, 1).unwrap(), 3);
        assert_eq!(grid_size(2, 10, 2).unwrap(), 5);
        assert_eq!(grid_size(1, 11, 2).unwrap(), 4);
        // perfect power: 16 = 4^2 needs s = 4 exactly
        assert_eq!(smallest_root_ceiling(16, 2).unwrap(), 4);
        assert_eq!(smallest_root_ceiling(17, 2).unwrap(), 5);
        assert_eq!(smallest_root_ceiling(1, 5).unwrap(), 1);
        assert_eq!(smallest_root_ceiling(u64::MAX, 64).unwrap(), 2);
    }

    #[test]
    fn axis_counts() {
        assert_eq!(axis_cardinality(5, 2).unwrap(), 9);
        assert_eq!(axis_cardinality(4, 2).unwrap(), 7);
        assert_eq!(axis_cardinality(7, 1).unwrap(), 1);
    }

    #[test]
    fn trivial_examples() {
        assert_eq!(trivial_bound(2, 2, Some(5)).unwrap(), 4);
        assert_eq!(trivial_bound(1, 3, Some(1)).unwrap(), 1);
        assert_eq!(trivial_bound(2, 3, None).unwrap(), 6);
    }

    #[test]
    fn table_rows() {
        let r = BoundsRow::new(1, 5, 1).unwrap();
        assert_eq!((r.lower_bound_indexed, r.known_upper), (4, Some(5)));
        let r = BoundsRow::new(2, 5, 1).unwrap();
        assert_eq!((r.lower_bound_indexed, r.known_upper), (8, Some(21)));
        let r = BoundsRow::new(3, 4, 4).unwrap();
        assert_eq!(r.known_upper, Some(1));
        assert_eq!(r.source, Some(UpperSource::MurphyKEqN));
    }

    #[test]
    fn table_size() {
        let rows = bounds_table(
            "1..2".parse().unwrap(),
            "2..6".parse().unwrap(),
            "1..2".parse().unwrap(),
        )
        .unwrap();
        assert_eq!(rows.len(), 20);
        assert!(rows.iter().all(BoundsRow::is_consistent));
    }

    #[test]
    fn range_parsing() {
        assert_eq!(
            "3..7".parse::<IntRange>().unwrap(),
            IntRange { start: 3, end: 7 }
        );
        assert_eq!(
            "4".parse::<IntRange>().unwrap(),
            IntRange { start: 4, end: 4 }
        );
        assert!("7..3".parse::<IntRange>().is_err());
        assert!("x..3".parse::<IntRange>().is_err());
    }

    #[test]
    fn asymptotic_examples() {
        let r = asymptotic_constant_check(
            1,
            IntRange::new(1, 6).unwrap(),
            IntRange::new(2, 30).unwrap(),
        )
        .unwrap();
        assert_eq!((r.min_ratio, r.max_ratio), (1.0, 1.0));
        let r = asymptotic_constant_check(
            2,
            IntRange::new(1, 1).unwrap(),
            IntRange::new(3, 200).unwrap(),
        )
        .unwrap();
        assert!(r.min_ratio > 0.3 && r.bounded_below);
        let r = asymptotic_constant_check(
            3,
            IntRange::new(2, 2).unwrap(),
            IntRange::new(4, 100).unwrap(),
        )
        .unwrap();
        assert!(r.min_ratio > 0.2 && r.bounded_below);
    }
}
