use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::StatsError;

/// Largest sample size for which the permutation distribution is enumerated
/// (10! = 3,628,800 permutations).
pub const MAX_EXACT_N: usize = 10;

// Tolerance for counting permutations whose |rho| equals the observed one.
const RHO_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpearmanResult {
    pub rho: f64,
    pub p_two_sided: f64,
    pub n: usize,
    pub permutations: u64,
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = alloc::vec![0.0; xs.len()];
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

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / libm::sqrt(saa * sbb)
    }
}

fn rank_correlation(rx: &[f64], ry: &[f64], untied: bool) -> f64 {
    if untied {
        let n = rx.len() as f64;
        let d2: f64 = rx.iter().zip(ry).map(|(a, b)| (a - b) * (a - b)).sum();
        1.0 - 6.0 * d2 / (n * (n * n - 1.0))
    } else {
        pearson(rx, ry)
    }
}

/// Spearman's rho with a two-sided p-value from the full permutation
/// distribution of the y ranks. With ties, rho is the Pearson correlation of
/// average ranks and the permutation set is that of the tied rank multiset.
pub fn spearman_exact(x: &[f64], y: &[f64]) -> Result<SpearmanResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if !(2..=MAX_EXACT_N).contains(&n) {
        return Err(StatsError::OutsideExactRegime { n, max: MAX_EXACT_N });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let rx = average_ranks(x);
    let mut ry = average_ranks(y);
    let distinct = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s.windows(2).all(|w| w[0] != w[1])
    };
    let untied = distinct(x) && distinct(y);
    let rho = rank_correlation(&rx, &ry, untied);
    let threshold = libm::fabs(rho) - RHO_TIE_TOLERANCE;

    // Heap's algorithm over ry in place
    let mut extreme = 0u64;
    let mut total = 0u64;
    let mut count_current = |ry: &[f64]| {
        total += 1;
        if libm::fabs(rank_correlation(&rx, ry, untied)) >= threshold {
            extreme += 1;
        }
    };
    count_current(&ry);
    let mut c = alloc::vec![0usize; n];
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                ry.swap(0, i);
            } else {
                ry.swap(c[i], i);
            }
            count_current(&ry);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(SpearmanResult {
        rho,
        p_two_sided: extreme as f64 / total as f64,
        n,
        permutations: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    extern crate std;

    fn oracle_corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let sa: f64 = a.iter().sum();
        let sb: f64 = b.iter().sum();
        let sab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let saa: f64 = a.iter().map(|x| x * x).sum();
        let sbb: f64 = b.iter().map(|y| y * y).sum();
        let den = ((n * saa - sa * sa) * (n * sbb - sb * sb)).sqrt();
        if den == 0.0 { 0.0 } else { (n * sab - sa * sb) / den }
    }

    // lexicographic next-permutation enumeration, independent of Heap's
    fn lex_p(x: &[f64], y: &[f64]) -> f64 {
        let rx = average_ranks(x);
        let ry = average_ranks(y);
        let obs = oracle_corr(&rx, &ry).abs();
        let mut idx: Vec<usize> = (0..y.len()).collect();
        let (mut hits, mut total) = (0u64, 0u64);
        loop {
            let perm: Vec<f64> = idx.iter().map(|&i| ry[i]).collect();
            total += 1;
            if oracle_corr(&rx, &perm).abs() >= obs - 1e-12 {
                hits += 1;
            }
            let Some(k) = (0..idx.len().saturating_sub(1)).rev().find(|&k| idx[k] < idx[k + 1]) else {
                break;
            };
            let l = (k + 1..idx.len()).rev().find(|&l| idx[k] < idx[l]).unwrap();
            idx.swap(k, l);
            idx[k + 1..].reverse();
        }
        hits as f64 / total as f64
    }

    #[test]
    fn reported_pattern() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [3.0, 6.0, 5.0, 2.0, 4.0, 1.0];
        let r = spearman_exact(&x, &y).unwrap();
        assert!((r.rho - (1.0 - 324.0 / 210.0)).abs() < 1e-12);
        assert_eq!(r.permutations, 720);
        assert!((r.p_two_sided * 100.0).round() == 30.0, "p = {}", r.p_two_sided);
        assert_eq!(r.p_two_sided, lex_p(&x, &y));
    }

    #[test]
    fn monotone_n6() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y: Vec<f64> = x.iter().map(|v| v * v + 3.0).collect();
        let r = spearman_exact(&x, &y).unwrap();
        assert_eq!(r.rho, 1.0);
        assert_eq!(r.p_two_sided, 2.0 / 720.0);
    }

    #[test]
    fn discordant_pair() {
        let r = spearman_exact(&[1.0, 2.0], &[2.0, 1.0]).unwrap();
        assert_eq!(r.rho, -1.0);
        assert_eq!(r.p_two_sided, 1.0);
    }

    #[test]
    fn refuses_outside_regime() {
        assert!(spearman_exact(&[1.0], &[1.0]).is_err());
        let big: Vec<f64> = (0..11).map(|i| i as f64).collect();
        assert_eq!(
            spearman_exact(&big, &big),
            Err(StatsError::OutsideExactRegime { n: 11, max: MAX_EXACT_N })
        );
    }

    #[test]
    fn ties_use_average_ranks() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        let r = spearman_exact(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(r.rho > 0.9 && r.rho < 1.0);
    }

    proptest! {
        #[test]
        fn p_matches_lexicographic_enumeration(
            x in proptest::collection::vec(0u8..6, 2..7),
            seed in proptest::collection::vec(0u8..6, 7),
        ) {
            let xs: Vec<f64> = x.iter().map(|&v| v as f64).collect();
            let ys: Vec<f64> = seed[..xs.len()].iter().map(|&v| v as f64).collect();
            let r = spearman_exact(&xs, &ys).unwrap();
            prop_assert_eq!(r.p_two_sided, lex_p(&xs, &ys));
            prop_assert!(r.rho >= -1.0 - 1e-12 && r.rho <= 1.0 + 1e-12);
        }
    }
}
