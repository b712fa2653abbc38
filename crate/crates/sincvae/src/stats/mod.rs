//! Nonparametric and parametric tests used by model selection, plus the
//! special functions backing their p-values.
//!
//! All tests return `(statistic, two_sided_p)` as `f64` regardless of the
//! crate-wide float width; selection decisions are too sensitive to
//! accumulate single-precision rank sums.

pub mod special;
mod swilk;

pub use special::{chi2_sf, erfc, f_sf, norm_cdf, norm_ppf, norm_sf};
pub use swilk::shapiro_wilk;

use crate::error::{Error, Result};

fn check_finite(label: &str, xs: &[f64]) -> Result<()> {
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("{label}: non-finite sample value")));
    }
    Ok(())
}

/// Midranks of the pooled sample, in input order, together with the tie
/// correction term `Σ(t³ − t)` summed over tie groups.
fn midranks(pooled: &[f64]) -> (Vec<f64>, f64) {
    let n = pooled.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| pooled[i].partial_cmp(&pooled[j]).expect("finite values"));
    let mut ranks = vec![0.0f64; n];
    let mut tie_sum = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share the average 1-based rank.
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        let t = (j - i + 1) as f64;
        tie_sum += t * t * t - t;
        i = j + 1;
    }
    (ranks, tie_sum)
}

/// Mann-Whitney U test (two-sided, normal approximation with tie
/// correction and continuity correction). Returns `(U_a, p)` where `U_a`
/// counts pairs won by the first sample.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Numeric("mann_whitney_u: empty sample".into()));
    }
    check_finite("mann_whitney_u", a)?;
    check_finite("mann_whitney_u", b)?;
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let mut pooled = Vec::with_capacity(a.len() + b.len());
    pooled.extend_from_slice(a);
    pooled.extend_from_slice(b);
    let (ranks, tie_sum) = midranks(&pooled);
    let r_a: f64 = ranks[..a.len()].iter().sum();
    let u_a = r_a - na * (na + 1.0) / 2.0;

    let n = na + nb;
    let mu = na * nb / 2.0;
    let var = na * nb / 12.0 * ((n + 1.0) - tie_sum / (n * (n - 1.0)));
    if var <= 0.0 {
        // Every pooled value identical: no evidence either way.
        return Ok((u_a, 1.0));
    }
    let diff = u_a - mu;
    let z = (diff - 0.5 * diff.signum()) / var.sqrt();
    Ok((u_a, special::two_sided_p(z)))
}

/// Kruskal-Wallis H test across `groups`, with tie correction.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<(f64, f64)> {
    if groups.len() < 2 {
        return Err(Error::Numeric(
            "kruskal_wallis: need at least two groups".into(),
        ));
    }
    for g in groups {
        if g.is_empty() {
            return Err(Error::Numeric("kruskal_wallis: empty group".into()));
        }
        check_finite("kruskal_wallis", g)?;
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = pooled.len() as f64;
    let (ranks, tie_sum) = midranks(&pooled);
    let correction = 1.0 - tie_sum / (n * n * n - n);
    if correction <= 0.0 {
        return Err(Error::Numeric(
            "kruskal_wallis: all pooled values identical".into(),
        ));
    }
    let mut h = 0.0;
    let mut offset = 0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        h += r * r / g.len() as f64;
        offset += g.len();
    }
    h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);
    h /= correction;
    Ok((h, chi2_sf(h, groups.len() - 1)))
}

/// One-way ANOVA F test. Each group needs at least two observations.
pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<(f64, f64)> {
    if groups.len() < 2 {
        return Err(Error::Numeric("anova_oneway: need at least two groups".into()));
    }
    for g in groups {
        if g.len() < 2 {
            return Err(Error::Numeric(
                "anova_oneway: each group needs at least two values".into(),
            ));
        }
        check_finite("anova_oneway", g)?;
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        ssb += g.len() as f64 * (mean - grand) * (mean - grand);
        ssw += g.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>();
    }
    if ssw <= 0.0 {
        return Err(Error::Numeric(
            "anova_oneway: zero within-group variance".into(),
        ));
    }
    let d1 = groups.len() - 1;
    let d2 = n - groups.len();
    let f = (ssb / d1 as f64) / (ssw / d2 as f64);
    Ok((f, f_sf(f, d1, d2)))
}

/// Percentile by linear interpolation between closest ranks:
/// `rank = (n − 1)·p/100` over the sorted sample, `p ∈ (0, 100]`.
pub fn percentile_linear(xs: &[f64], p: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Numeric("percentile_linear: empty sample".into()));
    }
    if !(p > 0.0 && p <= 100.0) {
        return Err(Error::Numeric(format!(
            "percentile_linear: p must be in (0, 100], got {p}"
        )));
    }
    check_finite("percentile_linear", xs)?;
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let rank = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(got: f64, want: f64, tol: f64) {
        assert!(
            (got - want).abs() <= tol,
            "got {got}, want {want} (|diff| = {:.3e})",
            (got - want).abs()
        );
    }

    #[test]
    fn mwu_extreme_separation() {
        let (u, p) = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(u, 0.0);
        close(p, 0.2452781168067728, 1e-12);
    }

    #[test]
    fn mwu_reference_no_ties() {
        let a = [12.1, 9.8, 14.3, 11.0, 10.5, 13.2, 9.1, 12.7];
        let b = [8.4, 7.9, 9.3, 8.8, 7.2, 8.1];
        let (u, p) = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(u, 47.0);
        close(p, 0.003675612117741231, 1e-12);
    }

    #[test]
    fn mwu_reference_with_ties() {
        let a = [1.0, 2.0, 2.0, 3.0, 5.0, 5.0, 5.0, 8.0];
        let b = [2.0, 3.0, 3.0, 5.0, 6.0, 7.0];
        let (u, p) = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(u, 19.5);
        close(p, 0.5982452156787472, 1e-12);
    }

    #[test]
    fn mwu_scores_fixture() {
        let a = [0.82, 0.79, 0.85, 0.81, 0.80];
        let b = [0.83, 0.86, 0.84, 0.88, 0.87, 0.85];
        let (u, p) = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(u, 2.5);
        close(p, 0.02810006355731762, 1e-12);
    }

    #[test]
    fn mwu_all_identical_gives_p_one() {
        let (u, p) = mann_whitney_u(&[4.0, 4.0, 4.0], &[4.0, 4.0]).unwrap();
        assert_eq!(u, 3.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn kw_two_small_groups() {
        let groups = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let (h, p) = kruskal_wallis(&groups).unwrap();
        close(h, 2.4, 1e-12);
        close(p, 0.12133525035848367, 1e-12);
    }

    #[test]
    fn kw_reference_three_groups() {
        let groups = vec![
            vec![6.4, 6.8, 7.2, 8.3, 8.4, 9.1, 9.4, 9.7],
            vec![2.5, 3.7, 4.9, 5.4, 5.9, 8.1, 8.2],
            vec![1.3, 4.1, 4.9, 5.2, 5.5, 8.2],
        ];
        let (h, p) = kruskal_wallis(&groups).unwrap();
        close(h, 9.849061861415572, 1e-12);
        close(p, 0.007266133800809759, 1e-12);
    }

    #[test]
    fn kw_tied_three_groups() {
        let groups = vec![
            vec![1.0, 1.0, 2.0, 3.0],
            vec![2.0, 2.0, 3.0, 4.0],
            vec![3.0, 4.0, 4.0, 5.0],
        ];
        let (h, p) = kruskal_wallis(&groups).unwrap();
        close(h, 6.3260073260073275, 1e-12);
        close(p, 0.04229849964248904, 1e-12);
    }

    #[test]
    fn kw_all_identical_rejected() {
        let groups = vec![vec![7.0, 7.0], vec![7.0, 7.0, 7.0]];
        assert!(kruskal_wallis(&groups).is_err());
    }

    #[test]
    fn anova_reference_values() {
        let groups = vec![vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0]];
        let (f, p) = anova_oneway(&groups).unwrap();
        close(f, 1.5, 1e-12);
        close(p, 0.2878641347266907, 1e-12);

        let groups = vec![
            vec![23.0, 25.0, 21.0, 27.0, 24.0],
            vec![30.0, 28.0, 31.0, 26.0, 29.0],
            vec![22.0, 20.0, 25.0, 24.0, 21.0],
        ];
        let (f, p) = anova_oneway(&groups).unwrap();
        close(f, 12.8, 1e-10);
        close(p, 0.0010567211668325313, 1e-12);
    }

    #[test]
    fn anova_degenerate_rejected() {
        assert!(anova_oneway(&[vec![1.0, 2.0]]).is_err());
        assert!(anova_oneway(&[vec![1.0], vec![2.0, 3.0]]).is_err());
        assert!(anova_oneway(&[vec![1.0, 1.0], vec![2.0, 2.0]]).is_err());
    }

    #[test]
    fn percentile_interpolates() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        close(percentile_linear(&xs, 95.0).unwrap(), 95.05, 1e-12);
        let xs: Vec<f64> = (1..=20).map(f64::from).collect();
        close(percentile_linear(&xs, 95.0).unwrap(), 19.05, 1e-12);
        close(percentile_linear(&xs, 100.0).unwrap(), 20.0, 0.0);
        assert!(percentile_linear(&xs, 0.0).is_err());
        assert!(percentile_linear(&[], 50.0).is_err());
    }

    #[test]
    fn percentile_order_independent() {
        let xs = [9.0, 1.0, 5.0, 3.0, 7.0];
        let mut sorted = xs.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        close(
            percentile_linear(&xs, 42.0).unwrap(),
            percentile_linear(&sorted, 42.0).unwrap(),
            0.0,
        );
    }

    #[test]
    fn identical_distributions_rarely_rejected() {
        // Under H0 the p-value is ~uniform, so p > 0.05 should hold in
        // roughly 95% of repeats; seeds are fixed so the count is exact.
        use rand::{Rng, SeedableRng};
        let mut kept = 0;
        for seed in 0..100u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let groups: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..25).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let (_, p) = kruskal_wallis(&groups).unwrap();
            if p > 0.05 {
                kept += 1;
            }
        }
        assert!(kept >= 90, "only {kept}/100 repeats retained H0");
    }

    fn sample_vec(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-1000.0f64..1000.0, len)
    }

    proptest! {
        #[test]
        fn prop_mwu_p_in_unit_interval(a in sample_vec(1..12), b in sample_vec(1..12)) {
            let (_, p) = mann_whitney_u(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
        }

        // Rank tests must be invariant under any strictly increasing
        // transform of the pooled values.
        #[test]
        fn prop_mwu_monotone_invariant(a in sample_vec(1..10), b in sample_vec(1..10)) {
            let f = |v: f64| 2.0 * v + v.atan();
            let ta: Vec<f64> = a.iter().map(|&v| f(v)).collect();
            let tb: Vec<f64> = b.iter().map(|&v| f(v)).collect();
            let (u0, p0) = mann_whitney_u(&a, &b).unwrap();
            let (u1, p1) = mann_whitney_u(&ta, &tb).unwrap();
            prop_assert_eq!(u0, u1);
            prop_assert!((p0 - p1).abs() <= 1e-12);
        }

        #[test]
        fn prop_kw_shift_invariant(
            a in sample_vec(2..8),
            b in sample_vec(2..8),
            c in sample_vec(2..8),
            shift in -50.0f64..50.0,
        ) {
            let groups = vec![a, b, c];
            let shifted: Vec<Vec<f64>> = groups
                .iter()
                .map(|g| g.iter().map(|&v| v + shift).collect())
                .collect();
            match (kruskal_wallis(&groups), kruskal_wallis(&shifted)) {
                (Ok((h0, p0)), Ok((h1, p1))) => {
                    prop_assert!((h0 - h1).abs() <= 1e-9);
                    prop_assert!((p0 - p1).abs() <= 1e-9);
                }
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "inconsistent outcomes: {a:?} vs {b:?}"),
            }
        }

        #[test]
        fn prop_anova_shift_invariant(
            a in sample_vec(2..8),
            b in sample_vec(2..8),
            shift in -50.0f64..50.0,
        ) {
            let groups = vec![a, b];
            let shifted: Vec<Vec<f64>> = groups
                .iter()
                .map(|g| g.iter().map(|&v| v + shift).collect())
                .collect();
            match (anova_oneway(&groups), anova_oneway(&shifted)) {
                (Ok((f0, p0)), Ok((f1, p1))) => {
                    prop_assert!((f0 - f1).abs() <= 1e-6 * f0.abs().max(1.0));
                    prop_assert!((p0 - p1).abs() <= 1e-7);
                }
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "inconsistent outcomes: {a:?} vs {b:?}"),
            }
        }

        #[test]
        fn prop_percentile_within_range(xs in sample_vec(1..30), p in 0.001f64..100.0) {
            let v = percentile_linear(&xs, p).unwrap();
            let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(v >= lo && v <= hi);
        }
    }
}
