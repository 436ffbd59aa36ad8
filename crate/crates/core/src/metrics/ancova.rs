use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::StatsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AncovaResult {
    pub f: f64,
    pub df1: usize,
    pub df2: usize,
    pub p: f64,
    pub n: usize,
    /// Group labels in sorted order; the first is the reference level.
    pub groups: Vec<String>,
    pub intercept: f64,
    pub slope: f64,
    /// Adjusted offset of each non-reference group from the reference.
    pub group_effects: BTreeMap<String, f64>,
}

/// Upper tail of the F distribution.
pub fn f_survival(f: f64, df1: usize, df2: usize) -> Result<f64, StatsError> {
    if f.is_nan() {
        return Err(StatsError::DesignError("F statistic is undefined".into()));
    }
    if f <= 0.0 {
        return Ok(1.0);
    }
    if f.is_infinite() {
        return Ok(0.0);
    }
    let dist = FisherSnedecor::new(df1 as f64, df2 as f64)
        .map_err(|e| StatsError::DesignError(e.to_string()))?;
    Ok(dist.sf(f).clamp(0.0, 1.0))
}

fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, f64), StatsError> {
    let (n, p) = x.shape();
    let singular = x.singular_values();
    let tol = singular.max() * (n.max(p) as f64) * f64::EPSILON;
    let rank = singular.iter().filter(|&&s| s > tol).count();
    if rank < p {
        return Err(StatsError::DesignError(format!(
            "design matrix has rank {rank} < {p} columns"
        )));
    }
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * y;
    let beta = qr
        .r()
        .solve_upper_triangular(&qty)
        .ok_or_else(|| StatsError::DesignError("singular triangular factor".into()))?;
    let rss = (y - x * &beta).norm_squared();
    Ok((beta, rss))
}

/// One-covariate analysis of covariance. Compares `y ~ 1 + covariate + group`
/// against `y ~ 1 + covariate` with the nested-model F test. A constant
/// covariate is dropped, which reduces the test to one-way ANOVA.
pub fn ancova<S: AsRef<str>>(
    y: &[f64],
    covariate: &[f64],
    groups: &[S],
) -> Result<AncovaResult, StatsError> {
    let n = y.len();
    if covariate.len() != n || groups.len() != n {
        return Err(StatsError::Shape(format!(
            "y has {n} values, covariate {}, groups {}",
            covariate.len(),
            groups.len()
        )));
    }
    let levels: Vec<String> = groups
        .iter()
        .map(|g| g.as_ref().to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let k = levels.len();
    if k < 2 {
        return Err(StatsError::DesignError(format!(
            "need at least 2 groups, got {k}"
        )));
    }
    if n <= k + 1 {
        return Err(StatsError::DesignError(format!(
            "{n} observations leave no residual degrees of freedom for {k} groups"
        )));
    }
    let level_of: BTreeMap<&str, usize> = levels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();

    let yv = DVector::from_column_slice(y);
    let with_covariate = covariate.iter().any(|&c| c != covariate[0]);
    let base = if with_covariate { 2 } else { 1 };
    let full = DMatrix::from_fn(n, k - 1 + base, |i, j| match j {
        0 => 1.0,
        1 if with_covariate => covariate[i],
        _ => f64::from(level_of[groups[i].as_ref()] == j + 1 - base),
    });
    let reduced = full.columns(0, base).into_owned();
    let (beta, rss_full) = ols(&full, &yv)?;
    let (_, rss_reduced) = ols(&reduced, &yv)?;

    let df1 = k - 1;
    let df2 = n - k - (base - 1);
    let f = if rss_full > 0.0 {
        ((rss_reduced - rss_full).max(0.0) / df1 as f64) / (rss_full / df2 as f64)
    } else if rss_reduced > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let p = f_survival(f, df1, df2)?;
    let group_effects = levels[1..]
        .iter()
        .enumerate()
        .map(|(i, l)| (l.clone(), beta[i + base]))
        .collect();
    Ok(AncovaResult {
        f,
        df1,
        df2,
        p,
        n,
        groups: levels,
        intercept: beta[0],
        slope: if with_covariate { beta[1] } else { 0.0 },
        group_effects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn normal(rng: &mut impl Rng) -> f64 {
        rng.sample(StandardNormal)
    }

    #[test]
    fn f_tail_matches_reference_values() {
        // scipy.stats.f.sf
        let cases = [
            (1, 10, 3.0, 0.11393741215192044),
            (2, 21, 0.5, 0.613570464929247),
            (1, 7649, 6.1, 0.013539851720708828),
            (3, 100, 2.7, 0.04972165265848262),
            (5, 40, 10.0, 2.9195853033816456e-06),
            (2, 5, 0.01, 0.9900695822980481),
        ];
        for (d1, d2, f, p) in cases {
            let got = f_survival(f, d1, d2).unwrap();
            assert!(
                (got - p).abs() <= 1e-10 * p.max(1e-3),
                "{d1} {d2} {f}: {got} vs {p}"
            );
        }
        assert_eq!(f_survival(0.0, 1, 1).unwrap(), 1.0);
        assert_eq!(f_survival(f64::INFINITY, 1, 1).unwrap(), 0.0);
    }

    #[test]
    fn pretest_posttest_reference() {
        // statsmodels anova_lm(ols('y ~ x'), ols('y ~ x + C(g)'))
        let pre = [
            3.0, 5.0, 2.0, 6.0, 4.0, 7.0, 3.0, 5.0, 4.0, 6.0, 3.0, 7.0, 5.0, 2.0, 6.0, 4.0, 5.0,
            3.0, 6.0, 4.0, 7.0, 5.0, 2.0, 6.0,
        ];
        let post = [
            6.0, 8.0, 5.0, 9.0, 7.0, 10.0, 6.0, 9.0, 8.0, 10.0, 7.0, 12.0, 9.0, 6.0, 11.0, 8.0,
            10.0, 8.0, 12.0, 9.0, 13.0, 11.0, 7.0, 12.0,
        ];
        let groups: Vec<&str> = ["a", "b", "c"].iter().flat_map(|g| [*g; 8]).collect();
        let r = ancova(&post, &pre, &groups).unwrap();
        assert_eq!((r.df1, r.df2), (2, 20));
        assert_relative_eq!(r.f, 73.58624999523684, max_relative = 1e-9);
        assert_relative_eq!(r.p, 6.006916357859355e-10, max_relative = 1e-6);
        assert_relative_eq!(r.intercept, 2.4327531645569653, epsilon = 1e-9);
        assert_relative_eq!(r.slope, 1.1582278481012651, epsilon = 1e-9);
        assert_relative_eq!(r.group_effects["b"], 1.0854430379746822, epsilon = 1e-9);
        assert_relative_eq!(r.group_effects["c"], 2.315664556962023, epsilon = 1e-9);
    }

    #[test]
    fn zero_slope_reduces_to_one_way_anova() {
        // the covariate sums to zero and is orthogonal to y inside every group
        let y = [1.0, 2.0, 3.0, 4.0, 2.0, 5.0, 6.0, 9.0, 4.0, 5.0, 6.0, 7.0];
        let x = [
            1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0,
        ];
        let g = ["a", "a", "a", "a", "b", "b", "b", "b", "c", "c", "c", "c"];
        let r = ancova(&y, &x, &g).unwrap();
        assert_relative_eq!(r.slope, 0.0, epsilon = 1e-12);

        // one-way ANOVA computed directly
        let grand = y.iter().sum::<f64>() / 12.0;
        let mut ssb = 0.0;
        let mut ssw = 0.0;
        for chunk in y.chunks(4) {
            let m = chunk.iter().sum::<f64>() / 4.0;
            ssb += 4.0 * (m - grand).powi(2);
            ssw += chunk.iter().map(|v| (v - m).powi(2)).sum::<f64>();
        }
        let f_anova = (ssb / 2.0) / (ssw / 9.0);
        // one residual df goes to the covariate
        assert_relative_eq!(r.f, f_anova * 8.0 / 9.0, max_relative = 1e-10);
        assert_eq!((r.df1, r.df2), (2, 8));
    }

    #[test]
    fn constant_covariate_is_one_way_anova() {
        // scipy.stats.f_oneway
        let y = [1.0, 2.0, 3.0, 4.0, 2.0, 5.0, 6.0, 9.0, 4.0, 5.0, 6.0, 7.0];
        let g = ["a", "a", "a", "a", "b", "b", "b", "b", "c", "c", "c", "c"];
        let r = ancova(&y, &[3.0; 12], &g).unwrap();
        assert_relative_eq!(r.f, 3.085714285714286, max_relative = 1e-10);
        assert_relative_eq!(r.p, 0.09538325682846782, max_relative = 1e-10);
        assert_eq!((r.df1, r.df2), (2, 9));
        assert_eq!(r.slope, 0.0);
        assert_relative_eq!(r.intercept, 2.5, epsilon = 1e-12);
        assert_relative_eq!(r.group_effects["b"], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn identical_groups_have_no_effect() {
        let y = [3.0, 5.0, 4.0, 6.0, 3.0, 5.0, 4.0, 6.0];
        let x = [1.0, 3.0, 2.0, 4.0, 1.0, 3.0, 2.0, 4.0];
        let g = ["a", "a", "a", "a", "b", "b", "b", "b"];
        let r = ancova(&y, &x, &g).unwrap();
        assert!(r.f.abs() < 1e-12);
        assert!(r.p > 0.99);
    }

    #[test]
    fn design_errors() {
        let y = [1.0, 2.0, 3.0, 4.0];
        assert!(matches!(
            ancova(&y, &[1.0; 4], &["a"; 4]),
            Err(StatsError::DesignError(_))
        ));
        // covariate equals the group indicator
        assert!(matches!(
            ancova(
                &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
                &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0],
                &["a", "a", "a", "b", "b", "b"]
            ),
            Err(StatsError::DesignError(_))
        ));
        assert!(matches!(
            ancova(&y, &[1.0, 2.0, 3.0, 4.0], &["a", "b", "a", "b"][..3]),
            Err(StatsError::Shape(_))
        ));
        assert!(matches!(
            ancova(&y[..3], &[1.0, 2.0, 3.0], &["a", "b", "c"]),
            Err(StatsError::DesignError(_))
        ));
    }

    #[test]
    fn detects_designed_effect() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut hits = 0;
        for _ in 0..50 {
            let mut y = Vec::new();
            let mut x = Vec::new();
            let mut g = Vec::new();
            for group in 0..2 {
                for _ in 0..40 {
                    let cov = rng.random_range(3.0..8.0);
                    x.push(cov);
                    y.push(1.0 + 0.5 * cov + 0.8 * group as f64 + normal(&mut rng));
                    g.push(if group == 0 { "base" } else { "treated" });
                }
            }
            let r = ancova(&y, &x, &g).unwrap();
            if r.p < 0.05 {
                hits += 1;
            }
            assert!((0.0..=1.0).contains(&r.p));
        }
        // two-sided power at d = 0.8, n = 40 per group is about 0.94
        assert!(hits >= 40, "{hits} of 50");
    }

    proptest! {
        #[test]
        fn affine_covariate_rescaling(scale in 0.1f64..50.0, shift in -100.0f64..100.0, seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 18;
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
            let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v + (i % 3) as f64 + normal(&mut rng)).collect();
            let g: Vec<String> = (0..n).map(|i| format!("g{}", i % 3)).collect();
            let a = ancova(&y, &x, &g).unwrap();
            let x2: Vec<f64> = x.iter().map(|v| v * scale + shift).collect();
            let b = ancova(&y, &x2, &g).unwrap();
            prop_assert!((a.f - b.f).abs() <= 1e-7 * a.f.max(1.0), "{} vs {}", a.f, b.f);
            prop_assert!((a.p - b.p).abs() <= 1e-8);
            prop_assert!((0.0..=1.0).contains(&a.p));
        }
    }
}
