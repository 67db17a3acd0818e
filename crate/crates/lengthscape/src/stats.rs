//! Small self-contained statistics toolbox: summary statistics, Welch's
//! t-test, t-based confidence intervals, and Spearman rank correlation.
//!
//! The special functions (log-gamma, regularized incomplete beta, Student-t
//! CDF and inverse) are implemented here rather than pulled in as a runtime
//! dependency; unit tests cross-check them against `statrs`.

/// Natural log of the gamma function (Lanczos approximation, g = 7).
///
/// Accurate to ~1e-13 relative error for the argument ranges used here
/// (degrees of freedom and half-integer shape parameters).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = COEF[0];
        for (i, &c) in COEF.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + 7.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

/// Continued-fraction kernel for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        // Even step.
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // Odd step.
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b) for a, b > 0, x in [0, 1].
pub fn incomplete_beta_reg(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "shape parameters must be positive");
    assert!((0.0..=1.0).contains(&x), "x must lie in [0,1]");
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // Use the continued fraction on the side where it converges fast.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// CDF of Student's t distribution with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    assert!(df > 0.0, "degrees of freedom must be positive");
    if t == 0.0 {
        return 0.5;
    }
    let x = df / (df + t * t);
    let tail = 0.5 * incomplete_beta_reg(0.5 * df, 0.5, x);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Two-sided tail probability P(|T| >= |t|) for Student's t.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    assert!(df > 0.0, "degrees of freedom must be positive");
    if t == 0.0 {
        return 1.0;
    }
    incomplete_beta_reg(0.5 * df, 0.5, df / (df + t * t))
}

/// Two-sided critical value t* with P(|T| <= t*) = `confidence`.
///
/// Solved by bisection on the CDF; accurate to ~1e-10, far tighter than any
/// use in this crate requires.
pub fn student_t_critical(df: f64, confidence: f64) -> f64 {
    assert!(df > 0.0, "degrees of freedom must be positive");
    assert!(
        (0.0..1.0).contains(&confidence),
        "confidence must lie in [0,1)"
    );
    let target = 0.5 + 0.5 * confidence;
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while student_t_cdf(hi, df) < target {
        hi *= 2.0;
        assert!(hi < 1e12, "t critical value search diverged");
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_cdf(mid, df) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * (1.0 + hi) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Sample mean, or NaN for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n - 1 denominator); NaN for n < 2.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn sample_std(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

/// Result of a two-sided Welch's t-test.
#[derive(Debug, Clone, Copy)]
pub struct WelchTest {
    pub mean_a: f64,
    pub mean_b: f64,
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
}

/// Two-sided Welch's t-test for a difference in means between two
/// independent samples with possibly unequal variances. Requires at least
/// two observations per sample.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> WelchTest {
    assert!(a.len() >= 2 && b.len() >= 2, "need >= 2 observations per sample");
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_variance(a), sample_variance(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let sa = va / na;
    let sb = vb / nb;
    let se2 = sa + sb;
    if se2 == 0.0 {
        // Both samples constant: identical means are a perfect non-result,
        // different means a perfect separation.
        let equal = ma == mb;
        return WelchTest {
            mean_a: ma,
            mean_b: mb,
            t: if equal { 0.0 } else { f64::INFINITY * (ma - mb).signum() },
            df: na + nb - 2.0,
            p: if equal { 1.0 } else { 0.0 },
        };
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    WelchTest {
        mean_a: ma,
        mean_b: mb,
        t,
        df,
        p: student_t_two_sided_p(t, df),
    }
}

/// Mean with a two-sided t confidence interval half-width.
#[derive(Debug, Clone, Copy)]
pub struct MeanCi {
    pub mean: f64,
    /// Half-width; the interval is `mean ± half_width`. Zero for n = 1.
    pub half_width: f64,
    pub n: usize,
}

/// Mean and t-based confidence interval (e.g. `confidence = 0.95`).
pub fn mean_ci(xs: &[f64], confidence: f64) -> MeanCi {
    assert!(!xs.is_empty(), "confidence interval of an empty sample");
    let m = mean(xs);
    if xs.len() == 1 {
        return MeanCi {
            mean: m,
            half_width: 0.0,
            n: 1,
        };
    }
    let se = (sample_variance(xs) / xs.len() as f64).sqrt();
    let t = student_t_critical((xs.len() - 1) as f64, confidence);
    MeanCi {
        mean: m,
        half_width: t * se,
        n: xs.len(),
    }
}

/// Ranks with ties sharing their average rank (1-based).
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].partial_cmp(&xs[j]).expect("NaN in rank data"));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        // Positions i..=j are tied; average their 1-based ranks.
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation coefficient; NaN when either sample is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "samples must be paired");
    assert!(xs.len() >= 2, "need >= 2 pairs");
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}

/// Spearman rank correlation (tie-aware: Pearson on average ranks).
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> f64 {
    pearson(&average_ranks(xs), &average_ranks(ys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::ContinuousCDF;

    #[test]
    fn ln_gamma_matches_statrs() {
        for &x in &[0.1, 0.5, 1.0, 1.5, 2.0, 3.7, 9.5, 49.5, 99.0, 123.45] {
            let got = ln_gamma(x);
            let want = statrs::function::gamma::ln_gamma(x);
            assert!(
                (got - want).abs() <= 1e-11 * (1.0 + want.abs()),
                "ln_gamma({x}): {got} vs {want}"
            );
        }
    }

    #[test]
    fn incomplete_beta_matches_statrs() {
        for &(a, b) in &[(0.5, 0.5), (1.0, 3.0), (2.5, 0.5), (5.0, 5.0), (50.0, 0.5)] {
            for i in 0..=20 {
                let x = i as f64 / 20.0;
                let got = incomplete_beta_reg(a, b, x);
                let want = statrs::function::beta::beta_reg(a, b, x);
                assert!(
                    (got - want).abs() <= 1e-10,
                    "I_{x}({a},{b}): {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn t_cdf_matches_statrs() {
        for &df in &[1.0, 2.0, 5.0, 10.5, 30.0, 197.3] {
            let dist = statrs::distribution::StudentsT::new(0.0, 1.0, df).unwrap();
            for i in -12..=12 {
                let t = i as f64 / 2.0;
                let got = student_t_cdf(t, df);
                let want = dist.cdf(t);
                assert!(
                    (got - want).abs() <= 1e-10,
                    "t_cdf({t}, df={df}): {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn t_critical_matches_tables_and_statrs() {
        // Classic two-sided 95% values.
        assert!((student_t_critical(10.0, 0.95) - 2.228_138_85).abs() < 1e-6);
        assert!((student_t_critical(1.0, 0.95) - 12.706_204_74).abs() < 1e-5);
        for &df in &[3.0, 7.0, 19.0, 99.0] {
            let dist = statrs::distribution::StudentsT::new(0.0, 1.0, df).unwrap();
            let got = student_t_critical(df, 0.95);
            let want = dist.inverse_cdf(0.975);
            assert!((got - want).abs() < 1e-7, "df={df}: {got} vs {want}");
        }
    }

    #[test]
    fn welch_known_case() {
        // Cross-checked against scipy.stats.ttest_ind(equal_var=False).
        let a = [27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1, 21.9, 22.6, 23.1, 19.6];
        let b = [27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0, 24.8, 20.2, 21.9, 22.1];
        let r = welch_t_test(&a, &b);
        assert!((r.t - (-2.089_580_19)).abs() < 1e-7, "t = {}", r.t);
        assert!((r.df - 18.937_842_60).abs() < 1e-7, "df = {}", r.df);
        assert!((r.p - 0.050_387_716_6).abs() < 1e-9, "p = {}", r.p);
    }

    #[test]
    fn welch_is_symmetric() {
        let a = [1.0, 2.0, 3.5, 2.2, 1.8];
        let b = [2.0, 2.4, 3.9, 4.0, 2.8, 3.3];
        let ab = welch_t_test(&a, &b);
        let ba = welch_t_test(&b, &a);
        assert!((ab.p - ba.p).abs() < 1e-12);
        assert!((ab.t + ba.t).abs() < 1e-12);
    }

    #[test]
    fn welch_degenerate_samples() {
        let same = [2.0, 2.0, 2.0];
        let other = [3.0, 3.0];
        assert_eq!(welch_t_test(&same, &same).p, 1.0);
        assert_eq!(welch_t_test(&same, &other).p, 0.0);
    }

    #[test]
    fn mean_ci_covers_hand_computation() {
        let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        let ci = mean_ci(&xs, 0.95);
        assert!((ci.mean - 5.0).abs() < 1e-12);
        // s = 2.138, se = 0.7559, t(7, .975) = 2.3646 -> half-width 1.7875.
        assert!((ci.half_width - 1.7875).abs() < 1e-3, "hw={}", ci.half_width);
    }

    #[test]
    fn spearman_monotone_and_ties() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let inc = [10.0, 20.0, 30.0, 40.0, 50.0];
        let dec = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert!((spearman_rho(&xs, &inc) - 1.0).abs() < 1e-12);
        assert!((spearman_rho(&xs, &dec) + 1.0).abs() < 1e-12);
        // Tie-aware: scipy.stats.spearmanr([1,2,2,3], [1,3,2,4]) = 0.9486832980.
        let a = [1.0, 2.0, 2.0, 3.0];
        let b = [1.0, 3.0, 2.0, 4.0];
        assert!((spearman_rho(&a, &b) - 0.948_683_298_050_513_9).abs() < 1e-12);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0]), vec![2.5, 1.0, 2.5]);
        assert_eq!(average_ranks(&[2.0, 2.0, 2.0]), vec![2.0, 2.0, 2.0]);
    }
}
