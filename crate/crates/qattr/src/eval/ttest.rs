//! Two-sided paired t-test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub p: f64,
    pub df: usize,
    /// Set when the differences have zero variance; t and p are then the
    /// limiting values (t=0, p=1 for all-zero differences, |t|=inf, p=0
    /// for a constant nonzero difference).
    pub degenerate: bool,
}

/// Paired t-test over (first, second) observations; differences are
/// second minus first.
pub fn paired_ttest(pairs: &[(f64, f64)]) -> Result<TTestResult> {
    let n = pairs.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("paired t-test needs >= 2 pairs, got {n}")));
    }
    let diffs: Vec<f64> = pairs.iter().map(|&(a, b)| b - a).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    let sd = var.sqrt();

    // Differences equal up to subtraction rounding count as constant; an
    // exact == 0.0 test would miss e.g. 0.7-0.5 vs 0.8-0.6.
    if sd <= mean.abs() * 1e-9 {
        let (t, p) = if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        };
        return Ok(TTestResult { t, p, df, degenerate: true });
    }

    let t = mean / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, df as f64)
        .map_err(|e| Error::InvalidInput(format!("t-distribution: {e}")))?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(TTestResult { t, p: p.clamp(0.0, 1.0), df, degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Student-t CDF by Simpson quadrature over the density, with a
    /// hand-rolled Lanczos log-gamma. Shares nothing with the statrs path.
    mod oracle {
        const LANCZOS_G: f64 = 7.0;
        const LANCZOS: [f64; 9] = [
            0.999_999_999_999_809_93,
            676.520_368_121_885_1,
            -1259.139_216_722_402_8,
            771.323_428_777_653_13,
            -176.615_029_162_140_6,
            12.507_343_278_686_905,
            -0.138_571_095_265_720_12,
            9.984_369_578_019_571_6e-6,
            1.505_632_735_149_311_6e-7,
        ];

        fn ln_gamma(x: f64) -> f64 {
            if x < 0.5 {
                let pi = std::f64::consts::PI;
                return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
            }
            let x = x - 1.0;
            let mut acc = LANCZOS[0];
            for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
                acc += c / (x + i as f64);
            }
            let t = x + LANCZOS_G + 0.5;
            0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
        }

        fn pdf(x: f64, v: f64) -> f64 {
            let c = (ln_gamma((v + 1.0) / 2.0) - ln_gamma(v / 2.0)).exp() / (v * std::f64::consts::PI).sqrt();
            c * (1.0 + x * x / v).powf(-(v + 1.0) / 2.0)
        }

        pub fn two_sided_p(t_abs: f64, v: f64) -> f64 {
            let steps = 200_000usize;
            let h = t_abs / steps as f64;
            let mut s = pdf(0.0, v) + pdf(t_abs, v);
            for i in 1..steps {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(i as f64 * h, v);
            }
            let cdf = 0.5 + s * h / 3.0;
            2.0 * (1.0 - cdf)
        }
    }

    #[test]
    fn identical_pairs_are_degenerate_with_p_one() {
        let r = paired_ttest(&[(0.5, 0.5), (0.7, 0.7), (0.3, 0.3)]).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn constant_nonzero_difference_is_degenerate() {
        let r = paired_ttest(&[(0.5, 0.7), (0.6, 0.8), (0.55, 0.75)]).unwrap();
        assert!(r.degenerate);
        assert!(r.t.is_infinite() && r.t > 0.0);
        assert_eq!(r.p, 0.0);
    }

    #[test]
    fn frozen_three_pair_case() {
        let r = paired_ttest(&[(0.50, 0.70), (0.60, 0.75), (0.55, 0.85)]).unwrap();
        assert!(!r.degenerate);
        assert_eq!(r.df, 2);
        assert!((r.t - 4.9135381491199555).abs() < 1e-9, "t = {}", r.t);
        assert!((r.p - 0.0390123477590).abs() < 1e-6, "p = {}", r.p);
    }

    #[test]
    fn matches_quadrature_oracle_on_random_inputs() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let n = rng.random_range(3..9);
            let pairs: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)))
                .collect();
            let r = paired_ttest(&pairs).unwrap();
            if r.degenerate {
                continue;
            }
            let p_oracle = oracle::two_sided_p(r.t.abs(), r.df as f64);
            assert!(
                (r.p - p_oracle).abs() < 1e-6,
                "p {} vs oracle {p_oracle} (t={}, df={})",
                r.p,
                r.t,
                r.df
            );
        }
    }

    #[test]
    fn sign_follows_direction() {
        let up = paired_ttest(&[(0.1, 0.5), (0.2, 0.8), (0.15, 0.4)]).unwrap();
        assert!(up.t > 0.0);
        let down = paired_ttest(&[(0.5, 0.1), (0.8, 0.2), (0.4, 0.15)]).unwrap();
        assert!(down.t < 0.0);
    }

    #[test]
    fn one_pair_is_an_error() {
        assert!(paired_ttest(&[(0.1, 0.2)]).is_err());
    }
}
