//! Sample statistics and the paired Student-t test.
//!
//! Two-sided p-values come from the regularized incomplete beta function,
//! `p = I_{ν/(ν+t²)}(ν/2, 1/2)`, evaluated with a modified-Lentz continued
//! fraction and a Lanczos log-gamma.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Sample standard deviation with the `n - 1` denominator.
pub fn sample_sd(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    /// Infinite when the differences have zero spread but nonzero mean.
    pub t: f64,
    pub p: f64,
    pub df: usize,
}

fn differences(a: &[f64], b: &[f64]) -> Result<Vec<f64>, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(StatsError::TooFewSamples {
            needed: 2,
            got: a.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
}

/// Paired t-test of `a` against `b`, pairs matched by position.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    let diffs = differences(a, b)?;
    let n = diffs.len();
    let df = n - 1;
    let m = mean(&diffs).unwrap_or(0.0);
    let sd = sample_sd(&diffs).unwrap_or(0.0);
    if sd == 0.0 {
        return Ok(if m == 0.0 {
            TTest { t: 0.0, p: 1.0, df }
        } else {
            TTest {
                t: f64::INFINITY.copysign(m),
                p: 0.0,
                df,
            }
        });
    }
    let t = m / (sd / (n as f64).sqrt());
    Ok(TTest {
        t,
        p: student_t_two_sided_p(t, df as f64),
        df,
    })
}

/// Paired effect size: mean difference over the SD of the differences.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let diffs = differences(a, b)?;
    let m = mean(&diffs).unwrap_or(0.0);
    let sd = sample_sd(&diffs).unwrap_or(0.0);
    if sd == 0.0 {
        return Ok(if m == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(m)
        });
    }
    Ok(m / sd)
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(0.5 * df, 0.5, x).clamp(0.0, 1.0)
}

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    use std::f64::consts::PI;
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// `I_x(a, b)` for `a, b > 0`, `x` in `[0, 1]`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
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
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_sd() {
        let xs = [678.0, 690.0, 666.0];
        assert_eq!(mean(&xs), Some(678.0));
        assert!((sample_sd(&xs).unwrap() - 12.0).abs() < 1e-12);
        assert_eq!(sample_sd(&[1.0]), None);
        assert_eq!(mean(&[]), None);
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn tabulated_critical_values() {
        // two-sided 5% and 1% critical values of Student's t
        for (t, df, p) in [
            (12.706_204_736, 1.0, 0.05),
            (2.776_445_105, 4.0, 0.05),
            (2.262_157_163, 9.0, 0.05),
            (3.249_835_542, 9.0, 0.01),
            (1.959_963_985, 1e7, 0.05),
        ] {
            let got = student_t_two_sided_p(t, df);
            assert!(
                (got - p).abs() < 1e-6 * p.max(1e-3),
                "df={df}: {got} vs {p}"
            );
        }
        assert_eq!(student_t_two_sided_p(0.0, 5.0), 1.0);
    }

    #[test]
    fn t_test_degenerate_rules() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(
            paired_t_test(&a, &a).unwrap(),
            TTest {
                t: 0.0,
                p: 1.0,
                df: 2
            }
        );
        let b = [-1.0, 0.0, 1.0];
        let r = paired_t_test(&a, &b).unwrap();
        assert!(r.t.is_infinite() && r.t > 0.0);
        assert_eq!(r.p, 0.0);
        assert_eq!(cohens_d(&a, &a).unwrap(), 0.0);
        assert_eq!(cohens_d(&b, &a).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn t_test_hand_example() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [0.0; 5];
        let r = paired_t_test(&a, &b).unwrap();
        assert!((r.t - 3.0 * 5f64.sqrt() / 2.5f64.sqrt()).abs() < 1e-12);
        assert!((r.p - 0.013_235_6).abs() < 1e-6);
        assert_eq!(r.df, 4);
    }

    #[test]
    fn cohens_d_definition() {
        // differences 5, 10, 15: mean 10, sd 5
        let d = cohens_d(&[5.0, 10.0, 15.0], &[0.0; 3]).unwrap();
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn input_errors() {
        assert_eq!(
            paired_t_test(&[1.0, 2.0], &[1.0]),
            Err(StatsError::LengthMismatch(2, 1))
        );
        assert!(matches!(
            cohens_d(&[1.0], &[2.0]),
            Err(StatsError::TooFewSamples { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
            (2usize..12).prop_flat_map(|n| {
                (
                    proptest::collection::vec(-100.0f64..100.0, n),
                    proptest::collection::vec(-100.0f64..100.0, n),
                )
            })
        }

        proptest! {
            #[test]
            fn antisymmetric_in_t((a, b) in pairs()) {
                let ab = paired_t_test(&a, &b).unwrap();
                let ba = paired_t_test(&b, &a).unwrap();
                prop_assert!((ab.t + ba.t).abs() <= 1e-9 * ab.t.abs().max(1.0));
                prop_assert!((ab.p - ba.p).abs() <= 1e-12);
                prop_assert!((0.0..=1.0).contains(&ab.p));
            }

            #[test]
            fn shift_invariant((a, b) in pairs(), shift in -1e3f64..1e3) {
                let r = paired_t_test(&a, &b).unwrap();
                let a2: Vec<f64> = a.iter().map(|x| x + shift).collect();
                let b2: Vec<f64> = b.iter().map(|x| x + shift).collect();
                let s = paired_t_test(&a2, &b2).unwrap();
                prop_assert!((r.t - s.t).abs() <= 1e-6 * r.t.abs().max(1.0));
                prop_assert!((r.p - s.p).abs() <= 1e-6);
            }
        }
    }
}
