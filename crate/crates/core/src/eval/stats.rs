//! Statistical tests: Cochran's Q over matched binary responses, the
//! pooled-variance two-sample t-test, and Bonferroni-corrected
//! stage-versus-control feature comparisons.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CochranQ {
    pub q: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Cochran's Q over a speakers x treatments binary matrix.
/// `Q = k(k-1) * sum_j (C_j - Cbar)^2 / (k * sum_i R_i - sum_i R_i^2)`;
/// a zero denominator (all-constant rows) yields Q = 0, p = 1.
pub fn cochrans_q(matrix: &[Vec<bool>]) -> Result<CochranQ> {
    if matrix.is_empty() {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    let k = matrix[0].len();
    if k < 2 {
        return Err(Error::InvalidInput("need at least two treatments".into()));
    }
    if matrix.iter().any(|row| row.len() != k) {
        return Err(Error::InvalidInput("ragged matrix".into()));
    }
    let mut col_sums = vec![0.0; k];
    let mut row_sum_total = 0.0;
    let mut row_sq_total = 0.0;
    for row in matrix {
        let r = row.iter().filter(|&&v| v).count() as f64;
        row_sum_total += r;
        row_sq_total += r * r;
        for (j, &v) in row.iter().enumerate() {
            if v {
                col_sums[j] += 1.0;
            }
        }
    }
    let kf = k as f64;
    let cbar = row_sum_total / kf;
    let numer: f64 = col_sums.iter().map(|c| (c - cbar) * (c - cbar)).sum();
    let denom = kf * row_sum_total - row_sq_total;
    let df = k - 1;
    if denom <= 0.0 {
        return Ok(CochranQ {
            q: 0.0,
            df,
            p_value: 1.0,
        });
    }
    let q = kf * (kf - 1.0) * numer / denom;
    let chi = ChiSquared::new(df as f64).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(CochranQ {
        q,
        df,
        p_value: 1.0 - chi.cdf(q),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

fn sample_var(values: &[f64], mean: f64) -> f64 {
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Classic independent-samples t-test with pooled variance, two-tailed.
pub fn t_test_two_sample(a: &[f64], b: &[f64]) -> Result<TTest> {
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidInput("each sample needs at least two values".into()));
    }
    let m1 = a.iter().sum::<f64>() / n1;
    let m2 = b.iter().sum::<f64>() / n2;
    let sp2 = ((n1 - 1.0) * sample_var(a, m1) + (n2 - 1.0) * sample_var(b, m2)) / (n1 + n2 - 2.0);
    let df = n1 + n2 - 2.0;
    let se = (sp2 * (1.0 / n1 + 1.0 / n2)).sqrt();
    if se == 0.0 {
        // identical constant samples: no evidence of difference
        return Ok(TTest {
            t: 0.0,
            df,
            p_value: 1.0,
        });
    }
    let t = (m1 - m2) / se;
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(TTest { t, df, p_value: p })
}

/// Direction of a significant stage-versus-control difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Increase,
    Decrease,
    NoChange,
}

/// Per-feature comparison of one stage population against the control
/// population, Bonferroni-corrected across all features in the comparison.
/// `stage_rows`/`control_rows` are feature rows (same width); a feature is
/// classified Increase/Decrease only when its corrected p is below `alpha`.
pub fn stage_feature_directions(
    stage_rows: &[Vec<f64>],
    control_rows: &[Vec<f64>],
    alpha: f64,
) -> Result<Vec<Direction>> {
    if stage_rows.len() < 2 || control_rows.len() < 2 {
        return Err(Error::InvalidInput("need at least two rows per population".into()));
    }
    let dim = stage_rows[0].len();
    let family = dim as f64;
    let mut out = Vec::with_capacity(dim);
    for d in 0..dim {
        let a: Vec<f64> = stage_rows.iter().map(|r| r[d]).collect();
        let b: Vec<f64> = control_rows.iter().map(|r| r[d]).collect();
        let test = t_test_two_sample(&a, &b)?;
        let corrected = (test.p_value * family).min(1.0);
        if corrected < alpha {
            let ma = a.iter().sum::<f64>() / a.len() as f64;
            let mb = b.iter().sum::<f64>() / b.len() as f64;
            out.push(if ma > mb { Direction::Increase } else { Direction::Decrease });
        } else {
            out.push(Direction::NoChange);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cochran_identical_columns_gives_zero() {
        let m = vec![vec![true, true, true], vec![false, false, false]];
        let r = cochrans_q(&m).unwrap();
        assert_eq!(r.q, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn cochran_matches_scripted_computation() {
        // frozen from an independent scipy computation
        let m = vec![
            vec![true, true, false],
            vec![true, false, false],
            vec![true, true, true],
            vec![false, false, false],
        ];
        let r = cochrans_q(&m).unwrap();
        assert!((r.q - 3.0).abs() < 1e-9);
        assert_eq!(r.df, 2);
        assert!((r.p_value - 0.22313016014842982).abs() < 1e-6);

        let m2 = vec![
            vec![true, false, true, true],
            vec![true, true, true, true],
            vec![false, false, true, false],
            vec![true, false, false, true],
            vec![false, true, true, true],
        ];
        let r2 = cochrans_q(&m2).unwrap();
        assert!((r2.q - 2.5384615384615383).abs() < 1e-9);
        assert_eq!(r2.df, 3);
        assert!((r2.p_value - 0.4683803042971356).abs() < 1e-6);
    }

    #[test]
    fn cochran_invariant_to_row_and_column_order() {
        let m = vec![
            vec![true, false, true],
            vec![false, false, true],
            vec![true, true, true],
            vec![false, true, false],
        ];
        let base = cochrans_q(&m).unwrap();
        let rows_swapped = vec![m[3].clone(), m[1].clone(), m[0].clone(), m[2].clone()];
        let cols_swapped: Vec<Vec<bool>> =
            m.iter().map(|r| vec![r[2], r[0], r[1]]).collect();
        assert!((cochrans_q(&rows_swapped).unwrap().q - base.q).abs() < 1e-12);
        assert!((cochrans_q(&cols_swapped).unwrap().q - base.q).abs() < 1e-12);
    }

    #[test]
    fn t_test_matches_scripted_computation() {
        // frozen from scipy.stats.ttest_ind(equal_var=True)
        let a = [2.1, 2.5, 1.9, 2.3, 2.7];
        let b = [3.0, 3.4, 2.9, 3.6];
        let r = t_test_two_sample(&a, &b).unwrap();
        assert!((r.t - -4.2772831120845884).abs() < 1e-9);
        assert!((r.p_value - 0.0036676251544393106).abs() < 1e-6);

        let a2 = [0.5, 0.1, -0.2, 0.8, 0.45, 0.3];
        let b2 = [0.52, 0.15, -0.1, 0.6];
        let r2 = t_test_two_sample(&a2, &b2).unwrap();
        assert!((r2.t - 0.14851688136673696).abs() < 1e-9);
        assert!((r2.p_value - 0.8856102246060994).abs() < 1e-6);

        let same = [1.0, 2.0, 3.0];
        let r3 = t_test_two_sample(&same, &same).unwrap();
        assert_eq!(r3.t, 0.0);
        assert!((r3.p_value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn identical_populations_report_no_change() {
        let rows = vec![vec![1.0, 5.0], vec![2.0, 5.5], vec![3.0, 4.5]];
        let dirs = stage_feature_directions(&rows, &rows, 0.05).unwrap();
        assert_eq!(dirs, vec![Direction::NoChange, Direction::NoChange]);
    }

    #[test]
    fn large_shift_reports_increase() {
        let control: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.01]).collect();
        let stage: Vec<Vec<f64>> = (0..10).map(|i| vec![5.0 + i as f64 * 0.01]).collect();
        let dirs = stage_feature_directions(&stage, &control, 0.05).unwrap();
        assert_eq!(dirs, vec![Direction::Increase]);
    }
}
