//! Classic dynamic time warping with Euclidean local cost, the unit step
//! set {(1,0), (0,1), (1,1)}, and no band constraint. Returns the raw
//! cumulative cost (no path-length normalization).

use super::knn::euclidean;
use crate::error::{Error, Result};

pub fn dtw_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("empty sequence in DTW".into()));
    }
    if a[0].len() != b[0].len() {
        return Err(Error::InvalidInput(format!(
            "DTW dimension mismatch: {} vs {}",
            a[0].len(),
            b[0].len()
        )));
    }
    let n = a.len();
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let cost = euclidean(&a[i - 1], &b[j - 1]);
            cur[j] = cost + prev[j].min(cur[j - 1]).min(prev[j - 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(vals: &[f64]) -> Vec<Vec<f64>> {
        vals.iter().map(|&v| vec![v]).collect()
    }

    #[test]
    fn identical_sequences_have_zero_distance() {
        let s = seq(&[0.0, 1.0, 2.0, 1.0]);
        assert_eq!(dtw_distance(&s, &s).unwrap(), 0.0);
    }

    #[test]
    fn single_cell_case() {
        assert_eq!(dtw_distance(&seq(&[0.0]), &seq(&[3.0])).unwrap(), 3.0);
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        assert!(dtw_distance(&seq(&[1.0]), &[]).is_err());
        let a = vec![vec![1.0, 2.0]];
        let b = vec![vec![1.0]];
        assert!(dtw_distance(&a, &b).is_err());
    }

    #[test]
    fn symmetric_and_nonnegative() {
        let a = seq(&[0.0, 2.0, 1.0]);
        let b = seq(&[1.0, 1.0, 0.0, 2.0]);
        let d1 = dtw_distance(&a, &b).unwrap();
        let d2 = dtw_distance(&b, &a).unwrap();
        assert!((d1 - d2).abs() < 1e-12);
        assert!(d1 >= 0.0);
    }

    /// Exhaustive enumeration of monotone alignment paths: every path from
    /// (0,0) to (n-1,m-1) built from steps (1,0), (0,1), (1,1).
    fn brute_force_dtw(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        fn go(a: &[Vec<f64>], b: &[Vec<f64>], i: usize, j: usize) -> f64 {
            let cost = euclidean(&a[i], &b[j]);
            if i == a.len() - 1 && j == b.len() - 1 {
                return cost;
            }
            let mut best = f64::INFINITY;
            if i + 1 < a.len() {
                best = best.min(go(a, b, i + 1, j));
            }
            if j + 1 < b.len() {
                best = best.min(go(a, b, i, j + 1));
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                best = best.min(go(a, b, i + 1, j + 1));
            }
            cost + best
        }
        go(a, b, 0, 0)
    }

    #[test]
    fn matches_exhaustive_path_enumeration_on_small_grid() {
        // all 1-D pairs with lengths <= 4 over {0,1,2}
        fn all_seqs(len: usize) -> Vec<Vec<Vec<f64>>> {
            let mut out = Vec::new();
            let mut stack = vec![Vec::new()];
            while let Some(s) = stack.pop() {
                if s.len() == len {
                    out.push(s.iter().map(|&v: &f64| vec![v]).collect());
                    continue;
                }
                for v in [0.0, 1.0, 2.0] {
                    let mut next = s.clone();
                    next.push(v);
                    stack.push(next);
                }
            }
            out
        }
        for la in 1..=3 {
            for lb in 1..=3 {
                for a in all_seqs(la) {
                    for b in all_seqs(lb) {
                        let got = dtw_distance(&a, &b).unwrap();
                        let want = brute_force_dtw(&a, &b);
                        assert!((got - want).abs() < 1e-12, "{a:?} vs {b:?}");
                    }
                }
            }
        }
    }
}
