//! Word error rate via Levenshtein alignment with unit costs and an
//! insertion/deletion/substitution decomposition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WerBreakdown {
    pub wer_percent: f64,
    pub insertions: usize,
    pub deletions: usize,
    pub substitutions: usize,
    pub ref_len: usize,
}

impl WerBreakdown {
    pub fn edits(&self) -> usize {
        self.insertions + self.deletions + self.substitutions
    }
}

/// Levenshtein alignment of `hyp` against `reference`. Backtrace ties prefer
/// substitution over insertion over deletion, fixed for determinism. An
/// empty reference against a non-empty hypothesis has no defined rate and is
/// rejected.
pub fn compute_wer<T: PartialEq>(reference: &[T], hyp: &[T]) -> Result<WerBreakdown> {
    if reference.is_empty() {
        return if hyp.is_empty() {
            Ok(WerBreakdown {
                wer_percent: 0.0,
                insertions: 0,
                deletions: 0,
                substitutions: 0,
                ref_len: 0,
            })
        } else {
            Err(Error::UndefinedWer)
        };
    }
    let n = reference.len();
    let m = hyp.len();
    let mut dist = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in dist.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        dist[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub_cost = usize::from(reference[i - 1] != hyp[j - 1]);
            let sub = dist[i - 1][j - 1] + sub_cost;
            let ins = dist[i][j - 1] + 1;
            let del = dist[i - 1][j] + 1;
            dist[i][j] = sub.min(ins).min(del);
        }
    }
    // backtrace, preferring match/substitution, then insertion, then deletion
    let (mut i, mut j) = (n, m);
    let (mut ins, mut del, mut sub) = (0usize, 0usize, 0usize);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let sub_cost = usize::from(reference[i - 1] != hyp[j - 1]);
            if dist[i][j] == dist[i - 1][j - 1] + sub_cost {
                sub += sub_cost;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && dist[i][j] == dist[i][j - 1] + 1 {
            ins += 1;
            j -= 1;
            continue;
        }
        del += 1;
        i -= 1;
    }
    Ok(WerBreakdown {
        wer_percent: 100.0 * (ins + del + sub) as f64 / n as f64,
        insertions: ins,
        deletions: del,
        substitutions: sub,
        ref_len: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn identical_sequences_have_zero_wer() {
        let w = compute_wer(&toks("the old man"), &toks("the old man")).unwrap();
        assert_eq!(w.wer_percent, 0.0);
        assert_eq!((w.insertions, w.deletions, w.substitutions), (0, 0, 0));
    }

    #[test]
    fn single_deletion() {
        let w = compute_wer(&toks("the old man"), &toks("the man")).unwrap();
        assert_eq!((w.insertions, w.deletions, w.substitutions), (0, 1, 0));
        assert!((w.wer_percent - 100.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn empty_reference_rules() {
        assert!(matches!(
            compute_wer(&toks("a"), &toks("")),
            Ok(WerBreakdown { deletions: 1, .. })
        ));
        assert!(matches!(
            compute_wer::<&str>(&[], &toks("a")),
            Err(Error::UndefinedWer)
        ));
        let both = compute_wer::<&str>(&[], &[]).unwrap();
        assert_eq!(both.wer_percent, 0.0);
    }

    #[test]
    fn decomposition_sums_to_edit_distance() {
        // brute-force edit distance without decomposition
        fn edit_distance(a: &[&str], b: &[&str]) -> usize {
            let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
            for i in 0..=a.len() {
                d[i][0] = i;
            }
            for j in 0..=b.len() {
                d[0][j] = j;
            }
            for i in 1..=a.len() {
                for j in 1..=b.len() {
                    let c = usize::from(a[i - 1] != b[j - 1]);
                    d[i][j] = (d[i - 1][j - 1] + c).min(d[i][j - 1] + 1).min(d[i - 1][j] + 1);
                }
            }
            d[a.len()][b.len()]
        }
        let r = toks("a b c a d b");
        let h = toks("b c d d a");
        let w = compute_wer(&r, &h).unwrap();
        assert_eq!(w.edits(), edit_distance(&r, &h));
    }
}
