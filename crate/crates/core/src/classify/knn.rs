//! k-nearest-neighbor prediction with Euclidean or DTW distance.
//!
//! Vote ties break toward the class with the smaller summed distance among
//! the k neighbors, then toward the negative class. Equal distances rank by
//! training-row index, so permuting the training set cannot change the
//! selected neighbor multiset.

use super::{dtw::dtw_distance, DynamicDataset, StaticDataset};
use crate::error::{Error, Result};

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn vote(mut dists: Vec<(f64, usize, bool)>, k: usize) -> Result<bool> {
    if dists.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    if k == 0 || k > dists.len() {
        return Err(Error::InvalidInput(format!(
            "k = {k} out of range for {} training rows",
            dists.len()
        )));
    }
    dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut pos_votes = 0usize;
    let mut pos_dist = 0.0;
    let mut neg_dist = 0.0;
    for &(d, _, label) in dists.iter().take(k) {
        if label {
            pos_votes += 1;
            pos_dist += d;
        } else {
            neg_dist += d;
        }
    }
    let neg_votes = k - pos_votes;
    Ok(if pos_votes != neg_votes {
        pos_votes > neg_votes
    } else if pos_dist != neg_dist {
        pos_dist < neg_dist
    } else {
        false
    })
}

/// Plurality vote among the k nearest rows under Euclidean distance.
pub fn knn_predict(train: &StaticDataset, query: &[f64], k: usize) -> Result<bool> {
    let dists = train
        .rows
        .iter()
        .zip(&train.labels)
        .enumerate()
        .map(|(i, (row, &label))| (euclidean(row, query), i, label))
        .collect();
    vote(dists, k)
}

/// Plurality vote among the k nearest sequences under DTW distance.
pub fn dtw_knn_predict(train: &DynamicDataset, query: &[Vec<f64>], k: usize) -> Result<bool> {
    let mut dists = Vec::with_capacity(train.sequences.len());
    for (i, (seq, &label)) in train.sequences.iter().zip(&train.labels).enumerate() {
        dists.push((dtw_distance(seq, query)?, i, label));
    }
    vote(dists, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[(&[f64], bool)]) -> StaticDataset {
        StaticDataset {
            rows: rows.iter().map(|(r, _)| r.to_vec()).collect(),
            labels: rows.iter().map(|&(_, l)| l).collect(),
        }
    }

    #[test]
    fn k1_returns_nearest_label() {
        let train = ds(&[(&[0.0, 0.0], false), (&[10.0, 10.0], true)]);
        assert!(!knn_predict(&train, &[1.0, 1.0], 1).unwrap());
        assert!(knn_predict(&train, &[9.0, 9.0], 1).unwrap());
    }

    #[test]
    fn vote_tie_breaks_on_summed_distance() {
        // k=2, one neighbor per class, class-0 neighbor closer
        let train = ds(&[(&[0.0], false), (&[3.0], true)]);
        assert!(!knn_predict(&train, &[1.0], 2).unwrap());
        // symmetric case: class-1 closer
        assert!(knn_predict(&train, &[2.5], 2).unwrap());
    }

    #[test]
    fn full_tie_prefers_negative_class() {
        let train = ds(&[(&[-1.0], false), (&[1.0], true)]);
        assert!(!knn_predict(&train, &[0.0], 2).unwrap());
    }

    #[test]
    fn errors_on_bad_k_or_empty() {
        let train = ds(&[(&[0.0], false)]);
        assert!(knn_predict(&train, &[0.0], 2).is_err());
        assert!(knn_predict(&train, &[0.0], 0).is_err());
        let empty = StaticDataset::default();
        assert!(knn_predict(&empty, &[0.0], 1).is_err());
    }

    #[test]
    fn permutation_invariance() {
        let base = vec![
            (vec![0.1, 0.3], false),
            (vec![0.2, 0.9], true),
            (vec![0.8, 0.4], true),
            (vec![0.5, 0.5], false),
            (vec![0.9, 0.9], true),
        ];
        let queries = [[0.4, 0.4], [0.7, 0.8], [0.05, 0.1]];
        let perms: [[usize; 5]; 3] = [[0, 1, 2, 3, 4], [4, 3, 2, 1, 0], [2, 0, 4, 1, 3]];
        for k in [1, 3, 5] {
            for q in &queries {
                let mut answers = Vec::new();
                for perm in &perms {
                    let train = StaticDataset {
                        rows: perm.iter().map(|&i| base[i].0.clone()).collect(),
                        labels: perm.iter().map(|&i| base[i].1).collect(),
                    };
                    answers.push(knn_predict(&train, q, k).unwrap());
                }
                assert!(answers.windows(2).all(|w| w[0] == w[1]));
            }
        }
    }

    #[test]
    fn matches_brute_force_full_sort() {
        // brute force: sort all rows by distance, take k, majority with the
        // same tie rules
        let mut state = 0x1234_5678_u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 33) as f64 / (1u64 << 31) as f64) - 0.5
        };
        for trial in 0..50 {
            let n = 3 + (trial % 17);
            let d = 1 + (trial % 5);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| next()).collect()).collect();
            let labels: Vec<bool> = (0..n).map(|_| next() > 0.0).collect();
            let query: Vec<f64> = (0..d).map(|_| next()).collect();
            let train = StaticDataset {
                rows: rows.clone(),
                labels: labels.clone(),
            };
            for k in [1, 3, 5] {
                if k > n {
                    continue;
                }
                let mut pairs: Vec<(f64, usize)> = rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| (euclidean(r, &query), i))
                    .collect();
                pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                let top = &pairs[..k];
                let pos: usize = top.iter().filter(|&&(_, i)| labels[i]).count();
                let expect = if 2 * pos != k {
                    2 * pos > k
                } else {
                    let pd: f64 = top.iter().filter(|&&(_, i)| labels[i]).map(|&(d, _)| d).sum();
                    let nd: f64 = top.iter().filter(|&&(_, i)| !labels[i]).map(|&(d, _)| d).sum();
                    if pd != nd {
                        pd < nd
                    } else {
                        false
                    }
                };
                assert_eq!(knn_predict(&train, &query, k).unwrap(), expect);
            }
        }
    }
}
