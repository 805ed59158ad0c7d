//! Pairwise transport distances between documents and k-NN classification.
//!
//! A document is a point cloud of embedded words weighted by frequency.
//! Pair `(i, j)` draws its directions from a seed derived from
//! `(min(i,j), max(i,j))`, so the matrix does not depend on evaluation order
//! or thread count.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;

use crate::divergences::UnbalancedParams;
use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::ot1d::sliced_ot_loss;
use crate::slicing::sample_directions;
use crate::suot::suot;
use crate::usot::{usot, usot_stochastic};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMode {
    /// Sliced OT between the documents normalised to probabilities.
    Sot,
    Suot,
    Usot,
    UsotStochastic,
}

impl fmt::Display for DistanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceMode::Sot => "sot",
            DistanceMode::Suot => "suot",
            DistanceMode::Usot => "usot",
            DistanceMode::UsotStochastic => "usot-stochastic",
        })
    }
}

impl FromStr for DistanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sot" => Ok(DistanceMode::Sot),
            "suot" => Ok(DistanceMode::Suot),
            "usot" => Ok(DistanceMode::Usot),
            "usot-stochastic" => Ok(DistanceMode::UsotStochastic),
            other => Err(Error::InvalidParameter(format!("unknown mode {other:?}"))),
        }
    }
}

/// Distance between two measures with directions drawn from `params.seed`.
///
/// `Sot` requires equal masses; see [`distance_matrix`] for the normalised
/// variant used on documents.
pub fn distance(
    alpha: &DiscreteMeasure,
    beta: &DiscreteMeasure,
    mode: DistanceMode,
    params: &UnbalancedParams,
) -> Result<f64> {
    if alpha.dim() != beta.dim() {
        return Err(Error::DimensionMismatch { expected: alpha.dim(), found: beta.dim() });
    }
    if mode == DistanceMode::UsotStochastic {
        return Ok(usot_stochastic(alpha, beta, params)?.0);
    }
    let dirs = sample_directions(alpha.dim(), params.n_projections, params.seed)?;
    match mode {
        DistanceMode::Sot => sliced_ot_loss(alpha, beta, &dirs, params.p),
        DistanceMode::Suot => Ok(suot(alpha, beta, &dirs, params)?.0),
        DistanceMode::Usot => Ok(usot(alpha, beta, &dirs, params)?.0),
        DistanceMode::UsotStochastic => unreachable!(),
    }
}

/// Seed for the unordered pair `{i, j}`.
pub fn pair_seed(seed: u64, i: usize, j: usize) -> u64 {
    let (lo, hi) = (i.min(j) as u64, i.max(j) as u64);
    let mut z = seed ^ lo.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ hi.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    // splitmix64 finaliser
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Symmetric matrix of pairwise distances.
///
/// Only `i ≤ j` is computed; `(j, i)` copies `(i, j)`. In `Sot` mode the
/// documents are first normalised to probability measures.
pub fn distance_matrix(docs: &[DiscreteMeasure], mode: DistanceMode, params: &UnbalancedParams) -> Result<Array2<f64>> {
    let normalised;
    let docs = if mode == DistanceMode::Sot {
        normalised = docs.iter().map(DiscreteMeasure::normalize_to_probability).collect::<Result<Vec<_>>>()?;
        &normalised[..]
    } else {
        docs
    };
    let n = docs.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mut p = params.clone();
            p.seed = pair_seed(params.seed, i, j);
            distance(&docs[i], &docs[j], mode, &p)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut out = Array2::zeros((n, n));
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        out[[i, j]] = v;
        out[[j, i]] = v;
    }
    Ok(out)
}

/// Majority vote among the `k` nearest training documents of every test
/// document. Ties between labels go to the label of the closest neighbour
/// among the tied ones; equal distances are broken by the lower index.
pub fn knn_predict(
    matrix: &Array2<f64>,
    labels: &[String],
    train: &[usize],
    test: &[usize],
    k: usize,
) -> Result<Vec<String>> {
    if k == 0 || train.is_empty() {
        return Err(Error::InvalidParameter("k-NN needs k >= 1 and a non-empty training set".into()));
    }
    let n = matrix.nrows();
    if matrix.ncols() != n || labels.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} matrix for {} labels",
            matrix.nrows(),
            matrix.ncols(),
            labels.len()
        )));
    }
    if let Some(&bad) = train.iter().chain(test).find(|&&i| i >= n) {
        return Err(Error::InvalidParameter(format!("document index {bad} out of range")));
    }
    Ok(test
        .iter()
        .map(|&q| {
            let mut nn: Vec<usize> = train.iter().copied().filter(|&i| i != q).collect();
            nn.sort_by(|&a, &b| matrix[[q, a]].total_cmp(&matrix[[q, b]]).then(a.cmp(&b)));
            nn.truncate(k);
            // label -> (votes, rank of its closest member)
            let mut votes: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
            for (rank, &i) in nn.iter().enumerate() {
                let e = votes.entry(labels[i].as_str()).or_insert((0, rank));
                e.0 += 1;
            }
            votes
                .into_iter()
                .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
                .map(|(label, _)| label.to_string())
                .unwrap_or_default()
        })
        .collect())
}

/// Fraction of predictions equal to the reference labels.
pub fn accuracy(predicted: &[String], truth: &[String]) -> f64 {
    if predicted.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / predicted.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn pair_seed_is_symmetric() {
        assert_eq!(pair_seed(7, 3, 9), pair_seed(7, 9, 3));
        assert_ne!(pair_seed(7, 3, 9), pair_seed(7, 3, 8));
    }

    #[test]
    fn mode_round_trip() {
        for m in [DistanceMode::Sot, DistanceMode::Suot, DistanceMode::Usot, DistanceMode::UsotStochastic] {
            assert_eq!(m.to_string().parse::<DistanceMode>().unwrap(), m);
        }
        assert!("wmd".parse::<DistanceMode>().is_err());
    }

    #[test]
    fn knn_majority_and_ties() {
        let m = array![[0.0, 1.0, 2.0, 3.0], [1.0, 0.0, 1.0, 1.0], [2.0, 1.0, 0.0, 1.0], [3.0, 1.0, 1.0, 0.0]];
        let labels: Vec<String> = ["a", "a", "b", "b"].iter().map(|s| s.to_string()).collect();
        let pred = knn_predict(&m, &labels, &[1, 2, 3], &[0], 1).unwrap();
        assert_eq!(pred, vec!["a"]);
        // neighbours 1 (a) and 2 (b) tie on votes; 1 is closer
        let pred = knn_predict(&m, &labels, &[1, 2], &[0], 2).unwrap();
        assert_eq!(pred, vec!["a"]);
        let pred = knn_predict(&m, &labels, &[1, 2, 3], &[0], 3).unwrap();
        assert_eq!(pred, vec!["b"]);
        assert!(knn_predict(&m, &labels, &[], &[0], 1).is_err());
        assert_eq!(accuracy(&pred, &["b".to_string()]), 1.0);
    }

    #[test]
    fn matrix_is_symmetric_with_small_diagonal() {
        let docs = vec![
            DiscreteMeasure::new(array![[0.0, 0.0], [1.0, 0.5]], vec![1.0, 2.0]).unwrap(),
            DiscreteMeasure::new(array![[0.5, 0.0], [2.0, 1.0], [0.0, 1.0]], vec![0.5, 0.5, 1.0]).unwrap(),
            DiscreteMeasure::new(array![[3.0, 3.0]], vec![0.7]).unwrap(),
        ];
        let params = UnbalancedParams::default().with_projections(16).with_fw_iters(5);
        for mode in [DistanceMode::Sot, DistanceMode::Suot, DistanceMode::Usot, DistanceMode::UsotStochastic] {
            let m = distance_matrix(&docs, mode, &params).unwrap();
            for i in 0..3 {
                assert!(m[[i, i]].abs() <= 1e-9, "{mode}: {}", m[[i, i]]);
                for j in 0..3 {
                    assert_eq!(m[[i, j]], m[[j, i]]);
                }
            }
        }
    }
}
