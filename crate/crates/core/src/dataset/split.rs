use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::rng::stream_rng;

/// Demo indices for each partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub eval: Vec<usize>,
    pub seed: u64,
}

/// Shuffle `0..n_demos` with `seed`, then slice off train, val and eval.
pub fn split_dataset(n_demos: usize, counts: (usize, usize, usize), seed: u64) -> Result<SplitSpec, DatasetError> {
    let (a, b, c) = counts;
    let requested = a + b + c;
    if requested > n_demos {
        return Err(DatasetError::InsufficientDemos {
            requested,
            available: n_demos,
        });
    }
    let mut order: Vec<usize> = (0..n_demos).collect();
    order.shuffle(&mut stream_rng(seed));
    Ok(SplitSpec {
        train: order[..a].to_vec(),
        val: order[a..a + b].to_vec(),
        eval: order[a + b..requested].to_vec(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn sizes_disjointness_and_determinism() {
        let s = split_dataset(250, (120, 40, 90), 3).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.eval.len()), (120, 40, 90));
        let all: HashSet<usize> = s.train.iter().chain(&s.val).chain(&s.eval).copied().collect();
        assert_eq!(all.len(), 250);
        assert_eq!(s, split_dataset(250, (120, 40, 90), 3).unwrap());
        assert_ne!(s.train, split_dataset(250, (120, 40, 90), 4).unwrap().train);
    }

    #[test]
    fn partial_selection_and_insufficient() {
        let s = split_dataset(50, (24, 8, 10), 0).unwrap();
        assert_eq!(s.eval.len(), 10);
        assert_eq!(
            split_dataset(10, (5, 5, 1), 0),
            Err(DatasetError::InsufficientDemos { requested: 11, available: 10 })
        );
    }
}
