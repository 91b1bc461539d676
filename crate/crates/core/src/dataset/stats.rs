use serde::{Deserialize, Serialize};

use super::{DatasetError, Manifest};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_demos: usize,
    /// Trajectory length (cm).
    pub length: Percentiles,
    /// Coverage area (cm²).
    pub area: Percentiles,
}

/// Percentile `q ∈ [0, 100]` of sorted data, interpolating linearly between
/// the order statistics at fractional rank `q/100 · (n − 1)`. The lerp is
/// evaluated from the nearer end, as numpy's default method does, so results
/// agree bit for bit.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let rank = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let t = rank - lo as f64;
    let (a, b) = (sorted[lo], sorted[hi]);
    let d = b - a;
    if t >= 0.5 {
        b - d * (1.0 - t)
    } else {
        a + d * t
    }
}

pub fn percentiles(values: &[f64]) -> Result<Percentiles, DatasetError> {
    if values.is_empty() {
        return Err(DatasetError::Empty);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(Percentiles {
        p25: percentile(&v, 25.0),
        p50: percentile(&v, 50.0),
        p75: percentile(&v, 75.0),
    })
}

pub fn dataset_stats(manifest: &Manifest) -> Result<CorpusStats, DatasetError> {
    let lengths: Vec<f64> = manifest.demos.iter().map(|d| d.path_length).collect();
    let areas: Vec<f64> = manifest.demos.iter().map(|d| d.area).collect();
    Ok(CorpusStats {
        n_demos: manifest.demos.len(),
        length: percentiles(&lengths)?,
        area: percentiles(&areas)?,
    })
}

impl std::fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "demonstrations: {}", self.n_demos)?;
        writeln!(f, "{:<22} {:>10} {:>10} {:>10}", "statistic", "p25", "p50", "p75")?;
        for (name, p) in [("trajectory length (cm)", self.length), ("coverage area (cm^2)", self.area)] {
            writeln!(f, "{name:<22} {:>10.4} {:>10.4} {:>10.4}", p.p25, p.p50, p.p75)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn median_of_four() {
        let p = percentiles(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(p.p50, 2.5);
        assert_eq!(p.p25, 1.75);
        assert_eq!(p.p75, 3.25);
    }

    #[test]
    fn matches_numpy_bitwise() {
        // np.percentile(v, [25, 50, 75])
        let p = percentiles(&[0.1, 7.3, 2.2, 9.9, 4.4, 0.7, 3.3]).unwrap();
        assert_eq!((p.p25, p.p50, p.p75), (1.4500000000000002, 3.3, 5.85));
        let w: Vec<f64> = (1..=10).map(|x| x as f64 * 1.1).collect();
        let p = percentiles(&w).unwrap();
        assert_eq!((p.p25, p.p50, p.p75), (3.575, 6.050000000000001, 8.525));
    }

    #[test]
    fn single_value_and_empty() {
        let p = percentiles(&[7.29]).unwrap();
        assert_eq!((p.p25, p.p50, p.p75), (7.29, 7.29, 7.29));
        assert_eq!(percentiles(&[]), Err(DatasetError::Empty));
    }

    proptest! {
        #[test]
        fn percentiles_bracket_the_right_share(values in prop::collection::vec(-100.0..100.0f64, 1..60)) {
            let p = percentiles(&values).unwrap();
            prop_assert!(p.p25 <= p.p50 && p.p50 <= p.p75);
            // At least a quarter of the data lies at or below p25, and at or above p75.
            let n = values.len() as f64;
            let below = values.iter().filter(|v| **v <= p.p25).count() as f64;
            let above = values.iter().filter(|v| **v >= p.p75).count() as f64;
            prop_assert!(below >= (0.25 * (n - 1.0)).floor() + 1.0);
            prop_assert!(above >= (0.25 * (n - 1.0)).floor() + 1.0);
        }
    }
}
