//! Quantile histogram bins, frozen once per dataset before boosting.

use crate::data::{FeatureMatrix, CATEGORY_MISSING};

#[derive(Debug, Clone)]
pub struct NumericBins {
    /// Bin `b` holds values `x <= cuts[b]` (and `> cuts[b-1]`); the last
    /// regular bin is unbounded above.
    pub cuts: Vec<f64>,
    pub bins: Vec<u16>,
}

impl NumericBins {
    pub fn n_regular(&self) -> usize {
        self.cuts.len() + 1
    }

    /// Index of the bin reserved for missing values.
    pub fn missing_bin(&self) -> usize {
        self.cuts.len() + 1
    }
}

#[derive(Debug, Clone)]
pub struct CategoricalBins {
    pub n_categories: usize,
    /// Category code per row, or `n_categories` for missing.
    pub bins: Vec<u32>,
}

impl CategoricalBins {
    pub fn missing_bin(&self) -> usize {
        self.n_categories
    }
}

/// Feature matrix together with its binned representation.
#[derive(Debug, Clone)]
pub struct BinnedDataset {
    pub raw: FeatureMatrix,
    pub numeric: Vec<NumericBins>,
    pub categorical: Vec<CategoricalBins>,
    pub max_bins: usize,
}

impl BinnedDataset {
    pub fn new(raw: &FeatureMatrix, max_bins: usize) -> Self {
        let max_bins = max_bins.clamp(2, u16::MAX as usize - 1);
        let numeric = raw
            .numeric
            .iter()
            .map(|col| {
                let cuts = quantile_cuts(col, max_bins);
                let bins = col
                    .iter()
                    .map(|&x| {
                        if x.is_nan() {
                            (cuts.len() + 1) as u16
                        } else {
                            cuts.partition_point(|&c| c < x) as u16
                        }
                    })
                    .collect();
                NumericBins { cuts, bins }
            })
            .collect();
        let categorical = raw
            .categorical
            .iter()
            .map(|col| {
                let n_categories = col
                    .iter()
                    .filter(|&&c| c != CATEGORY_MISSING)
                    .map(|&c| c as usize + 1)
                    .max()
                    .unwrap_or(0);
                let bins = col
                    .iter()
                    .map(|&c| if c == CATEGORY_MISSING { n_categories as u32 } else { c })
                    .collect();
                CategoricalBins { n_categories, bins }
            })
            .collect();
        Self {
            raw: raw.clone(),
            numeric,
            categorical,
            max_bins,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.raw.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.numeric.len() + self.categorical.len()
    }
}

/// Cut points between distinct values. With at most `max_bins` distinct
/// values every gap gets a cut, so binned splits coincide with exact ones.
pub fn quantile_cuts(values: &[f64], max_bins: usize) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    if sorted.is_empty() {
        return Vec::new();
    }
    sorted.sort_by(f64::total_cmp);

    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for v in sorted.iter().copied() {
        match distinct.last_mut() {
            Some((last, count)) if *last == v => *count += 1,
            _ => distinct.push((v, 1)),
        }
    }
    if distinct.len() <= max_bins {
        return distinct
            .windows(2)
            .map(|w| midpoint(w[0].0, w[1].0))
            .collect();
    }

    let n = sorted.len() as f64;
    let mut cuts = Vec::with_capacity(max_bins - 1);
    let mut cumulative = 0usize;
    let mut next_quantile = 1usize;
    for w in distinct.windows(2) {
        cumulative += w[0].1;
        if cuts.len() + 1 >= max_bins {
            break;
        }
        if cumulative as f64 >= next_quantile as f64 * n / max_bins as f64 {
            cuts.push(midpoint(w[0].0, w[1].0));
            while next_quantile as f64 * n / max_bins as f64 <= cumulative as f64 {
                next_quantile += 1;
            }
        }
    }
    cuts
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    // keep a < cut < b even when the gap is a single ulp
    if m >= b {
        a
    } else {
        m
    }
}
