use serde::{Deserialize, Serialize};

use crate::world::Sample;

/// Normalized histogram over [-1, 1] with bins aligned to multiples of the width,
/// so zero always starts a bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// Lower edge of the first bin.
    pub lo: f64,
    /// Fraction of values per bin; sums to 1 unless `count` is 0.
    pub mass: Vec<f64>,
    pub count: usize,
    pub mean: f64,
}

impl Histogram {
    pub fn from_values(values: &[f64], bin_width: f64) -> Self {
        assert!(bin_width > 0.0, "bin width must be positive");
        let below = (1.0 / bin_width - 1e-9).ceil() as usize;
        let bins = 2 * below;
        let mut counts = vec![0usize; bins];
        for &v in values {
            let k = (v / bin_width).floor() as i64 + below as i64;
            counts[k.clamp(0, bins as i64 - 1) as usize] += 1;
        }
        let n = values.len();
        let mass = counts
            .iter()
            .map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
            .collect();
        let mean = if n == 0 { 0.0 } else { values.iter().sum::<f64>() / n as f64 };
        Self {
            bin_width,
            lo: -(below as f64) * bin_width,
            mass,
            count: n,
            mean,
        }
    }

    /// Index of the bin holding `v`.
    pub fn bin_of(&self, v: f64) -> usize {
        let below = (-self.lo / self.bin_width).round() as i64;
        ((v / self.bin_width).floor() as i64 + below).clamp(0, self.mass.len() as i64 - 1) as usize
    }

    pub fn bin_lower(&self, k: usize) -> f64 {
        self.lo + k as f64 * self.bin_width
    }
}

/// ΔIoU distribution of the matched samples.
pub fn delta_iou_histogram(samples: &[Sample], bin_width: f64) -> Histogram {
    let values: Vec<f64> = samples
        .iter()
        .filter(|s| s.matched_gt.is_some())
        .map(Sample::delta_iou)
        .collect();
    Histogram::from_values(&values, bin_width)
}
