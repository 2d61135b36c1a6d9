use crate::error::{Error, Result};
use crate::sweep::{parabola_vertex, SpectrumMap};

/// Peak frequencies of |S21| per field column, strongest first.
#[derive(Clone, Debug, PartialEq)]
pub struct Ridges {
    pub fields: Vec<f64>,
    pub peaks: Vec<Vec<f64>>,
}

impl Ridges {
    /// Total number of ridge points.
    pub fn count(&self) -> usize {
        self.peaks.iter().map(Vec::len).sum()
    }
}

/// Local maxima of |S21| along frequency, refined by a three-point parabola,
/// keeping at most `n_ridges` per column that are pairwise at least
/// `min_separation` apart.
pub fn extract_ridges(map: &SpectrumMap, n_ridges: usize, min_separation: f64) -> Result<Ridges> {
    if map.values().is_empty() {
        return Err(Error::EmptyMap);
    }
    if n_ridges == 0 || !(min_separation > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need n_ridges >= 1 and min_separation > 0 (got {n_ridges}, {min_separation})"
        )));
    }
    let freqs = map.freqs();
    let peaks = (0..map.fields().len())
        .map(|i| {
            let mag: Vec<f64> = map.column(i).iter().map(|z| z.norm()).collect();
            let mut candidates: Vec<(f64, f64)> = Vec::new();
            for j in 1..mag.len().saturating_sub(1) {
                if mag[j] > mag[j - 1] && mag[j] >= mag[j + 1] && mag[j] > 0.0 {
                    let (x, neg) = parabola_vertex(
                        [freqs[j - 1], freqs[j], freqs[j + 1]],
                        [-mag[j - 1], -mag[j], -mag[j + 1]],
                    );
                    candidates.push((x, -neg));
                }
            }
            candidates.sort_by(|a, b| b.1.total_cmp(&a.1));
            let mut kept: Vec<f64> = Vec::new();
            for (x, _) in candidates {
                if kept.len() == n_ridges {
                    break;
                }
                if kept.iter().all(|k| (k - x).abs() >= min_separation) {
                    kept.push(x);
                }
            }
            kept
        })
        .collect();
    Ok(Ridges {
        fields: map.fields().to_vec(),
        peaks,
    })
}

/// Half the smallest splitting between the two ridges that straddle
/// `center` within the field `window`. `None` if no column has such a pair.
pub fn estimate_coupling(ridges: &Ridges, window: (f64, f64), center: f64) -> Option<f64> {
    ridges
        .fields
        .iter()
        .zip(&ridges.peaks)
        .filter(|(h, _)| **h >= window.0 && **h <= window.1)
        .filter_map(|(_, peaks)| {
            let below = peaks
                .iter()
                .copied()
                .filter(|&p| p <= center)
                .fold(f64::NEG_INFINITY, f64::max);
            let above = peaks
                .iter()
                .copied()
                .filter(|&p| p > center)
                .fold(f64::INFINITY, f64::min);
            (below.is_finite() && above.is_finite()).then_some(above - below)
        })
        .min_by(f64::total_cmp)
        .map(|gap| gap / 2.0)
}

/// Half width at half maximum of |S21|^2 around the peak at `freq_index` in
/// column `field_index`, by linear interpolation of the crossings. For an
/// isolated mode this is the total damping `alpha + beta`.
pub fn estimate_linewidth(map: &SpectrumMap, field_index: usize, freq_index: usize) -> Option<f64> {
    let col = map.column(field_index);
    let freqs = map.freqs();
    let p: Vec<f64> = col.iter().map(|z| z.norm_sqr()).collect();
    let half = p.get(freq_index)? / 2.0;
    if half <= 0.0 {
        return None;
    }
    let cross = |a: usize, b: usize| {
        let t = (half - p[a]) / (p[b] - p[a]);
        freqs[a] + t * (freqs[b] - freqs[a])
    };
    let left = (1..=freq_index)
        .rev()
        .find(|&j| p[j - 1] <= half)
        .map(|j| cross(j - 1, j))?;
    let right = (freq_index..p.len() - 1)
        .find(|&j| p[j + 1] <= half)
        .map(|j| cross(j, j + 1))?;
    Some((right - left) / 2.0)
}
