//! Quantitative evaluation: gauge-aligned mean absolute depth error,
//! discontinuity localization scores, and `g'` sparsity statistics.

use serde::Serialize;

use crate::error::Error;
use crate::graph::PixelGraph;
use crate::grid::ScalarMap;
use crate::scene::Seam;
use crate::Result;

/// One evaluation record, also serialized as a JSON-lines entry.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub made: f64,
    /// Median offset removed before the error was measured.
    pub offset: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonzero_gprime_fraction: Option<f64>,
}

/// Mean absolute depth error after removing the median of `pred - gt` over
/// the mask. Integration recovers depth only up to one offset per connected
/// region, so the gauge must be fixed before measuring; the median is robust
/// to the outliers this metric is meant to expose.
pub fn made(pred: &ScalarMap, gt: &ScalarMap, mask: &[bool]) -> Result<f64> {
    made_with_offset(pred, gt, mask).map(|(e, _)| e)
}

/// As [`made`], also returning the offset that was removed.
pub fn made_with_offset(pred: &ScalarMap, gt: &ScalarMap, mask: &[bool]) -> Result<(f64, f64)> {
    let diffs = masked_diffs(pred, gt, mask)?;
    let offset = median(&diffs);
    let err = diffs.iter().map(|d| (d - offset).abs()).sum::<f64>() / diffs.len() as f64;
    Ok((err, offset))
}

/// Mean absolute depth error without any gauge alignment, for protocols that
/// anchor depth externally.
pub fn made_unaligned(pred: &ScalarMap, gt: &ScalarMap, mask: &[bool]) -> Result<f64> {
    let diffs = masked_diffs(pred, gt, mask)?;
    Ok(diffs.iter().map(|d| d.abs()).sum::<f64>() / diffs.len() as f64)
}

fn masked_diffs(pred: &ScalarMap, gt: &ScalarMap, mask: &[bool]) -> Result<Vec<f64>> {
    if !pred.same_shape(gt) || mask.len() != pred.data.len() {
        return Err(Error::DimensionMismatch(format!(
            "prediction {}x{}, ground truth {}x{}, mask {}",
            pred.width,
            pred.height,
            gt.width,
            gt.height,
            mask.len()
        )));
    }
    let diffs: Vec<f64> = pred
        .data
        .iter()
        .zip(&gt.data)
        .zip(mask)
        .filter(|&((p, g), &m)| m && p.is_finite() && g.is_finite())
        .map(|((p, g), _)| p - g)
        .collect();
    if diffs.is_empty() {
        return Err(Error::DimensionMismatch(
            "empty evaluation mask".to_string(),
        ));
    }
    Ok(diffs)
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Precision/recall of detected discontinuities against the ground-truth
/// seam set. An auxiliary edge counts as detected when `|g'| > threshold`;
/// a detection is correct when some ground-truth crossing lies within one
/// pixel of its midpoint, and a crossing is recalled when some detection
/// lies within one pixel of it.
pub fn discontinuity_score(
    graph: &PixelGraph,
    gprime: &[f64],
    gt_seams: &[Seam],
    threshold: f64,
) -> (f64, f64) {
    let detections: Vec<(f64, f64)> = graph
        .aux_edges
        .iter()
        .zip(gprime)
        .filter(|(_, g)| g.abs() > threshold)
        .map(|(e, _)| {
            let (xa, ya) = graph.pixel_position(e.pixels.0);
            let (xb, yb) = graph.pixel_position(e.pixels.1);
            (
                (xa as f64 + xb as f64) / 2.0,
                (ya as f64 + yb as f64) / 2.0,
            )
        })
        .collect();
    let gt_points: Vec<(f64, f64)> = gt_seams.iter().map(|s| s.midpoint()).collect();

    let within_1px = |a: (f64, f64), b: (f64, f64)| -> bool {
        (a.0 - b.0).abs() <= 1.0 && (a.1 - b.1).abs() <= 1.0
    };
    let precision = if detections.is_empty() {
        1.0
    } else {
        let hit = detections
            .iter()
            .filter(|&&d| gt_points.iter().any(|&g| within_1px(d, g)))
            .count();
        hit as f64 / detections.len() as f64
    };
    let recall = if gt_points.is_empty() {
        1.0
    } else {
        let hit = gt_points
            .iter()
            .filter(|&&g| detections.iter().any(|&d| within_1px(d, g)))
            .count();
        hit as f64 / gt_points.len() as f64
    };
    (precision, recall)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::detect_seams;

    fn map_of(values: &[f64], w: usize, h: usize) -> ScalarMap {
        ScalarMap {
            width: w,
            height: h,
            data: values.to_vec(),
        }
    }

    #[test]
    fn identical_maps_score_zero() {
        let gt = map_of(&[1.0, 2.0, 3.0, 4.0], 2, 2);
        assert_eq!(made(&gt, &gt, &[true; 4]).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_is_gauged_away() {
        let gt = map_of(&[1.0, 2.0, 3.0, 4.0], 2, 2);
        let pred = map_of(&[8.0, 9.0, 10.0, 11.0], 2, 2);
        let (err, offset) = made_with_offset(&pred, &gt, &[true; 4]).unwrap();
        assert_eq!(err, 0.0);
        assert_eq!(offset, 7.0);
        assert_eq!(made_unaligned(&pred, &gt, &[true; 4]).unwrap(), 7.0);
    }

    #[test]
    fn half_offset_half_exact_scores_half() {
        let gt = map_of(&[0.0, 0.0, 0.0, 0.0], 2, 2);
        let pred = map_of(&[0.0, 0.0, 1.0, 1.0], 2, 2);
        assert_eq!(made(&pred, &gt, &[true; 4]).unwrap(), 0.5);
    }

    #[test]
    fn sign_symmetry() {
        let gt = map_of(&[0.0; 9], 3, 3);
        let e = [0.3, -0.1, 0.7, 0.0, -0.4, 0.2, 0.9, -0.6, 0.1];
        let plus = map_of(&e, 3, 3);
        let minus = map_of(&e.map(|v| -v), 3, 3);
        let a = made(&plus, &gt, &[true; 9]).unwrap();
        let b = made(&minus, &gt, &[true; 9]).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = map_of(&[0.0; 4], 2, 2);
        let b = map_of(&[0.0; 6], 3, 2);
        assert!(made(&a, &b, &[true; 4]).is_err());
    }

    #[test]
    fn score_degenerate_cases() {
        let mask = vec![true; 4];
        let graph = PixelGraph::build(2, 2, &mask).unwrap();
        let gt = map_of(&[0.0, 5.0, 0.0, 5.0], 2, 2);
        let seams = detect_seams(&gt, &mask, 2.5);
        assert_eq!(seams.len(), 2);

        // g' all zero: nothing detected, recall 0.
        let gprime = vec![0.0; graph.aux_edges.len()];
        let (_, recall) = discontinuity_score(&graph, &gprime, &seams, 0.5);
        assert_eq!(recall, 0.0);

        // g' nonzero exactly on the seam edges: perfect score.
        let gprime: Vec<f64> = graph
            .aux_edges
            .iter()
            .map(|e| {
                let (xa, _) = graph.pixel_position(e.pixels.0);
                let (xb, _) = graph.pixel_position(e.pixels.1);
                if xa != xb {
                    5.0
                } else {
                    0.0
                }
            })
            .collect();
        let (precision, recall) = discontinuity_score(&graph, &gprime, &seams, 0.5);
        assert_eq!(precision, 1.0);
        assert_eq!(recall, 1.0);
    }
}
