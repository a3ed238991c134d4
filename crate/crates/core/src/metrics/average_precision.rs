//! Detection average precision with greedy IoU matching and 101-point
//! interpolation.

use serde::Serialize;

use crate::geometry::{iou, BBox};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DetClass {
    Panel,
    Text,
    Character,
}

/// A scored detection of a single class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub score: f64,
    pub class: DetClass,
}

/// Average precision for one class on one page. `None` when there is no
/// ground truth to recall.
pub fn average_precision(
    preds: &[Detection],
    gts: &[BBox],
    iou_threshold: f64,
    top_k: usize,
) -> Option<f64> {
    let preds: Vec<(usize, Detection)> = preds.iter().map(|d| (0, *d)).collect();
    let gts: Vec<(usize, BBox)> = gts.iter().map(|b| (0, *b)).collect();
    pooled_average_precision(&preds, &gts, iou_threshold, top_k)
}

/// Average precision over a pooled detection set spanning several pages.
/// Matching is confined to each detection's own page; precision and recall
/// accumulate over the pool. `top_k` truncates each page's detections by
/// descending score before pooling, ties breaking by input order.
pub fn pooled_average_precision(
    preds: &[(usize, Detection)],
    gts: &[(usize, BBox)],
    iou_threshold: f64,
    top_k: usize,
) -> Option<f64> {
    if gts.is_empty() {
        return None;
    }

    // Per-page truncation to the top_k detections.
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[a]
            .0
            .cmp(&preds[b].0)
            .then(preds[b].1.score.total_cmp(&preds[a].1.score))
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = Vec::new();
    let mut cur_page: Option<usize> = None;
    let mut count = 0usize;
    for idx in order {
        let page = preds[idx].0;
        if cur_page != Some(page) {
            cur_page = Some(page);
            count = 0;
        }
        if count < top_k {
            count += 1;
            kept.push(idx);
        }
    }
    // Global ranking by descending score, ties by input order.
    kept.sort_by(|&a, &b| {
        preds[b]
            .1
            .score
            .total_cmp(&preds[a].1.score)
            .then(a.cmp(&b))
    });

    // Greedy matching: each detection takes the unmatched ground truth of its
    // page with the highest IoU at or above the threshold.
    let mut gt_taken = vec![false; gts.len()];
    let mut hits: Vec<bool> = Vec::with_capacity(kept.len());
    for &idx in &kept {
        let (page, det) = &preds[idx];
        let mut best: Option<(usize, f64)> = None;
        for (g, (gt_page, gt_box)) in gts.iter().enumerate() {
            if gt_page != page || gt_taken[g] {
                continue;
            }
            let overlap = iou(&det.bbox, gt_box);
            if overlap >= iou_threshold && best.is_none_or(|(_, b)| overlap > b) {
                best = Some((g, overlap));
            }
        }
        match best {
            Some((g, _)) => {
                gt_taken[g] = true;
                hits.push(true);
            }
            None => hits.push(false),
        }
    }

    // Precision/recall after each detection, then 101-point interpolation
    // (precision taken as its running maximum from the right).
    let n_gt = gts.len() as f64;
    let mut tp = 0usize;
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(hits.len()); // (recall, precision)
    for (rank, &hit) in hits.iter().enumerate() {
        if hit {
            tp += 1;
        }
        points.push((tp as f64 / n_gt, tp as f64 / (rank + 1) as f64));
    }
    let mut envelope = points.clone();
    let mut running = 0.0f64;
    for p in envelope.iter_mut().rev() {
        running = running.max(p.1);
        p.1 = running;
    }

    let mut sum = 0.0;
    for k in 0..=100 {
        let r = k as f64 / 100.0;
        let p = envelope
            .iter()
            .find(|(recall, _)| *recall >= r)
            .map_or(0.0, |&(_, precision)| precision);
        sum += p;
    }
    Some(sum / 101.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(b: BBox, score: f64) -> Detection {
        Detection {
            bbox: b,
            score,
            class: DetClass::Character,
        }
    }

    #[test]
    fn perfect_single_detection_is_one() {
        let gt = BBox::new(0.0, 0.0, 10.0, 10.0);
        let ap = average_precision(&[det(gt, 0.9)], &[gt], 0.5, 100);
        assert_eq!(ap, Some(1.0));
    }

    #[test]
    fn confident_false_positive_halves_ap() {
        let gt = BBox::new(0.0, 0.0, 10.0, 10.0);
        let preds = [det(BBox::new(50.0, 50.0, 60.0, 60.0), 0.9), det(gt, 0.8)];
        let ap = average_precision(&preds, &[gt], 0.5, 100);
        assert_eq!(ap, Some(0.5));
    }

    #[test]
    fn no_predictions_is_zero() {
        let gt = BBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(average_precision(&[], &[gt], 0.5, 100), Some(0.0));
    }

    #[test]
    fn no_ground_truth_is_absent() {
        let p = det(BBox::new(0.0, 0.0, 10.0, 10.0), 0.9);
        assert_eq!(average_precision(&[p], &[], 0.5, 100), None);
    }

    #[test]
    fn top_k_truncates_low_scores() {
        let gt = BBox::new(0.0, 0.0, 10.0, 10.0);
        // The only true positive ranks below the cut.
        let preds = [det(BBox::new(50.0, 50.0, 60.0, 60.0), 0.9), det(gt, 0.1)];
        assert_eq!(average_precision(&preds, &[gt], 0.5, 1), Some(0.0));
    }

    #[test]
    fn matching_stays_within_pages() {
        let b = BBox::new(0.0, 0.0, 10.0, 10.0);
        // Prediction on page 0, ground truth on page 1: no match.
        let ap = pooled_average_precision(&[(0, det(b, 0.9))], &[(1, b)], 0.5, 100);
        assert_eq!(ap, Some(0.0));
        let ap = pooled_average_precision(&[(1, det(b, 0.9))], &[(1, b)], 0.5, 100);
        assert_eq!(ap, Some(1.0));
    }

    #[test]
    fn score_rescaling_and_gt_permutation_invariance() {
        let gts = [
            BBox::new(0.0, 0.0, 10.0, 10.0),
            BBox::new(20.0, 0.0, 30.0, 10.0),
            BBox::new(40.0, 0.0, 50.0, 10.0),
        ];
        let preds = [
            det(gts[1], 0.7),
            det(BBox::new(70.0, 70.0, 80.0, 80.0), 0.6),
            det(gts[0], 0.5),
        ];
        let base = average_precision(&preds, &gts, 0.5, 100).unwrap();

        let scaled: Vec<Detection> = preds.iter().map(|d| det(d.bbox, d.score * 0.31)).collect();
        assert_eq!(average_precision(&scaled, &gts, 0.5, 100), Some(base));

        let permuted = [gts[2], gts[0], gts[1]];
        assert_eq!(average_precision(&preds, &permuted, 0.5, 100), Some(base));
    }
}
