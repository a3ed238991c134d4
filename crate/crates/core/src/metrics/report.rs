//! Dataset-level evaluation: per-page metrics arithmetically averaged over
//! the pages where they are defined, and detection AP pooled per class.
//!
//! Predicted characters are matched to ground-truth characters by Hungarian
//! matching before clustering and retrieval metrics are computed, so the
//! metrics compare like with like even when detections are imperfect.

use serde::Serialize;

use super::average_precision::{pooled_average_precision, DetClass, Detection};
use super::hungarian::hungarian_match_boxes;
use super::mutual_info::clustering_metrics;
use super::retrieval::retrieval_metrics;
use super::MetricsError;
use crate::association::{assign_speakers, cluster_characters, SpeakerAssignment};
use crate::page_model::{PageAnnotation, PageGraph};

/// Knobs for [`evaluate_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalConfig {
    /// Character-character clustering threshold.
    pub tau: f64,
    /// IoU threshold for a detection to count as positive.
    pub iou_threshold: f64,
    /// Detections kept per page and class.
    pub top_k: usize,
    /// Score speakers with the nearest-character baseline instead of the
    /// text-character score argmax.
    pub speaker_baseline: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            tau: 0.65,
            iou_threshold: 0.5,
            top_k: 100,
            speaker_baseline: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PageMetrics {
    pub page_id: String,
    pub ami: Option<f64>,
    pub nmi: Option<f64>,
    pub mrr: Option<f64>,
    pub map_at_r: Option<f64>,
    pub p_at_1: Option<f64>,
    pub r_precision: Option<f64>,
    pub recall_at_num_texts: Option<f64>,
}

/// Dataset-averaged metric values plus the per-page breakdown. A metric is
/// absent when no page defines it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub page_count: usize,
    pub ap_panel: Option<f64>,
    pub ap_text: Option<f64>,
    pub ap_character: Option<f64>,
    pub ami: Option<f64>,
    pub nmi: Option<f64>,
    pub mrr: Option<f64>,
    pub map_at_r: Option<f64>,
    pub p_at_1: Option<f64>,
    pub r_precision: Option<f64>,
    pub recall_at_num_texts: Option<f64>,
    pub per_page: Vec<PageMetrics>,
}

/// How predicted boxes correspond to ground-truth boxes when scoring speaker
/// edges. Identity when predictions are expressed directly against
/// ground-truth boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct GtMatch {
    /// For each ground-truth text, the matched predicted text.
    pub pred_text_for_gt_text: Vec<Option<usize>>,
    /// For each predicted character, the matched ground-truth character.
    pub gt_char_for_pred_char: Vec<Option<usize>>,
}

impl GtMatch {
    pub fn identity(n_texts: usize, n_chars: usize) -> GtMatch {
        GtMatch {
            pred_text_for_gt_text: (0..n_texts).map(Some).collect(),
            gt_char_for_pred_char: (0..n_chars).map(Some).collect(),
        }
    }

    /// Hungarian-match predicted texts and characters onto the annotation.
    pub fn from_boxes(page: &PageGraph, ann: &PageAnnotation) -> GtMatch {
        let pred_texts: Vec<_> = page.texts.iter().map(|t| t.bbox).collect();
        let pred_text_for_gt_text = hungarian_match_boxes(&pred_texts, &ann.gt_texts);
        // Invert the gt -> pred character matching.
        let gt_for_pred = hungarian_match_boxes(&page.characters, &ann.gt_characters);
        let mut gt_char_for_pred_char = vec![None; page.characters.len()];
        for (gt, pred) in gt_for_pred.iter().enumerate() {
            if let Some(p) = pred {
                gt_char_for_pred_char[*p] = Some(gt);
            }
        }
        GtMatch {
            pred_text_for_gt_text,
            gt_char_for_pred_char,
        }
    }
}

/// Fraction of ground-truth speaker edges recovered by the predictions,
/// mapped through `gt_match`. A missing prediction counts as incorrect.
/// `None` when the page has no ground-truth edges.
pub fn recall_at_num_texts(
    pred: &SpeakerAssignment,
    gt_edges: &[(usize, usize)],
    gt_match: &GtMatch,
) -> Option<f64> {
    if gt_edges.is_empty() {
        return None;
    }
    let mut hits = 0usize;
    for &(gt_text, gt_char) in gt_edges {
        let recovered = gt_match
            .pred_text_for_gt_text
            .get(gt_text)
            .copied()
            .flatten()
            .and_then(|pred_text| pred.per_text.get(pred_text).copied().flatten())
            .and_then(|pick| {
                gt_match
                    .gt_char_for_pred_char
                    .get(pick.char_index)
                    .copied()
                    .flatten()
            })
            .is_some_and(|mapped| mapped == gt_char);
        if recovered {
            hits += 1;
        }
    }
    Some(hits as f64 / gt_edges.len() as f64)
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

/// Evaluate every page against its annotation and aggregate.
///
/// Per-page metrics (clustering, retrieval, recall) are averaged over the
/// pages where they are defined. AP is computed over the pooled detection
/// set per class; pages without ground-truth panels are excluded from the
/// panel pool.
pub fn evaluate_dataset(
    pages: &[(PageGraph, PageAnnotation)],
    config: &EvalConfig,
) -> Result<EvalReport, MetricsError> {
    if pages.is_empty() {
        return Err(MetricsError::NoPages);
    }
    for (page, ann) in pages {
        if page.page_id != ann.page_id {
            return Err(MetricsError::PageIdMismatch {
                graph: page.page_id.clone(),
                annotation: ann.page_id.clone(),
            });
        }
    }

    // Pooled detection AP per class. Page-graph boxes carry no detector
    // confidence, so every detection scores 1 and ranking follows input
    // order.
    let mut panel_preds = Vec::new();
    let mut panel_gts = Vec::new();
    let mut text_preds = Vec::new();
    let mut text_gts = Vec::new();
    let mut char_preds = Vec::new();
    let mut char_gts = Vec::new();
    for (idx, (page, ann)) in pages.iter().enumerate() {
        if let Some(gt_panels) = &ann.gt_panels {
            for b in &page.panels {
                panel_preds.push((
                    idx,
                    Detection {
                        bbox: *b,
                        score: 1.0,
                        class: DetClass::Panel,
                    },
                ));
            }
            for b in gt_panels {
                panel_gts.push((idx, *b));
            }
        }
        for t in &page.texts {
            text_preds.push((
                idx,
                Detection {
                    bbox: t.bbox,
                    score: 1.0,
                    class: DetClass::Text,
                },
            ));
        }
        for b in &ann.gt_texts {
            text_gts.push((idx, *b));
        }
        for b in &page.characters {
            char_preds.push((
                idx,
                Detection {
                    bbox: *b,
                    score: 1.0,
                    class: DetClass::Character,
                },
            ));
        }
        for b in &ann.gt_characters {
            char_gts.push((idx, *b));
        }
    }
    let ap_panel =
        pooled_average_precision(&panel_preds, &panel_gts, config.iou_threshold, config.top_k);
    let ap_text =
        pooled_average_precision(&text_preds, &text_gts, config.iou_threshold, config.top_k);
    let ap_character =
        pooled_average_precision(&char_preds, &char_gts, config.iou_threshold, config.top_k);

    let mut per_page = Vec::with_capacity(pages.len());
    for (page, ann) in pages {
        per_page.push(evaluate_page(page, ann, config)?);
    }

    Ok(EvalReport {
        page_count: pages.len(),
        ap_panel,
        ap_text,
        ap_character,
        ami: mean_defined(per_page.iter().map(|p| p.ami)),
        nmi: mean_defined(per_page.iter().map(|p| p.nmi)),
        mrr: mean_defined(per_page.iter().map(|p| p.mrr)),
        map_at_r: mean_defined(per_page.iter().map(|p| p.map_at_r)),
        p_at_1: mean_defined(per_page.iter().map(|p| p.p_at_1)),
        r_precision: mean_defined(per_page.iter().map(|p| p.r_precision)),
        recall_at_num_texts: mean_defined(per_page.iter().map(|p| p.recall_at_num_texts)),
        per_page,
    })
}

fn evaluate_page(
    page: &PageGraph,
    ann: &PageAnnotation,
    config: &EvalConfig,
) -> Result<PageMetrics, MetricsError> {
    // Pair predicted characters with ground truth; metrics are computed over
    // the matched pairs, ordered by ground-truth index.
    let gt_for_pred = hungarian_match_boxes(&page.characters, &ann.gt_characters);
    let matched: Vec<(usize, usize)> = gt_for_pred
        .iter()
        .enumerate()
        .filter_map(|(gt, pred)| pred.map(|p| (gt, p)))
        .collect();

    let clusters = cluster_characters(page, config.tau);
    let (mut ami, mut nmi) = (None, None);
    if !matched.is_empty() {
        let pred_labels: Vec<usize> = matched.iter().map(|&(_, p)| clusters.labels[p]).collect();
        let gt_labels: Vec<usize> = matched
            .iter()
            .map(|&(g, _)| ann.gt_char_identity[g])
            .collect();
        let (a, n) = clustering_metrics(&pred_labels, &gt_labels)?;
        ami = Some(a);
        nmi = Some(n);
    }

    let mut retrieval = None;
    if !matched.is_empty() {
        let sim: Vec<Vec<f64>> = matched
            .iter()
            .map(|&(_, pi)| {
                matched
                    .iter()
                    .map(|&(_, pj)| page.char_char_scores[pi][pj])
                    .collect()
            })
            .collect();
        let gt_labels: Vec<usize> = matched
            .iter()
            .map(|&(g, _)| ann.gt_char_identity[g])
            .collect();
        retrieval = retrieval_metrics(&sim, &gt_labels)?;
    }

    let speakers = if config.speaker_baseline {
        crate::association::nearest_character_baseline(page)
    } else {
        assign_speakers(page).0
    };
    let gt_match = GtMatch::from_boxes(page, ann);
    let recall = recall_at_num_texts(&speakers, &ann.gt_speaker_edges, &gt_match);

    Ok(PageMetrics {
        page_id: page.page_id.clone(),
        ami,
        nmi,
        mrr: retrieval.map(|r| r.mrr),
        map_at_r: retrieval.map(|r| r.map_at_r),
        p_at_1: retrieval.map(|r| r.p_at_1),
        r_precision: retrieval.map(|r| r.r_precision),
        recall_at_num_texts: recall,
    })
}

/// One point of a clustering-threshold sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauSweepPoint {
    pub tau: f64,
    pub ami: Option<f64>,
    pub nmi: Option<f64>,
}

/// Evaluate the clustering metrics at tau = 0.05, 0.10, ..., 0.95. The best
/// threshold is the one maximizing AMI.
pub fn sweep_tau(
    pages: &[(PageGraph, PageAnnotation)],
    config: &EvalConfig,
) -> Result<Vec<TauSweepPoint>, MetricsError> {
    let mut points = Vec::new();
    for step in 1..=19 {
        let tau = step as f64 * 0.05;
        let report = evaluate_dataset(pages, &EvalConfig { tau, ..*config })?;
        points.push(TauSweepPoint {
            tau,
            ami: report.ami,
            nmi: report.nmi,
        });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::SpeakerPick;
    use crate::geometry::BBox;
    use crate::page_model::TextBlock;

    fn pick(c: usize) -> Option<SpeakerPick> {
        Some(SpeakerPick {
            char_index: c,
            confidence: 1.0,
        })
    }

    #[test]
    fn recall_counts_correct_edges() {
        let pred = SpeakerAssignment {
            per_text: vec![pick(0), pick(1), pick(0)],
        };
        let edges = [(0, 0), (1, 1), (2, 1)];
        let m = GtMatch::identity(3, 2);
        let r = recall_at_num_texts(&pred, &edges, &m).unwrap();
        assert!((r - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn recall_with_all_correct_is_one() {
        let pred = SpeakerAssignment {
            per_text: vec![pick(1), pick(0), pick(1)],
        };
        let edges = [(0, 1), (1, 0), (2, 1)];
        let m = GtMatch::identity(3, 2);
        assert_eq!(recall_at_num_texts(&pred, &edges, &m), Some(1.0));
    }

    #[test]
    fn missing_prediction_counts_as_miss() {
        let pred = SpeakerAssignment {
            per_text: vec![None, pick(0)],
        };
        let edges = [(0, 0), (1, 0)];
        let m = GtMatch::identity(2, 1);
        assert_eq!(recall_at_num_texts(&pred, &edges, &m), Some(0.5));
    }

    #[test]
    fn no_edges_is_absent() {
        let pred = SpeakerAssignment { per_text: vec![] };
        assert_eq!(
            recall_at_num_texts(&pred, &[], &GtMatch::identity(0, 0)),
            None
        );
    }

    fn self_consistent_page(id: &str) -> (PageGraph, PageAnnotation) {
        // Two characters of one identity, one of another; two texts with
        // ground-truth speakers; predictions equal to ground truth.
        let panels = vec![
            BBox::new(0.0, 0.0, 100.0, 50.0),
            BBox::new(0.0, 60.0, 100.0, 100.0),
        ];
        let chars = vec![
            BBox::new(10.0, 10.0, 20.0, 30.0),
            BBox::new(40.0, 10.0, 50.0, 30.0),
            BBox::new(10.0, 70.0, 20.0, 90.0),
        ];
        let texts = vec![
            BBox::new(60.0, 10.0, 80.0, 20.0),
            BBox::new(60.0, 70.0, 80.0, 80.0),
        ];
        let identity = vec![0, 1, 0];
        let cc = vec![
            vec![1.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 1.0],
        ];
        let tc = vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let page = PageGraph {
            page_id: id.into(),
            width: 100.0,
            height: 100.0,
            panels: panels.clone(),
            texts: texts
                .iter()
                .map(|b| TextBlock {
                    bbox: *b,
                    content: None,
                })
                .collect(),
            characters: chars.clone(),
            char_char_scores: cc,
            text_char_scores: tc,
            char_embeddings: None,
        };
        let ann = PageAnnotation {
            page_id: id.into(),
            gt_panels: Some(panels),
            gt_texts: texts,
            gt_characters: chars,
            gt_char_identity: identity,
            gt_speaker_edges: vec![(0, 1), (1, 2)],
        };
        (page, ann)
    }

    #[test]
    fn self_consistent_page_scores_one_everywhere() {
        let pages = vec![self_consistent_page("a"), self_consistent_page("b")];
        let report = evaluate_dataset(&pages, &EvalConfig::default()).unwrap();
        assert_eq!(report.page_count, 2);
        for v in [
            report.ap_panel,
            report.ap_text,
            report.ap_character,
            report.ami,
            report.nmi,
            report.mrr,
            report.map_at_r,
            report.p_at_1,
            report.r_precision,
            report.recall_at_num_texts,
        ] {
            assert_eq!(v, Some(1.0));
        }
    }

    #[test]
    fn dataset_recall_averages_defined_pages() {
        let (page_a, ann_a) = self_consistent_page("a");
        // Page b predicts the wrong speaker for one of its two edges.
        let (mut page_b, ann_b) = self_consistent_page("b");
        page_b.text_char_scores = vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]];
        // Page c has no edges at all and is excluded from the mean.
        let (page_c, mut ann_c) = self_consistent_page("c");
        ann_c.gt_speaker_edges.clear();

        let report = evaluate_dataset(
            &[(page_a, ann_a), (page_b, ann_b), (page_c, ann_c)],
            &EvalConfig::default(),
        )
        .unwrap();
        assert_eq!(report.recall_at_num_texts, Some(0.75));
    }

    #[test]
    fn page_id_mismatch_is_an_error() {
        let (page, mut ann) = self_consistent_page("a");
        ann.page_id = "b".into();
        assert!(matches!(
            evaluate_dataset(&[(page, ann)], &EvalConfig::default()),
            Err(MetricsError::PageIdMismatch { .. })
        ));
    }

    #[test]
    fn empty_dataset_is_an_error() {
        assert_eq!(
            evaluate_dataset(&[], &EvalConfig::default()).unwrap_err(),
            MetricsError::NoPages
        );
    }

    #[test]
    fn missing_gt_panels_leaves_ap_absent() {
        let (page, mut ann) = self_consistent_page("a");
        ann.gt_panels = None;
        let report = evaluate_dataset(&[(page, ann)], &EvalConfig::default()).unwrap();
        assert_eq!(report.ap_panel, None);
        assert_eq!(report.ap_text, Some(1.0));
    }

    #[test]
    fn sweep_covers_nineteen_thresholds() {
        let pages = vec![self_consistent_page("a")];
        let points = sweep_tau(&pages, &EvalConfig::default()).unwrap();
        assert_eq!(points.len(), 19);
        assert!((points[0].tau - 0.05).abs() < 1e-12);
        assert!((points[18].tau - 0.95).abs() < 1e-12);
        // Perfect scores cluster perfectly at every threshold strictly
        // between 0 and 1.
        assert!(points.iter().all(|p| p.ami == Some(1.0)));
    }

    #[test]
    fn speaker_baseline_uses_distance_not_scores() {
        let (mut page, ann) = self_consistent_page("a");
        // Scores point at the wrong characters, but geometry is decisive.
        page.text_char_scores = vec![vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]];
        let config = EvalConfig {
            speaker_baseline: true,
            ..EvalConfig::default()
        };
        let report = evaluate_dataset(&[(page, ann)], &config).unwrap();
        // Text 0 sits nearest character 1 and text 1 nearest character 2,
        // which are exactly the annotated speakers.
        assert_eq!(report.recall_at_num_texts, Some(1.0));
    }
}
