//! The page-graph data model shared by all stages: detections, association
//! score matrices, optional text content, ground-truth annotations, and
//! box-to-panel assignment.
//!
//! One page per file, JSON, UTF-8. Boxes are `[x1, y1, x2, y2]` arrays in
//! page pixel coordinates; score matrices are row-major arrays of rows.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{intersection_area, BBox, Tolerance};
use crate::Warning;

/// A detected text block and, when OCR output is available, its content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextBlock {
    #[serde(rename = "box")]
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,
}

/// One page's detections, association scores and optional character
/// embeddings.
///
/// Invariants after [`load_page_graph`]:
/// - every box lies within `[0, width] x [0, height]`;
/// - `char_char_scores` is `n_char x n_char`, exactly symmetric, with unit
///   diagonal;
/// - `text_char_scores` is `n_text x n_char`;
/// - all scores are finite and in `[0, 1]`;
/// - `char_embeddings`, when present, holds one vector per character, all of
///   the same dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageGraph {
    pub page_id: String,
    pub width: f64,
    pub height: f64,
    pub panels: Vec<BBox>,
    pub texts: Vec<TextBlock>,
    pub characters: Vec<BBox>,
    pub char_char_scores: Vec<Vec<f64>>,
    pub text_char_scores: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub char_embeddings: Option<Vec<Vec<f64>>>,
}

/// Ground-truth annotations for one page. Panels are optional because some
/// released test sets ship without them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageAnnotation {
    pub page_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_panels: Option<Vec<BBox>>,
    pub gt_texts: Vec<BBox>,
    pub gt_characters: Vec<BBox>,
    /// Per-page cluster label for each ground-truth character.
    pub gt_char_identity: Vec<usize>,
    /// `(text index, character index)` pairs; at most one per text.
    pub gt_speaker_edges: Vec<(usize, usize)>,
}

/// Panel membership for every text and character box; `None` when the page
/// has no panels.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelAssignment {
    pub text_to_panel: Vec<Option<usize>>,
    pub char_to_panel: Vec<Option<usize>>,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("malformed file: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },
}

fn invalid(path: impl Into<String>, reason: impl Into<String>) -> LoadError {
    LoadError::Invalid {
        path: path.into(),
        reason: reason.into(),
    }
}

fn check_box(b: &BBox, path: &str) -> Result<(), LoadError> {
    for (v, name) in [(b.x1, "x1"), (b.y1, "y1"), (b.x2, "x2"), (b.y2, "y2")] {
        if !v.is_finite() {
            return Err(invalid(format!("{path}.{name}"), "non-finite coordinate"));
        }
    }
    if b.x1 > b.x2 || b.y1 > b.y2 {
        return Err(invalid(path, "inverted box (x1 > x2 or y1 > y2)"));
    }
    Ok(())
}

fn clamp_box(b: &mut BBox, width: f64, height: f64, path: &str, warnings: &mut Vec<Warning>) {
    let orig = *b;
    b.x1 = b.x1.clamp(0.0, width);
    b.x2 = b.x2.clamp(0.0, width);
    b.y1 = b.y1.clamp(0.0, height);
    b.y2 = b.y2.clamp(0.0, height);
    if *b != orig {
        warnings.push(format!("{path}: clamped to page bounds"));
    }
}

fn check_scores(m: &[Vec<f64>], rows: usize, cols: usize, path: &str) -> Result<(), LoadError> {
    if m.len() != rows {
        return Err(invalid(
            path,
            format!("expected {rows} rows, found {}", m.len()),
        ));
    }
    for (i, row) in m.iter().enumerate() {
        if row.len() != cols {
            return Err(invalid(
                format!("{path}[{i}]"),
                format!("expected {cols} columns, found {}", row.len()),
            ));
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(invalid(format!("{path}[{i}][{j}]"), "non-finite score"));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(
                    format!("{path}[{i}][{j}]"),
                    format!("score {v} outside [0, 1]"),
                ));
            }
        }
    }
    Ok(())
}

/// Parse and validate a page-graph file.
///
/// Out-of-range boxes are clamped to the page and reported as warnings.
/// The character score matrix is symmetrized by averaging (asymmetry beyond
/// 1e-6 is warned about, not rejected) and its diagonal is normalized to 1.
pub fn load_page_graph(bytes: &[u8]) -> Result<(PageGraph, Vec<Warning>), LoadError> {
    let mut page: PageGraph = serde_json::from_slice(bytes)?;
    let mut warnings = Vec::new();

    if !page.width.is_finite() || !page.height.is_finite() || page.width < 0.0 || page.height < 0.0
    {
        return Err(invalid(
            "width/height",
            "page dimensions must be finite and non-negative",
        ));
    }

    for (i, b) in page.panels.iter_mut().enumerate() {
        let path = format!("panels[{i}]");
        check_box(b, &path)?;
        clamp_box(b, page.width, page.height, &path, &mut warnings);
    }
    for (i, t) in page.texts.iter_mut().enumerate() {
        let path = format!("texts[{i}].box");
        check_box(&t.bbox, &path)?;
        clamp_box(&mut t.bbox, page.width, page.height, &path, &mut warnings);
    }
    for (i, b) in page.characters.iter_mut().enumerate() {
        let path = format!("characters[{i}]");
        check_box(b, &path)?;
        clamp_box(b, page.width, page.height, &path, &mut warnings);
    }

    let n_char = page.characters.len();
    let n_text = page.texts.len();
    check_scores(&page.char_char_scores, n_char, n_char, "char_char_scores")?;
    check_scores(&page.text_char_scores, n_text, n_char, "text_char_scores")?;

    // Symmetrize by averaging and pin the diagonal; self-similarity is
    // definitional.
    let mut max_asym: f64 = 0.0;
    for i in 0..n_char {
        for j in (i + 1)..n_char {
            let a = page.char_char_scores[i][j];
            let b = page.char_char_scores[j][i];
            max_asym = max_asym.max((a - b).abs());
            let avg = (a + b) / 2.0;
            page.char_char_scores[i][j] = avg;
            page.char_char_scores[j][i] = avg;
        }
        page.char_char_scores[i][i] = 1.0;
    }
    if max_asym > 1e-6 {
        warnings.push(format!(
            "char_char_scores: asymmetry up to {max_asym:.2e} symmetrized by averaging"
        ));
    }

    if let Some(embs) = &page.char_embeddings {
        if embs.len() != n_char {
            return Err(invalid(
                "char_embeddings",
                format!("expected {n_char} vectors, found {}", embs.len()),
            ));
        }
        let dim = embs.first().map_or(0, Vec::len);
        for (i, e) in embs.iter().enumerate() {
            if e.len() != dim {
                return Err(invalid(
                    format!("char_embeddings[{i}]"),
                    format!("expected dimension {dim}, found {}", e.len()),
                ));
            }
            if e.iter().any(|v| !v.is_finite()) {
                return Err(invalid(
                    format!("char_embeddings[{i}]"),
                    "non-finite component",
                ));
            }
        }
    }

    Ok((page, warnings))
}

/// Parse and validate an annotation file.
pub fn load_page_annotation(bytes: &[u8]) -> Result<PageAnnotation, LoadError> {
    let ann: PageAnnotation = serde_json::from_slice(bytes)?;

    if let Some(panels) = &ann.gt_panels {
        for (i, b) in panels.iter().enumerate() {
            check_box(b, &format!("gt_panels[{i}]"))?;
        }
    }
    for (i, b) in ann.gt_texts.iter().enumerate() {
        check_box(b, &format!("gt_texts[{i}]"))?;
    }
    for (i, b) in ann.gt_characters.iter().enumerate() {
        check_box(b, &format!("gt_characters[{i}]"))?;
    }
    if ann.gt_char_identity.len() != ann.gt_characters.len() {
        return Err(invalid(
            "gt_char_identity",
            format!(
                "expected {} labels, found {}",
                ann.gt_characters.len(),
                ann.gt_char_identity.len()
            ),
        ));
    }
    let mut seen_text = vec![false; ann.gt_texts.len()];
    for (i, &(t, c)) in ann.gt_speaker_edges.iter().enumerate() {
        if t >= ann.gt_texts.len() || c >= ann.gt_characters.len() {
            return Err(invalid(
                format!("gt_speaker_edges[{i}]"),
                format!("edge ({t}, {c}) out of range"),
            ));
        }
        if seen_text[t] {
            return Err(invalid(
                format!("gt_speaker_edges[{i}]"),
                format!("text {t} has more than one speaker"),
            ));
        }
        seen_text[t] = true;
    }
    Ok(ann)
}

/// Serialize a page graph in the on-disk format.
pub fn page_graph_to_json(page: &PageGraph) -> String {
    let mut out = serde_json::to_string_pretty(page).expect("page graph serialization");
    out.push('\n');
    out
}

/// Serialize an annotation in the on-disk format.
pub fn page_annotation_to_json(ann: &PageAnnotation) -> String {
    let mut out = serde_json::to_string_pretty(ann).expect("annotation serialization");
    out.push('\n');
    out
}

/// Assign each text and character box to a panel.
///
/// Preference order: the panel containing the box center; failing that, the
/// panel with maximal overlap area; failing that, the panel with the nearest
/// center. Ties break toward the smaller panel, then the lower panel index.
/// Pages without panels yield `None` assignments.
pub fn assign_boxes_to_panels(page: &PageGraph, _tol: &Tolerance) -> PanelAssignment {
    PanelAssignment {
        text_to_panel: page
            .texts
            .iter()
            .map(|t| assign_one(&t.bbox, &page.panels))
            .collect(),
        char_to_panel: page
            .characters
            .iter()
            .map(|b| assign_one(b, &page.panels))
            .collect(),
    }
}

fn assign_one(b: &BBox, panels: &[BBox]) -> Option<usize> {
    if panels.is_empty() {
        return None;
    }
    let (cx, cy) = b.center();

    // Panels containing the center, smallest first.
    let containing = panels
        .iter()
        .enumerate()
        .filter(|(_, p)| p.contains_point(cx, cy))
        .min_by(|(i, p), (j, q)| p.area().total_cmp(&q.area()).then(i.cmp(j)));
    if let Some((idx, _)) = containing {
        return Some(idx);
    }

    // Maximal overlap area; ties toward the smaller panel, then lower index.
    let best_overlap = panels
        .iter()
        .enumerate()
        .map(|(i, p)| (i, p, intersection_area(b, p)))
        .max_by(|(i, p, ov_a), (j, q, ov_b)| {
            ov_a.total_cmp(ov_b)
                .then(q.area().total_cmp(&p.area()))
                .then(j.cmp(i))
        })
        .expect("panels is non-empty");
    if best_overlap.2 > 0.0 {
        return Some(best_overlap.0);
    }

    // Nearest panel center.
    let nearest = panels
        .iter()
        .enumerate()
        .min_by(|(i, p), (j, q)| dist2(b, p).total_cmp(&dist2(b, q)).then(i.cmp(j)))
        .expect("panels is non-empty");
    Some(nearest.0)
}

fn dist2(b: &BBox, p: &BBox) -> f64 {
    let (bx, by) = b.center();
    let (px, py) = p.center();
    (bx - px) * (bx - px) + (by - py) * (by - py)
}
