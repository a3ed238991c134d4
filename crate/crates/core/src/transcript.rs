//! Diarised transcript assembly and rendering.
//!
//! Each line is `<label>: <content>` followed by a single line feed. Labels
//! are per-page cluster ordinals ("1", "2", ...) in order of first speaking
//! appearance, or `⟨?⟩` for texts whose speaker was filtered out. Rendering
//! is byte-deterministic.

use serde::Serialize;

use crate::association::{ClusterSet, SpeakerAssignment};
use crate::page_model::{PageGraph, PanelAssignment};
use crate::panel_order::ReadingOrder;

/// Placeholder label for texts with no (surviving) speaker prediction.
pub const UNKNOWN_SPEAKER: &str = "⟨?⟩";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranscriptLine {
    pub speaker_label: String,
    pub text_content: String,
    pub text_index: usize,
    pub confidence: Option<f64>,
}

/// Transcript lines in reading order; one line per text on the page.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transcript {
    pub lines: Vec<TranscriptLine>,
}

/// Display names for clusters: speakers get "1", "2", ... in order of first
/// appearance in the text order; clusters that never speak are numbered
/// afterwards in character-index order. Indexed by cluster id.
pub fn name_clusters(
    clusters: &ClusterSet,
    order: &ReadingOrder,
    speakers: &SpeakerAssignment,
) -> Vec<String> {
    let mut names: Vec<Option<String>> = vec![None; clusters.cluster_count()];
    let mut next = 1usize;
    for &t in &order.text_order {
        if let Some(pick) = speakers.per_text.get(t).copied().flatten() {
            let cluster = clusters.labels[pick.char_index];
            if names[cluster].is_none() {
                names[cluster] = Some(next.to_string());
                next += 1;
            }
        }
    }
    for &cluster in &clusters.labels {
        if names[cluster].is_none() {
            names[cluster] = Some(next.to_string());
            next += 1;
        }
    }
    names
        .into_iter()
        .map(|n| n.expect("every cluster named"))
        .collect()
}

/// One line per text in reading order. `speakers` must already be
/// confidence-filtered; texts without a pick get the placeholder label.
/// Missing content is rendered as `<text t>`.
pub fn generate_transcript(
    page: &PageGraph,
    order: &ReadingOrder,
    clusters: &ClusterSet,
    speakers: &SpeakerAssignment,
) -> Transcript {
    let names = name_clusters(clusters, order, speakers);
    let lines = order
        .text_order
        .iter()
        .map(|&t| {
            let pick = speakers.per_text.get(t).copied().flatten();
            let speaker_label = match pick {
                Some(p) => names[clusters.labels[p.char_index]].clone(),
                None => UNKNOWN_SPEAKER.to_string(),
            };
            let text_content = page.texts[t]
                .content
                .clone()
                .unwrap_or_else(|| format!("<text {t}>"));
            TranscriptLine {
                speaker_label,
                text_content,
                text_index: t,
                confidence: pick.map(|p| p.confidence),
            }
        })
        .collect();
    Transcript { lines }
}

fn escape(content: &str) -> String {
    content.replace('\\', "\\\\").replace('\n', "\\n")
}

fn unescape(content: &str) -> String {
    let mut out = String::with_capacity(content.len());
    let mut chars = content.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some('\\') => out.push('\\'),
                Some(other) => {
                    out.push('\\');
                    out.push(other);
                }
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// Render as `<label>: <content>\n` lines. Line feeds inside content are
/// escaped as the two-character sequence `\n` (and backslashes as `\\`) so
/// the format stays line-oriented and reversible.
pub fn render(t: &Transcript) -> String {
    let mut out = String::new();
    for line in &t.lines {
        out.push_str(&line.speaker_label);
        out.push_str(": ");
        out.push_str(&escape(&line.text_content));
        out.push('\n');
    }
    out
}

/// Render with a `# panel <index>` comment line before each panel's texts;
/// texts outside every panel fall under `# unassigned`.
pub fn render_with_panel_markers(t: &Transcript, assignment: &PanelAssignment) -> String {
    let mut out = String::new();
    let mut current: Option<Option<usize>> = None;
    for line in &t.lines {
        let panel = assignment.text_to_panel[line.text_index];
        if current != Some(panel) {
            match panel {
                Some(p) => out.push_str(&format!("# panel {p}\n")),
                None => out.push_str("# unassigned\n"),
            }
            current = Some(panel);
        }
        out.push_str(&line.speaker_label);
        out.push_str(": ");
        out.push_str(&escape(&line.text_content));
        out.push('\n');
    }
    out
}

/// Inverse of [`render`]: `(label, content)` pairs.
pub fn parse_rendered(text: &str) -> Vec<(String, String)> {
    // Split on bare line feeds; `str::lines` would also strip carriage
    // returns, which are legal inside content.
    text.split('\n')
        .filter(|l| !l.is_empty())
        .map(|line| {
            let (label, content) = line.split_once(": ").unwrap_or((line, ""));
            (label.to_string(), unescape(content))
        })
        .collect()
}
