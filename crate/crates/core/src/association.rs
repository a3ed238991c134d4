//! Character-identity clustering, speaker assignment, the shortest-distance
//! baseline, and pseudo-annotation pair mining.

use serde::Serialize;
use std::collections::BTreeSet;
use thiserror::Error;

use crate::page_model::{PageGraph, PanelAssignment};
use crate::Warning;

/// Partition of a page's character boxes into identities. Labels are
/// consecutive from 0 in order of first appearance by character index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSet {
    pub labels: Vec<usize>,
    pub threshold_used: f64,
}

impl ClusterSet {
    pub fn cluster_count(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| m + 1)
    }
}

/// Per-text speaker pick: the argmax character and the score that produced
/// it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeakerPick {
    pub char_index: usize,
    pub confidence: f64,
}

/// One optional pick per text.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeakerAssignment {
    pub per_text: Vec<Option<SpeakerPick>>,
}

/// Mined character-pair pseudo-labels. Pairs are unordered, stored as
/// `(lo, hi)` with `lo < hi`; the two sets are disjoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinedPairs {
    pub positives: BTreeSet<(usize, usize)>,
    pub negatives: BTreeSet<(usize, usize)>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MiningError {
    #[error("char_embeddings required for character pair mining")]
    MissingEmbeddings,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, x: usize, y: usize) {
        let rx = self.find(x);
        let ry = self.find(y);
        if rx != ry {
            // Smaller root wins, keeping labels stable under edge order.
            let (lo, hi) = if rx < ry { (rx, ry) } else { (ry, rx) };
            self.parent[hi] = lo;
        }
    }
}

/// Threshold the character-character score matrix at `tau` and take connected
/// components: characters linked directly or transitively are one identity.
pub fn cluster_characters(page: &PageGraph, tau: f64) -> ClusterSet {
    let n = page.characters.len();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if page.char_char_scores[i][j] >= tau {
                uf.union(i, j);
            }
        }
    }
    let mut labels = Vec::with_capacity(n);
    let mut next = 0;
    let mut root_label = vec![usize::MAX; n];
    for i in 0..n {
        let root = uf.find(i);
        if root_label[root] == usize::MAX {
            root_label[root] = next;
            next += 1;
        }
        labels.push(root_label[root]);
    }
    ClusterSet {
        labels,
        threshold_used: tau,
    }
}

/// Row-wise argmax of the text-character score matrix. Ties break to the
/// lowest character index. A text with an all-zero row gets no speaker and a
/// warning; a page with no characters gets no speakers at all.
pub fn assign_speakers(page: &PageGraph) -> (SpeakerAssignment, Vec<Warning>) {
    let mut warnings = Vec::new();
    let per_text = page
        .text_char_scores
        .iter()
        .enumerate()
        .map(|(t, row)| {
            if row.is_empty() {
                return None;
            }
            if row.iter().all(|&s| s == 0.0) {
                warnings.push(format!("text {t}: all-zero speaker scores, no prediction"));
                return None;
            }
            let (best, score) = row
                .iter()
                .copied()
                .enumerate()
                .max_by(|(i, a), (j, b)| a.total_cmp(b).then(j.cmp(i)))
                .expect("row is non-empty");
            Some(SpeakerPick {
                char_index: best,
                confidence: score,
            })
        })
        .collect();
    (SpeakerAssignment { per_text }, warnings)
}

/// Drop every pick whose confidence is below `cutoff`; rendered downstream as
/// the placeholder speaker. Idempotent.
pub fn filter_low_confidence(a: &SpeakerAssignment, cutoff: f64) -> SpeakerAssignment {
    SpeakerAssignment {
        per_text: a
            .per_text
            .iter()
            .map(|pick| pick.filter(|p| p.confidence >= cutoff))
            .collect(),
    }
}

fn nearest_character(page: &PageGraph, text_index: usize) -> Option<usize> {
    let (tx, ty) = page.texts[text_index].bbox.center();
    page.characters
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| {
            let (ax, ay) = a.center();
            let (bx, by) = b.center();
            let da = (ax - tx) * (ax - tx) + (ay - ty) * (ay - ty);
            let db = (bx - tx) * (bx - tx) + (by - ty) * (by - ty);
            da.total_cmp(&db).then(i.cmp(j))
        })
        .map(|(i, _)| i)
}

/// "Shortest distance" speaker baseline: each text takes the character whose
/// box center is nearest its own, with confidence fixed at 1. Ties break to
/// the lowest character index.
pub fn nearest_character_baseline(page: &PageGraph) -> SpeakerAssignment {
    SpeakerAssignment {
        per_text: (0..page.texts.len())
            .map(|t| {
                nearest_character(page, t).map(|c| SpeakerPick {
                    char_index: c,
                    confidence: 1.0,
                })
            })
            .collect(),
    }
}

/// Text-character pseudo-label pairs: every text paired with its nearest
/// character (the same rule as the distance baseline).
pub fn mine_text_pairs(page: &PageGraph) -> Vec<(usize, usize)> {
    (0..page.texts.len())
        .filter_map(|t| nearest_character(page, t).map(|c| (t, c)))
        .collect()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Mine positive and negative character pairs for one page.
///
/// - Negatives: two characters in the same panel are different people.
/// - Positives: mutual nearest neighbours in embedding space (cosine), unless
///   they share a panel. Characters without a panel assignment are exempt
///   from the same-panel rule but eligible here.
/// - More negatives by transitivity: a positive `(a, b)` and a negative
///   `(b, c)` imply the negative `(a, c)`; applied to a fixed point.
///
/// A pair derived as both positive and negative is dropped from the positives
/// and kept negative (the structural same-panel evidence outranks the
/// embedding heuristic), with a conflict warning.
pub fn mine_character_pairs(
    page: &PageGraph,
    assignment: &PanelAssignment,
) -> Result<(MinedPairs, Vec<Warning>), MiningError> {
    let embeddings = page
        .char_embeddings
        .as_ref()
        .ok_or(MiningError::MissingEmbeddings)?;
    let n = page.characters.len();
    let panel_of = &assignment.char_to_panel;
    let mut warnings = Vec::new();

    let same_panel = |i: usize, j: usize| match (panel_of[i], panel_of[j]) {
        (Some(a), Some(b)) => a == b,
        _ => false,
    };

    let mut negatives: BTreeSet<(usize, usize)> = BTreeSet::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if same_panel(i, j) {
                negatives.insert((i, j));
            }
        }
    }

    // Mutual nearest neighbours by cosine similarity; ties to the lowest
    // index keep the relation deterministic.
    let nn: Vec<Option<usize>> = (0..n)
        .map(|i| {
            (0..n).filter(|&j| j != i).max_by(|&a, &b| {
                cosine(&embeddings[i], &embeddings[a])
                    .total_cmp(&cosine(&embeddings[i], &embeddings[b]))
                    .then(b.cmp(&a))
            })
        })
        .collect();
    let mut positives: BTreeSet<(usize, usize)> = BTreeSet::new();
    for i in 0..n {
        if let Some(j) = nn[i] {
            if i < j && nn[j] == Some(i) && !same_panel(i, j) {
                positives.insert((i, j));
            }
        }
    }

    let (pairs, mut closure_warnings) = close_and_reconcile(positives, negatives);
    warnings.append(&mut closure_warnings);
    Ok((pairs, warnings))
}

/// Extend the negatives by transitivity through the positives (a positive
/// `(a, b)` and a negative `(b, c)` imply the negative `(a, c)`) until a
/// fixed point, then resolve pairs that ended up in both sets: the negative
/// wins and a conflict warning is recorded.
fn close_and_reconcile(
    mut positives: BTreeSet<(usize, usize)>,
    mut negatives: BTreeSet<(usize, usize)>,
) -> (MinedPairs, Vec<Warning>) {
    let mut warnings = Vec::new();
    loop {
        let mut fresh: Vec<(usize, usize)> = Vec::new();
        for &(a, b) in &positives {
            for &(c, d) in &negatives {
                let derived = if a == c {
                    Some((b, d))
                } else if a == d {
                    Some((b, c))
                } else if b == c {
                    Some((a, d))
                } else if b == d {
                    Some((a, c))
                } else {
                    None
                };
                if let Some((x, y)) = derived {
                    if x != y {
                        let pair = (x.min(y), x.max(y));
                        if !negatives.contains(&pair) {
                            fresh.push(pair);
                        }
                    }
                }
            }
        }
        if fresh.is_empty() {
            break;
        }
        negatives.extend(fresh);
    }

    let conflicts: Vec<(usize, usize)> = positives.intersection(&negatives).copied().collect();
    for pair in conflicts {
        positives.remove(&pair);
        warnings.push(format!(
            "pair ({}, {}) mined as both positive and negative; kept negative",
            pair.0, pair.1
        ));
    }

    (
        MinedPairs {
            positives,
            negatives,
        },
        warnings,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use crate::page_model::TextBlock;

    fn page_with_scores(char_char: Vec<Vec<f64>>) -> PageGraph {
        let n = char_char.len();
        PageGraph {
            page_id: "t".into(),
            width: 100.0,
            height: 100.0,
            panels: vec![],
            texts: vec![],
            characters: (0..n)
                .map(|i| BBox::new(i as f64 * 10.0, 0.0, i as f64 * 10.0 + 5.0, 5.0))
                .collect(),
            char_char_scores: char_char,
            text_char_scores: vec![],
            char_embeddings: None,
        }
    }

    #[test]
    fn clusters_pair_above_threshold() {
        let page = page_with_scores(vec![vec![1.0, 0.7], vec![0.7, 1.0]]);
        assert_eq!(cluster_characters(&page, 0.65).labels, vec![0, 0]);
    }

    #[test]
    fn keeps_pair_below_threshold_apart() {
        let page = page_with_scores(vec![vec![1.0, 0.2], vec![0.2, 1.0]]);
        assert_eq!(cluster_characters(&page, 0.65).labels, vec![0, 1]);
    }

    #[test]
    fn chains_link_transitively() {
        let page = page_with_scores(vec![
            vec![1.0, 0.9, 0.1],
            vec![0.9, 1.0, 0.9],
            vec![0.1, 0.9, 1.0],
        ]);
        assert_eq!(cluster_characters(&page, 0.65).labels, vec![0, 0, 0]);
    }

    #[test]
    fn labels_number_by_first_appearance() {
        let page = page_with_scores(vec![
            vec![1.0, 0.0, 0.9],
            vec![0.0, 1.0, 0.0],
            vec![0.9, 0.0, 1.0],
        ]);
        let clusters = cluster_characters(&page, 0.65);
        assert_eq!(clusters.labels, vec![0, 1, 0]);
        assert_eq!(clusters.cluster_count(), 2);
    }

    fn page_with_text_scores(rows: Vec<Vec<f64>>) -> PageGraph {
        let n_char = rows.first().map_or(0, Vec::len);
        let mut page = page_with_scores(vec![vec![1.0; n_char]; n_char]);
        for i in 0..n_char {
            for j in 0..n_char {
                page.char_char_scores[i][j] = if i == j { 1.0 } else { 0.0 };
            }
        }
        page.texts = (0..rows.len())
            .map(|t| TextBlock {
                bbox: BBox::new(0.0, t as f64 * 10.0, 5.0, t as f64 * 10.0 + 5.0),
                content: None,
            })
            .collect();
        page.text_char_scores = rows;
        page
    }

    #[test]
    fn speaker_is_row_argmax() {
        let page = page_with_text_scores(vec![vec![0.1, 0.8, 0.3]]);
        let (speakers, warnings) = assign_speakers(&page);
        assert_eq!(
            speakers.per_text,
            vec![Some(SpeakerPick {
                char_index: 1,
                confidence: 0.8
            })]
        );
        assert!(warnings.is_empty());
    }

    #[test]
    fn no_characters_means_no_speaker() {
        let page = page_with_text_scores(vec![vec![]]);
        let (speakers, _) = assign_speakers(&page);
        assert_eq!(speakers.per_text, vec![None]);
    }

    #[test]
    fn argmax_tie_takes_lowest_index() {
        let page = page_with_text_scores(vec![vec![0.5, 0.5]]);
        let (speakers, _) = assign_speakers(&page);
        assert_eq!(
            speakers.per_text,
            vec![Some(SpeakerPick {
                char_index: 0,
                confidence: 0.5
            })]
        );
    }

    #[test]
    fn all_zero_row_yields_warning_and_no_pick() {
        let page = page_with_text_scores(vec![vec![0.0, 0.0]]);
        let (speakers, warnings) = assign_speakers(&page);
        assert_eq!(speakers.per_text, vec![None]);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn argmax_is_invariant_under_increasing_transforms() {
        let rows = vec![vec![0.1, 0.8, 0.3], vec![0.6, 0.2, 0.5]];
        let page = page_with_text_scores(rows.clone());
        let (base, _) = assign_speakers(&page);
        // Halving is strictly increasing; picks stay put, confidences move.
        let squashed = page_with_text_scores(
            rows.iter()
                .map(|r| r.iter().map(|s| s / 2.0).collect())
                .collect(),
        );
        let (transformed, _) = assign_speakers(&squashed);
        for (a, b) in base.per_text.iter().zip(&transformed.per_text) {
            let (a, b) = (a.unwrap(), b.unwrap());
            assert_eq!(a.char_index, b.char_index);
            assert_eq!(b.confidence, a.confidence / 2.0);
        }
    }

    #[test]
    fn filter_drops_below_cutoff() {
        let a = SpeakerAssignment {
            per_text: vec![
                Some(SpeakerPick {
                    char_index: 1,
                    confidence: 0.8,
                }),
                Some(SpeakerPick {
                    char_index: 2,
                    confidence: 0.39,
                }),
                None,
            ],
        };
        let filtered = filter_low_confidence(&a, 0.4);
        assert_eq!(filtered.per_text[0], a.per_text[0]);
        assert_eq!(filtered.per_text[1], None);
        assert_eq!(filtered.per_text[2], None);
        // Idempotent, and a zero cutoff is the identity.
        assert_eq!(filter_low_confidence(&filtered, 0.4), filtered);
        assert_eq!(filter_low_confidence(&a, 0.0), a);
    }

    fn baseline_page() -> PageGraph {
        let mut page = page_with_scores(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        page.characters = vec![
            BBox::new(0.0, 0.0, 2.0, 2.0),
            BBox::new(8.0, 0.0, 10.0, 2.0),
        ];
        page.texts = vec![TextBlock {
            bbox: BBox::new(0.0, 4.0, 2.0, 6.0),
            content: None,
        }];
        page.text_char_scores = vec![vec![0.0, 0.0]];
        page
    }

    #[test]
    fn baseline_picks_nearest_center() {
        let page = baseline_page();
        let picks = nearest_character_baseline(&page);
        assert_eq!(
            picks.per_text,
            vec![Some(SpeakerPick {
                char_index: 0,
                confidence: 1.0
            })]
        );
        assert_eq!(mine_text_pairs(&page), vec![(0, 0)]);
    }

    #[test]
    fn baseline_without_characters_is_absent() {
        let mut page = baseline_page();
        page.characters.clear();
        page.char_char_scores.clear();
        page.text_char_scores = vec![vec![]];
        let picks = nearest_character_baseline(&page);
        assert_eq!(picks.per_text, vec![None]);
        assert!(mine_text_pairs(&page).is_empty());
    }

    #[test]
    fn baseline_tie_takes_lower_index() {
        let mut page = baseline_page();
        page.characters = vec![
            BBox::new(0.0, 0.0, 2.0, 2.0),
            BBox::new(0.0, 8.0, 2.0, 10.0),
        ];
        page.texts = vec![TextBlock {
            bbox: BBox::new(0.0, 4.0, 2.0, 6.0),
            content: None,
        }];
        let picks = nearest_character_baseline(&page);
        assert_eq!(picks.per_text[0].unwrap().char_index, 0);
    }

    fn mining_page(
        panels: Vec<BBox>,
        char_panels: Vec<Option<usize>>,
        embeddings: Vec<Vec<f64>>,
    ) -> (PageGraph, PanelAssignment) {
        let n = embeddings.len();
        let mut page = page_with_scores(vec![vec![0.0; n]; n]);
        for i in 0..n {
            page.char_char_scores[i][i] = 1.0;
        }
        page.panels = panels;
        page.char_embeddings = Some(embeddings);
        let assignment = PanelAssignment {
            text_to_panel: vec![],
            char_to_panel: char_panels,
        };
        (page, assignment)
    }

    #[test]
    fn mining_applies_all_three_rules() {
        // Characters 0 and 1 share panel 0, character 2 sits in panel 1.
        // Embeddings make (1, 2) mutual nearest neighbours.
        let (page, assignment) = mining_page(
            vec![
                BBox::new(0.0, 0.0, 50.0, 100.0),
                BBox::new(50.0, 0.0, 100.0, 100.0),
            ],
            vec![Some(0), Some(0), Some(1)],
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.1, 1.0]],
        );
        let (pairs, warnings) = mine_character_pairs(&page, &assignment).unwrap();
        assert_eq!(pairs.positives, [(1, 2)].into_iter().collect());
        assert_eq!(pairs.negatives, [(0, 1), (0, 2)].into_iter().collect());
        assert!(warnings.is_empty());
    }

    #[test]
    fn single_panel_pages_mine_only_negatives() {
        let (page, assignment) = mining_page(
            vec![BBox::new(0.0, 0.0, 100.0, 100.0)],
            vec![Some(0), Some(0), Some(0)],
            vec![vec![1.0, 0.0], vec![0.9, 0.1], vec![0.0, 1.0]],
        );
        let (pairs, _) = mine_character_pairs(&page, &assignment).unwrap();
        assert!(pairs.positives.is_empty());
        assert_eq!(
            pairs.negatives,
            [(0, 1), (0, 2), (1, 2)].into_iter().collect()
        );
    }

    #[test]
    fn single_character_mines_nothing() {
        let (page, assignment) = mining_page(
            vec![BBox::new(0.0, 0.0, 100.0, 100.0)],
            vec![Some(0)],
            vec![vec![1.0]],
        );
        let (pairs, _) = mine_character_pairs(&page, &assignment).unwrap();
        assert!(pairs.positives.is_empty());
        assert!(pairs.negatives.is_empty());
    }

    #[test]
    fn missing_embeddings_is_an_error() {
        let (mut page, assignment) =
            mining_page(vec![], vec![Some(0), Some(0)], vec![vec![1.0], vec![1.0]]);
        page.char_embeddings = None;
        assert_eq!(
            mine_character_pairs(&page, &assignment).unwrap_err(),
            MiningError::MissingEmbeddings
        );
    }

    #[test]
    fn closure_reaches_fixed_point() {
        // 0-1 positive; 1-2 negative (same panel) implies 0-2 negative, and
        // with 2-3 positive that implies 0-3 and 1-3 negatives as well.
        let (page, assignment) = mining_page(
            vec![
                BBox::new(0.0, 0.0, 50.0, 100.0),
                BBox::new(50.0, 0.0, 100.0, 100.0),
            ],
            vec![Some(0), Some(1), Some(1), Some(0)],
            vec![
                vec![1.0, 0.0, 0.0],
                vec![0.99, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.99, 0.0],
            ],
        );
        let (pairs, warnings) = mine_character_pairs(&page, &assignment).unwrap();
        assert_eq!(pairs.positives, [(0, 1), (2, 3)].into_iter().collect());
        assert_eq!(
            pairs.negatives,
            [(0, 2), (0, 3), (1, 2), (1, 3)].into_iter().collect()
        );
        assert!(warnings.is_empty());
        // Re-running the miner changes nothing.
        let (pairs2, _) = mine_character_pairs(&page, &assignment).unwrap();
        assert_eq!(pairs, pairs2);
    }

    #[test]
    fn derived_negatives_extend_across_panels() {
        // 0 and 2 share a panel; positive (0, 1) plus negative (0, 2)
        // derive the negative (1, 2).
        let (page, assignment) = mining_page(
            vec![
                BBox::new(0.0, 0.0, 45.0, 100.0),
                BBox::new(55.0, 0.0, 100.0, 100.0),
            ],
            vec![Some(0), Some(1), Some(0)],
            vec![vec![1.0, 0.0], vec![0.999, 0.001], vec![0.0, 1.0]],
        );
        let (pairs, warnings) = mine_character_pairs(&page, &assignment).unwrap();
        assert_eq!(pairs.positives, [(0, 1)].into_iter().collect());
        assert_eq!(pairs.negatives, [(0, 2), (1, 2)].into_iter().collect());
        assert!(warnings.is_empty());
    }

    #[test]
    fn conflicting_pair_stays_negative_with_warning() {
        // Mutual-NN positives can never share an endpoint, so a conflict
        // cannot arise from the miner's own rule (b); the reconciliation is
        // still specified for arbitrary pair sets. Positives (0,1) and (1,2)
        // with negative (0,2): the closure derives both (1,2) and (0,1) as
        // negatives, which empties the positives.
        let positives: BTreeSet<(usize, usize)> = [(0, 1), (1, 2)].into_iter().collect();
        let negatives: BTreeSet<(usize, usize)> = [(0, 2)].into_iter().collect();
        let (pairs, warnings) = close_and_reconcile(positives, negatives);
        assert!(pairs.positives.is_empty());
        assert_eq!(
            pairs.negatives,
            [(0, 1), (0, 2), (1, 2)].into_iter().collect()
        );
        assert_eq!(warnings.len(), 2);
        assert!(warnings[0].contains("kept negative"));
        assert!(pairs.positives.is_disjoint(&pairs.negatives));
    }

    #[test]
    fn mutual_nn_relation_is_symmetric() {
        let (page, assignment) = mining_page(
            vec![],
            vec![None, None, None, None],
            vec![
                vec![1.0, 0.0],
                vec![0.9, 0.1],
                vec![0.0, 1.0],
                vec![0.1, 0.9],
            ],
        );
        let (pairs, _) = mine_character_pairs(&page, &assignment).unwrap();
        // Unassigned characters are exempt from the same-panel rule and can
        // pair up freely.
        assert_eq!(pairs.positives, [(0, 1), (2, 3)].into_iter().collect());
        assert!(pairs.negatives.is_empty());
    }
}
