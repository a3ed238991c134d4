//! Panel reading order.
//!
//! Every unordered pair of panels is oriented into a directed edge ("read
//! before"), giving a complete orientation whose topological order is the
//! page's reading order. Pair orientation uses strict directional rules on
//! disjoint boxes; overlapping pairs are temporarily eroded until disjoint;
//! top-left/bottom-right diagonal pairs are disambiguated by searching for a
//! full-page horizontal or vertical cut.
//!
//! Manga direction throughout: top to bottom, right to left.

use crate::geometry::{
    erode, erode_pair_until_disjoint, is_strictly_above, is_strictly_right_of, BBox, Tolerance,
};
use crate::page_model::{PageGraph, PanelAssignment};
use crate::Warning;
use std::cmp::Ordering;
use std::collections::BTreeSet;

/// Relative reading order of an ordered pair `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelOrder {
    /// `i` is read before `j`.
    Before,
    /// `j` is read before `i`.
    After,
}

impl RelOrder {
    fn flip(self) -> RelOrder {
        match self {
            RelOrder::Before => RelOrder::After,
            RelOrder::After => RelOrder::Before,
        }
    }
}

/// Complete orientation over a page's panels: edge `(i, j)` means panel `i`
/// is read before panel `j`. `centers` carries each panel's center, used as
/// the deterministic tie-break key during topological sorting.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDag {
    pub n: usize,
    pub edges: BTreeSet<(usize, usize)>,
    pub centers: Vec<(f64, f64)>,
}

/// Panel and text permutations for one page. `text_order` is grouped by
/// panel: all texts of an earlier panel precede those of a later panel.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadingOrder {
    pub panel_order: Vec<usize>,
    pub text_order: Vec<usize>,
}

/// "Top to bottom, right to left" comparison of center keys, with the index
/// as the final tie-break. Used wherever degenerate geometry defeats the
/// directional rules, and to pick deterministically among topological
/// sources.
fn reading_key_cmp(a: (f64, f64, usize), b: (f64, f64, usize)) -> Ordering {
    a.1.total_cmp(&b.1) // center_y ascending
        .then(b.0.total_cmp(&a.0)) // center_x descending
        .then(a.2.cmp(&b.2))
}

fn fallback_order(a: &BBox, b: &BBox, i: usize, j: usize) -> RelOrder {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    match reading_key_cmp((ax, ay, i), (bx, by, j)) {
        Ordering::Less => RelOrder::Before,
        Ordering::Greater => RelOrder::After,
        Ordering::Equal => unreachable!("index tie-break makes keys distinct"),
    }
}

/// Orient one panel pair. Total: falls back to the positional comparator when
/// erosion cannot separate the pair (containment-like overlap).
pub fn relative_order(i: usize, j: usize, page: &PageGraph, tol: &Tolerance) -> RelOrder {
    debug_assert_ne!(i, j);
    let pa = &page.panels[i];
    let pb = &page.panels[j];
    let (ea, eb) = match erode_pair_until_disjoint(pa, pb, tol) {
        Some(pair) => pair,
        None => return fallback_order(pa, pb, i, j),
    };

    let a_above = is_strictly_above(&ea, &eb, tol);
    let b_above = is_strictly_above(&eb, &ea, tol);
    let a_right = is_strictly_right_of(&ea, &eb, tol);
    let b_right = is_strictly_right_of(&eb, &ea, tol);

    if a_above && !b_right {
        RelOrder::Before
    } else if b_above && !a_right {
        RelOrder::After
    } else if a_right && !b_above {
        RelOrder::Before
    } else if b_right && !a_above {
        RelOrder::After
    } else if a_above && b_right {
        disambiguate_diagonal(i, j, page, tol)
    } else if b_above && a_right {
        disambiguate_diagonal(j, i, page, tol).flip()
    } else {
        fallback_order(pa, pb, i, j)
    }
}

/// Resolve a top-left/bottom-right pair: panel `i` is strictly above and
/// strictly left of panel `j`.
///
/// Searches for a full-page horizontal cut splitting `i` above and `j` below
/// (top read first), then for a full-page vertical cut splitting them into
/// right and left (right read first). If neither exists, every panel is
/// eroded by one step and the search repeats, up to the iteration cap; the
/// final fallback is the positional comparator.
pub fn disambiguate_diagonal(i: usize, j: usize, page: &PageGraph, tol: &Tolerance) -> RelOrder {
    for level in 0..=tol.max_erosion_iters {
        let shrink = level as f64 * tol.erosion_step;
        let eroded: Vec<BBox> = page.panels.iter().map(|p| erode(p, shrink)).collect();
        let a = &eroded[i];
        let b = &eroded[j];
        // Horizontal: a y-value crossed by no panel interior, with a fully
        // above it and b fully below.
        if cut_exists(&eroded, a.y2, b.y1, |p| (p.y1, p.y2)) {
            return RelOrder::Before;
        }
        // Vertical: an x-value crossed by no panel interior, with a fully to
        // the left and b fully to the right.
        if cut_exists(&eroded, a.x2, b.x1, |p| (p.x1, p.x2)) {
            return RelOrder::After;
        }
    }
    fallback_order(&page.panels[i], &page.panels[j], i, j)
}

/// Is there a coordinate in `[lo, hi]` not strictly inside any panel's
/// projected interval? The blocked set is a union of open intervals, so if
/// any free point exists, `lo` or one of the interval upper ends is free.
fn cut_exists(panels: &[BBox], lo: f64, hi: f64, axis: impl Fn(&BBox) -> (f64, f64)) -> bool {
    if lo > hi {
        return false;
    }
    let intervals: Vec<(f64, f64)> = panels.iter().map(&axis).collect();
    let free = |v: f64| intervals.iter().all(|&(s, e)| !(s < v && v < e));
    if free(lo) || free(hi) {
        return true;
    }
    intervals
        .iter()
        .map(|&(_, e)| e)
        .any(|e| lo <= e && e <= hi && free(e))
}

/// Orient every unordered pair of panels.
pub fn build_dag(page: &PageGraph, tol: &Tolerance) -> PanelDag {
    let n = page.panels.len();
    let mut edges = BTreeSet::new();
    for i in 0..n {
        for j in (i + 1)..n {
            match relative_order(i, j, page, tol) {
                RelOrder::Before => edges.insert((i, j)),
                RelOrder::After => edges.insert((j, i)),
            };
        }
    }
    PanelDag {
        n,
        edges,
        centers: page.panels.iter().map(BBox::center).collect(),
    }
}

/// Kahn's algorithm with deterministic tie-breaking.
///
/// When several sources are available the minimal one under the reading-key
/// comparator is taken. When no source exists (the orientation contains a
/// cycle), the minimal remaining node is emitted anyway, its unsatisfied
/// in-edges are dropped, and a warning is recorded; sorting never aborts.
pub fn topological_order(dag: &PanelDag) -> (Vec<usize>, Vec<Warning>) {
    let n = dag.n;
    let mut indegree = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(u, v) in &dag.edges {
        indegree[v] += 1;
        out[u].push(v);
    }

    let key = |v: usize| (dag.centers[v].0, dag.centers[v].1, v);
    let mut remaining: BTreeSet<usize> = (0..n).collect();
    let mut order = Vec::with_capacity(n);
    let mut warnings = Vec::new();

    while !remaining.is_empty() {
        let sources: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&v| indegree[v] == 0)
            .collect();
        let next = if let Some(&best) = sources
            .iter()
            .min_by(|&&a, &&b| reading_key_cmp(key(a), key(b)))
        {
            best
        } else {
            // Cycle: force the minimal remaining node out and drop whatever
            // in-edges it still has.
            let forced = remaining
                .iter()
                .copied()
                .min_by(|&a, &b| reading_key_cmp(key(a), key(b)))
                .expect("remaining is non-empty");
            warnings.push(format!(
                "cycle in panel order graph: emitting panel {forced} with {} unsatisfied in-edges",
                indegree[forced]
            ));
            forced
        };
        remaining.remove(&next);
        order.push(next);
        for &w in &out[next] {
            if remaining.contains(&w) {
                indegree[w] -= 1;
            }
        }
    }
    (order, warnings)
}

/// Texts of one panel, ordered by ascending distance from the text center to
/// the panel's top-right corner; ties break by text index.
pub fn order_texts_in_panel(text_indices: &[usize], page: &PageGraph, panel: &BBox) -> Vec<usize> {
    sort_by_corner_distance(text_indices, page, panel.x2, panel.y1)
}

fn sort_by_corner_distance(
    text_indices: &[usize],
    page: &PageGraph,
    corner_x: f64,
    corner_y: f64,
) -> Vec<usize> {
    let mut sorted = text_indices.to_vec();
    sorted.sort_by(|&a, &b| {
        let da = corner_dist2(&page.texts[a].bbox, corner_x, corner_y);
        let db = corner_dist2(&page.texts[b].bbox, corner_x, corner_y);
        da.total_cmp(&db).then(a.cmp(&b))
    });
    sorted
}

fn corner_dist2(b: &BBox, x: f64, y: f64) -> f64 {
    let (cx, cy) = b.center();
    (cx - x) * (cx - x) + (cy - y) * (cy - y)
}

/// Full reading order for one page: panels via DAG + topological sort, texts
/// grouped per ordered panel. Texts with no panel assignment are appended
/// last, ordered by distance from the page's top-right corner.
pub fn reading_order(
    page: &PageGraph,
    assignment: &PanelAssignment,
    tol: &Tolerance,
) -> (ReadingOrder, Vec<Warning>) {
    let dag = build_dag(page, tol);
    let (panel_order, warnings) = topological_order(&dag);

    let mut per_panel: Vec<Vec<usize>> = vec![Vec::new(); page.panels.len()];
    let mut unassigned = Vec::new();
    for (t, panel) in assignment.text_to_panel.iter().enumerate() {
        match panel {
            Some(p) => per_panel[*p].push(t),
            None => unassigned.push(t),
        }
    }

    let mut text_order = Vec::with_capacity(page.texts.len());
    for &p in &panel_order {
        text_order.extend(order_texts_in_panel(&per_panel[p], page, &page.panels[p]));
    }
    text_order.extend(sort_by_corner_distance(&unassigned, page, page.width, 0.0));

    (
        ReadingOrder {
            panel_order,
            text_order,
        },
        warnings,
    )
}
