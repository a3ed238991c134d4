//! Seeded synthetic pages with known ground truth, used as independent
//! oracles by the property and acceptance tests.
//!
//! Layouts are guillotine: the page is split recursively into horizontal
//! bands (full page width), and each band into cells read right to left.
//! Vertical gutters therefore run the full height of their band and band
//! gutters the full width of the page, which keeps the reading order of the
//! generated layout unambiguous — including after the bounded perturbation
//! below, because band gutters are wider than any perturbation can close.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::BBox;
use crate::page_model::{PageAnnotation, PageGraph, TextBlock};
use crate::panel_order::PanelDag;

/// Fraction of each page dimension kept as outer margin.
const MARGIN: f64 = 0.05;
/// Minimum panel side, as a fraction of the page side.
const MIN_PANEL: f64 = 0.10;
/// Gutter between cells within a band, as a fraction of the page width.
const CELL_GAP: f64 = 0.02;
/// Gutter between bands, as a fraction of the page height. Wider than twice
/// the maximum perturbation so band corridors survive `perturb_overlap`.
const BAND_GAP: f64 = 0.06;
/// Probability of splitting further when a split is feasible.
const SPLIT_PROB: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutAxis {
    /// A horizontal cut line: splits into top and bottom.
    Horizontal,
    /// A vertical cut line: splits into right and left.
    Vertical,
}

/// Recursive record of how the page was partitioned. `first` is the child
/// read first: the top child for horizontal cuts, the right child for
/// vertical cuts.
#[derive(Debug, Clone, PartialEq)]
pub enum CutNode {
    Leaf {
        panel: usize,
    },
    Split {
        axis: CutAxis,
        position: f64,
        first: Box<CutNode>,
        second: Box<CutNode>,
    },
}

/// A generated panel layout with its ground-truth reading order.
#[derive(Debug, Clone, PartialEq)]
pub struct GuillotineLayout {
    pub width: f64,
    pub height: f64,
    pub panels: Vec<BBox>,
    /// Cut-tree traversal: bands top to bottom, cells right to left.
    pub truth_order: Vec<usize>,
    pub cut_tree: CutNode,
}

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    width: f64,
    height: f64,
    panels: Vec<BBox>,
}

impl Gen<'_> {
    fn bands(&mut self, y1: f64, y2: f64, x1: f64, x2: f64, depth: usize) -> CutNode {
        let min_h = MIN_PANEL * self.height;
        let gap = BAND_GAP * self.height;
        let feasible = (y2 - y1) > 2.0 * min_h + gap;
        if depth == 0 || !feasible || !self.rng.gen_bool(SPLIT_PROB) {
            return self.cells(x1, x2, y1, y2, depth);
        }
        let t = self
            .rng
            .gen_range((y1 + min_h + gap / 2.0)..(y2 - min_h - gap / 2.0));
        let top = self.bands(y1, t - gap / 2.0, x1, x2, depth - 1);
        let bottom = self.bands(t + gap / 2.0, y2, x1, x2, depth - 1);
        CutNode::Split {
            axis: CutAxis::Horizontal,
            position: t,
            first: Box::new(top),
            second: Box::new(bottom),
        }
    }

    fn cells(&mut self, x1: f64, x2: f64, y1: f64, y2: f64, depth: usize) -> CutNode {
        let min_w = MIN_PANEL * self.width;
        let gap = CELL_GAP * self.width;
        let feasible = (x2 - x1) > 2.0 * min_w + gap;
        if depth == 0 || !feasible || !self.rng.gen_bool(SPLIT_PROB) {
            let panel = self.panels.len();
            self.panels.push(BBox::new(x1, y1, x2, y2));
            return CutNode::Leaf { panel };
        }
        let t = self
            .rng
            .gen_range((x1 + min_w + gap / 2.0)..(x2 - min_w - gap / 2.0));
        // Build left first so panel indices run left to right; reading
        // visits the right child first.
        let left = self.cells(x1, t - gap / 2.0, y1, y2, depth - 1);
        let right = self.cells(t + gap / 2.0, x2, y1, y2, depth - 1);
        CutNode::Split {
            axis: CutAxis::Vertical,
            position: t,
            first: Box::new(right),
            second: Box::new(left),
        }
    }
}

fn traverse(node: &CutNode, out: &mut Vec<usize>) {
    match node {
        CutNode::Leaf { panel } => out.push(*panel),
        CutNode::Split { first, second, .. } => {
            traverse(first, out);
            traverse(second, out);
        }
    }
}

/// Generate a seeded random guillotine layout. Identical arguments produce
/// identical layouts.
pub fn generate_guillotine(seed: u64, max_depth: usize, page_dims: (f64, f64)) -> GuillotineLayout {
    let (width, height) = page_dims;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gen = Gen {
        rng: &mut rng,
        width,
        height,
        panels: Vec::new(),
    };
    let cut_tree = gen.bands(
        MARGIN * height,
        (1.0 - MARGIN) * height,
        MARGIN * width,
        (1.0 - MARGIN) * width,
        max_depth,
    );
    let panels = gen.panels;
    let mut truth_order = Vec::with_capacity(panels.len());
    traverse(&cut_tree, &mut truth_order);
    GuillotineLayout {
        width,
        height,
        panels,
        truth_order,
        cut_tree,
    }
}

/// Expand every panel symmetrically by up to `magnitude` of its own size per
/// axis (seeded), creating overlaps while keeping each panel's center fixed.
pub fn perturb_overlap(layout: &GuillotineLayout, seed: u64, magnitude: f64) -> Vec<BBox> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    layout
        .panels
        .iter()
        .map(|p| {
            let dx = rng.gen::<f64>() * magnitude * p.width();
            let dy = rng.gen::<f64>() * magnitude * p.height();
            BBox::new(p.x1 - dx, p.y1 - dy, p.x2 + dx, p.y2 + dy)
        })
        .collect()
}

/// Any panel fully containing another. Such pairs have no defined reading
/// order and are skipped by the strict-equality properties.
pub fn has_containment(panels: &[BBox]) -> bool {
    panels.iter().enumerate().any(|(i, a)| {
        panels
            .iter()
            .enumerate()
            .any(|(j, b)| i != j && a.x1 <= b.x1 && a.y1 <= b.y1 && a.x2 >= b.x2 && a.y2 >= b.y2)
    })
}

/// Definitional validator: `order` is a permutation of the DAG's nodes and
/// every edge `(i, j)` puts `i` before `j`. Independent of the sorting
/// implementation it checks.
pub fn oracle_check_order(order: &[usize], dag: &PanelDag) -> bool {
    if order.len() != dag.n {
        return false;
    }
    let mut position = vec![usize::MAX; dag.n];
    for (pos, &v) in order.iter().enumerate() {
        if v >= dag.n || position[v] != usize::MAX {
            return false;
        }
        position[v] = pos;
    }
    dag.edges.iter().all(|&(i, j)| position[i] < position[j])
}

/// Wrap bare panels in a page graph with no texts or characters.
pub fn page_from_panels(page_id: &str, width: f64, height: f64, panels: Vec<BBox>) -> PageGraph {
    PageGraph {
        page_id: page_id.to_string(),
        width,
        height,
        panels,
        texts: Vec::new(),
        characters: Vec::new(),
        char_char_scores: Vec::new(),
        text_char_scores: Vec::new(),
        char_embeddings: None,
    }
}

/// Controls for [`generate_random_page`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub width: f64,
    pub height: f64,
    pub max_depth: usize,
    /// 0 produces score matrices and embeddings that agree exactly with the
    /// ground truth; larger values blur them toward uniform noise.
    pub noise: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            width: 840.0,
            height: 1200.0,
            max_depth: 4,
            noise: 0.0,
        }
    }
}

const WORDS: &[&str] = &[
    "HEY",
    "LOOK OUT",
    "WHAT",
    "IT'S HIM",
    "RUN",
    "NO WAY",
    "WAIT",
    "HAHAHA",
    "HM",
    "YOU'RE LATE",
    "OVER THERE",
    "IMPOSSIBLE",
];

const EMBEDDING_DIM: usize = 8;

/// Generate a full synthetic page: panels with texts and characters placed
/// inside them, ground-truth identities and speaker edges, and score
/// matrices and embeddings derived from the ground truth at the configured
/// noise level.
pub fn generate_random_page(seed: u64, params: &SynthParams) -> (PageGraph, PageAnnotation) {
    let layout = generate_guillotine(seed, params.max_depth, (params.width, params.height));
    // Separate stream for content so layout stays a function of the seed
    // alone.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let page_id = format!("synth-{seed}");

    let mut texts: Vec<TextBlock> = Vec::new();
    let mut characters: Vec<BBox> = Vec::new();
    let mut text_panel: Vec<usize> = Vec::new();
    let mut char_panel: Vec<usize> = Vec::new();
    for (p, panel) in layout.panels.iter().enumerate() {
        let n_texts = rng.gen_range(0..=3usize);
        let n_chars = rng.gen_range(0..=2usize);
        for _ in 0..n_chars {
            characters.push(place_inside(&mut rng, panel, 0.15..0.35, 0.25..0.50));
            char_panel.push(p);
        }
        for _ in 0..n_texts {
            let bbox = place_inside(&mut rng, panel, 0.12..0.30, 0.08..0.20);
            let t = texts.len();
            let content = if rng.gen_bool(0.9) {
                Some(format!("{} ({t})", WORDS[rng.gen_range(0..WORDS.len())]))
            } else {
                None
            };
            texts.push(TextBlock { bbox, content });
            text_panel.push(p);
        }
    }

    let n_char = characters.len();
    let n_text = texts.len();

    // Identities, renumbered by first appearance.
    let identity_count = if n_char == 0 {
        0
    } else {
        rng.gen_range(1..=n_char.min(3))
    };
    let raw_identity: Vec<usize> = (0..n_char)
        .map(|_| rng.gen_range(0..identity_count))
        .collect();
    let gt_char_identity = relabel(&raw_identity);

    // Each text speaks from its own panel when a character is present.
    let mut gt_speaker_edges: Vec<(usize, usize)> = Vec::new();
    for (t, &panel) in text_panel.iter().enumerate() {
        let in_panel: Vec<usize> = (0..n_char).filter(|&c| char_panel[c] == panel).collect();
        if !in_panel.is_empty() && rng.gen_bool(0.85) {
            gt_speaker_edges.push((t, in_panel[rng.gen_range(0..in_panel.len())]));
        }
    }

    let noise = params.noise;
    let noisy = |truth: bool, rng: &mut ChaCha8Rng| -> f64 {
        let u: f64 = rng.gen();
        if truth {
            1.0 - u * noise
        } else {
            u * noise
        }
    };

    let mut char_char_scores = vec![vec![0.0; n_char]; n_char];
    for i in 0..n_char {
        char_char_scores[i][i] = 1.0;
        for j in (i + 1)..n_char {
            let s = noisy(gt_char_identity[i] == gt_char_identity[j], &mut rng);
            char_char_scores[i][j] = s;
            char_char_scores[j][i] = s;
        }
    }
    let mut text_char_scores = vec![vec![0.0; n_char]; n_text];
    for (t, row) in text_char_scores.iter_mut().enumerate() {
        let speaker = gt_speaker_edges
            .iter()
            .find(|&&(et, _)| et == t)
            .map(|&(_, c)| c);
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = noisy(speaker == Some(c), &mut rng);
        }
    }

    // One base vector per identity; characters jitter around theirs.
    let bases: Vec<Vec<f64>> = (0..identity_count)
        .map(|_| {
            let v: Vec<f64> = (0..EMBEDDING_DIM)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    let char_embeddings: Vec<Vec<f64>> = (0..n_char)
        .map(|c| {
            bases[gt_char_identity[c]]
                .iter()
                .map(|&x| x + noise * rng.gen_range(-0.5..0.5))
                .collect()
        })
        .collect();

    let page = PageGraph {
        page_id: page_id.clone(),
        width: params.width,
        height: params.height,
        panels: layout.panels.clone(),
        texts: texts.clone(),
        characters: characters.clone(),
        char_char_scores,
        text_char_scores,
        char_embeddings: Some(char_embeddings),
    };
    let annotation = PageAnnotation {
        page_id,
        gt_panels: Some(layout.panels),
        gt_texts: texts.into_iter().map(|t| t.bbox).collect(),
        gt_characters: characters,
        gt_char_identity,
        gt_speaker_edges,
    };
    (page, annotation)
}

fn place_inside(
    rng: &mut ChaCha8Rng,
    panel: &BBox,
    w_frac: std::ops::Range<f64>,
    h_frac: std::ops::Range<f64>,
) -> BBox {
    let margin_x = 0.02 * panel.width();
    let margin_y = 0.02 * panel.height();
    let w = panel.width() * rng.gen_range(w_frac);
    let h = panel.height() * rng.gen_range(h_frac);
    let x1 = rng.gen_range((panel.x1 + margin_x)..(panel.x2 - margin_x - w));
    let y1 = rng.gen_range((panel.y1 + margin_y)..(panel.y2 - margin_y - h));
    BBox::new(x1, y1, x1 + w, y1 + h)
}

fn relabel(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<(usize, usize)> = Vec::new();
    labels
        .iter()
        .map(|&l| {
            if let Some(&(_, c)) = map.iter().find(|&&(orig, _)| orig == l) {
                c
            } else {
                let c = map.len();
                map.push((l, c));
                c
            }
        })
        .collect()
}
