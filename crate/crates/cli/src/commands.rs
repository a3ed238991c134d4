//! Command implementations. Each command processes every input it can,
//! reports per-file errors on standard error, and returns whether all inputs
//! succeeded; warnings go to standard error and into the sidecar files but
//! never change the outcome.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use magi_pipe::association::{
    assign_speakers, cluster_characters, filter_low_confidence, mine_character_pairs,
    mine_text_pairs, ClusterSet, MinedPairs, SpeakerAssignment,
};
use magi_pipe::metrics::{evaluate_dataset, sweep_tau, EvalConfig, EvalReport, TauSweepPoint};
use magi_pipe::page_model::{
    assign_boxes_to_panels, load_page_annotation, load_page_graph, page_annotation_to_json,
    page_graph_to_json, PageAnnotation, PageGraph, PanelAssignment,
};
use magi_pipe::panel_order::{reading_order, ReadingOrder};
use magi_pipe::synth::{generate_random_page, SynthParams};
use magi_pipe::transcript::{generate_transcript, render, render_with_panel_markers};
use magi_pipe::Warning;

use crate::config::RunConfig;

/// Expand files and directories into a sorted list of page files matching
/// `suffix` (directories only; explicit files are taken as given).
pub fn collect_inputs(paths: &[PathBuf], suffix: &str) -> Result<Vec<PathBuf>, String> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(path)
                .map_err(|e| format!("cannot read directory {}: {e}", path.display()))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| {
                    p.file_name()
                        .is_some_and(|n| n.to_string_lossy().ends_with(suffix))
                })
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(path.clone());
        }
    }
    Ok(files)
}

fn write_out(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn report_warnings(page_id: &str, warnings: &[Warning]) {
    for w in warnings {
        eprintln!("warning[{page_id}]: {w}");
    }
}

fn load_graph_file(path: &Path) -> Result<(PageGraph, Vec<Warning>), String> {
    let bytes = fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    load_page_graph(&bytes).map_err(|e| format!("{}: {e}", path.display()))
}

struct PipelineRun {
    page: PageGraph,
    assignment: PanelAssignment,
    order: ReadingOrder,
    clusters: ClusterSet,
    speakers: SpeakerAssignment,
    warnings: Vec<Warning>,
}

fn run_pipeline(path: &Path, config: &RunConfig) -> Result<PipelineRun, String> {
    let (page, mut warnings) = load_graph_file(path)?;
    let tol = config.tolerance_for(page.width, page.height);
    let assignment = assign_boxes_to_panels(&page, &tol);
    let (order, mut order_warnings) = reading_order(&page, &assignment, &tol);
    warnings.append(&mut order_warnings);
    let clusters = cluster_characters(&page, config.tau);
    let (speakers, mut speaker_warnings) = assign_speakers(&page);
    warnings.append(&mut speaker_warnings);
    let speakers = filter_low_confidence(&speakers, config.confidence_cutoff);
    Ok(PipelineRun {
        page,
        assignment,
        order,
        clusters,
        speakers,
        warnings,
    })
}

#[derive(Serialize)]
struct Sidecar<'a> {
    page_id: &'a str,
    config: &'a RunConfig,
    panel_order: &'a [usize],
    text_order: &'a [usize],
    text_to_panel: &'a [Option<usize>],
    char_to_panel: &'a [Option<usize>],
    cluster_labels: &'a [usize],
    cluster_names: &'a [String],
    speakers: &'a [Option<magi_pipe::association::SpeakerPick>],
    warnings: &'a [Warning],
}

fn to_pretty_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_string_pretty(value).expect("serialization");
    out.push('\n');
    out.into_bytes()
}

/// `transcribe`: full pipeline per page, writing `<page_id>.transcript.txt`
/// and a machine-readable `<page_id>.sidecar.json`.
pub fn cmd_transcribe(inputs: &[PathBuf], out_dir: &Path, config: &RunConfig) -> bool {
    let mut all_ok = true;
    for path in inputs {
        match run_pipeline(path, config) {
            Ok(run) => {
                let transcript =
                    generate_transcript(&run.page, &run.order, &run.clusters, &run.speakers);
                let text = if config.emit_panel_markers {
                    render_with_panel_markers(&transcript, &run.assignment)
                } else {
                    render(&transcript)
                };
                let names =
                    magi_pipe::transcript::name_clusters(&run.clusters, &run.order, &run.speakers);
                let sidecar = Sidecar {
                    page_id: &run.page.page_id,
                    config,
                    panel_order: &run.order.panel_order,
                    text_order: &run.order.text_order,
                    text_to_panel: &run.assignment.text_to_panel,
                    char_to_panel: &run.assignment.char_to_panel,
                    cluster_labels: &run.clusters.labels,
                    cluster_names: &names,
                    speakers: &run.speakers.per_text,
                    warnings: &run.warnings,
                };
                report_warnings(&run.page.page_id, &run.warnings);
                let id = &run.page.page_id;
                if let Err(e) = write_out(out_dir, &format!("{id}.transcript.txt"), text.as_bytes())
                    .and_then(|()| {
                        write_out(
                            out_dir,
                            &format!("{id}.sidecar.json"),
                            &to_pretty_json(&sidecar),
                        )
                    })
                {
                    eprintln!("error: {e}");
                    all_ok = false;
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                all_ok = false;
            }
        }
    }
    all_ok
}

fn format_order(order: &ReadingOrder) -> String {
    let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    let panels = join(&order.panel_order);
    let texts = join(&order.text_order);
    let mut out = String::from("panels:");
    if !panels.is_empty() {
        out.push(' ');
        out.push_str(&panels);
    }
    out.push_str("\ntexts:");
    if !texts.is_empty() {
        out.push(' ');
        out.push_str(&texts);
    }
    out.push('\n');
    out
}

/// `order`: panel and text reading order per page, printed to standard
/// output and written as `<page_id>.order.txt` when an output directory is
/// given.
pub fn cmd_order(inputs: &[PathBuf], out_dir: Option<&Path>, config: &RunConfig) -> bool {
    let mut all_ok = true;
    for path in inputs {
        match run_pipeline(path, config) {
            Ok(run) => {
                report_warnings(&run.page.page_id, &run.warnings);
                let listing = format_order(&run.order);
                print!("page {}\n{listing}", run.page.page_id);
                if let Some(dir) = out_dir {
                    let name = format!("{}.order.txt", run.page.page_id);
                    if let Err(e) = write_out(dir, &name, listing.as_bytes()) {
                        eprintln!("error: {e}");
                        all_ok = false;
                    }
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                all_ok = false;
            }
        }
    }
    all_ok
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    config: &'a RunConfig,
    report: &'a EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau_sweep: &'a Option<Vec<TauSweepPoint>>,
}

fn fmt_metric(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.4}"),
        None => "-".to_string(),
    }
}

/// `evaluate`: pair page graphs with annotations by page id, compute the
/// metric suite, print a table, and write the full report.
pub fn cmd_evaluate(
    pred_inputs: &[PathBuf],
    gt_inputs: &[PathBuf],
    out_dir: &Path,
    config: &RunConfig,
    speaker_baseline: bool,
) -> bool {
    let mut all_ok = true;
    let mut graphs: BTreeMap<String, PageGraph> = BTreeMap::new();
    for path in pred_inputs {
        match load_graph_file(path) {
            Ok((page, warnings)) => {
                report_warnings(&page.page_id, &warnings);
                if graphs.insert(page.page_id.clone(), page).is_some() {
                    eprintln!("error: duplicate page id in {}", path.display());
                    all_ok = false;
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                all_ok = false;
            }
        }
    }
    let mut annotations: BTreeMap<String, PageAnnotation> = BTreeMap::new();
    for path in gt_inputs {
        let loaded = fs::read(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))
            .and_then(|bytes| {
                load_page_annotation(&bytes).map_err(|e| format!("{}: {e}", path.display()))
            });
        match loaded {
            Ok(ann) => {
                if annotations.insert(ann.page_id.clone(), ann).is_some() {
                    eprintln!("error: duplicate page id in {}", path.display());
                    all_ok = false;
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                all_ok = false;
            }
        }
    }

    let mut pairs: Vec<(PageGraph, PageAnnotation)> = Vec::new();
    for (id, page) in &graphs {
        match annotations.remove(id) {
            Some(ann) => pairs.push((page.clone(), ann)),
            None => {
                eprintln!("error: page '{id}' has no matching annotation");
                all_ok = false;
            }
        }
    }
    for id in annotations.keys() {
        eprintln!("error: annotation '{id}' has no matching page graph");
        all_ok = false;
    }
    if pairs.is_empty() {
        eprintln!("error: no pages");
        return false;
    }

    let eval_config = EvalConfig {
        tau: config.tau,
        iou_threshold: config.iou_threshold,
        top_k: config.top_k,
        speaker_baseline,
    };
    let report = match evaluate_dataset(&pairs, &eval_config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return false;
        }
    };

    let sweep = if config.threshold_sweep {
        match sweep_tau(&pairs, &eval_config) {
            Ok(points) => Some(points),
            Err(e) => {
                eprintln!("error: {e}");
                return false;
            }
        }
    } else {
        None
    };

    println!("pages: {}", report.page_count);
    println!(
        "{:<10} {:<9} {:<9} {:<7} {:<7} {:<7} {:<7} {:<7} {:<7} {:<12}",
        "AP(panel)",
        "AP(text)",
        "AP(char)",
        "AMI",
        "NMI",
        "MRR",
        "MAP@R",
        "P@1",
        "R-P",
        "Recall@#text"
    );
    println!(
        "{:<10} {:<9} {:<9} {:<7} {:<7} {:<7} {:<7} {:<7} {:<7} {:<12}",
        fmt_metric(report.ap_panel),
        fmt_metric(report.ap_text),
        fmt_metric(report.ap_character),
        fmt_metric(report.ami),
        fmt_metric(report.nmi),
        fmt_metric(report.mrr),
        fmt_metric(report.map_at_r),
        fmt_metric(report.p_at_1),
        fmt_metric(report.r_precision),
        fmt_metric(report.recall_at_num_texts),
    );
    if let Some(points) = &sweep {
        println!("{:<6} {:<7} {:<7}", "tau", "AMI", "NMI");
        for p in points {
            println!(
                "{:<6.2} {:<7} {:<7}",
                p.tau,
                fmt_metric(p.ami),
                fmt_metric(p.nmi)
            );
        }
        let best = points
            .iter()
            .filter_map(|p| p.ami.map(|a| (p.tau, a)))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((tau, _)) = best {
            println!("best tau by AMI: {tau:.2}");
        }
    }

    let output = EvalOutput {
        config,
        report: &report,
        tau_sweep: &sweep,
    };
    if let Err(e) = write_out(out_dir, "report.json", &to_pretty_json(&output)) {
        eprintln!("error: {e}");
        return false;
    }
    all_ok
}

#[derive(Serialize)]
struct MineOutput<'a> {
    page_id: &'a str,
    config: &'a RunConfig,
    positives: &'a std::collections::BTreeSet<(usize, usize)>,
    negatives: &'a std::collections::BTreeSet<(usize, usize)>,
    text_char_pairs: &'a [(usize, usize)],
    warnings: &'a [Warning],
}

/// `mine`: pseudo-annotation pairs per page. Pages without embeddings are
/// skipped with a warning, not an error.
pub fn cmd_mine(inputs: &[PathBuf], out_dir: &Path, config: &RunConfig) -> bool {
    let mut all_ok = true;
    for path in inputs {
        let loaded = load_graph_file(path);
        let (page, mut warnings) = match loaded {
            Ok(v) => v,
            Err(e) => {
                eprintln!("error: {e}");
                all_ok = false;
                continue;
            }
        };
        let tol = config.tolerance_for(page.width, page.height);
        let assignment = assign_boxes_to_panels(&page, &tol);
        let pairs: MinedPairs = match mine_character_pairs(&page, &assignment) {
            Ok((pairs, mut mining_warnings)) => {
                warnings.append(&mut mining_warnings);
                pairs
            }
            Err(e) => {
                eprintln!("warning[{}]: {e}; page skipped", page.page_id);
                continue;
            }
        };
        let text_pairs = mine_text_pairs(&page);
        report_warnings(&page.page_id, &warnings);
        let out = MineOutput {
            page_id: &page.page_id,
            config,
            positives: &pairs.positives,
            negatives: &pairs.negatives,
            text_char_pairs: &text_pairs,
            warnings: &warnings,
        };
        let name = format!("{}.pairs.json", page.page_id);
        if let Err(e) = write_out(out_dir, &name, &to_pretty_json(&out)) {
            eprintln!("error: {e}");
            all_ok = false;
        }
    }
    all_ok
}

#[derive(Serialize)]
struct ManifestPage {
    page_id: String,
    seed: u64,
    graph_file: String,
    annotation_file: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    generator_version: &'a str,
    seed: u64,
    count: usize,
    max_depth: usize,
    noise: f64,
    config: &'a RunConfig,
    pages: Vec<ManifestPage>,
}

/// `synth`: write `count` seeded page/annotation pairs plus a manifest.
pub fn cmd_synth(
    out_dir: &Path,
    config: &RunConfig,
    count: usize,
    max_depth: usize,
    noise: f64,
) -> bool {
    let params = SynthParams {
        max_depth,
        noise,
        ..SynthParams::default()
    };
    let mut pages = Vec::with_capacity(count);
    for offset in 0..count {
        let seed = config.seed + offset as u64;
        let (page, annotation) = generate_random_page(seed, &params);
        let graph_file = format!("{}.page.json", page.page_id);
        let annotation_file = format!("{}.ann.json", page.page_id);
        let result = write_out(out_dir, &graph_file, page_graph_to_json(&page).as_bytes())
            .and_then(|()| {
                write_out(
                    out_dir,
                    &annotation_file,
                    page_annotation_to_json(&annotation).as_bytes(),
                )
            });
        if let Err(e) = result {
            eprintln!("error: {e}");
            return false;
        }
        pages.push(ManifestPage {
            page_id: page.page_id,
            seed,
            graph_file,
            annotation_file,
        });
    }
    let manifest = Manifest {
        generator_version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
        count,
        max_depth,
        noise,
        config,
        pages,
    };
    if let Err(e) = write_out(out_dir, "manifest.json", &to_pretty_json(&manifest)) {
        eprintln!("error: {e}");
        return false;
    }
    true
}
