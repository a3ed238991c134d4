//! Clustering agreement: normalized and adjusted mutual information.
//!
//! NMI normalizes mutual information by the arithmetic mean of the label
//! entropies. AMI additionally subtracts the expected mutual information of
//! random contingency tables with the same marginals (the hypergeometric
//! model), so a random clustering scores about 0 — and individual pages can
//! legitimately score below 0.
//!
//! Frozen edge conventions: identical partitions score exactly 1.0 even when
//! degenerate (all singletons, or everything in one cluster); a zero
//! denominator on non-identical partitions scores 0.

use super::MetricsError;

/// `(AMI, NMI)` of a predicted labelling against a ground-truth labelling.
/// NMI is in `[0, 1]`; AMI is chance-adjusted and may be slightly negative.
pub fn clustering_metrics(
    pred_labels: &[usize],
    gt_labels: &[usize],
) -> Result<(f64, f64), MetricsError> {
    if pred_labels.len() != gt_labels.len() {
        return Err(MetricsError::LengthMismatch {
            left: pred_labels.len(),
            right: gt_labels.len(),
        });
    }
    if pred_labels.is_empty() {
        return Err(MetricsError::EmptyLabels);
    }
    if canonical(pred_labels) == canonical(gt_labels) {
        return Ok((1.0, 1.0));
    }

    let n = pred_labels.len();
    let (table, a, b) = contingency(pred_labels, gt_labels);

    let nf = n as f64;
    let h_a = entropy(&a, nf);
    let h_b = entropy(&b, nf);
    let mut mi = 0.0;
    for (&(i, j), &nij) in &table {
        let nij = nij as f64;
        mi += (nij / nf) * ((nf * nij) / (a[i] as f64 * b[j] as f64)).ln();
    }

    let mean_h = (h_a + h_b) / 2.0;
    let nmi = if mean_h > 0.0 {
        (mi / mean_h).clamp(0.0, 1.0)
    } else {
        0.0
    };

    let emi = expected_mutual_info(&a, &b, n);
    let denominator = mean_h - emi;
    let ami = if denominator.abs() < 1e-15 {
        0.0
    } else {
        (mi - emi) / denominator
    };

    Ok((ami, nmi))
}

/// Relabel by order of first appearance, so partitions compare structurally.
fn canonical(labels: &[usize]) -> Vec<usize> {
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

/// Sparse contingency table plus row and column marginals, with labels
/// compacted to dense indices.
#[allow(clippy::type_complexity)]
fn contingency(
    pred: &[usize],
    gt: &[usize],
) -> (
    std::collections::BTreeMap<(usize, usize), usize>,
    Vec<usize>,
    Vec<usize>,
) {
    let pred_c = canonical(pred);
    let gt_c = canonical(gt);
    let n_pred = pred_c.iter().max().map_or(0, |m| m + 1);
    let n_gt = gt_c.iter().max().map_or(0, |m| m + 1);
    let mut table = std::collections::BTreeMap::new();
    let mut a = vec![0usize; n_pred];
    let mut b = vec![0usize; n_gt];
    for (&i, &j) in pred_c.iter().zip(&gt_c) {
        *table.entry((i, j)).or_insert(0) += 1;
        a[i] += 1;
        b[j] += 1;
    }
    (table, a, b)
}

fn entropy(counts: &[usize], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Expected mutual information under the hypergeometric model: for each
/// marginal pair `(a_i, b_j)`, sum over every feasible cell count `nij` the
/// MI contribution weighted by the probability of that count.
fn expected_mutual_info(a: &[usize], b: &[usize], n: usize) -> f64 {
    // ln(k!) table up to n.
    let mut ln_fact = vec![0.0f64; n + 1];
    for k in 1..=n {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let nf = n as f64;
    let mut emi = 0.0;
    for &ai in a {
        for &bj in b {
            let lo = 1.max((ai + bj).saturating_sub(n));
            let hi = ai.min(bj);
            for nij in lo..=hi {
                let nij_f = nij as f64;
                let term = (nij_f / nf) * ((nf * nij_f) / (ai as f64 * bj as f64)).ln();
                let ln_prob = ln_fact[ai] + ln_fact[bj] + ln_fact[n - ai] + ln_fact[n - bj]
                    - ln_fact[n]
                    - ln_fact[nij]
                    - ln_fact[ai - nij]
                    - ln_fact[bj - nij]
                    - ln_fact[(n + nij) - ai - bj];
                emi += term * ln_prob.exp();
            }
        }
    }
    emi
}
