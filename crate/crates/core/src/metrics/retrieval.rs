//! Retrieval-style metrics over a per-page character similarity matrix: each
//! character queries all others ranked by descending similarity.

use serde::Serialize;

use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RetrievalMetrics {
    pub mrr: f64,
    pub map_at_r: f64,
    pub p_at_1: f64,
    pub r_precision: f64,
}

/// MRR, MAP@R, P@1 and R-Precision averaged over the page's queries, where
/// `R` is the query's class size minus one. Queries whose class has no other
/// member are excluded; `None` when no query qualifies.
pub fn retrieval_metrics(
    similarity: &[Vec<f64>],
    gt_labels: &[usize],
) -> Result<Option<RetrievalMetrics>, MetricsError> {
    let n = gt_labels.len();
    if similarity.len() != n || similarity.iter().any(|row| row.len() != n) {
        return Err(MetricsError::ShapeMismatch {
            rows: similarity.len(),
            cols: similarity.first().map_or(0, Vec::len),
            n,
        });
    }

    let mut sums = RetrievalMetrics {
        mrr: 0.0,
        map_at_r: 0.0,
        p_at_1: 0.0,
        r_precision: 0.0,
    };
    let mut included = 0usize;
    for q in 0..n {
        let r = gt_labels.iter().filter(|&&l| l == gt_labels[q]).count() - 1;
        if r == 0 {
            continue;
        }
        included += 1;

        let mut candidates: Vec<usize> = (0..n).filter(|&c| c != q).collect();
        candidates.sort_by(|&a, &b| {
            similarity[q][b]
                .total_cmp(&similarity[q][a])
                .then(a.cmp(&b))
        });

        let mut first_hit_rank = None;
        let mut hits_in_top_r = 0usize;
        let mut map_sum = 0.0;
        for (rank0, &c) in candidates.iter().enumerate() {
            let relevant = gt_labels[c] == gt_labels[q];
            if relevant && first_hit_rank.is_none() {
                first_hit_rank = Some(rank0 + 1);
            }
            if rank0 < r && relevant {
                hits_in_top_r += 1;
                map_sum += hits_in_top_r as f64 / (rank0 + 1) as f64;
            }
        }

        sums.mrr += 1.0 / first_hit_rank.expect("class has another member") as f64;
        sums.map_at_r += map_sum / r as f64;
        sums.p_at_1 += if gt_labels[candidates[0]] == gt_labels[q] {
            1.0
        } else {
            0.0
        };
        sums.r_precision += hits_in_top_r as f64 / r as f64;
    }

    if included == 0 {
        return Ok(None);
    }
    let k = included as f64;
    Ok(Some(RetrievalMetrics {
        mrr: sums.mrr / k,
        map_at_r: sums.map_at_r / k,
        p_at_1: sums.p_at_1 / k,
        r_precision: sums.r_precision / k,
    }))
}
