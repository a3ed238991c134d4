//! Minimum-cost assignment of predicted boxes to ground-truth boxes.

use crate::geometry::{iou, BBox};

/// Match predicted boxes to ground-truth boxes by minimum total cost, with
/// cost `1 - IoU`. Returns, for each ground truth, the index of its matched
/// prediction; pairs with zero IoU are severed after the assignment and left
/// unmatched.
pub fn hungarian_match_boxes(preds: &[BBox], gts: &[BBox]) -> Vec<Option<usize>> {
    let np = preds.len();
    let ng = gts.len();
    if np == 0 || ng == 0 {
        return vec![None; ng];
    }
    // Pad to a square matrix; dummy pairs cost the same as a zero-IoU pair.
    let n = np.max(ng);
    let cost: Vec<Vec<f64>> = (0..n)
        .map(|g| {
            (0..n)
                .map(|p| {
                    if g < ng && p < np {
                        1.0 - iou(&preds[p], &gts[g])
                    } else {
                        1.0
                    }
                })
                .collect()
        })
        .collect();

    let row_for_col = solve(&cost);
    let mut result = vec![None; ng];
    for (col, &row) in row_for_col.iter().enumerate() {
        if row < ng && col < np && iou(&preds[col], &gts[row]) > 0.0 {
            result[row] = Some(col);
        }
    }
    result
}

/// O(n^3) Hungarian algorithm over a square cost matrix, via row/column
/// potentials and shortest augmenting paths. Returns the assigned row for
/// each column.
pub(crate) fn solve(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut assigned_row = vec![0usize; n + 1]; // per column (1-based), 0 = free
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        assigned_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = assigned_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[assigned_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if assigned_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            assigned_row[j0] = assigned_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| assigned_row[j] - 1).collect()
}

/// Minimal total assignment cost between two box lists, with cost `1 - IoU`
/// per pair and cost 1 for every unmatched box on the longer side. Exposed so
/// the optimality of [`hungarian_match_boxes`] can be checked against
/// exhaustive search.
pub fn matching_cost(preds: &[BBox], gts: &[BBox]) -> f64 {
    let np = preds.len();
    let ng = gts.len();
    if np == 0 || ng == 0 {
        return np.max(ng) as f64;
    }
    let n = np.max(ng);
    let cost: Vec<Vec<f64>> = (0..n)
        .map(|g| {
            (0..n)
                .map(|p| {
                    if g < ng && p < np {
                        1.0 - iou(&preds[p], &gts[g])
                    } else {
                        1.0
                    }
                })
                .collect()
        })
        .collect();
    total_cost(&cost)
}

fn total_cost(cost: &[Vec<f64>]) -> f64 {
    solve(cost)
        .iter()
        .enumerate()
        .map(|(col, &row)| cost[row][col])
        .sum()
}
