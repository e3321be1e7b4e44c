//! Minimum-cost assignment between generated and target interpretations.

use serde::{Deserialize, Serialize};

use super::lexical::bleu1;
use super::EvaluationError;

/// Cost of pairing a row or column with a padding slot.
pub const DUMMY_COST: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MatchResult {
    /// (generated index, target index), sorted by generated index.
    pub pairs: Vec<(usize, usize)>,
    /// Generated indices assigned to padding.
    pub unmatched_generated: Vec<usize>,
    /// Target indices assigned to padding.
    pub unmatched_targets: Vec<usize>,
    /// Total cost of the padded assignment, padding included.
    pub cost: f64,
}

impl MatchResult {
    pub fn unmatched(&self) -> usize {
        self.unmatched_generated.len() + self.unmatched_targets.len()
    }
}

/// Kuhn-Munkres with row/column potentials on the square matrix obtained
/// by padding `cost` with `DUMMY_COST`. O(n³).
pub fn hungarian_match(cost: &[Vec<f64>]) -> Result<MatchResult, EvaluationError> {
    let rows = cost.len();
    if rows == 0 {
        return Ok(MatchResult::default());
    }
    let cols = cost[0].len();
    if cost.iter().any(|r| r.len() != cols) {
        return Err(EvaluationError::RaggedMatrix);
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(EvaluationError::NonFiniteCost);
    }
    if cols == 0 {
        return Ok(MatchResult {
            unmatched_generated: (0..rows).collect(),
            cost: DUMMY_COST * rows as f64,
            ..MatchResult::default()
        });
    }
    let n = rows.max(cols);
    let at = |i: usize, j: usize| if i < rows && j < cols { cost[i][j] } else { DUMMY_COST };

    // 1-based; index 0 is the virtual start column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
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
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![0usize; n];
    for j in 1..=n {
        col_of_row[row_of[j] - 1] = j - 1;
    }
    let mut out = MatchResult::default();
    for (i, &j) in col_of_row.iter().enumerate() {
        out.cost += at(i, j);
        match (i < rows, j < cols) {
            (true, true) => out.pairs.push((i, j)),
            (true, false) => out.unmatched_generated.push(i),
            (false, true) => out.unmatched_targets.push(j),
            (false, false) => {}
        }
    }
    out.unmatched_targets.sort_unstable();
    Ok(out)
}

/// `cost[i][j] = 100 − BLEU-1(generated_i, target_j)`.
pub fn match_cost_matrix(generated: &[String], targets: &[String]) -> Vec<Vec<f64>> {
    generated.iter().map(|g| targets.iter().map(|t| 100.0 - bleu1(g, t)).collect()).collect()
}

pub fn match_interpretations(generated: &[String], targets: &[String]) -> Result<MatchResult, EvaluationError> {
    if generated.is_empty() {
        return Err(EvaluationError::EmptyInput("generated interpretations"));
    }
    if targets.is_empty() {
        return Err(EvaluationError::EmptyInput("target interpretations"));
    }
    hungarian_match(&match_cost_matrix(generated, targets))
}
