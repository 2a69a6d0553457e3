//! Minimum-cost linear assignment via shortest augmenting paths with
//! potentials (O(n²m)). Rectangular inputs behave as if padded with
//! zero-cost dummy rows or columns.

/// Matches plus the rows and columns left over after padding.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AssignmentResult {
    /// `(row, col)` pairs sorted by row.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl AssignmentResult {
    pub fn total_cost(&self, cost: &[f64], cols: usize) -> f64 {
        self.matches.iter().map(|&(r, c)| cost[r * cols + c]).sum()
    }

    fn from_matches(mut matches: Vec<(usize, usize)>, rows: usize, cols: usize) -> Self {
        matches.sort_unstable();
        let mut row_used = vec![false; rows];
        let mut col_used = vec![false; cols];
        for &(r, c) in &matches {
            row_used[r] = true;
            col_used[c] = true;
        }
        Self {
            matches,
            unmatched_rows: (0..rows).filter(|r| !row_used[*r]).collect(),
            unmatched_cols: (0..cols).filter(|c| !col_used[*c]).collect(),
        }
    }

    /// Drops matches failing `keep`, returning their endpoints to the unmatched lists.
    pub fn filter(self, rows: usize, cols: usize, mut keep: impl FnMut(usize, usize) -> bool) -> Self {
        let kept = self.matches.into_iter().filter(|&(r, c)| keep(r, c)).collect();
        Self::from_matches(kept, rows, cols)
    }
}

/// Solves min-cost assignment on a row-major `rows × cols` matrix of finite costs.
pub fn hungarian(cost: &[f64], rows: usize, cols: usize) -> AssignmentResult {
    assert_eq!(cost.len(), rows * cols, "cost matrix size mismatch");
    if rows == 0 || cols == 0 {
        return AssignmentResult::from_matches(Vec::new(), rows, cols);
    }
    debug_assert!(cost.iter().all(|c| c.is_finite()), "costs must be finite");
    let matches = if rows <= cols {
        solve(rows, cols, |r, c| cost[r * cols + c])
    } else {
        solve(cols, rows, |r, c| cost[c * cols + r])
            .into_iter()
            .map(|(c, r)| (r, c))
            .collect()
    };
    AssignmentResult::from_matches(matches, rows, cols)
}

/// Core solver for n <= m; every one of the n rows gets a column.
fn solve(n: usize, m: usize, a: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize)> {
    let inf = f64::INFINITY;
    // 1-based arrays; index 0 is the virtual root column
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=m).filter(|&j| p[j] != 0).map(|j| (p[j] - 1, j - 1)).collect()
}
