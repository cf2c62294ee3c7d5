//! Gated rectangular linear assignment.
//!
//! Only entries with `cost <= gate` may be matched. Among such matchings the
//! solver maximises `Σ (gate - cost)`, i.e. every admissible match is worth
//! taking unless it blocks cheaper ones. This is the same objective as padding
//! the matrix with `gate / 2` dummy rows and columns.

/// Output of [`solve_assignment`]. Pairs are `(row, col)` sorted by row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl Assignment {
    /// Sum of matched costs, accumulated in row order.
    pub fn total_cost(&self, cost: &[Vec<f64>]) -> f64 {
        self.pairs.iter().map(|&(r, c)| cost[r][c]).sum()
    }
}

/// Solves the gated assignment for a row-major `rows × cols` cost matrix.
/// `cols` is explicit so an empty row set still reports every column unmatched.
pub fn solve_assignment(cost: &[Vec<f64>], cols: usize, gate: f64) -> Assignment {
    let rows = cost.len();
    debug_assert!(cost.iter().all(|r| r.len() == cols));
    if rows == 0 || cols == 0 {
        return Assignment {
            pairs: Vec::new(),
            unmatched_rows: (0..rows).collect(),
            unmatched_cols: (0..cols).collect(),
        };
    }

    // Square (rows+cols) matrix: real block top-left, dummy-dummy block zero,
    // everything else gate/2. Inadmissible entries are lifted above the cost
    // of routing both ends through dummies.
    let n = rows + cols;
    let half = gate / 2.0;
    let blocked = gate + 1.0;
    let mut square = vec![vec![half; n]; n];
    for (i, row) in cost.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            square[i][j] = if c <= gate { c } else { blocked };
        }
    }
    for row in square.iter_mut().skip(rows) {
        for v in row.iter_mut().skip(cols) {
            *v = 0.0;
        }
    }

    let col_of_row = hungarian(&square);
    let mut pairs = Vec::new();
    let mut row_used = vec![false; rows];
    let mut col_used = vec![false; cols];
    for (r, &c) in col_of_row.iter().enumerate().take(rows) {
        if c < cols && cost[r][c] <= gate {
            pairs.push((r, c));
            row_used[r] = true;
            col_used[c] = true;
        }
    }
    Assignment {
        pairs,
        unmatched_rows: (0..rows).filter(|&r| !row_used[r]).collect(),
        unmatched_cols: (0..cols).filter(|&c| !col_used[c]).collect(),
    }
}

/// Shortest augmenting path Hungarian method on a square matrix.
/// Returns the column assigned to each row.
fn hungarian(a: &[Vec<f64>]) -> Vec<usize> {
    let n = a.len();
    // 1-based potentials and matching as in the classic formulation; index 0 is the virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = a[i0 - 1][j - 1] - u[i0] - v[j];
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
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of_row = vec![0usize; n];
    for j in 1..=n {
        if row_of_col[j] > 0 {
            col_of_row[row_of_col[j] - 1] = j - 1;
        }
    }
    col_of_row
}
