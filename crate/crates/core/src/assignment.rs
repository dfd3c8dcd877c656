//! Max-weight bipartite matching.
//!
//! `W[i][j]` is the reward for sending row `i` to column `j`; the returned
//! permutation maps each row to its column.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{ensure_finite, ensure_square, Matrix};
use crate::permutation::Permutation;

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub permutation: Permutation,
    pub objective: f64,
}

/// Which bipartite matcher rounds a weight matrix to a permutation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    #[default]
    Exact,
    Greedy,
}

impl Matcher {
    pub fn solve(self, w: &Matrix) -> Result<Assignment> {
        match self {
            Matcher::Exact => solve_lap_max(w),
            Matcher::Greedy => greedy_match(w),
        }
    }
}

fn objective_of(w: &Matrix, mapping: &[usize]) -> f64 {
    mapping.iter().enumerate().map(|(i, &j)| w[(i, j)]).sum()
}

/// Exact maximum-weight perfect matching.
///
/// Shortest augmenting paths (Hungarian, O(n³)) on the nonnegative costs
/// `c[i][j] = max_k W[i][k] − W[i][j]`. Among all optimal matchings the
/// lexicographically smallest one is returned.
pub fn solve_lap_max(w: &Matrix) -> Result<Assignment> {
    ensure_square(w, "weight matrix")?;
    ensure_finite(w, "weight matrix")?;
    let n = w.nrows();
    if n == 0 {
        return Ok(Assignment {
            permutation: Permutation::identity(0),
            objective: 0.0,
        });
    }

    let mut cost = vec![0.0; n * n];
    let mut max_cost = 0.0f64;
    let scale = w.amax();
    for i in 0..n {
        let row_max = (0..n).map(|j| w[(i, j)]).fold(f64::NEG_INFINITY, f64::max);
        for j in 0..n {
            let c = row_max - w[(i, j)];
            cost[i * n + j] = c;
            max_cost = max_cost.max(c);
        }
    }

    let (mut row_to_col, u, v) = hungarian(&cost, n);

    let tol = 1e-11 * max_cost + 64.0 * f64::EPSILON * scale;
    let tight: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j == row_to_col[i] || cost[i * n + j] - u[i] - v[j] <= tol)
                .collect()
        })
        .collect();
    lexicographic_refine(&tight, &mut row_to_col);

    let objective = objective_of(w, &row_to_col);
    Ok(Assignment {
        permutation: Permutation::new_unchecked(row_to_col),
        objective,
    })
}

/// Returns `(row_to_col, u, v)` with `u[i] + v[j] ≤ c[i][j]`, equality on
/// the matching.
///
/// One Dijkstra search per row over the columns not yet reached, preferring
/// free columns on ties; potentials are updated once per augmentation.
fn hungarian(cost: &[f64], n: usize) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    const FREE: usize = usize::MAX;
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut col4row = vec![FREE; n];
    let mut row4col = vec![FREE; n];
    let mut path = vec![FREE; n];
    let mut spc = vec![f64::INFINITY; n];
    let mut remaining: Vec<usize> = Vec::with_capacity(n);
    let mut seen_rows: Vec<usize> = Vec::with_capacity(n);
    let mut seen_cols: Vec<usize> = Vec::with_capacity(n);

    for cur in 0..n {
        remaining.clear();
        remaining.extend((0..n).rev());
        seen_rows.clear();
        seen_cols.clear();
        spc.iter_mut().for_each(|x| *x = f64::INFINITY);
        let mut min_val = 0.0;
        let mut i = cur;
        let sink = loop {
            seen_rows.push(i);
            let row = &cost[i * n..(i + 1) * n];
            let ui = u[i];
            let mut lowest = f64::INFINITY;
            let mut index = 0;
            for (it, &j) in remaining.iter().enumerate() {
                let r = min_val + row[j] - ui - v[j];
                if r < spc[j] {
                    path[j] = i;
                    spc[j] = r;
                }
                if spc[j] < lowest || (spc[j] == lowest && row4col[j] == FREE) {
                    lowest = spc[j];
                    index = it;
                }
            }
            min_val = lowest;
            let j = remaining.swap_remove(index);
            seen_cols.push(j);
            if row4col[j] == FREE {
                break j;
            }
            i = row4col[j];
        };

        u[cur] += min_val;
        for &r in &seen_rows[1..] {
            u[r] += min_val - spc[col4row[r]];
        }
        for &c in &seen_cols {
            v[c] -= min_val - spc[c];
        }

        let mut j = sink;
        loop {
            let r = path[j];
            row4col[j] = r;
            let prev = std::mem::replace(&mut col4row[r], j);
            if r == cur {
                break;
            }
            j = prev;
        }
    }
    (col4row, u, v)
}

/// Moves a perfect matching of the tight graph to the lexicographically
/// smallest one. Rows are fixed in index order; row `i` moves to a smaller
/// tight column `j` whenever an alternating cycle through the unfixed rows
/// exists.
fn lexicographic_refine(tight: &[Vec<usize>], row_to_col: &mut [usize]) {
    let n = row_to_col.len();
    let mut col_to_row = vec![0usize; n];
    for (i, &j) in row_to_col.iter().enumerate() {
        col_to_row[j] = i;
    }
    let mut locked = vec![false; n];
    let mut parent = vec![usize::MAX; n];
    let mut visited = vec![false; n];
    let mut queue = Vec::with_capacity(n);

    for i in 0..n {
        let cur = row_to_col[i];
        for &j in &tight[i] {
            if j >= cur {
                break;
            }
            if locked[j] {
                continue;
            }
            // BFS over columns: from row r, step to an unlocked tight column
            visited.iter_mut().for_each(|b| *b = false);
            queue.clear();
            visited[j] = true;
            queue.push(j);
            let mut head = 0;
            let mut found = false;
            while head < queue.len() && !found {
                let c_from = queue[head];
                head += 1;
                let r = col_to_row[c_from];
                for &c in &tight[r] {
                    if locked[c] || visited[c] {
                        continue;
                    }
                    visited[c] = true;
                    parent[c] = c_from;
                    if c == cur {
                        found = true;
                        break;
                    }
                    queue.push(c);
                }
            }
            if found {
                // rows along the path each take the next column
                let mut c = cur;
                while c != j {
                    let prev = parent[c];
                    let r = col_to_row[prev];
                    row_to_col[r] = c;
                    col_to_row[c] = r;
                    c = prev;
                }
                row_to_col[i] = j;
                col_to_row[j] = i;
                break;
            }
        }
        locked[row_to_col[i]] = true;
    }
}

/// Global-largest-entry greedy matching: repeatedly take the largest
/// remaining `W[i][j]` (ties by smallest `(i, j)`), then drop row `i` and
/// column `j`.
pub fn greedy_match(w: &Matrix) -> Result<Assignment> {
    ensure_square(w, "weight matrix")?;
    ensure_finite(w, "weight matrix")?;
    let n = w.nrows();
    let mut entries: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    entries.sort_unstable_by(|&(a, b), &(c, d)| {
        w[(c, d)]
            .total_cmp(&w[(a, b)])
            .then(a.cmp(&c))
            .then(b.cmp(&d))
    });
    let mut row_to_col = vec![usize::MAX; n];
    let mut col_used = vec![false; n];
    let mut left = n;
    for (i, j) in entries {
        if left == 0 {
            break;
        }
        if row_to_col[i] == usize::MAX && !col_used[j] {
            row_to_col[i] = j;
            col_used[j] = true;
            left -= 1;
        }
    }
    let objective = objective_of(w, &row_to_col);
    Ok(Assignment {
        permutation: Permutation::new_unchecked(row_to_col),
        objective,
    })
}
