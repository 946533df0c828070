//! Bipartite matching: minimum-cost assignment (Hungarian method with
//! potentials) and maximum-cardinality matching on a threshold graph.

/// Minimum-cost perfect assignment for a square cost matrix.
///
/// Returns `col_of_row` and the total cost. Ties resolve toward lower column
/// indices because columns are scanned in increasing order.
pub fn hungarian(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    assert!(cost.iter().all(|r| r.len() == n), "cost matrix must be square");
    // 1-based arrays; index 0 is the virtual start column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
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
        col_of_row[row_of_col[j] - 1] = j - 1;
    }
    let total = col_of_row.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    (col_of_row, total)
}

/// Perfect matching of `n` left to `n` right vertices where `edge(i, j)` says
/// whether the pair may be matched. Kuhn's augmenting paths; `None` if no
/// perfect matching exists.
pub fn perfect_matching(n: usize, edge: impl Fn(usize, usize) -> bool) -> Option<Vec<usize>> {
    let adj: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| edge(i, j)).collect()).collect();
    let mut right_of_left = vec![usize::MAX; n];
    let mut left_of_right = vec![usize::MAX; n];

    fn augment(i: usize, adj: &[Vec<usize>], seen: &mut [bool], lr: &mut [usize], rl: &mut [usize]) -> bool {
        for &j in &adj[i] {
            if seen[j] {
                continue;
            }
            seen[j] = true;
            if rl[j] == usize::MAX || augment(rl[j], adj, seen, lr, rl) {
                lr[i] = j;
                rl[j] = i;
                return true;
            }
        }
        false
    }

    for i in 0..n {
        if adj[i].is_empty() {
            return None;
        }
        let mut seen = vec![false; n];
        if !augment(i, &adj, &mut seen, &mut right_of_left, &mut left_of_right) {
            return None;
        }
    }
    Some(right_of_left)
}
