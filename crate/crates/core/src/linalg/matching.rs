//! Pairing two eigenvalue lists for error measurement.

use num_complex::Complex64;

/// Minimum-cost perfect matching on an `n × n` cost matrix (Hungarian
/// method with potentials). Returns `assign[i] = j`.
pub fn assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays as in the classic formulation; p[j] = row matched to column j
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
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
            }
            for j in 0..=n {
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
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Largest pairwise distance after an optimal (sum of distances) matching.
/// Both lists must have the same length.
pub fn matched_max_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len(), "eigenvalue lists differ in length");
    let cost: Vec<Vec<f64>> = a
        .iter()
        .map(|x| b.iter().map(|y| (x - y).norm()).collect())
        .collect();
    let assign = assignment(&cost);
    assign
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i][j])
        .fold(0.0, f64::max)
}

/// `max_k |est_k − true_k|` with both lists in descending-modulus order.
/// Within a run of true eigenvalues sharing a modulus (for example `±λ` of
/// a symmetric network) the estimates occupying the same positions are
/// paired greedily by nearest distance instead of by position.
pub fn sorted_pairing_error(truth: &[Complex64], est: &[Complex64]) -> f64 {
    assert_eq!(truth.len(), est.len(), "eigenvalue lists differ in length");
    let mut t: Vec<Complex64> = truth.to_vec();
    let mut e: Vec<Complex64> = est.to_vec();
    t.sort_by(|x, y| y.norm().total_cmp(&x.norm()));
    e.sort_by(|x, y| y.norm().total_cmp(&x.norm()));
    let scale = t.iter().map(|x| x.norm()).fold(1.0, f64::max);
    let tol = 1e-8 * scale;

    let mut worst: f64 = 0.0;
    let mut start = 0;
    while start < t.len() {
        let mut end = start + 1;
        while end < t.len() && t[end - 1].norm() - t[end].norm() <= tol {
            end += 1;
        }
        let mut free: Vec<Complex64> = e[start..end].to_vec();
        for tv in &t[start..end] {
            let (k, d) = free
                .iter()
                .enumerate()
                .map(|(k, ev)| (k, (ev - tv).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("group sizes agree");
            worst = worst.max(d);
            free.swap_remove(k);
        }
        start = end;
    }
    worst
}
