//! Normalized-cut graph partitioning.

use alloc::vec;
use alloc::vec::Vec;

use super::canonical_labels;
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};

/// `cut(A,B)/assoc(A,V) + cut(A,B)/assoc(B,V)` for the subgraph `nodes`,
/// split by `in_a`. Self loops are ignored.
pub fn ncut_value(w: &Matrix, nodes: &[usize], in_a: &[bool]) -> f64 {
    let (mut cut, mut assoc_a, mut assoc_b) = (0.0, 0.0, 0.0);
    for (p, &i) in nodes.iter().enumerate() {
        for (q, &j) in nodes.iter().enumerate() {
            if p == q {
                continue;
            }
            let v = w[(i, j)];
            if in_a[p] {
                assoc_a += v;
            } else {
                assoc_b += v;
            }
            if in_a[p] && !in_a[q] {
                cut += v;
            }
        }
    }
    let part = |assoc: f64| {
        if assoc > 0.0 {
            cut / assoc
        } else {
            f64::INFINITY
        }
    };
    part(assoc_a) + part(assoc_b)
}

/// Connected components of the subgraph `nodes` (edges are positive weights).
fn components(w: &Matrix, nodes: &[usize]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; nodes.len()];
    let mut out = Vec::new();
    for start in 0..nodes.len() {
        if seen[start] {
            continue;
        }
        let mut comp = vec![start];
        seen[start] = true;
        let mut head = 0;
        while head < comp.len() {
            let p = comp[head];
            head += 1;
            for q in 0..nodes.len() {
                if !seen[q] && q != p && w[(nodes[p], nodes[q])] > 0.0 {
                    seen[q] = true;
                    comp.push(q);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp.into_iter().map(|p| nodes[p]).collect());
    }
    out
}

/// Splits a connected subgraph by thresholding the generalized Fiedler
/// vector at the best of its `m - 1` sorted cut points.
fn split_connected(w: &Matrix, nodes: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    let m = nodes.len();
    let deg: Vec<f64> = nodes
        .iter()
        .map(|&i| nodes.iter().filter(|&&j| j != i).map(|&j| w[(i, j)]).sum())
        .collect();
    let inv_sqrt: Vec<f64> = deg.iter().map(|&d| 1.0 / libm::sqrt(d)).collect();
    let norm = Matrix::from_fn(m, m, |p, q| {
        if p == q {
            0.0
        } else {
            inv_sqrt[p] * w[(nodes[p], nodes[q])] * inv_sqrt[q]
        }
    });
    let eig = symmetric_eigen(&norm)?;
    let fiedler: Vec<f64> = (0..m).map(|p| eig.vectors[(p, 1)] * inv_sqrt[p]).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| fiedler[a].total_cmp(&fiedler[b]).then(a.cmp(&b)));
    let mut best = (f64::INFINITY, 1);
    for cut in 1..m {
        let mut in_a = vec![false; m];
        for &p in &order[..cut] {
            in_a[p] = true;
        }
        let v = ncut_value(w, nodes, &in_a);
        if v < best.0 - 1e-12 {
            best = (v, cut);
        }
    }
    let mut a: Vec<usize> = order[..best.1].iter().map(|&p| nodes[p]).collect();
    let mut b: Vec<usize> = order[best.1..].iter().map(|&p| nodes[p]).collect();
    a.sort_unstable();
    b.sort_unstable();
    if a[0] > b[0] {
        core::mem::swap(&mut a, &mut b);
    }
    Ok((a, b))
}

fn check_similarity(w: &Matrix) -> Result<()> {
    if w.rows() != w.cols() || w.asymmetry() > 1e-9 {
        return Err(Error::domain(
            "similarity matrix must be square and symmetric",
        ));
    }
    if w.as_slice().iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::domain(
            "similarities must be finite and non-negative",
        ));
    }
    Ok(())
}

/// Two-way normalized cut. A disconnected graph is split between its first
/// connected component and the rest.
pub fn fiedler_bipartition(w: &Matrix) -> Result<(Vec<usize>, Vec<usize>)> {
    check_similarity(w)?;
    if w.rows() < 2 {
        return Err(Error::domain("bipartition needs at least two nodes"));
    }
    let nodes: Vec<usize> = (0..w.rows()).collect();
    split(w, &nodes)
}

fn split(w: &Matrix, nodes: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    let comps = components(w, nodes);
    if comps.len() > 1 {
        let first = comps[0].clone();
        let rest: Vec<usize> = nodes
            .iter()
            .copied()
            .filter(|i| !first.contains(i))
            .collect();
        return Ok((first, rest));
    }
    split_connected(w, nodes)
}

/// Repeatedly bipartitions the largest remaining cluster until `k` clusters
/// exist. Returns a label per node.
pub fn recursive_ncut(w: &Matrix, k: usize) -> Result<Vec<usize>> {
    check_similarity(w)?;
    let n = w.rows();
    if k == 0 || k > n {
        return Err(Error::domain(alloc::format!(
            "cannot form {k} clusters from {n} nodes"
        )));
    }
    let mut clusters: Vec<Vec<usize>> = vec![(0..n).collect()];
    while clusters.len() < k {
        let (idx, _) =
            clusters.iter().enumerate().fold(
                (0, 0),
                |b, (i, c)| if c.len() > b.1 { (i, c.len()) } else { b },
            );
        let target = clusters.remove(idx);
        let (a, b) = split(w, &target)?;
        clusters.insert(idx, b);
        clusters.insert(idx, a);
    }
    let mut labels = vec![0; n];
    for (c, members) in clusters.iter().enumerate() {
        for &i in members {
            labels[i] = c;
        }
    }
    Ok(canonical_labels(&labels))
}
