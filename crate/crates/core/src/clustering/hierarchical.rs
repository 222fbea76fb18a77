//! Average-linkage agglomerative clustering of topics.

use alloc::vec;
use alloc::vec::Vec;

use super::canonical_labels;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math::scaled_kl;

/// Pairwise symmetric scaled KL between distributions that already share a
/// frame.
pub fn symmetric_kl_matrix(topics: &[Vec<f64>]) -> Matrix {
    let n = topics.len();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d = 0.5 * (scaled_kl(&topics[i], &topics[j]) + scaled_kl(&topics[j], &topics[i]));
            m[(i, j)] = d;
            m[(j, i)] = d;
        }
    }
    m
}

/// Merges the closest pair of clusters until `k` remain. Ties go to the
/// lexicographically smallest pair of cluster slots, where a merged cluster
/// keeps the smaller slot.
pub fn average_linkage(dist: &Matrix, k: usize) -> Result<Vec<usize>> {
    let n = dist.rows();
    if k == 0 {
        return Err(Error::domain("need at least one cluster"));
    }
    if k > n {
        return Err(Error::domain(alloc::format!(
            "cannot form {k} clusters from {n} items"
        )));
    }
    let mut d = dist.clone();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut owner: Vec<usize> = (0..n).collect();
    let mut remaining = n;
    while remaining > k {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if active[j] && d[(i, j)] < best.2 {
                    best = (i, j, d[(i, j)]);
                }
            }
        }
        let (a, b, _) = best;
        if a == usize::MAX {
            // Only infinite distances remain; merge the first two active slots.
            let mut it = (0..n).filter(|&i| active[i]);
            let a = it.next().unwrap();
            let b = it.next().unwrap();
            merge(&mut d, &mut size, &mut active, &mut owner, a, b);
        } else {
            merge(&mut d, &mut size, &mut active, &mut owner, a, b);
        }
        remaining -= 1;
    }
    Ok(canonical_labels(&owner))
}

fn merge(
    d: &mut Matrix,
    size: &mut [usize],
    active: &mut [bool],
    owner: &mut [usize],
    a: usize,
    b: usize,
) {
    let n = size.len();
    let (na, nb) = (size[a] as f64, size[b] as f64);
    for o in 0..n {
        if active[o] && o != a && o != b {
            let v = (na * d[(a, o)] + nb * d[(b, o)]) / (na + nb);
            d[(a, o)] = v;
            d[(o, a)] = v;
        }
    }
    size[a] += size[b];
    active[b] = false;
    for w in owner.iter_mut() {
        if *w == b {
            *w = a;
        }
    }
}

/// Groups topics already projected into a common frame into `k_stb` clusters.
pub fn hierarchical_cluster_topics(topics: &[Vec<f64>], k_stb: usize) -> Result<Vec<usize>> {
    average_linkage(&symmetric_kl_matrix(topics), k_stb)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist_1d(xs: &[f64]) -> Matrix {
        Matrix::from_fn(xs.len(), xs.len(), |i, j| (xs[i] - xs[j]).abs())
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let l = average_linkage(&dist_1d(&[0.0, 1.0, 5.0]), 3).unwrap();
        assert_eq!(l, vec![0, 1, 2]);
        assert!(average_linkage(&dist_1d(&[0.0]), 0).is_err());
        assert!(average_linkage(&dist_1d(&[0.0]), 2).is_err());
    }

    #[test]
    fn average_linkage_hand_example() {
        // 0,1 merge (d=1); then {0,1} to 4: avg(4,3)=3.5 vs 4 to 10: 6 → {0,1,4}.
        let l = average_linkage(&dist_1d(&[0.0, 1.0, 4.0, 10.0]), 2).unwrap();
        assert_eq!(l, vec![0, 0, 0, 1]);
    }

    #[test]
    fn planted_duplicate_topics() {
        let a = vec![0.7, 0.1, 0.1, 0.1];
        let a2 = vec![0.69, 0.11, 0.1, 0.1];
        let b = vec![0.1, 0.1, 0.1, 0.7];
        let b2 = vec![0.1, 0.1, 0.11, 0.69];
        let l = hierarchical_cluster_topics(&[a.clone(), b.clone(), a2.clone(), b2.clone()], 2)
            .unwrap();
        assert_eq!(l, vec![0, 1, 0, 1]);
    }

    fn same_partition(a: &[usize], b: &[usize]) -> bool {
        (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..n {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn permutation_invariant_without_ties() {
        let xs = [0.0, 0.3, 1.7, 4.1, 4.9];
        for k in 1..=5 {
            let base = average_linkage(&dist_1d(&xs), k).unwrap();
            for perm in permutations(5) {
                let permuted: Vec<f64> = perm.iter().map(|&i| xs[i]).collect();
                let l = average_linkage(&dist_1d(&permuted), k).unwrap();
                // Map back to original order.
                let mut back = vec![0; 5];
                for (pos, &orig) in perm.iter().enumerate() {
                    back[orig] = l[pos];
                }
                assert!(same_partition(&base, &back), "k={k} perm={perm:?}");
            }
        }
    }
}
