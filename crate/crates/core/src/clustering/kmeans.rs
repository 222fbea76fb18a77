use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math::squared_distance;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squared distances.
    pub inertia: f64,
}

fn plus_plus_init<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random_range(0.0..total);
            let mut pick = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        centroids.push(points[next].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>], labels: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (p, l) in points.iter().zip(labels.iter_mut()) {
        let (best, dist) = centroids
            .iter()
            .enumerate()
            .map(|(c, cen)| (c, squared_distance(p, cen)))
            .fold(
                (0, f64::INFINITY),
                |b, cur| if cur.1 < b.1 { cur } else { b },
            );
        *l = best;
        inertia += dist;
    }
    inertia
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iters: usize) -> KMeansResult {
    let dim = points[0].len();
    let k = centroids.len();
    let mut labels = vec![0; points.len()];
    let mut inertia = assign(points, &centroids, &mut labels);
    for _ in 0..max_iters {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Reseed an empty cluster at the point farthest from its centroid.
                let far = (0..points.len())
                    .map(|i| (i, squared_distance(&points[i], &centroids[labels[i]])))
                    .fold((0, -1.0), |b, cur| if cur.1 > b.1 { cur } else { b })
                    .0;
                centroids[c] = points[far].clone();
            } else {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let prev = labels.clone();
        inertia = assign(points, &centroids, &mut labels);
        if labels == prev {
            break;
        }
    }
    KMeansResult {
        labels,
        centroids,
        inertia,
    }
}

/// k-means++ seeded Lloyd iterations, best of `restarts` by inertia (earliest
/// restart wins ties).
pub fn kmeans<R: Rng + ?Sized>(
    points: &[Vec<f64>],
    k: usize,
    restarts: usize,
    rng: &mut R,
) -> Result<KMeansResult> {
    if k == 0 || k > points.len() {
        return Err(Error::domain(alloc::format!(
            "cannot form {k} clusters from {} points",
            points.len()
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::domain("points have different dimensions"));
    }
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts.max(1) {
        let run = lloyd(points, plus_plus_init(points, k, rng), 300);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separates_two_blobs() {
        let pts: Vec<Vec<f64>> = [
            [0.0, 0.0],
            [0.1, 0.0],
            [0.0, 0.1],
            [5.0, 5.0],
            [5.1, 5.0],
            [5.0, 5.1],
        ]
        .iter()
        .map(|p| p.to_vec())
        .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = kmeans(&pts, 2, 5, &mut rng).unwrap();
        assert_eq!(r.labels[0], r.labels[1]);
        assert_eq!(r.labels[0], r.labels[2]);
        assert_eq!(r.labels[3], r.labels[4]);
        assert_ne!(r.labels[0], r.labels[3]);
        assert!(r.inertia < 0.1);
        assert!(kmeans(&pts, 7, 1, &mut rng).is_err());
    }

    #[test]
    fn k_equals_n_is_exact() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 3.0]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = kmeans(&pts, 5, 10, &mut rng).unwrap();
        assert_eq!(r.inertia, 0.0);
    }
}
