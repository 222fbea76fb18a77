//! Self-tuning spectral clustering of scenes.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::kmeans::kmeans;
use super::SceneClustering;
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::relatedness::AffinityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterMode {
    /// Choose the number of clusters by eigenvector-rotation cost.
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConfig {
    pub local_scale_neighbor: usize,
    pub kmeans_restarts: usize,
    pub seed: u64,
    /// Upper bound on `C` considered by auto mode.
    pub max_clusters: usize,
    /// Auto mode keeps the largest `C` whose cost is within this margin of
    /// the minimum.
    pub cost_margin: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            local_scale_neighbor: 7,
            kmeans_restarts: 10,
            seed: 0,
            max_clusters: 10,
            cost_margin: 1e-3,
        }
    }
}

/// `Â_ij = exp(-d_ij² / (σ_i σ_j))` with `d = 1 - relatedness`, `σ_i` the
/// distance to the `neighbor`-th nearest other scene and a zero diagonal.
pub fn local_scale_affinity(aff: &AffinityMatrix, neighbor: usize) -> Matrix {
    let n = aff.len();
    let d = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (1.0 - aff.get(i, j)).max(0.0)
        }
    });
    let rank = neighbor.min(n.saturating_sub(1)).max(1);
    let sigma: Vec<f64> = (0..n)
        .map(|i| {
            let mut others: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d[(i, j)]).collect();
            others.sort_by(f64::total_cmp);
            others.get(rank - 1).copied().unwrap_or(0.0).max(1e-6)
        })
        .collect();
    Matrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            libm::exp(-d[(i, j)] * d[(i, j)] / (sigma[i] * sigma[j]))
        }
    })
}

/// Eigenvectors of `D^{-1/2} Â D^{-1/2}`, largest eigenvalue first. Returns
/// all `n` columns; callers take the leading ones.
fn normalized_eigenvectors(a_hat: &Matrix) -> Result<Matrix> {
    let n = a_hat.rows();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let deg: f64 = a_hat.row(i).iter().sum();
            if deg > 0.0 {
                1.0 / libm::sqrt(deg)
            } else {
                0.0
            }
        })
        .collect();
    let l = Matrix::from_fn(n, n, |i, j| inv_sqrt[i] * a_hat[(i, j)] * inv_sqrt[j]);
    Ok(symmetric_eigen(&l)?.vectors)
}

fn row_normalize(rows: &mut [Vec<f64>]) {
    for r in rows.iter_mut() {
        let norm = libm::sqrt(r.iter().map(|v| v * v).sum());
        if norm > 0.0 {
            r.iter_mut().for_each(|v| *v /= norm);
        }
    }
}

/// Row-normalized leading `c` eigenvectors of the locally scaled affinity.
pub fn spectral_embedding(
    aff: &AffinityMatrix,
    c: usize,
    neighbor: usize,
) -> Result<Vec<Vec<f64>>> {
    let vectors = normalized_eigenvectors(&local_scale_affinity(aff, neighbor))?;
    let mut rows: Vec<Vec<f64>> = (0..aff.len())
        .map(|i| vectors.row(i)[..c].to_vec())
        .collect();
    row_normalize(&mut rows);
    Ok(rows)
}

fn givens_pairs(c: usize) -> Vec<(usize, usize)> {
    (0..c)
        .flat_map(|i| (i + 1..c).map(move |j| (i, j)))
        .collect()
}

fn rotate(x: &[Vec<f64>], pairs: &[(usize, usize)], angles: &[f64]) -> Vec<Vec<f64>> {
    let mut z: Vec<Vec<f64>> = x.to_vec();
    for (&(i, j), &theta) in pairs.iter().zip(angles) {
        let (s, c) = (libm::sin(theta), libm::cos(theta));
        for row in z.iter_mut() {
            let (a, b) = (row[i], row[j]);
            row[i] = c * a - s * b;
            row[j] = s * a + c * b;
        }
    }
    z
}

/// `Σ_i Σ_j Z_ij² / max_j Z_ij²`; equals `n` when every row has a single
/// non-zero entry.
fn alignment_cost(z: &[Vec<f64>]) -> f64 {
    z.iter()
        .map(|row| {
            let m = row.iter().fold(0.0f64, |m, v| m.max(v * v));
            if m > 0.0 {
                row.iter().map(|v| v * v / m).sum()
            } else {
                0.0
            }
        })
        .sum()
}

/// Finds the rotation of the eigenvector block `x` (rows are points) that
/// best aligns it with the canonical axes. Returns the minimal cost and the
/// rotated block.
pub fn rotation_cost(x: &[Vec<f64>]) -> (f64, Vec<Vec<f64>>) {
    let c = x.first().map_or(0, Vec::len);
    let pairs = givens_pairs(c);
    let mut angles = vec![0.0; pairs.len()];
    let mut cost = alignment_cost(x);
    // Coarse coordinate sweeps first: symmetric starting points such as a
    // 45° block have a zero gradient.
    for _ in 0..3 {
        let mut changed = false;
        for k in 0..angles.len() {
            let base = angles[k];
            for step in 1..16 {
                let mut trial = angles.clone();
                trial[k] = base + (step as f64 / 16.0 - 0.5) * PI / 2.0;
                let c = alignment_cost(&rotate(x, &pairs, &trial));
                if c < cost - 1e-12 {
                    cost = c;
                    angles = trial;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut step = 0.5;
    let h = 1e-6;
    for _ in 0..500 {
        let grad: Vec<f64> = (0..angles.len())
            .map(|k| {
                let mut a = angles.clone();
                a[k] += h;
                let up = alignment_cost(&rotate(x, &pairs, &a));
                a[k] -= 2.0 * h;
                let down = alignment_cost(&rotate(x, &pairs, &a));
                (up - down) / (2.0 * h)
            })
            .collect();
        let gnorm = libm::sqrt(grad.iter().map(|g| g * g).sum());
        if gnorm < 1e-10 {
            break;
        }
        let mut improved = false;
        while step > 1e-8 {
            let trial: Vec<f64> = angles
                .iter()
                .zip(&grad)
                .map(|(a, g)| a - step * g / gnorm)
                .collect();
            let trial_cost = alignment_cost(&rotate(x, &pairs, &trial));
            if trial_cost < cost {
                let gain = cost - trial_cost;
                angles = trial;
                cost = trial_cost;
                step *= 1.5;
                improved = gain > 1e-12;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (cost, rotate(x, &pairs, &angles))
}

/// Clusters scenes from their relatedness matrix.
pub fn self_tuning_spectral_cluster(
    aff: &AffinityMatrix,
    mode: ClusterMode,
    cfg: &SpectralConfig,
) -> Result<SceneClustering> {
    let n = aff.len();
    if n < 2 {
        return Err(Error::domain(
            "spectral clustering needs at least two scenes",
        ));
    }
    let a_hat = local_scale_affinity(aff, cfg.local_scale_neighbor);
    let vectors = normalized_eigenvectors(&a_hat)?;
    let leading =
        |c: usize| -> Vec<Vec<f64>> { (0..n).map(|i| vectors.row(i)[..c].to_vec()).collect() };

    let mut cost_curve = Vec::new();
    let c = match mode {
        ClusterMode::Fixed(c) => {
            if c == 0 || c > n {
                return Err(Error::domain(alloc::format!(
                    "cannot split {n} scenes into {c} clusters"
                )));
            }
            c
        }
        ClusterMode::Auto => {
            let c_max = cfg.max_clusters.min(n - 1);
            if c_max < 2 {
                // Two scenes: one cluster unless they are mostly unrelated.
                if aff.get(0, 1) >= 0.5 {
                    1
                } else {
                    2
                }
            } else {
                let mut block = leading(2);
                for c in 2..=c_max {
                    if c > 2 {
                        for (row, i) in block.iter_mut().zip(0..n) {
                            row.push(vectors[(i, c - 1)]);
                        }
                    }
                    let (j, rotated) = rotation_cost(&block);
                    let normalized = (j / n as f64 - 1.0) / c as f64;
                    log::debug!("rotation cost C={c}: {normalized:.6}");
                    cost_curve.push((c, normalized));
                    block = rotated;
                }
                let min = cost_curve.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
                cost_curve
                    .iter()
                    .rev()
                    .find(|p| p.1 <= min + cfg.cost_margin)
                    .map(|p| p.0)
                    .unwrap_or(2)
            }
        }
    };

    let labels = if c == 1 {
        vec![0; n]
    } else {
        let mut rows = leading(c);
        row_normalize(&mut rows);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        kmeans(&rows, c, cfg.kmeans_restarts, &mut rng)?.labels
    };
    let mut out = SceneClustering::new(aff.scene_ids().to_vec(), labels, mode)?;
    out.cost_curve = cost_curve;
    Ok(out)
}
