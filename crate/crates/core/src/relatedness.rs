//! Topic distances between scenes and inlier-based scene relatedness.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::alignment::{compose_a_to_b, transform_topic, SceneTransform};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math::{percentile, scaled_kl};
use crate::topic_model::{DirichletPrior, TopicMatrix};

/// A trained scene: its normalization and its local topic model.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneModel {
    pub scene_id: String,
    pub normalization: SceneTransform,
    pub topics: TopicMatrix,
    pub alpha: DirichletPrior,
}

/// Symmetric scaled KL between topic `a` and topic `b`, each also given in
/// the other's frame: `½[KL(a→b ‖ b) + KL(b→a ‖ a)]`.
pub fn topic_distance_symkl(a_in_b: &[f64], b: &[f64], b_in_a: &[f64], a: &[f64]) -> f64 {
    0.5 * (scaled_kl(a_in_b, b) + scaled_kl(b_in_a, a))
}

/// All `K_a × K_b` topic distances between two scenes. Topics that project
/// completely outside the other scene's grid are infinitely far from
/// everything.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTable {
    pub ka: usize,
    pub kb: usize,
    values: Vec<f64>,
}

impl DistanceTable {
    pub fn from_values(ka: usize, kb: usize, values: Vec<f64>) -> Result<Self> {
        if ka == 0 || kb == 0 {
            return Err(Error::domain("empty topic set"));
        }
        if values.len() != ka * kb {
            return Err(Error::domain("distance table has the wrong size"));
        }
        Ok(Self { ka, kb, values })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.kb + j]
    }

    pub fn transpose(&self) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for j in 0..self.kb {
            for i in 0..self.ka {
                values.push(self.get(i, j));
            }
        }
        Self {
            ka: self.kb,
            kb: self.ka,
            values,
        }
    }

    /// For each topic of `a`, the distance to its closest topic of `b`.
    pub fn row_minima(&self) -> Vec<f64> {
        (0..self.ka)
            .map(|i| {
                (0..self.kb)
                    .map(|j| self.get(i, j))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    /// For each topic of `b`, the distance to its closest topic of `a`.
    pub fn col_minima(&self) -> Vec<f64> {
        (0..self.kb)
            .map(|j| {
                (0..self.ka)
                    .map(|i| self.get(i, j))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    /// Both directions' per-topic minima, `K_a + K_b` values.
    pub fn minima(&self) -> Vec<f64> {
        let mut m = self.row_minima();
        m.extend(self.col_minima());
        m
    }
}

fn project_all(topics: &TopicMatrix, t: &SceneTransform) -> Result<Vec<Option<Vec<f64>>>> {
    topics
        .topics()
        .map(|beta| match transform_topic(beta, topics.grid(), t) {
            Ok(p) => Ok(Some(p)),
            Err(Error::EmptyProjection) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

/// Distance table between the topics of `a` (rows) and `b` (columns).
pub fn distance_table(a: &SceneModel, b: &SceneModel) -> Result<DistanceTable> {
    if a.topics.grid() != b.topics.grid() {
        return Err(Error::domain("scenes use different grids"));
    }
    let a_in_b = project_all(
        &a.topics,
        &compose_a_to_b(&a.normalization, &b.normalization)?,
    )?;
    let b_in_a = project_all(
        &b.topics,
        &compose_a_to_b(&b.normalization, &a.normalization)?,
    )?;
    let (ka, kb) = (a.topics.num_topics(), b.topics.num_topics());
    let mut values = vec![f64::INFINITY; ka * kb];
    for i in 0..ka {
        for j in 0..kb {
            if let (Some(ab), Some(ba)) = (&a_in_b[i], &b_in_a[j]) {
                values[i * kb + j] =
                    topic_distance_symkl(ab, b.topics.topic(j), ba, a.topics.topic(i));
            }
        }
    }
    DistanceTable::from_values(ka, kb, values)
}

/// Topics of either scene whose nearest counterpart is closer than `tau`.
pub fn count_inliers(table: &DistanceTable, tau: f64) -> Result<usize> {
    if !(tau > 0.0) {
        return Err(Error::domain("tau must be positive"));
    }
    Ok(table.minima().iter().filter(|&&d| d < tau).count())
}

/// Fraction of inlier topics, `inliers / (K_a + K_b)`.
pub fn relatedness_from_table(table: &DistanceTable, tau: f64) -> Result<f64> {
    Ok(count_inliers(table, tau)? as f64 / (table.ka + table.kb) as f64)
}

pub fn scene_relatedness(a: &SceneModel, b: &SceneModel, tau: f64) -> Result<f64> {
    relatedness_from_table(&distance_table(a, b)?, tau)
}

/// How the inlier threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauPolicy {
    Fixed(f64),
    /// Percentile (0–100) of all cross-scene per-topic minimum distances.
    Percentile(f64),
}

impl Default for TauPolicy {
    fn default() -> Self {
        TauPolicy::Percentile(25.0)
    }
}

impl TauPolicy {
    pub fn resolve<'a>(&self, tables: impl IntoIterator<Item = &'a DistanceTable>) -> Result<f64> {
        let tau = match *self {
            TauPolicy::Fixed(t) => t,
            TauPolicy::Percentile(p) => {
                let minima: Vec<f64> = tables
                    .into_iter()
                    .flat_map(|t| t.minima())
                    .filter(|d| d.is_finite())
                    .collect();
                if minima.is_empty() {
                    return Err(Error::domain(
                        "no finite topic distances to derive tau from",
                    ));
                }
                percentile(&minima, p)?
            }
        };
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::domain(alloc::format!(
                "tau must be positive and finite, got {tau}"
            )));
        }
        Ok(tau)
    }
}

/// Symmetric scene-relatedness matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    scene_ids: Vec<String>,
    values: Matrix,
}

impl AffinityMatrix {
    pub fn new(scene_ids: Vec<String>, values: Matrix) -> Result<Self> {
        let n = scene_ids.len();
        if values.rows() != n || values.cols() != n {
            return Err(Error::domain("affinity shape does not match scene list"));
        }
        if values.asymmetry() > 1e-12 {
            return Err(Error::domain("affinity is not symmetric"));
        }
        if values.as_slice().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::domain("affinity entries must lie in [0, 1]"));
        }
        Ok(Self { scene_ids, values })
    }

    pub fn scene_ids(&self) -> &[String] {
        &self.scene_ids
    }

    pub fn len(&self) -> usize {
        self.scene_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scene_ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn matrix(&self) -> &Matrix {
        &self.values
    }

    pub fn index_of(&self, scene_id: &str) -> Option<usize> {
        self.scene_ids.iter().position(|s| s == scene_id)
    }

    /// Restriction to a subset of scenes, in the given order.
    pub fn subset(&self, idx: &[usize]) -> AffinityMatrix {
        AffinityMatrix {
            scene_ids: idx.iter().map(|&i| self.scene_ids[i].clone()).collect(),
            values: self.values.principal_submatrix(idx),
        }
    }
}

/// Index pairs `(i, j)`, `i < j`, in row-major upper-triangle order.
pub fn upper_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect()
}

/// Assembles the affinity matrix from upper-triangle tables (ordered as
/// [`upper_pairs`]). Returns the matrix and the resolved `tau`.
pub fn affinity_from_tables(
    scene_ids: Vec<String>,
    tables: &[DistanceTable],
    policy: TauPolicy,
) -> Result<(AffinityMatrix, f64)> {
    let n = scene_ids.len();
    let pairs = upper_pairs(n);
    if tables.len() != pairs.len() {
        return Err(Error::domain(
            "one distance table per scene pair is required",
        ));
    }
    let tau = policy.resolve(tables)?;
    let mut m = Matrix::identity(n);
    for (&(i, j), table) in pairs.iter().zip(tables) {
        let r = relatedness_from_table(table, tau)?;
        m[(i, j)] = r;
        m[(j, i)] = r;
    }
    Ok((AffinityMatrix::new(scene_ids, m)?, tau))
}

/// Pairwise relatedness of all scenes.
pub fn build_affinity(scenes: &[SceneModel], policy: TauPolicy) -> Result<(AffinityMatrix, f64)> {
    if scenes.len() < 2 {
        return Err(Error::domain("affinity needs at least two scenes"));
    }
    let tables = upper_pairs(scenes.len())
        .into_iter()
        .map(|(i, j)| distance_table(&scenes[i], &scenes[j]))
        .collect::<Result<Vec<_>>>()?;
    let ids = scenes.iter().map(|s| s.scene_id.clone()).collect();
    affinity_from_tables(ids, &tables, policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::GridSpec;
    use alloc::string::ToString;

    fn model(id: &str, grid: GridSpec, rows: Vec<Vec<f64>>, norm: SceneTransform) -> SceneModel {
        let k = rows.len();
        SceneModel {
            scene_id: id.to_string(),
            normalization: norm,
            topics: TopicMatrix::from_unnormalized(grid, rows).unwrap(),
            alpha: DirichletPrior::symmetric(k, 1.0).unwrap(),
        }
    }

    fn one_hot(grid: &GridSpec, cells: &[(usize, usize, usize)]) -> Vec<f64> {
        let mut v = vec![0.0; grid.vocab_size()];
        for &(x, y, d) in cells {
            v[grid.word_index(x, y, d).unwrap()] = 1.0;
        }
        v
    }

    #[test]
    fn symkl_hand_value() {
        let p = [0.5, 0.5];
        let q = [0.25, 0.75];
        let kl_pq = 0.5 * libm::log(0.5 / 0.25) + 0.5 * libm::log(0.5 / 0.75);
        let kl_qp = 0.25 * libm::log(0.25 / 0.5) + 0.75 * libm::log(0.75 / 0.5);
        let expected = 0.5 * (kl_pq / 2.0 + kl_qp / 2.0);
        let got = topic_distance_symkl(&p, &q, &q, &p);
        assert!((got - expected).abs() < 1e-15);
        assert_eq!(topic_distance_symkl(&q, &p, &p, &q), got);
        assert_eq!(topic_distance_symkl(&p, &p, &p, &p), 0.0);
    }

    #[test]
    fn inliers_on_hand_table() {
        // Row 0 matches col 1; everything else is far.
        let t = DistanceTable::from_values(2, 2, vec![5.0, 0.1, 4.0, 3.0]).unwrap();
        // Brute force: row minima [0.1, 3.0], col minima [4.0, 0.1].
        let brute = (0..2)
            .filter(|&i| (0..2).map(|j| t.get(i, j)).fold(f64::INFINITY, f64::min) < 1.0)
            .count()
            + (0..2)
                .filter(|&j| (0..2).map(|i| t.get(i, j)).fold(f64::INFINITY, f64::min) < 1.0)
                .count();
        assert_eq!(brute, 2);
        assert_eq!(count_inliers(&t, 1.0).unwrap(), 2);
        assert_eq!(count_inliers(&t, 1e-300).unwrap(), 0);
        assert!(count_inliers(&t, 0.0).is_err());
        assert!(DistanceTable::from_values(0, 2, vec![]).is_err());
    }

    #[test]
    fn self_relatedness_is_one() {
        let g = GridSpec::new(6, 6, 4, 5).unwrap();
        let a = model(
            "a",
            g,
            vec![
                one_hot(&g, &[(1, 1, 0), (2, 1, 0), (3, 1, 0)]),
                one_hot(&g, &[(4, 1, 1), (4, 2, 1), (4, 3, 1)]),
            ],
            SceneTransform::new(0.4, 0.0, -1.0, -1.0).unwrap(),
        );
        assert_eq!(scene_relatedness(&a, &a, 1e-9).unwrap(), 1.0);
        let single = model(
            "s",
            g,
            vec![one_hot(&g, &[(1, 1, 0), (2, 2, 0)])],
            SceneTransform::identity(),
        );
        let table = distance_table(&single, &single).unwrap();
        assert_eq!(count_inliers(&table, 1e-9).unwrap(), 2);
    }

    #[test]
    fn planted_half_shared() {
        let g = GridSpec::new(8, 8, 4, 5).unwrap();
        let shared = vec![
            one_hot(&g, &[(1, 1, 0), (2, 1, 0), (3, 1, 0)]),
            one_hot(&g, &[(5, 2, 1), (5, 3, 1)]),
        ];
        let mut a_rows = shared.clone();
        a_rows.push(one_hot(&g, &[(1, 6, 2), (2, 6, 2)]));
        a_rows.push(one_hot(&g, &[(6, 6, 3), (6, 5, 3)]));
        let mut b_rows = shared;
        b_rows.push(one_hot(&g, &[(3, 4, 0), (4, 4, 0)]));
        b_rows.push(one_hot(&g, &[(0, 3, 1), (0, 4, 1)]));
        let a = model("a", g, a_rows, SceneTransform::identity());
        let b = model("b", g, b_rows, SceneTransform::identity());
        let table = distance_table(&a, &b).unwrap();
        // Oracle: every non-shared pair has disjoint support, so its distance is
        // far above that of identical topics (0 up to rounding).
        for i in 0..4 {
            for j in 0..4 {
                let expected_zero = i == j && i < 2;
                assert_eq!(table.get(i, j) < 1e-12, expected_zero, "({i},{j})");
                if !expected_zero {
                    assert!(table.get(i, j) > 1e-3);
                }
            }
        }
        let r = relatedness_from_table(&table, 1e-4).unwrap();
        assert!((r - 0.5).abs() < 1e-12);
        // Monotone in tau.
        let mut prev = 0.0;
        for tau in [1e-6, 1e-4, 1e-2, 1.0, 10.0] {
            let r = relatedness_from_table(&table, tau).unwrap();
            assert!(r >= prev);
            prev = r;
        }
    }

    #[test]
    fn affinity_of_identical_scenes() {
        let g = GridSpec::new(5, 5, 2, 5).unwrap();
        let rows = vec![
            one_hot(&g, &[(0, 0, 0), (1, 0, 0)]),
            one_hot(&g, &[(3, 3, 1), (3, 4, 1)]),
        ];
        let a = model("a", g, rows.clone(), SceneTransform::identity());
        let b = model("b", g, rows, SceneTransform::identity());
        let (aff, tau) = build_affinity(&[a.clone(), b], TauPolicy::Fixed(1e-6)).unwrap();
        assert_eq!(tau, 1e-6);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(aff.get(i, j), 1.0);
            }
        }
        assert!(build_affinity(&[a], TauPolicy::default()).is_err());
    }

    #[test]
    fn out_of_frame_topics_are_never_inliers() {
        let g = GridSpec::new(6, 6, 2, 5).unwrap();
        let a = model(
            "a",
            g,
            vec![one_hot(&g, &[(0, 0, 0), (1, 0, 0)])],
            SceneTransform::identity(),
        );
        let b = model(
            "b",
            g,
            vec![one_hot(&g, &[(0, 0, 0), (1, 0, 0)])],
            SceneTransform::new(1.0, 0.0, 50.0, 0.0).unwrap(),
        );
        let table = distance_table(&a, &b).unwrap();
        assert!(table.get(0, 0).is_infinite());
        assert_eq!(count_inliers(&table, 1e9).unwrap(), 0);
    }

    #[test]
    fn percentile_tau_uses_ordered_pair_minima() {
        let t = DistanceTable::from_values(2, 1, vec![1.0, 3.0]).unwrap();
        // minima: rows [1, 3], col [1] -> sorted [1, 1, 3]; 50th percentile = 1.
        assert_eq!(TauPolicy::Percentile(50.0).resolve([&t]).unwrap(), 1.0);
        assert_eq!(TauPolicy::Percentile(100.0).resolve([&t]).unwrap(), 3.0);
        assert!(TauPolicy::Fixed(-1.0).resolve([&t]).is_err());
    }
}
