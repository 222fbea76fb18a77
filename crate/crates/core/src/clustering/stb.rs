//! Shared topic bases: the merged, aligned activity set of a scene cluster.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::hierarchical::hierarchical_cluster_topics;
use crate::alignment::{compose_a_to_b, transform_topic, transform_topics_lenient, SceneTransform};
use crate::error::{Error, Result};
use crate::relatedness::{distance_table, relatedness_from_table, AffinityMatrix, SceneModel};
use crate::topic_model::{DirichletPrior, TopicMatrix};

/// Scene with the lowest total distance `Σ (1 - relatedness)` to the other
/// members; ties go to the smallest scene id.
pub fn select_reference_scene(members: &[&str], aff: &AffinityMatrix) -> Result<String> {
    if members.is_empty() {
        return Err(Error::domain("empty cluster"));
    }
    let idx = members
        .iter()
        .map(|m| {
            aff.index_of(m)
                .ok_or_else(|| Error::domain(alloc::format!("scene {m} not in affinity matrix")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(f64, &str)> = None;
    for (p, &i) in idx.iter().enumerate() {
        let total: f64 = idx
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| 1.0 - aff.get(i, j))
            .sum();
        let better = match best {
            None => true,
            Some((bt, bid)) => {
                total < bt - 1e-12 || ((total - bt).abs() <= 1e-12 && members[p] < bid)
            }
        };
        if better {
            best = Some((total, members[p]));
        }
    }
    Ok(best.expect("non-empty").1.to_string())
}

/// Default STB size `coeff · N_s`, capped at the number of local topics.
pub fn default_stb_size(coeff: usize, num_scenes: usize, total_local_topics: usize) -> usize {
    (coeff * num_scenes).clamp(1, total_local_topics.max(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharedTopicBasis {
    pub cluster_id: usize,
    pub reference_scene: String,
    /// Normalization of the reference scene; STB topics live in its cells.
    pub reference_normalization: SceneTransform,
    pub topics: TopicMatrix,
    /// For each STB topic, the contributing `(scene, local topic)` pairs.
    pub provenance: Vec<Vec<(String, usize)>>,
    /// `T^{s→ref}` for every member scene, in member order.
    pub transforms: Vec<(String, SceneTransform)>,
}

impl SharedTopicBasis {
    pub fn num_topics(&self) -> usize {
        self.topics.num_topics()
    }

    /// Symmetric unit prior for STB profiling.
    pub fn alpha(&self) -> DirichletPrior {
        DirichletPrior::symmetric(self.num_topics(), 1.0).expect("STB has topics")
    }

    pub fn member_ids(&self) -> impl Iterator<Item = &str> {
        self.transforms.iter().map(|(s, _)| s.as_str())
    }

    /// STB topics warped into a member scene's cells, for fixed-topic
    /// profiling of that scene's clips.
    pub fn topics_in_scene(&self, scene_normalization: &SceneTransform) -> Result<TopicMatrix> {
        let t = compose_a_to_b(&self.reference_normalization, scene_normalization)?;
        transform_topics_lenient(&self.topics, &t)
    }

    /// The STB viewed as a pseudo-scene in reference coordinates.
    pub fn as_scene_model(&self) -> SceneModel {
        SceneModel {
            scene_id: self.reference_scene.clone(),
            normalization: self.reference_normalization,
            topics: self.topics.clone(),
            alpha: self.alpha(),
        }
    }
}

/// Projects every member's local topics into the reference scene, groups
/// them into `k_stb` activity clusters and averages each group.
pub fn build_stb(
    cluster_id: usize,
    members: &[&SceneModel],
    reference_scene: &str,
    k_stb: usize,
) -> Result<SharedTopicBasis> {
    let reference = members
        .iter()
        .find(|m| m.scene_id == reference_scene)
        .ok_or_else(|| {
            Error::domain(alloc::format!(
                "reference scene {reference_scene} is not a member"
            ))
        })?;
    let grid = *reference.topics.grid();
    let ref_norm = reference.normalization;

    let mut projected = Vec::new();
    let mut origin = Vec::new();
    let mut transforms = Vec::with_capacity(members.len());
    for m in members {
        if m.topics.grid() != &grid {
            return Err(Error::domain(alloc::format!(
                "scene {} uses a different grid",
                m.scene_id
            )));
        }
        let t = compose_a_to_b(&m.normalization, &ref_norm)?;
        transforms.push((m.scene_id.clone(), t));
        for (k, beta) in m.topics.topics().enumerate() {
            let p = transform_topic(beta, &grid, &t).map_err(|e| match e {
                Error::EmptyProjection => Error::TopicProjection {
                    scene: m.scene_id.clone(),
                    topic: k,
                },
                other => other,
            })?;
            projected.push(p);
            origin.push((m.scene_id.clone(), k));
        }
    }
    if k_stb == 0 || k_stb > projected.len() {
        return Err(Error::domain(alloc::format!(
            "STB size {k_stb} must lie in 1..={}",
            projected.len()
        )));
    }

    let labels = hierarchical_cluster_topics(&projected, k_stb)?;
    let nv = grid.vocab_size();
    let mut sums = vec![vec![0.0; nv]; k_stb];
    let mut provenance = vec![Vec::new(); k_stb];
    for ((p, o), &l) in projected.iter().zip(origin).zip(&labels) {
        for (s, v) in sums[l].iter_mut().zip(p) {
            *s += v;
        }
        provenance[l].push(o);
    }
    for (s, prov) in sums.iter_mut().zip(&provenance) {
        let n = prov.len() as f64;
        s.iter_mut().for_each(|v| *v /= n);
    }
    Ok(SharedTopicBasis {
        cluster_id,
        reference_scene: reference_scene.to_string(),
        reference_normalization: ref_norm,
        topics: TopicMatrix::from_unnormalized(grid, sums)?,
        provenance,
        transforms,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    /// Index into the STB list of the most related cluster.
    pub best: usize,
    /// `1 - relatedness` to every STB.
    pub distances: Vec<f64>,
}

/// Assigns a new scene to the cluster whose STB its local topics relate to
/// most; ties go to the earlier STB.
pub fn associate_new_scene(
    scene: &SceneModel,
    stbs: &[SharedTopicBasis],
    tau: f64,
) -> Result<Association> {
    if stbs.is_empty() {
        return Err(Error::domain("no clusters to associate with"));
    }
    let distances = stbs
        .iter()
        .map(|stb| {
            let table = distance_table(scene, &stb.as_scene_model())?;
            Ok(1.0 - relatedness_from_table(&table, tau)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let best = distances
        .iter()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |b, (i, &d)| if d < b.1 { (i, d) } else { b },
        )
        .0;
    Ok(Association { best, distances })
}
