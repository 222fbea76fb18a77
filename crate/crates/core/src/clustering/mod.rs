//! Scene clustering, activity clustering and shared topic bases.

mod hierarchical;
mod kmeans;
mod ncut;
mod spectral;
mod stb;

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub use hierarchical::{average_linkage, hierarchical_cluster_topics, symmetric_kl_matrix};
pub use kmeans::{kmeans, KMeansResult};
pub use ncut::{fiedler_bipartition, ncut_value, recursive_ncut};
pub use spectral::{
    local_scale_affinity, rotation_cost, self_tuning_spectral_cluster, spectral_embedding,
    ClusterMode, SpectralConfig,
};
pub use stb::{
    associate_new_scene, build_stb, default_stb_size, select_reference_scene, Association,
    SharedTopicBasis,
};

/// Relabels so that cluster ids appear in increasing order of first
/// occurrence (0, 1, 2, ...).
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<(usize, usize)> = Vec::new();
    labels
        .iter()
        .map(|&l| match map.iter().find(|(from, _)| *from == l) {
            Some(&(_, to)) => to,
            None => {
                let to = map.len();
                map.push((l, to));
                to
            }
        })
        .collect()
}

/// Partition of scenes into clusters with dense ids `0..C`.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneClustering {
    scene_ids: Vec<String>,
    labels: Vec<usize>,
    num_clusters: usize,
    pub mode: ClusterMode,
    /// Auto mode only: normalized rotation cost for every candidate `C`.
    pub cost_curve: Vec<(usize, f64)>,
}

impl SceneClustering {
    pub fn new(scene_ids: Vec<String>, labels: Vec<usize>, mode: ClusterMode) -> Result<Self> {
        if scene_ids.len() != labels.len() {
            return Err(Error::domain("one label per scene is required"));
        }
        let labels = canonical_labels(&labels);
        let num_clusters = labels.iter().max().map_or(0, |m| m + 1);
        Ok(Self {
            scene_ids,
            labels,
            num_clusters,
            mode,
            cost_curve: Vec::new(),
        })
    }

    pub fn scene_ids(&self) -> &[String] {
        &self.scene_ids
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn cluster_of(&self, scene_id: &str) -> Option<usize> {
        self.scene_ids
            .iter()
            .position(|s| s == scene_id)
            .map(|i| self.labels[i])
    }

    /// Scene indices of cluster `c`, in scene order.
    pub fn members(&self, c: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == c)
            .collect()
    }

    pub fn member_ids(&self, c: usize) -> Vec<&str> {
        self.members(c)
            .into_iter()
            .map(|i| self.scene_ids[i].as_str())
            .collect()
    }

    /// Every scene in one cluster.
    pub fn single(scene_ids: Vec<String>) -> Self {
        let n = scene_ids.len();
        Self {
            scene_ids,
            labels: alloc::vec![0; n],
            num_clusters: usize::from(n > 0),
            mode: ClusterMode::Fixed(1),
            cost_curve: Vec::new(),
        }
    }
}
