//! Serializable forms of the core types. Conversions back into core types
//! re-run the core validation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use scenemesh_core::clustering::ClusterMode;
use scenemesh_core::experiment::{ClassificationResult, CoverageRow, ProfiledScene};
use scenemesh_core::linalg::Matrix;
use scenemesh_core::tasks::ProfiledClip;
use scenemesh_core::{
    AffinityMatrix, BehaviorLabel, CategoryId, ClipDocument, DirichletPrior, GridSpec,
    SceneClustering, SceneCorpus, SceneModel, SceneTransform, SharedTopicBasis, TopicMatrix,
};

use crate::config::ModeSetting;

pub const KIND_WORLD: &str = "world_index";
pub const KIND_CORPUS: &str = "scene_corpus";
pub const KIND_MODEL: &str = "scene_model";
pub const KIND_AFFINITY: &str = "affinity";
pub const KIND_CLUSTERING: &str = "clustering";
pub const KIND_STBS: &str = "shared_topic_bases";
pub const KIND_PROFILES: &str = "profiles";
pub const KIND_QUERY: &str = "query_results";
pub const KIND_CLASSIFY: &str = "classification_results";
pub const KIND_COVERAGE: &str = "coverage_results";
pub const KIND_REPORT: &str = "evaluation_report";

type CoreResult<T> = scenemesh_core::Result<T>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDto {
    pub cells_x: usize,
    pub cells_y: usize,
    pub directions: usize,
    pub cell_pixels: usize,
}

impl From<&GridSpec> for GridDto {
    fn from(g: &GridSpec) -> Self {
        Self {
            cells_x: g.cells_x,
            cells_y: g.cells_y,
            directions: g.directions,
            cell_pixels: g.cell_pixels,
        }
    }
}

impl GridDto {
    pub fn to_core(self) -> CoreResult<GridSpec> {
        GridSpec::new(
            self.cells_x,
            self.cells_y,
            self.directions,
            self.cell_pixels,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformDto {
    pub scale: f64,
    pub rotation: f64,
    pub tx: f64,
    pub ty: f64,
}

impl From<&SceneTransform> for TransformDto {
    fn from(t: &SceneTransform) -> Self {
        Self {
            scale: t.scale,
            rotation: t.rotation,
            tx: t.tx,
            ty: t.ty,
        }
    }
}

impl TransformDto {
    pub fn to_core(self) -> CoreResult<SceneTransform> {
        SceneTransform::new(self.scale, self.rotation, self.tx, self.ty)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub scene_id: String,
    /// Generating cluster, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformDto>,
}

/// The scenes of a run, in processing order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldIndex {
    pub scenes: Vec<SceneEntry>,
}

impl WorldIndex {
    pub fn truth_labels(&self) -> Option<Vec<usize>> {
        self.scenes.iter().map(|s| s.cluster).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipDto {
    pub clip_id: String,
    /// Sorted `(word, count)` pairs.
    pub counts: Vec<(usize, u32)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusDto {
    pub scene_id: String,
    pub grid: GridDto,
    pub training: Vec<ClipDto>,
    pub semantic: Vec<ClipDto>,
}

impl From<&SceneCorpus> for CorpusDto {
    fn from(c: &SceneCorpus) -> Self {
        let clip = |d: &ClipDocument| ClipDto {
            clip_id: d.clip_id.clone(),
            counts: d.counts().to_vec(),
            tags: c
                .label(&d.clip_id)
                .map(|l| l.tags().iter().cloned().collect()),
        };
        Self {
            scene_id: c.scene_id.clone(),
            grid: (&c.grid).into(),
            training: c.training_clips.iter().map(clip).collect(),
            semantic: c.semantic_clips.iter().map(clip).collect(),
        }
    }
}

impl CorpusDto {
    pub fn to_core(&self) -> CoreResult<SceneCorpus> {
        let mut annotations = BTreeMap::new();
        let mut docs = |clips: &[ClipDto]| -> Vec<ClipDocument> {
            clips
                .iter()
                .map(|c| {
                    if let Some(tags) = &c.tags {
                        annotations.insert(
                            c.clip_id.clone(),
                            BehaviorLabel::from_tags(tags.iter().cloned()),
                        );
                    }
                    ClipDocument::from_counts(
                        c.clip_id.clone(),
                        self.scene_id.clone(),
                        c.counts.iter().copied(),
                    )
                })
                .collect()
        };
        let training = docs(&self.training);
        let semantic = docs(&self.semantic);
        SceneCorpus::new(
            self.scene_id.clone(),
            self.grid.to_core()?,
            training,
            semantic,
            annotations,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDto {
    pub scene_id: String,
    pub grid: GridDto,
    pub normalization: TransformDto,
    pub alpha: Vec<f64>,
    pub topics: Vec<Vec<f64>>,
    pub elbo_trace: Vec<f64>,
}

impl ModelDto {
    pub fn new(model: &SceneModel, elbo_trace: &[f64]) -> Self {
        Self {
            scene_id: model.scene_id.clone(),
            grid: model.topics.grid().into(),
            normalization: (&model.normalization).into(),
            alpha: model.alpha.alpha().to_vec(),
            topics: model.topics.to_rows(),
            elbo_trace: elbo_trace.to_vec(),
        }
    }

    pub fn to_core(&self) -> CoreResult<SceneModel> {
        let topics = TopicMatrix::new(self.grid.to_core()?, self.topics.clone())?;
        let alpha = DirichletPrior::new(self.alpha.clone())?;
        if alpha.len() != topics.num_topics() {
            return Err(scenemesh_core::Error::Domain(format!(
                "{} alpha values for {} topics",
                alpha.len(),
                topics.num_topics()
            )));
        }
        Ok(SceneModel {
            scene_id: self.scene_id.clone(),
            normalization: self.normalization.to_core()?,
            topics,
            alpha,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityDto {
    pub scene_ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub tau: f64,
}

impl AffinityDto {
    pub fn new(aff: &AffinityMatrix, tau: f64) -> Self {
        Self {
            scene_ids: aff.scene_ids().to_vec(),
            values: (0..aff.len())
                .map(|i| aff.matrix().row(i).to_vec())
                .collect(),
            tau,
        }
    }

    pub fn to_core(&self) -> CoreResult<AffinityMatrix> {
        let n = self.scene_ids.len();
        if self.values.len() != n || self.values.iter().any(|r| r.len() != n) {
            return Err(scenemesh_core::Error::Domain(format!(
                "affinity must be {n} x {n}"
            )));
        }
        let data = self.values.iter().flatten().copied().collect();
        AffinityMatrix::new(self.scene_ids.clone(), Matrix::from_row_major(n, n, data)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringDto {
    pub scene_ids: Vec<String>,
    pub labels: Vec<usize>,
    pub num_clusters: usize,
    pub mode: ModeSetting,
    pub cost_curve: Vec<(usize, f64)>,
    /// Rand index against the generating clusters, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rand_index_vs_truth: Option<f64>,
}

impl ClusteringDto {
    pub fn new(c: &SceneClustering, rand_index_vs_truth: Option<f64>) -> Self {
        Self {
            scene_ids: c.scene_ids().to_vec(),
            labels: c.labels().to_vec(),
            num_clusters: c.num_clusters(),
            mode: c.mode.into(),
            cost_curve: c.cost_curve.clone(),
            rand_index_vs_truth,
        }
    }

    pub fn to_core(&self) -> CoreResult<SceneClustering> {
        let mode: ClusterMode = self.mode.into();
        let mut c = SceneClustering::new(self.scene_ids.clone(), self.labels.clone(), mode)?;
        if c.labels() != self.labels.as_slice() || c.num_clusters() != self.num_clusters {
            return Err(scenemesh_core::Error::Domain(
                "cluster labels must be dense and in first-appearance order".into(),
            ));
        }
        c.cost_curve = self.cost_curve.clone();
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StbDto {
    pub cluster_id: usize,
    pub reference_scene: String,
    pub reference_normalization: TransformDto,
    pub grid: GridDto,
    pub topics: Vec<Vec<f64>>,
    pub provenance: Vec<Vec<(String, usize)>>,
    pub transforms: Vec<(String, TransformDto)>,
}

impl From<&SharedTopicBasis> for StbDto {
    fn from(s: &SharedTopicBasis) -> Self {
        Self {
            cluster_id: s.cluster_id,
            reference_scene: s.reference_scene.clone(),
            reference_normalization: (&s.reference_normalization).into(),
            grid: s.topics.grid().into(),
            topics: s.topics.to_rows(),
            provenance: s.provenance.clone(),
            transforms: s
                .transforms
                .iter()
                .map(|(id, t)| (id.clone(), t.into()))
                .collect(),
        }
    }
}

impl StbDto {
    pub fn to_core(&self) -> CoreResult<SharedTopicBasis> {
        let topics = TopicMatrix::new(self.grid.to_core()?, self.topics.clone())?;
        if self.provenance.len() != topics.num_topics() {
            return Err(scenemesh_core::Error::Domain(format!(
                "{} provenance sets for {} topics",
                self.provenance.len(),
                topics.num_topics()
            )));
        }
        Ok(SharedTopicBasis {
            cluster_id: self.cluster_id,
            reference_scene: self.reference_scene.clone(),
            reference_normalization: self.reference_normalization.to_core()?,
            topics,
            provenance: self.provenance.clone(),
            transforms: self
                .transforms
                .iter()
                .map(|(id, t)| Ok((id.clone(), t.to_core()?)))
                .collect::<CoreResult<_>>()?,
        })
    }
}

/// Shared bases of the scene-cluster model and the flat model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StbSetDto {
    pub scm: Vec<StbDto>,
    pub fm: StbDto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub clip_id: String,
    pub gamma: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfiledSceneDto {
    pub scene_id: String,
    pub group: usize,
    pub clips: Vec<ProfileRow>,
}

impl From<&ProfiledScene> for ProfiledSceneDto {
    fn from(s: &ProfiledScene) -> Self {
        Self {
            scene_id: s.scene_id.clone(),
            group: s.group,
            clips: s
                .clips
                .iter()
                .zip(&s.labels)
                .map(|(c, l)| ProfileRow {
                    clip_id: c.clip_id.clone(),
                    gamma: c.gamma.clone(),
                    category: l.as_ref().map(|l| l.0.clone()),
                })
                .collect(),
        }
    }
}

impl ProfiledSceneDto {
    pub fn to_core(&self) -> ProfiledScene {
        ProfiledScene {
            scene_id: self.scene_id.clone(),
            group: self.group,
            clips: self
                .clips
                .iter()
                .map(|r| {
                    ProfiledClip::new(self.scene_id.clone(), r.clip_id.clone(), r.gamma.clone())
                })
                .collect(),
            labels: self
                .clips
                .iter()
                .map(|r| r.category.clone().map(CategoryId))
                .collect(),
        }
    }
}

/// Profiles of every scene under the scene-cluster bases, the flat basis and
/// the local models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSetDto {
    pub scm: Vec<ProfiledSceneDto>,
    pub fm: Vec<ProfiledSceneDto>,
    pub local: Vec<ProfiledSceneDto>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDto {
    pub map: Vec<f64>,
    pub per_category: Vec<(String, Vec<f64>)>,
    pub excluded: Vec<String>,
}

impl From<&scenemesh_core::eval::MapCurve> for MapDto {
    fn from(c: &scenemesh_core::eval::MapCurve) -> Self {
        Self {
            map: c.map.clone(),
            per_category: c
                .per_category
                .iter()
                .map(|(k, v)| (k.0.clone(), v.clone()))
                .collect(),
            excluded: c.excluded.iter().map(|k| k.0.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryDto {
    pub t_values: Vec<usize>,
    pub scm: MapDto,
    pub fm: MapDto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneAccuracyDto {
    pub scene_id: String,
    pub chosen_k: usize,
    pub macro_average: f64,
    pub per_category: Vec<(String, f64)>,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationDto {
    pub macro_average: f64,
    pub per_scene: Vec<SceneAccuracyDto>,
}

impl From<&ClassificationResult> for ClassificationDto {
    fn from(r: &ClassificationResult) -> Self {
        Self {
            macro_average: r.macro_average,
            per_scene: r
                .per_scene
                .iter()
                .map(|s| SceneAccuracyDto {
                    scene_id: s.scene_id.clone(),
                    chosen_k: s.chosen_k,
                    macro_average: s.report.macro_average,
                    per_category: s
                        .report
                        .per_category
                        .iter()
                        .map(|(k, a)| (k.0.clone(), *a))
                        .collect(),
                    skipped: s.skipped,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyDto {
    pub scm: ClassificationDto,
    pub fm: ClassificationDto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRowDto {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<usize>,
    pub n_sum: usize,
    pub method: String,
    pub mean: f64,
    pub sd: f64,
}

impl From<&CoverageRow> for CoverageRowDto {
    fn from(r: &CoverageRow) -> Self {
        Self {
            cluster: r.cluster,
            n_sum: r.n_sum,
            method: r.method.name().into(),
            mean: r.mean,
            sd: r.sd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageDto {
    pub rows: Vec<CoverageRowDto>,
}

/// Summary of a full run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDto {
    pub num_scenes: usize,
    pub num_clusters: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rand_index_vs_truth: Option<f64>,
    pub t_values: Vec<usize>,
    pub map_scm: Vec<f64>,
    pub map_fm: Vec<f64>,
    pub accuracy_scm: f64,
    pub accuracy_fm: f64,
    /// `(n_sum, method, coverage averaged over pools)`.
    pub coverage: Vec<(usize, String, f64)>,
    /// Largest RMSE of `(s, dx, dy)` over scene pairs.
    pub stability_worst: [f64; 3],
    pub scm_map_above_fm: bool,
    pub scm_accuracy_at_least_fm: bool,
    pub coverage_ordered: bool,
}
