//! Experiment drivers shared by the pipeline stages and the acceptance
//! suite: per-scene training, shared bases for scene-cluster (SCM) and flat
//! (FM) models, profiling, and the retrieval, classification, summarization,
//! association and basis-purity protocols.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::alignment::estimate_normalization;
use crate::clustering::{
    associate_new_scene, build_stb, default_stb_size, select_reference_scene,
    self_tuning_spectral_cluster, ClusterMode, SceneClustering, SharedTopicBasis, SpectralConfig,
};
use crate::corpus::{CategoryId, SceneCorpus};
use crate::error::{Error, Result};
use crate::eval::{
    behavior_coverage, classification_accuracy, judge_retrieval, map_at_t, AccuracyReport, MapCurve,
};
use crate::math::fnv1a;
use crate::relatedness::{
    build_affinity, topic_distance_symkl, AffinityMatrix, SceneModel, TauPolicy,
};
use crate::synth::WorldGroundTruth;
use crate::tasks::{
    knn_classify_cross_scene, proportional_split, query_by_example, summarize_kcenter,
    summarize_ncut, summarize_random, LabeledClip, ProfiledClip, RankedRetrieval,
};
use crate::topic_model::{
    fit_lda, infer_profiles_fixed_topics, DirichletPrior, LdaConfig, TopicMatrix,
};

/// Per-scene stream derived from a master seed.
pub fn scene_seed(master: u64, scene_id: &str) -> u64 {
    master ^ fnv1a(scene_id.as_bytes())
}

#[derive(Debug, Clone)]
pub struct TrainedScene {
    pub model: SceneModel,
    pub elbo_trace: Vec<f64>,
}

/// Normalization plus a local LDA model on the scene's training clips.
pub fn train_scene(corpus: &SceneCorpus, k: usize, cfg: &LdaConfig) -> Result<TrainedScene> {
    let normalization = estimate_normalization(corpus)?;
    let cfg = LdaConfig {
        seed: scene_seed(cfg.seed, &corpus.scene_id),
        ..*cfg
    };
    let fit = fit_lda(&corpus.training_clips, &corpus.grid, k, &cfg)?;
    Ok(TrainedScene {
        model: SceneModel {
            scene_id: corpus.scene_id.clone(),
            normalization,
            topics: fit.topics,
            alpha: fit.alpha,
        },
        elbo_trace: fit.elbo_trace,
    })
}

fn model_by_id<'a>(models: &'a [SceneModel], id: &str) -> Result<&'a SceneModel> {
    models
        .iter()
        .find(|m| m.scene_id == id)
        .ok_or_else(|| Error::domain(format!("no model for scene {id}")))
}

/// One shared basis per cluster, each of size `coeff · N_s`.
pub fn build_cluster_stbs(
    models: &[SceneModel],
    aff: &AffinityMatrix,
    clustering: &SceneClustering,
    coeff: usize,
) -> Result<Vec<SharedTopicBasis>> {
    (0..clustering.num_clusters())
        .map(|c| {
            let ids = clustering.member_ids(c);
            let members = ids
                .iter()
                .map(|id| model_by_id(models, id))
                .collect::<Result<Vec<_>>>()?;
            let reference = select_reference_scene(&ids, aff)?;
            let total: usize = members.iter().map(|m| m.topics.num_topics()).sum();
            let k_stb = default_stb_size(coeff, ids.len(), total);
            log::debug!(
                "cluster {c}: {} scenes, reference {reference}, K_stb {k_stb}",
                ids.len()
            );
            build_stb(c, &members, &reference, k_stb)
        })
        .collect()
}

/// The flat-model baseline: every scene in one cluster.
pub fn build_flat_stb(
    models: &[SceneModel],
    aff: &AffinityMatrix,
    coeff: usize,
) -> Result<SharedTopicBasis> {
    let single = SceneClustering::single(aff.scene_ids().to_vec());
    Ok(build_cluster_stbs(models, aff, &single, coeff)?.remove(0))
}

/// Semantic clips of one scene profiled against fixed topics, with their
/// labels. `group` marks which scenes may share a pool.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfiledScene {
    pub scene_id: String,
    pub group: usize,
    pub clips: Vec<ProfiledClip>,
    pub labels: Vec<Option<CategoryId>>,
}

pub fn profile_scene(
    corpus: &SceneCorpus,
    topics: &TopicMatrix,
    alpha: &DirichletPrior,
    cfg: &LdaConfig,
    group: usize,
) -> Result<ProfiledScene> {
    let profiles = infer_profiles_fixed_topics(&corpus.semantic_clips, topics, alpha, cfg)?;
    let clips: Vec<ProfiledClip> = profiles
        .into_iter()
        .map(|p| ProfiledClip::new(corpus.scene_id.clone(), p.clip_id, p.gamma))
        .collect();
    let labels = clips
        .iter()
        .map(|c| corpus.label(&c.clip_id).map(|l| l.category().clone()))
        .collect();
    Ok(ProfiledScene {
        scene_id: corpus.scene_id.clone(),
        group,
        clips,
        labels,
    })
}

/// Profiles every scene against its cluster's basis warped into the scene.
pub fn profile_with_stbs(
    corpora: &[SceneCorpus],
    models: &[SceneModel],
    stbs: &[SharedTopicBasis],
    cfg: &LdaConfig,
) -> Result<Vec<ProfiledScene>> {
    corpora
        .iter()
        .map(|corpus| {
            let stb = stbs
                .iter()
                .find(|s| s.member_ids().any(|m| m == corpus.scene_id))
                .ok_or_else(|| {
                    Error::domain(format!("scene {} belongs to no basis", corpus.scene_id))
                })?;
            let model = model_by_id(models, &corpus.scene_id)?;
            let topics = stb.topics_in_scene(&model.normalization)?;
            profile_scene(corpus, &topics, &stb.alpha(), cfg, stb.cluster_id)
        })
        .collect()
}

/// Profiles every scene against its own local model.
pub fn profile_local(
    corpora: &[SceneCorpus],
    models: &[SceneModel],
    clustering: &SceneClustering,
    cfg: &LdaConfig,
) -> Result<Vec<ProfiledScene>> {
    corpora
        .iter()
        .map(|corpus| {
            let model = model_by_id(models, &corpus.scene_id)?;
            let group = clustering.cluster_of(&corpus.scene_id).ok_or_else(|| {
                Error::domain(format!("scene {} is not clustered", corpus.scene_id))
            })?;
            profile_scene(corpus, &model.topics, &model.alpha, cfg, group)
        })
        .collect()
}

fn labeled(scene: &ProfiledScene) -> impl Iterator<Item = (&ProfiledClip, &CategoryId)> {
    scene
        .clips
        .iter()
        .zip(&scene.labels)
        .filter_map(|(c, l)| l.as_ref().map(|l| (c, l)))
}

/// Every labeled clip queries the labeled clips of the other scenes in its
/// group (and of its own scene when `include_own_scene`, never itself); MAP
/// is evaluated at `t_values`.
pub fn evaluate_retrieval(
    scenes: &[ProfiledScene],
    t_values: &[usize],
    include_own_scene: bool,
) -> Result<(Vec<RankedRetrieval>, MapCurve)> {
    let t_max = t_values.iter().copied().max().unwrap_or(0);
    let mut label_of: BTreeMap<(&str, &str), &CategoryId> = BTreeMap::new();
    for s in scenes {
        for (c, l) in labeled(s) {
            label_of.insert((&c.scene_id, &c.clip_id), l);
        }
    }
    let mut retrievals = Vec::new();
    let mut judged = Vec::new();
    for s in scenes {
        let pool: Vec<ProfiledClip> = scenes
            .iter()
            .filter(|o| o.group == s.group && (include_own_scene || o.scene_id != s.scene_id))
            .flat_map(|o| labeled(o).map(|(c, _)| c.clone()))
            .collect();
        if pool.is_empty() {
            continue;
        }
        for (q, cat) in labeled(s) {
            let r = query_by_example(q, &pool, Some(t_max))?;
            judged.push(judge_retrieval(&r, cat, |sc, cl| {
                label_of.get(&(sc, cl)).copied()
            })?);
            retrievals.push(r);
        }
    }
    let curve = map_at_t(&judged, t_values)?;
    Ok((retrievals, curve))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenePrediction {
    pub clip_id: String,
    pub truth: CategoryId,
    pub predicted: CategoryId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneAccuracy {
    pub scene_id: String,
    pub chosen_k: usize,
    pub report: AccuracyReport,
    pub predictions: Vec<ScenePrediction>,
    /// Test clips whose category never occurs among the labeled scenes.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationResult {
    pub per_scene: Vec<SceneAccuracy>,
    /// Mean over held-out scenes of their macro accuracy.
    pub macro_average: f64,
}

/// Leave-one-scene-out KNN: each scene is classified from the labeled
/// scenes of its group. Test clips of categories unseen in the labeled
/// scenes are left out of the score.
pub fn evaluate_classification(
    scenes: &[ProfiledScene],
    k_grid: &[usize],
) -> Result<ClassificationResult> {
    let mut per_scene = Vec::new();
    for s in scenes {
        let train: Vec<LabeledClip> = scenes
            .iter()
            .filter(|o| o.group == s.group && o.scene_id != s.scene_id)
            .flat_map(|o| {
                labeled(o).map(|(c, l)| LabeledClip {
                    clip: c.clone(),
                    category: l.clone(),
                })
            })
            .collect();
        if train.is_empty() {
            log::warn!(
                "scene {} has no labeled neighbours; not classified",
                s.scene_id
            );
            continue;
        }
        let space: BTreeSet<CategoryId> = train.iter().map(|l| l.category.clone()).collect();
        let (test, truth): (Vec<ProfiledClip>, Vec<CategoryId>) = labeled(s)
            .filter(|(_, l)| space.contains(*l))
            .map(|(c, l)| (c.clone(), l.clone()))
            .unzip();
        let skipped = labeled(s).count() - test.len();
        if skipped > 0 {
            log::warn!(
                "scene {}: {skipped} clips of categories outside the label space",
                s.scene_id
            );
        }
        if test.is_empty() {
            continue;
        }
        let outcome = knn_classify_cross_scene(&test, &train, k_grid)?;
        let report = classification_accuracy(&truth, &outcome.predictions, &space)?;
        let predictions = test
            .iter()
            .zip(truth)
            .zip(outcome.predictions)
            .map(|((c, t), p)| ScenePrediction {
                clip_id: c.clip_id.clone(),
                truth: t,
                predicted: p,
            })
            .collect();
        per_scene.push(SceneAccuracy {
            scene_id: s.scene_id.clone(),
            chosen_k: outcome.chosen_k,
            report,
            predictions,
            skipped,
        });
    }
    let macro_average = if per_scene.is_empty() {
        0.0
    } else {
        per_scene
            .iter()
            .map(|s| s.report.macro_average)
            .sum::<f64>()
            / per_scene.len() as f64
    };
    Ok(ClassificationResult {
        per_scene,
        macro_average,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SummaryMethod {
    /// k-center on shared-basis profiles over the whole pool.
    MultiSceneKcenter,
    /// k-center inside each scene on local profiles, lengths split across scenes.
    SingleSceneKcenter,
    Random,
    Ncut,
}

impl SummaryMethod {
    pub fn name(self) -> &'static str {
        match self {
            SummaryMethod::MultiSceneKcenter => "multi_kcenter",
            SummaryMethod::SingleSceneKcenter => "single_kcenter",
            SummaryMethod::Random => "random",
            SummaryMethod::Ncut => "ncut",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SummaryScope {
    /// One pool per scene cluster.
    WithinCluster,
    /// All scenes, with per-cluster summaries concatenated.
    AcrossClusters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    /// Cluster id for within-cluster pools, `None` across clusters.
    pub cluster: Option<usize>,
    pub n_sum: usize,
    pub method: SummaryMethod,
    pub mean: f64,
    pub sd: f64,
}

struct Pool<'a> {
    /// `(shared profile, local profile, category, scene index, group)`.
    items: Vec<(&'a [f64], &'a [f64], &'a CategoryId, usize, usize)>,
}

impl Pool<'_> {
    fn shared(&self, idx: &[usize]) -> Vec<Vec<f64>> {
        idx.iter().map(|&i| self.items[i].0.to_vec()).collect()
    }

    fn local(&self, idx: &[usize]) -> Vec<Vec<f64>> {
        idx.iter().map(|&i| self.items[i].1.to_vec()).collect()
    }

    /// Pool indices grouped by a key, keys ascending.
    fn split_by(&self, key: impl Fn(usize) -> usize) -> Vec<Vec<usize>> {
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..self.items.len() {
            groups.entry(key(i)).or_default().push(i);
        }
        groups.into_values().collect()
    }

    fn kcenter_in(
        &self,
        groups: &[Vec<usize>],
        n_sum: usize,
        seed: u64,
        local: bool,
    ) -> Result<Vec<usize>> {
        let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
        let mut out = Vec::new();
        for (gi, (g, share)) in groups
            .iter()
            .zip(proportional_split(&sizes, n_sum))
            .enumerate()
        {
            if share == 0 {
                continue;
            }
            let pts = if local { self.local(g) } else { self.shared(g) };
            let s = summarize_kcenter(&pts, share, seed ^ fnv1a(format!("group{gi}").as_bytes()))?;
            out.extend(s.selected.iter().map(|&i| g[i]));
        }
        Ok(out)
    }

    fn summarize(
        &self,
        method: SummaryMethod,
        scope: SummaryScope,
        n_sum: usize,
        seed: u64,
    ) -> Result<Vec<usize>> {
        let all: Vec<usize> = (0..self.items.len()).collect();
        let by_group = || match scope {
            SummaryScope::WithinCluster => vec_of(all.clone()),
            SummaryScope::AcrossClusters => self.split_by(|i| self.items[i].4),
        };
        match method {
            SummaryMethod::MultiSceneKcenter => self.kcenter_in(&by_group(), n_sum, seed, false),
            SummaryMethod::SingleSceneKcenter => {
                self.kcenter_in(&self.split_by(|i| self.items[i].3), n_sum, seed, true)
            }
            SummaryMethod::Random => {
                Ok(summarize_random(&self.shared(&all), n_sum, seed)?.selected)
            }
            SummaryMethod::Ncut => {
                let groups = by_group();
                let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
                let mut out = Vec::new();
                for (g, share) in groups.iter().zip(proportional_split(&sizes, n_sum)) {
                    if share > 0 {
                        out.extend(
                            summarize_ncut(&self.shared(g), share)?
                                .selected
                                .iter()
                                .map(|&i| g[i]),
                        );
                    }
                }
                Ok(out)
            }
        }
    }

    fn coverage(&self, selected: &[usize]) -> f64 {
        behavior_coverage(
            selected.iter().map(|&i| self.items[i].2),
            self.items.iter().map(|it| it.2),
        )
    }
}

fn vec_of(v: Vec<usize>) -> Vec<Vec<usize>> {
    alloc::vec![v]
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, libm::sqrt(var))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageConfig {
    pub lengths: Vec<usize>,
    pub seeds: usize,
    pub master_seed: u64,
    pub methods: Vec<SummaryMethod>,
    pub scope: SummaryScope,
}

/// Behaviour coverage of each summarizer, averaged over seeds. `shared` and
/// `local` must list the same scenes and clips in the same order.
pub fn coverage_study(
    shared: &[ProfiledScene],
    local: &[ProfiledScene],
    cfg: &CoverageConfig,
) -> Result<Vec<CoverageRow>> {
    if shared.len() != local.len() || cfg.seeds == 0 {
        return Err(Error::domain(
            "coverage needs matching profile sets and at least one seed",
        ));
    }
    let mut items = Vec::new();
    for (si, (s, l)) in shared.iter().zip(local).enumerate() {
        if s.scene_id != l.scene_id || s.clips.len() != l.clips.len() {
            return Err(Error::domain(format!(
                "profile sets disagree on scene {}",
                s.scene_id
            )));
        }
        for ((sc, lc), cat) in s.clips.iter().zip(&l.clips).zip(&s.labels) {
            if let Some(cat) = cat {
                items.push((sc.gamma.as_slice(), lc.gamma.as_slice(), cat, si, s.group));
            }
        }
    }
    let pools: Vec<(Option<usize>, Pool<'_>)> = match cfg.scope {
        SummaryScope::AcrossClusters => alloc::vec![(None, Pool { items })],
        SummaryScope::WithinCluster => {
            let mut by: BTreeMap<usize, Vec<_>> = BTreeMap::new();
            for it in items {
                by.entry(it.4).or_default().push(it);
            }
            by.into_iter()
                .map(|(g, items)| (Some(g), Pool { items }))
                .collect()
        }
    };
    let mut rows = Vec::new();
    for (cluster, pool) in &pools {
        for &n_sum in &cfg.lengths {
            if n_sum == 0 || n_sum > pool.items.len() {
                return Err(Error::domain(format!(
                    "summary length {n_sum} does not fit a pool of {}",
                    pool.items.len()
                )));
            }
            for &method in &cfg.methods {
                let runs = if method == SummaryMethod::Ncut {
                    1
                } else {
                    cfg.seeds
                };
                let cov = (0..runs)
                    .map(|r| {
                        let seed = cfg.master_seed ^ ((r as u64) << 20) ^ n_sum as u64;
                        Ok(pool.coverage(&pool.summarize(method, cfg.scope, n_sum, seed)?))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                let (mean, sd) = mean_sd(&cov);
                rows.push(CoverageRow {
                    cluster: *cluster,
                    n_sum,
                    method,
                    mean,
                    sd,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationOutcome {
    pub held_out: String,
    /// Scenes of the cluster the held-out scene was assigned to.
    pub assigned_members: Vec<String>,
    /// `1 - relatedness` to every cluster basis.
    pub distances: Vec<f64>,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationConfig {
    pub tau: TauPolicy,
    pub mode: ClusterMode,
    pub spectral: SpectralConfig,
    pub coeff: usize,
}

/// Holds out each scene in turn, clusters the rest, builds their bases and
/// associates the held-out scene with one of them.
pub fn leave_one_scene_out_association(
    models: &[SceneModel],
    cfg: &AssociationConfig,
) -> Result<Vec<AssociationOutcome>> {
    if models.len() < 3 {
        return Err(Error::domain(
            "leave-one-out association needs at least three scenes",
        ));
    }
    let mut out = Vec::with_capacity(models.len());
    for held in 0..models.len() {
        let rest: Vec<SceneModel> = models
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != held)
            .map(|(_, m)| m.clone())
            .collect();
        let (aff, tau) = build_affinity(&rest, cfg.tau)?;
        let mode = match cfg.mode {
            ClusterMode::Fixed(c) => ClusterMode::Fixed(c.min(rest.len())),
            ClusterMode::Auto => ClusterMode::Auto,
        };
        let clustering = self_tuning_spectral_cluster(&aff, mode, &cfg.spectral)?;
        let stbs = build_cluster_stbs(&rest, &aff, &clustering, cfg.coeff)?;
        let assoc = associate_new_scene(&models[held], &stbs, tau)?;
        out.push(AssociationOutcome {
            held_out: models[held].scene_id.clone(),
            assigned_members: stbs[assoc.best].member_ids().map(String::from).collect(),
            distances: assoc.distances,
            tau,
        });
    }
    Ok(out)
}

/// Planted activity tag closest (symmetric KL) to every local topic of a
/// scene, both in the scene's own cells.
pub fn match_planted(model: &SceneModel, truth: &WorldGroundTruth) -> Result<Vec<String>> {
    let scene = truth
        .scene(&model.scene_id)
        .ok_or_else(|| Error::domain(format!("no ground truth for scene {}", model.scene_id)))?;
    if scene.activities.is_empty() {
        return Err(Error::domain(format!(
            "scene {} has no planted activities",
            model.scene_id
        )));
    }
    Ok(model
        .topics
        .topics()
        .map(|beta| {
            scene
                .activities
                .iter()
                .map(|a| {
                    (
                        topic_distance_symkl(beta, &a.distribution, &a.distribution, beta),
                        &a.tag,
                    )
                })
                .fold((f64::INFINITY, &scene.activities[0].tag), |b, c| {
                    if c.0 < b.0 {
                        c
                    } else {
                        b
                    }
                })
                .1
                .clone()
        })
        .collect())
}

/// Cluster purity of a basis' provenance sets against the planted activity
/// each local topic matches best.
pub fn stb_purity(
    stb: &SharedTopicBasis,
    models: &[SceneModel],
    truth: &WorldGroundTruth,
) -> Result<f64> {
    let mut tags: BTreeMap<(String, usize), String> = BTreeMap::new();
    for id in stb.member_ids() {
        let model = model_by_id(models, id)?;
        for (k, t) in match_planted(model, truth)?.into_iter().enumerate() {
            tags.insert((id.into(), k), t);
        }
    }
    let mut majority = 0;
    let mut total = 0;
    for set in &stb.provenance {
        let mut counts: BTreeMap<&String, usize> = BTreeMap::new();
        for key in set {
            let tag = tags
                .get(key)
                .ok_or_else(|| Error::domain(format!("unknown topic {}/{}", key.0, key.1)))?;
            *counts.entry(tag).or_default() += 1;
        }
        majority += counts.values().max().copied().unwrap_or(0);
        total += set.len();
    }
    if total == 0 {
        return Err(Error::domain("empty basis"));
    }
    Ok(majority as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub coeff: usize,
    pub scm: f64,
    pub fm: f64,
}

/// Macro classification accuracy of SCM and FM for each `coeff`. FM uses a
/// single basis sized by the total scene count, SCM one basis per cluster.
pub fn stb_sweep(
    corpora: &[SceneCorpus],
    models: &[SceneModel],
    aff: &AffinityMatrix,
    clustering: &SceneClustering,
    coeffs: &[usize],
    lda: &LdaConfig,
    k_grid: &[usize],
) -> Result<Vec<SweepRow>> {
    coeffs
        .iter()
        .map(|&coeff| {
            let scm_stbs = build_cluster_stbs(models, aff, clustering, coeff)?;
            let fm_stb = build_flat_stb(models, aff, coeff)?;
            let scm = evaluate_classification(
                &profile_with_stbs(corpora, models, &scm_stbs, lda)?,
                k_grid,
            )?;
            let fm = evaluate_classification(
                &profile_with_stbs(corpora, models, core::slice::from_ref(&fm_stb), lda)?,
                k_grid,
            )?;
            Ok(SweepRow {
                coeff,
                scm: scm.macro_average,
                fm: fm.macro_average,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub k_local: usize,
    pub lda: LdaConfig,
    pub tau: TauPolicy,
    pub mode: ClusterMode,
    pub spectral: SpectralConfig,
    pub coeff: usize,
    pub k_grid: Vec<usize>,
    pub t_values: Vec<usize>,
    pub coverage: CoverageConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            k_local: 15,
            lda: LdaConfig::default(),
            tau: TauPolicy::default(),
            mode: ClusterMode::Auto,
            spectral: SpectralConfig::default(),
            coeff: 5,
            k_grid: alloc::vec![1, 3, 5, 7, 9, 11, 13, 15],
            t_values: alloc::vec![10, 50, 100],
            coverage: CoverageConfig {
                lengths: alloc::vec![6, 9, 12, 18],
                seeds: 50,
                master_seed: 0,
                methods: alloc::vec![
                    SummaryMethod::MultiSceneKcenter,
                    SummaryMethod::SingleSceneKcenter,
                    SummaryMethod::Random
                ],
                scope: SummaryScope::WithinCluster,
            },
        }
    }
}

/// Everything one world run produces.
#[derive(Debug, Clone)]
pub struct WorldReport {
    pub trained: Vec<TrainedScene>,
    pub affinity: AffinityMatrix,
    pub tau: f64,
    pub clustering: SceneClustering,
    pub scm_stbs: Vec<SharedTopicBasis>,
    pub fm_stb: SharedTopicBasis,
    pub scm_map: MapCurve,
    pub fm_map: MapCurve,
    pub scm_accuracy: ClassificationResult,
    pub fm_accuracy: ClassificationResult,
    pub coverage: Vec<CoverageRow>,
}

/// Trains, clusters and evaluates both models on a set of scenes.
pub fn run_world(corpora: &[SceneCorpus], cfg: &ExperimentConfig) -> Result<WorldReport> {
    let trained = corpora
        .iter()
        .map(|c| train_scene(c, cfg.k_local, &cfg.lda))
        .collect::<Result<Vec<_>>>()?;
    let models: Vec<SceneModel> = trained.iter().map(|t| t.model.clone()).collect();
    let (affinity, tau) = build_affinity(&models, cfg.tau)?;
    let clustering = self_tuning_spectral_cluster(&affinity, cfg.mode, &cfg.spectral)?;
    let scm_stbs = build_cluster_stbs(&models, &affinity, &clustering, cfg.coeff)?;
    let fm_stb = build_flat_stb(&models, &affinity, cfg.coeff)?;
    let scm = profile_with_stbs(corpora, &models, &scm_stbs, &cfg.lda)?;
    let fm = profile_with_stbs(corpora, &models, core::slice::from_ref(&fm_stb), &cfg.lda)?;
    let local = profile_local(corpora, &models, &clustering, &cfg.lda)?;
    let (_, scm_map) = evaluate_retrieval(&scm, &cfg.t_values, false)?;
    let (_, fm_map) = evaluate_retrieval(&fm, &cfg.t_values, false)?;
    let scm_accuracy = evaluate_classification(&scm, &cfg.k_grid)?;
    let fm_accuracy = evaluate_classification(&fm, &cfg.k_grid)?;
    let coverage = coverage_study(&scm, &local, &cfg.coverage)?;
    Ok(WorldReport {
        trained,
        affinity,
        tau,
        clustering,
        scm_stbs,
        fm_stb,
        scm_map,
        fm_map,
        scm_accuracy,
        fm_accuracy,
        coverage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_synthetic_world, SyntheticWorldSpec};

    fn small_world() -> (crate::synth::SyntheticWorld, Vec<SceneModel>) {
        let mut spec = SyntheticWorldSpec::three_cluster(4);
        spec.training_clips = 60;
        let world = generate_synthetic_world(&spec).unwrap();
        let cfg = LdaConfig {
            max_em_iters: 40,
            ..LdaConfig::default()
        };
        let models = world
            .scenes
            .iter()
            .map(|c| train_scene(c, 6, &cfg).unwrap().model)
            .collect();
        (world, models)
    }

    #[test]
    fn provenance_partitions_local_topics() {
        let (_, models) = small_world();
        let (aff, _) = build_affinity(&models, TauPolicy::default()).unwrap();
        let clustering = SceneClustering::new(
            aff.scene_ids().to_vec(),
            alloc::vec![0, 0, 0, 1, 1, 1, 2, 2, 2],
            ClusterMode::Fixed(3),
        )
        .unwrap();
        let stbs = build_cluster_stbs(&models, &aff, &clustering, 2).unwrap();
        let mut seen = BTreeSet::new();
        for stb in &stbs {
            assert_eq!(stb.num_topics(), 6);
            for set in &stb.provenance {
                for key in set {
                    assert!(seen.insert(key.clone()));
                }
            }
        }
        assert_eq!(seen.len(), 9 * 6);
    }

    #[test]
    fn retrieval_pools_stay_in_group() {
        let (world, models) = small_world();
        let clustering = SceneClustering::new(
            models.iter().map(|m| m.scene_id.clone()).collect(),
            world.truth.cluster_labels(),
            ClusterMode::Fixed(3),
        )
        .unwrap();
        let cfg = LdaConfig::default();
        let local = profile_local(&world.scenes, &models, &clustering, &cfg).unwrap();
        let (retrievals, curve) = evaluate_retrieval(&local, &[1, 5], false).unwrap();
        for r in &retrievals {
            let g = clustering.cluster_of(&r.query_scene).unwrap();
            assert!(r
                .hits
                .iter()
                .all(|h| h.scene_id != r.query_scene
                    && clustering.cluster_of(&h.scene_id) == Some(g)));
        }
        assert!(curve.map.iter().all(|m| (0.0..=1.0).contains(m)));
    }

    #[test]
    fn coverage_of_full_pool_is_one() {
        let (world, models) = small_world();
        let clustering =
            SceneClustering::single(models.iter().map(|m| m.scene_id.clone()).collect());
        let local =
            profile_local(&world.scenes, &models, &clustering, &LdaConfig::default()).unwrap();
        let n: usize = local.iter().map(|s| s.clips.len()).sum();
        let cfg = CoverageConfig {
            lengths: alloc::vec![n],
            seeds: 2,
            master_seed: 1,
            methods: alloc::vec![
                SummaryMethod::MultiSceneKcenter,
                SummaryMethod::SingleSceneKcenter,
                SummaryMethod::Random
            ],
            scope: SummaryScope::WithinCluster,
        };
        for row in coverage_study(&local, &local, &cfg).unwrap() {
            assert_eq!(row.mean, 1.0);
            assert_eq!(row.sd, 0.0);
        }
    }

    #[test]
    fn matched_planted_tags_belong_to_scene() {
        let (world, models) = small_world();
        let tags = match_planted(&models[0], &world.truth).unwrap();
        let truth = world.truth.scene(&models[0].scene_id).unwrap();
        assert!(tags
            .iter()
            .all(|t| truth.activities.iter().any(|a| &a.tag == t)));
    }
}
