//! The stages of a run. Each stage reads artifacts from the run directory,
//! computes, and only then writes its outputs and manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use scenemesh_core::clustering::self_tuning_spectral_cluster;
use scenemesh_core::eval::{alignment_stability, rand_index, StabilityScene};
use scenemesh_core::experiment::{
    build_cluster_stbs, build_flat_stb, coverage_study, evaluate_classification,
    evaluate_retrieval, profile_local, profile_with_stbs, stb_sweep, train_scene, ProfiledScene,
};
use scenemesh_core::relatedness::{affinity_from_tables, distance_table, upper_pairs};
use scenemesh_core::synth::generate_synthetic_world;
use scenemesh_core::tasks::summarize_kcenter;
use scenemesh_core::{AffinityMatrix, SceneClustering, SceneCorpus, SceneModel, SharedTopicBasis};

use crate::artifact::{self, Artifact};
use crate::config::PipelineConfig;
use crate::error::{PipelineError, Result};
use crate::formats::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum)]
pub enum Stage {
    /// Generate a synthetic world.
    Gen,
    /// Fit one LDA model per scene.
    Train,
    /// Pairwise scene relatedness.
    Affinity,
    /// Spectral clustering of scenes.
    Cluster,
    /// Shared topic bases per cluster and for the flat model.
    Stb,
    /// Fixed-topic profiles of the semantic clips.
    Profile,
    /// Query by example and MAP.
    Query,
    /// Cross-scene KNN classification.
    Classify,
    /// Summaries and behaviour coverage.
    Summarize,
    /// Alignment stability and the run report.
    Evaluate,
    /// Accuracy against the basis size coefficient.
    Sweep,
    /// Every stage in order.
    All,
}

impl Stage {
    pub const ORDER: [Stage; 11] = [
        Stage::Gen,
        Stage::Train,
        Stage::Affinity,
        Stage::Cluster,
        Stage::Stb,
        Stage::Profile,
        Stage::Query,
        Stage::Classify,
        Stage::Summarize,
        Stage::Evaluate,
        Stage::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Gen => "gen",
            Stage::Train => "train",
            Stage::Affinity => "affinity",
            Stage::Cluster => "cluster",
            Stage::Stb => "stb",
            Stage::Profile => "profile",
            Stage::Query => "query",
            Stage::Classify => "classify",
            Stage::Summarize => "summarize",
            Stage::Evaluate => "evaluate",
            Stage::Sweep => "sweep",
            Stage::All => "all",
        }
    }
}

pub const WORLD_INDEX: &str = "world/index.json";
pub const AFFINITY: &str = "affinity.json";
pub const CLUSTERING: &str = "clustering.json";
pub const STBS: &str = "stbs.json";
pub const PROFILES: &str = "profiles.json";
pub const QUERY: &str = "query.json";
pub const CLASSIFY: &str = "classify.json";
pub const COVERAGE: &str = "coverage.json";
pub const REPORT: &str = "report.json";
pub const RUN_MANIFEST: &str = "manifest.json";

pub fn corpus_path(scene_id: &str) -> String {
    format!("world/{scene_id}.json")
}

pub fn model_path(scene_id: &str) -> String {
    format!("models/{scene_id}.json")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: serde_json::Value,
    /// Relative path to SHA-256 of every artifact read.
    pub inputs: BTreeMap<String, String>,
    /// Relative path to SHA-256 of every artifact written.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub config: serde_json::Value,
    /// Stage name to the SHA-256 of its manifest.
    pub stages: BTreeMap<String, String>,
}

pub struct Pipeline {
    cfg: PipelineConfig,
    hash: String,
    dir: PathBuf,
}

struct StageRun<'a> {
    p: &'a Pipeline,
    stage: Stage,
    inputs: BTreeMap<String, String>,
    input_hashes: BTreeMap<String, String>,
    outputs: Vec<(String, Vec<u8>)>,
}

impl StageRun<'_> {
    fn read<T: DeserializeOwned>(&mut self, rel: &str, kind: &str) -> Result<T> {
        let path = self.p.dir.join(rel);
        let bytes = artifact::read_bytes(&path)?;
        let a: Artifact<T> = artifact::decode(&path, &bytes, kind)?;
        if a.config_hash != self.p.hash {
            log::warn!("{rel} was produced by config {}", a.config_hash);
        }
        self.inputs.insert(rel.into(), artifact::sha256_hex(&bytes));
        self.input_hashes.insert(rel.into(), a.config_hash);
        Ok(a.payload)
    }

    fn world(&mut self) -> Result<WorldIndex> {
        self.read(WORLD_INDEX, KIND_WORLD)
    }

    fn corpora(&mut self, index: &WorldIndex) -> Result<Vec<SceneCorpus>> {
        index
            .scenes
            .iter()
            .map(|s| {
                let rel = corpus_path(&s.scene_id);
                let dto: CorpusDto = self.read(&rel, KIND_CORPUS)?;
                if dto.scene_id != s.scene_id {
                    return Err(PipelineError::invalid(
                        self.p.dir.join(&rel),
                        "scene id does not match the index",
                    ));
                }
                dto.to_core()
                    .map_err(|e| PipelineError::invalid(self.p.dir.join(&rel), e))
            })
            .collect()
    }

    fn models(&mut self, index: &WorldIndex) -> Result<Vec<SceneModel>> {
        index
            .scenes
            .iter()
            .map(|s| {
                let rel = model_path(&s.scene_id);
                let dto: ModelDto = self.read(&rel, KIND_MODEL)?;
                if dto.scene_id != s.scene_id {
                    return Err(PipelineError::invalid(
                        self.p.dir.join(&rel),
                        "scene id does not match the index",
                    ));
                }
                dto.to_core()
                    .map_err(|e| PipelineError::invalid(self.p.dir.join(&rel), e))
            })
            .collect()
    }

    fn affinity(&mut self) -> Result<(AffinityMatrix, f64)> {
        let dto: AffinityDto = self.read(AFFINITY, KIND_AFFINITY)?;
        let aff = dto
            .to_core()
            .map_err(|e| PipelineError::invalid(self.p.dir.join(AFFINITY), e))?;
        Ok((aff, dto.tau))
    }

    fn clustering(&mut self) -> Result<SceneClustering> {
        let dto: ClusteringDto = self.read(CLUSTERING, KIND_CLUSTERING)?;
        dto.to_core()
            .map_err(|e| PipelineError::invalid(self.p.dir.join(CLUSTERING), e))
    }

    fn stbs(&mut self) -> Result<(Vec<SharedTopicBasis>, SharedTopicBasis)> {
        let dto: StbSetDto = self.read(STBS, KIND_STBS)?;
        let path = self.p.dir.join(STBS);
        let scm = dto
            .scm
            .iter()
            .map(|s| s.to_core())
            .collect::<scenemesh_core::Result<Vec<_>>>()
            .map_err(|e| PipelineError::invalid(&path, e))?;
        let fm = dto
            .fm
            .to_core()
            .map_err(|e| PipelineError::invalid(&path, e))?;
        Ok((scm, fm))
    }

    fn profiles(&mut self) -> Result<[Vec<ProfiledScene>; 3]> {
        let dto: ProfileSetDto = self.read(PROFILES, KIND_PROFILES)?;
        let conv = |v: &[ProfiledSceneDto]| v.iter().map(ProfiledSceneDto::to_core).collect();
        Ok([conv(&dto.scm), conv(&dto.fm), conv(&dto.local)])
    }

    fn emit_json<T: Serialize>(&mut self, rel: &str, kind: &str, payload: &T) {
        self.outputs
            .push((rel.into(), artifact::encode(kind, &self.p.hash, payload)));
    }

    fn emit_csv(&mut self, rel: &str, w: csv::Writer<Vec<u8>>) -> Result<()> {
        let bytes = w
            .into_inner()
            .map_err(|e| PipelineError::Csv(e.into_error().into()))?;
        self.outputs.push((rel.into(), bytes));
        Ok(())
    }

    fn finish(self) -> Result<()> {
        let mut outputs = BTreeMap::new();
        for (rel, bytes) in &self.outputs {
            artifact::write_atomic(&self.p.dir.join(rel), bytes)?;
            outputs.insert(rel.clone(), artifact::sha256_hex(bytes));
        }
        let manifest = StageManifest {
            stage: self.stage.name().into(),
            config_hash: self.p.hash.clone(),
            seed: self.p.cfg.seed,
            config: self.p.config_value(),
            inputs: self.inputs,
            outputs,
        };
        let bytes = artifact::encode("stage_manifest", &self.p.hash, &manifest);
        artifact::write_atomic(
            &self.p.dir.join(self.p.stage_manifest_path(self.stage)),
            &bytes,
        )?;
        self.p
            .record_stage(self.stage, &artifact::sha256_hex(&bytes))
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn group_label(cluster: Option<usize>) -> String {
    cluster.map_or_else(|| "all".into(), |c| c.to_string())
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let hash = cfg.hash();
        let dir = cfg.run_dir.clone();
        Ok(Self { cfg, hash, dir })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn run_dir(&self) -> &Path {
        &self.dir
    }

    pub fn stage_manifest_path(&self, stage: Stage) -> String {
        format!("manifests/{}.json", stage.name())
    }

    fn config_value(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(&self.cfg).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("run_dir");
        }
        v
    }

    fn record_stage(&self, stage: Stage, manifest_sha: &str) -> Result<()> {
        let path = self.dir.join(RUN_MANIFEST);
        let mut run = match artifact::load::<RunManifest>(&path, "run_manifest") {
            Ok(a) if a.payload.config_hash == self.hash => a.payload,
            _ => RunManifest {
                config_hash: self.hash.clone(),
                seed: self.cfg.seed,
                config: self.config_value(),
                stages: BTreeMap::new(),
            },
        };
        run.stages.insert(stage.name().into(), manifest_sha.into());
        artifact::save(&path, "run_manifest", &self.hash, &run)
    }

    pub fn run(&self, stage: Stage) -> Result<()> {
        if stage == Stage::All {
            for s in Stage::ORDER {
                self.run(s)?;
            }
            return Ok(());
        }
        log::info!("stage {}", stage.name());
        let mut run = StageRun {
            p: self,
            stage,
            inputs: BTreeMap::new(),
            input_hashes: BTreeMap::new(),
            outputs: Vec::new(),
        };
        match stage {
            Stage::Gen => self.gen(&mut run)?,
            Stage::Train => self.train(&mut run)?,
            Stage::Affinity => self.affinity(&mut run)?,
            Stage::Cluster => self.cluster(&mut run)?,
            Stage::Stb => self.stb(&mut run)?,
            Stage::Profile => self.profile(&mut run)?,
            Stage::Query => self.query(&mut run)?,
            Stage::Classify => self.classify(&mut run)?,
            Stage::Summarize => self.summarize(&mut run)?,
            Stage::Evaluate => self.evaluate(&mut run)?,
            Stage::Sweep => self.sweep(&mut run)?,
            Stage::All => unreachable!(),
        }
        run.finish()
    }

    fn gen(&self, run: &mut StageRun<'_>) -> Result<()> {
        let world = generate_synthetic_world(&self.cfg.world_spec())?;
        let index = WorldIndex {
            scenes: world
                .truth
                .scenes
                .iter()
                .map(|t| SceneEntry {
                    scene_id: t.scene_id.clone(),
                    cluster: Some(t.cluster),
                    transform: Some((&t.transform).into()),
                })
                .collect(),
        };
        run.emit_json(WORLD_INDEX, KIND_WORLD, &index);
        for corpus in &world.scenes {
            run.emit_json(
                &corpus_path(&corpus.scene_id),
                KIND_CORPUS,
                &CorpusDto::from(corpus),
            );
        }
        Ok(())
    }

    fn train(&self, run: &mut StageRun<'_>) -> Result<()> {
        let index = run.world()?;
        let corpora = run.corpora(&index)?;
        let lda = self.cfg.lda_config();
        let k = self.cfg.lda.k_local;
        let trained = corpora
            .par_iter()
            .map(|c| train_scene(c, k, &lda))
            .collect::<scenemesh_core::Result<Vec<_>>>()?;
        for t in &trained {
            run.emit_json(
                &model_path(&t.model.scene_id),
                KIND_MODEL,
                &ModelDto::new(&t.model, &t.elbo_trace),
            );
        }
        Ok(())
    }

    fn affinity(&self, run: &mut StageRun<'_>) -> Result<()> {
        let index = run.world()?;
        let models = run.models(&index)?;
        if models.len() < 2 {
            return Err(PipelineError::Config(
                "a run needs at least two scenes".into(),
            ));
        }
        let tables = upper_pairs(models.len())
            .into_par_iter()
            .map(|(i, j)| distance_table(&models[i], &models[j]))
            .collect::<scenemesh_core::Result<Vec<_>>>()?;
        let ids: Vec<String> = models.iter().map(|m| m.scene_id.clone()).collect();
        let (aff, tau) = affinity_from_tables(ids.clone(), &tables, self.cfg.tau_policy())?;
        log::info!("tau resolved to {tau}");
        run.emit_json(AFFINITY, KIND_AFFINITY, &AffinityDto::new(&aff, tau));
        let mut w = csv_writer();
        w.write_record(std::iter::once("scene_id").chain(ids.iter().map(String::as_str)))?;
        for (i, id) in ids.iter().enumerate() {
            let mut row = vec![id.clone()];
            row.extend((0..ids.len()).map(|j| aff.get(i, j).to_string()));
            w.write_record(&row)?;
        }
        run.emit_csv("affinity.csv", w)
    }

    fn cluster(&self, run: &mut StageRun<'_>) -> Result<()> {
        let index = run.world()?;
        let (aff, _) = run.affinity()?;
        let clustering = self_tuning_spectral_cluster(
            &aff,
            self.cfg.clustering.mode.into(),
            &self.cfg.spectral_config(),
        )?;
        let truth = match index.truth_labels() {
            Some(t) if t.len() == clustering.labels().len() => {
                Some(rand_index(clustering.labels(), &t)?)
            }
            _ => None,
        };
        log::info!(
            "{} clusters, cost curve {:?}",
            clustering.num_clusters(),
            clustering.cost_curve
        );
        run.emit_json(
            CLUSTERING,
            KIND_CLUSTERING,
            &ClusteringDto::new(&clustering, truth),
        );
        Ok(())
    }

    fn stb(&self, run: &mut StageRun<'_>) -> Result<()> {
        let index = run.world()?;
        let models = run.models(&index)?;
        let (aff, _) = run.affinity()?;
        let clustering = run.clustering()?;
        let coeff = self.cfg.clustering.coeff;
        let scm = build_cluster_stbs(&models, &aff, &clustering, coeff)?;
        let fm = build_flat_stb(&models, &aff, coeff)?;
        let dto = StbSetDto {
            scm: scm.iter().map(StbDto::from).collect(),
            fm: (&fm).into(),
        };
        run.emit_json(STBS, KIND_STBS, &dto);
        Ok(())
    }

    fn profile(&self, run: &mut StageRun<'_>) -> Result<()> {
        let index = run.world()?;
        let corpora = run.corpora(&index)?;
        let models = run.models(&index)?;
        let clustering = run.clustering()?;
        let (scm_stbs, fm_stb) = run.stbs()?;
        let lda = self.cfg.lda_config();
        let fm_stbs = std::slice::from_ref(&fm_stb);
        let per_scene = corpora
            .par_iter()
            .map(|c| {
                let one = std::slice::from_ref(c);
                Ok([
                    profile_with_stbs(one, &models, &scm_stbs, &lda)?.remove(0),
                    profile_with_stbs(one, &models, fm_stbs, &lda)?.remove(0),
                    profile_local(one, &models, &clustering, &lda)?.remove(0),
                ])
            })
            .collect::<scenemesh_core::Result<Vec<_>>>()?;
        let pick = |i: usize| {
            per_scene
                .iter()
                .map(|s| ProfiledSceneDto::from(&s[i]))
                .collect()
        };
        let dto = ProfileSetDto {
            scm: pick(0),
            fm: pick(1),
            local: pick(2),
        };
        run.emit_json(PROFILES, KIND_PROFILES, &dto);
        Ok(())
    }

    fn query(&self, run: &mut StageRun<'_>) -> Result<()> {
        let [scm, fm, _] = run.profiles()?;
        let t = &self.cfg.tasks;
        let (scm_r, scm_map) = evaluate_retrieval(&scm, &t.t_values, t.include_own_scene)?;
        let (fm_r, fm_map) = evaluate_retrieval(&fm, &t.t_values, t.include_own_scene)?;
        let mut w = csv_writer();
        w.write_record([
            "model",
            "query_scene",
            "query_clip",
            "rank",
            "scene_id",
            "clip_id",
            "distance",
        ])?;
        for (model, rs) in [("scm", &scm_r), ("fm", &fm_r)] {
            for r in rs.iter() {
                for (rank, h) in r.hits.iter().enumerate() {
                    w.write_record([
                        model,
                        &r.query_scene,
                        &r.query_clip,
                        &(rank + 1).to_string(),
                        &h.scene_id,
                        &h.clip_id,
                        &h.distance.to_string(),
                    ])?;
                }
            }
        }
        run.emit_csv("retrieval.csv", w)?;
        let mut w = csv_writer();
        w.write_record(["model", "t", "map"])?;
        for (model, curve) in [("scm", &scm_map), ("fm", &fm_map)] {
            for (tv, m) in curve.t_values.iter().zip(&curve.map) {
                w.write_record([model, &tv.to_string(), &m.to_string()])?;
            }
        }
        run.emit_csv("map_curve.csv", w)?;
        let dto = QueryDto {
            t_values: t.t_values.clone(),
            scm: (&scm_map).into(),
            fm: (&fm_map).into(),
        };
        run.emit_json(QUERY, KIND_QUERY, &dto);
        Ok(())
    }

    fn classify(&self, run: &mut StageRun<'_>) -> Result<()> {
        let [scm, fm, _] = run.profiles()?;
        let k_grid = &self.cfg.tasks.k_grid;
        let results = [
            ("scm", evaluate_classification(&scm, k_grid)?),
            ("fm", evaluate_classification(&fm, k_grid)?),
        ];
        let mut preds = csv_writer();
        preds.write_record([
            "model",
            "scene_id",
            "clip_id",
            "truth",
            "predicted",
            "correct",
        ])?;
        let mut acc = csv_writer();
        acc.write_record(["model", "scene_id", "chosen_k", "category", "accuracy"])?;
        for (model, r) in &results {
            for s in &r.per_scene {
                for p in &s.predictions {
                    preds.write_record([
                        *model,
                        &s.scene_id,
                        &p.clip_id,
                        &p.truth.0,
                        &p.predicted.0,
                        &(p.truth == p.predicted).to_string(),
                    ])?;
                }
                let k = s.chosen_k.to_string();
                for (cat, a) in &s.report.per_category {
                    acc.write_record([*model, &s.scene_id, &k, &cat.0, &a.to_string()])?;
                }
                acc.write_record([
                    *model,
                    &s.scene_id,
                    &k,
                    "macro",
                    &s.report.macro_average.to_string(),
                ])?;
            }
            acc.write_record([*model, "all", "", "macro", &r.macro_average.to_string()])?;
        }
        run.emit_csv("predictions.csv", preds)?;
        run.emit_csv("accuracy.csv", acc)?;
        let dto = ClassifyDto {
            scm: (&results[0].1).into(),
            fm: (&results[1].1).into(),
        };
        run.emit_json(CLASSIFY, KIND_CLASSIFY, &dto);
        Ok(())
    }

    fn summarize(&self, run: &mut StageRun<'_>) -> Result<()> {
        let [scm, _, local] = run.profiles()?;
        let rows = coverage_study(&scm, &local, &self.cfg.coverage_config())?;
        let mut w = csv_writer();
        w.write_record(["cluster", "n_sum", "method", "mean", "sd"])?;
        for r in &rows {
            w.write_record([
                &group_label(r.cluster),
                &r.n_sum.to_string(),
                r.method.name(),
                &r.mean.to_string(),
                &r.sd.to_string(),
            ])?;
        }
        run.emit_csv("coverage.csv", w)?;

        let mut groups: BTreeMap<usize, Vec<(&str, &str, Option<&str>, &[f64])>> = BTreeMap::new();
        for s in &scm {
            for (c, l) in s.clips.iter().zip(&s.labels) {
                groups.entry(s.group).or_default().push((
                    &c.scene_id,
                    &c.clip_id,
                    l.as_ref().map(|l| l.0.as_str()),
                    &c.gamma,
                ));
            }
        }
        let mut w = csv_writer();
        w.write_record([
            "cluster",
            "n_sum",
            "rank",
            "scene_id",
            "clip_id",
            "category",
            "objective",
        ])?;
        for (g, pool) in &groups {
            let pts: Vec<Vec<f64>> = pool.iter().map(|p| p.3.to_vec()).collect();
            for &n in self
                .cfg
                .tasks
                .summary_lengths
                .iter()
                .filter(|&&n| n <= pts.len())
            {
                let s = summarize_kcenter(&pts, n, self.cfg.seed)?;
                for (rank, &i) in s.selected.iter().enumerate() {
                    let (scene, clip, cat, _) = pool[i];
                    w.write_record([
                        &g.to_string(),
                        &n.to_string(),
                        &(rank + 1).to_string(),
                        scene,
                        clip,
                        cat.unwrap_or(""),
                        &s.objective.to_string(),
                    ])?;
                }
            }
        }
        run.emit_csv("summaries.csv", w)?;
        let dto = CoverageDto {
            rows: rows.iter().map(CoverageRowDto::from).collect(),
        };
        run.emit_json(COVERAGE, KIND_COVERAGE, &dto);
        Ok(())
    }

    fn evaluate(&self, run: &mut StageRun<'_>) -> Result<()> {
        let index = run.world()?;
        let clustering: ClusteringDto = run.read(CLUSTERING, KIND_CLUSTERING)?;
        let query: QueryDto = run.read(QUERY, KIND_QUERY)?;
        let classify: ClassifyDto = run.read(CLASSIFY, KIND_CLASSIFY)?;
        let coverage: CoverageDto = run.read(COVERAGE, KIND_COVERAGE)?;
        let corpora = run.corpora(&index)?;
        let foreign: Vec<String> = run
            .input_hashes
            .iter()
            .filter(|(_, h)| **h != self.hash)
            .map(|(rel, h)| format!("{rel} ({h})"))
            .collect();
        if !foreign.is_empty() {
            return Err(PipelineError::MixedConfig(format!(
                "current config is {}, but {} came from another",
                self.hash,
                foreign.join(", ")
            )));
        }

        let grid = corpora[0].grid;
        let scenes: Vec<StabilityScene<'_>> = corpora
            .iter()
            .map(|c| StabilityScene {
                scene_id: &c.scene_id,
                clips: &c.training_clips,
            })
            .collect();
        let st = &self.cfg.studies;
        let stability = alignment_stability(
            &scenes,
            &grid,
            st.stability_fraction,
            st.stability_runs,
            self.cfg.seed,
        )?;
        let mut w = csv_writer();
        w.write_record([
            "scene_a", "scene_b", "ref_s", "ref_dx", "ref_dy", "rmse_s", "rmse_dx", "rmse_dy",
        ])?;
        for p in &stability.pairs {
            let mut row = vec![p.scene_a.clone(), p.scene_b.clone()];
            row.extend(p.reference.iter().chain(&p.rmse).map(f64::to_string));
            w.write_record(&row)?;
        }
        run.emit_csv("stability.csv", w)?;

        let mut by_len: BTreeMap<(usize, String), (f64, usize)> = BTreeMap::new();
        for r in &coverage.rows {
            let e = by_len.entry((r.n_sum, r.method.clone())).or_default();
            e.0 += r.mean;
            e.1 += 1;
        }
        let cov: Vec<(usize, String, f64)> = by_len
            .into_iter()
            .map(|((n, m), (s, c))| (n, m, s / c as f64))
            .collect();
        let coverage_ordered = self.cfg.tasks.summary_lengths.iter().all(|&n| {
            let get = |m: &str| cov.iter().find(|r| r.0 == n && r.1 == m).map(|r| r.2);
            let chain: Vec<f64> = ["multi_kcenter", "single_kcenter", "random"]
                .into_iter()
                .filter_map(get)
                .collect();
            chain.windows(2).all(|p| p[0] >= p[1])
        });
        let report = ReportDto {
            num_scenes: corpora.len(),
            num_clusters: clustering.num_clusters,
            rand_index_vs_truth: clustering.rand_index_vs_truth,
            t_values: query.t_values.clone(),
            map_scm: query.scm.map.clone(),
            map_fm: query.fm.map.clone(),
            accuracy_scm: classify.scm.macro_average,
            accuracy_fm: classify.fm.macro_average,
            coverage: cov,
            stability_worst: stability.worst(),
            scm_map_above_fm: query.scm.map.iter().zip(&query.fm.map).all(|(a, b)| a > b),
            scm_accuracy_at_least_fm: classify.scm.macro_average >= classify.fm.macro_average,
            coverage_ordered,
        };
        run.emit_json(REPORT, KIND_REPORT, &report);
        Ok(())
    }

    fn sweep(&self, run: &mut StageRun<'_>) -> Result<()> {
        let index = run.world()?;
        let corpora = run.corpora(&index)?;
        let models = run.models(&index)?;
        let (aff, _) = run.affinity()?;
        let clustering = run.clustering()?;
        let lda = self.cfg.lda_config();
        let k_grid = &self.cfg.tasks.k_grid;
        let rows = self
            .cfg
            .studies
            .sweep_coeffs
            .par_iter()
            .map(|&c| {
                stb_sweep(&corpora, &models, &aff, &clustering, &[c], &lda, k_grid)
                    .map(|mut r| r.remove(0))
            })
            .collect::<scenemesh_core::Result<Vec<_>>>()?;
        let mut w = csv_writer();
        w.write_record(["coeff", "scm_accuracy", "fm_accuracy"])?;
        for r in &rows {
            w.write_record([r.coeff.to_string(), r.scm.to_string(), r.fm.to_string()])?;
        }
        run.emit_csv("sweep.csv", w)
    }
}

/// Runs `stage` on a thread pool of `jobs` workers (0 picks the default).
pub fn run_with_jobs(pipeline: &Pipeline, stage: Stage, jobs: usize) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| PipelineError::Config(format!("cannot start {jobs} workers: {e}")))?;
    pool.install(|| pipeline.run(stage))
}
