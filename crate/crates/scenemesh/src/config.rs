//! Pipeline configuration: JSON file plus command line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use scenemesh_core::clustering::{ClusterMode, SpectralConfig};
use scenemesh_core::experiment::{CoverageConfig, ExperimentConfig, SummaryMethod, SummaryScope};
use scenemesh_core::relatedness::TauPolicy;
use scenemesh_core::synth::SyntheticWorldSpec;
use scenemesh_core::LdaConfig;

use crate::error::{PipelineError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum WorldPreset {
    /// Two clusters of three scenes with lookalike corridors across clusters.
    Demo,
    /// Three clusters of three scenes.
    ThreeCluster,
    /// One cluster of three scenes.
    SmallCluster,
    /// Two clusters of two scenes with many words per clip.
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub preset: WorldPreset,
    pub cell_pixels: usize,
    pub directions: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            preset: WorldPreset::Demo,
            cell_pixels: 5,
            directions: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaSettings {
    pub k_local: usize,
    pub max_em_iters: usize,
    pub e_step_iters: usize,
    pub e_step_tol: f64,
    pub tol: f64,
    pub eta: f64,
}

impl Default for LdaSettings {
    fn default() -> Self {
        let d = LdaConfig::default();
        Self {
            k_local: 15,
            max_em_iters: d.max_em_iters,
            e_step_iters: d.e_step_iters,
            e_step_tol: d.e_step_tol,
            tol: d.tol,
            eta: d.eta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauSetting {
    Percentile(f64),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSetting {
    Auto,
    Fixed(usize),
}

impl From<ModeSetting> for ClusterMode {
    fn from(m: ModeSetting) -> Self {
        match m {
            ModeSetting::Auto => ClusterMode::Auto,
            ModeSetting::Fixed(c) => ClusterMode::Fixed(c),
        }
    }
}

impl From<ClusterMode> for ModeSetting {
    fn from(m: ClusterMode) -> Self {
        match m {
            ClusterMode::Auto => ModeSetting::Auto,
            ClusterMode::Fixed(c) => ModeSetting::Fixed(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringSettings {
    pub tau: TauSetting,
    pub mode: ModeSetting,
    pub local_scale_neighbor: usize,
    pub kmeans_restarts: usize,
    pub max_clusters: usize,
    pub cost_margin: f64,
    pub coeff: usize,
}

impl Default for ClusteringSettings {
    fn default() -> Self {
        let s = SpectralConfig::default();
        Self {
            tau: TauSetting::Percentile(25.0),
            mode: ModeSetting::Auto,
            local_scale_neighbor: s.local_scale_neighbor,
            kmeans_restarts: s.kmeans_restarts,
            max_clusters: s.max_clusters,
            cost_margin: s.cost_margin,
            coeff: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSetting {
    MultiKcenter,
    SingleKcenter,
    Random,
    Ncut,
}

impl From<MethodSetting> for SummaryMethod {
    fn from(m: MethodSetting) -> Self {
        match m {
            MethodSetting::MultiKcenter => SummaryMethod::MultiSceneKcenter,
            MethodSetting::SingleKcenter => SummaryMethod::SingleSceneKcenter,
            MethodSetting::Random => SummaryMethod::Random,
            MethodSetting::Ncut => SummaryMethod::Ncut,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScopeSetting {
    WithinCluster,
    AcrossClusters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSettings {
    pub k_grid: Vec<usize>,
    pub t_values: Vec<usize>,
    /// Query pools also hold the other clips of the query's own scene.
    pub include_own_scene: bool,
    pub summary_lengths: Vec<usize>,
    pub summary_seeds: usize,
    pub summary_methods: Vec<MethodSetting>,
    pub summary_scope: ScopeSetting,
}

impl Default for TaskSettings {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        Self {
            k_grid: e.k_grid,
            t_values: e.t_values,
            include_own_scene: false,
            summary_lengths: e.coverage.lengths,
            summary_seeds: e.coverage.seeds,
            summary_methods: vec![
                MethodSetting::MultiKcenter,
                MethodSetting::SingleKcenter,
                MethodSetting::Random,
            ],
            summary_scope: ScopeSetting::WithinCluster,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySettings {
    pub stability_runs: usize,
    pub stability_fraction: f64,
    pub sweep_coeffs: Vec<usize>,
}

impl Default for StudySettings {
    fn default() -> Self {
        Self {
            stability_runs: 20,
            stability_fraction: 0.5,
            sweep_coeffs: (3..=10).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Directory holding every artifact of a run. Not part of the config hash.
    pub run_dir: PathBuf,
    pub seed: u64,
    pub world: WorldConfig,
    pub lda: LdaSettings,
    pub clustering: ClusteringSettings,
    pub tasks: TaskSettings,
    pub studies: StudySettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            run_dir: PathBuf::from("run"),
            seed: 0,
            world: WorldConfig::default(),
            lda: LdaSettings::default(),
            clustering: ClusteringSettings::default(),
            tasks: TaskSettings::default(),
            studies: StudySettings::default(),
        }
    }
}

/// Command line values that replace config fields when present.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub run_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub preset: Option<WorldPreset>,
    pub k_local: Option<usize>,
    pub coeff: Option<usize>,
    pub clusters: Option<ModeSetting>,
    pub summary_seeds: Option<usize>,
    pub stability_runs: Option<usize>,
}

fn check(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(PipelineError::Config(msg.into()))
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| PipelineError::io(path, e))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.run_dir {
            self.run_dir = v.clone();
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.preset {
            self.world.preset = v;
        }
        if let Some(v) = o.k_local {
            self.lda.k_local = v;
        }
        if let Some(v) = o.coeff {
            self.clustering.coeff = v;
        }
        if let Some(v) = o.clusters {
            self.clustering.mode = v;
        }
        if let Some(v) = o.summary_seeds {
            self.tasks.summary_seeds = v;
        }
        if let Some(v) = o.stability_runs {
            self.studies.stability_runs = v;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.world;
        check(w.cell_pixels >= 1, "world.cell_pixels must be at least 1")?;
        check(w.directions >= 2, "world.directions must be at least 2")?;
        let l = &self.lda;
        check(l.k_local >= 1, "lda.k_local must be at least 1")?;
        check(
            l.max_em_iters >= 1 && l.e_step_iters >= 1,
            "lda iteration counts must be positive",
        )?;
        check(
            l.tol > 0.0 && l.e_step_tol > 0.0 && l.eta > 0.0,
            "lda tolerances and eta must be positive",
        )?;
        let c = &self.clustering;
        match c.tau {
            TauSetting::Percentile(p) => {
                check(p > 0.0 && p <= 100.0, "tau percentile must lie in (0, 100]")?
            }
            TauSetting::Fixed(t) => check(t > 0.0 && t.is_finite(), "fixed tau must be positive")?,
        }
        if let ModeSetting::Fixed(n) = c.mode {
            check(n >= 1, "a fixed cluster count must be at least 1")?;
        }
        check(
            c.local_scale_neighbor >= 1,
            "local_scale_neighbor must be at least 1",
        )?;
        check(c.kmeans_restarts >= 1, "kmeans_restarts must be at least 1")?;
        check(c.max_clusters >= 2, "max_clusters must be at least 2")?;
        check(c.cost_margin >= 0.0, "cost_margin must be non-negative")?;
        check(c.coeff >= 1, "coeff must be at least 1")?;
        let t = &self.tasks;
        check(
            !t.k_grid.is_empty() && t.k_grid.iter().all(|&k| k >= 1),
            "k_grid needs positive values",
        )?;
        check(
            !t.t_values.is_empty() && t.t_values.iter().all(|&v| v >= 1),
            "t_values needs positive values",
        )?;
        check(
            !t.summary_lengths.is_empty() && t.summary_lengths.iter().all(|&v| v >= 1),
            "summary_lengths needs positive values",
        )?;
        check(t.summary_seeds >= 1, "summary_seeds must be at least 1")?;
        check(
            !t.summary_methods.is_empty(),
            "summary_methods must not be empty",
        )?;
        let s = &self.studies;
        check(s.stability_runs >= 1, "stability_runs must be at least 1")?;
        check(
            s.stability_fraction > 0.0 && s.stability_fraction <= 1.0,
            "stability_fraction must lie in (0, 1]",
        )?;
        check(
            !s.sweep_coeffs.is_empty() && s.sweep_coeffs.iter().all(|&v| v >= 1),
            "sweep_coeffs needs positive values",
        )?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON of everything except `run_dir`.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("run_dir");
        }
        let bytes = serde_json::to_vec(&value).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn world_spec(&self) -> SyntheticWorldSpec {
        let mut spec = match self.world.preset {
            WorldPreset::Demo => SyntheticWorldSpec::demo(self.seed),
            WorldPreset::ThreeCluster => SyntheticWorldSpec::three_cluster(self.seed),
            WorldPreset::SmallCluster => SyntheticWorldSpec::small_cluster(self.seed),
            WorldPreset::Dense => SyntheticWorldSpec::dense(self.seed),
        };
        spec.grid.cell_pixels = self.world.cell_pixels;
        spec.grid.directions = self.world.directions;
        spec
    }

    pub fn lda_config(&self) -> LdaConfig {
        LdaConfig {
            max_em_iters: self.lda.max_em_iters,
            e_step_iters: self.lda.e_step_iters,
            e_step_tol: self.lda.e_step_tol,
            tol: self.lda.tol,
            seed: self.seed,
            eta: self.lda.eta,
        }
    }

    pub fn tau_policy(&self) -> TauPolicy {
        match self.clustering.tau {
            TauSetting::Percentile(p) => TauPolicy::Percentile(p),
            TauSetting::Fixed(t) => TauPolicy::Fixed(t),
        }
    }

    pub fn spectral_config(&self) -> SpectralConfig {
        let c = &self.clustering;
        SpectralConfig {
            local_scale_neighbor: c.local_scale_neighbor,
            kmeans_restarts: c.kmeans_restarts,
            seed: self.seed,
            max_clusters: c.max_clusters,
            cost_margin: c.cost_margin,
        }
    }

    pub fn coverage_config(&self) -> CoverageConfig {
        let t = &self.tasks;
        CoverageConfig {
            lengths: t.summary_lengths.clone(),
            seeds: t.summary_seeds,
            master_seed: self.seed,
            methods: t.summary_methods.iter().map(|&m| m.into()).collect(),
            scope: match t.summary_scope {
                ScopeSetting::WithinCluster => SummaryScope::WithinCluster,
                ScopeSetting::AcrossClusters => SummaryScope::AcrossClusters,
            },
        }
    }

    pub fn experiment_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            k_local: self.lda.k_local,
            lda: self.lda_config(),
            tau: self.tau_policy(),
            mode: self.clustering.mode.into(),
            spectral: self.spectral_config(),
            coeff: self.clustering.coeff,
            k_grid: self.tasks.k_grid.clone(),
            t_values: self.tasks.t_values.clone(),
            coverage: self.coverage_config(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        let back: PipelineConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.lda.k_local, 15);
        assert_eq!(cfg.clustering.coeff, 5);
        assert_eq!(cfg.world.cell_pixels, 5);
        assert_eq!(cfg.world.directions, 8);
        assert_eq!(cfg.tasks.summary_seeds, 50);
        assert_eq!(cfg.studies.stability_runs, 20);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: PipelineConfig =
            serde_json::from_str(r#"{"seed": 4, "clustering": {"mode": {"fixed": 2}}}"#).unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.clustering.mode, ModeSetting::Fixed(2));
        assert_eq!(cfg.lda, LdaSettings::default());
    }

    #[test]
    fn unknown_field_is_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"sede": 4}"#).is_err());
    }

    #[test]
    fn hash_ignores_run_dir_only() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.run_dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.apply(&Overrides {
            seed: Some(9),
            ..Overrides::default()
        });
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn invalid_values_are_reported() {
        let mut cfg = PipelineConfig::default();
        cfg.tasks.t_values.clear();
        assert!(matches!(cfg.validate(), Err(PipelineError::Config(_))));
        let mut cfg = PipelineConfig::default();
        cfg.clustering.tau = TauSetting::Percentile(0.0);
        assert!(cfg.validate().is_err());
    }
}
