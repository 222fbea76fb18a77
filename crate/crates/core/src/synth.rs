//! Seeded synthetic multi-scene worlds with planted activities, behaviours
//! and scene clusters.
//!
//! Each scene cluster owns a set of shared corridor activities defined in a
//! canonical frame. Every member scene sees them through its own similarity
//! transform and adds a few activities of its own. A behaviour is a fixed
//! set of activities: the cluster's shared behaviours combine shared
//! activities, and each unique activity forms a scene-specific behaviour with
//! one shared activity. Clips mix the activities of one behaviour with
//! Dirichlet weights and uniform noise.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::alignment::SceneTransform;
use crate::corpus::{BehaviorLabel, ClipDocument, GridSpec, SceneCorpus};
use crate::error::{Error, Result};
use crate::math::fnv1a;

/// A straight corridor from `start` to `end` (cell coordinates) of the given
/// width; motion runs from `start` towards `end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivityTemplate {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub width: f64,
}

impl ActivityTemplate {
    pub fn mapped(&self, t: &SceneTransform) -> Self {
        Self {
            start: t.apply(self.start),
            end: t.apply(self.end),
            width: self.width * t.scale,
        }
    }

    /// Word distribution of the corridor: a Gaussian profile around the
    /// centreline, with `leak` of the mass spread to the two neighbouring
    /// direction bins.
    pub fn distribution(&self, grid: &GridSpec, leak: f64) -> Result<Vec<f64>> {
        let dir = [self.end[0] - self.start[0], self.end[1] - self.start[1]];
        let len2 = dir[0] * dir[0] + dir[1] * dir[1];
        if !(len2 > 0.0) || !(self.width > 0.0) {
            return Err(Error::domain("activity needs a positive length and width"));
        }
        let d = grid.direction_bin(dir);
        let nm = grid.directions;
        let mut out = vec![0.0; grid.vocab_size()];
        let mut total = 0.0;
        for cy in 0..grid.cells_y {
            for cx in 0..grid.cells_x {
                let p = [cx as f64 - self.start[0], cy as f64 - self.start[1]];
                let u = ((p[0] * dir[0] + p[1] * dir[1]) / len2).clamp(0.0, 1.0);
                let q = [p[0] - u * dir[0], p[1] - u * dir[1]];
                let dist2 = q[0] * q[0] + q[1] * q[1];
                if dist2 > 9.0 * self.width * self.width {
                    continue;
                }
                let w = libm::exp(-dist2 / (2.0 * self.width * self.width));
                if nm == 1 {
                    out[grid.index_unchecked(cx, cy, 0)] += w;
                } else {
                    out[grid.index_unchecked(cx, cy, d)] += w * (1.0 - leak);
                    out[grid.index_unchecked(cx, cy, (d + 1) % nm)] += w * leak / 2.0;
                    out[grid.index_unchecked(cx, cy, (d + nm - 1) % nm)] += w * leak / 2.0;
                }
                total += w;
            }
        }
        if total == 0.0 {
            return Err(Error::domain("activity lies outside the grid"));
        }
        out.iter_mut().for_each(|v| *v /= total);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    pub num_scenes: usize,
    pub shared_activities: Vec<ActivityTemplate>,
    pub unique_activities_per_scene: usize,
    /// Each behaviour is a set of indices into `shared_activities`.
    pub behaviors: Vec<Vec<usize>>,
    /// Relative frequency of each shared behaviour.
    pub behavior_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorldSpec {
    pub seed: u64,
    pub grid: GridSpec,
    pub clusters: Vec<ClusterSpec>,
    /// Scene scale factors are drawn uniformly from this range.
    pub scale_range: (f64, f64),
    /// Scene shifts (cells) are drawn uniformly from `[-max_shift, max_shift]`.
    pub max_shift: f64,
    pub training_clips: usize,
    pub semantic_clips: usize,
    pub words_per_clip: usize,
    pub noise_rate: f64,
    /// Dirichlet concentration of the per-clip activity weights.
    pub concentration: f64,
    /// Probability that a clip shows one of its scene's unique behaviours.
    pub unique_activity_rate: f64,
    /// Fraction of each activity's mass on the two neighbouring directions.
    pub direction_leak: f64,
    /// Unique activity length as a fraction of the grid width.
    pub unique_length: (f64, f64),
}

/// One planted activity as realized in one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedActivity {
    pub tag: String,
    pub shared: bool,
    pub distribution: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneTruth {
    pub scene_id: String,
    pub cluster: usize,
    /// Canonical frame to scene cells.
    pub transform: SceneTransform,
    pub activities: Vec<PlantedActivity>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldGroundTruth {
    pub scenes: Vec<SceneTruth>,
}

impl WorldGroundTruth {
    pub fn cluster_labels(&self) -> Vec<usize> {
        self.scenes.iter().map(|s| s.cluster).collect()
    }

    pub fn scene(&self, scene_id: &str) -> Option<&SceneTruth> {
        self.scenes.iter().find(|s| s.scene_id == scene_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    pub scenes: Vec<SceneCorpus>,
    pub truth: WorldGroundTruth,
}

pub fn scene_name(index: usize) -> String {
    format!("scene_{index:02}")
}

fn random_segment<R: Rng>(
    rng: &mut R,
    grid: &GridSpec,
    length: (f64, f64),
    width: f64,
) -> ActivityTemplate {
    let (w, h) = (grid.cells_x as f64, grid.cells_y as f64);
    let margin = 1.0;
    loop {
        let start = [
            rng.random_range(margin..w - 1.0 - margin),
            rng.random_range(margin..h - 1.0 - margin),
        ];
        let angle = rng.random_range(0.0..2.0 * PI);
        let len = rng.random_range(length.0..length.1) * w.min(h);
        let end = [
            start[0] + len * libm::cos(angle),
            start[1] + len * libm::sin(angle),
        ];
        if end[0] >= margin
            && end[0] <= w - 1.0 - margin
            && end[1] >= margin
            && end[1] <= h - 1.0 - margin
        {
            return ActivityTemplate { start, end, width };
        }
    }
}

/// Overlapping windows over a shuffled activity order so that every
/// activity belongs to some behaviour.
fn window_behaviors<R: Rng>(
    rng: &mut R,
    num_activities: usize,
    num_behaviors: usize,
    size: usize,
) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..num_activities).collect();
    for i in (1..perm.len()).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    (0..num_behaviors)
        .map(|b| {
            let start = b * num_activities / num_behaviors;
            let mut set: Vec<usize> = (0..size.min(num_activities))
                .map(|i| perm[(start + i) % num_activities])
                .collect();
            set.sort_unstable();
            set
        })
        .collect()
}

/// Layout parameters for [`SyntheticWorldSpec::random`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldLayout {
    pub grid: GridSpec,
    pub clusters: usize,
    pub scenes_per_cluster: usize,
    pub shared_activities: usize,
    pub unique_activities: usize,
    pub behaviors: usize,
    pub activities_per_behavior: usize,
    pub activity_length: (f64, f64),
    pub activity_width: f64,
    /// Number of shared corridors every later cluster copies (jittered by up
    /// to half a cell) from cluster 0. The copies keep their own tags.
    pub borrowed_activities: usize,
}

impl SyntheticWorldSpec {
    /// Random corridor layouts for every cluster, drawn from `seed`.
    pub fn random(seed: u64, layout: WorldLayout) -> Self {
        let mut first: Vec<ActivityTemplate> = Vec::new();
        let clusters = (0..layout.clusters)
            .map(|c| {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(seed ^ fnv1a(format!("cluster{c}").as_bytes()));
                let borrowed = if c == 0 {
                    0
                } else {
                    layout.borrowed_activities.min(first.len())
                };
                let mut shared_activities: Vec<ActivityTemplate> = first[..borrowed]
                    .iter()
                    .map(|a| {
                        let mut j = || rng.random_range(-0.5..0.5);
                        ActivityTemplate {
                            start: [a.start[0] + j(), a.start[1] + j()],
                            end: [a.end[0] + j(), a.end[1] + j()],
                            width: a.width,
                        }
                    })
                    .collect();
                while shared_activities.len() < layout.shared_activities {
                    shared_activities.push(random_segment(
                        &mut rng,
                        &layout.grid,
                        layout.activity_length,
                        layout.activity_width,
                    ));
                }
                if c == 0 {
                    first = shared_activities.clone();
                }
                let behaviors = window_behaviors(
                    &mut rng,
                    layout.shared_activities,
                    layout.behaviors,
                    layout.activities_per_behavior,
                );
                ClusterSpec {
                    num_scenes: layout.scenes_per_cluster,
                    shared_activities,
                    unique_activities_per_scene: layout.unique_activities,
                    behavior_weights: (0..behaviors.len()).map(|b| 1.0 / (b + 1) as f64).collect(),
                    behaviors,
                }
            })
            .collect();
        Self {
            seed,
            grid: layout.grid,
            clusters,
            scale_range: (0.85, 1.15),
            max_shift: 1.0,
            training_clips: 150,
            semantic_clips: 60,
            words_per_clip: 80,
            noise_rate: 0.03,
            concentration: 2.0,
            unique_activity_rate: 0.25,
            direction_leak: 0.1,
            unique_length: (0.25, 0.4),
        }
    }

    /// Two clusters of three scenes, twelve shared and one unique
    /// activity per scene; four corridors of the second cluster retrace
    /// corridors of the first.
    pub fn demo(seed: u64) -> Self {
        let mut spec = Self::random(
            seed,
            WorldLayout {
                grid: GridSpec {
                    cells_x: 12,
                    cells_y: 12,
                    directions: 8,
                    cell_pixels: 5,
                },
                clusters: 2,
                scenes_per_cluster: 3,
                shared_activities: 12,
                unique_activities: 1,
                behaviors: 8,
                activities_per_behavior: 3,
                activity_length: (0.35, 0.7),
                activity_width: 0.6,
                borrowed_activities: 4,
            },
        );
        spec.unique_activity_rate = 0.1;
        spec
    }

    /// One cluster of three scenes with three shared and one unique activity
    /// per scene.
    pub fn small_cluster(seed: u64) -> Self {
        Self::random(
            seed,
            WorldLayout {
                grid: GridSpec {
                    cells_x: 12,
                    cells_y: 12,
                    directions: 8,
                    cell_pixels: 5,
                },
                clusters: 1,
                scenes_per_cluster: 3,
                shared_activities: 3,
                unique_activities: 1,
                behaviors: 3,
                activities_per_behavior: 2,
                activity_length: (0.35, 0.7),
                activity_width: 0.6,
                borrowed_activities: 0,
            },
        )
    }

    /// Three clusters of three scenes, five shared and one unique activity
    /// per scene.
    pub fn three_cluster(seed: u64) -> Self {
        let mut spec = Self::random(
            seed,
            WorldLayout {
                grid: GridSpec {
                    cells_x: 12,
                    cells_y: 12,
                    directions: 8,
                    cell_pixels: 5,
                },
                clusters: 3,
                scenes_per_cluster: 3,
                shared_activities: 5,
                unique_activities: 1,
                behaviors: 4,
                activities_per_behavior: 2,
                activity_length: (0.35, 0.7),
                activity_width: 0.6,
                borrowed_activities: 0,
            },
        );
        spec.training_clips = 100;
        spec.semantic_clips = 20;
        spec.words_per_clip = 60;
        spec
    }

    /// Two clusters of two scenes with many long clips, for alignment
    /// stability.
    pub fn dense(seed: u64) -> Self {
        let mut spec = Self::random(
            seed,
            WorldLayout {
                grid: GridSpec {
                    cells_x: 16,
                    cells_y: 16,
                    directions: 8,
                    cell_pixels: 5,
                },
                clusters: 2,
                scenes_per_cluster: 2,
                shared_activities: 8,
                unique_activities: 1,
                behaviors: 1,
                activities_per_behavior: 8,
                activity_length: (0.35, 0.7),
                activity_width: 0.8,
                borrowed_activities: 0,
            },
        );
        spec.training_clips = 400;
        spec.semantic_clips = 0;
        spec.words_per_clip = 400;
        spec.concentration = 50.0;
        spec.unique_activity_rate = 0.0;
        spec.noise_rate = 0.0;
        spec
    }

    pub fn num_scenes(&self) -> usize {
        self.clusters.iter().map(|c| c.num_scenes).sum()
    }

    fn validate(&self) -> Result<()> {
        if self.clusters.is_empty() || self.num_scenes() == 0 {
            return Err(Error::domain("world needs at least one scene"));
        }
        for (c, cl) in self.clusters.iter().enumerate() {
            if cl.shared_activities.is_empty() && cl.unique_activities_per_scene == 0 {
                return Err(Error::domain(format!("cluster {c} has no activities")));
            }
            if cl
                .behaviors
                .iter()
                .flatten()
                .any(|&a| a >= cl.shared_activities.len())
            {
                return Err(Error::domain(format!(
                    "cluster {c} has a behaviour with an unknown activity"
                )));
            }
            if !cl.shared_activities.is_empty() && cl.behaviors.is_empty() {
                return Err(Error::domain(format!(
                    "cluster {c} has shared activities but no behaviours"
                )));
            }
            if cl.behavior_weights.len() != cl.behaviors.len()
                || cl.behavior_weights.iter().any(|w| !(*w > 0.0))
            {
                return Err(Error::domain(format!(
                    "cluster {c} needs one positive weight per behaviour"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.noise_rate)
            || !(0.0..=1.0).contains(&self.unique_activity_rate)
        {
            return Err(Error::domain("rates must lie in [0, 1]"));
        }
        if !(self.concentration > 0.0)
            || !(self.scale_range.0 > 0.0)
            || self.scale_range.0 > self.scale_range.1
        {
            return Err(Error::domain("invalid concentration or scale range"));
        }
        if self.words_per_clip == 0 {
            return Err(Error::domain("clips need at least one word"));
        }
        Ok(())
    }
}

/// Inverse-CDF sampler over a discrete distribution.
struct Sampler {
    cdf: Vec<f64>,
}

impl Sampler {
    fn new(p: &[f64]) -> Self {
        let mut acc = 0.0;
        let cdf = p
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        Self { cdf }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cdf.last().expect("non-empty");
        let u = rng.random_range(0.0..total);
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1)
    }
}

struct SceneGen<'a> {
    spec: &'a SyntheticWorldSpec,
    scene_id: String,
    cluster: &'a ClusterSpec,
    shared_behaviors: Option<Sampler>,
    /// Activity sets of the scene-specific behaviours.
    unique_behaviors: Vec<Vec<usize>>,
    samplers: Vec<Sampler>,
    /// Tags of shared then unique activities.
    tags: Vec<String>,
}

impl SceneGen<'_> {
    fn clip<R: Rng>(&self, rng: &mut R, clip_id: String) -> Result<(ClipDocument, BehaviorLabel)> {
        let active: &[usize] = match &self.shared_behaviors {
            Some(shared)
                if self.unique_behaviors.is_empty()
                    || !rng.random_bool(self.spec.unique_activity_rate) =>
            {
                &self.cluster.behaviors[shared.draw(rng)]
            }
            _ => &self.unique_behaviors[rng.random_range(0..self.unique_behaviors.len())],
        };
        let gamma = Gamma::new(self.spec.concentration, 1.0)
            .map_err(|_| Error::domain("invalid concentration"))?;
        let mut weights: Vec<f64> = active
            .iter()
            .map(|_| gamma.sample(rng).max(1e-12))
            .collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let mixture = Sampler::new(&weights);
        let nv = self.spec.grid.vocab_size();
        let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
        for _ in 0..self.spec.words_per_clip {
            let w = if rng.random_bool(self.spec.noise_rate) {
                rng.random_range(0..nv)
            } else {
                self.samplers[active[mixture.draw(rng)]].draw(rng)
            };
            *counts.entry(w).or_default() += 1;
        }
        let label = BehaviorLabel::from_tags(active.iter().map(|&a| self.tags[a].clone()));
        Ok((
            ClipDocument::from_counts(clip_id, self.scene_id.clone(), counts),
            label,
        ))
    }
}

/// Realizes every scene of the world. Identical specs give identical worlds.
pub fn generate_synthetic_world(spec: &SyntheticWorldSpec) -> Result<SyntheticWorld> {
    spec.validate()?;
    let grid = spec.grid;
    let centre = [
        (grid.cells_x as f64 - 1.0) / 2.0,
        (grid.cells_y as f64 - 1.0) / 2.0,
    ];
    let mut scenes = Vec::new();
    let mut truths = Vec::new();
    let mut index = 0;
    for (c, cluster) in spec.clusters.iter().enumerate() {
        for _ in 0..cluster.num_scenes {
            let scene_id = scene_name(index);
            index += 1;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ fnv1a(scene_id.as_bytes()));
            let s = if spec.scale_range.0 < spec.scale_range.1 {
                rng.random_range(spec.scale_range.0..spec.scale_range.1)
            } else {
                spec.scale_range.0
            };
            let mut shift = || {
                if spec.max_shift > 0.0 {
                    rng.random_range(-spec.max_shift..spec.max_shift)
                } else {
                    0.0
                }
            };
            let (sx, sy) = (shift(), shift());
            let transform = SceneTransform::new(
                s,
                0.0,
                centre[0] * (1.0 - s) + sx,
                centre[1] * (1.0 - s) + sy,
            )?;

            let mut activities = Vec::new();
            for (i, a) in cluster.shared_activities.iter().enumerate() {
                activities.push(PlantedActivity {
                    tag: format!("c{c}.a{i}"),
                    shared: true,
                    distribution: a
                        .mapped(&transform)
                        .distribution(&grid, spec.direction_leak)?,
                });
            }
            let unique_width = cluster.shared_activities.first().map_or(0.6, |a| a.width) * s;
            for j in 0..cluster.unique_activities_per_scene {
                let template = random_segment(&mut rng, &grid, spec.unique_length, unique_width);
                activities.push(PlantedActivity {
                    tag: format!("{scene_id}.u{j}"),
                    shared: false,
                    distribution: template.distribution(&grid, spec.direction_leak)?,
                });
            }

            let n_shared = cluster.shared_activities.len();
            let unique_behaviors = (0..cluster.unique_activities_per_scene)
                .map(|j| {
                    let mut set = vec![n_shared + j];
                    if n_shared > 0 {
                        set.insert(0, rng.random_range(0..n_shared));
                    }
                    set
                })
                .collect();
            let gen = SceneGen {
                spec,
                scene_id: scene_id.clone(),
                cluster,
                shared_behaviors: (!cluster.behaviors.is_empty())
                    .then(|| Sampler::new(&cluster.behavior_weights)),
                unique_behaviors,
                samplers: activities
                    .iter()
                    .map(|a| Sampler::new(&a.distribution))
                    .collect(),
                tags: activities.iter().map(|a| a.tag.clone()).collect(),
            };
            let mut training = Vec::with_capacity(spec.training_clips);
            for j in 0..spec.training_clips {
                training.push(gen.clip(&mut rng, format!("t{j:04}"))?.0);
            }
            let mut semantic = Vec::with_capacity(spec.semantic_clips);
            let mut annotations = BTreeMap::new();
            for j in 0..spec.semantic_clips {
                let (clip, label) = gen.clip(&mut rng, format!("q{j:04}"))?;
                annotations.insert(clip.clip_id.clone(), label);
                semantic.push(clip);
            }
            scenes.push(SceneCorpus::new(
                scene_id.clone(),
                grid,
                training,
                semantic,
                annotations,
            )?);
            truths.push(SceneTruth {
                scene_id,
                cluster: c,
                transform,
                activities,
            });
        }
    }
    Ok(SyntheticWorld {
        scenes,
        truth: WorldGroundTruth { scenes: truths },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::rand_index;

    #[test]
    fn deterministic() {
        let spec = SyntheticWorldSpec::three_cluster(5);
        let a = generate_synthetic_world(&spec).unwrap();
        let b = generate_synthetic_world(&spec).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_world(&SyntheticWorldSpec::three_cluster(6)).unwrap();
        assert_ne!(a.scenes[0].training_clips, c.scenes[0].training_clips);
    }

    #[test]
    fn three_by_three_truth() {
        let w = generate_synthetic_world(&SyntheticWorldSpec::three_cluster(1)).unwrap();
        let labels = w.truth.cluster_labels();
        assert_eq!(rand_index(&labels, &labels).unwrap(), 1.0);
        let mut sizes = [0; 3];
        for l in labels {
            sizes[l] += 1;
        }
        assert_eq!(sizes, [3, 3, 3]);
        for s in &w.truth.scenes {
            for a in &s.activities {
                assert!((a.distribution.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_activity_support() {
        let grid = GridSpec::new(10, 10, 8, 5).unwrap();
        let activity = ActivityTemplate {
            start: [2.0, 2.0],
            end: [7.0, 3.0],
            width: 0.6,
        };
        let spec = SyntheticWorldSpec {
            seed: 3,
            grid,
            clusters: vec![ClusterSpec {
                num_scenes: 1,
                shared_activities: vec![activity],
                unique_activities_per_scene: 0,
                behaviors: vec![vec![0]],
                behavior_weights: vec![1.0],
            }],
            scale_range: (1.0, 1.0),
            max_shift: 0.0,
            training_clips: 20,
            semantic_clips: 5,
            words_per_clip: 50,
            noise_rate: 0.0,
            concentration: 1.0,
            unique_activity_rate: 0.0,
            direction_leak: 0.1,
            unique_length: (0.2, 0.3),
        };
        let w = generate_synthetic_world(&spec).unwrap();
        let support = &w.truth.scenes[0].activities[0].distribution;
        for clip in w.scenes[0]
            .training_clips
            .iter()
            .chain(&w.scenes[0].semantic_clips)
        {
            assert!(clip.counts().iter().all(|&(v, _)| support[v] > 0.0));
            assert_eq!(clip.total(), 50);
        }
        let labels: Vec<_> = w.scenes[0]
            .annotations
            .values()
            .map(|l| l.category().clone())
            .collect();
        assert!(labels.iter().all(|c| c == &labels[0]));
    }

    #[test]
    fn equal_tag_sets_share_a_category() {
        let w = generate_synthetic_world(&SyntheticWorldSpec::demo(2)).unwrap();
        let mut by_tags: BTreeMap<Vec<String>, String> = BTreeMap::new();
        for s in &w.scenes {
            for l in s.annotations.values() {
                let tags: Vec<String> = l.tags().iter().cloned().collect();
                let cat = l.category().0.clone();
                assert_eq!(by_tags.entry(tags).or_insert_with(|| cat.clone()), &cat);
            }
        }
    }

    #[test]
    fn degenerate_spec_rejected() {
        let mut spec = SyntheticWorldSpec::demo(0);
        spec.clusters.clear();
        assert!(generate_synthetic_world(&spec).is_err());
        let mut spec = SyntheticWorldSpec::demo(0);
        spec.clusters[0].shared_activities.clear();
        spec.clusters[0].unique_activities_per_scene = 0;
        assert!(generate_synthetic_world(&spec).is_err());
    }

    #[test]
    fn corridor_direction_matches_motion() {
        let grid = GridSpec::new(10, 10, 8, 5).unwrap();
        let a = ActivityTemplate {
            start: [1.0, 5.0],
            end: [8.0, 5.0],
            width: 0.6,
        };
        let dist = a.distribution(&grid, 0.0).unwrap();
        let mass_d0: f64 = (0..grid.vocab_size())
            .filter(|v| v % 8 == 0)
            .map(|v| dist[v])
            .sum();
        assert!((mass_d0 - 1.0).abs() < 1e-12);
    }
}
