//! Retrieval, classification, summarization and clustering metrics, plus
//! the alignment subsample-stability study.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::alignment::{compose_a_to_b, estimate_normalization_from_clips, SceneTransform};
use crate::corpus::{CategoryId, ClipDocument, GridSpec};
use crate::error::{Error, Result};
use crate::math::fnv1a;
use crate::tasks::RankedRetrieval;

/// One query's ranking reduced to relevance flags.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgedQuery {
    pub category: CategoryId,
    pub relevant: Vec<bool>,
}

/// Marks every hit that shares the query's category. Fails on an unlabeled
/// pool clip.
pub fn judge_retrieval<'a>(
    retrieval: &RankedRetrieval,
    query_category: &CategoryId,
    label_of: impl Fn(&str, &str) -> Option<&'a CategoryId>,
) -> Result<JudgedQuery> {
    let relevant = retrieval
        .hits
        .iter()
        .map(|h| {
            label_of(&h.scene_id, &h.clip_id)
                .map(|c| c == query_category)
                .ok_or_else(|| {
                    Error::domain(alloc::format!(
                        "pool clip {}/{} is unlabeled",
                        h.scene_id,
                        h.clip_id
                    ))
                })
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(JudgedQuery {
        category: query_category.clone(),
        relevant,
    })
}

pub fn precision_at(relevant: &[bool], t: usize) -> f64 {
    if t == 0 {
        return 0.0;
    }
    relevant.iter().take(t).filter(|&&r| r).count() as f64 / t as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapCurve {
    pub t_values: Vec<usize>,
    pub map: Vec<f64>,
    /// Per category: mean precision@T over its queries, aligned with `t_values`.
    pub per_category: Vec<(CategoryId, Vec<f64>)>,
    /// Categories dropped because no query of theirs had a relevant clip in
    /// its pool.
    pub excluded: Vec<CategoryId>,
}

/// Mean over categories of the mean precision@T of their queries. Queries
/// with no relevant clip in their pool are skipped.
pub fn map_at_t(queries: &[JudgedQuery], t_values: &[usize]) -> Result<MapCurve> {
    if t_values.contains(&0) {
        return Err(Error::domain("T must be at least 1"));
    }
    let mut by_cat: BTreeMap<&CategoryId, Vec<&JudgedQuery>> = BTreeMap::new();
    let mut seen: BTreeSet<&CategoryId> = BTreeSet::new();
    for q in queries {
        seen.insert(&q.category);
        if q.relevant.iter().any(|&r| r) {
            by_cat.entry(&q.category).or_default().push(q);
        }
    }
    let excluded: Vec<CategoryId> = seen
        .iter()
        .filter(|c| !by_cat.contains_key(*c))
        .map(|c| (*c).clone())
        .collect();
    for c in &excluded {
        log::warn!("category {c} has no relevant clips in any pool; excluded from MAP");
    }
    let per_category: Vec<(CategoryId, Vec<f64>)> = by_cat
        .iter()
        .map(|(cat, qs)| {
            let ap = t_values
                .iter()
                .map(|&t| {
                    qs.iter().map(|q| precision_at(&q.relevant, t)).sum::<f64>() / qs.len() as f64
                })
                .collect();
            ((*cat).clone(), ap)
        })
        .collect();
    let map = (0..t_values.len())
        .map(|i| {
            if per_category.is_empty() {
                0.0
            } else {
                per_category.iter().map(|(_, ap)| ap[i]).sum::<f64>() / per_category.len() as f64
            }
        })
        .collect();
    Ok(MapCurve {
        t_values: t_values.to_vec(),
        map,
        per_category,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub per_category: Vec<(CategoryId, f64)>,
    pub macro_average: f64,
}

/// Per-category recall over the categories present in `truth` and their
/// unweighted mean. Predictions must come from `label_space`.
pub fn classification_accuracy(
    truth: &[CategoryId],
    predicted: &[CategoryId],
    label_space: &BTreeSet<CategoryId>,
) -> Result<AccuracyReport> {
    if truth.len() != predicted.len() {
        return Err(Error::domain("truth and predictions differ in length"));
    }
    if let Some(p) = predicted.iter().find(|p| !label_space.contains(*p)) {
        return Err(Error::domain(alloc::format!(
            "prediction {p} is not in the label space"
        )));
    }
    let mut per: BTreeMap<&CategoryId, (usize, usize)> = BTreeMap::new();
    for (t, p) in truth.iter().zip(predicted) {
        let e = per.entry(t).or_default();
        e.1 += 1;
        if t == p {
            e.0 += 1;
        }
    }
    let per_category: Vec<(CategoryId, f64)> = per
        .iter()
        .map(|(c, &(hit, n))| ((*c).clone(), hit as f64 / n as f64))
        .collect();
    let macro_average = if per_category.is_empty() {
        0.0
    } else {
        per_category.iter().map(|p| p.1).sum::<f64>() / per_category.len() as f64
    };
    Ok(AccuracyReport {
        per_category,
        macro_average,
    })
}

/// Fraction of the pool's categories that appear in the summary.
pub fn behavior_coverage<'a>(
    summary: impl IntoIterator<Item = &'a CategoryId>,
    pool: impl IntoIterator<Item = &'a CategoryId>,
) -> f64 {
    let pool: BTreeSet<&CategoryId> = pool.into_iter().collect();
    if pool.is_empty() {
        return 0.0;
    }
    let covered: BTreeSet<&CategoryId> = summary.into_iter().filter(|c| pool.contains(c)).collect();
    covered.len() as f64 / pool.len() as f64
}

/// Fraction of element pairs on which two partitions agree (both together
/// or both apart).
pub fn rand_index(p1: &[usize], p2: &[usize]) -> Result<f64> {
    if p1.len() != p2.len() {
        return Err(Error::domain("partitions cover different element sets"));
    }
    let n = p1.len();
    if n < 2 {
        return Ok(1.0);
    }
    let mut agree = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            if (p1[i] == p1[j]) == (p2[i] == p2[j]) {
                agree += 1;
            }
        }
    }
    Ok(agree as f64 / (n * (n - 1) / 2) as f64)
}

/// Rand index between partitions given as `element -> cluster` maps.
pub fn rand_index_by_id(p1: &BTreeMap<String, usize>, p2: &BTreeMap<String, usize>) -> Result<f64> {
    if p1.len() != p2.len() || p1.keys().zip(p2.keys()).any(|(a, b)| a != b) {
        return Err(Error::domain("partitions cover different element sets"));
    }
    let a: Vec<usize> = p1.values().copied().collect();
    let b: Vec<usize> = p2.values().copied().collect();
    rand_index(&a, &b)
}

/// `(s, dx, dy)` of a rotation-free transform.
pub fn transform_params(t: &SceneTransform) -> [f64; 3] {
    [t.scale, t.tx, t.ty]
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairStability {
    pub scene_a: String,
    pub scene_b: String,
    /// `(s, dx, dy)` of `T^{a→b}` estimated from all training clips.
    pub reference: [f64; 3],
    /// RMSE of `(s, dx, dy)` over the subsample runs.
    pub rmse: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub runs: usize,
    pub fraction: f64,
    pub pairs: Vec<PairStability>,
}

impl StabilityReport {
    /// Worst RMSE per parameter over all pairs.
    pub fn worst(&self) -> [f64; 3] {
        let mut w = [0.0f64; 3];
        for p in &self.pairs {
            for (wi, r) in w.iter_mut().zip(p.rmse) {
                *wi = wi.max(r);
            }
        }
        w
    }
}

/// Scene input for the stability study.
pub struct StabilityScene<'a> {
    pub scene_id: &'a str,
    pub clips: &'a [ClipDocument],
}

fn subsample_normalization(
    scene: &StabilityScene<'_>,
    grid: &GridSpec,
    fraction: f64,
    seed: u64,
    run: usize,
) -> Result<SceneTransform> {
    let n = scene.clips.len();
    let m = ((n as f64 * fraction) as usize).clamp(1, n);
    for attempt in 0..10u64 {
        let stream = seed ^ fnv1a(scene.scene_id.as_bytes()) ^ ((run as u64) << 32) ^ attempt;
        let mut rng = ChaCha8Rng::seed_from_u64(stream);
        let picked: Vec<ClipDocument> = sample(&mut rng, n, m)
            .iter()
            .map(|i| scene.clips[i].clone())
            .collect();
        match estimate_normalization_from_clips(scene.scene_id, &picked, grid) {
            Ok(t) => return Ok(t),
            Err(Error::DegenerateScene { .. }) => {
                log::warn!(
                    "degenerate subsample of {} (run {run}); resampling",
                    scene.scene_id
                );
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::DegenerateScene {
        scene: scene.scene_id.into(),
        reason: "every subsample was degenerate".into(),
    })
}

/// Re-estimates every scene's normalization on `runs` random subsamples of
/// its training clips and reports, per scene pair `a < b`, the RMSE of the
/// composed `T^{a→b}` parameters around the full-data estimate.
pub fn alignment_stability(
    scenes: &[StabilityScene<'_>],
    grid: &GridSpec,
    fraction: f64,
    runs: usize,
    seed: u64,
) -> Result<StabilityReport> {
    if scenes.len() < 2 {
        return Err(Error::domain("stability needs at least two scenes"));
    }
    if !(fraction > 0.0 && fraction <= 1.0) || runs == 0 {
        return Err(Error::domain(
            "fraction must lie in (0, 1] and runs must be positive",
        ));
    }
    let full = scenes
        .iter()
        .map(|s| estimate_normalization_from_clips(s.scene_id, s.clips, grid))
        .collect::<Result<Vec<_>>>()?;
    let mut subs: Vec<Vec<SceneTransform>> = Vec::with_capacity(runs);
    for run in 0..runs {
        subs.push(
            scenes
                .iter()
                .map(|s| subsample_normalization(s, grid, fraction, seed, run))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let mut pairs = Vec::new();
    for a in 0..scenes.len() {
        for b in a + 1..scenes.len() {
            let reference = transform_params(&compose_a_to_b(&full[a], &full[b])?);
            let mut sq = [0.0; 3];
            for run in &subs {
                let p = transform_params(&compose_a_to_b(&run[a], &run[b])?);
                for i in 0..3 {
                    sq[i] += (p[i] - reference[i]) * (p[i] - reference[i]);
                }
            }
            let rmse = sq.map(|s| libm::sqrt(s / runs as f64));
            pairs.push(PairStability {
                scene_a: scenes[a].scene_id.into(),
                scene_b: scenes[b].scene_id.into(),
                reference,
                rmse,
            });
        }
    }
    Ok(StabilityReport {
        runs,
        fraction,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::RankedHit;
    use alloc::string::ToString;
    use alloc::vec;

    fn cat(s: &str) -> CategoryId {
        CategoryId(s.to_string())
    }

    #[test]
    fn rand_index_hand_cases() {
        // {{a,b},{c}} vs {{a},{b},{c}}: pairs ab (disagree), ac, bc (agree).
        assert_eq!(rand_index(&[0, 0, 1], &[0, 1, 2]).unwrap(), 2.0 / 3.0);
        assert_eq!(rand_index(&[0, 0, 1], &[5, 5, 9]).unwrap(), 1.0);
        assert_eq!(
            rand_index(&[0, 1, 1, 2], &[0, 0, 1, 1]).unwrap(),
            rand_index(&[0, 0, 1, 1], &[0, 1, 1, 2]).unwrap()
        );
        assert!(rand_index(&[0], &[0, 1]).is_err());
        let mut a = BTreeMap::new();
        let mut b = BTreeMap::new();
        for (k, x, y) in [("a", 0, 0), ("b", 0, 1), ("c", 1, 2)] {
            a.insert(k.to_string(), x);
            b.insert(k.to_string(), y);
        }
        assert_eq!(rand_index_by_id(&a, &b).unwrap(), 2.0 / 3.0);
    }

    fn judged(cat_: &str, flags: &[bool]) -> JudgedQuery {
        JudgedQuery {
            category: cat(cat_),
            relevant: flags.to_vec(),
        }
    }

    #[test]
    fn precision_hand_count() {
        // Relevant at ranks 1 and 3 of a 4-clip pool.
        let q = judged("x", &[true, false, true, false]);
        assert!((precision_at(&q.relevant, 3) - 2.0 / 3.0).abs() < 1e-12);
        let curve = map_at_t(&[q], &[1, 2, 3, 4]).unwrap();
        let expected = [1.0, 0.5, 2.0 / 3.0, 0.5];
        for (m, e) in curve.map.iter().zip(expected) {
            assert!((m - e).abs() < 1e-12);
        }
    }

    #[test]
    fn map_excludes_vacuous_categories() {
        let perfect = judged("a", &[true, true, false]);
        let none = judged("b", &[false, false, false]);
        let curve = map_at_t(&[perfect, none], &[1, 2]).unwrap();
        assert_eq!(curve.map, vec![1.0, 1.0]);
        assert_eq!(curve.excluded, vec![cat("b")]);
    }

    #[test]
    fn map_hand_table() {
        // Category a: two queries; category b: one.
        let qs = [
            judged("a", &[true, false, false, true]),
            judged("a", &[false, true, true, false]),
            judged("b", &[false, false, true, true]),
        ];
        let curve = map_at_t(&qs, &[2, 4]).unwrap();
        // a@2 = (1/2 + 1/2)/2 = 0.5, a@4 = (2/4 + 2/4)/2 = 0.5; b@2 = 0, b@4 = 0.5.
        assert!((curve.map[0] - 0.25).abs() < 1e-12);
        assert!((curve.map[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn judge_requires_labels() {
        let r = RankedRetrieval {
            query_scene: "s".into(),
            query_clip: "q".into(),
            hits: vec![RankedHit {
                scene_id: "t".into(),
                clip_id: "x".into(),
                distance: 0.0,
            }],
        };
        let a = cat("a");
        assert!(judge_retrieval(&r, &a, |_, _| None).is_err());
        assert_eq!(
            judge_retrieval(&r, &a, |_, _| Some(&a)).unwrap().relevant,
            vec![true]
        );
    }

    #[test]
    fn accuracy_hand_table() {
        let space: BTreeSet<CategoryId> = ["x", "y", "z"].iter().map(|s| cat(s)).collect();
        let truth: Vec<CategoryId> = ["x", "x", "y", "y", "y", "z"]
            .iter()
            .map(|s| cat(s))
            .collect();
        let pred: Vec<CategoryId> = ["x", "y", "y", "y", "z", "x"]
            .iter()
            .map(|s| cat(s))
            .collect();
        let r = classification_accuracy(&truth, &pred, &space).unwrap();
        // x: 1/2, y: 2/3, z: 0/1.
        assert_eq!(
            r.per_category,
            vec![(cat("x"), 0.5), (cat("y"), 2.0 / 3.0), (cat("z"), 0.0)]
        );
        assert!((r.macro_average - (0.5 + 2.0 / 3.0) / 3.0).abs() < 1e-12);
        assert_eq!(
            classification_accuracy(&truth, &truth, &space)
                .unwrap()
                .macro_average,
            1.0
        );
        let half =
            classification_accuracy(&[cat("x"), cat("x")], &[cat("x"), cat("y")], &space).unwrap();
        assert_eq!(half.macro_average, 0.5);
        assert!(classification_accuracy(&[cat("x")], &[cat("w")], &space).is_err());
    }

    #[test]
    fn coverage_cases() {
        let pool = [cat("a"), cat("b"), cat("a")];
        assert_eq!(behavior_coverage(pool.iter(), pool.iter()), 1.0);
        assert_eq!(behavior_coverage([&pool[0]], pool.iter()), 0.5);
    }

    #[test]
    fn stability_of_identical_subsamples_is_zero() {
        let g = GridSpec::new(4, 4, 1, 5).unwrap();
        // Every clip is identical, so every subsample gives the same estimate.
        let clip_a =
            |i: usize| ClipDocument::from_counts(i.to_string(), "a", [(0, 2), (5, 1), (15, 1)]);
        let clip_b = |i: usize| ClipDocument::from_counts(i.to_string(), "b", [(1, 1), (6, 3)]);
        let a: Vec<ClipDocument> = (0..10).map(clip_a).collect();
        let b: Vec<ClipDocument> = (0..10).map(clip_b).collect();
        let c: Vec<ClipDocument> = (0..10).map(clip_a).collect();
        let scenes = [
            StabilityScene {
                scene_id: "a",
                clips: &a,
            },
            StabilityScene {
                scene_id: "b",
                clips: &b,
            },
            StabilityScene {
                scene_id: "c",
                clips: &c,
            },
        ];
        let r = alignment_stability(&scenes, &g, 0.5, 20, 3).unwrap();
        assert_eq!(r.pairs.len(), 3);
        assert_eq!(r.worst(), [0.0; 3]);
        let names: Vec<(&str, &str)> = r
            .pairs
            .iter()
            .map(|p| (p.scene_a.as_str(), p.scene_b.as_str()))
            .collect();
        assert_eq!(names, [("a", "b"), ("a", "c"), ("b", "c")]);
    }
}
